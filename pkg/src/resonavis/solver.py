"""Shift-invert Arnoldi solver for the quadratic eigenvalue problem.

The discrete vibration problem is (lam^2 M + lam K1 + K2) u = 0 with M
symmetric positive definite and K1, K2 symmetric positive semidefinite on
the interior-edge degrees of freedom.  It is linearized as A y = lam B y,

    A = [[-K1, -K2],      B = [[M, 0],
         [  M,    0]],         [0, M]],

whose B is Hermitian positive definite.  Arnoldi iterations run on the
shift-inverted operator (A - sigma B)^-1 B.  Each application is reduced to
one solve with M and one with Q(sigma) = sigma^2 M + sigma K1 + K2, so the
2n-by-2n block matrix is never factorized.  Ritz values theta map back to
eigenvalue estimates lam = sigma + 1/theta; the Ritz pairs closest to the
shift converge first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from .assembly import MaterialConfig, assemble_global
from .dispersion import inviscid_rectangle_modes
from .linalg import SingularMatrixError, arnoldi, factor_complex, factor_spd
from .mesh import GeometryConfig, Mesh


class SolverError(RuntimeError):
    """Raised when the eigenvalue iteration cannot produce usable output."""


class NoConvergedPairsError(SolverError):
    """All requested Ritz pairs stayed above the residual tolerance."""


@dataclass(frozen=True)
class QuadraticPencil:
    """Matrices of the quadratic pencil plus provenance metadata.

    ``m`` must be symmetric positive definite, ``k1`` and ``k2`` symmetric
    positive semidefinite, all sharing one square shape.  ``materials`` and
    ``refinement`` record where the matrices came from; they are optional
    for synthetic pencils.
    """

    m: sp.csr_matrix
    k1: sp.csr_matrix
    k2: sp.csr_matrix
    materials: MaterialConfig | None = None
    refinement: int | None = None

    def __post_init__(self) -> None:
        shape = self.m.shape
        if shape[0] != shape[1]:
            raise ValueError(f"pencil matrices must be square, got {shape}")
        for name, mat in (("k1", self.k1), ("k2", self.k2)):
            if mat.shape != shape:
                raise ValueError(
                    f"{name} has shape {mat.shape}, expected {shape}"
                )
        if self.materials is not None:
            k1_zero = self.k1.nnz == 0 or abs(self.k1).max() == 0.0
            if k1_zero != self.materials.inviscid:
                raise ValueError(
                    "damping matrix must vanish exactly when both "
                    "viscosities are zero"
                )

    @property
    def n(self) -> int:
        return self.m.shape[0]

    @property
    def inviscid(self) -> bool:
        if self.materials is not None:
            return self.materials.inviscid
        return self.k1.nnz == 0 or abs(self.k1).max() == 0.0


def build_pencil(mesh: Mesh, materials: MaterialConfig) -> QuadraticPencil:
    """Assemble the pencil for a mesh, keeping provenance metadata."""
    m, k1, k2 = assemble_global(mesh, materials)
    return QuadraticPencil(
        m=m, k1=k1, k2=k2, materials=materials, refinement=mesh.refinement
    )


@dataclass(frozen=True, eq=False)
class EigenPair:
    """One computed eigenvalue with its normalized edge-DOF eigenvector."""

    value: complex
    vector: np.ndarray
    residual: float
    converged: bool
    warnings: tuple[str, ...] = ()

    @property
    def decay_rate(self) -> float:
        return self.value.real

    @property
    def frequency(self) -> float:
        return self.value.imag


@dataclass(frozen=True)
class SpectralBand:
    """Essential-spectrum band in both the mu and the lambda variables.

    ``mu_interval`` is the band of the inverted spectral variable (seconds);
    ``magnitude_interval`` holds the reciprocal bounds for |lambda| (1/s).
    Without viscosity the mu interval collapses to {0} and the magnitude
    interval is flagged with infinities.
    """

    mu_interval: tuple[float, float]
    magnitude_interval: tuple[float, float]

    def __post_init__(self) -> None:
        lo, hi = self.mu_interval
        if not (0.0 <= lo <= hi):
            raise ValueError(f"invalid mu interval [{lo}, {hi}]")

    @property
    def degenerate(self) -> bool:
        return self.mu_interval[1] == 0.0

    def contains_magnitude(self, magnitude: float) -> bool:
        lo, hi = self.magnitude_interval
        return lo <= magnitude <= hi


def essential_band(materials: MaterialConfig) -> SpectralBand:
    """Band of non-isolated spectrum determined by 2*nu/(rho*c^2) ratios."""
    nus = [fluid.nu for fluid in materials.fluids]
    stiff = [fluid.rho_c2 for fluid in materials.fluids]
    mu_lo = 2.0 * min(nus) / max(stiff)
    mu_hi = 2.0 * max(nus) / min(stiff)
    if mu_hi == 0.0:
        return SpectralBand(
            mu_interval=(0.0, 0.0), magnitude_interval=(math.inf, math.inf)
        )
    mag_lo = 1.0 / mu_hi
    mag_hi = math.inf if mu_lo == 0.0 else 1.0 / mu_lo
    return SpectralBand(
        mu_interval=(mu_lo, mu_hi), magnitude_interval=(mag_lo, mag_hi)
    )


@dataclass(frozen=True)
class ShiftInvertOperator:
    """Precomputed factorizations for applying (A - sigma B)^-1 B."""

    pencil: QuadraticPencil
    sigma: complex
    _m_factor: object
    _q_factor: object

    @property
    def size(self) -> int:
        return 2 * self.pencil.n

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return shift_invert_apply(self, x)


def prepare_shift_invert(
    pencil: QuadraticPencil, sigma: complex
) -> ShiftInvertOperator:
    """Factorize M and Q(sigma); raises SingularMatrixError at eigenvalues."""
    sigma = complex(sigma)
    shifted = (
        (sigma * sigma) * pencil.m.astype(complex)
        + sigma * pencil.k1
        + pencil.k2
    ).tocsc()
    m_factor = factor_spd(pencil.m)
    q_factor = factor_complex(shifted)
    return ShiftInvertOperator(
        pencil=pencil, sigma=sigma, _m_factor=m_factor, _q_factor=q_factor
    )


def shift_invert_apply(
    operator: ShiftInvertOperator, x: np.ndarray
) -> np.ndarray:
    """Apply y = (A - sigma B)^-1 B x through the n-by-n reduction.

    With x = (x1; x2) and b = Bx: z = M^-1 b2, then
    w = -Q(sigma)^-1 (b1 + K1 z + sigma M z), and y = (sigma w + z; w).
    """
    pencil = operator.pencil
    n = pencil.n
    x = np.asarray(x)
    if x.shape[0] != 2 * n:
        raise ValueError(f"vector length {x.shape[0]}, expected {2 * n}")
    sigma = operator.sigma
    b1 = pencil.m @ x[:n]
    b2 = pencil.m @ x[n:]
    z = operator._m_factor.solve(b2)
    w = -operator._q_factor.solve(b1 + pencil.k1 @ z + sigma * (pencil.m @ z))
    return np.concatenate([sigma * w + z, w])


def _one_norms(pencil: QuadraticPencil) -> tuple[float, float, float]:
    def norm1(mat: sp.spmatrix) -> float:
        if mat.nnz == 0:
            return 0.0
        return float(scipy.sparse.linalg.norm(mat, 1))

    return norm1(pencil.m), norm1(pencil.k1), norm1(pencil.k2)


def _relative_residual(
    pencil: QuadraticPencil,
    norms: tuple[float, float, float],
    lam: complex,
    u: np.ndarray,
) -> float:
    r = lam * lam * (pencil.m @ u) + lam * (pencil.k1 @ u) + pencil.k2 @ u
    scale = abs(lam) ** 2 * norms[0] + abs(lam) * norms[1] + norms[2]
    denom = scale * np.linalg.norm(u)
    if denom == 0.0:
        return math.inf
    return float(np.linalg.norm(r) / denom)


def _extract_pairs(
    pencil: QuadraticPencil,
    norms: tuple[float, float, float],
    sigma: complex,
    basis: np.ndarray,
    hess: np.ndarray,
    nev: int,
    tol: float,
) -> list[EigenPair]:
    """Ritz extraction: closest-to-shift pairs with explicit residuals."""
    k = hess.shape[1]
    theta, small_vecs = np.linalg.eig(hess[:k, :k])
    magnitudes = np.abs(theta)
    floor = 1e-12 * max(float(magnitudes.max(initial=0.0)), 1.0)
    n = pencil.n
    pairs: list[EigenPair] = []
    for idx in np.argsort(-magnitudes):
        if len(pairs) == nev:
            break
        if magnitudes[idx] <= floor:
            continue
        lam = sigma + 1.0 / complex(theta[idx])
        y = basis[:, :k] @ small_vecs[:, idx]
        y_norm = np.linalg.norm(y)
        best: tuple[np.ndarray, float] | None = None
        # either block solves the quadratic problem; keep the cleaner one
        for block in (y[n:], y[:n]):
            block_norm = np.linalg.norm(block)
            if block_norm <= 1e-14 * y_norm:
                continue
            u = block / block_norm
            res = _relative_residual(pencil, norms, lam, u)
            if best is None or res < best[1]:
                best = (u, res)
        if best is None:
            continue
        u, res = best
        pairs.append(
            EigenPair(
                value=lam, vector=u, residual=res, converged=res <= tol
            )
        )
    return pairs


def _expand_decomposition(
    op: Callable[[np.ndarray], np.ndarray],
    basis: np.ndarray,
    hess: np.ndarray,
    target: int,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Grow an orthonormal Krylov decomposition op*V[:, :j] = V H to size
    ``target``; the leading block of ``hess`` may be dense (post-restart)."""
    size = basis.shape[0]
    have = hess.shape[1]
    big_v = np.zeros((size, target + 1), dtype=complex)
    big_v[:, : have + 1] = basis
    big_h = np.zeros((target + 1, target), dtype=complex)
    big_h[: have + 1, :have] = hess
    for j in range(have, target):
        w = op(big_v[:, j])
        coeff = big_v[:, : j + 1].conj().T @ w
        w = w - big_v[:, : j + 1] @ coeff
        second = big_v[:, : j + 1].conj().T @ w
        w = w - big_v[:, : j + 1] @ second
        coeff = coeff + second
        beta = np.linalg.norm(w)
        big_h[: j + 1, j] = coeff
        big_h[j + 1, j] = beta
        if beta < 1e-12:
            return big_v[:, : j + 2], big_h[: j + 2, : j + 1], True
        big_v[:, j + 1] = w / beta
    return big_v, big_h, False


def _thick_restart(
    basis: np.ndarray, hess: np.ndarray, keep: int
) -> tuple[np.ndarray, np.ndarray]:
    """Compress the decomposition to the ``keep`` Ritz values of largest
    magnitude (the eigenvalues nearest the shift)."""
    k = hess.shape[1]
    if keep >= k:
        return basis, hess
    square = hess[:k, :k]
    coupling = hess[k, :k]
    plain = scipy.linalg.schur(square, output="complex")
    theta = np.diag(plain[0])
    cutoff = np.sort(np.abs(theta))[k - keep]
    tri, unitary, selected = scipy.linalg.schur(
        square, output="complex", sort=lambda z: abs(z) >= cutoff
    )
    if selected == 0 or selected >= k:
        return basis, hess
    new_basis = np.empty((basis.shape[0], selected + 1), dtype=complex)
    new_basis[:, :selected] = basis[:, :k] @ unitary[:, :selected]
    new_basis[:, selected] = basis[:, k]
    new_hess = np.zeros((selected + 1, selected), dtype=complex)
    new_hess[:selected, :] = tri[:selected, :selected]
    new_hess[selected, :] = coupling @ unitary[:, :selected]
    return new_basis, new_hess


def solve_qep(
    pencil: QuadraticPencil,
    sigma: complex,
    nev: int = 12,
    krylov_dim: int = 80,
    tol: float = 1e-8,
    seed: int = 0,
    max_restarts: int = 5,
) -> list[EigenPair]:
    """Compute the ``nev`` eigenpairs of the pencil closest to ``sigma``.

    Runs shift-invert Arnoldi with thick restarts (keeping 2*nev Ritz
    vectors, at most ``max_restarts`` restarts).  If Q(sigma) is singular
    the shift is nudged by 1e-3*|sigma| along the real axis, up to three
    times.  Pairs are reported as found from a single complex shift, so
    conjugate partners are not guaranteed to appear together.

    Raises NoConvergedPairsError when every returned pair is above ``tol``.
    """
    if nev < 1:
        raise ValueError("nev must be positive")
    if not nev < krylov_dim <= 200:
        raise ValueError("need nev < krylov_dim <= 200")
    size = 2 * pencil.n
    steps = min(krylov_dim, size)

    sigma = complex(sigma)
    operator: ShiftInvertOperator | None = None
    shift = sigma
    for attempt in range(4):
        try:
            operator = prepare_shift_invert(pencil, shift)
            break
        except SingularMatrixError:
            if attempt == 3:
                raise
            shift = sigma + (attempt + 1) * 1e-3 * abs(sigma)

    rng = np.random.default_rng(seed)
    start = rng.standard_normal(size).astype(complex)
    state = arnoldi(operator, start, steps)
    basis, hess = state.basis, state.hessenberg
    exhausted = state.breakdown

    norms = _one_norms(pencil)
    pairs = _extract_pairs(pencil, norms, shift, basis, hess, nev, tol)
    for _ in range(max_restarts):
        if exhausted or (pairs and all(p.converged for p in pairs)):
            break
        basis, hess = _thick_restart(basis, hess, 2 * nev)
        basis, hess, exhausted = _expand_decomposition(
            operator, basis, hess, steps
        )
        pairs = _extract_pairs(pencil, norms, shift, basis, hess, nev, tol)

    if not any(p.converged for p in pairs):
        raise NoConvergedPairsError(
            f"no Ritz pair reached residual {tol:.1e} near shift {sigma}"
        )
    return pairs


@dataclass(frozen=True)
class ResidualReport:
    """Outcome of re-checking one eigenpair against the pencil."""

    residual: float
    converged: bool
    warnings: tuple[str, ...]


def check_eigenpair(
    pencil: QuadraticPencil, pair: EigenPair, tol: float = 1e-8
) -> ResidualReport:
    """Recompute the relative quadratic residual and sign diagnostics.

    A positive decay rate in a viscous model and a non-tiny real part in a
    lossless model are reported as warnings, not errors: both can occur as
    discretization artifacts.
    """
    u = np.asarray(pair.vector)
    if np.linalg.norm(u) == 0.0:
        raise ValueError("eigenvector must be nonzero")
    lam = complex(pair.value)
    residual = _relative_residual(pencil, _one_norms(pencil), lam, u)
    warnings: list[str] = []
    if pencil.inviscid:
        if abs(lam.real) > 1e-6 * abs(lam):
            warnings.append(
                f"lossless model but Re(lambda) = {lam.real:.3e} "
                f"exceeds 1e-6*|lambda|"
            )
    elif lam != 0 and lam.real >= 0.0:
        warnings.append(
            f"viscous model but Re(lambda) = {lam.real:.3e} is not negative"
        )
    return ResidualReport(
        residual=residual, converged=residual <= tol, warnings=tuple(warnings)
    )


def filter_spurious(
    pairs: Sequence[EigenPair],
    band: SpectralBand,
    tol_imag: float = 1e-3,
) -> tuple[list[EigenPair], list[EigenPair]]:
    """Split pairs into (kept, discarded) around the essential band.

    Near-real values (|Im| <= tol_imag*|lambda|) whose magnitude falls in
    the band are discarded as essential-spectrum artifacts.  Near-real
    values outside the band are kept but annotated, since the discrete band
    edges are only approximate.  With zero viscosity the band is degenerate
    and nothing is discarded.
    """
    kept: list[EigenPair] = []
    discarded: list[EigenPair] = []
    for pair in pairs:
        lam = complex(pair.value)
        near_real = abs(lam.imag) <= tol_imag * abs(lam)
        if near_real and not band.degenerate:
            if band.contains_magnitude(abs(lam)):
                discarded.append(pair)
                continue
            pair = replace(
                pair,
                warnings=pair.warnings
                + ("near-real eigenvalue outside the essential band",),
            )
        kept.append(pair)
    return kept, discarded


def fit_convergence_order(samples: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(error) against log(h).

    ``samples`` are (h, error) pairs with h strictly decreasing and
    positive errors; at least three samples are required.
    """
    if len(samples) < 3:
        raise ValueError("need at least three (h, error) samples")
    hs = np.array([s[0] for s in samples], dtype=float)
    errors = np.array([s[1] for s in samples], dtype=float)
    if np.any(hs <= 0.0) or np.any(np.diff(hs) >= 0.0):
        raise ValueError("mesh sizes must be positive and strictly decreasing")
    if np.any(errors <= 0.0):
        raise ValueError("errors must be positive")
    slope = np.polyfit(np.log(hs), np.log(errors), 1)[0]
    return float(slope)


def default_shift(
    geometry: GeometryConfig, materials: MaterialConfig
) -> complex:
    """Imaginary shift just below the lowest single-fluid cavity estimate."""
    interface = geometry.interface_height
    spans = (
        (materials.lower, interface),
        (materials.upper, geometry.height - interface),
    )
    estimates = []
    for fluid, depth in spans:
        modes = inviscid_rectangle_modes(geometry.width, depth, fluid.c, 1)
        if len(modes):
            estimates.append(float(modes[0]))
    return 1j * (0.9 * min(estimates))
