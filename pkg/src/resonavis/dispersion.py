"""Exact eigenvalues of the two-layer cavity from its dispersion function.

Separating variables with m half-waves across the width reduces the
eigenvalue problem to a scalar transcendental equation per m: the layer
wavenumbers are

    r_i(lambda) = sqrt(lambda^2 rho_i / (rho_i c_i^2 + 2 nu_i lambda)
                       + (m pi / width)^2)

and lambda is an eigenvalue exactly when

    f_m(lambda) = (r_1 / rho_1) sinh(r_1 H) cosh(r_2 (H - B))
                - (r_2 / rho_2) sinh(r_2 (H - B)) cosh(r_1 H) = 0

with H the interface elevation and B the cavity height.  Every quantity
is even in the sign of each r_i, so the square-root branch does not
matter.  Roots are located by scanning |f_m| on a rectangular grid and
polishing each local minimum with a derivative-free simplex search.
"""

from __future__ import annotations

import cmath
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .assembly import MaterialConfig
from .mesh import GeometryConfig

logger = logging.getLogger(__name__)

# beyond this combined exponent the sinh/cosh products overflow doubles
# long before they lose the root locations, so switch to the tanh form
_SCALED_FORM_THRESHOLD = 30.0


class DispersionError(ValueError):
    """Raised when the dispersion function is evaluated outside its domain."""


@dataclass(frozen=True)
class DispersionProblem:
    """Transcendental eigenvalue problem for one transverse mode count m."""

    m: int
    geometry: GeometryConfig
    materials: MaterialConfig

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ValueError("m must be nonnegative")


@dataclass(frozen=True)
class DispersionValue:
    """One evaluation of f_m with bookkeeping flags."""

    value: complex
    scaled_form: bool
    cosh_near_zero: bool


def r_m(problem: DispersionProblem, subdomain: int, lam: complex) -> complex:
    """Layer wavenumber r_m in the given subdomain, principal branch."""
    fluid = problem.materials.fluid(subdomain)
    den = fluid.rho_c2 + 2.0 * fluid.nu * lam
    if abs(den) < 1e-12 * fluid.rho_c2:
        raise DispersionError(
            f"degenerate denominator rho c^2 + 2 nu lambda at lambda = {lam}"
        )
    k = problem.m * cmath.pi / problem.geometry.width
    return cmath.sqrt(lam * lam * fluid.rho / den + k * k)


def _canonical(r: complex) -> complex:
    # fix the sign so callers may hand in either square-root branch
    if r.real < 0 or (r.real == 0 and r.imag < 0):
        return -r
    return r


def _evaluate(problem: DispersionProblem, r1: complex, r2: complex) -> DispersionValue:
    """f_m from given wavenumbers; exactly even in the sign of each r."""
    geom = problem.geometry
    rho1 = problem.materials.lower.rho
    rho2 = problem.materials.upper.rho
    a1 = _canonical(r1) * geom.interface_height
    a2 = _canonical(r2) * (geom.interface_height - geom.height)
    r1 = _canonical(r1)
    r2 = _canonical(r2)

    if abs(a1.real) + abs(a2.real) > _SCALED_FORM_THRESHOLD:
        value = r1 / rho1 * cmath.tanh(a1) - r2 / rho2 * cmath.tanh(a2)
        return DispersionValue(value=value, scaled_form=True, cosh_near_zero=False)

    cosh1 = cmath.cosh(a1)
    cosh2 = cmath.cosh(a2)
    value = r1 / rho1 * cmath.sinh(a1) * cosh2 - r2 / rho2 * cmath.sinh(a2) * cosh1
    near_zero = abs(cosh1) < 1e-10 or abs(cosh2) < 1e-10
    return DispersionValue(value=value, scaled_form=False, cosh_near_zero=near_zero)


def dispersion_value(problem: DispersionProblem, lam: complex) -> DispersionValue:
    """Evaluate f_m at lambda, with form and cosh-proximity flags."""
    return _evaluate(problem, r_m(problem, 1, lam), r_m(problem, 2, lam))


def f_m(problem: DispersionProblem, lam: complex) -> complex:
    """Value of the dispersion function f_m at lambda."""
    return dispersion_value(problem, lam).value


def dispersion_residual(problem: DispersionProblem, lam: complex) -> float:
    """|f_m| relative to the magnitudes of its two summands.

    Near a root the two products cancel, so this drops far below one; away
    from roots it is O(1).  Useful to judge closeness to a root at a scale
    the raw |f_m| (which grows exponentially) cannot convey.
    """
    geom = problem.geometry
    r1 = r_m(problem, 1, lam)
    r2 = r_m(problem, 2, lam)
    a1 = r1 * geom.interface_height
    a2 = r2 * (geom.interface_height - geom.height)
    if abs(a1.real) + abs(a2.real) > _SCALED_FORM_THRESHOLD:
        t1 = r1 / problem.materials.lower.rho * cmath.tanh(a1)
        t2 = r2 / problem.materials.upper.rho * cmath.tanh(a2)
    else:
        t1 = r1 / problem.materials.lower.rho * cmath.sinh(a1) * cmath.cosh(a2)
        t2 = r2 / problem.materials.upper.rho * cmath.sinh(a2) * cmath.cosh(a1)
    scale = abs(t1) + abs(t2)
    if scale == 0.0:
        return 0.0
    return abs(t1 - t2) / scale


def find_roots(
    problem: DispersionProblem,
    box: tuple[tuple[float, float], tuple[float, float]],
    grid: tuple[int, int] = (48, 48),
    tol: float = 1e-8,
) -> list[complex]:
    """Locate roots of f_m inside a rectangle of the complex plane.

    Parameters
    ----------
    problem : DispersionProblem
    box : ((re_lo, re_hi), (im_lo, im_hi))
        Search rectangle.
    grid : (nx, ny)
        Scan resolution, at least 16 points per axis.
    tol : float
        A polished point counts as a root when |f_m| there is below
        ``tol`` times the median |f_m| over the scan grid.

    Returns
    -------
    list of complex
        Deduplicated roots sorted by |Im lambda|; empty (with a logged
        diagnostic) when the box contains none.

    Notes
    -----
    Every local minimum of |f_m| on the grid seeds a Nelder-Mead simplex
    whose diameter stopping threshold is 1e-10 relative to the iterate
    scale.  Plateau minima (exact ties with a neighbor, which occur on
    symmetric grids) seed one search per plateau cell.
    """
    (re_lo, re_hi), (im_lo, im_hi) = box
    nx, ny = grid
    if nx < 16 or ny < 16:
        raise ValueError("grid must be at least 16 x 16")
    if not (re_lo < re_hi and im_lo < im_hi):
        raise ValueError("box must have positive extent")

    xs = np.linspace(re_lo, re_hi, nx)
    ys = np.linspace(im_lo, im_hi, ny)
    mag = np.empty((ny, nx))
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            mag[j, i] = abs(f_m(problem, complex(x, y)))

    median = float(np.median(mag))
    accept = tol * max(median, 1e-300)

    # local minima, tolerating exact ties with neighbors
    padded = np.full((ny + 2, nx + 2), np.inf)
    padded[1:-1, 1:-1] = mag
    is_min = np.ones((ny, nx), dtype=bool)
    for dj in (-1, 0, 1):
        for di in (-1, 0, 1):
            if dj == 0 and di == 0:
                continue
            is_min &= mag <= padded[1 + dj : ny + 1 + dj, 1 + di : nx + 1 + di]
    seeds = [complex(xs[i], ys[j]) for j, i in zip(*np.nonzero(is_min))]

    dx = (re_hi - re_lo) / (nx - 1)
    dy = (im_hi - im_lo) / (ny - 1)
    roots: list[complex] = []
    for seed in seeds:
        simplex = np.array(
            [
                [seed.real, seed.imag],
                [seed.real + dx, seed.imag],
                [seed.real, seed.imag + dy],
            ]
        )
        scale = max(1.0, abs(seed))
        result = minimize(
            lambda p: abs(f_m(problem, complex(p[0], p[1]))),
            simplex[0],
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": 1e-10 * scale,
                "fatol": 0.0,
                "maxiter": 600,
                "maxfev": 1200,
            },
        )
        lam = complex(result.x[0], result.x[1])
        if abs(f_m(problem, lam)) > accept:
            continue
        if not (re_lo - dx <= lam.real <= re_hi + dx and im_lo - dy <= lam.imag <= im_hi + dy):
            continue
        if any(abs(lam - r) <= 1e-6 * max(1.0, abs(lam), abs(r)) for r in roots):
            continue
        roots.append(lam)

    if not roots:
        logger.warning(
            "no dispersion roots for m=%d in [%g, %g] x [%g, %g]i (%d seeds scanned)",
            problem.m, re_lo, re_hi, im_lo, im_hi, len(seeds),
        )
    return sorted(roots, key=lambda z: abs(z.imag))


def homogeneous_lambda(
    rho: float, c: float, nu: float, omega: float
) -> tuple[complex, complex]:
    """Damped eigenvalue pair of a uniform fluid from its lossless frequency.

    When the same fluid fills the whole cavity, each lossless frequency
    omega turns into the conjugate pair

        lambda = (-nu omega^2 +- sqrt(nu^2 omega^4 - rho^2 c^4 omega^2))
                 / (rho c^2),

    equivalently the roots of rho c^2 lambda^2 + 2 nu omega^2 lambda
    + rho c^2 omega^2 = 0.  Returns the root with nonnegative imaginary
    part first.
    """
    rho_c2 = rho * c * c
    disc = cmath.sqrt(nu * nu * omega**4 - rho_c2 * rho_c2 * omega * omega)
    plus = (-nu * omega * omega + disc) / rho_c2
    minus = (-nu * omega * omega - disc) / rho_c2
    if plus.imag >= minus.imag:
        return plus, minus
    return minus, plus


def inviscid_rectangle_modes(
    width: float, height: float, c: float, count: int
) -> np.ndarray:
    """Smallest ``count`` lossless frequencies of a rigid rectangle.

    omega_{mn} = c pi sqrt((m / width)^2 + (n / height)^2) over integer
    pairs (m, n) != (0, 0), ascending.
    """
    if count < 1:
        raise ValueError("count must be positive")
    k = 1
    while True:
        k *= 2
        vals = []
        for m in range(k + 1):
            for n in range(k + 1):
                if m == 0 and n == 0:
                    continue
                vals.append(c * np.pi * np.hypot(m / width, n / height))
        vals.sort()
        # complete below the smallest frequency an out-of-range pair could have
        cutoff = c * np.pi * k * min(1.0 / width, 1.0 / height)
        inside = [v for v in vals if v < cutoff]
        if len(inside) >= count:
            return np.array(inside[:count])


def contour_grid(
    problem: DispersionProblem,
    box: tuple[tuple[float, float], tuple[float, float]],
    grid: tuple[int, int],
):
    """log10 |f_m| sampled on a rectangular grid, clamped at -16.

    Returns (re_axis, im_axis, values) with ``values[j, i]`` the clamped
    log-magnitude at re_axis[i] + 1j * im_axis[j].
    """
    (re_lo, re_hi), (im_lo, im_hi) = box
    nx, ny = grid
    if nx < 2 or ny < 2:
        raise ValueError("grid must be at least 2 x 2")
    xs = np.linspace(re_lo, re_hi, nx)
    ys = np.linspace(im_lo, im_hi, ny)
    vals = np.empty((ny, nx))
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            mag = abs(f_m(problem, complex(x, y)))
            vals[j, i] = np.log10(mag) if mag > 0 else -16.0
    return xs, ys, np.maximum(vals, -16.0)


def write_contour_csv(path, re_axis, im_axis, values) -> None:
    """Write a contour grid as ``re,im,log10_abs_fm`` rows."""
    with open(path, "w", encoding="ascii") as out:
        out.write("re,im,log10_abs_fm\n")
        for j, y in enumerate(im_axis):
            for i, x in enumerate(re_axis):
                out.write(f"{x:.17g},{y:.17g},{values[j, i]:.17g}\n")


def write_roots_json(path, entries: list[dict]) -> None:
    """Write dispersion roots as a JSON list.

    Each entry carries ``m``, ``lambda_re``, ``lambda_im`` and ``abs_fm``.
    """
    import json

    with open(path, "w", encoding="ascii") as out:
        json.dump(entries, out, indent=2, sort_keys=True)
        out.write("\n")
