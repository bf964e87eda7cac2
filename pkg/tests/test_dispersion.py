"""Dispersion function: wavenumbers, root finding, closed-form oracles."""

import cmath
import json
import math

import numpy as np
import pytest

from resonavis.assembly import Fluid, MaterialConfig
from resonavis.dispersion import (
    DispersionError,
    DispersionProblem,
    contour_grid,
    dispersion_residual,
    dispersion_value,
    f_m,
    find_roots,
    homogeneous_lambda,
    inviscid_rectangle_modes,
    r_m,
    write_contour_csv,
    write_roots_json,
)
from resonavis.mesh import GeometryConfig

CAVITY = GeometryConfig(width=1.0, height=2.0, interface_height=1.25)
WATER = Fluid(rho=1000.0, c=1430.0)
AIR = Fluid(rho=1.0, c=340.0)
WATER_V = Fluid(rho=1000.0, c=1430.0, nu=9.0)
AIR_V = Fluid(rho=1.0, c=340.0, nu=1.0)

INVISCID = MaterialConfig(lower=WATER, upper=AIR)
VISCOUS = MaterialConfig(lower=WATER_V, upper=AIR_V)


def problem(m, materials=INVISCID):
    return DispersionProblem(m=m, geometry=CAVITY, materials=materials)


def test_wavenumber_limits():
    # m = 0, lossless: r = lambda / c up to the branch normalization
    r = r_m(problem(0), 1, 1430.0j)
    assert r == pytest.approx(1.0j, abs=1e-14)
    # lambda -> 0 with m > 0: r -> m pi / width
    r = r_m(problem(2), 2, 1e-12j)
    assert r == pytest.approx(2.0 * math.pi, abs=1e-9)


def test_wavenumber_degenerate_denominator():
    lam = -WATER_V.rho_c2 / (2.0 * WATER_V.nu)
    with pytest.raises(DispersionError, match="degenerate denominator"):
        r_m(problem(0, VISCOUS), 1, lam)


def test_mode_count_validation():
    with pytest.raises(ValueError):
        DispersionProblem(m=-1, geometry=CAVITY, materials=INVISCID)


def test_value_vanishes_at_frozen_roots():
    # froze from simplex polishing of |f_m| to below 1e-9
    cases = [
        (0, INVISCID, 1423.869998j),
        (1, INVISCID, 1068.361262j),
        (0, VISCOUS, -17.518204 + 1423.763518j),
        (1, VISCOUS, -9.873544 + 1068.315639j),
    ]
    for m, mats, root in cases:
        p = problem(m, mats)
        # roots frozen to 6 decimals, which bounds the residual near 1e-6
        assert dispersion_residual(p, root) < 1e-5, (m, mats)
        off = root + 40.0j
        assert dispersion_residual(p, off) > 1e-3


def test_conjugate_symmetry():
    rng = np.random.default_rng(19)
    for _ in range(100):
        lam = complex(rng.uniform(-150.0, 0.0), rng.uniform(900.0, 3600.0))
        for p in (problem(1), problem(2, VISCOUS)):
            a = f_m(p, lam)
            b = f_m(p, lam.conjugate())
            assert b == pytest.approx(a.conjugate(), rel=1e-12)


def test_plain_and_scaled_forms_agree():
    p = problem(1, VISCOUS)
    lam = complex(-40.0, 2500.0)
    val = dispersion_value(p, lam)
    assert not val.scaled_form
    r1 = r_m(p, 1, lam)
    r2 = r_m(p, 2, lam)
    a1 = r1 * CAVITY.interface_height
    a2 = r2 * (CAVITY.interface_height - CAVITY.height)
    tanh_form = r1 / WATER_V.rho * cmath.tanh(a1) - r2 / AIR_V.rho * cmath.tanh(a2)
    plain_scaled = val.value / (cmath.cosh(a1) * cmath.cosh(a2))
    assert plain_scaled == pytest.approx(tanh_form, rel=1e-12)
    # far out on the real axis the sinh/cosh products overflow doubles
    far = dispersion_value(p, complex(-3.0e5, 1000.0))
    assert far.scaled_form
    assert np.isfinite(far.value.real) and np.isfinite(far.value.imag)


def test_homogeneous_lambda_satisfies_quadratic():
    rng = np.random.default_rng(29)
    for _ in range(100):
        rho = rng.uniform(0.5, 2000.0)
        c = rng.uniform(10.0, 2000.0)
        nu = rng.uniform(0.0, 20.0)
        omega = rng.uniform(10.0, 5000.0)
        plus, minus = homogeneous_lambda(rho, c, nu, omega)
        rho_c2 = rho * c * c
        scale = rho_c2 * omega * omega
        for lam in (plus, minus):
            res = rho_c2 * lam * lam + 2.0 * nu * omega * omega * lam + rho_c2 * omega * omega
            assert abs(res) <= 1e-9 * scale
        assert plus.imag >= minus.imag
        # Vieta: product omega^2, sum -2 nu omega^2 / (rho c^2)
        assert plus * minus == pytest.approx(omega * omega, rel=1e-10)
        assert plus + minus == pytest.approx(-2.0 * nu * omega * omega / rho_c2, rel=1e-9, abs=1e-12)


def test_homogeneous_cavity_roots_match_one_dimensional_modes():
    # same fluid in both layers: vertical standing waves at c k pi / height
    both_water = MaterialConfig(lower=WATER, upper=WATER)
    p = DispersionProblem(m=0, geometry=CAVITY, materials=both_water)
    roots = find_roots(p, box=((-50.0, 50.0), (1000.0, 5000.0)), grid=(24, 48))
    expected = [1430.0 * k * math.pi / 2.0 for k in (1, 2)]
    assert len(roots) == 2
    for root, omega in zip(roots, expected):
        assert root.imag == pytest.approx(omega, abs=1e-6 * omega)
        assert abs(root.real) < 1e-6 * omega


def test_find_roots_recovers_frozen_roots():
    p = problem(0, VISCOUS)
    roots = find_roots(p, box=((-120.0, 20.0), (1200.0, 1900.0)), grid=(24, 32))
    expected = [-17.518204 + 1423.763518j, -0.049185 + 1797.241818j]
    assert len(roots) == 2
    for got, want in zip(roots, expected):
        assert got == pytest.approx(want, abs=1e-4)


def test_find_roots_empty_box_warns(caplog):
    p = problem(0)
    with caplog.at_level("WARNING", logger="resonavis.dispersion"):
        roots = find_roots(p, box=((-50.0, 50.0), (100.0, 900.0)), grid=(16, 16))
    assert roots == []
    assert any("no dispersion roots" in rec.message for rec in caplog.records)


def test_rectangle_mode_frequencies():
    modes = inviscid_rectangle_modes(1.0, 2.0, 340.0, 4)
    assert modes[0] == pytest.approx(170.0 * math.pi, rel=1e-12)
    expected = sorted(
        340.0 * math.pi * math.hypot(m, n / 2.0)
        for m in range(4)
        for n in range(4)
        if (m, n) != (0, 0)
    )[:4]
    np.testing.assert_allclose(modes, expected, rtol=1e-12)
    with pytest.raises(ValueError):
        inviscid_rectangle_modes(1.0, 2.0, 340.0, 0)


def test_contour_grid_and_csv(tmp_path):
    p = problem(0)
    xs, ys, vals = contour_grid(p, ((-10.0, 10.0), (1400.0, 1450.0)), (5, 4))
    assert xs.shape == (5,) and ys.shape == (4,) and vals.shape == (4, 5)
    assert np.all(vals >= -16.0)  # clamped log magnitude
    path = tmp_path / "contour.csv"
    write_contour_csv(path, xs, ys, vals)
    lines = path.read_text(encoding="ascii").splitlines()
    assert lines[0] == "re,im,log10_abs_fm"
    assert len(lines) == 1 + 20
    first = [float(tok) for tok in lines[1].split(",")]
    assert first[0] == xs[0] and first[1] == ys[0] and first[2] == vals[0, 0]


def test_roots_json_round_trip(tmp_path):
    entries = [
        {"m": 0, "lambda_re": -17.5, "lambda_im": 1423.76, "abs_fm": 1e-15},
        {"m": 1, "lambda_re": -9.87, "lambda_im": 1068.32, "abs_fm": 2e-14},
    ]
    path = tmp_path / "roots.json"
    write_roots_json(path, entries)
    assert json.loads(path.read_text(encoding="ascii")) == entries
