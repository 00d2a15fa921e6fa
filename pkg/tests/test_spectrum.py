import math

import numpy as np
import pytest

from conftest import GOLDEN_Y, LN2
from multiergodic import validate_spec
from multiergodic.pressure import pressure_point
from multiergodic.spectrum import (
    alpha_star,
    constraint_curve,
    estimate_support,
    minimize_constraint_curve,
    solve_critical,
    spectrum_curve,
)
from multiergodic.system import bowen_dimension


def test_alpha_star_sym(sym):
    a, r0, d0 = alpha_star(sym)
    assert abs(a - 0.25) < 1e-12 and abs(r0 + 2) < 1e-12 and abs(d0 - 1) < 1e-12


def test_alpha_star_golden(golden):
    a, r0, d0 = alpha_star(golden)
    assert abs(r0 - 2 * math.log2(GOLDEN_Y)) < 1e-10
    assert abs(d0 - 0.694242) < 1e-6
    assert abs(a - GOLDEN_Y**4) < 1e-10


def test_alpha_star_constant(const):
    a, _, d0 = alpha_star(const)
    assert a == pytest.approx(0.7, abs=1e-12)
    assert abs(d0 - bowen_dimension(const.lambdas)) < 1e-9


def test_critical_hand_point(sym):
    p = solve_critical(sym, 0.25)
    assert p.converged
    assert abs(p.s) < 1e-8 and abs(p.r + 2) < 1e-8 and abs(p.dim - 1) < 1e-8
    assert p.paper_dim == pytest.approx(-2 / (2 * LN2))


def test_critical_constant(const):
    p = solve_critical(const, 0.7)
    assert p.converged and abs(p.dim - 0.694242) < 1e-6
    assert not solve_critical(const, 0.6).converged


def test_critical_below_peak_and_constraint_oracle(sym):
    p = solve_critical(sym, 0.2)
    top = solve_critical(sym, 0.25)
    assert p.converged and p.dim < 1 and p.dim < top.dim
    s_min, val = minimize_constraint_curve(sym, 0.2)
    assert abs(val - p.dim) < 1e-8
    assert abs(s_min - p.s) < 1e-3


@pytest.mark.parametrize("alpha", [0.1, 0.35, 0.6])
def test_critical_residual_and_range(golden, alpha):
    p = solve_critical(golden, alpha)
    assert p.converged
    pp = pressure_point(golden, p.s, p.r)
    assert abs(pp.Pn - alpha * p.s) <= 1e-10
    assert abs(pp.dPn_ds - alpha) <= 1e-10
    assert 0 <= p.dim <= bowen_dimension(golden.lambdas) + 1e-8


def test_constraint_curve_minimum_at_critical_s(tri):
    alpha = 0.55
    p = solve_critical(tri, alpha)
    s_grid = p.s + np.linspace(-1.0, 1.0, 41)
    vals = -constraint_curve(tri, alpha, s_grid) / tri.q
    assert vals.min() >= p.dim - 1e-8
    assert abs(s_grid[np.argmin(vals)] - p.s) <= 0.05 + 1e-12


def test_warm_start_uniqueness(golden):
    ref = solve_critical(golden, 0.3)
    for s0, r0 in [(-1.0, -1.0), (0.5, -2.0), (2.0, 0.0), (1.0, -3.0), (-0.3, -1.2)]:
        p = solve_critical(golden, 0.3, s0=s0, r0=r0)
        assert p.converged
        assert abs(p.s - ref.s) < 1e-8 and abs(p.r - ref.r) < 1e-8


def test_curve_sym_grid(sym):
    grid = np.round(np.arange(0.05, 0.951, 0.05), 10)
    pts = spectrum_curve(sym, grid)
    assert all(p.converged for p in pts)
    dims = np.array([p.dim for p in pts])
    assert grid[np.argmax(dims)] == pytest.approx(0.25)
    assert abs(dims.max() - 1) < 1e-10


def test_curve_flags_outside_range(sym):
    pts = spectrum_curve(sym, [0.2, 0.25, 1.2])
    assert [p.converged for p in pts] == [True, True, False]


def test_curve_constant(const):
    (p,) = spectrum_curve(const, [0.7])
    assert p.converged and abs(p.dim - bowen_dimension(const.lambdas)) < 1e-9


def test_curve_requires_sorted_grid(sym):
    with pytest.raises(ValueError):
        spectrum_curve(sym, [0.3, 0.2])


@pytest.mark.parametrize("name", ["sym", "first"])
def test_support_unit_interval(name):
    from conftest import ALL_SPECS

    est = estimate_support(validate_spec(ALL_SPECS[name]))
    assert abs(est.A) < 0.02 and abs(est.B - 1) < 0.02
    assert 0 - 1e-9 <= est.A <= est.alpha_star <= est.B <= 1 + 1e-9


def test_support_constant(const):
    est = estimate_support(const)
    assert est.A == pytest.approx(0.7) and est.B == pytest.approx(0.7)


def test_support_within_phi_range(tri):
    est = estimate_support(tri)
    lo, hi = tri.phi.min(), tri.phi.max()
    assert lo - 1e-9 <= est.A <= est.alpha_star <= est.B <= hi + 1e-9
