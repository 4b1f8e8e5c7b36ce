from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import i0e, i1e, j0, j1, y0, y1

from bose2d.potentials import Potential, scattering_length
from bose2d.scattering import (BracketError, asymptotic_eigenvalue, eigenvalue_residual,
                               far_field_defect, integral_Vf, intvf_residual, solve_neumann,
                               solve_sweep, w_bounds_check)


def exact_soft_disk(v0: float, R0: float, R: float):
    """Neumann ground state by matching I0 inside to J0/Y0 outside."""

    def exterior(lam):
        k = math.sqrt(lam)
        A = 1.0 / (j0(k * R) - j1(k * R) / y1(k * R) * y0(k * R))
        B = -A * j1(k * R) / y1(k * R)
        return k, A, B

    def mismatch(lam):
        kappa = math.sqrt(v0 / 2 - lam)
        k, A, B = exterior(lam)
        inner = kappa * i1e(kappa * R0) / i0e(kappa * R0)
        outer = -k * (A * j1(k * R0) + B * y1(k * R0)) / (A * j0(k * R0) + B * y0(k * R0))
        return inner - outer

    a = scattering_length(Potential.soft_disk(v0, R0)).a
    guess = 2.0 / (R * R * math.log(R / a))
    # first sign change; the mismatch has a pole where the exterior f(R0) vanishes
    grid = guess * np.linspace(0.3, 3.0, 271)
    vals = [mismatch(x) for x in grid]
    i = next(i for i in range(len(grid) - 1) if vals[i] > 0 > vals[i + 1])
    lam = brentq(mismatch, grid[i], grid[i + 1], xtol=1e-30, rtol=1e-15)
    k, A, B = exterior(lam)
    kappa = math.sqrt(v0 / 2 - lam)
    f_R0 = A * j0(k * R0) + B * y0(k * R0)
    # 2 pi int_0^R0 v0 C I0(kappa r) r dr with C I0(kappa R0) = f(R0)
    intvf = 2 * math.pi * v0 * f_R0 * R0 * i1e(kappa * R0) / (kappa * i0e(kappa * R0))

    def profile(r):
        r = np.asarray(r, dtype=float)
        rc = np.minimum(r, R0)
        inside = f_R0 * i0e(kappa * rc) / i0e(kappa * R0) * np.exp(kappa * (rc - R0))
        return np.where(r <= R0, inside, A * j0(k * r) + B * y0(k * r))

    return lam, intvf, profile


@pytest.mark.parametrize("R", [1e2, 1e3, 1e4, 1e6])
def test_neumann_matches_bessel_oracle(soft_disk, R):
    lam, intvf, profile = exact_soft_disk(2.0, 1.0, R)
    sol = solve_neumann(soft_disk, R)
    assert sol.lam == pytest.approx(lam, rel=1e-9)
    assert sol.intVf == pytest.approx(intvf, rel=1e-8)
    r = np.concatenate([np.linspace(1e-3, 1.0, 50), np.geomspace(1.0, R, 200)])
    np.testing.assert_allclose(sol.profile(r), profile(r), rtol=1e-8, atol=1e-10)


def test_zero_potential_short_circuit():
    sol = solve_neumann(Potential.soft_disk(0.0, 1.0), 50.0)
    assert sol.lam == 0.0
    assert np.all(sol.f == 1.0)
    assert integral_Vf(sol) == 0.0
    assert far_field_defect(sol) == 0.0
    wb = w_bounds_check(sol)
    assert wb.w_at_R == 0.0 and wb.c_w == 0.0


def test_eigenvalue_leading_order_window(soft_disk):
    sol = solve_neumann(soft_disk, 1e4)
    L = math.log(1e4 / sol.a)
    ratio = sol.lam * 1e4**2 * L / 2
    assert 1 - 5 / L <= ratio <= 1 + 5 / L


def test_first_order_ratio_monotone(soft_disk):
    sols = solve_sweep(soft_disk, [1e3, 1e4, 1e5, 1e6])
    ratios = [s.eps_sq * math.log(s.R / s.a) / 2 for s in sols]
    gaps = [abs(r - 1) for r in ratios]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_residuals_bounded_across_decades(soft_disk):
    sols = solve_sweep(soft_disk, [1e3, 1e4, 1e5], threads=3)
    ev = [eigenvalue_residual(s) * s.R**2 * math.log(s.R / s.a) ** 3 for s in sols]
    iv = [abs(intvf_residual(s)) * math.log(s.R / s.a) ** 2 for s in sols]
    assert max(ev) <= 10 * min(ev)
    assert max(iv) <= 10 * min(iv)


def test_sweep_threads_are_deterministic(soft_disk):
    radii = [2e2, 3e3, 4e4]
    one = [s.lam for s in solve_sweep(soft_disk, radii, threads=1)]
    many = [s.lam for s in solve_sweep(soft_disk, radii, threads=3)]
    assert one == many


def test_grid_density_invariance(soft_disk):
    tol = 1e-8
    a = solve_neumann(soft_disk, 1e3, tol)
    b = solve_neumann(soft_disk, 1e3, tol, grid_density=2)
    assert abs(a.lam - b.lam) <= 0.1 * tol * a.lam


@pytest.mark.parametrize("V", [Potential.soft_disk(2.0, 1.0), Potential.soft_disk(50.0, 0.5),
                               Potential.gaussian_truncated(3.0, 1.0)])
def test_profile_between_zero_and_one(V):
    sol = solve_neumann(V, 500.0)
    assert np.all(sol.f >= 0) and np.all(sol.f <= 1 + 1e-12)
    assert sol.profile(np.array([sol.R]))[0] == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("R", [30.0, 1e3, 1e5])
def test_integrated_equation_identity(soft_disk, R):
    # integrating -Laplace f + V f/2 = lam f over the disk with f'(R) = 0
    sol = solve_neumann(soft_disk, R)
    assert sol.intVf == pytest.approx(2 * sol.lam * sol.int_f, rel=1e-9)


def test_neumann_condition(soft_disk):
    sol = solve_neumann(soft_disk, 1e4)
    assert abs(sol.dfdt_R) < 1e-9
    assert abs(sol.profile_dt(np.array([1e4]))[0]) < 1e-9


def test_w_vanishes_at_boundary(soft_disk):
    sol = solve_neumann(soft_disk, 1e3)
    assert w_bounds_check(sol).w_at_R == 0.0
    assert sol.w[-1] == 0.0


def test_w_bound_constants_stable(soft_disk):
    reps = [w_bounds_check(s) for s in solve_sweep(soft_disk, [1e3, 1e5])]
    assert reps[0].c_w == pytest.approx(reps[1].c_w, rel=0.2)
    assert reps[0].c_dw == pytest.approx(reps[1].c_dw, rel=0.2)


def test_far_field_scaled_bounded(soft_disk):
    vals = []
    for s in solve_sweep(soft_disk, [1e3, 1e4, 1e5]):
        vals.append(far_field_defect(s) / (s.eps_sq**2 * math.log(math.sqrt(s.eps_sq)) ** 2))
    assert max(vals) <= 10 * min(vals)


def test_far_field_requires_range(soft_disk):
    with pytest.raises(ValueError):
        far_field_defect(solve_neumann(soft_disk, 5.0))


def test_asymptotic_eigenvalue_formula():
    R, a = 1e4, 0.1
    L = math.log(R / a)
    assert asymptotic_eigenvalue(R, a) == pytest.approx(2 / (R * R * L) * (1 + 0.75 / L), rel=1e-15)


def test_invalid_inputs(soft_disk):
    with pytest.raises(ValueError):
        solve_neumann(soft_disk, 0.5)
    with pytest.raises(ValueError):
        solve_neumann(soft_disk, 10.0, tol=0.0)


def test_bracket_error_is_runtime_error():
    assert issubclass(BracketError, RuntimeError)
