from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import j0, j1

from bose2d.potentials import (FitError, Potential, evaluate, fourier_hat, scattering_length,
                               scattering_length_closed_form, variational_check)


def mp_scattering_length(v0: float, R0: float) -> float:
    mpmath.mp.dps = 40
    x = mpmath.sqrt(mpmath.mpf(v0) / 2) * R0
    return float(R0 * mpmath.exp(-mpmath.besseli(0, x) / (x * mpmath.besseli(1, x))))


def test_eval_soft_disk():
    V = Potential.soft_disk(2.0, 1.0)
    assert evaluate(V, 0.5) == 2.0
    assert evaluate(V, 1.5) == 0.0


def test_eval_gaussian_origin():
    V = Potential.gaussian_truncated(1.0, 1.0)
    assert evaluate(V, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert evaluate(V, 1.01) == 0.0


def test_fourier_hat_soft_disk_closed_form():
    v0, R0 = 3.0, 1.5
    V = Potential.soft_disk(v0, R0)
    assert fourier_hat(V, 0.0) == pytest.approx(v0 * math.pi * R0**2, rel=1e-15)
    k = np.random.default_rng(7).uniform(0.01, 50.0, 100)
    np.testing.assert_allclose(fourier_hat(V, k), v0 * 2 * math.pi * R0 * j1(k * R0) / k,
                               rtol=1e-12, atol=1e-14)


def test_fourier_hat_angular_oracle():
    # direct 2D integral of V(x) cos(k.x) in polar coordinates, independent of Bessel identities
    V = Potential.gaussian_truncated(1.0, 1.0)
    theta = np.linspace(0.0, 2 * math.pi, 256, endpoint=False)
    for k in (0.0, 1.3, 7.0):
        def radial(r):
            return float(V(r)) * r * np.mean(np.cos(k * r * np.cos(theta))) * 2 * math.pi
        ref, _ = quad(radial, 0.0, 1.0, epsabs=1e-14, limit=200)
        assert fourier_hat(V, k) == pytest.approx(ref, rel=1e-10, abs=1e-13)


def test_fourier_hat_decays():
    V = Potential.gaussian_truncated(1.0, 1.0)
    assert abs(fourier_hat(V, 1e4)) < 1e-4 * abs(fourier_hat(V, 0.0))


def test_fourier_hat_tabulated_matches_quad():
    r = np.linspace(0.0, 1.0, 41)
    V = Potential.tabulated(r, 1.0 - r**2)
    for k in (0.5, 4.0):
        ref, _ = quad(lambda s: float(V(s)) * j0(k * s) * s, 0.0, 1.0, epsabs=1e-14,
                      points=r[1:-1], limit=400)
        assert fourier_hat(V, k) == pytest.approx(2 * math.pi * ref, rel=1e-9)


def test_scattering_length_reference_value():
    V = Potential.soft_disk(2.0, 1.0)
    a = scattering_length(V).a
    assert a == pytest.approx(0.106, abs=5e-4)
    assert a == pytest.approx(mp_scattering_length(2.0, 1.0), rel=1e-14)


def test_scattering_length_hard_disk_limit():
    assert scattering_length_closed_form(1e8, 1.0) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("v0", [1e-2, 0.3, 2.0, 50.0, 1e4])
def test_scattering_length_two_methods(v0):
    V = Potential.soft_disk(v0, 1.0)
    a_cf = scattering_length(V, "closed-form").a
    a_ode = scattering_length(V, "zero-energy-ode").a
    assert a_ode == pytest.approx(a_cf, rel=1e-8)


def test_scattering_length_ode_for_gaussian_is_below_range():
    V = Potential.gaussian_truncated(5.0, 1.0)
    data = scattering_length(V)
    assert data.method == "zero-energy-ode"
    assert 0.0 < data.a < 1.0


def test_scattering_length_rejects_zero_potential():
    with pytest.raises(ValueError):
        scattering_length(Potential.soft_disk(0.0, 1.0))


@given(st.floats(0.01, 1e3), st.floats(1.01, 3.0))
@settings(max_examples=50, deadline=None)
def test_scattering_length_monotone_in_v0(v0, factor):
    assert scattering_length_closed_form(v0, 1.0) < scattering_length_closed_form(v0 * factor, 1.0)


@given(st.floats(0.05, 100.0), st.floats(0.2, 5.0))
@settings(max_examples=50, deadline=None)
def test_scattering_length_scales_with_range(v0, s):
    # V(r) -> s^-2 V(r/s) maps a -> s a
    a1 = scattering_length_closed_form(v0, 1.0)
    a2 = scattering_length_closed_form(v0 / s**2, s)
    assert a2 == pytest.approx(s * a1, rel=1e-12)


def test_variational_defect():
    V = Potential.soft_disk(2.0, 1.0)
    a = scattering_length(V).a
    d3 = variational_check(V, a, 1e3)
    d6 = variational_check(V, a, 1e6)
    assert abs(d3) < 1e-4
    assert abs(d6) <= abs(d3) + 1e-15


def test_variational_wrong_a_is_worse():
    V = Potential.soft_disk(2.0, 1.0)
    a = scattering_length(V).a
    assert abs(variational_check(V, 1.2 * a, 1e3)) > 1e-3


def test_tabulated_is_nonnegative_and_interpolates():
    r = np.linspace(0.0, 2.0, 9)
    v = np.array([3.0, 2.0, 0.5, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0])
    V = Potential.tabulated(r, v)
    x = np.linspace(0.0, 2.5, 1001)
    vals = evaluate(V, x)
    assert np.all(vals >= 0)
    np.testing.assert_allclose(evaluate(V, r), v, atol=1e-15)
    assert evaluate(V, 2.5) == 0.0


def test_from_csv_round_trip(tmp_path):
    path = tmp_path / "pot.csv"
    path.write_text("r,v\n0,2\n0.5,1.5\n1,0\n")
    V = Potential.from_csv(path)
    assert V.kind == "tabulated-radial"
    assert V.R0 == 1.0
    assert evaluate(V, 0.5) == pytest.approx(1.5)


@pytest.mark.parametrize("args", [(-1.0, 1.0), (1.0, 0.0), (float("nan"), 1.0)])
def test_invalid_soft_disk(args):
    with pytest.raises(ValueError):
        Potential.soft_disk(*args)


def test_fit_error_is_runtime_error():
    assert issubclass(FitError, RuntimeError)
