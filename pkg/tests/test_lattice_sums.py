from __future__ import annotations

import itertools
import math
from collections import Counter

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from bose2d import lattice_sums as ls
from bose2d.bogoliubov import dispersion

TWO_PI = 2 * math.pi


# ---------------------------------------------------------------- shells


def test_shell_enumerate_first_shells():
    shells = ls.shell_enumerate(TWO_PI * math.sqrt(2))
    assert shells == [(4 * math.pi**2, 4), (8 * math.pi**2, 4)]


def test_shell_three_absent():
    assert ls.shell_counts(3)[3] == 0
    assert all(m != 12 * math.pi**2 for m, _ in ls.shell_enumerate(TWO_PI * 2))


@given(st.integers(0, 3000))
@settings(max_examples=40, deadline=None)
def test_shell_counts_brute_force(M):
    n = math.isqrt(M)
    brute = Counter(j * j + k * k for j in range(-n, n + 1) for k in range(-n, n + 1)
                    if j * j + k * k <= M)
    counts = ls.shell_counts(M)
    assert all(counts[m] == brute.get(m, 0) for m in range(M + 1))
    assert sum(c for _, c in ls.shell_enumerate(TWO_PI * math.sqrt(M))) == sum(brute.values()) - 1 \
        if M > 0 else True


@given(st.floats(0.1, 500.0))
def test_max_shell(radius):
    M = ls.max_shell(radius)
    assert TWO_PI * math.sqrt(M) <= radius < TWO_PI * math.sqrt(M + 1)


# ---------------------------------------------------------------- S_Bog


def test_sbog_summand_reference():
    mpmath.mp.dps = 40
    x = 4 * mpmath.pi**2
    ref = mpmath.sqrt(x * x + 8 * mpmath.pi * x) - x - 4 * mpmath.pi + (4 * mpmath.pi) ** 2 / (2 * x)
    assert ls.sbog_summand(4 * math.pi**2) == pytest.approx(float(ref), rel=1e-14)
    assert ls.sbog_summand(4 * math.pi**2) == pytest.approx(0.460, abs=1e-3)


@given(st.floats(1e-3, 1e8))
@settings(max_examples=200)
def test_sbog_summand_stable_form(x):
    mpmath.mp.dps = 50
    X = mpmath.mpf(x)
    c = 4 * mpmath.pi
    ref = mpmath.sqrt(X * X + 2 * c * X) - X - c + c * c / (2 * X)
    assert ls.sbog_summand(x) == pytest.approx(float(ref), rel=1e-12)


def test_sbog_summand_decay_exponent():
    h1 = ls.sbog_summand(1e3**2)
    h2 = ls.sbog_summand(2e3**2)
    assert math.log2(h1 / h2) == pytest.approx(4.0, abs=0.1)


def test_sbog_stable_between_cutoffs():
    a = ls.sum_sbog(200 * math.pi)
    b = ls.sum_sbog(400 * math.pi)
    assert abs(a.value - b.value) < 1e-8


@pytest.mark.parametrize("strategy", ["integral-tail", "plain-shells"])
@pytest.mark.parametrize("cutoff", [30 * math.pi, 100 * math.pi, 300 * math.pi])
def test_sbog_cutoff_doubling(strategy, cutoff):
    lo = ls.sum_sbog(cutoff, strategy)
    hi = ls.sum_sbog(2 * cutoff, strategy)
    assert abs(hi.value - lo.value) <= lo.tail_bound
    assert hi.tail_bound < lo.tail_bound


def test_sbog_point_sum_matches_shell_sum():
    cutoff = 40 * math.pi
    res = ls.sum_sbog(cutoff, "plain-shells")
    pts = ls.lattice_points(ls.max_shell(cutoff))
    pts = pts[(pts != 0).any(axis=1)]
    vals = ls.sbog_summand(4 * math.pi**2 * (pts**2).sum(axis=1))
    assert res.value == pytest.approx(0.5 * math.fsum(vals), rel=1e-14)


def test_sbog_preconditions():
    with pytest.raises(ValueError):
        ls.sum_sbog(10 * math.pi)
    with pytest.raises(ValueError):
        ls.sum_sbog(400 * math.pi, "ewald")


# ---------------------------------------------------------------- J0 sum


def test_j0_rejects_zero_ell():
    with pytest.raises(ValueError):
        ls.sum_j0(0.0)


@pytest.mark.parametrize("pair", [(0.2, 0.1), (0.1, 0.05), (1.0, 0.3)])
def test_j0_difference_identity(pair):
    l1, l2 = pair
    s1, s2 = ls.sum_j0(l1), ls.sum_j0(l2)
    lhs = -4 * math.pi**2 * (s1.value - s2.value)
    rhs = TWO_PI * math.log(l1 / l2) - math.pi**2 * (l1**2 - l2**2)
    assert abs(lhs - rhs) <= 4 * math.pi**2 * (s1.tail_bound + s2.tail_bound) + 1e-12


@pytest.mark.parametrize("ell", [0.3, 0.7])
def test_j0_ewald_vs_shell_average(ell):
    ew = ls.sum_j0(ell)
    sa = ls.sum_j0(ell, strategy="shell-average")
    assert abs(ew.value - sa.value) <= ew.tail_bound + sa.tail_bound


def test_j0_shell_average_cutoff_doubling():
    lo = ls.sum_j0(0.5, 200 * math.pi, "shell-average")
    hi = ls.sum_j0(0.5, 400 * math.pi, "shell-average")
    assert abs(hi.value - lo.value) <= lo.tail_bound


def test_j0_ewald_independent_of_split():
    a = ls.sum_j0(0.2, tau=0.05)
    b = ls.sum_j0(0.2, tau=0.12)
    assert abs(a.value - b.value) <= a.tail_bound + b.tail_bound + 1e-14


def test_i_ell_constant():
    vals = [ls.i_ell(ell, 0.1)[0] for ell in (0.05, 0.2, 0.9)]
    assert max(vals) - min(vals) < 1e-10


# ---------------------------------------------------------------- energies


def test_energy_schema():
    d = ls.energy_EN(100, 0.1).as_dict()
    assert {"E", "S_bog", "j0_sum", "tail_bound", "cutoffs"} <= set(d)
    assert {"value", "cutoff", "tail_bound", "strategy"} == set(d["S_bog"])


@pytest.mark.parametrize("a", [0.05, 0.1, 0.3])
def test_energy_forms_agree(a):
    eN = ls.energy_EN(100, a)
    r4 = ls.energy_EN(100, a, "remark4")
    assert abs(eN.E - r4.E) <= eN.tail_bound + r4.tail_bound <= 1e-5


def test_energy_step_in_N():
    assert ls.energy_EN(101, 0.2).E - ls.energy_EN(100, 0.2).E == pytest.approx(TWO_PI, abs=1e-10)


def test_energy_leading_order():
    dev = []
    for N in (50, 100, 200, 400):
        ly = 4 * math.pi * N**2 / abs(math.log(N) - 2 * N + 2 * math.log(0.1))
        dev.append(abs(ls.energy_EN(N, 0.1).E / ly - 1))
    assert all(b < a for a, b in zip(dev, dev[1:]))
    N = 10**6
    assert abs(ls.energy_EN(N, 0.1).E / N - TWO_PI) < 20.0 / N


def test_energy_tail_too_large():
    with pytest.raises(ls.TailBoundTooLarge):
        ls.energy_EN(100, 0.1, sbog_cutoff=21 * math.pi, max_tail=1e-9)


def test_energy_R_one_reduces():
    for a in (0.05, 0.3):
        assert ls.energy_ENR(1.0, 100, a).E == pytest.approx(ls.energy_EN(100, a).E, abs=1e-10)


def test_large_r_monotone():
    dev = [ls.large_r_deviation(R, 100, 0.1) for R in (1e2, 1e3)]
    assert dev[1] < dev[0]


def _dsbog_dR(R: float, cutoff: float) -> float:
    """Term-by-term derivative of S_Bog^(R) in R: 8 pi c^2 (S + 2x)/(S (S + x)^2)."""
    c = 4 * math.pi * R

    def d(x):
        S = np.sqrt(x * x + 2 * c * x)
        return 8 * math.pi * c * c * (S + 2 * x) / (S * (S + x) ** 2)

    M = ls.max_shell(cutoff)
    counts = ls.shell_counts(M)
    m = np.arange(1, M + 1)
    partial = math.fsum(counts[1:] * d(4 * math.pi**2 * m))
    m_eff = counts.sum() / math.pi
    tail, _ = quad(lambda u: d(4 * math.pi**2 / u) / u**2, 0.0, 1.0 / m_eff, epsabs=0, epsrel=1e-12)
    return 0.5 * (partial + math.pi * tail)


def test_energy_R_derivative_at_one():
    N, a, h = 50, 0.2, 1e-3
    cutoff = 400 * math.pi
    E = lambda R: ls.energy_ENR(R, N, a, sbog_cutoff=cutoff).E  # noqa: E731
    fd = (E(1 + h) - E(1 - h)) / (2 * h)
    R = 1.0
    J = ls.sum_j0(a).value
    # d/d ell of sum J0(ell |p|)/p^2 follows from the ell-independence of I_ell
    dJ_dell = (-TWO_PI / a + 2 * math.pi**2 * a) / (4 * math.pi**2)
    dell_dR = -a / (2 * R)
    analytic = (TWO_PI * (N - 1) + TWO_PI * R * math.log(R) + math.pi * R + math.pi**2 * a * a
                + _dsbog_dR(R, cutoff) - 8 * math.pi**2 * R * J
                - 4 * math.pi**2 * R * R * dJ_dell * dell_dR)
    assert fd == pytest.approx(analytic, abs=1e-4)


def test_thermo_examples():
    rho, a = 1.0, 1e-3
    b = 1 / abs(math.log(1e-6))
    expected = 4 * math.pi * rho * b * (1 - b * abs(math.log(b))
                                        + (0.5 + 2 * ls.EULER_GAMMA + math.log(math.pi)) * b)
    assert ls.thermo_e_rho(rho, a) == pytest.approx(expected, rel=1e-15)
    gaps = [abs(ls.thermo_e_rho(1.0, x) / (4 * math.pi / abs(math.log(x * x))) - 1)
            for x in (1e-20, 1e-60, 1e-150)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    with pytest.raises(ValueError):
        ls.thermo_e_rho(4.0, 0.5)


def test_thermo_consistent_with_energy():
    # rho = N particles per unit area, scattering length e^-N a
    a = 0.1
    rel = []
    for N in (50, 100, 200):
        total = N * ls.thermo_e_rho(N, math.exp(-N) * a)
        E = ls.energy_EN(N, a).E
        assert abs(total - E) < 5.0
        rel.append(abs(total - E) / E)
    assert all(b < a for a, b in zip(rel, rel[1:]))


# ---------------------------------------------------------------- spectrum


def oracle_levels(zeta: float, coupling: float = 1.0):
    """Degeneracies by multiplying generating polynomials mode by mode."""
    n = int(math.isqrt(int(zeta / (4 * math.pi**2)) + 1)) + 1
    modes = [dispersion(4 * math.pi**2 * (j * j + k * k), coupling)
             for j, k in itertools.product(range(-n, n + 1), repeat=2) if (j, k) != (0, 0)]
    modes = [e for e in modes if e <= zeta * (1 + 1e-12)]
    # key: occupation counts per distinct mode energy, which fixes the value exactly
    energies = sorted(set(modes))
    mult = [modes.count(e) for e in energies]
    states = Counter({(): 1})
    for e, g in zip(energies, mult):
        nxt = Counter()
        for key, deg in states.items():
            used = math.fsum(k * x for k, x in zip(key, energies))
            for q in range(int((zeta * (1 + 1e-12) - used) // e) + 1):
                # g modes at one energy holding q quanta: C(q + g - 1, g - 1) ways
                nxt[key + (q,)] += deg * math.comb(q + g - 1, g - 1)
        states = nxt
    by_value: dict[float, int] = {}
    for key, deg in states.items():
        v = math.fsum(k * x for k, x in zip(key, energies))
        if v <= zeta * (1 + 1e-12):
            match = next((u for u in by_value if abs(u - v) <= 1e-9 * max(1.0, v)), None)
            by_value[match if match is not None else v] = by_value.get(match if match is not None else v, 0) + deg
    return sorted(by_value.items())


def test_spectrum_vacuum_only():
    levels = ls.spectrum_enumerate(0.5 * dispersion(4 * math.pi**2))
    assert [(lv.value, lv.degeneracy) for lv in levels] == [(0.0, 1)]


def test_spectrum_first_level():
    lv = ls.spectrum_enumerate(60.0)[1]
    assert lv.value == pytest.approx(math.sqrt(16 * math.pi**4 + 32 * math.pi**3), rel=1e-15)
    assert lv.degeneracy == 4


@pytest.mark.parametrize("factor,coupling", [(3.0, 1.0), (4.2, 1.0), (3.5, 0.3), (2.5, 5.0)])
def test_spectrum_matches_generating_function(factor, coupling):
    zeta = factor * dispersion(4 * math.pi**2, coupling)
    got = [(lv.value, lv.degeneracy) for lv in ls.spectrum_enumerate(zeta, coupling)]
    ref = oracle_levels(zeta, coupling)
    assert [d for _, d in got] == [d for _, d in ref]
    np.testing.assert_allclose([v for v, _ in got], [v for v, _ in ref], rtol=1e-12)


def test_spectrum_labels_count_matches_degeneracy():
    for lv in ls.spectrum_enumerate(3 * dispersion(4 * math.pi**2)):
        assert len(lv.occupation_labels) == lv.degeneracy


def test_phonon_slope():
    m = np.array([1, 2, 4, 5])
    p = TWO_PI * np.sqrt(m)
    slopes = dispersion(p * p) / p
    assert np.all(np.diff(slopes) > 0)
    assert dispersion(1e-12) / 1e-6 == pytest.approx(math.sqrt(8 * math.pi), rel=1e-10)
