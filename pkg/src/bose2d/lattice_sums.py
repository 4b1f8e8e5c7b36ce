"""Regularized sums over the punctured momentum lattice ``2 pi Z^2 minus {0}``.

Everything is grouped by integer shell ``m = j^2 + k^2`` (so ``|p|^2 = 4 pi^2 m``)
with representation counts ``r2(m)``. Reductions run in ascending shell order
through :func:`math.fsum`, so results do not depend on chunking or threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import exp1, i0e, it2j0y0, j0

from .bogoliubov import dispersion

TWO_PI = 2.0 * math.pi
EULER_GAMMA = float(np.euler_gamma)
_EPS = float(np.finfo(float).eps)

STRATEGIES = ("plain-shells", "shell-average", "integral-tail", "ewald")


@dataclass(frozen=True)
class LatticeSumResult:
    """A lattice sum with the radius it was cut at and a bound on what was left out."""

    value: float
    cutoff: float
    tail_bound: float
    strategy: str

    def __post_init__(self) -> None:
        if not self.tail_bound >= 0:
            raise ValueError("tail_bound must be non-negative")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")

    def as_dict(self) -> dict:
        return {"value": self.value, "cutoff": self.cutoff,
                "tail_bound": self.tail_bound, "strategy": self.strategy}


# ---------------------------------------------------------------- shells


@lru_cache(maxsize=4)
def _counts_cached(M: int) -> np.ndarray:
    n = math.isqrt(M)
    k = np.arange(-n, n + 1, dtype=np.int64)
    k2 = k * k
    counts = np.zeros(M + 1, dtype=np.int64)
    rows = 256
    for start in range(-n, n + 1, rows):
        j = np.arange(start, min(start + rows, n + 1), dtype=np.int64)
        m = (j[:, None] ** 2 + k2[None, :]).ravel()
        m = m[m <= M]
        counts += np.bincount(m, minlength=M + 1)
    counts.setflags(write=False)
    return counts


def shell_counts(M: int) -> np.ndarray:
    """``r2(m)`` for ``0 <= m <= M``, origin included (``r2(0) = 1``)."""
    if M < 0:
        raise ValueError("M must be non-negative")
    return _counts_cached(int(M))


def max_shell(radius: float) -> int:
    """Largest shell index ``m`` with ``2 pi sqrt(m) <= radius``."""
    M = int(math.floor((radius / TWO_PI) ** 2))
    while TWO_PI * math.sqrt(M + 1) <= radius:
        M += 1
    while M > 0 and TWO_PI * math.sqrt(M) > radius:
        M -= 1
    return M


def shell_enumerate(r_max: float) -> list[tuple[float, int]]:
    """Non-empty shells ``(|p|^2, r2(m))`` with ``0 < |p| <= r_max``."""
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    m, r2 = _shells(max_shell(r_max))
    return [(4.0 * math.pi**2 * int(mi), int(c)) for mi, c in zip(m, r2)]


def _shells(M: int) -> tuple[np.ndarray, np.ndarray]:
    counts = shell_counts(M)
    m = np.nonzero(counts)[0]
    m = m[m > 0]
    return m, counts[m]


def lattice_points(M: int) -> np.ndarray:
    """Integer points ``(j, k)`` with ``0 <= j^2 + k^2 <= M``, origin included."""
    n = math.isqrt(M)
    j, k = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
    keep = j * j + k * k <= M
    return np.stack([j[keep], k[keep]], axis=1)


def _gauss_discrepancy(m):
    """Bound on ``|#{|n|^2 <= m} - pi m|`` from unit squares around lattice points."""
    return math.sqrt(2.0) * math.pi * np.sqrt(m) + 0.5 * math.pi


# ---------------------------------------------------------------- S_Bog


def sbog_summand(p_sq, coupling: float = 1.0):
    """``sqrt(x^2 + 8 pi R x) - x - 4 pi R + (4 pi R)^2/(2x)`` at ``x = p_sq``, cancellation-free.

    With ``c = 4 pi R`` and ``S = sqrt(x^2 + 2 c x)`` this equals ``c^3 (S + 3x)/(S + x)^3``.
    """
    x = np.asarray(p_sq, dtype=float)
    c = 4.0 * math.pi * coupling
    S = np.sqrt(x * x + 2.0 * c * x)
    return c**3 * (S + 3.0 * x) / (S + x) ** 3


def _sbog_summand_dx(x, coupling: float):
    c = 4.0 * math.pi * coupling
    S = np.sqrt(x * x + 2.0 * c * x)
    dS = (x + c) / S
    return c**3 * ((dS + 3.0) * (S + x) - 3.0 * (S + 3.0 * x) * (dS + 1.0)) / (S + x) ** 4


def _tail_quad(h, m0: float) -> tuple[float, float]:
    """``int_{m0}^inf h(m) dm`` for ``h = O(m^-2)``, in the variable ``u = 1/m``."""
    val, err = quad(lambda u: h(1.0 / u) / (u * u) if u > 0 else 0.0, 0.0, 1.0 / m0,
                    epsabs=0.0, epsrel=1e-13, limit=400)
    return val, err


def sum_sbog(cutoff: float = 400.0 * math.pi, strategy: str = "integral-tail",
             coupling: float = 1.0) -> LatticeSumResult:
    """``S_Bog = 1/2 sum_p [sqrt(p^4 + 8 pi R p^2) - p^2 - 4 pi R + (4 pi R)^2/(2 p^2)]``.

    ``integral-tail`` adds ``(pi/2) int h`` beyond the effective shell
    ``m_eff = #{|n|^2 <= M}/pi``, which absorbs the lattice-count boundary
    term. The tail bound integrates the circle-problem discrepancy against
    ``|h'|``.
    """
    if cutoff < 20.0 * math.pi:
        raise ValueError("cutoff must be at least 20 pi")
    if not coupling > 0:
        raise ValueError("coupling must be positive")
    if strategy not in ("integral-tail", "plain-shells"):
        raise ValueError(f"strategy {strategy!r} not available for S_Bog")
    M = max_shell(cutoff)
    m, r2 = _shells(M)
    terms = r2 * sbog_summand(4.0 * math.pi**2 * m, coupling)
    partial = 0.5 * math.fsum(terms)
    roundoff = 8.0 * _EPS * 0.5 * float(np.sum(np.abs(terms)))

    def h(mm):
        return float(sbog_summand(4.0 * math.pi**2 * mm, coupling))

    def dh_abs(mm):
        return 4.0 * math.pi**2 * abs(float(_sbog_summand_dx(4.0 * math.pi**2 * mm, coupling)))

    disc, disc_err = _tail_quad(lambda mm: _gauss_discrepancy(mm) * dh_abs(mm), M)
    if strategy == "plain-shells":
        tail, tail_err = _tail_quad(h, M)
        bound = 0.5 * (math.pi * tail + disc + h(M) * _gauss_discrepancy(M)) + tail_err + disc_err
        return LatticeSumResult(partial, cutoff, float(bound + roundoff), strategy)

    count = int(shell_counts(M).sum())
    m_eff = count / math.pi
    tail, tail_err = _tail_quad(h, m_eff)
    lo = min(M, m_eff)
    second = 0.5 * math.pi * dh_abs(lo) * (m_eff - M) ** 2
    bound = 0.5 * (disc + second) + 0.5 * math.pi * tail_err + disc_err
    return LatticeSumResult(partial + 0.5 * math.pi * tail, cutoff, float(bound + roundoff), strategy)


# ---------------------------------------------------------------- J0 sum


def _default_j0_cutoff(ell: float) -> float:
    return max(400.0 * math.pi, 40.0 * math.pi / ell)


def _ewald_j0(ell: float, tau: float) -> LatticeSumResult:
    # sum_{p != 0} J0(ell |p|)/p^2 = reciprocal part (s > tau) + image part (s < tau)
    budget = 45.0
    P = math.sqrt(budget / tau) + TWO_PI
    M = max_shell(P)
    m, r2 = _shells(M)
    p_sq = 4.0 * math.pi**2 * m
    rec_terms = r2 * j0(ell * np.sqrt(p_sq)) * np.exp(-tau * p_sq) / p_sq
    rec = math.fsum(rec_terms)
    shift = math.sqrt(2.0) * math.pi

    def env(rho):
        x = rho - shift
        return math.exp(-tau * x * x) / (x * x) * rho if x > 0 else 0.0

    rec_tail, rec_err = quad(env, P - shift + 1e-12, np.inf, epsabs=0.0, epsrel=1e-10)
    rec_tail /= TWO_PI

    self_term = float(exp1(ell * ell / (4.0 * tau))) / (4.0 * math.pi)

    keep_exp, far_exp = 60.0, 400.0
    reach = int(math.ceil(ell + math.sqrt(4.0 * tau * far_exp))) + 1
    img_terms = []
    img_err = 0.0
    omitted = 0.0
    image_counts = shell_counts(reach * reach)
    for d2 in range(1, reach * reach + 1):
        nb = int(image_counts[d2])
        if nb == 0:
            continue
        d = math.sqrt(d2)
        x = (d - ell) ** 2 / (4.0 * tau)
        if x > keep_exp:
            if x < far_exp:
                omitted += nb * float(exp1(x)) / (4.0 * math.pi)
            continue

        def integrand(u, d=d):
            if u == 0.0:
                return 0.0
            s = u * u
            return math.exp(-(d - ell) ** 2 / (4.0 * s)) * float(i0e(ell * d / (2.0 * s))) / (TWO_PI * u)

        v, e = quad(integrand, 0.0, math.sqrt(tau), epsabs=1e-17, epsrel=1e-13, limit=200)
        img_terms.append(nb * v)
        img_err += nb * e
    # images beyond the reach contribute less than exp(-far_exp) each
    img = math.fsum(img_terms)
    parts = [rec, self_term, img, -tau]
    value = math.fsum(parts)
    roundoff = 16.0 * _EPS * (float(np.sum(np.abs(rec_terms))) + abs(self_term) + abs(img) + tau)
    bound = rec_tail + rec_err + omitted + img_err + roundoff
    return LatticeSumResult(value, P, bound, "ewald")


def _j0_tail_integral(x):
    """``int_x^inf J0(u)/u du``."""
    x = np.asarray(x, dtype=float)
    return -EULER_GAMMA - np.log(0.5 * x) + it2j0y0(x)[0]


def _shell_average_j0(ell: float, cutoff: float) -> LatticeSumResult:
    M = max_shell(cutoff)
    counts = shell_counts(M)
    m_all = np.arange(M + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = TWO_PI * np.sqrt(m_all)
        h = np.where(m_all > 0, j0(ell * p) / (p * p), 0.0)
    terms = counts * h
    partial = np.cumsum(terms)
    n_points = np.cumsum(counts)
    rho_eff = TWO_PI * np.sqrt(n_points / math.pi)
    corrected = partial + _j0_tail_integral(ell * rho_eff) / TWO_PI
    def window_average(m_hi: int) -> tuple[float, float]:
        # average over one full J0 period in |p| ending at shell m_hi
        rho = TWO_PI * math.sqrt(m_hi)
        m_lo = max(1, int(math.floor(((rho - TWO_PI / ell) / TWO_PI) ** 2)))
        window = corrected[m_lo:m_hi + 1]
        return math.fsum(window) / window.size, float(np.max(window) - np.min(window))

    value, spread = window_average(M)
    half, _ = window_average(max(1, max_shell(0.5 * cutoff)))
    # the averaged bias decays roughly like 1/cutoff, so the change under
    # halving the cutoff estimates what is left
    return LatticeSumResult(value, cutoff, 0.5 * spread + abs(value - half), "shell-average")


def sum_j0(ell: float, cutoff: float | None = None, strategy: str = "ewald",
           tau: float = 0.08) -> LatticeSumResult:
    """``sum_{p != 0} J0(ell |p|)/|p|^2``.

    ``ewald`` splits ``1/p^2 = int_0^inf exp(-s p^2) ds`` at ``s = tau``: the
    large-``s`` part is a fast Gaussian-damped lattice sum, the small-``s``
    part is a Poisson-resummed image sum. ``shell-average`` sums shells up
    to ``cutoff``, adds the integral tail and averages over the last Bessel
    period; its tail bound is the observed spread and only indicative.
    """
    if not ell > 0:
        raise ValueError("ell must be positive (the sum diverges at ell = 0)")
    if strategy == "ewald":
        if not tau > 0:
            raise ValueError("tau must be positive")
        return _ewald_j0(float(ell), float(tau))
    if strategy == "shell-average":
        cutoff = _default_j0_cutoff(ell) if cutoff is None else cutoff
        if cutoff < TWO_PI * 4:
            raise ValueError("cutoff too small")
        return _shell_average_j0(float(ell), float(cutoff))
    raise ValueError(f"strategy {strategy!r} not available for the J0 sum")


def i_ell(ell: float, a: float, **kw) -> tuple[float, float]:
    """``-2 pi log(ell/a) + pi^2 ell^2 - 4 pi^2 sum_j0(ell)`` and its tail bound."""
    s = sum_j0(ell, **kw)
    return (-TWO_PI * math.log(ell / a) + math.pi**2 * ell**2 - 4.0 * math.pi**2 * s.value,
            4.0 * math.pi**2 * s.tail_bound)


# ---------------------------------------------------------------- energies


class TailBoundTooLarge(RuntimeError):
    """The propagated tail bound exceeds the requested accuracy."""


class InconsistentForms(RuntimeError):
    """Two algebraically equal forms of the energy disagree beyond their bounds."""


@dataclass(frozen=True)
class EnergyResult:
    E: float
    S_bog: LatticeSumResult
    j0_sum: LatticeSumResult
    tail_bound: float
    form: str
    E_alt: float
    j0_alt: LatticeSumResult
    alt_tail_bound: float
    extras: dict = field(default_factory=dict)

    @property
    def cutoffs(self) -> dict:
        return {"S_bog": self.S_bog.cutoff, "j0_sum": self.j0_sum.cutoff}

    def as_dict(self) -> dict:
        out = {
            "E": self.E,
            "S_bog": self.S_bog.as_dict(),
            "j0_sum": self.j0_sum.as_dict(),
            "tail_bound": self.tail_bound,
            "cutoffs": self.cutoffs,
            "form": self.form,
            "E_alt": self.E_alt,
            "j0_alt": self.j0_alt.as_dict(),
            "alt_tail_bound": self.alt_tail_bound,
        }
        out.update(self.extras)
        return out


def _energy_forms(N: int, a: float, sb: LatticeSumResult, j_a: LatticeSumResult,
                  j_1: LatticeSumResult) -> tuple[float, float]:
    four_pi2 = 4.0 * math.pi**2
    e_a = math.fsum([TWO_PI * (N - 1), math.pi**2 * a * a, sb.value, -four_pi2 * j_a.value])
    e_1 = math.fsum([TWO_PI * (N - 1), TWO_PI * math.log(a), math.pi**2, sb.value,
                     -four_pi2 * j_1.value])
    return e_a, e_1


def energy_EN(N: int, a: float, form: str = "eN", *, sbog_cutoff: float = 400.0 * math.pi,
              j0_strategy: str = "ewald", j0_cutoff: float | None = None,
              max_tail: float = 1e-3, check: bool = True) -> EnergyResult:
    """``2 pi (N-1) + pi^2 a^2 + S_Bog - 4 pi^2 sum J0(a|p|)/p^2``.

    ``form="remark4"`` selects the equivalent ``ell = 1`` form
    ``2 pi (N-1) + 2 pi log a + pi^2 + S_Bog - 4 pi^2 sum J0(|p|)/p^2``;
    the other form is always computed as well and, with ``check``, the two
    must agree within their combined tail bounds.
    """
    if int(N) != N or N < 2:
        raise ValueError("N must be an integer >= 2")
    if not a > 0:
        raise ValueError("a must be positive")
    if form not in ("eN", "remark4"):
        raise ValueError(f"unknown form {form!r}")
    sb = sum_sbog(sbog_cutoff)
    j_a = sum_j0(a, j0_cutoff, strategy=j0_strategy)
    j_1 = sum_j0(1.0, j0_cutoff, strategy=j0_strategy)
    e_a, e_1 = _energy_forms(int(N), a, sb, j_a, j_1)
    four_pi2 = 4.0 * math.pi**2
    tb_a = sb.tail_bound + four_pi2 * j_a.tail_bound + 4.0 * _EPS * abs(e_a)
    tb_1 = sb.tail_bound + four_pi2 * j_1.tail_bound + 4.0 * _EPS * abs(e_1)
    if form == "eN":
        res = EnergyResult(e_a, sb, j_a, tb_a, form, e_1, j_1, tb_1)
    else:
        res = EnergyResult(e_1, sb, j_1, tb_1, form, e_a, j_a, tb_a)
    if res.tail_bound > max_tail:
        raise TailBoundTooLarge(
            f"tail bound {res.tail_bound:.3e} exceeds {max_tail:.3e}; increase the cutoffs")
    if check and abs(e_a - e_1) > tb_a + tb_1:
        raise InconsistentForms(f"energy forms differ by {abs(e_a - e_1):.3e}")
    return res


def default_sbog_cutoff(coupling: float) -> float:
    return max(400.0 * math.pi, 40.0 * math.sqrt(8.0 * math.pi * coupling))


@dataclass(frozen=True)
class EnergyRResult:
    E: float
    S_bog: LatticeSumResult
    j0_sum: LatticeSumResult
    tail_bound: float
    coupling: float

    @property
    def cutoffs(self) -> dict:
        return {"S_bog": self.S_bog.cutoff, "j0_sum": self.j0_sum.cutoff}

    def as_dict(self) -> dict:
        return {"E": self.E, "S_bog": self.S_bog.as_dict(), "j0_sum": self.j0_sum.as_dict(),
                "tail_bound": self.tail_bound, "cutoffs": self.cutoffs,
                "R_coupling": self.coupling}


def energy_ENR(R_coupling: float, N: int, a: float, *, sbog_cutoff: float | None = None,
               j0_strategy: str = "ewald") -> EnergyRResult:
    """Energy with coupling ``R``: the ``R = 1`` formula with ``8 pi -> 8 pi R`` and ``a -> a/sqrt(R)``.

    ``2 pi R (N-1) + pi R^2 log R + pi^2 a^2 R + S_Bog^(R) - 4 pi^2 R^2 sum J0(|p| a/sqrt(R))/p^2``.
    """
    if not R_coupling > 0:
        raise ValueError("R_coupling must be positive")
    if not a > 0:
        raise ValueError("a must be positive")
    R = float(R_coupling)
    cutoff = default_sbog_cutoff(R) if sbog_cutoff is None else sbog_cutoff
    sb = sum_sbog(cutoff, coupling=R)
    js = sum_j0(a / math.sqrt(R), strategy=j0_strategy)
    four_pi2 = 4.0 * math.pi**2
    parts = [TWO_PI * R * (N - 1), math.pi * R * R * math.log(R), math.pi**2 * a * a * R,
             sb.value, -four_pi2 * R * R * js.value]
    E = math.fsum(parts)
    tb = sb.tail_bound + four_pi2 * R * R * js.tail_bound + 4.0 * _EPS * sum(abs(x) for x in parts)
    return EnergyRResult(E, sb, js, tb, R)


def large_r_deviation(R_coupling: float, N: int, a: float, **kw) -> float:
    """``|E^(R) - 2 pi R N - pi R^2 (1/2 + 2 gamma + log(pi R a^2 / 2))| / R^2``."""
    R = float(R_coupling)
    E = energy_ENR(R, N, a, **kw).E
    model = TWO_PI * R * N + math.pi * R * R * (0.5 + 2.0 * EULER_GAMMA
                                                + math.log(math.pi * R * a * a / 2.0))
    return abs(E - model) / (R * R)


def thermo_e_rho(rho: float, a: float) -> float:
    """Energy per particle ``4 pi rho b (1 - b|log b| + (1/2 + 2 gamma + log pi) b)``, ``b = 1/|log(rho a^2)|``."""
    if not (rho > 0 and a > 0):
        raise ValueError("rho and a must be positive")
    x = rho * a * a
    if x >= 1.0:
        raise ValueError("rho a^2 must be below 1")
    b = 1.0 / abs(math.log(x))
    return 4.0 * math.pi * rho * b * (1.0 - b * abs(math.log(b))
                                      + (0.5 + 2.0 * EULER_GAMMA + math.log(math.pi)) * b)


# ---------------------------------------------------------------- spectrum


@dataclass(frozen=True)
class LadderState:
    value: float
    occupations: tuple[tuple[int, int], ...]  # (mode index, count), ascending index


def ladder(energies, zeta: float, rel_tol: float = 1e-12) -> list[LadderState]:
    """All occupation vectors with ``sum n_i e_i <= zeta``, sorted by value.

    ``energies`` must be positive. Values are accumulated with :func:`math.fsum`
    over the occupied modes, so equal multisets give bit-equal values.
    """
    e = [float(x) for x in energies]
    if any(not x > 0 for x in e):
        raise ValueError("mode energies must be positive")
    limit = zeta * (1.0 + rel_tol)
    order = sorted(range(len(e)), key=lambda i: (e[i], i))
    out: list[LadderState] = []

    def rec(pos: int, budget: float, occ: list):
        if pos == len(order):
            value = math.fsum(e[i] * n for i, n in occ)
            out.append(LadderState(value, tuple(sorted(occ))))
            return
        i = order[pos]
        if e[i] > budget:
            # modes are sorted, so nothing further fits
            value = math.fsum(e[j] * n for j, n in occ)
            out.append(LadderState(value, tuple(sorted(occ))))
            return
        n = 0
        while n * e[i] <= budget:
            rec(pos + 1, budget - n * e[i], occ + [(i, n)] if n else occ)
            n += 1

    if limit >= 0:
        rec(0, limit, [])
    out.sort(key=lambda s: (s.value, s.occupations))
    return out


def ladder_lowest(energies, count: int) -> list[LadderState]:
    """The ``count`` lowest ladder states (ties at the boundary included)."""
    e_min = min(float(x) for x in energies)
    zeta = e_min * max(1, count)
    while True:
        states = ladder(energies, zeta)
        if len(states) >= count:
            return states
        zeta *= 2.0


@dataclass(frozen=True)
class SpectrumLevel:
    value: float
    degeneracy: int
    occupation_labels: tuple[str, ...]


def group_levels(states: list[LadderState], labels, rel_tol: float = 1e-9) -> list[SpectrumLevel]:
    levels: list[SpectrumLevel] = []
    bucket: list[LadderState] = []

    def flush():
        if bucket:
            names = tuple(";".join(f"{labels[i]}^{n}" for i, n in s.occupations) or "vacuum"
                          for s in bucket)
            levels.append(SpectrumLevel(bucket[0].value, len(bucket), names))

    for s in states:
        if bucket and abs(s.value - bucket[0].value) > rel_tol * max(1.0, abs(bucket[0].value)):
            flush()
            bucket = []
        bucket.append(s)
    flush()
    return levels


def lattice_modes(zeta: float, coupling: float = 1.0, rel_tol: float = 1e-12):
    """Lattice momenta (as integer pairs) with ``eps(p) <= zeta``, and their energies."""
    e_min = dispersion(4.0 * math.pi**2, coupling)
    limit = zeta * (1.0 + rel_tol)
    if limit < e_min:
        return np.zeros((0, 2), dtype=int), np.zeros(0)
    # eps(p) >= p^2, so |p|^2 <= zeta bounds the search
    M = max(1, int(math.floor(limit / (4.0 * math.pi**2))) + 1)
    pts = lattice_points(M)
    pts = pts[(pts[:, 0] != 0) | (pts[:, 1] != 0)]
    m = pts[:, 0] ** 2 + pts[:, 1] ** 2
    eps = dispersion(4.0 * math.pi**2 * m, coupling)
    keep = eps <= limit
    pts, eps = pts[keep], eps[keep]
    order = np.lexsort((pts[:, 1], pts[:, 0], m[keep]))
    return pts[order], eps[order]


def spectrum_enumerate(zeta: float, coupling: float = 1.0) -> list[SpectrumLevel]:
    """Excitation energies ``sum n_p eps(p) <= zeta`` with degeneracies and labels."""
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    pts, eps = lattice_modes(zeta, coupling)
    labels = [f"({j},{k})" for j, k in pts]
    return group_levels(ladder(eps, zeta), labels)
