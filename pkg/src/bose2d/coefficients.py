"""Renormalization coefficients on the momentum lattice for particle number ``N``.

The Neumann problem is solved once at ``R = e^N l`` with ``l = N^-alpha``; all
lattice quantities are expressed through ``R``, ``eps^2 = lam R^2`` and the
profile on ``[0, R]``, so ``e^N`` itself is only ever handled as a logarithm.

Per shell ``m = |p/2 pi|^2`` the table stores

* ``eta_p = -N l^2 2 pi int_0^1 w(R x) J0(|p| l x) x dx``
* ``omega_hat(p) = g_N chi_hat(l p)``, ``chi_hat(q) = 2 pi J1(q)/q``, ``g_N = 2 N eps^2``
* ``F_p = p^2 + omega_hat(p)``, ``G_p = omega_hat(p)`` and the angles ``tau_p``, ``upsilon_p``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import j0, j1

from ._quad import panel_rule, refine_edges
from .bogoliubov import dispersion
from .lattice_sums import TWO_PI, lattice_points, max_shell, shell_counts
from .potentials import Potential, QuadratureError, fourier_hat
from .scattering import ScatteringSolution, solve_neumann

MAX_LOG_RADIUS = math.log(1e9)
J1_FIRST_ZERO = 3.8317059702075125


class RadiusTooLarge(ValueError):
    """``e^N l`` is beyond what the radial solver supports."""


class BoundViolation(RuntimeError):
    """``|G_p| >= F_p`` for a tabulated shell."""


@dataclass(frozen=True)
class GPParams:
    """Particle number and scale exponents; ``l = N^-alpha``, ``P_L = N^(alpha + nu)``."""

    N: int
    alpha: float = 2.5
    nu: float = 0.2
    p_max: float | None = None
    gamma_c: float = 0.0
    gamma: float = 0.125

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 2:
            raise ValueError("N must be an integer >= 2")
        if not self.alpha >= 1:
            raise ValueError("alpha must be >= 1")
        if not 0 < self.nu < 0.5:
            raise ValueError("nu must lie in (0, 1/2)")
        if self.p_max is not None and not self.p_max >= TWO_PI:
            raise ValueError("p_max must be at least 2 pi")
        if not 0 < self.gamma < 0.25:
            raise ValueError("gamma must lie in (0, 1/4)")
        if not self.ell < 0.5:
            raise ValueError("ell = N^-alpha must be below 1/2")

    @property
    def ell(self) -> float:
        return float(self.N) ** (-self.alpha)

    @property
    def log_scale(self) -> float:
        """``log(e^N) = N``."""
        return float(self.N)

    @property
    def log_radius(self) -> float:
        return self.N - self.alpha * math.log(self.N)

    @property
    def radius(self) -> float:
        return math.exp(self.log_radius)

    @property
    def p_L(self) -> float:
        return float(self.N) ** (self.alpha + self.nu)

    @property
    def cutoff(self) -> float:
        """Tabulation radius: ``p_max`` if given, else ``min(P_L, 64 pi)``."""
        return self.p_max if self.p_max is not None else min(self.p_L, 64.0 * math.pi)


def chi_hat(q):
    """Disk transform ``2 pi J1(q)/q`` of the unit-disk indicator; ``pi`` at 0."""
    q = np.asarray(q, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(q > 0, TWO_PI * j1(q) / np.where(q > 0, q, 1.0), math.pi)
    return float(out) if np.ndim(out) == 0 else out


def tau_upsilon(F, G, F_gamma=None):
    """``tau = log((F-G)/(F+G))/4`` and ``upsilon = artanh(alpha)/2``.

    ``alpha = (F' - sqrt(F'^2 - G^2))/G`` with ``F' = F_gamma`` (defaults to ``F``);
    ``upsilon = 0`` where ``G = 0``.
    """
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    Fg = F if F_gamma is None else np.asarray(F_gamma, dtype=float)
    if np.any(F <= 0) or np.any(np.abs(G) >= F) or np.any(np.abs(G) >= Fg):
        raise ValueError("need F > 0 and |G| < F")
    tau = 0.25 * (np.log1p(-G / F) - np.log1p(G / F))
    e = np.sqrt(Fg - G) * np.sqrt(Fg + G)
    alpha = G / (Fg + e)
    ups = 0.5 * np.arctanh(alpha)
    if np.ndim(tau) == 0:
        return float(tau), float(ups)
    return tau, ups


def _w(sol: ScatteringSolution, s):
    return 1.0 - sol.profile(s)


def _x_rule(sol: ScatteringSolution, q_max: float, order: int):
    """Quadrature on ``x in [0, 1]`` for profiles ``w(R x)``, scaled coordinates."""
    R = sol.R
    V = sol.potential
    inner = np.asarray(V.breakpoints()) / R
    inner = refine_edges(inner, (V.R0 / R) / 8.0)
    n_geo = max(1, int(math.ceil(math.log2(R / V.R0))))
    outer = np.geomspace(V.R0 / R, 1.0, n_geo + 1)[1:]
    edges = np.concatenate([inner, outer])
    if q_max > 0:
        edges = refine_edges(edges, math.pi / q_max)
    return panel_rule(edges, order)


def eta_radial(sol: ScatteringSolution, N: int, ell: float, q_abs, *, threads: int = 1,
               check: bool = True) -> np.ndarray:
    """``eta`` at arbitrary momenta ``|q|`` (not only lattice points)."""
    q = np.atleast_1d(np.asarray(q_abs, dtype=float))
    if sol.eps_sq == 0.0:
        return np.zeros_like(q)
    kx = q * ell
    q_max = float(kx.max()) if kx.size else 0.0

    def transform(order: int) -> np.ndarray:
        x, wts = _x_rule(sol, q_max, order)
        vw = _w(sol, sol.R * x) * x * wts
        chunks = [kx[i:i + 128] for i in range(0, kx.size, 128)]
        work = lambda kk: j0(np.outer(kk, x)) @ vw  # noqa: E731
        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(work, chunks))
        else:
            parts = [work(c) for c in chunks]
        return -N * ell * ell * TWO_PI * np.concatenate(parts)

    val = transform(24)
    if check:
        ref = transform(32)
        scale = max(float(np.max(np.abs(ref))), 1e-300)
        if np.max(np.abs(val - ref)) > 1e-9 * scale:
            raise QuadratureError("Hankel transform of w did not converge")
    return val


@dataclass
class CoefficientTable:
    """Shell-indexed coefficients; arrays run over shells ``m >= 1`` with ``r2(m) > 0``."""

    params: GPParams
    g_N: float
    lam: float
    eps_sq: float
    R: float
    a: float | None
    intVf: float
    eta0: float
    omega_hat0: float
    shells: np.ndarray
    multiplicity: np.ndarray
    eta: np.ndarray
    omega_hat: np.ndarray
    F: np.ndarray
    G: np.ndarray
    tau: np.ndarray
    upsilon: np.ndarray
    alpha_p: np.ndarray
    bound_violations: int
    solution: ScatteringSolution = field(repr=False)

    @property
    def p_sq(self) -> np.ndarray:
        return 4.0 * math.pi**2 * self.shells.astype(float)

    @property
    def p_abs(self) -> np.ndarray:
        return TWO_PI * np.sqrt(self.shells.astype(float))

    @property
    def max_shell(self) -> int:
        return max_shell(self.params.cutoff)

    def eta_by_shell(self) -> np.ndarray:
        """``eta`` indexed by shell ``m`` (0 .. max_shell), origin included."""
        out = np.zeros(self.max_shell + 1)
        out[0] = self.eta0
        out[self.shells] = self.eta
        return out

    def omega_hat_at(self, p_abs):
        return self.g_N * chi_hat(self.params.ell * np.asarray(p_abs, dtype=float))

    def rows(self) -> list[dict]:
        out = [{"m": 0, "p_sq": 0.0, "multiplicity": 1, "eta": self.eta0,
                "omega_hat": self.omega_hat0, "F": None, "G": None, "tau": None,
                "upsilon": None}]
        for i, m in enumerate(self.shells):
            out.append({"m": int(m), "p_sq": float(self.p_sq[i]),
                        "multiplicity": int(self.multiplicity[i]), "eta": float(self.eta[i]),
                        "omega_hat": float(self.omega_hat[i]), "F": float(self.F[i]),
                        "G": float(self.G[i]), "tau": float(self.tau[i]),
                        "upsilon": float(self.upsilon[i])})
        return out


def build_table(V: Potential, params: GPParams, *, tol: float = 1e-10, threads: int = 1,
                solution: ScatteringSolution | None = None) -> CoefficientTable:
    """Solve the Neumann problem at ``R = e^N l`` and tabulate all shells up to the cutoff."""
    if params.log_radius > MAX_LOG_RADIUS:
        raise RadiusTooLarge(f"R = e^N l = exp({params.log_radius:.2f}) exceeds 1e9")
    R = params.radius
    if not R > V.R0:
        raise RadiusTooLarge("R = e^N l must exceed the range of the potential")
    sol = solution if solution is not None else solve_neumann(V, R, tol)
    N, ell = params.N, params.ell
    g_N = 2.0 * N * sol.eps_sq
    M = max_shell(params.cutoff)
    counts = shell_counts(M)
    m = np.nonzero(counts)[0]
    m = m[m > 0]
    mult = counts[m]
    p_abs = TWO_PI * np.sqrt(m.astype(float))
    p_sq = 4.0 * math.pi**2 * m.astype(float)
    eta_all = eta_radial(sol, N, ell, np.concatenate([[0.0], p_abs]), threads=threads)
    eta0, eta = float(eta_all[0]), eta_all[1:]
    omega = g_N * chi_hat(ell * p_abs)
    F = p_sq + omega
    G = omega.copy()
    bad = np.abs(G) >= F
    if np.any(bad):
        raise BoundViolation(f"|G_p| >= F_p on shells {m[bad][:5].tolist()}")
    violations = int(np.count_nonzero(F < 0.5 * p_sq))
    F_gamma = F - params.gamma_c * float(N) ** (-params.gamma) * p_sq
    tau, ups = tau_upsilon(F, G, F_gamma)
    e = np.sqrt(F_gamma - G) * np.sqrt(F_gamma + G)
    alpha_p = G / (F_gamma + e)
    return CoefficientTable(
        params=params, g_N=g_N, lam=sol.lam, eps_sq=sol.eps_sq, R=R, a=sol.a,
        intVf=sol.intVf, eta0=eta0, omega_hat0=math.pi * g_N, shells=m, multiplicity=mult,
        eta=eta, omega_hat=omega, F=F, G=G, tau=np.atleast_1d(tau),
        upsilon=np.atleast_1d(ups), alpha_p=alpha_p, bound_violations=violations,
        solution=sol,
    )


# ---------------------------------------------------------------- identity check


@dataclass(frozen=True)
class IdentityReport:
    max_residual: float
    mean_residual: float
    tail_bound: float
    max_residual_exact_v: float
    tail_bound_exact_v: float
    c_eta: float
    q_cut: float
    p_max: float
    points: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _decreasing_envelope(k: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(np.abs(values)[::-1])[::-1]


def _lattice_to_integral(h, P: float) -> float:
    """Upper bound of ``sum_{|q| > P} h(|q|)`` for decreasing ``h``."""
    s = math.sqrt(2.0) * math.pi
    lo = max(P - s, 1e-12)
    val, err, *_ = quad(lambda r: h(r - s) * r if r > s else 0.0, lo, np.inf, limit=400,
                        full_output=1)
    return (val + err) / TWO_PI


def _c_eta(table: CoefficientTable, V: Potential) -> float:
    """Empirical constant in ``|eta_q| <= C / q^2`` for all ``q != 0``."""
    c = float(np.max(table.p_sq * np.abs(table.eta)))
    N, ell = table.params.N, table.params.ell
    q_hi = 40.0 / ell + 10.0 * math.exp(N) / V.R0
    q = np.geomspace(table.p_abs[-1], q_hi, 400)
    eta_q = eta_radial(table.solution, N, ell, q, check=False)
    return max(c, float(np.max(q * q * np.abs(eta_q))))


def _vhat_envelope(V: Potential, N: int):
    """Decreasing envelope of ``|V_hat(k e^-N)|`` as a function of ``k``."""
    k_hi = 200.0 / V.R0
    k = np.linspace(0.0, k_hi, 8001)
    vals = np.abs(fourier_hat(V, k))
    env = _decreasing_envelope(k, vals)
    tail_c = float(np.max(vals[k > k_hi / 2] * k[k > k_hi / 2] ** 1.5))
    scale = math.exp(-N)

    def h(kk: float) -> float:
        x = kk * scale
        if x >= k_hi:
            return tail_c * x ** -1.5
        return float(np.interp(x, k, env))

    return h


def check_scattering_identity(table: CoefficientTable, V: Potential,
                              q_cut: float) -> IdentityReport:
    """Residual of the lattice scattering identity at ``0 < |p| <= q_cut``.

    For every such ``p`` evaluates
    ``p^2 eta_p + (N/2) V_hat(p/e^N) + 1/2 sum_q V_hat((p-q)/e^N) eta_q
    - 1/2 omega_hat(p) - 1/(2N) sum_q omega_hat(p-q) eta_q``
    with ``q`` running over the tabulated lattice (origin included). The
    ``V_hat`` convolution converges only logarithmically; ``*_exact_v``
    fields replace it by its position-space closed form, which leaves just
    the fast ``omega_hat`` truncation.
    """
    params = table.params
    P = params.cutoff
    if not q_cut <= P / 2.0:
        raise ValueError("q_cut must be at most p_max / 2")
    N, ell = params.N, params.ell
    pts_q = lattice_points(table.max_shell)
    m_q = (pts_q ** 2).sum(axis=1)
    eta_q = table.eta_by_shell()[m_q]
    M_p = max_shell(q_cut)
    pts_p = lattice_points(M_p)
    pts_p = pts_p[(pts_p != 0).any(axis=1)]
    if pts_p.size == 0:
        raise ValueError("q_cut below the first lattice shell")
    m_p = (pts_p ** 2).sum(axis=1)
    p_abs = TWO_PI * np.sqrt(m_p.astype(float))
    scale = math.exp(-N)

    if table.eps_sq == 0.0 and V.is_zero:
        zero = 0.0
        return IdentityReport(zero, zero, zero, zero, zero, zero, q_cut, P, int(m_p.size))

    # convolutions depend on |p - q|^2 = 4 pi^2 (integer), tabulate per integer
    diff_sq = ((pts_p[:, None, :] - pts_q[None, :, :]) ** 2).sum(axis=2)
    uniq, inv = np.unique(diff_sq, return_inverse=True)
    k_uniq = TWO_PI * np.sqrt(uniq.astype(float))
    vhat_u = fourier_hat(V, k_uniq * scale)
    omega_u = table.omega_hat_at(k_uniq)
    inv = inv.reshape(diff_sq.shape)
    conv_v = np.array([math.fsum(row) for row in vhat_u[inv] * eta_q[None, :]])
    conv_w = np.array([math.fsum(row) for row in omega_u[inv] * eta_q[None, :]])

    eta_p = table.eta_by_shell()[m_p]
    p_sq = p_abs ** 2
    base = p_sq * eta_p + 0.5 * N * fourier_hat(V, p_abs * scale) - 0.5 * table.omega_hat_at(p_abs)
    resid = base + 0.5 * conv_v - conv_w / (2.0 * N)

    # exact V_hat convolution: -N 2 pi int_0^R0 V w J0(|p| s e^-N) s ds
    sol = table.solution
    x, wts = panel_rule(refine_edges(np.asarray(V.breakpoints(), dtype=float), V.R0 / 16.0), 24)
    vw = np.asarray(V(x)) * _w(sol, x) * x * wts
    conv_exact = -N * TWO_PI * (j0(np.outer(p_abs * scale, x)) @ vw)
    resid_exact = base + 0.5 * conv_exact - conv_w / (2.0 * N)

    c_eta = _c_eta(table, V)
    v_env = _vhat_envelope(V, N)
    g = abs(table.g_N)

    def omega_env(k: float) -> float:
        # |chi_hat(q)| <= min(pi, 2 pi * 0.5819 / q)
        q = ell * k
        return g * min(math.pi, TWO_PI * 0.5819 / q) if q > 0 else g * math.pi

    tail_v = 0.5 * _lattice_to_integral(lambda r: c_eta * v_env(0.5 * r) / (r * r), P)
    tail_w = _lattice_to_integral(lambda r: c_eta * omega_env(0.5 * r) / (r * r), P) / (2.0 * N)
    abs_r = np.abs(resid)
    abs_x = np.abs(resid_exact)
    return IdentityReport(
        max_residual=float(abs_r.max()), mean_residual=float(abs_r.mean()),
        tail_bound=float(tail_v + tail_w), max_residual_exact_v=float(abs_x.max()),
        tail_bound_exact_v=float(tail_w), c_eta=c_eta, q_cut=float(q_cut), p_max=float(P),
        points=int(m_p.size),
    )


# ---------------------------------------------------------------- norms and defects


@dataclass(frozen=True)
class NormReport:
    eta_l2_ratio: float
    eta_l2_ratio_tabulated: float
    eta0_ratio: float
    omega_ratio: float
    omega_ratio_min: float
    eta_p2_const: float
    omega_first_negative: float | None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def norm_checks(table: CoefficientTable) -> NormReport:
    """Scaled norms that should stay bounded in ``N``.

    ``eta_l2_ratio`` is the full lattice sum ``sum_p eta_p^2 / l^2``, exact by
    Parseval on the unit torus since ``eta(x)`` is supported in ``|x| <= l``;
    ``eta_l2_ratio_tabulated`` only covers the tabulated shells and misses
    most of the mass once ``1/l`` exceeds the cutoff.

    ``omega_ratio`` weights ``|omega_hat|`` by ``max(1, (l|p|)^(3/2))``, the
    decay that makes it a non-trivial check; ``omega_ratio_min`` is the
    ``min`` weighting, bounded by ``pi g_N`` for any table.
    """
    ell = table.params.ell
    ell2 = ell * ell
    if table.eps_sq == 0.0:
        return NormReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, None)
    l2 = math.fsum(np.concatenate([[table.eta0**2], table.multiplicity * table.eta**2]))
    sol = table.solution
    x, wts = _x_rule(sol, 0.0, 24)
    w2 = math.fsum(_w(sol, sol.R * x) ** 2 * x * wts)
    l2_cont = table.params.N**2 * TWO_PI * w2
    lp = ell * table.p_abs
    weight_max = np.maximum(1.0, lp**1.5)
    weight_min = np.minimum(1.0, lp**1.5)
    om = np.abs(table.omega_hat)
    neg = lp[table.omega_hat < 0]
    return NormReport(
        eta_l2_ratio=l2_cont, eta_l2_ratio_tabulated=l2 / ell2,
        eta0_ratio=abs(table.eta0) / ell2,
        omega_ratio=max(abs(table.omega_hat0), float(np.max(om * weight_max))),
        omega_ratio_min=float(np.max(om * weight_min)),
        eta_p2_const=float(np.max(table.p_sq * np.abs(table.eta))),
        omega_first_negative=float(neg.min()) if neg.size else None,
    )


@dataclass(frozen=True)
class DefectReport:
    max_defect: float
    defects: np.ndarray
    constant: float
    max_over_P_L: bool

    def as_dict(self) -> dict:
        return {"max_defect": self.max_defect, "constant": self.constant,
                "max_over_P_L": self.max_over_P_L}


def bogoliubov_defect(table: CoefficientTable) -> DefectReport:
    """``|sqrt(F^2 - G^2) - sqrt(p^4 + 8 pi p^2)|`` over the tabulated shells.

    ``constant`` is the smallest ``c`` with defect ``<= c (l|p| + log N / N)``
    on every shell.
    """
    N, ell = table.params.N, table.params.ell
    e = np.sqrt(table.F - table.G) * np.sqrt(table.F + table.G)
    free = dispersion(table.p_sq)
    d = np.abs(e - free)
    scale = ell * table.p_abs + math.log(N) / N
    covers = table.params.cutoff >= table.params.p_L
    return DefectReport(float(d.max()), d, float(np.max(d / scale)), covers)
