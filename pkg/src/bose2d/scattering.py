"""Neumann ground state of ``-Laplace + V/2`` on a disk and its asymptotics.

The radial equation ``-f'' - f'/r + (V/2) f = lam f`` is integrated in the
variable ``t = log r`` with the state ``(f, df/dt, int V f r dr, int f r dr)``,
so the two integrals needed downstream come out of the same solve. The
eigenvalue is located by root-finding on ``df/dt`` at ``r = R``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .potentials import Potential, evaluate, scattering_length


class BracketError(RuntimeError):
    """The eigenvalue window does not contain a sign change."""


class InteriorZeroError(RuntimeError):
    """The computed profile changes sign, so it is not the ground state."""


def _scalar_profile(V: Potential):
    if V.kind == "soft-disk":
        v0 = V.v0
        return lambda r: v0
    if V.kind == "gaussian-truncated":
        v0, s = V.v0, V.width
        return lambda r: v0 * math.exp(-0.5 * (r / s) ** 2)
    return lambda r: float(evaluate(V, min(r, V.R0)))


def _shoot(V: Potential, lam: float, R: float, rtol: float, dense: bool = False):
    """Integrate from near the origin to ``R``; returns the list of segments."""
    r_s = 1e-6 * V.R0
    v00 = V.value_at_origin()
    c = 0.5 * v00 - lam
    y = [1.0 + 0.25 * c * r_s**2, 0.5 * c * r_s**2, 0.5 * v00 * r_s**2, 0.5 * r_s**2]
    inner = _scalar_profile(V)

    def rhs_in(t, y):
        r2 = math.exp(2.0 * t)
        vv = inner(math.sqrt(r2))
        return [y[1], r2 * (0.5 * vv - lam) * y[0], r2 * vv * y[0], r2 * y[0]]

    def rhs_out(t, y):
        r2 = math.exp(2.0 * t)
        return [y[1], -r2 * lam * y[0], 0.0, r2 * y[0]]

    stops = [r for r in V.breakpoints() if r_s < r < R]
    if not stops or stops[-1] < V.R0 < R:
        stops.append(V.R0)
    segments = []
    t0 = math.log(r_s)
    for stop in stops + [R]:
        t1 = math.log(stop)
        rhs = rhs_in if stop <= V.R0 else rhs_out
        sol = solve_ivp(rhs, (t0, t1), y, method="DOP853", rtol=rtol, atol=1e-16,
                        dense_output=dense)
        if not sol.success:
            raise RuntimeError(f"radial integration failed: {sol.message}")
        segments.append(sol)
        y = sol.y[:, -1]
        t0 = t1
    return segments


@dataclass
class ScatteringSolution:
    """Neumann ground state on the disk of radius ``R``, normalized by ``f(R) = 1``.

    ``r`` and ``f`` hold the profile on a grid that is uniform on ``[0, 4 R0]``
    and logarithmic on ``[4 R0, R]``; :meth:`profile` evaluates it anywhere.
    """

    R: float
    lam: float
    eps_sq: float
    intVf: float
    int_f: float
    r: np.ndarray
    f: np.ndarray
    dfdt_R: float
    a: float | None
    potential: Potential
    _segments: list = field(default_factory=list, repr=False)
    _norm: float = field(default=1.0, repr=False)

    @property
    def w(self) -> np.ndarray:
        return 1.0 - self.f

    def profile(self, r) -> np.ndarray:
        """``f_R(r)`` for ``0 <= r <= R``."""
        r = np.asarray(r, dtype=float)
        if not self._segments:
            return np.ones_like(r)
        t = np.log(np.maximum(r, 1e-300))
        out = np.full_like(t, self._segments[0].y[0, 0])
        for seg in self._segments:
            m = (t >= seg.t[0]) & (t <= seg.t[-1])
            if np.any(m):
                out[m] = seg.sol(t[m])[0]
        out[t > self._segments[-1].t[-1]] = self._segments[-1].y[0, -1]
        return out / self._norm

    def profile_dt(self, r) -> np.ndarray:
        """``r f_R'(r)`` for ``R0 <= r <= R`` (and inside, away from the origin)."""
        r = np.asarray(r, dtype=float)
        if not self._segments:
            return np.zeros_like(r)
        t = np.log(r)
        out = np.zeros_like(t)
        for seg in self._segments:
            lo, hi = seg.t[0], seg.t[-1]
            m = (t >= lo) & (t <= hi)
            if np.any(m):
                out[m] = seg.sol(t[m])[1]
        return out / self._norm


def _grid(R0: float, R: float, n_inner: int, n_outer: int) -> np.ndarray:
    inner_end = min(4.0 * R0, R)
    inner = np.linspace(0.0, inner_end, n_inner + 1)
    if R <= inner_end:
        return inner
    outer = np.geomspace(inner_end, R, n_outer + 1)[1:]
    return np.concatenate([inner, outer])


def asymptotic_eigenvalue(R: float, a: float) -> float:
    """Two-term large-``R`` expansion ``2/(R^2 L) (1 + 3/(4L))``, ``L = log(R/a)``."""
    L = math.log(R / a)
    return 2.0 / (R * R * L) * (1.0 + 0.75 / L)


def solve_neumann(V: Potential, R: float, tol: float = 1e-10, *, a: float | None = None,
                  grid_density: int = 1) -> ScatteringSolution:
    """Ground state of ``-Laplace + V/2`` on ``B_R`` with ``f'(R) = 0`` and ``f(R) = 1``."""
    if not R > V.R0:
        raise ValueError("R must exceed the range R0")
    if not tol > 0:
        raise ValueError("tol must be positive")
    n_inner, n_outer = 200 * grid_density, 800 * grid_density
    grid = _grid(V.R0, R, n_inner, n_outer)
    if V.is_zero:
        return ScatteringSolution(R, 0.0, 0.0, 0.0, math.pi * R * R, grid,
                                  np.ones_like(grid), 0.0, None, V)
    if a is None:
        a = scattering_length(V).a
    rtol = min(max(1e-3 * tol, 1e-13), 1e-9)

    def target(lam: float) -> float:
        return _shoot(V, lam, R, rtol)[-1].y[1, -1]

    L = math.log(R / a)
    guess = 2.0 / (R * R * max(L - 0.75, 0.5 * L))
    lo, hi = 0.25 * guess, 4.0 * guess
    f_lo, f_hi = target(lo), target(hi)
    for _ in range(8):
        if f_lo > 0 > f_hi:
            break
        if f_lo <= 0:
            lo, hi, f_hi = lo / 4.0, lo, f_lo
            f_lo = target(lo)
        else:
            lo, f_lo, hi = hi, f_hi, hi * 4.0
            f_hi = target(hi)
    else:
        raise BracketError(f"no sign change of f'(R) in [{lo:.3e}, {hi:.3e}]")
    lam = brentq(target, lo, hi, xtol=1e-3 * tol * guess, rtol=max(1e-3 * tol, 4.5e-16),
                 maxiter=200)

    segments = _shoot(V, lam, R, rtol, dense=True)
    f_R, dfdt_R, i_v, i_f = segments[-1].y[:, -1]
    sol = ScatteringSolution(
        R=R, lam=lam, eps_sq=lam * R * R,
        intVf=2.0 * math.pi * i_v / f_R, int_f=2.0 * math.pi * i_f / f_R,
        r=grid, f=np.empty(0), dfdt_R=dfdt_R / f_R, a=a, potential=V,
        _segments=segments, _norm=f_R,
    )
    sol.f = sol.profile(grid)
    fine = sol.profile(np.geomspace(1e-6 * V.R0, R, 4000))
    if np.any(fine <= 0) or np.any(sol.f <= 0):
        raise InteriorZeroError("profile has an interior zero; not the ground state")
    return sol


def solve_sweep(V: Potential, radii, tol: float = 1e-10, threads: int = 1):
    """Independent solves over several radii, results in input order."""
    a = None if V.is_zero else scattering_length(V).a
    radii = list(radii)
    if threads <= 1 or len(radii) < 2:
        return [solve_neumann(V, R, tol, a=a) for R in radii]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda R: solve_neumann(V, R, tol, a=a), radii))


def integral_Vf(sol: ScatteringSolution, V: Potential | None = None) -> float:
    """``2 pi int_0^R0 V f r dr`` for the normalized profile."""
    if V is not None and V is not sol.potential and V != sol.potential:
        raise ValueError("solution was computed for a different potential")
    return sol.intVf


def eigenvalue_residual(sol: ScatteringSolution) -> float:
    """``lam - 2/(R^2 L)(1 + 3/(4L))``."""
    return sol.lam - asymptotic_eigenvalue(sol.R, sol.a)


def intvf_residual(sol: ScatteringSolution) -> float:
    """``intVf - 4 pi/L (1 + 1/(2L))``."""
    L = math.log(sol.R / sol.a)
    return sol.intVf - 4.0 * math.pi / L * (1.0 + 0.5 / L)


def far_field_model(r, R: float, eps_sq: float):
    r = np.asarray(r, dtype=float)
    lg = np.log(R / r)
    q = (r / R) ** 2
    return 1.0 - 0.25 * eps_sq * (2.0 * lg - 1.0 + q) + eps_sq**2 / 16.0 * lg * (1.0 + 2.0 * q)


def far_field_defect(sol: ScatteringSolution, n: int = 4000) -> float:
    """Max over ``[2 R0, R]`` of the deviation from the two-term far-field expansion."""
    R0 = sol.potential.R0
    if sol.R < 10.0 * R0:
        raise ValueError("far-field defect needs R >= 10 R0")
    if sol.eps_sq == 0.0:
        return 0.0
    r = np.geomspace(2.0 * R0, sol.R, n)
    return float(np.max(np.abs(sol.profile(r) - far_field_model(r, sol.R, sol.eps_sq))))


@dataclass(frozen=True)
class WBoundsReport:
    c_w: float
    c_dw: float
    w_at_R: float
    min_f: float
    max_f: float


def w_bounds_check(sol: ScatteringSolution, n: int = 4000) -> WBoundsReport:
    """Empirical constants in ``|w| <= C log(R/r)/log(R/a)`` and ``|w'|(r+1) log(R/a) <= C``."""
    R0, R = sol.potential.R0, sol.R
    w_R = float(1.0 - sol.profile(np.array([R]))[0])
    if sol.eps_sq == 0.0:
        return WBoundsReport(0.0, 0.0, w_R, 1.0, 1.0)
    L = math.log(R / sol.a)
    r = np.geomspace(R0, R, n)[:-1]
    w = 1.0 - sol.profile(r)
    c_w = float(np.max(np.abs(w) * L / np.log(R / r)))
    dw = -sol.profile_dt(r) / r
    c_dw = float(np.max(np.abs(dw) * (r + 1.0) * L))
    return WBoundsReport(c_w, c_dw, w_R, float(np.min(sol.f)), float(np.max(sol.f)))
