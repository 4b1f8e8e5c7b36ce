"""Radial, compactly supported, repulsive pair potentials and their scattering data.

Three profile kinds are supported:

* ``soft-disk``: ``V(r) = v0`` for ``r <= R0``.
* ``gaussian-truncated``: ``V(r) = v0 * exp(-r^2 / (2 width^2))`` for ``r <= R0``.
* ``tabulated-radial``: monotone cubic (PCHIP) interpolation of ``(r, V)`` samples,
  zero beyond the last sample.

The scattering length of a soft disk has a closed form; every other kind goes
through the zero-energy radial equation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.special import i0e, i1e, j1

from ._quad import hankel0, panel_rule, refine_edges

KINDS = ("soft-disk", "gaussian-truncated", "tabulated-radial")


class QuadratureError(RuntimeError):
    """A radial transform did not converge."""


class FitError(RuntimeError):
    """The exterior zero-energy solution is not logarithmic within tolerance."""


@dataclass(frozen=True)
class Potential:
    """Radial pair interaction supported on ``[0, R0]``.

    Construct through :meth:`soft_disk`, :meth:`gaussian_truncated` or
    :meth:`tabulated` rather than directly.
    """

    kind: str
    v0: float
    R0: float
    width: float | None = None
    table_r: tuple[float, ...] | None = None
    table_v: tuple[float, ...] | None = None
    _interp: PchipInterpolator | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if not (math.isfinite(self.R0) and self.R0 > 0):
            raise ValueError("R0 must be positive and finite")
        if not (math.isfinite(self.v0) and self.v0 >= 0):
            raise ValueError("v0 must be non-negative (repulsive potentials only)")
        if self.kind == "gaussian-truncated" and not (self.width and self.width > 0):
            raise ValueError("gaussian-truncated needs a positive width")
        if self.kind == "tabulated-radial":
            r = np.asarray(self.table_r, dtype=float)
            v = np.asarray(self.table_v, dtype=float)
            if r.size < 2 or r.shape != v.shape:
                raise ValueError("tabulated profile needs at least two (r, V) rows")
            if r[0] < 0 or np.any(np.diff(r) <= 0):
                raise ValueError("tabulated r must be non-negative and strictly increasing")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError("tabulated V must be finite and non-negative")
            if r[0] > 0:
                r = np.concatenate([[0.0], r])
                v = np.concatenate([[v[0]], v])
            object.__setattr__(self, "_interp", PchipInterpolator(r, v, extrapolate=False))

    @classmethod
    def soft_disk(cls, v0: float, R0: float = 1.0) -> Potential:
        return cls("soft-disk", float(v0), float(R0))

    @classmethod
    def gaussian_truncated(cls, v0: float, R0: float = 1.0,
                           width: float | None = None) -> Potential:
        width = R0 / 2.0 if width is None else width
        return cls("gaussian-truncated", float(v0), float(R0), width=float(width))

    @classmethod
    def tabulated(cls, r, v) -> Potential:
        r = tuple(float(x) for x in r)
        v = tuple(float(x) for x in v)
        return cls("tabulated-radial", max(v) if v else 0.0, r[-1] if r else 0.0,
                   table_r=r, table_v=v)

    @classmethod
    def from_csv(cls, path: str | Path) -> Potential:
        """Read a two-column ``r, V`` table; a non-numeric first row is a header."""
        rows = []
        with open(path, newline="") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row or not "".join(row).strip():
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    if i == 0:
                        continue
                    raise ValueError(f"{path}: malformed row {i + 1}: {row!r}")
        if not rows:
            raise ValueError(f"{path}: no data rows")
        r, v = zip(*rows)
        return cls.tabulated(r, v)

    @property
    def is_zero(self) -> bool:
        if self.kind == "tabulated-radial":
            return not any(self.table_v)
        return self.v0 == 0.0

    def __call__(self, r):
        return evaluate(self, r)

    def value_at_origin(self) -> float:
        return float(evaluate(self, 0.0))

    def breakpoints(self) -> np.ndarray:
        """Radii where the profile is not smooth, including 0 and R0."""
        if self.kind == "tabulated-radial":
            pts = np.asarray(self.table_r)
            return np.unique(np.concatenate([[0.0], pts]))
        return np.array([0.0, self.R0])


def evaluate(V: Potential, r):
    """Evaluate ``V(r)``; zero for ``r > R0``. Accepts scalars or arrays."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("r must be non-negative")
    inside = r_arr <= V.R0
    if V.kind == "soft-disk":
        out = np.where(inside, V.v0, 0.0)
    elif V.kind == "gaussian-truncated":
        out = np.where(inside, V.v0 * np.exp(-0.5 * (r_arr / V.width) ** 2), 0.0)
    else:
        vals = V._interp(np.minimum(r_arr, V.R0))
        out = np.where(inside, np.maximum(np.nan_to_num(vals), 0.0), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def _quadrature_rule(V: Potential, k_max: float, order: int):
    edges = V.breakpoints()
    width = V.R0 / 8.0
    if k_max > 0:
        width = min(width, np.pi / k_max)
    edges = refine_edges(edges, width)
    return panel_rule(edges, order)


def fourier_hat(V: Potential, k):
    """Radial 2D Fourier transform ``2 pi int_0^R0 V(r) J0(k r) r dr``."""
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr < 0):
        raise ValueError("k must be non-negative")
    if V.kind == "soft-disk":
        kr = k_arr * V.R0
        with np.errstate(invalid="ignore", divide="ignore"):
            val = np.where(kr > 0, 2.0 * np.pi * V.v0 * V.R0 * j1(kr) / np.where(kr > 0, k_arr, 1.0),
                           np.pi * V.v0 * V.R0**2)
        return float(val) if np.ndim(val) == 0 else val
    k_max = float(np.max(k_arr)) if k_arr.size else 0.0
    x1, w1 = _quadrature_rule(V, k_max, 20)
    x2, w2 = _quadrature_rule(V, k_max, 28)
    v1 = hankel0(evaluate(V, x1), x1, w1, k_arr)
    v2 = hankel0(evaluate(V, x2), x2, w2, k_arr)
    scale = 2.0 * np.pi * float(np.sum(evaluate(V, x2) * x2 * w2))
    if np.any(np.abs(v1 - v2) > 1e-9 * max(scale, 1e-300)):
        raise QuadratureError("radial Fourier transform did not converge")
    return float(v2) if np.ndim(v2) == 0 else v2


@dataclass(frozen=True)
class ScatteringData:
    a: float
    method: str


def scattering_length_closed_form(v0: float, R0: float) -> float:
    """``R0 exp(-I0(k R0) / (k R0 I1(k R0)))`` with ``k = sqrt(v0/2)``."""
    x = math.sqrt(v0 / 2.0) * R0
    if x == 0:
        raise ValueError("zero potential has vanishing scattering length")
    return R0 * math.exp(-float(i0e(x)) / (x * float(i1e(x))))


def _zero_energy_rhs(V: Potential):
    # Riccati form in t = log r: u = r phi'/phi, psi = log phi.
    def rhs(t, y):
        r = math.exp(t)
        vr = evaluate(V, r)
        u = y[0]
        return [0.5 * r * r * vr - u * u, u]
    return rhs


def zero_energy_solution(V: Potential, r_out: float, rtol: float = 1e-13):
    """Integrate the zero-energy equation from the origin to ``r_out``.

    Returns a list of ``solve_ivp`` segment results carrying ``(u, log phi)``
    in the variable ``t = log r``; segments break at profile kinks.
    """
    v00 = V.value_at_origin()
    r_s = 1e-8 * V.R0
    y = [0.25 * v00 * r_s**2, math.log1p(0.125 * v00 * r_s**2)]
    stops = [r for r in V.breakpoints() if r_s < r < r_out] + [r_out]
    segments = []
    t0 = math.log(r_s)
    rhs = _zero_energy_rhs(V)
    for stop in stops:
        t1 = math.log(stop)
        sol = solve_ivp(rhs, (t0, t1), y, method="DOP853", rtol=rtol, atol=1e-300,
                        dense_output=True)
        if not sol.success:
            raise FitError(f"zero-energy integration failed: {sol.message}")
        segments.append(sol)
        y = sol.y[:, -1]
        t0 = t1
    return segments


def scattering_length_ode(V: Potential) -> float:
    """Scattering length from the zero-energy equation and a log fit at 2R0 and 4R0."""
    if V.is_zero:
        raise ValueError("zero potential has vanishing scattering length")
    r1, r3, r2 = 2.0 * V.R0, 3.0 * V.R0, 4.0 * V.R0
    segs = zero_energy_solution(V, r2)
    last = segs[-1]
    psi1 = last.sol(math.log(r1))[1]
    psi3 = last.sol(math.log(r3))[1]
    psi2 = last.y[1, -1]
    # phi_i / phi_1 = log(r_i / a) / log(r1 / a)
    slope = math.expm1(psi2 - psi1) / math.log(r2 / r1)
    log_a = math.log(r1) - 1.0 / slope
    predicted = 1.0 + slope * math.log(r3 / r1)
    if abs(math.exp(psi3 - psi1) - predicted) > 1e-9 * predicted:
        raise FitError("exterior zero-energy solution is not logarithmic")
    return math.exp(log_a)


def scattering_length(V: Potential, method: str | None = None) -> ScatteringData:
    """Scattering length, closed form for soft disks and ODE otherwise."""
    if method is None:
        method = "closed-form" if V.kind == "soft-disk" else "zero-energy-ode"
    if method == "closed-form":
        if V.kind != "soft-disk":
            raise ValueError("closed form is only available for soft disks")
        return ScatteringData(scattering_length_closed_form(V.v0, V.R0), method)
    if method == "zero-energy-ode":
        return ScatteringData(scattering_length_ode(V), method)
    raise ValueError(f"unknown method {method!r}")


def variational_check(V: Potential, a: float, R: float) -> float:
    """Relative defect of the energy functional of the minimizer against ``2 pi / log(R/a)``.

    The minimizer on ``B_R`` with ``phi(R) = 1`` is the zero-energy solution,
    logarithmic outside ``R0``. The functional is evaluated by quadrature in
    ``t = log r`` from the integrated ODE.
    """
    if R <= V.R0:
        raise ValueError("R must exceed R0")
    if V.is_zero:
        return 1.0
    segs = zero_energy_solution(V, V.R0)
    u_R0, psi_R0 = segs[-1].y[:, -1]
    # exterior: phi = phi(R0) (1 + u_R0 log(r/R0))
    phi_R = math.exp(psi_R0) * (1.0 + u_R0 * math.log(R / V.R0))
    total = 0.0
    for sol in segs:
        t_lo, t_hi = sol.t[0], sol.t[-1]
        edges = refine_edges(np.array([t_lo, t_hi]), 0.5)
        nodes, weights = panel_rule(edges, 20)
        u, psi = sol.sol(nodes)
        r = np.exp(nodes)
        dens = (u * u + 0.5 * r * r * evaluate(V, r)) * np.exp(2.0 * (psi - math.log(phi_R)))
        total += float(np.sum(dens * weights))
    # exterior: r phi' = phi(R0) u_R0 is constant, integrand constant in t
    slope = math.exp(psi_R0) * u_R0 / phi_R
    nodes, weights = panel_rule(refine_edges(np.array([math.log(V.R0), math.log(R)]), 1.0), 8)
    total += float(np.sum(np.full_like(nodes, slope * slope) * weights))
    value = 2.0 * np.pi * total
    target = 2.0 * np.pi / math.log(R / a)
    return abs(value - target) / target
