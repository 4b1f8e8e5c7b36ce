"""Closed-form diagonalization of pair-quadratic bosonic Hamiltonians.

Each entry of a :class:`QuadraticModel` is one unordered momentum pair
``{p, -p}`` carrying

    F (a*_p a_p + a*_-p a_-p) + G (a*_p a*_-p + a_p a_-p),

which is unitarily equivalent to ``e (c*_p c_p + c*_-p c_-p) + (e - F)`` with
``e = sqrt(F^2 - G^2)``. A sum over all of ``2 pi Z^2 minus {0}`` visits every
pair twice, so lattice sums pick up each pair shift once and each frequency
with degeneracy two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """``|G| >= F`` or ``F <= 0``: the pair is not positive definite."""


def _check(F: float, G: float) -> None:
    if not (math.isfinite(F) and math.isfinite(G)):
        raise DomainError("F and G must be finite")
    if not F > 0:
        raise DomainError(f"F must be positive, got {F!r}")
    if not abs(G) < F:
        raise DomainError(f"|G| must be below F, got F={F!r}, G={G!r}")


def dispersion(p_sq, coupling: float = 1.0):
    """``sqrt(p^4 + 8 pi R p^2)`` at ``p^2 = p_sq``; exactly 0 at the origin."""
    x = np.asarray(p_sq, dtype=float)
    if np.any(x < 0):
        raise ValueError("p_sq must be non-negative")
    if not coupling > 0:
        raise ValueError("coupling must be positive")
    out = np.sqrt(x) * np.sqrt(x + 8.0 * math.pi * coupling)
    return float(out) if np.ndim(out) == 0 else out


def pair_frequency(F: float, G: float) -> float:
    """``sqrt(F - G) sqrt(F + G)``; stays accurate as ``|G| -> F``."""
    _check(F, G)
    if G == 0:
        return F
    return math.sqrt(F - G) * math.sqrt(F + G)


@dataclass(frozen=True)
class QuadraticModel:
    """Pair data ``(label, F, G)``; every pair must satisfy ``|G| < F``."""

    pairs: tuple[tuple[str, float, float], ...]
    zero_mode: str = "reject"

    def __post_init__(self) -> None:
        if self.zero_mode != "reject":
            raise ValueError("only zero_mode='reject' is supported")
        if not self.pairs:
            raise ValueError("model needs at least one pair")
        object.__setattr__(self, "pairs", tuple((str(l), float(F), float(G))
                                                for l, F, G in self.pairs))
        for _, F, G in self.pairs:
            _check(F, G)

    @classmethod
    def from_fg(cls, fg) -> QuadraticModel:
        return cls(tuple((f"pair{i}", F, G) for i, (F, G) in enumerate(fg)))

    @property
    def M(self) -> int:
        return len(self.pairs)

    @property
    def F(self) -> np.ndarray:
        return np.array([F for _, F, _ in self.pairs])

    @property
    def G(self) -> np.ndarray:
        return np.array([G for _, _, G in self.pairs])


@dataclass(frozen=True)
class DiagonalForm:
    frequencies: tuple[float, ...]
    shift: float
    pair_shifts: tuple[float, ...]
    coshsinh: tuple[tuple[float, float], ...]


def diagonalize(model: QuadraticModel) -> DiagonalForm:
    """Frequencies, ground-state shift ``sum (e - F)`` and ``(cosh t, sinh t)`` per pair."""
    freqs, shifts, cs = [], [], []
    for _, F, G in model.pairs:
        e = pair_frequency(F, G)
        freqs.append(e)
        # e - F without cancellation
        shifts.append(-G * G / (F + e))
        # cosh^2 = (F/e + 1)/2 and sinh^2 = (F/e - 1)/2 = G^2 / (2 e (F + e))
        ch = math.sqrt((F + e) / (2.0 * e))
        sh = -G / math.sqrt(2.0 * e * (F + e))
        cs.append((ch, sh))
    return DiagonalForm(tuple(freqs), math.fsum(shifts), tuple(shifts), tuple(cs))


@dataclass(frozen=True)
class CPCoefficients:
    """``c_p = (a_p + alpha a*_-p) / sqrt(1 - alpha^2)``."""

    alpha: float
    normalization: float
    e: float

    @property
    def num(self) -> float:
        return self.alpha

    @property
    def den(self) -> float:
        return math.sqrt(1.0 - self.alpha**2)


def cp_coefficients(F: float, G: float) -> CPCoefficients:
    """``alpha = (F - e)/G`` (0 for ``G = 0``) and ``1/sqrt(1 - alpha^2)``."""
    e = pair_frequency(F, G)
    if G == 0:
        return CPCoefficients(0.0, 1.0, e)
    # G / (F + e) equals (F - e)/G without the cancellation
    alpha = G / (F + e)
    return CPCoefficients(alpha, 1.0 / math.sqrt(1.0 - alpha * alpha), e)


def reconstruct(e: float, alpha: float) -> tuple[float, float]:
    """Inverse of :func:`cp_coefficients`: ``F = e(1+a^2)/(1-a^2)``, ``G = 2 e a/(1-a^2)``."""
    if not (e > 0 and abs(alpha) < 1):
        raise DomainError("need e > 0 and |alpha| < 1")
    d = 1.0 - alpha * alpha
    return e * (1.0 + alpha * alpha) / d, 2.0 * e * alpha / d
