"""Composite Gauss-Legendre rules and radial Hankel transforms."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import j0


@lru_cache(maxsize=16)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def refine_edges(edges: np.ndarray, max_width: float) -> np.ndarray:
    """Split every panel wider than ``max_width`` into equal sub-panels."""
    edges = np.asarray(edges, dtype=float)
    out = [edges[:1]]
    for lo, hi in zip(edges[:-1], edges[1:]):
        n = max(1, int(np.ceil((hi - lo) / max_width)))
        out.append(np.linspace(lo, hi, n + 1)[1:])
    return np.concatenate(out)


def panel_rule(edges: np.ndarray, order: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule on ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = _legendre(order)
    lo = edges[:-1, None]
    half = 0.5 * np.diff(edges)[:, None]
    nodes = lo + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def hankel0(values: np.ndarray, nodes: np.ndarray, weights: np.ndarray,
            k: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Return 2*pi * sum_i values_i J0(k r_i) r_i w_i for each k.

    ``values`` are samples of the radial profile at ``nodes``.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    vw = values * nodes * weights
    out = np.empty(k.shape, dtype=float)
    flat_k = k.ravel()
    flat_out = out.ravel()
    for start in range(0, flat_k.size, chunk):
        kk = flat_k[start:start + chunk]
        flat_out[start:start + chunk] = j0(np.outer(kk, nodes)) @ vw
    return 2.0 * np.pi * flat_out.reshape(k.shape)
