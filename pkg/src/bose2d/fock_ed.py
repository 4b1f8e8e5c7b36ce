"""Exact diagonalization of pair-quadratic Hamiltonians on a truncated Fock space.

Modes are ordered ``p_0, -p_0, p_1, -p_1, ...``; the basis holds every
occupation vector with total occupation at most ``n_max``. Used as an oracle
for the closed-form results in :mod:`bose2d.bogoliubov`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .bogoliubov import QuadraticModel, cp_coefficients, diagonalize
from .lattice_sums import ladder

DEFAULT_BUDGET = 2_000_000
DENSE_LIMIT = 2000


class DimensionBudgetExceeded(RuntimeError):
    """The requested truncation needs more nonzeros than the configured budget."""


class ConvergenceError(RuntimeError):
    """The iterative eigensolver did not converge."""


def basis_size(M: int, n_max: int) -> int:
    return math.comb(2 * M + n_max, n_max)


@dataclass(frozen=True)
class FockBasis:
    """Occupation vectors of ``2M`` modes with ``sum n <= n_max`` (optionally one d-sector)."""

    M: int
    n_max: int
    states: np.ndarray
    codes: np.ndarray
    sector: tuple[int, ...] | None = None

    @property
    def dimension(self) -> int:
        return int(self.states.shape[0])

    def index(self, occupations) -> np.ndarray:
        """Row indices of the given occupation vectors; -1 if absent."""
        occ = np.atleast_2d(np.asarray(occupations, dtype=np.int64))
        code = _encode(occ, self.n_max)
        pos = np.searchsorted(self.codes, code)
        pos = np.minimum(pos, self.codes.size - 1)
        found = self.codes[pos] == code
        return np.where(found, pos, -1)

    def state(self, i: int) -> np.ndarray:
        return self.states[i]


def _encode(states: np.ndarray, n_max: int) -> np.ndarray:
    base = n_max + 1
    weights = base ** np.arange(states.shape[1] - 1, -1, -1, dtype=np.int64)
    return states.astype(np.int64) @ weights


def _ramps(reps: np.ndarray) -> np.ndarray:
    """Concatenation of ``arange(r)`` for each ``r`` in ``reps``."""
    starts = np.cumsum(reps) - reps
    return np.arange(int(reps.sum()), dtype=np.int64) - np.repeat(starts, reps)


def make_basis(M: int, n_max: int, sector=None) -> FockBasis:
    if M < 1:
        raise ValueError("need at least one pair")
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if 2 * M * math.log2(n_max + 1) > 62:
        raise DimensionBudgetExceeded("occupation codes would overflow 64 bits")
    if sector is not None:
        sector = tuple(int(d) for d in sector)
        if len(sector) != M:
            raise ValueError("sector needs one d value per pair")
        # n_p = k + max(d, 0), n_-p = k + max(-d, 0)
        pairs = np.zeros((1, 0), dtype=np.int64)
        base = sum(abs(d) for d in sector)
        for _ in range(M):
            used = 2 * pairs.sum(axis=1) + base
            reps = np.maximum((n_max - used) // 2 + 1, 0)
            pairs = np.repeat(pairs, reps, axis=0)
            pairs = np.column_stack([pairs, _ramps(reps)])
        states = np.empty((pairs.shape[0], 2 * M), dtype=np.int64)
        for j, d in enumerate(sector):
            states[:, 2 * j] = pairs[:, j] + max(d, 0)
            states[:, 2 * j + 1] = pairs[:, j] + max(-d, 0)
    else:
        states = np.zeros((1, 0), dtype=np.int64)
        for _ in range(2 * M):
            reps = n_max - states.sum(axis=1) + 1
            states = np.repeat(states, reps, axis=0)
            states = np.column_stack([states, _ramps(reps)])
    codes = _encode(states, n_max)
    order = np.argsort(codes, kind="stable")
    return FockBasis(M, n_max, states[order], codes[order], sector)


@dataclass(frozen=True)
class SparseHamiltonian:
    """Symmetric matrix kept as its lower triangle (CSR).

    ``blocks`` labels every basis state with its sector of conserved
    ``d_p = n_p - n_-p``; the matrix has no entries between different labels.
    """

    dimension: int
    lower: sp.csr_matrix
    blocks: np.ndarray | None = None

    @property
    def nnz(self) -> int:
        return int(self.lower.nnz)

    def full(self) -> sp.csr_matrix:
        diag = sp.diags(self.lower.diagonal())
        return (self.lower + self.lower.T - diag).tocsr()

    def entries(self):
        coo = self.lower.tocoo()
        return coo.row, coo.col, coo.data


def sector_labels(states: np.ndarray, n_max: int) -> np.ndarray:
    """Integer label of the d-vector of each state (equal labels, equal sector)."""
    d = states[:, 0::2] - states[:, 1::2] + n_max
    base = 2 * n_max + 1
    weights = base ** np.arange(d.shape[1] - 1, -1, -1, dtype=np.int64)
    return d.astype(np.int64) @ weights


def build(model: QuadraticModel, n_max: int, *, sector=None,
          budget: int = DEFAULT_BUDGET) -> tuple[FockBasis, SparseHamiltonian]:
    """Truncated matrix of ``sum F (n_p + n_-p) + G (a*_p a*_-p + a_p a_-p)``."""
    M = model.M
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    if sector is None:
        est = basis_size(M, n_max) * (1 + M)
        if est > budget:
            raise DimensionBudgetExceeded(
                f"M={M}, n_max={n_max} needs about {est} nonzeros (budget {budget})")
    basis = make_basis(M, n_max, sector)
    S = basis.states
    F, G = model.F, model.G
    diag = (S[:, 0::2] + S[:, 1::2]).astype(float) @ F
    rows, cols, vals = [np.arange(basis.dimension)], [np.arange(basis.dimension)], [diag]
    total = S.sum(axis=1)
    for j in range(M):
        if G[j] == 0.0:
            continue
        src = np.nonzero(total + 2 <= n_max)[0]
        tgt_states = S[src].copy()
        tgt_states[:, 2 * j] += 1
        tgt_states[:, 2 * j + 1] += 1
        tgt = basis.index(tgt_states)
        ok = tgt >= 0
        src, tgt = src[ok], tgt[ok]
        amp = G[j] * np.sqrt((S[src, 2 * j] + 1.0) * (S[src, 2 * j + 1] + 1.0))
        rows.append(tgt)
        cols.append(src)
        vals.append(amp)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    if v.size > budget:
        raise DimensionBudgetExceeded(f"{v.size} nonzeros exceed the budget {budget}")
    lower = sp.csr_matrix((v, (r, c)), shape=(basis.dimension, basis.dimension))
    lower.sum_duplicates()
    lower.sort_indices()
    return basis, SparseHamiltonian(basis.dimension, lower, sector_labels(S, n_max))


def _block_eigs(A: sp.csr_matrix, k: int, tol: float, dense: bool | None, maxiter):
    n = A.shape[0]
    k = min(k, n)
    if dense or (dense is None and n <= DENSE_LIMIT) or k >= n - 1:
        return eigh(A.toarray(), eigvals_only=True, subset_by_index=[0, k - 1])
    v0 = np.ones(n) / math.sqrt(n)
    try:
        w = eigsh(A, k=k, which="SA", tol=tol, v0=v0, maxiter=maxiter,
                  ncv=min(n - 1, max(2 * k + 1, 24)), return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        res = [float(np.linalg.norm(A @ vec - lam * vec))
               for lam, vec in zip(exc.eigenvalues, exc.eigenvectors.T)]
        raise ConvergenceError(f"eigensolver did not converge; residuals {res}") from exc
    return np.sort(w)


def lowest_eigs(H: SparseHamiltonian, k: int, tol: float = 1e-12, *, dense: bool | None = None,
                maxiter: int | None = None, use_blocks: bool = True) -> np.ndarray:
    """``k`` smallest eigenvalues, ascending, with multiplicity.

    The matrix is split into its d-sectors and each block is solved on its
    own: densely when it has at most ``DENSE_LIMIT`` rows (or ``dense`` is
    set), otherwise by implicitly restarted Lanczos from a fixed start
    vector. Splitting first keeps the ``d <-> -d`` degeneracies intact, which
    a single Krylov sequence cannot resolve.
    """
    if not 1 <= k < H.dimension:
        raise ValueError("need 1 <= k < dimension")
    A = H.full()
    if H.blocks is None or not use_blocks:
        return _block_eigs(A, k, tol, dense, maxiter)
    labels, inverse = np.unique(H.blocks, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(labels.size + 1))
    found = []
    for b in range(labels.size):
        idx = order[bounds[b]:bounds[b + 1]]
        found.append(_block_eigs(A[idx][:, idx], k, tol, dense, maxiter))
    allw = np.sort(np.concatenate(found))
    return allw[:k]


def analytic_levels(model: QuadraticModel, count: int, sector=None) -> np.ndarray:
    """Lowest ``count`` values of ``shift + sum n e`` (with multiplicity)."""
    diag = diagonalize(model)
    e = list(diag.frequencies)
    if sector is None:
        energies = [x for x in e for _ in range(2)]
        offset = 0.0
    else:
        # within sector d, each pair contributes e (2k + |d|)
        energies = [2.0 * x for x in e]
        offset = math.fsum(abs(d) * x for d, x in zip(sector, e))
    zeta = min(energies) * max(count, 1)
    while True:
        states = ladder(energies, zeta)
        if len(states) >= count:
            break
        zeta *= 2.0
    vals = np.array([s.value for s in states[:count]])
    return diag.shift + offset + vals


@dataclass(frozen=True)
class CompareReport:
    eigs: tuple[float, ...]
    analytic: tuple[float, ...]
    deviations: tuple[float, ...]
    max_deviation: float
    ground: float
    shift: float
    ground_extrapolated: float
    extrapolated_deviation: float
    gaps: tuple[float, ...]
    analytic_gaps: tuple[float, ...]

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _distinct(values, rel_tol: float = 1e-7) -> list[float]:
    out: list[float] = []
    for v in values:
        if not out or abs(v - out[-1]) > rel_tol * max(1.0, abs(v)):
            out.append(float(v))
    return out


def compare_analytic(model: QuadraticModel, n_max: int, levels: int, *, sector=None,
                     dense: bool | None = None, budget: int = DEFAULT_BUDGET) -> CompareReport:
    """Lowest ED eigenvalues against the ladder ``shift + sum n_p e_p``.

    The ground-state truncation error shrinks by ``alpha^2`` per extra pair
    of quanta, which gives a Richardson step from ``n_max - 2`` to ``n_max``.
    """
    _, H = build(model, n_max, sector=sector, budget=budget)
    k = min(levels, H.dimension - 1)
    eigs = np.asarray(lowest_eigs(H, k, dense=dense))
    ref = analytic_levels(model, k, sector)
    dev = np.abs(eigs - ref)
    shift = diagonalize(model).shift
    if sector is not None:
        e = diagonalize(model).frequencies
        shift = shift + math.fsum(abs(d) * x for d, x in zip(sector, e))
    q = max(cp_coefficients(F, G).alpha ** 2 for _, F, G in model.pairs)
    H_prev = build(model, n_max - 2, sector=sector, budget=budget)[1] if n_max >= 4 else None
    if H_prev is not None and H_prev.dimension > 1:
        prev = float(lowest_eigs(H_prev, 1, dense=dense)[0])
        ground_x = (eigs[0] - q * prev) / (1.0 - q) if q > 0 else float(eigs[0])
    else:
        ground_x = float(eigs[0])
    d_eigs, d_ref = _distinct(eigs), _distinct(ref)
    n = min(len(d_eigs), len(d_ref))
    return CompareReport(
        eigs=tuple(float(x) for x in eigs), analytic=tuple(float(x) for x in ref),
        deviations=tuple(float(x) for x in dev), max_deviation=float(dev.max()),
        ground=float(eigs[0]), shift=float(shift), ground_extrapolated=float(ground_x),
        extrapolated_deviation=float(abs(ground_x - shift)),
        gaps=tuple(x - d_eigs[0] for x in d_eigs[1:n]),
        analytic_gaps=tuple(x - d_ref[0] for x in d_ref[1:n]),
    )


@dataclass(frozen=True)
class ShellSliceReport:
    m: int
    p_sq: float
    F: float
    G: float
    pairs: int
    ground_minus_shift: float
    gap: float
    frequency: float
    gap_error: float
    free_dispersion: float
    dispersion_gap: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def gp_slice_check(table, shells: int = 1, n_max: int = 30, *,
                   budget: int = DEFAULT_BUDGET) -> list[ShellSliceReport]:
    """ED of the lowest lattice shells of a coefficient table, one shell at a time.

    Different shells do not couple, so each shell's pairs form an
    independent model; the single-quantum gap is compared with
    ``sqrt(F^2 - G^2)`` and with the free dispersion.
    """
    from .bogoliubov import dispersion

    if not 1 <= shells <= 3:
        raise ValueError("shells must be between 1 and 3")
    if shells > len(table.shells):
        raise ValueError("table has fewer shells than requested")
    out = []
    for s in range(shells):
        m = int(table.shells[s])
        F, G = float(table.F[s]), float(table.G[s])
        n_pairs = int(table.multiplicity[s]) // 2
        model = QuadraticModel(tuple((f"m{m}_{i}", F, G) for i in range(n_pairs)))
        _, H = build(model, n_max, budget=budget)
        eigs = np.asarray(lowest_eigs(H, 2))
        diag = diagonalize(model)
        e = diag.frequencies[0]
        gap = float(eigs[1] - eigs[0])
        p_sq = 4.0 * math.pi**2 * m
        free = float(dispersion(p_sq))
        out.append(ShellSliceReport(m, p_sq, F, G, n_pairs, float(eigs[0] - diag.shift), gap, e,
                                    abs(gap - e), free, abs(gap - free)))
    return out
