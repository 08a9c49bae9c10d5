"""Sparse factorization ``Y = X Z`` up to signed scaled permutation.

Candidates come from ER-SpUD(DC): the rows of ``Y`` are paired at random and
for each pair ``(j1, j2)`` the l1 problem ``min ||Yw||_1 s.t.
(e_j1 + e_j2)'Yw = 1`` yields ``s = Yw``. The sparsest candidates that keep
increasing the rank form ``X_bar``; ``Z_bar`` follows by least squares.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllDegenerate, BadShape, DegenerateConstraint, FactorizationFailed, NoCandidates
from .l1 import SolverOptions, SpanBasis
from .linalg import as_matrix, support_size
from .rand_models import as_generator

DEFAULT_RANK_TOL = 1e-8
RESIDUAL_TOL = 1e-8


@dataclass
class CandidateSet:
    candidates: np.ndarray  # one candidate per row, shape (count, n)
    pairings: list[tuple[int, int]]
    skipped: list[tuple[int, int]] = field(default_factory=list)

    def __len__(self):
        return len(self.pairings)


@dataclass
class FactorizationResult:
    X_bar: np.ndarray
    Z_bar: np.ndarray
    residual: float
    selected: list[int] = field(default_factory=list)  # indices into candidates
    candidates: CandidateSet | None = None


def pair_rows(n: int, rng) -> list[tuple[int, int]]:
    """Random disjoint row pairs; with odd ``n`` the last permuted row is dropped."""
    perm = as_generator(rng).permutation(n)
    return [(int(perm[2 * i]), int(perm[2 * i + 1])) for i in range(n // 2)]


def er_spud_dc(Y, rng, opts: SolverOptions | None = None) -> CandidateSet:
    Y = as_matrix(Y, "Y")
    n = Y.shape[0]
    if n < 2:
        raise BadShape("ER-SpUD needs at least two rows")
    # pairing is fixed before any solve so results never depend on solve order
    pairs = pair_rows(n, rng)
    basis = SpanBasis(Y)
    cands, kept, skipped = [], [], []
    for j1, j2 in pairs:
        r = np.zeros(n)
        r[j1] = r[j2] = 1.0
        try:
            w = basis.solve(r, opts)
        except DegenerateConstraint:
            skipped.append((j1, j2))
            continue
        cands.append(Y @ w)
        kept.append((j1, j2))
    if not cands:
        raise AllDegenerate(f"all {len(pairs)} row pairings were degenerate")
    return CandidateSet(np.array(cands), kept, skipped)


def _greedy_indices(cands: CandidateSet, tau_supp, rank_tol) -> list[int]:
    C = np.asarray(cands.candidates, dtype=np.float64)
    if C.size == 0:
        raise NoCandidates("empty candidate set")
    norms = np.linalg.norm(C, axis=1)
    usable = [i for i in range(C.shape[0]) if norms[i] > 0 and support_size(C[i], tau_supp) > 0]
    if not usable:
        raise NoCandidates("all candidates are zero")
    unit = C[usable] / norms[usable, None]
    sv = np.linalg.svd(unit, compute_uv=False)
    cap = int(np.count_nonzero(sv > rank_tol * sv[0]))

    order = sorted(usable, key=lambda i: (support_size(C[i], tau_supp), i))
    selected: list[int] = []
    for i in order:
        trial = C[selected + [i]] / norms[selected + [i], None]
        s = np.linalg.svd(trial, compute_uv=False)
        if s[-1] > rank_tol * s[0]:
            selected.append(i)
            if len(selected) == cap:
                break
    return selected


def greedy_sparsest_full_rank(cands: CandidateSet, tau_supp: float | None = None,
                              rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Columns picked sparsest-first, each one raising the numerical rank.

    Ties in support size go to the lower candidate index. Rank is judged on
    unit-normalised columns: a set is full rank when its smallest singular
    value exceeds ``rank_tol`` times its largest.
    """
    idx = _greedy_indices(cands, tau_supp, rank_tol)
    return np.asarray(cands.candidates)[idx].T.copy()


def sparse_factorization(Y, rng, opts: SolverOptions | None = None, *,
                         tau_supp: float | None = None, rank_tol: float = DEFAULT_RANK_TOL,
                         expected_rank: int | None = None) -> FactorizationResult:
    """Factor ``Y = X_bar Z_bar`` with sparse ``X_bar``.

    ``expected_rank``, when given, is the inner dimension ``p``; selecting
    fewer (or more) columns than that is a failure.
    """
    Y = as_matrix(Y, "Y")
    cands = er_spud_dc(Y, rng, opts)
    idx = _greedy_indices(cands, tau_supp, rank_tol)
    if not idx:
        raise FactorizationFailed("no candidate selected")
    if expected_rank is not None and len(idx) != expected_rank:
        raise FactorizationFailed(f"selected rank {len(idx)} differs from expected {expected_rank}")
    X_bar = cands.candidates[idx].T.copy()
    Z_bar = np.linalg.lstsq(X_bar, Y, rcond=None)[0]
    residual = float(np.linalg.norm(X_bar @ Z_bar - Y) / np.linalg.norm(Y))
    if residual > RESIDUAL_TOL:
        raise FactorizationFailed(f"relative residual {residual:.3e} exceeds {RESIDUAL_TOL:g}")
    return FactorizationResult(X_bar, Z_bar, residual, idx, cands)
