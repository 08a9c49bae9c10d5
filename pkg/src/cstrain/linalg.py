"""Dense linear-algebra helpers: norms, ranks, column scaling, RIP estimates
and column matching up to signed scaled permutation."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    NonFiniteEntries,
    ShapeMismatch,
    TooManySupports,
    ZeroColumn,
    ZeroMatrix,
)

__all__ = [
    "as_matrix",
    "as_vector",
    "default_tau_supp",
    "support_size",
    "column_supports",
    "scaling_matrix",
    "spectral_norm",
    "stable_rank",
    "numerical_rank",
    "RipEstimate",
    "rip_constant",
    "rip_constant_sampled",
    "EquivalenceReport",
    "match_up_to_signed_scaled_permutation",
]

# full SVD up to this many columns, power iteration beyond
SVD_COLS_LIMIT = 512
_ZERO_NORM = 1e-300


def as_matrix(a, name="matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array (a copy is not forced)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatch(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteEntries(f"{name} contains NaN or Inf")
    return arr


def as_vector(v, name="vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.reshape(-1)
    if arr.ndim != 1:
        raise ShapeMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteEntries(f"{name} contains NaN or Inf")
    return arr


def default_tau_supp(x) -> float:
    """Numerical-zero threshold: 1e-6 times the largest magnitude, floored at 1."""
    x = np.asarray(x, dtype=np.float64)
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    return 1e-6 * max(peak, 1.0)


def support_size(x, tau_supp: float | None = None) -> int:
    """Number of entries with ``|x_i| > tau_supp``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if tau_supp is None:
        tau_supp = default_tau_supp(x)
    if tau_supp < 0:
        raise ValueError("tau_supp must be nonnegative")
    return int(np.count_nonzero(np.abs(x) > tau_supp))


def column_supports(X, tau_supp: float | None = None) -> np.ndarray:
    """Per-column :func:`support_size`.

    With ``tau_supp=None`` each column uses its own default threshold.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch("column_supports expects a 2-D array")
    return np.array([support_size(X[:, k], tau_supp) for k in range(X.shape[1])],
                    dtype=np.int64)


def scaling_matrix(X) -> np.ndarray:
    """Diagonal of the column scaling matrix, entry ``k`` being ``1/||X_k||_2``.

    Returned as a 1-D array; ``X * scaling_matrix(X)`` has unit-norm columns.
    """
    X = as_matrix(X, "X")
    norms = np.linalg.norm(X, axis=0)
    bad = np.flatnonzero(norms < _ZERO_NORM)
    if bad.size:
        raise ZeroColumn(bad[0])
    return 1.0 / norms


def _power_iteration(A: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    # deterministic start keeps results reproducible
    rng = np.random.default_rng(0)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new_sigma = math.sqrt(nw)
        if abs(new_sigma - sigma) <= tol * new_sigma:
            return new_sigma
        sigma = new_sigma
    return sigma


def spectral_norm(A) -> float:
    A = as_matrix(A, "A")
    if A.shape[1] <= SVD_COLS_LIMIT:
        return float(np.linalg.svd(A, compute_uv=False)[0])
    return _power_iteration(A)


def stable_rank(A) -> float:
    """``||A||_F^2 / ||A||_2^2``; lies in ``[1, min(rows, cols)]``."""
    A = as_matrix(A, "A")
    fro2 = float(np.sum(A * A))
    if fro2 == 0.0:
        raise ZeroMatrix("stable rank of the zero matrix is undefined")
    sigma = spectral_norm(A)
    return fro2 / (sigma * sigma)


def numerical_rank(A, rank_tol: float = 1e-8) -> int:
    """Count of singular values above ``rank_tol`` times the largest one."""
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        return 0
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > rank_tol * sv[0]))


@dataclass(frozen=True)
class RipEstimate:
    sparsity_t: int
    epsilon: float
    supports_checked: int
    sigma_min: float
    sigma_max: float
    exhaustive: bool = True  # False: sampled supports, epsilon is a lower bound


def _subset_extremes(gram: np.ndarray, subsets: np.ndarray) -> tuple[float, float]:
    blocks = gram[subsets[:, :, None], subsets[:, None, :]]
    eig = np.linalg.eigvalsh(blocks)
    lo = math.sqrt(max(float(eig[:, 0].min()), 0.0))
    hi = math.sqrt(max(float(eig[:, -1].max()), 0.0))
    return lo, hi


def _estimate(M: np.ndarray, t: int, subset_iter, chunk: int = 4096):
    gram = M.T @ M
    lo, hi, count = math.inf, 0.0, 0
    while True:
        block = list(itertools.islice(subset_iter, chunk))
        if not block:
            break
        b_lo, b_hi = _subset_extremes(gram, np.asarray(block, dtype=np.intp))
        lo, hi = min(lo, b_lo), max(hi, b_hi)
        count += len(block)
    return lo, hi, count


def rip_constant(M, t: int, max_supports: int = 1_000_000) -> RipEstimate:
    """Exact restricted isometry constant of order ``t`` by enumeration.

    ``epsilon`` is the largest ``max(1 - sigma_min, sigma_max - 1)`` over all
    column subsets of size ``t``. Raises :class:`TooManySupports` when
    ``binomial(cols, t)`` exceeds ``max_supports``; use
    :func:`rip_constant_sampled` in that case.
    """
    M = as_matrix(M, "M")
    n = M.shape[1]
    if not 1 <= t <= n:
        raise ValueError(f"sparsity t={t} must lie in [1, {n}]")
    total = math.comb(n, t)
    if total > max_supports:
        raise TooManySupports(f"binomial({n}, {t}) = {total} exceeds budget {max_supports}")
    lo, hi, count = _estimate(M, t, itertools.combinations(range(n), t))
    return RipEstimate(t, max(1.0 - lo, hi - 1.0), count, lo, hi, exhaustive=True)


def rip_constant_sampled(M, t: int, n_samples: int, rng: np.random.Generator) -> RipEstimate:
    """Lower bound on the RIP constant from ``n_samples`` random supports."""
    M = as_matrix(M, "M")
    n = M.shape[1]
    if not 1 <= t <= n:
        raise ValueError(f"sparsity t={t} must lie in [1, {n}]")
    subsets = (tuple(sorted(rng.choice(n, size=t, replace=False))) for _ in range(n_samples))
    lo, hi, count = _estimate(M, t, subsets)
    return RipEstimate(t, max(1.0 - lo, hi - 1.0), count, lo, hi, exhaustive=False)


@dataclass(frozen=True)
class EquivalenceReport:
    """Result of matching candidate columns to reference columns.

    ``permutation[j]`` is the reference column reproduced by candidate column
    ``j`` as ``X_cand[:, j] ~ signs[j] * scales[j] * X_ref[:, permutation[j]]``.
    """

    matched: bool
    permutation: np.ndarray
    signs: np.ndarray
    scales: np.ndarray
    max_residual: float

    def apply(self, X_ref) -> np.ndarray:
        X_ref = np.asarray(X_ref, dtype=np.float64)
        return X_ref[:, self.permutation] * (self.signs * self.scales)


def match_up_to_signed_scaled_permutation(X_ref, X_cand, tol: float = 1e-6) -> EquivalenceReport:
    """Greedy one-to-one column matching on absolute cosine similarity.

    Pairs are taken in decreasing ``|cos|``; ties go to the lowest reference
    index, then the lowest candidate index. Each pair gets the least-squares
    signed scale, and ``matched`` requires every per-column relative residual
    ``||cand_j - gamma_j ref_i|| / ||cand_j||`` to be at most ``tol``.
    """
    X_ref = as_matrix(X_ref, "X_ref")
    X_cand = as_matrix(X_cand, "X_cand")
    if X_ref.shape != X_cand.shape:
        raise ShapeMismatch(f"shapes differ: {X_ref.shape} vs {X_cand.shape}")
    ref_norms = np.linalg.norm(X_ref, axis=0)
    cand_norms = np.linalg.norm(X_cand, axis=0)
    for norms in (ref_norms, cand_norms):
        bad = np.flatnonzero(norms < _ZERO_NORM)
        if bad.size:
            raise ZeroColumn(bad[0])

    p = X_ref.shape[1]
    cos = np.abs((X_ref / ref_norms).T @ (X_cand / cand_norms))
    # stable sort on -cos keeps row-major (ref, cand) order among ties
    order = np.argsort(-cos, axis=None, kind="stable")
    ref_used = np.zeros(p, dtype=bool)
    cand_used = np.zeros(p, dtype=bool)
    permutation = np.full(p, -1, dtype=np.int64)
    for flat in order:
        i, j = divmod(int(flat), p)
        if ref_used[i] or cand_used[j]:
            continue
        ref_used[i] = cand_used[j] = True
        permutation[j] = i
        if ref_used.all():
            break

    ref_cols = X_ref[:, permutation]
    gamma = np.einsum("ij,ij->j", ref_cols, X_cand) / ref_norms[permutation] ** 2
    resid = np.linalg.norm(X_cand - ref_cols * gamma, axis=0) / cand_norms
    signs = np.where(gamma < 0, -1.0, 1.0)
    scales = np.abs(gamma)
    max_res = float(resid.max())
    matched = bool(max_res <= tol and np.all(scales > 0))
    return EquivalenceReport(matched, permutation, signs, scales, max_res)
