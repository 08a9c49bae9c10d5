"""Equality-constrained l1 minimization.

``basis_pursuit`` solves ``min ||x||_1 s.t. Mx = b``: the constraint rows are
first orthonormalised through an SVD of ``M``, the problem is split as
``x = u - v`` with ``u, v >= 0`` and handed to the interior-point solver in
:mod:`cstrain.lp`. The interior-point answer is then polished onto a vertex
by solving the restricted least-squares problem on its detected support, and
optimality is certified with a scaled dual-feasible point.

``min_l1_hyperplane`` solves ``min ||Yw||_1 s.t. r'Yw = 1`` as a
least-absolute-deviations problem over the column span of ``Y``; its LP dual
is a box-constrained standard-form program with only ``rank(Y) - 1`` rows.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConstraint, Infeasible, MaxIters, ShapeMismatch, TooLarge
from .linalg import as_matrix, as_vector
from .lp import solve_lp

ORACLE_MAX_COLS = 14
_POLISH_THRESHOLDS = (1e-3, 1e-5, 1e-7, 1e-9)
_SPAN_RANK_TOL = 1e-9
_DEGENERATE_TOL = 1e-12
# the interior-point method itself needs only tens of iterations
_IPM_ITER_CAP = 500


class SolveStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITERS = "MaxIters"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-9
    gap_tol: float = 1e-9
    max_iters: int = 50_000
    polish: bool = True

    def __post_init__(self):
        if not (self.feas_tol > 0 and self.gap_tol > 0):
            raise ValueError("tolerances must be strictly positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class L1Solution:
    x: np.ndarray
    objective: float
    feas_residual: float
    iterations: int
    status: SolveStatus
    gap: float = 0.0


def _rank(sv: np.ndarray, shape, rel: float | None = None) -> int:
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    if rel is None:
        rel = max(shape) * np.finfo(float).eps
    return int(np.count_nonzero(sv > rel * sv[0]))


def basis_pursuit(M, b, opts: SolverOptions | None = None) -> L1Solution:
    """Minimum l1-norm solution of ``Mx = b``.

    Raises
    ------
    Infeasible
        If the least-squares residual of ``Mx = b`` exceeds ``feas_tol``
        (relative to ``max(||b||, 1)``).
    MaxIters
        If the interior-point method stalls before the duality gap can be
        certified below ``gap_tol``.
    """
    M = as_matrix(M, "M")
    b = as_vector(b, "b")
    if M.shape[0] != b.size:
        raise ShapeMismatch(f"M has {M.shape[0]} rows but b has length {b.size}")
    opts = opts or SolverOptions()
    n = M.shape[1]
    bnorm = float(np.linalg.norm(b))
    ref = max(bnorm, 1.0)
    if bnorm == 0.0:
        return L1Solution(np.zeros(n), 0.0, 0.0, 0, SolveStatus.OPTIMAL)

    U, sv, Vt = np.linalg.svd(M, full_matrices=False)
    r = _rank(sv, M.shape)
    if r == 0:
        raise Infeasible("M is zero but b is not")
    U, sv, W = U[:, :r], sv[:r], Vt[:r]
    coeffs = (U.T @ b) / sv
    ls_res = float(np.linalg.norm(M @ (W.T @ coeffs) - b)) / ref
    if ls_res > opts.feas_tol:
        raise Infeasible(f"b is not in the range of M (least-squares residual {ls_res:.3e})")

    # unit right-hand side makes the solve scale-equivariant
    rhs = coeffs / bnorm
    lp = solve_lp(np.hstack([W, -W]), rhs, np.ones(2 * n),
                  tol=0.1 * min(opts.feas_tol, opts.gap_tol),
                  max_iter=min(opts.max_iters, _IPM_ITER_CAP))
    x = (lp.x[:n] - lp.x[n:]) * bnorm
    x = x + W.T @ (coeffs - W @ x)

    if opts.polish:
        x = _polish_bp(M, b, x, r, opts, ref)

    # dual certificate: y feasible for max b'y s.t. ||M'y||_inf <= 1
    y = U @ (lp.y / sv)
    y /= max(1.0, float(np.max(np.abs(M.T @ y))))
    objective = float(np.abs(x).sum())
    gap = max(objective - float(b @ y), 0.0)
    feas = float(np.linalg.norm(M @ x - b)) / ref
    sol = L1Solution(x, objective, feas, lp.iterations, SolveStatus.OPTIMAL, gap)
    if gap > opts.gap_tol * max(objective, 1.0) or feas > opts.feas_tol:
        sol.status = SolveStatus.MAX_ITERS
        raise MaxIters(f"basis pursuit not certified after {lp.iterations} iterations "
                       f"(gap {gap:.3e}, residual {feas:.3e})", solution=sol)
    return sol


def _polish_bp(M, b, x, rank, opts, ref):
    base = float(np.abs(x).sum())
    peak = float(np.max(np.abs(x)))
    if peak == 0.0:
        return x
    seen = set()
    for thr in _POLISH_THRESHOLDS:
        support = np.flatnonzero(np.abs(x) > thr * peak)
        key = tuple(support)
        if key in seen or support.size > rank:
            continue
        seen.add(key)
        xs = np.linalg.lstsq(M[:, support], b, rcond=None)[0]
        cand = np.zeros_like(x)
        cand[support] = xs
        if np.linalg.norm(M @ cand - b) / ref > 0.1 * opts.feas_tol:
            continue
        if np.abs(cand).sum() <= base + 0.1 * opts.gap_tol * max(base, 1.0):
            return cand
    return x


def _lad(F: np.ndarray, g: np.ndarray, tol: float, max_iter: int):
    """``argmin_a ||F a - g||_1`` through its box-constrained dual."""
    N = F.shape[0]
    lp = solve_lp(F.T, 0.5 * (F.T @ np.ones(N)), -g, upper=1.0, tol=tol, max_iter=max_iter)
    return -lp.y, lp


class SpanBasis:
    """Thin SVD of ``Y`` truncated to its numerical rank, reused across solves."""

    def __init__(self, Y):
        self.Y = as_matrix(Y, "Y")
        U, sv, Vt = np.linalg.svd(self.Y, full_matrices=False)
        k = _rank(sv, self.Y.shape, _SPAN_RANK_TOL)
        self.U, self.sv, self.Vt = U[:, :k], sv[:k], Vt[:k]

    def solve(self, r, opts: SolverOptions | None = None) -> np.ndarray:
        r = as_vector(r, "r")
        if self.Y.shape[0] != r.size:
            raise ShapeMismatch(f"Y has {self.Y.shape[0]} rows but r has length {r.size}")
        opts = opts or SolverOptions()
        if float(np.max(np.abs(self.Y.T @ r))) <= _DEGENERATE_TOL:
            raise DegenerateConstraint("the hyperplane r'Yw = 1 is unreachable")
        U = self.U
        d = U.T @ r
        dd = float(d @ d)
        if dd == 0.0:
            raise DegenerateConstraint("the hyperplane r'Yw = 1 is unreachable")
        coords = d / dd  # feasible: d' coords = 1

        k = U.shape[1]
        if k > 1:
            Q = np.linalg.qr(d.reshape(-1, 1), mode="complete")[0]
            null = Q[:, 1:]
            a, lp = _lad(U @ null, -(U @ coords), tol=0.1 * opts.gap_tol,
                         max_iter=min(opts.max_iters, _IPM_ITER_CAP))
            if not lp.converged:
                raise MaxIters(f"hyperplane l1 problem did not converge in {lp.iterations} iterations")
            coords = coords + null @ a
            if opts.polish:
                coords = _polish_hyperplane(U, d, coords, opts)
        return self.Vt.T @ (coords / self.sv)


def min_l1_hyperplane(Y, r, opts: SolverOptions | None = None) -> np.ndarray:
    """``argmin_w ||Yw||_1`` subject to ``r' Y w = 1``.

    The minimum-norm ``w`` realising the optimal ``Yw`` is returned. Raises
    :class:`DegenerateConstraint` when ``||Y'r||_inf <= 1e-12``.
    """
    return SpanBasis(Y).solve(r, opts)


def _polish_hyperplane(U, d, coords, opts):
    s = U @ coords
    base = float(np.abs(s).sum())
    peak = float(np.max(np.abs(s)))
    seen = set()
    for thr in _POLISH_THRESHOLDS:
        zero = np.flatnonzero(np.abs(s) <= thr * peak)
        key = tuple(zero)
        if key in seen or zero.size == 0:
            continue
        seen.add(key)
        lhs = np.vstack([U[zero], d.reshape(1, -1)])
        rhs = np.zeros(zero.size + 1)
        rhs[-1] = 1.0
        cand = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
        if np.linalg.norm(lhs @ cand - rhs) > 1e-12 * max(1.0, float(np.linalg.norm(cand))):
            continue
        if np.abs(U @ cand).sum() <= base * (1.0 + 0.1 * opts.gap_tol):
            return cand
    return coords


def l1_oracle_bruteforce(M, b, feas_tol: float = 1e-9) -> np.ndarray:
    """Minimum l1-norm solution by enumerating column supports.

    Every support of size at most ``rows(M)`` is solved by least squares and
    the feasible candidate of smallest l1 norm is returned. An optimal basic
    solution always sits on one of these supports. Limited to 14 columns.
    """
    M = as_matrix(M, "M")
    b = as_vector(b, "b")
    m, n = M.shape
    if b.size != m:
        raise ShapeMismatch(f"M has {m} rows but b has length {b.size}")
    if n > ORACLE_MAX_COLS:
        raise TooLarge(f"brute-force oracle limited to {ORACLE_MAX_COLS} columns, got {n}")
    ref = max(float(np.linalg.norm(b)), 1.0)
    best = np.zeros(n)
    best_obj = math.inf
    if float(np.linalg.norm(b)) / ref <= feas_tol:
        return best
    for k in range(1, min(m, n) + 1):
        supports = np.array(list(itertools.combinations(range(n), k)), dtype=np.intp)
        blocks = M[:, supports].transpose(1, 0, 2)  # (count, m, k)
        coef = np.einsum("cij,j->ci", np.linalg.pinv(blocks), b)
        resid = np.linalg.norm(np.einsum("cij,cj->ci", blocks, coef) - b, axis=1) / ref
        objs = np.where(resid <= feas_tol, np.abs(coef).sum(axis=1), np.inf)
        i = int(np.argmin(objs))
        if objs[i] < best_obj:
            best_obj = float(objs[i])
            best = np.zeros(n)
            best[supports[i]] = coef[i]
    if not math.isfinite(best_obj):
        raise Infeasible("no support yields a feasible solution")
    return best
