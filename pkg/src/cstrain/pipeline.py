"""Training-assisted sparse recovery.

* :func:`sparse_recovery` solves ``Ax = b`` through a known component matrix:
  ``x = X_bar S z`` with the l1-minimal ``z`` for the column-normalised and
  globally rescaled product ``A X_bar S``.
* :func:`train` learns ``X_bar`` from training right-hand sides ``B``: l1
  recovery per column, a sparsity filter ``||Y_l||_0 <= u`` and a sparse
  factorization of the surviving columns.
* :func:`train_and_recover` sweeps the unknown sparsity bound ``u`` and keeps
  the sparsest recovered solution.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dictlearn import DEFAULT_RANK_TOL, FactorizationResult, sparse_factorization
from .errors import AllFailed, CsTrainError, InfeasibleKnobs, NotEnoughEasy, ShapeMismatch, ZeroMatrix
from .l1 import L1Solution, SolveStatus, SolverOptions, basis_pursuit
from .linalg import as_matrix, as_vector, numerical_rank, scaling_matrix, support_size

log = logging.getLogger(__name__)


@dataclass
class RecoveryResult:
    x: np.ndarray
    z: np.ndarray
    u_used: int | None
    support: int
    solver_status: SolveStatus
    train: "TrainResult | None" = None
    attempts: dict[int, str] = field(default_factory=dict)  # u -> "ok" or error name


@dataclass
class TrainResult:
    factorization: FactorizationResult
    kept_columns: list[int]
    discarded: list[int]


@dataclass(frozen=True)
class SuggestedDims:
    n: int
    p: int
    q: int
    s: int
    t: int
    t_bar: int
    u: int
    m: int
    theta: float

    @property
    def k(self) -> int:
        """Nonzeros per test combinator (``t/2``, at least one)."""
        return max(1, self.t // 2)

    @property
    def k_easy(self) -> int:
        """Nonzeros per training combinator (``t_bar/2``, at least one)."""
        return max(1, self.t_bar // 2)

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in ("m", "n", "p", "q", "s", "t", "t_bar", "u", "theta")}

    @classmethod
    def from_dict(cls, d: dict) -> "SuggestedDims":
        n, s = int(d["n"]), int(d["s"])
        return cls(n=n, p=int(d["p"]), q=int(d["q"]), s=s, t=int(d["t"]),
                   t_bar=int(d.get("t_bar", d["t"])), u=int(d.get("u", s * int(d["t"]))),
                   m=int(d["m"]), theta=float(d.get("theta", s / n)))


def normalized_product(A, X_bar) -> tuple[np.ndarray, float, np.ndarray]:
    """``(sqrt(n)/||A||_F) A X_bar S`` together with the factor and ``S``."""
    A = as_matrix(A, "A")
    X_bar = as_matrix(X_bar, "X_bar")
    if A.shape[1] != X_bar.shape[0]:
        raise ShapeMismatch(f"A has {A.shape[1]} columns but X_bar has {X_bar.shape[0]} rows")
    fro = float(np.linalg.norm(A))
    if fro == 0.0:
        raise ZeroMatrix("A is zero")
    S = scaling_matrix(X_bar)
    factor = math.sqrt(A.shape[1]) / fro
    return factor * (A @ (X_bar * S)), factor, S


def sparse_recovery(A, b, X_bar, opts: SolverOptions | None = None) -> RecoveryResult:
    b = as_vector(b, "b")
    if np.shape(A)[0] != b.size:
        raise ShapeMismatch("A and b disagree in length")
    M, factor, S = normalized_product(A, X_bar)
    sol = basis_pursuit(M, factor * b, opts)
    x = np.asarray(X_bar) @ (S * sol.x)
    return RecoveryResult(x, sol.x, None, support_size(x), sol.status)


def solve_training_columns(A, B, opts: SolverOptions | None = None) -> list[L1Solution | None]:
    """l1 recovery of every column of ``B``; failed solves are ``None``."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[0] != B.shape[0]:
        raise ShapeMismatch(f"A has {A.shape[0]} rows but B has {B.shape[0]}")
    out: list[L1Solution | None] = []
    for col in range(B.shape[1]):
        try:
            out.append(basis_pursuit(A, B[:, col], opts))
        except CsTrainError as err:
            log.info("training column %d: %s", col, type(err).__name__)
            out.append(None)
    return out


def _filter(solutions, u, tau_supp):
    kept, discarded = [], []
    for col, sol in enumerate(solutions):
        if sol is not None and support_size(sol.x, tau_supp) <= u:
            kept.append(col)
        else:
            discarded.append(col)
    return kept, discarded


def _train_from_solutions(solutions, u, rng, opts, p, tau_supp, rank_tol) -> TrainResult:
    kept, discarded = _filter(solutions, u, tau_supp)
    need = p if p is not None else 1
    if len(kept) < need:
        raise NotEnoughEasy(f"{len(kept)} columns pass the u={u} filter, need {need}")
    Y_bar = np.column_stack([solutions[c].x for c in kept])
    if p is not None and numerical_rank(Y_bar, rank_tol) < p:
        raise NotEnoughEasy(f"filtered training matrix has rank below {p}")
    fact = sparse_factorization(Y_bar, rng, opts, tau_supp=tau_supp, rank_tol=rank_tol,
                                expected_rank=p)
    return TrainResult(fact, kept, discarded)


def train(A, B, u: int, rng, opts: SolverOptions | None = None, *, p: int | None = None,
          tau_supp: float | None = None, rank_tol: float = DEFAULT_RANK_TOL) -> TrainResult:
    """Learn a component matrix from the training right-hand sides ``B``.

    ``p`` is the expected number of components; without it, any nonempty
    filtered set is factored and the rank is whatever the greedy step finds.
    """
    if u < 0:
        raise ValueError("u must be nonnegative")
    solutions = solve_training_columns(A, B, opts)
    return _train_from_solutions(solutions, u, rng, opts, p, tau_supp, rank_tol)


def train_and_recover(A, b, B, u_candidates=None, rng=0, opts: SolverOptions | None = None, *,
                      p: int | None = None, tau_supp: float | None = None,
                      rank_tol: float = DEFAULT_RANK_TOL) -> RecoveryResult:
    """Train for every ``u`` in ``u_candidates`` and return the sparsest recovery.

    ``u_candidates`` defaults to ``1..n``. Training solves do not depend on
    ``u`` and are computed once; ``u`` values that filter to the same columns
    share one factorization. Every ``u`` uses the same pairing stream ``rng``.
    Ties in support size go to the smallest ``u``.
    """
    A = as_matrix(A, "A")
    n = A.shape[1]
    us = list(range(1, n + 1)) if u_candidates is None else [int(u) for u in u_candidates]
    if not us:
        raise ValueError("u_candidates must be nonempty")
    bad = [u for u in us if not 1 <= u <= n]
    if bad:
        raise ValueError(f"u values outside [1, {n}]: {bad}")

    solutions = solve_training_columns(A, B, opts)
    by_kept: dict[tuple[int, ...], RecoveryResult | CsTrainError] = {}
    attempts: dict[int, str] = {}
    best: tuple[int, int, RecoveryResult] | None = None
    for u in us:
        key = tuple(_filter(solutions, u, tau_supp)[0])
        if key not in by_kept:
            try:
                tr = _train_from_solutions(solutions, u, rng, opts, p, tau_supp, rank_tol)
                rec = sparse_recovery(A, b, tr.factorization.X_bar, opts)
                rec.train = tr
                by_kept[key] = rec
            except CsTrainError as err:
                by_kept[key] = err
        outcome = by_kept[key]
        if isinstance(outcome, CsTrainError):
            attempts[u] = type(outcome).__name__
            log.info("u=%d skipped: %s", u, attempts[u])
            continue
        attempts[u] = "ok"
        if best is None or (outcome.support, u) < best[:2]:
            best = (outcome.support, u, outcome)
    if best is None:
        raise AllFailed(f"no u in {us[:5]}{'...' if len(us) > 5 else ''} produced a solution")
    rec = best[2]
    return RecoveryResult(rec.x, rec.z, best[1], rec.support, rec.solver_status, rec.train, attempts)


def suggest_parameters(p: int, t: int, c_n: float = 1.0, c2: float = 1.0,
                       beta_m: float = 1.0) -> SuggestedDims:
    """Problem sizes that make the factorization size conditions sharp.

    ``n = ceil(c_n p^2 ln^2 p)``, ``s = ceil(2n/p)``, ``u = min(s t, n)``,
    ``m = ceil(beta_m t sqrt(n) ln n)``, ``q = 2p``, and ``t_bar`` the largest
    value ``<= t`` with ``s t_bar <= m/2`` (at least 1). With unit constants
    ``m`` can exceed what the theory needs or even ``n``; treat the output
    as a starting point and verify RIP empirically.
    """
    if p < 2 or t < 1:
        raise ValueError("need p >= 2 and t >= 1")
    n = math.ceil(c_n * p * p * math.log(p) ** 2)
    s = math.ceil(2 * n / p)
    theta = s / n
    if theta > c2 / math.sqrt(p):
        raise InfeasibleKnobs(f"s/n = {theta:.4f} exceeds c2/sqrt(p) = {c2 / math.sqrt(p):.4f}")
    m = math.ceil(beta_m * t * math.sqrt(n) * math.log(n))
    t_bar = max(1, min(t, math.floor(m / (2 * s))))
    return SuggestedDims(n=n, p=p, q=2 * p, s=s, t=t, t_bar=t_bar, u=min(s * t, n), m=m,
                         theta=theta)
