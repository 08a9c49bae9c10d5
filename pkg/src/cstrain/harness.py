"""Seeded Monte-Carlo experiments.

Each trial draws ``A, X, Z, z`` from the data model, runs the
train-and-recover pipeline and a direct basis-pursuit baseline on
``b = A X z``, and records whether each one is exact. Trials derive all
randomness from ``(master_seed, trial_index)`` so results do not depend on
worker count or scheduling.

Outputs (in ``output_dir``):

``trials.csv``
    One row per trial, columns in :data:`CSV_COLUMNS` order.
``summary.json``
    ``rates`` (factorization, pipeline, direct_l1), ``mean_rip_epsilon``,
    ``mean_runtime_s``, ``failed_trials``, per-assumption pass/fail/assumed
    counts, and the config that produced the run.
"""

from __future__ import annotations

import concurrent.futures as cf
import csv
import io
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import CsTrainError, InvalidSpec, IoError, TooManySupports
from .l1 import SolverOptions, basis_pursuit
from .linalg import (match_up_to_signed_scaled_permutation, numerical_rank, rip_constant,
                     stable_rank, support_size)
from .pipeline import SuggestedDims, TrainResult, normalized_product, sparse_recovery, \
    suggest_parameters, train_and_recover
from .rand_models import (ModelSpec, RngStream, gen_component_matrix, gen_gaussian_sensing,
                          gen_sparse_combinator, gen_training_matrix)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("trial_index", "seed", "factorization_matched", "rip_epsilon", "pipeline_exact",
               "direct_l1_exact", "supp_true", "supp_pipeline", "supp_direct", "t_train_s",
               "t_recover_s")
EXACT_TOL = 1e-6
ENUM_MAX = 14  # largest 2u for the brute-force uniqueness check

# phase tags: each phase of a trial has its own stream
PHASE_A, PHASE_X, PHASE_Z, PHASE_COMB, PHASE_PAIRING = range(5)


@dataclass(frozen=True)
class Checks:
    verify_rip: bool = True
    rip_budget: int = 100_000
    verify_uniqueness: bool = True


@dataclass(frozen=True)
class Constants:
    """Numeric stand-ins for the unspecified constants of the size conditions."""
    c1: float = 1.0
    c2: float = 1.0
    C: float = 1.0
    rip_eps: float = 0.6


@dataclass(frozen=True)
class ExperimentConfig:
    dims: SuggestedDims
    model: ModelSpec
    trials: int = 20
    master_seed: int = 0
    checks: Checks = field(default_factory=Checks)
    output_dir: str = "results"
    u_candidates: tuple[int, ...] | None = None  # None: just dims.u
    workers: int = 1
    record_timings: bool = True
    constants: Constants = field(default_factory=Constants)

    def __post_init__(self):
        d = self.dims
        if self.trials < 1:
            raise InvalidSpec("trials must be at least 1")
        if d.q < d.p:
            raise InvalidSpec(f"need q >= p, got q={d.q}, p={d.p}")
        if not 1 <= d.u <= d.n:
            raise InvalidSpec(f"need 1 <= u <= n, got u={d.u}")
        if min(d.m, d.n, d.p, d.s, d.t, d.t_bar) < 1:
            raise InvalidSpec("dimensions must be positive")
        if d.k > d.p or d.k_easy > d.p:
            raise InvalidSpec("combinator sparsity exceeds p")
        if self.workers < 1:
            raise InvalidSpec("workers must be at least 1")
        if self.u_candidates is not None:
            if not self.u_candidates or any(not 1 <= u <= d.n for u in self.u_candidates):
                raise InvalidSpec(f"u_candidates must be nonempty and lie in [1, {d.n}]")
        if not 0 <= self.master_seed < 2 ** 64:
            raise InvalidSpec("master_seed must be a 64-bit unsigned integer")

    @property
    def sweep(self) -> list[int]:
        return list(self.u_candidates) if self.u_candidates is not None else [self.dims.u]

    def to_dict(self) -> dict:
        return {
            "dims": self.dims.to_dict(),
            "model": self.model.to_dict(),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "checks": asdict(self.checks),
            "output_dir": str(self.output_dir),
            "u_candidates": None if self.u_candidates is None else list(self.u_candidates),
            "workers": self.workers,
            "record_timings": self.record_timings,
            "constants": asdict(self.constants),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            if "dims" in d:
                dims = SuggestedDims.from_dict(d["dims"])
            elif "suggest" in d:
                dims = suggest_parameters(**d["suggest"])
            else:
                raise InvalidSpec("config needs 'dims' or 'suggest'")
            model = dict(d.get("model", {}))
            model.setdefault("theta", dims.s / dims.n)
            u_c = d.get("u_candidates")
            return cls(
                dims=dims,
                model=ModelSpec.from_dict(model),
                trials=int(d.get("trials", 20)),
                master_seed=int(d.get("master_seed", 0)),
                checks=Checks(**d.get("checks", {})),
                output_dir=str(d.get("output_dir", "results")),
                u_candidates=None if u_c is None else tuple(int(u) for u in u_c),
                workers=int(d.get("workers", 1)),
                record_timings=bool(d.get("record_timings", True)),
                constants=Constants(**d.get("constants", {})),
            )
        except (KeyError, TypeError, ValueError) as err:
            if isinstance(err, CsTrainError):
                raise
            raise InvalidSpec(f"bad experiment config: {err}") from err


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise IoError(str(err)) from err
    except json.JSONDecodeError as err:
        raise InvalidSpec(f"{path}: {err}") from err
    return ExperimentConfig.from_dict(raw)


@dataclass
class TrialRecord:
    trial_index: int
    seed: int
    factorization_matched: bool = False
    rip_epsilon: float | None = None
    pipeline_exact: bool = False
    direct_l1_exact: bool = False
    supp_true: int | None = None
    supp_pipeline: int | None = None
    supp_direct: int | None = None
    t_train_s: float = 0.0
    t_recover_s: float = 0.0
    u_used: int | None = None
    error: str | None = None  # generation failure; the trial carries no result
    pipeline_error: str | None = None
    direct_error: str | None = None
    assumptions: dict[str, str] = field(default_factory=dict)
    srank_lemma_ok: bool | None = None

    def csv_row(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return repr(v)
            return str(v)
        return [fmt(getattr(self, c)) for c in CSV_COLUMNS]


def trial_seed(master_seed: int, trial_index: int) -> int:
    return RngStream(master_seed, trial_index).derived_seed()


def _is_exact(x_hat, x) -> bool:
    return float(np.linalg.norm(x_hat - x)) <= EXACT_TOL * float(np.linalg.norm(x))


def _feasible(A, x, b, tol) -> bool:
    return float(np.linalg.norm(A @ x - b)) <= tol * max(float(np.linalg.norm(b)), 1.0)


def _columns_independent(A, k: int, budget: int) -> bool:
    """Whether every ``k`` columns of ``A`` are linearly independent (enumerated)."""
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0.0):
        return False
    est = rip_constant(A / norms, k, max_supports=budget)
    return est.sigma_min > 1e-8


def check_assumptions(cfg: ExperimentConfig, A, X, *, train: TrainResult | None = None,
                      dims: SuggestedDims | None = None) -> dict:
    """Numerical check of the recovery assumptions for one instance.

    Returns ``{name: {"status": "pass" | "fail" | "assumed", "detail": str}}``
    for ``A1_model`` (restricted value law), ``A2_sizes``, ``A2_stable_rank``,
    ``A3_uniqueness`` and ``A4_easy_columns``. ``dims`` replaces ``cfg.dims``
    so sizes a config would reject can still be assessed.
    """
    d, k = dims or cfg.dims, cfg.constants
    out = {}

    def put(name, ok, detail):
        status = ok if isinstance(ok, str) else ("pass" if ok else "fail")
        out[name] = {"status": status, "detail": detail}

    rank = numerical_rank(X) if np.size(X) else 0
    put("A1_model", cfg.model.restricted and rank == np.shape(X)[1],
        f"{cfg.model.dist.value}, nu={cfg.model.nu:g}, rank(X)={rank} of {np.shape(X)[1]}")

    lp = math.log(d.p) if d.p > 1 else 0.0
    theta = d.s / d.n
    size_ok = d.p <= d.q and d.n > k.c1 * d.p ** 2 * lp ** 2 and 2 / d.p <= theta <= k.c2 / math.sqrt(d.p)
    put("A2_sizes", size_ok,
        f"p={d.p} q={d.q} n={d.n} c1*p^2*ln^2p={k.c1 * d.p ** 2 * lp ** 2:.4g} s/n={theta:.4f} "
        f"range=[{2 / d.p:.4f}, {k.c2 / math.sqrt(d.p):.4f}]")

    eps = k.rip_eps
    arg = 3 * d.p / (eps * d.t)
    need = k.C * cfg.model.k_psi2 ** 4 * (d.n * d.t / (d.s * eps ** 2)) * math.log(arg)
    try:
        sr = stable_rank(A)
        put("A2_stable_rank", sr >= need, f"srank={sr:.4g} required={need:.4g}")
    except CsTrainError as err:
        put("A2_stable_rank", False, type(err).__name__)

    m = np.shape(A)[0]
    two_u = 2 * d.u
    if m < two_u:
        put("A3_uniqueness", False, f"m={m} < 2u={two_u}: u-sparse solutions need not be unique")
    elif (cfg.checks.verify_uniqueness and two_u <= ENUM_MAX and two_u <= d.n
          and math.comb(d.n, two_u) <= cfg.checks.rip_budget):
        put("A3_uniqueness", _columns_independent(np.asarray(A, dtype=float), two_u,
                                                  cfg.checks.rip_budget),
            f"every {two_u} columns independent (enumerated)")
    else:
        put("A3_uniqueness", "assumed", "too large to enumerate")

    if train is None:
        put("A4_easy_columns", "assumed", "no training result")
    else:
        put("A4_easy_columns", len(train.kept_columns) >= d.p,
            f"{len(train.kept_columns)} easy columns, need {d.p}")
    return out


def _timer(cfg):
    return time.perf_counter if cfg.record_timings else (lambda: 0.0)


def run_trial(cfg: ExperimentConfig, trial_index: int, opts: SolverOptions | None = None) -> TrialRecord:
    """One seeded instance. Errors become fields of the record, never exceptions."""
    opts = opts or SolverOptions()
    d = cfg.dims
    seed = trial_seed(cfg.master_seed, trial_index)
    rec = TrialRecord(trial_index, seed)
    clock = _timer(cfg)
    try:
        A = gen_gaussian_sensing(d.m, d.n, RngStream(seed, PHASE_A))
        X = gen_component_matrix(d.n, d.p, cfg.model, RngStream(seed, PHASE_X))
        Z = gen_training_matrix(d.p, d.q, d.k_easy, RngStream(seed, PHASE_Z))
        z = gen_sparse_combinator(d.p, d.k, RngStream(seed, PHASE_COMB))
        x = X @ z
        B = A @ (X @ Z)
        b = A @ x
    except CsTrainError as err:
        rec.error = type(err).__name__
        return rec
    rec.supp_true = support_size(x)

    train = None
    t0 = clock()
    try:
        res = train_and_recover(A, b, B, cfg.sweep, RngStream(seed, PHASE_PAIRING), opts, p=d.p)
        rec.t_train_s = clock() - t0
        train = res.train
        rec.u_used = res.u_used
        rec.supp_pipeline = res.support
        rec.pipeline_exact = _is_exact(res.x, x) and _feasible(A, res.x, b, opts.feas_tol)
        X_bar = train.factorization.X_bar
        try:
            rec.factorization_matched = match_up_to_signed_scaled_permutation(X, X_bar).matched
        except CsTrainError:
            rec.factorization_matched = False
        t0 = clock()
        sparse_recovery(A, b, X_bar, opts)
        rec.t_recover_s = clock() - t0
    except CsTrainError as err:
        rec.t_train_s = clock() - t0
        rec.pipeline_error = type(err).__name__

    try:
        direct = basis_pursuit(A, b, opts)
        rec.supp_direct = support_size(direct.x)
        rec.direct_l1_exact = _is_exact(direct.x, x)
    except CsTrainError as err:
        rec.direct_error = type(err).__name__

    if cfg.checks.verify_rip and d.t <= d.p and math.comb(d.p, d.t) <= cfg.checks.rip_budget:
        try:
            M = normalized_product(A, X)[0]
            rec.rip_epsilon = rip_constant(M, d.t, cfg.checks.rip_budget).epsilon
        except CsTrainError:
            rec.rip_epsilon = None

    report = check_assumptions(cfg, A, X, train=train)
    if train is None and rec.pipeline_error == "AllFailed":
        report["A4_easy_columns"] = {"status": "fail", "detail": "no u produced a result"}
    rec.assumptions = {name: v["status"] for name, v in report.items()}
    rec.srank_lemma_ok = _srank_lemma(A, d.s * d.t, cfg.checks)
    return rec


def _srank_lemma(A, order: int, checks: Checks) -> bool | None:
    """``srank(A) >= (1 - eps)/(2(1 + eps)) * order`` with exhaustive eps, if affordable."""
    n = A.shape[1]
    if not checks.verify_rip or order > n or math.comb(n, order) > checks.rip_budget:
        return None
    A_norm = A * (math.sqrt(n) / float(np.linalg.norm(A)))
    try:
        eps = rip_constant(A_norm, order, checks.rip_budget).epsilon
    except TooManySupports:
        return None
    return bool(stable_rank(A_norm) >= 0.5 * (1 - eps) / (1 + eps) * order)


def _worker_init():
    # one BLAS thread per process; processes supply the parallelism
    global _LIMITS
    _LIMITS = threadpool_limits(limits=1)


def _run_one(args):
    cfg, idx = args
    rec = run_trial(cfg, idx)
    log.info("trial %d: pipeline=%s direct=%s", idx, rec.pipeline_exact, rec.direct_l1_exact)
    return rec


def effective_workers(requested: int) -> int:
    cap = os.environ.get("CSTRAIN_THREADS")
    if cap:
        try:
            return max(1, min(requested, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer CSTRAIN_THREADS=%r", cap)
    return max(1, requested)


def run_trials(cfg: ExperimentConfig, workers: int | None = None) -> list[TrialRecord]:
    n_workers = effective_workers(workers if workers is not None else cfg.workers)
    jobs = [(cfg, i) for i in range(cfg.trials)]
    if n_workers == 1:
        with threadpool_limits(limits=1):
            records = [_run_one(j) for j in jobs]
    else:
        with cf.ProcessPoolExecutor(n_workers, initializer=_worker_init) as pool:
            records = list(pool.map(_run_one, jobs))
    return sorted(records, key=lambda r: r.trial_index)


def format_csv(records: list[TrialRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.csv_row())
    return buf.getvalue()


def _mean(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def summarize(cfg: ExperimentConfig, records: list[TrialRecord]) -> dict:
    counts: dict[str, dict[str, int]] = {}
    for rec in records:
        for name, status in rec.assumptions.items():
            counts.setdefault(name, {"pass": 0, "fail": 0, "assumed": 0})[status] += 1
    lemma = [r.srank_lemma_ok for r in records if r.srank_lemma_ok is not None]
    return {
        "trials": len(records),
        "master_seed": cfg.master_seed,
        "rates": {
            "factorization": _mean([float(r.factorization_matched) for r in records]),
            "pipeline": _mean([float(r.pipeline_exact) for r in records]),
            "direct_l1": _mean([float(r.direct_l1_exact) for r in records]),
        },
        "mean_rip_epsilon": _mean([r.rip_epsilon for r in records]),
        "mean_runtime_s": {
            "train": _mean([r.t_train_s for r in records]),
            "recover": _mean([r.t_recover_s for r in records]),
        },
        "failed_trials": [r.trial_index for r in records if r.error or r.pipeline_error],
        "assumptions": dict(sorted(counts.items())),
        "srank_lemma": {"checked": len(lemma), "held": int(sum(lemma))},
        "config": cfg.to_dict(),
    }


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> dict:
    """Run every trial, write ``trials.csv`` and ``summary.json``, return the summary."""
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise IoError(f"cannot create {out}: {err}") from err
    records = run_trials(cfg, workers)
    summary = summarize(cfg, records)
    try:
        (out / "trials.csv").write_text(format_csv(records), encoding="utf-8")
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    except OSError as err:
        raise IoError(f"cannot write results to {out}: {err}") from err
    return summary
