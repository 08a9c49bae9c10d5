"""Command-line entry point.

Every subcommand reads matrices in the dense text format, calls one library
operation and writes its outputs; the numerics live in the library modules.
Exit status: 0 on success, 1 on a domain error (its class name goes to
stderr), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import harness, matio
from .dictlearn import sparse_factorization
from .errors import CsTrainError, IoError
from .l1 import SolverOptions, basis_pursuit
from .linalg import rip_constant, rip_constant_sampled, support_size
from .pipeline import train, train_and_recover
from .rand_models import (Distribution, ModelSpec, RngStream, gen_component_matrix,
                          gen_gaussian_sensing, gen_sparse_combinator, gen_training_matrix)


def _dump_json(path, payload) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _emit_matrix(path, A) -> None:
    if path is None or path == "-":
        sys.stdout.write(matio.format_matrix(A))
    else:
        matio.write_matrix(path, A)


def _opts(args) -> SolverOptions:
    return SolverOptions(feas_tol=args.feas_tol, gap_tol=args.gap_tol)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def cmd_gen(args) -> None:
    stream = RngStream(args.seed, args.stream)
    spec = None
    if args.what == "A":
        M = gen_gaussian_sensing(args.m, args.n, stream)
    elif args.what == "X":
        spec = ModelSpec(theta=args.theta, dist=Distribution(args.dist), nu=args.nu)
        M = gen_component_matrix(args.n, args.p, spec, stream)
    elif args.what == "Z":
        M = gen_training_matrix(args.p, args.q, args.k, stream)
    else:
        M = gen_sparse_combinator(args.p, args.k, stream)
    matio.write_matrix(args.out, M)
    meta = {"what": args.what, "seed": args.seed, "stream": args.stream,
            "shape": list(np.shape(M) if np.ndim(M) == 2 else (np.size(M), 1)),
            "spec": None if spec is None else spec.to_dict(), "k": args.k}
    _dump_json(args.out + ".json", meta)


def cmd_recover(args) -> None:
    M = matio.read_matrix(args.matrix)
    b = matio.read_vector(args.rhs)
    t0 = time.perf_counter()
    sol = basis_pursuit(M, b, _opts(args))
    elapsed = time.perf_counter() - t0
    _emit_matrix(args.out, sol.x)
    if args.report:
        _dump_json(args.report, {"status": sol.status.value, "objective": sol.objective,
                                 "feas_residual": sol.feas_residual, "gap": sol.gap,
                                 "iterations": sol.iterations, "support": support_size(sol.x),
                                 "seconds": elapsed})


def _factorization_report(fact) -> dict:
    cands = fact.candidates
    return {
        "residual": fact.residual,
        "candidates_kept": len(cands.pairings) if cands else None,
        "candidates_skipped": len(cands.skipped) if cands else None,
        "selected": fact.selected,
        "selected_supports": [support_size(fact.X_bar[:, j]) for j in range(fact.X_bar.shape[1])],
    }


def cmd_factorize(args) -> None:
    Y = matio.read_matrix(args.input)
    fact = sparse_factorization(Y, RngStream(args.seed), _opts(args), expected_rank=args.p)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    matio.write_matrix(out / "X_bar.txt", fact.X_bar)
    matio.write_matrix(out / "Z_bar.txt", fact.Z_bar)
    _dump_json(out / "report.json", _factorization_report(fact))


def cmd_train(args) -> None:
    A = matio.read_matrix(args.A)
    B = matio.read_matrix(args.B)
    t0 = time.perf_counter()
    res = train(A, B, args.u, RngStream(args.seed), _opts(args), p=args.p)
    elapsed = time.perf_counter() - t0
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    matio.write_matrix(out / "X_bar.txt", res.factorization.X_bar)
    matio.write_matrix(out / "Z_bar.txt", res.factorization.Z_bar)
    report = _factorization_report(res.factorization)
    report.update(kept=res.kept_columns, discarded=res.discarded, u=args.u, seconds=elapsed)
    _dump_json(out / "report.json", report)


def cmd_pipeline(args) -> None:
    A = matio.read_matrix(args.A)
    b = matio.read_vector(args.b)
    B = matio.read_matrix(args.B)
    t0 = time.perf_counter()
    res = train_and_recover(A, b, B, args.u, RngStream(args.seed), _opts(args), p=args.p)
    elapsed = time.perf_counter() - t0
    _emit_matrix(args.out, res.x)
    if args.report:
        tr = res.train
        _dump_json(args.report, {
            "u_used": res.u_used,
            "support": res.support,
            "status": res.solver_status.value,
            "residual": float(np.linalg.norm(A @ res.x - b)),
            "factorization_residual": tr.factorization.residual if tr else None,
            "kept": tr.kept_columns if tr else None,
            "discarded": tr.discarded if tr else None,
            "attempts": {str(u): v for u, v in res.attempts.items()},
            "seconds": elapsed,
        })


def cmd_rip(args) -> None:
    M = matio.read_matrix(args.matrix)
    if args.samples:
        est = rip_constant_sampled(M, args.t, args.samples, RngStream(args.seed).generator())
    else:
        est = rip_constant(M, args.t, args.budget)
    print(repr(est.epsilon))


_OVERRIDES = ("trials", "master_seed", "output_dir", "workers")
_DIM_OVERRIDES = ("m", "n", "p", "q", "s", "t", "t_bar", "u")


def cmd_experiment(args) -> None:
    try:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as err:
        raise IoError(str(err)) from err
    except json.JSONDecodeError as err:
        raise harness.InvalidSpec(f"{args.config}: {err}") from err
    for name in _OVERRIDES:
        if getattr(args, name) is not None:
            raw[name] = getattr(args, name)
    dims = {k: getattr(args, "dim_" + k) for k in _DIM_OVERRIDES if getattr(args, "dim_" + k) is not None}
    if dims:
        if "dims" not in raw:
            raise harness.InvalidSpec("dimension flags need explicit 'dims' in the config")
        raw["dims"] = {**raw["dims"], **dims}
    if args.u_candidates is not None:
        raw["u_candidates"] = args.u_candidates
    if args.no_timings:
        raw["record_timings"] = False
    cfg = harness.ExperimentConfig.from_dict(raw)
    summary = harness.run_experiment(cfg)
    r = summary["rates"]
    print(f"trials={summary['trials']} factorization={r['factorization']:.3f} "
          f"pipeline={r['pipeline']:.3f} direct_l1={r['direct_l1']:.3f} -> {cfg.output_dir}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cstrain", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log one line per trial")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="log one line per trial")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    def solver_flags(p):
        p.add_argument("--feas-tol", type=float, default=1e-9)
        p.add_argument("--gap-tol", type=float, default=1e-9)

    p = add("gen", help="draw a random matrix or vector")
    p.add_argument("what", choices=["A", "X", "Z", "z"],
                   help="A: sensing m x n, X: component n x p, Z: training p x q, z: combinator")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--k", type=int, default=1, help="nonzeros per combinator column")
    p.add_argument("--theta", type=float, default=0.1)
    p.add_argument("--dist", choices=[d.value for d in Distribution], default="StandardGaussian")
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = add("recover", help="basis pursuit: min ||x||_1 s.t. Mx = b")
    p.add_argument("--matrix", required=True)
    p.add_argument("--rhs", required=True)
    p.add_argument("--out", help="solution file (default: stdout)")
    p.add_argument("--report", help="JSON status record")
    solver_flags(p)
    p.set_defaults(func=cmd_recover)

    p = add("factorize", help="sparse factorization Y = X_bar Z_bar")
    p.add_argument("--input", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=int, help="expected inner dimension")
    p.add_argument("--out-dir", required=True)
    solver_flags(p)
    p.set_defaults(func=cmd_factorize)

    p = add("train", help="learn X_bar from training right-hand sides")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--u", type=int, required=True)
    p.add_argument("--p", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    solver_flags(p)
    p.set_defaults(func=cmd_train)

    p = add("pipeline", help="train over a u sweep and recover b")
    p.add_argument("--A", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--u", type=_int_list, help="comma-separated u values (default 1..n)")
    p.add_argument("--p", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="solution file (default: stdout)")
    p.add_argument("--report", help="JSON run report")
    solver_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = add("rip", help="restricted isometry constant of order t")
    p.add_argument("--matrix", required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--budget", type=int, default=1_000_000, help="max supports to enumerate")
    p.add_argument("--samples", type=int, help="sample this many supports instead (lower bound)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_rip)

    p = add("experiment", help="seeded Monte-Carlo experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--master-seed", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--u-candidates", type=_int_list)
    p.add_argument("--no-timings", action="store_true", help="write zero timings (byte-stable CSV)")
    for k in _DIM_OVERRIDES:
        p.add_argument("--" + k.replace("_", "-"), dest="dim_" + k, type=int)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CsTrainError as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"IoError: {err}", file=sys.stderr)
        return 1
    return 0


dispatch = main


if __name__ == "__main__":
    sys.exit(main())
