"""Command-line front end: verify, shadow build/query, bench.

Exit codes: 0 success, 1 claim or guarantee failure, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import claimcheck
from .balanced import estimate_balanced, variance_bound
from .fileio import FormatError, matrix_from_json, shadow_from_json
from .matcore import (DEFAULT_DIM_CAP, InvariantError, ResourceError, check_density, inner,
                      make_rng, maximally_mixed, random_density, random_traceless)
from .schurweyl import MAX_T
from .splitting import build_shadow, predicted_epsilon

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    d: list[int]
    t: list[int]
    m: list[int]
    epsilon: float
    delta: float
    k: int | None
    seed: int
    trials: int | None
    budget_ratio: float
    out: str | None
    format: str
    workers: int

    def __post_init__(self):
        for name in ("d", "t", "m"):
            if any(x < 1 for x in getattr(self, name)):
                raise UsageError(f"--{name} values must be positive")
        if not 0 < self.epsilon < 1 or not 0 < self.delta < 1:
            raise UsageError("--epsilon and --delta must lie in (0, 1)")
        if not 0 < self.budget_ratio < 1:
            raise UsageError("--budget-ratio must lie in (0, 1)")
        if self.trials is not None and self.trials < 1:
            raise UsageError("--trials must be positive")
        if self.workers < 1:
            raise UsageError("--workers must be positive")
        if self.format not in ("json", "csv"):
            raise UsageError("--format must be json or csv")


def _config(args) -> RunConfig:
    return RunConfig(d=args.d, t=args.t, m=args.m, epsilon=args.epsilon, delta=args.delta,
                     k=args.k, seed=args.seed, trials=args.trials, budget_ratio=args.budget_ratio,
                     out=args.out, format=args.format, workers=args.workers)


def _write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- verify -------------------------------------------------------------------

def cmd_verify(args) -> int:
    cfg = _config(args)
    try:
        ids = claimcheck.select(args.only)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    reports = claimcheck.run_all(claimcheck.ClaimConfig(seed=cfg.seed, samples=cfg.trials, only=tuple(ids)),
                                 workers=cfg.workers)
    if cfg.format == "json":
        payload = claimcheck.reports_to_json(reports)
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["claim_id", "parameters", "observed", "target", "stderr", "verdict", "kind",
                         "samples", "note"])
        for r in reports:
            params = ";".join(f"{k}={v}" for k, v in r.parameters.items())
            writer.writerow([r.claim_id, params, repr(r.observed), repr(r.target), repr(r.stderr),
                             r.verdict, r.kind, r.samples, r.note])
        payload = buf.getvalue()
    if cfg.out:
        Path(cfg.out).write_text(payload)
    print(claimcheck.format_table(reports))
    failed = sum(r.verdict == "fail" for r in reports)
    print(f"{len(reports)} reports, {failed} failed")
    return EXIT_FAIL if failed else EXIT_OK


# -- shadow -------------------------------------------------------------------

def load_matrix(path: str) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return matrix_from_json(text)
    except FormatError as exc:
        raise UsageError(f"{path}: {exc}") from None


def make_state(spec: str, d: int, rng: np.random.Generator) -> np.ndarray:
    if spec == "maximally-mixed":
        return maximally_mixed(d)
    match = re.fullmatch(r"random-rank-(\d+)", spec)
    if match:
        r = int(match.group(1))
        if not 1 <= r <= d:
            raise UsageError(f"rank must lie in [1, {d}]")
        return random_density(d, rng, r)
    rho = load_matrix(spec)
    try:
        return check_density(rho)
    except ValueError as exc:
        raise UsageError(f"{spec}: {exc}") from None


def cmd_shadow_build(args) -> int:
    cfg = _config(args)
    if len(cfg.d) != 1 or len(cfg.t) != 1:
        raise UsageError("shadow build takes a single --d and --t")
    state_rng, build_rng = make_rng(cfg.seed).spawn(2)
    rho = make_state(args.state, cfg.d[0], state_rng)
    shadow = build_shadow(rho, cfg.epsilon, cfg.delta, build_rng, t=cfg.t[0], budget=args.budget,
                          budget_ratio=cfg.budget_ratio)
    shadow.meta["predicted_epsilon"] = predicted_epsilon(shadow)
    _write(shadow.to_json(), cfg.out)
    meta = shadow.meta
    print(f"copies: rough {meta['copies_rough']}, total {meta['copies_total']}; "
          f"k={shadow.k}, c={shadow.c}, predicted epsilon {meta['predicted_epsilon']:.4g}",
          file=sys.stderr)
    return EXIT_OK


def cmd_shadow_query(args) -> int:
    try:
        shadow = shadow_from_json(Path(args.shadow).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {args.shadow}: {exc.strerror}") from None
    except FormatError as exc:
        raise UsageError(f"{args.shadow}: {exc}") from None
    values = []
    for path in args.observables:
        o = load_matrix(path)
        if o.shape[0] != shadow.d:
            raise UsageError(f"{path}: dimension {o.shape[0]} does not match the shadow ({shadow.d})")
        values.append(shadow.query(o))
    for v in values:
        print(repr(float(v)))
    return EXIT_OK


# -- bench --------------------------------------------------------------------

BENCH_COLUMNS = ["d", "t", "m", "epsilon_target", "err_q50", "err_q90", "err_max", "copies",
                 "wall_time", "status"]


def bench_point(d: int, t: int, m: int, trials: int, seed: int, index: int, cap: int = DEFAULT_DIM_CAP) -> dict:
    """Error quantiles of the balanced estimator on random states I/d + E with ||E||_F = 0.01.

    The observable is a random traceless O with ||O||_F = 1; epsilon_target is
    the 90% Chebyshev radius from the variance bound.
    """
    row = {"d": d, "t": t, "m": m}
    if d < 2 or t > MAX_T or d ** t > cap:
        return {**row, "status": "skipped"}
    rng = make_rng(seed, index)
    start = time.perf_counter()
    errs, copies = [], 0
    for r in rng.spawn(trials):
        e = random_traceless(d, r, 0.01)
        o = random_traceless(d, r, 1.0)
        est = estimate_balanced(np.eye(d) / d + e, t, m, r)
        errs.append(abs(float(inner(o, est.e_hat - e).real)))
        copies += est.copies
    wall = time.perf_counter() - start
    q = np.quantile(errs, [0.5, 0.9])
    # every trial's O has unit Frobenius norm, which is all the bound depends on
    target = math.sqrt(10.0 * variance_bound(np.eye(1), t, d, m))
    return {**row, "epsilon_target": target, "err_q50": q[0], "err_q90": q[1],
            "err_max": max(errs), "copies": copies // trials, "wall_time": round(wall, 3),
            "status": "ok"}


def _bench_task(args):
    return bench_point(*args)


def cmd_bench(args) -> int:
    cfg = _config(args)
    trials = cfg.trials or 100
    grid = [(d, t, m) for d in cfg.d for t in cfg.t for m in cfg.m]
    tasks = [(d, t, m, trials, cfg.seed, i) for i, (d, t, m) in enumerate(grid)]
    if cfg.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_bench_task, tasks))
    else:
        rows = [_bench_task(t) for t in tasks]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n", restval="")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                         for k, v in row.items()})
    _write(buf.getvalue(), cfg.out)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser, d="2", t="3", m="1000") -> None:
    p.add_argument("--d", type=_int_list, default=_int_list(d), help="dimension(s), comma separated")
    p.add_argument("--t", type=_int_list, default=_int_list(t), help="batch size(s)")
    p.add_argument("--m", type=_int_list, default=_int_list(m), help="batch count(s)")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--budget-ratio", type=float, default=0.5)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hpshadow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="run the claim verification suite")
    _common(verify)
    verify.add_argument("--only", action="append", default=[], metavar="CLAIM",
                        help="restrict to a claim id (repeatable)")
    verify.set_defaults(func=cmd_verify)

    shadow = sub.add_parser("shadow", help="build or query classical shadows")
    ssub = shadow.add_subparsers(dest="shadow_command", required=True)
    build = ssub.add_parser("build", help="measure a simulated state and write a shadow")
    _common(build)
    build.add_argument("--state", default="maximally-mixed",
                       help="maximally-mixed, random-rank-R, or a matrix JSON file")
    build.add_argument("--budget", type=int, default=None, help="total number of copies")
    build.set_defaults(func=cmd_shadow_build)
    query = ssub.add_parser("query", help="estimate <O, rho> for observable files")
    query.add_argument("shadow")
    query.add_argument("observables", nargs="+")
    query.set_defaults(func=cmd_shadow_query)

    bench = sub.add_parser("bench", help="error quantiles of the balanced estimator over a grid")
    _common(bench, m="100,1000,10000")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvariantError, ResourceError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
