"""Command-line interface.

    optboost run     --data D.csv [--hypotheses stumps|P.csv] --iters N --out DIR
    optboost verify  --trace T.jsonl --data D.csv [--hypotheses ...] [--report R.json]
    optboost report  --trace T.jsonl --data D.csv [--hypotheses ...] --out DIR
    optboost corpus  --seed S --out DIR [--count K]

Exit codes for ``run``: 0 completed t_max iterations, 2 halted on the weak
learning condition, 3 halted on a perfect hypothesis, 1 any other error.
``verify`` exits 0 only when no check failed.
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import booster, kernels
from .analytics import DEFAULT_SV_DELTA, DEFAULT_SV_WINDOW, History, default_sv_eps
from .corpus import random_dataset, random_matrix_pool
from .dataset import load_dataset, write_dataset
from .errors import DigestMismatch, OptBoostError
from .hypotheses import enumerate_stumps, load_dichotomy_matrix
from .reports import write_tables
from .verifier import (
    DEFAULT_LAGS,
    CheckResult,
    all_passed,
    certify_convergence,
    report_to_json,
    verify_loaded,
)

log = logging.getLogger("optboost")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_WEAK = 2
EXIT_PERFECT = 3
_HALT_EXIT = {"t_max": EXIT_OK, "weak_learning_violation": EXIT_WEAK,
              "perfect_hypothesis": EXIT_PERFECT}

TRACE_FILE = "trace.jsonl"
CERT_FILE = "certification.json"


@dataclass
class RunConfig:
    data_path: str
    hypothesis_source: str = "stumps"
    t_max: int = 10000
    checkpoint_every: int = None
    emit_weights: bool = False
    sv_window: int = DEFAULT_SV_WINDOW
    sv_delta: float = DEFAULT_SV_DELTA
    sv_eps: float = None  # 1e-6 / n when unset
    lags: list = field(default_factory=lambda: list(DEFAULT_LAGS))
    out_dir: str = "."
    label_column: str = None

    def validate(self):
        if self.t_max < 1:
            raise ValueError("--iters must be >= 1")
        if self.sv_window < 1:
            raise ValueError("--sv-window must be >= 1")
        if not self.sv_delta > 0:
            raise ValueError("--sv-delta must be > 0")
        if self.sv_eps is not None and not self.sv_eps > 0:
            raise ValueError("--sv-eps must be > 0")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise ValueError("--checkpoint-every must be >= 1")
        if any(l < 0 for l in self.lags):
            raise ValueError("--lags must be non-negative")

    def trace_config(self, n):
        """The part of the configuration that is stored in the trace header."""
        return {
            "hypotheses": "stumps" if self.hypothesis_source == "stumps" else "matrix",
            "checkpoint_every": self.checkpoint_every,
            "sv_window": self.sv_window,
            "sv_delta": float(self.sv_delta),
            "sv_eps": float(default_sv_eps(n) if self.sv_eps is None else self.sv_eps),
            "lags": [int(l) for l in self.lags],
        }


def load_inputs(data_path, hypothesis_source, label_column=None):
    data = load_dataset(data_path, label_column)
    if hypothesis_source == "stumps":
        pool = enumerate_stumps(data)
    else:
        pool = load_dichotomy_matrix(hypothesis_source, data)
    return data, pool


def cmd_run(cfg):
    cfg.validate()
    data, pool = load_inputs(cfg.data_path, cfg.hypothesis_source, cfg.label_column)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    hist = History(pool.m, every=cfg.checkpoint_every)
    state, trace = booster.run(data, pool, cfg.t_max, config=cfg.trace_config(data.n),
                               emit_weights=cfg.emit_weights, observers=[hist])
    booster.write_trace(trace, out / TRACE_FILE)
    hist.finish()

    print(f"backend: {kernels.BACKEND}")
    print(f"n={data.n} m={pool.m} iterations={len(trace.records)} halt={trace.halt}")
    if trace.records:
        rep = write_tables(out, trace, pool)
        print(f"theta={rep.theta:.17g} ratio={rep.ratio:.17g} A={rep.A:.17g} "
              f"support_vectors={len(rep.support_vectors)} "
              f"(weight criterion: {len(rep.support_vectors_weight)})")
    else:
        print("no iterations completed; report tables not written")
    print(f"trace: {out / TRACE_FILE}")
    return _HALT_EXIT[trace.halt]


def cmd_verify(trace_path, data_path, hypothesis_source, report_path=None, lags=None,
               certify=False, tol=1e-3, label_column=None):
    report_path = Path(report_path) if report_path else Path(trace_path).with_name(CERT_FILE)
    try:
        data, pool = load_inputs(data_path, hypothesis_source, label_column)
        trace = booster.read_trace(trace_path)
        results = verify_loaded(trace, data, pool, lags)
        if certify:
            hist = History(pool.m, every=trace.config.get("checkpoint_every"), keep_weights=False)
            booster.replay(trace, pool, observers=[hist])
            hist.finish()
            window = trace.config.get("sv_window", DEFAULT_SV_WINDOW)
            results.append(certify_convergence(trace, hist.norm_margins, tol, window,
                                               trace.config.get("sv_delta", DEFAULT_SV_DELTA)))
    except DigestMismatch as exc:
        results = [CheckResult("digest", "fail", float("inf"), None, 0.0, str(exc))]
    except OptBoostError as exc:
        results = [CheckResult("trace_format", "fail", float("inf"), None, 0.0,
                               f"{type(exc).__name__}: {exc}")]
    report_path.write_text(report_to_json(results) + "\n")
    failed = [r for r in results if r.status == "fail"]
    for r in results:
        print(f"{r.status:>7}  {r.check_name}  worst={r.worst_violation:.3g}"
              + (f"  ({r.detail})" if r.detail else ""))
    print(f"report: {report_path}")
    if failed:
        print("FAILED: " + ", ".join(r.check_name for r in failed))
    return EXIT_OK if all_passed(results) else EXIT_ERROR


def cmd_report(trace_path, data_path, hypothesis_source, out_dir, label_column=None):
    data, pool = load_inputs(data_path, hypothesis_source, label_column)
    trace = booster.read_trace(trace_path)
    if trace.dataset_digest != booster.input_digest(data, pool):
        raise DigestMismatch("trace does not belong to these inputs")
    rep = write_tables(out_dir, trace, pool)
    print(f"t={rep.t} theta={rep.theta:.17g} ratio={rep.ratio:.17g} "
          f"support_vectors={sorted(rep.support_vectors)}")
    return EXIT_OK


def cmd_corpus(seed, out_dir, count):
    """Write ``count`` random datasets with matching dichotomy matrices."""
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(count):
        data = random_dataset(rng)
        pool = random_matrix_pool(rng, data)
        write_dataset(data, out / f"data_{k:03d}.csv")
        np.savetxt(out / f"pool_{k:03d}.csv", pool.raw, fmt="%d", delimiter=",")
    print(f"wrote {count} dataset/pool pairs to {out}")
    return EXIT_OK


def _lags(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lag list {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="optboost", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def inputs(sp):
        sp.add_argument("--data", required=True, help="training CSV (label in last column)")
        sp.add_argument("--hypotheses", default="stumps",
                        help="'stumps' or a path to a +1/-1 dichotomy matrix CSV")
        sp.add_argument("--label-column", default=None, help="label column name (default: last)")

    r = sub.add_parser("run", help="run Optimal AdaBoost and write trace + report tables")
    inputs(r)
    r.add_argument("--iters", type=int, default=10000)
    r.add_argument("--out", default=".")
    r.add_argument("--emit-weights", action="store_true")
    r.add_argument("--sv-window", type=int, default=DEFAULT_SV_WINDOW)
    r.add_argument("--sv-delta", type=float, default=DEFAULT_SV_DELTA)
    r.add_argument("--sv-eps", type=float, default=None)
    r.add_argument("--checkpoint-every", type=int, default=None)
    r.add_argument("--lags", type=_lags, default=list(DEFAULT_LAGS))

    v = sub.add_parser("verify", help="replay a trace and certify every identity and bound")
    inputs(v)
    v.add_argument("--trace", required=True)
    v.add_argument("--report", default=None, help=f"output JSON (default: {CERT_FILE} beside the trace)")
    v.add_argument("--lags", type=_lags, default=None)
    v.add_argument("--certify", action="store_true", help="also run the convergence certificate")
    v.add_argument("--tol", type=float, default=1e-3)

    rp = sub.add_parser("report", help="emit per-example/iteration/dichotomy CSVs from a trace")
    inputs(rp)
    rp.add_argument("--trace", required=True)
    rp.add_argument("--out", default=".")

    c = sub.add_parser("corpus", help="generate a randomized test corpus")
    c.add_argument("--seed", type=int, required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--count", type=int, default=10)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = RunConfig(
                data_path=args.data, hypothesis_source=args.hypotheses, t_max=args.iters,
                checkpoint_every=args.checkpoint_every, emit_weights=args.emit_weights,
                sv_window=args.sv_window, sv_delta=args.sv_delta, sv_eps=args.sv_eps,
                lags=args.lags, out_dir=args.out, label_column=args.label_column,
            )
            return cmd_run(cfg)
        if args.command == "verify":
            return cmd_verify(args.trace, args.data, args.hypotheses, args.report, args.lags,
                              args.certify, args.tol, args.label_column)
        if args.command == "report":
            return cmd_report(args.trace, args.data, args.hypotheses, args.out, args.label_column)
        if args.command == "corpus":
            return cmd_corpus(args.seed, args.out, args.count)
    except (OptBoostError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
