"""Plot-ready CSV tables rebuilt from a trace.

Three tables with fixed columns:

* per-example: ``i, margin, normalized_margin, beta_plus_norm,
  is_support_vector_margin_criterion, is_support_vector_weight_criterion``
* per-iteration: ``t, edge, alpha, logZ, A, ratio, expected_margin, entropy,
  lower_bound, upper_bound, theta``
* per-dichotomy: ``j, lambda, selection_count``
"""

import csv
import math
from collections import Counter
from pathlib import Path

import numpy as np

from . import booster
from .analytics import (
    DEFAULT_SV_DELTA,
    DEFAULT_SV_WINDOW,
    History,
    analyze,
    entropy_from_log,
)
from .booster import format_real
from .errors import MalformedTrace
from .kernels import seq_sum

EXAMPLE_COLUMNS = ("i", "margin", "normalized_margin", "beta_plus_norm",
                   "is_support_vector_margin_criterion", "is_support_vector_weight_criterion")
ITERATION_COLUMNS = ("t", "edge", "alpha", "logZ", "A", "ratio", "expected_margin", "entropy",
                     "lower_bound", "upper_bound", "theta")
DICHOTOMY_COLUMNS = ("j", "lambda", "selection_count")

EXAMPLES_FILE = "examples.csv"
ITERATIONS_FILE = "iterations.csv"
DICHOTOMIES_FILE = "dichotomies.csv"


class _IterationRows:
    def __init__(self, n):
        self.log_n = math.log(n)
        self.num = 0.0  # -sum log(1 - r^2)
        self.den = 0.0  # sum log((1 + r) / (1 - r))
        self.half = 0.0  # sum 1/2 log(1 - r^2)
        self.rows = []

    def __call__(self, state, rec):
        r = rec.edge
        self.num += -math.log1p(-r * r)
        self.den += 2.0 * math.atanh(r)
        self.half += rec.logZ
        w = np.exp(state.log_weights)
        self.rows.append((
            rec.t, rec.edge, rec.alpha, rec.logZ, state.A, self.num / self.den,
            seq_sum(w * state.margins), entropy_from_log(state.log_weights),
            -self.log_n - self.half, -self.half, float((state.margins / state.A).min()),
        ))


def build_tables(trace, pool, window=None, delta=None, eps=None, every=None):
    """Replay ``trace`` on ``pool`` and return ``(examples, iterations,
    dichotomies, report)``; ``report`` is ``None`` for an empty trace."""
    cfg = trace.config or {}
    window = cfg.get("sv_window", DEFAULT_SV_WINDOW) if window is None else window
    delta = cfg.get("sv_delta", DEFAULT_SV_DELTA) if delta is None else delta
    eps = cfg.get("sv_eps") if eps is None else eps
    every = cfg.get("checkpoint_every") if every is None else every
    if not trace.records:
        raise MalformedTrace("trace contains no iterations")
    it_rows = _IterationRows(trace.n)
    hist = History(pool.m, every=every)
    state = booster.replay(trace, pool, observers=[it_rows, hist])
    hist.finish()
    report = analyze(state, trace, hist, window=window, delta=delta, eps=eps)

    examples = []
    for i in range(trace.n):
        examples.append((i, state.margins[i], report.normalized_margins[i],
                         report.beta_norm_plus[i], int(i in report.support_vectors),
                         int(i in report.support_vectors_weight)))
    counts = Counter(r.selected for r in trace.records)
    dichotomies = [(j, report.lambda_.get(j, 0.0), counts.get(j, 0)) for j in range(pool.m)]
    return examples, it_rows.rows, dichotomies, report


def _fmt(v):
    if isinstance(v, (bool, int, np.integer)):
        return str(int(v))
    return format_real(v)


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_tables(out_dir, trace, pool, **kw):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    examples, iterations, dichotomies, report = build_tables(trace, pool, **kw)
    _write(out / EXAMPLES_FILE, EXAMPLE_COLUMNS, examples)
    _write(out / ITERATIONS_FILE, ITERATION_COLUMNS, iterations)
    _write(out / DICHOTOMIES_FILE, DICHOTOMY_COLUMNS, dichotomies)
    return report


def read_table(path):
    """Rows of an emitted CSV as dicts of floats (ints where integral columns)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows
