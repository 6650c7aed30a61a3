"""Independent certification of a serialized trace.

The run is replayed from the dataset and pool alone; every recorded number
is compared against the replay, and each identity or bound is re-derived per
iteration from the replayed state.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import booster
from .analytics import History, convergence_gaps, detect_support_vectors, entropy_from_log
from .errors import DigestMismatch, InsufficientHistory, MalformedTrace
from .kernels import seq_sum

__all__ = [
    "DEFAULT_LAGS",
    "TOL_IDENTITY",
    "TOL_SIMPLEX",
    "TOL_INEQUALITY",
    "CheckResult",
    "verify_trace",
    "verify_loaded",
    "certify_convergence",
    "report_to_json",
    "all_passed",
]

DEFAULT_LAGS = (1, 10, 100)
TOL_IDENTITY = 1e-9
TOL_SIMPLEX = 1e-12
TOL_INEQUALITY = 1e-12


@dataclass
class CheckResult:
    check_name: str
    status: str  # "pass" | "fail" | "skipped"
    worst_violation: float
    location: tuple = None
    tolerance: float = 0.0
    detail: str = ""

    @property
    def passed(self):
        return self.status == "pass"


class _Tally:
    """Running worst case of one check; a violation is |error| or bound excess."""

    def __init__(self, name, tol):
        self.name = name
        self.tol = tol
        self.worst = -math.inf
        self.where = None
        self.seen = False

    def add(self, value, where):
        self.seen = True
        if value > self.worst:
            self.worst = float(value)
            self.where = where

    def result(self):
        if not self.seen:
            return CheckResult(self.name, "skipped", 0.0, None, self.tol)
        ok = self.worst <= self.tol
        return CheckResult(self.name, "pass" if ok else "fail", self.worst, self.where, self.tol)


def _argmax(v):
    i = int(np.argmax(v))
    return float(v[i]), i


class _StepChecks:
    """Observer computing the per-iteration identities on the replay."""

    def __init__(self, pool):
        self.pool = pool
        n = pool.n
        self.log_n = math.log(n)
        self.sum_closed = 0.0  # sum of 1/2 log(1 - r^2) from the closed form
        self.beta_minus = np.zeros(n)
        self.beta_minus_lo = np.zeros(n)
        self.info = _Tally("information_identity", TOL_IDENTITY)
        self.partition = _Tally("partition_closed_form", TOL_IDENTITY)
        self.entropy_id = _Tally("entropy_identity", TOL_IDENTITY)
        self.bounds = _Tally("expected_margin_bounds", TOL_INEQUALITY)
        self.envelope = _Tally("expected_normalized_margin_envelope", TOL_INEQUALITY)
        self.beta = _Tally("beta_identities", TOL_SIMPLEX)
        self.lam = _Tally("lambda_simplex", TOL_SIMPLEX)
        self.weights_norm = _Tally("weight_normalization", TOL_SIMPLEX)
        self.margin_range = _Tally("normalized_margin_range", TOL_SIMPLEX)

    def tallies(self):
        return [self.info, self.partition, self.entropy_id, self.bounds, self.envelope,
                self.beta, self.lam, self.weights_norm, self.margin_range]

    def __call__(self, state, rec):
        t = rec.t
        eta = self.pool.mistake[rec.selected]
        self.beta_minus, err = booster.two_sum(self.beta_minus, np.where(eta < 0, rec.alpha, 0.0))
        self.beta_minus_lo = self.beta_minus_lo + err
        self.sum_closed += rec.logZ
        lw = state.log_weights
        A = state.A
        mar = state.margins

        # -log w_{t+1,i} = log n + mar_{t,i} + sum_k log Z_k
        err = np.abs(-lw - (self.log_n + mar + self.sum_closed))
        v, i = _argmax(err)
        self.info.add(v, (t, i))

        self.partition.add(abs(state.last_logZ - rec.logZ), (t, None))

        w = np.exp(lw)
        self.weights_norm.add(abs(seq_sum(w) - 1.0), (t, None))
        E = seq_sum(w * mar)
        H = entropy_from_log(lw)
        self.entropy_id.add(abs(H - (self.log_n + E + self.sum_closed)), (t, None))

        lower = -self.log_n - self.sum_closed
        upper = -self.sum_closed
        self.bounds.add(max(lower - E, E - upper), (t, None))

        ratio = -self.sum_closed / A
        gap = ratio - E / A
        self.envelope.add(max(-gap, gap - self.log_n / A), (t, None))

        r_total, r_diff = booster.beta_residuals(state, self.beta_minus, self.beta_minus_lo)
        e1, i1 = _argmax(np.abs(r_total))
        e2, i2 = _argmax(np.abs(r_diff))
        bpn, bmn = state.beta_plus / A, self.beta_minus / A
        e3, i3 = _argmax(np.abs(bpn + bmn - 1.0))
        e4, i4 = _argmax(np.abs(bpn - bmn - mar / A))
        worst = max((e1, i1), (e2, i2), (e3, i3), (e4, i4))
        self.beta.add(worst[0], (t, worst[1]))

        alphas = np.array([a for _, a in sorted(state.alpha_by_dichotomy.items())])
        lam = alphas / A
        self.lam.add(max(abs(seq_sum(lam) - 1.0), abs(booster.lambda_residual(state)),
                         float(-lam.min())), (t, None))

        norm = mar / A
        self.margin_range.add(float(np.max(np.abs(norm))) - 1.0, (t, None))


def _record_checks(trace):
    """Closed forms and sign conditions on the recorded numbers alone."""
    closed = _Tally("record_closed_form", 1e-12)
    signs = _Tally("record_positivity", 0.0)
    order = _Tally("record_sequence", 0.0)
    for k, r in enumerate(trace.records):
        order.add(0.0 if r.t == k else 1.0, (k, None))
        ok = 0.0 < r.edge < 1.0 and r.alpha > 0.0 and r.logZ < 0.0
        signs.add(0.0 if ok else 1.0, (r.t, None))
        if 0.0 < r.edge < 1.0:
            e_a = abs(r.alpha - 0.5 * math.log((1 + r.edge) / (1 - r.edge)))
            e_z = abs(r.logZ - 0.5 * math.log(1 - r.edge * r.edge))
            closed.add(max(e_a, e_z), (r.t, None))
        else:
            closed.add(math.inf, (r.t, None))
    return [order.result(), signs.result(), closed.result()]


def _compare_records(recorded, replayed):
    match = _Tally("record_replay", TOL_IDENTITY)
    exact = _Tally("replay_exact", 0.0)
    k_max = min(len(recorded.records), len(replayed.records))
    for k in range(k_max):
        a, b = recorded.records[k], replayed.records[k]
        if a.selected != b.selected:
            match.add(math.inf, (k, a.selected))
            exact.add(math.inf, (k, a.selected))
            continue
        diffs = [abs(a.edge - b.edge), abs(a.alpha - b.alpha), abs(a.logZ - b.logZ)]
        rel = [abs(x - y) / max(abs(y), 1e-300) for x, y in
               ((a.edge, b.edge), (a.alpha, b.alpha), (a.logZ, b.logZ))]
        if a.weights is not None:
            wa, wb = np.asarray(a.weights), np.asarray(b.weights)
            if wa.shape != wb.shape:
                match.add(math.inf, (k, None))
                exact.add(math.inf, (k, None))
                continue
            diffs.append(float(np.max(np.abs(wa - wb))))
            nz = np.abs(wb) > 0
            rel.append(float(np.max(np.where(nz, np.abs(wa - wb) / np.where(nz, np.abs(wb), 1.0),
                                             np.abs(wa - wb) * 1e300), initial=0.0)))
        match.add(max(diffs), (k, None))
        exact.add(max(rel), (k, None))
    if len(recorded.records) != len(replayed.records):
        match.add(math.inf, (k_max, None))
        exact.add(math.inf, (k_max, None))
    if not match.seen:
        match.add(0.0, None)
        exact.add(0.0, None)
    halt = CheckResult(
        "halt_reason",
        "pass" if recorded.halt == replayed.halt else "fail",
        0.0 if recorded.halt == replayed.halt else math.inf,
        (len(replayed.records), None),
        0.0,
        f"recorded {recorded.halt}, replay {replayed.halt}",
    )
    return [match.result(), exact.result(), halt]


def _config_params(cfg):
    if not isinstance(cfg, dict):
        raise MalformedTrace("config must be an object")
    t_max = cfg.get("t_max")
    if isinstance(t_max, bool) or not isinstance(t_max, int) or t_max < 1:
        raise MalformedTrace(f"config.t_max must be a positive integer, got {t_max!r}")
    every = cfg.get("checkpoint_every")
    if every is not None and (isinstance(every, bool) or not isinstance(every, int) or every < 1):
        raise MalformedTrace(f"config.checkpoint_every must be a positive integer, got {every!r}")
    emit = cfg.get("emit_weights", False)
    if not isinstance(emit, bool):
        raise MalformedTrace("config.emit_weights must be a boolean")
    lags = cfg.get("lags", list(DEFAULT_LAGS))
    if not isinstance(lags, list) or not all(isinstance(l, int) and not isinstance(l, bool) and l >= 0 for l in lags):
        raise MalformedTrace("config.lags must be a list of non-negative integers")
    return t_max, every, emit, lags


def verify_loaded(trace, data, pool, lags=None):
    """Checks for an already parsed :class:`~optboost.booster.Trace`."""
    if trace.n != data.n or trace.m != pool.m:
        raise DigestMismatch(
            f"trace is for n={trace.n}, m={trace.m}; inputs have n={data.n}, m={pool.m}"
        )
    if trace.dataset_digest != booster.input_digest(data, pool):
        raise DigestMismatch("trace digest does not match dataset and hypothesis pool")
    t_max, every, emit, cfg_lags = _config_params(trace.config)
    lags = list(cfg_lags if lags is None else lags)

    results = []
    recorded_digest = getattr(trace, "config_digest_recorded", None)
    ok = recorded_digest == booster.config_digest(trace.config)
    results.append(CheckResult("header_integrity", "pass" if ok else "fail",
                               0.0 if ok else math.inf, None, 0.0,
                               "" if ok else "config does not match its recorded digest"))
    if len(trace.records) > t_max:
        results.append(CheckResult("record_count", "fail", float(len(trace.records) - t_max),
                                   None, 0.0, "more records than config.t_max"))

    steps = _StepChecks(pool)
    hist = History(pool.m, every=every, keep_weights=False)
    _, replayed = booster.run(data, pool, t_max, config=None, emit_weights=emit,
                              observers=[steps, hist])
    hist.finish()

    results.extend(_compare_records(trace, replayed))
    results.extend(_record_checks(trace))
    results.extend(t.result() for t in steps.tallies())

    margins = hist.margins_by_step()
    lambdas = hist.lambdas_by_step()
    for lag in lags:
        name = f"cauchy_gap_lag_{lag}"
        gaps = convergence_gaps(replayed, margins, lambdas, lag) if margins else None
        if gaps is None or not gaps.pairs:
            results.append(CheckResult(name, "skipped", 0.0, None, TOL_INEQUALITY,
                                       "no checkpoint pair at this lag"))
            continue
        results.append(CheckResult(name, "pass" if gaps.passed else "fail",
                                   gaps.worst_violation, gaps.location, TOL_INEQUALITY))
    return results


def verify_trace(trace_path, data, pool, lags=None):
    """Read ``trace_path`` and return the list of :class:`CheckResult`."""
    return verify_loaded(booster.read_trace(trace_path), data, pool, lags)


def certify_convergence(trace, margins_history, tol, window, delta=1e-3):
    """Pass iff normalized margins moved at most ``tol`` over the trailing
    ``window`` checkpoints, the near-minimum set was the same at each of
    them, and it has at least two members."""
    name = "convergence"
    if trace.halt != "t_max":
        return CheckResult(name, "skipped", 0.0, None, tol,
                           f"run halted by {trace.halt}; convergence theory does not apply")
    hist = [np.asarray(v) for v in margins_history]
    if window < 1 or len(hist) < window + 1:
        raise InsufficientHistory(f"need {window + 1} checkpoints, have {len(hist)}")
    diff = np.abs(hist[-1] - hist[-1 - window])
    drift, i = _argmax(diff)
    sets = []
    for marg in hist[-window:]:
        sets.append(frozenset(np.flatnonzero(marg <= marg.min() + delta).tolist()))
    stable = all(s == sets[-1] for s in sets)
    sv = detect_support_vectors(hist, window, delta)
    ok = drift <= tol and stable and len(sv) >= 2
    detail = f"drift={drift:.3g} stable={stable} support_vectors={sorted(sv)}"
    worst = drift if (drift > tol or ok) else math.inf
    return CheckResult(name, "pass" if ok else "fail", worst, (len(hist) - 1, i), tol, detail)


def _json_real(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def report_to_json(results):
    doc = {}
    for r in results:
        doc[r.check_name] = {
            "status": r.status,
            "worst_violation": _json_real(r.worst_violation),
            "location": None if r.location is None else list(r.location),
            "tolerance": r.tolerance,
        }
        if r.detail:
            doc[r.check_name]["detail"] = r.detail
    return json.dumps(doc, indent=2, sort_keys=False)


def all_passed(results):
    return not any(r.status == "fail" for r in results)
