"""Acceptance gate.

One test per criterion; ``conftest.py`` prints a PASS/FAIL line for each
at the end of the session. Quantities are recomputed here from the raw
booster state and the edge sequence rather than taken from the verifier or
the analytics module, so the gate does not share code paths with what it
checks.

Run standalone with ``pytest tests/test_acceptance.py -v``.
"""

import contextlib
import io
import math
import time

import numpy as np
import pytest

from optboost import booster, kernels
from optboost.analytics import History, detect_support_vectors, is_checkpoint, ratio_from_edges
from optboost.booster import IterationRecord, Trace, edge_to_coefficients, run, two_sum
from optboost.cli import RunConfig, cmd_run, cmd_verify
from optboost.corpus import hand_toy, random_dataset, random_matrix_pool, separable_toys
from optboost.dataset import Dataset, load_dataset, write_dataset
from optboost.hypotheses import enumerate_stumps, load_dichotomy_matrix

from faults import all_fields, perturbed

SUITE_SEED = 20240611
SUITE_RUNS = 100
SUITE_T_MAX = 500
LAGS = (1, 10, 100)
LONG_T = 10_000
SV_WINDOW, SV_DELTA = 100, 1e-3
SLACK = 1e-12


class RunningSum:
    """Compensated scalar sum, so long runs need not re-fsum every prefix."""

    def __init__(self):
        self.hi = 0.0
        self.lo = 0.0

    def add(self, x):
        self.hi, err = two_sum(self.hi, x)
        self.lo += err

    @property
    def value(self):
        return self.hi + self.lo


class Audit:
    """Per-step observer recording the worst residual of every identity and
    bound, computed from the state and the edge sequence only."""

    KEYS = ("eq1", "partition", "prop1", "envelope_low", "envelope_high",
            "beta_sum", "beta_diff", "beta_norm", "lambda_sum", "lambda_mass")

    def __init__(self, pool):
        self.pool = pool
        self.log_n = math.log(pool.n)
        self.S = RunningSum()     # sum of 1/2 log(1 - r^2)
        self.den = RunningSum()   # sum of log((1 + r) / (1 - r))
        self.bm = np.zeros(pool.n)
        self.bm_lo = np.zeros(pool.n)
        self.worst = dict.fromkeys(self.KEYS, -math.inf)
        self.where = {}
        self.checkpoints = 0

    def _bump(self, key, value, t):
        if value > self.worst[key]:
            self.worst[key] = float(value)
            self.where[key] = t

    def __call__(self, state, rec):
        t, r = state.t, rec.edge
        hl = 0.5 * math.log1p(-r * r)
        self.S.add(hl)
        self.den.add(2.0 * math.atanh(r))
        S, A = self.S.value, state.A
        lw = state.log_weights
        w = np.exp(lw)

        # -log w_{t+1,i} = log n + mar_{t,i} + sum_k log Z_k
        self._bump("eq1", np.max(np.abs(-lw - (self.log_n + state.margins + S))), t)
        # directly normalised partition against sqrt(1 - r^2)
        self._bump("partition", abs(state.last_logZ - hl), t)

        E = float(np.dot(w, state.margins))
        self._bump("prop1", max((-self.log_n - S) - E, E - (-S)), t)

        gap = (-2.0 * S) / self.den.value - E / A
        self._bump("envelope_low", -gap, t)
        self._bump("envelope_high", gap - self.log_n / A, t)

        eta = self.pool.mistake[rec.selected]
        self.bm, err = two_sum(self.bm, np.where(eta < 0, rec.alpha, 0.0))
        self.bm_lo = self.bm_lo + err
        if is_checkpoint(t):
            self.checkpoints += 1
            r_total, r_diff = booster.beta_residuals(state, self.bm, self.bm_lo)
            self._bump("beta_sum", np.max(np.abs(r_total)), t)
            self._bump("beta_diff", np.max(np.abs(r_diff)), t)
            bpn, bmn = state.beta_plus / A, self.bm / A
            self._bump("beta_norm", max(np.max(np.abs(bpn + bmn - 1.0)),
                                        np.max(np.abs(bpn - bmn - state.margins / A))), t)
            lam = state.lambda_vector(self.pool.m)
            self._bump("lambda_sum", abs(math.fsum(lam) - 1.0), t)
            self._bump("lambda_mass", abs(booster.lambda_residual(state)), t)


def cauchy_worst(trace, hist, lag):
    """Worst ``gap - bound`` over all step pairs ``lag`` apart, margins and
    shares together; the bound is 2 * (coefficients in between) / A_end."""
    alphas = [r.alpha for r in trace.records]
    steps = hist.steps
    pos = {s: k for k, s in enumerate(steps)}
    worst, pairs = -math.inf, 0
    for k, s in enumerate(steps):
        e = pos.get(s + lag)
        if e is None:
            continue
        bound = 2.0 * math.fsum(alphas[s: s + lag]) / hist.A[e]
        g = max(np.max(np.abs(hist.norm_margins[e] - hist.norm_margins[k])),
                np.max(np.abs(hist.lambdas[e] - hist.lambdas[k])))
        worst = max(worst, g - bound)
        pairs += 1
    return worst, pairs


def _merge(audits):
    out = {}
    for key in Audit.KEYS:
        out[key] = max(a.worst[key] for a in audits)
    return out


@pytest.fixture(scope="module")
def suite():
    """>= 100 randomized runs that reach t_max, with every per-step audit."""
    rng = np.random.default_rng(SUITE_SEED)
    t0 = time.perf_counter()
    audits, cauchy, halts, shapes = [], {l: (-math.inf, 0) for l in LAGS}, {}, []
    while len(audits) < SUITE_RUNS:
        data = random_dataset(rng)
        pool = random_matrix_pool(rng, data)
        audit, hist = Audit(pool), History(pool.m)
        _, trace = run(data, pool, SUITE_T_MAX, observers=[audit, hist])
        halts[trace.halt] = halts.get(trace.halt, 0) + 1
        if trace.halt != "t_max":
            continue
        hist.finish()
        for l in LAGS:
            w, p = cauchy_worst(trace, hist, l)
            cauchy[l] = (max(cauchy[l][0], w), cauchy[l][1] + p)
        audits.append(audit)
        shapes.append((data.n, pool.m))
    elapsed = time.perf_counter() - t0
    return {
        "worst": _merge(audits),
        "audits": audits,
        "cauchy": cauchy,
        "halts": halts,
        "shapes": shapes,
        "elapsed": elapsed,
    }


@pytest.fixture(scope="module")
def toy_runs():
    """Every bundled separable toy run to 10^4 iterations."""
    out = {}
    for name, path in sorted(separable_toys().items()):
        data = load_dataset(path)
        pool = enumerate_stumps(data)
        audit, hist = Audit(pool), History(pool.m)
        state, trace = run(data, pool, LONG_T, observers=[audit, hist])
        hist.finish()
        out[name] = (data, pool, state, trace, audit, hist)
    return out


def _fmt(x):
    return f"{x:.3g}"


@pytest.mark.criterion(1, "hand-oracle replay on the n=3 toy")
def test_criterion_01_hand_oracle(record_property):
    data_path, pool_path = hand_toy()
    data = load_dataset(data_path)
    pool = load_dichotomy_matrix(pool_path, data)
    ln2, ln3, ln6 = math.log(2), math.log(3), math.log(6)
    states = []
    state, trace = run(data, pool, 2, observers=[lambda s, r: states.append(s.copy())])
    r0, r1 = trace.records
    got = {
        "r0": (r0.edge, 1 / 3),
        "alpha0": (r0.alpha, 0.5 * ln2),
        "r1": (r1.edge, 0.5),
        "alpha1": (r1.alpha, 0.5 * ln3),
    }
    errs = {k: abs(a - b) for k, (a, b) in got.items()}
    errs["w1"] = float(np.max(np.abs(states[0].weights() - [0.25, 0.25, 0.5])))
    errs["margins"] = float(np.max(np.abs(
        state.margins - [0.5 * ln6, 0.5 * math.log(2 / 3), 0.5 * math.log(1.5)])))
    worst = max(errs.values())
    record_property("measured", f"max abs error {_fmt(worst)} (tol 1e-12)")
    assert (r0.selected, r1.selected) == (0, 1)
    assert worst <= 1e-12, errs


@pytest.mark.criterion(2, "weight/margin identity over randomized runs")
def test_criterion_02_eq1_suite(suite, record_property):
    w = suite["worst"]["eq1"]
    ns = [s[0] for s in suite["shapes"]]
    ms = [s[1] for s in suite["shapes"]]
    record_property("measured", f"{len(suite['shapes'])} runs, n in [{min(ns)},{max(ns)}], "
                    f"m in [{min(ms)},{max(ms)}], worst {_fmt(w)} (tol 1e-9), "
                    f"{suite['elapsed']:.1f}s (limit 60s), halts {suite['halts']}")
    assert len(suite["shapes"]) >= SUITE_RUNS
    assert min(ns) >= 3 and max(ns) <= 50 and min(ms) >= 2 and max(ms) <= 200
    assert all(a.checkpoints == SUITE_T_MAX for a in suite["audits"])
    assert w <= 1e-9
    assert suite["elapsed"] <= 60.0


@pytest.mark.criterion(3, "partition function closed form")
def test_criterion_03_partition(suite, record_property):
    w = suite["worst"]["partition"]
    record_property("measured", f"worst {_fmt(w)} (tol 1e-9)")
    assert w <= 1e-9


@pytest.mark.criterion(4, "entropy bounds on the expected margin")
def test_criterion_04_bounds(suite, record_property):
    w = suite["worst"]["prop1"]
    record_property("measured", f"worst excess {_fmt(w)} (slack 1e-12)")
    assert w <= SLACK


@pytest.mark.criterion(5, "Cauchy gap bounds at lags 1, 10, 100")
def test_criterion_05_cauchy(suite, record_property):
    c = suite["cauchy"]
    record_property("measured", "; ".join(
        f"lag {l}: {c[l][1]} pairs, worst gap-bound {_fmt(c[l][0])}" for l in LAGS))
    for l in LAGS:
        assert c[l][1] > 0
        assert c[l][0] <= SLACK, (l, c[l])


@pytest.mark.criterion(6, "expected normalized margin envelope")
def test_criterion_06_envelope(suite, toy_runs, record_property):
    low = max([suite["worst"]["envelope_low"]] + [t[4].worst["envelope_low"] for t in toy_runs.values()])
    high = max([suite["worst"]["envelope_high"]] + [t[4].worst["envelope_high"] for t in toy_runs.values()])
    final = []
    for name, (data, pool, state, trace, audit, hist) in toy_runs.items():
        assert trace.halt == "t_max" and state.t == LONG_T
        edges = [r.edge for r in trace.records]
        ratio = -math.fsum(math.log1p(-r * r) for r in edges) / math.fsum(2 * math.atanh(r) for r in edges)
        exp_norm = float(np.dot(state.weights(), state.margins)) / state.A
        gap = ratio - exp_norm
        bound = math.log(data.n) / state.A
        final.append((name, gap, bound, state.A))
    record_property("measured", f"every step: min gap {_fmt(-low)}, worst gap-bound {_fmt(high)}; "
                    "t=1e4: " + ", ".join(f"{n} gap {_fmt(g)} <= {_fmt(b)} (A={a:.6g})"
                                         for n, g, b, a in final))
    assert low <= SLACK
    assert high <= SLACK
    for name, gap, bound, _ in final:
        assert -SLACK <= gap <= bound, name


@pytest.mark.criterion(7, "constant-edge ratio")
def test_criterion_07_constant_edge(record_property):
    alpha, logZ = edge_to_coefficients(0.5)
    trace = Trace(n=2, m=1, dataset_digest="synthetic", config={})
    expect = -math.log(0.75) / math.log(3)
    S, D, worst = RunningSum(), RunningSum(), 0.0
    for t in range(1000):
        trace.records.append(IterationRecord(t, 0, 0.5, alpha, logZ))
        S.add(math.log1p(-0.25))
        D.add(math.log(1.5 / 0.5))
        worst = max(worst, abs(-S.value / D.value - expect))
    for t in (1, 2, 10, 100, 1000):
        worst = max(worst, abs(ratio_from_edges(trace.edges[:t]) - expect))
    record_property("measured", f"ratio {expect:.6f}, worst deviation {_fmt(worst)} (tol 1e-12)")
    assert abs(expect - 0.261860) < 5e-7
    assert worst <= 1e-12


@pytest.mark.criterion(8, "support vectors on the bundled separable toys")
def test_criterion_08_support_vectors(toy_runs, record_property):
    found = {}
    for name, (data, pool, state, trace, audit, hist) in toy_runs.items():
        sv = detect_support_vectors(hist.norm_margins, SV_WINDOW, SV_DELTA)
        sets = [frozenset(np.flatnonzero(m <= m.min() + SV_DELTA).tolist())
                for m in hist.norm_margins[-SV_WINDOW:]]
        stable = all(s == sets[-1] for s in sets) and sets[-1] == frozenset(sv)
        found[name] = (sorted(sv), stable)
    record_property("measured", ", ".join(
        f"{n}: |V|={len(v)}{'' if s else ' UNSTABLE'}" for n, (v, s) in found.items()))
    assert len(found) >= 1
    for name, (sv, stable) in found.items():
        assert len(sv) >= 2 and stable, (name, sv, stable)


@pytest.mark.criterion(9, "beta and lambda identities at every checkpoint")
def test_criterion_09_beta_lambda(suite, record_property):
    w = suite["worst"]
    keys = ("beta_sum", "beta_diff", "beta_norm", "lambda_sum", "lambda_mass")
    cps = sum(a.checkpoints for a in suite["audits"])
    record_property("measured", f"{cps} checkpoints; " +
                    ", ".join(f"{k} {_fmt(w[k])}" for k in keys) + " (tol 1e-12)")
    for k in keys:
        assert w[k] <= 1e-12, k


def _quiet(fn, *args, **kw):
    with contextlib.redirect_stdout(io.StringIO()):
        return fn(*args, **kw)


@pytest.mark.criterion(10, "byte-identical traces from repeated runs")
def test_criterion_10_determinism(tmp_path, record_property):
    data_path = separable_toys()["ring9"]
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        cfg = RunConfig(data_path=str(data_path), t_max=2000, emit_weights=True, out_dir=str(out))
        assert _quiet(cmd_run, cfg) == 0
        outs.append((out / "trace.jsonl").read_bytes())
    record_property("measured", f"{len(outs[0])} bytes, identical={outs[0] == outs[1]}")
    assert outs[0] == outs[1]


@pytest.mark.criterion(11, "single-field 1e-6 perturbations are rejected")
def test_criterion_11_fault_sensitivity(tmp_path, record_property):
    data = Dataset([[0.0], [1.0], [2.0], [3.0], [4.0]], [1, -1, 1, 1, -1])
    data_path = tmp_path / "data.csv"
    write_dataset(data, data_path)
    out = tmp_path / "run"
    cfg = RunConfig(data_path=str(data_path), t_max=20, emit_weights=True, out_dir=str(out))
    assert _quiet(cmd_run, cfg) == 0
    trace_path = out / "trace.jsonl"
    lines = trace_path.read_text().splitlines()
    assert _quiet(cmd_verify, trace_path, data_path, "stumps", tmp_path / "ok.json") == 0

    bad_path = tmp_path / "bad.jsonl"
    tried, missed = 0, []
    for li, path in all_fields(lines):
        bad = perturbed(lines, li, path, rel=1e-6)
        if bad is None:
            continue
        tried += 1
        bad_path.write_text("\n".join(bad) + "\n")
        if _quiet(cmd_verify, bad_path, data_path, "stumps", tmp_path / "bad.json") == 0:
            missed.append((li, path))
    record_property("measured", f"{tried} fields perturbed, {len(missed)} accepted")
    assert tried > 100
    assert not missed, missed[:10]


@pytest.mark.criterion(12, "n=100, m=1000, 10^4 iterations run + verify")
def test_criterion_12_performance(tmp_path, record_property):
    rng = np.random.default_rng(7)
    y = rng.choice([-1, 1], size=100)
    data = Dataset(rng.normal(size=(100, 3)), y)
    pool = random_matrix_pool(np.random.default_rng(8), data, 1000)
    data_path, pool_path = tmp_path / "data.csv", tmp_path / "pool.csv"
    write_dataset(data, data_path)
    np.savetxt(pool_path, pool.raw, fmt="%d", delimiter=",")
    out = tmp_path / "run"

    t0 = time.perf_counter()
    rc_run = _quiet(cmd_run, RunConfig(data_path=str(data_path), hypothesis_source=str(pool_path),
                                       t_max=LONG_T, out_dir=str(out)))
    t1 = time.perf_counter()
    rc_verify = _quiet(cmd_verify, out / "trace.jsonl", data_path, str(pool_path))
    t2 = time.perf_counter()
    total = t2 - t1 + (t1 - t0)
    record_property("measured", f"backend {kernels.BACKEND}: run {t1 - t0:.1f}s + verify "
                    f"{t2 - t1:.1f}s = {total:.1f}s (limit 30s)")
    assert pool.m == 1000 and data.n == 100
    assert rc_run == 0 and rc_verify == 0
    assert total <= 30.0
