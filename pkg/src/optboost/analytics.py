"""Derived quantities of a boosting run: normalized margins, entropy of the
weight distribution and the bounds it gives on the expected margin, the
asymptotic ratio, coefficient shares, correct/incorrect splits, and
finite-time support-vector detection.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientHistory, NotStarted
from .kernels import seq_sum

__all__ = [
    "DEFAULT_SV_WINDOW",
    "DEFAULT_SV_DELTA",
    "AnalyticsReport",
    "GapReport",
    "History",
    "is_checkpoint",
    "entropy",
    "entropy_from_log",
    "ratio_from_edges",
    "analyze",
    "detect_support_vectors",
    "detect_support_vectors_by_weight",
    "convergence_gaps",
    "expected_margin_gap",
    "default_sv_eps",
]

DEFAULT_SV_WINDOW = 100
DEFAULT_SV_DELTA = 1e-3


def default_sv_eps(n):
    return 1e-6 / n


def is_checkpoint(step, every=None):
    """Default cadence: every step up to 1000, then every ceil(step/1000)-th."""
    if step < 1:
        return False
    if every:
        return step % every == 0
    if step <= 1000:
        return True
    return step % math.ceil(step / 1000) == 0


class History:
    """Observer that snapshots normalized margins, log weights and coefficient
    shares at checkpoint steps. Pass to ``booster.run(observers=[...])``."""

    def __init__(self, m, every=None, keep_weights=True):
        self.m = m
        self.every = every
        self.keep_weights = keep_weights
        self.steps = []
        self.A = []
        self.norm_margins = []
        self.log_weights = []
        self.lambdas = []
        self._last = None

    def __call__(self, state, record):
        self._last = state
        if is_checkpoint(state.t, self.every):
            self._snap(state)

    def _snap(self, state):
        self.steps.append(state.t)
        self.A.append(state.A)
        self.norm_margins.append(state.margins / state.A)
        if self.keep_weights:
            self.log_weights.append(state.log_weights.copy())
        self.lambdas.append(state.lambda_vector(self.m))

    def finish(self):
        """Make sure the final step is a checkpoint."""
        if self._last is not None and (not self.steps or self.steps[-1] != self._last.t):
            self._snap(self._last)
        return self

    def index_of(self, step):
        try:
            return self.steps.index(step)
        except ValueError:
            return None

    def margins_by_step(self):
        return dict(zip(self.steps, self.norm_margins))

    def lambdas_by_step(self):
        return dict(zip(self.steps, self.lambdas))

    def __len__(self):
        return len(self.steps)


def entropy(weights):
    """Shannon entropy in nats, with 0 log 0 = 0."""
    p = np.asarray(weights, dtype=np.float64)
    if np.any(p < 0):
        raise DomainError("negative probability")
    if abs(p.sum() - 1.0) > 1e-9:
        raise DomainError(f"probabilities sum to {p.sum()!r}, not 1")
    nz = p[p > 0]
    return float(-seq_sum(nz * np.log(nz)))


def entropy_from_log(log_p):
    """Entropy from log-probabilities; exact where exp underflows."""
    log_p = np.asarray(log_p, dtype=np.float64)
    return float(-seq_sum(np.exp(log_p) * log_p))


def ratio_from_edges(edges):
    """-sum log(1 - r^2) / sum log((1 + r) / (1 - r))."""
    r = np.asarray(edges, dtype=np.float64)
    num = -seq_sum(np.log1p(-r * r))
    den = seq_sum(2.0 * np.arctanh(r))
    return num / den


@dataclass
class AnalyticsReport:
    t: int
    A: float
    margins: np.ndarray
    normalized_margins: np.ndarray
    ratio: float
    expected_margin: float
    expected_normalized_margin: float
    entropy: float
    lower_bound: float
    upper_bound: float
    lambda_: dict
    beta_norm_plus: np.ndarray
    theta: float
    support_vectors: frozenset = frozenset()
    support_vectors_weight: frozenset = frozenset()
    n: int = 0

    @property
    def beta_norm_minus(self):
        return 1.0 - self.beta_norm_plus


def analyze(state, trace, history=None, window=DEFAULT_SV_WINDOW,
            delta=DEFAULT_SV_DELTA, eps=None):
    """Snapshot every analytic quantity at the state's current step.

    Support vectors are detected only when a checkpoint ``history`` is
    supplied; the window is clipped to the history length.
    """
    if state.t < 1 or state.A <= 0.0:
        raise NotStarted("no iterations have been applied")
    recs = trace.records[: state.t]
    edges = np.array([r.edge for r in recs])
    half_log = seq_sum(np.array([r.logZ for r in recs]))  # sum of 1/2 log(1 - r^2)
    n = state.n
    w = np.exp(state.log_weights)
    A = state.A
    norm = state.margins / A
    E = seq_sum(w * state.margins)

    sv = sv_w = frozenset()
    if history is not None and len(history):
        W = min(window, len(history))
        sv = frozenset(detect_support_vectors(history.norm_margins, W, delta))
        if history.log_weights:
            sv_w = frozenset(detect_support_vectors_by_weight(
                history.log_weights, W, default_sv_eps(n) if eps is None else eps))

    return AnalyticsReport(
        t=state.t,
        A=A,
        margins=state.margins.copy(),
        normalized_margins=norm,
        ratio=ratio_from_edges(edges),
        expected_margin=E,
        expected_normalized_margin=E / A,
        entropy=entropy_from_log(state.log_weights),
        lower_bound=-math.log(n) - half_log,
        upper_bound=-half_log,
        lambda_={j: a / A for j, a in sorted(state.alpha_by_dichotomy.items())},
        beta_norm_plus=state.beta_plus / A,
        theta=float(norm.min()),
        support_vectors=sv,
        support_vectors_weight=sv_w,
        n=n,
    )


def detect_support_vectors(history, window, delta):
    """Points within ``delta`` of the minimum normalized margin at every one of
    the last ``window`` checkpoints of ``history``."""
    if window < 1:
        raise DomainError("window must be >= 1")
    if len(history) < window:
        raise InsufficientHistory(f"need {window} checkpoints, have {len(history)}")
    keep = None
    for marg in history[-window:]:
        marg = np.asarray(marg)
        near = marg <= marg.min() + delta
        keep = near if keep is None else keep & near
    return set(np.flatnonzero(keep).tolist())


def detect_support_vectors_by_weight(log_weight_history, window, eps):
    """Points whose weight stays above ``eps`` over the trailing window."""
    if len(log_weight_history) < window:
        raise InsufficientHistory(f"need {window} checkpoints, have {len(log_weight_history)}")
    log_eps = math.log(eps)
    keep = None
    for lw in log_weight_history[-window:]:
        above = np.asarray(lw) > log_eps
        keep = above if keep is None else keep & above
    return set(np.flatnonzero(keep).tolist())


@dataclass
class GapReport:
    lag: int
    pairs: list = field(default_factory=list)  # (t, bound, margin_gaps, lambda_gaps)
    worst_violation: float = -math.inf
    location: tuple = None

    @property
    def passed(self):
        return self.worst_violation <= 1e-12

    def entries(self):
        """Flattened ``(t, kind, index, gap, bound, ok)`` rows."""
        for t, bound, mg, lg in self.pairs:
            for i, g in enumerate(mg):
                yield t, "margin", i, float(g), bound, bool(g <= bound + 1e-12)
            for j, g in enumerate(lg):
                yield t, "lambda", j, float(g), bound, bool(g <= bound + 1e-12)


def convergence_gaps(trace, margins_history, lambda_history, lag, t=None):
    """Compare normalized margins and shares ``lag`` steps apart against
    ``2 * (sum of the lag coefficients in between) / A_{t+lag}``.

    Histories map step -> vector. With ``t=None`` every step ``s`` for which
    both ``s`` and ``s + lag`` are present is checked.
    """
    alphas = [r.alpha for r in trace.records]
    if t is None:
        starts = [s for s in sorted(margins_history) if s + lag in margins_history]
    else:
        if t not in margins_history or t + lag not in margins_history:
            raise InsufficientHistory(f"history lacks steps {t} and {t + lag}")
        starts = [t]
    if lag < 0:
        raise DomainError("lag must be >= 0")
    report = GapReport(lag)
    for s in starts:
        if s + lag > len(alphas):
            raise InsufficientHistory(f"trace has only {len(alphas)} records")
        # A_{s+lag} summed in the same order the booster accumulates it
        A_end = seq_sum(alphas[: s + lag])
        bound = 2.0 * math.fsum(alphas[s: s + lag]) / A_end
        mg = np.abs(np.asarray(margins_history[s]) - np.asarray(margins_history[s + lag]))
        lg = np.zeros(0)
        if lambda_history is not None and s in lambda_history and s + lag in lambda_history:
            lg = np.abs(np.asarray(lambda_history[s]) - np.asarray(lambda_history[s + lag]))
        report.pairs.append((s, bound, mg, lg))
        worst = max(float(mg.max(initial=-math.inf)), float(lg.max(initial=-math.inf))) - bound
        if worst > report.worst_violation:
            kind, idx = ("margin", int(mg.argmax())) if mg.size and mg.max() - bound >= worst else ("lambda", int(lg.argmax()))
            report.worst_violation = worst
            report.location = (s, kind, idx)
    return report


def expected_margin_gap(report, n):
    """|E[normalized margin] - ratio|; never exceeds log(n) / A."""
    if report.A <= 0.0:
        raise NotStarted("A must be positive")
    return abs(report.expected_normalized_margin - report.ratio)
