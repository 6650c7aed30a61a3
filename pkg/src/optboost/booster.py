"""The Optimal AdaBoost loop over a finite dichotomy pool.

Weights are kept as logs and renormalised with a log-sum-exp at every step,
so weights of points that keep being classified correctly can decay far past
the range of a linear-domain float without losing the identity
``-log w = log n + margin + sum(log Z)``.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    DomainError,
    MalformedTrace,
    NumericalDrift,
    PerfectHypothesis,
    TruncatedTrace,
    WeakLearningViolation,
)

__all__ = [
    "PERFECT_EDGE",
    "WEAK_EDGE_FLOOR",
    "DRIFT_TOL",
    "HALT_REASONS",
    "BoostState",
    "IterationRecord",
    "Trace",
    "init_state",
    "two_sum",
    "beta_residuals",
    "lambda_residual",
    "select_edge",
    "edge_to_coefficients",
    "apply_update",
    "run",
    "replay",
    "input_digest",
    "config_digest",
    "format_real",
    "read_trace",
    "write_trace",
]

PERFECT_EDGE = 1.0 - 1e-12
# An exactly-zero edge evaluates to rounding noise of order n * 2**-52, so
# anything at or below this floor counts as a weak-learning violation.
WEAK_EDGE_FLOOR = 1e-12
DRIFT_TOL = 1e-9
HALT_REASONS = ("t_max", "weak_learning_violation", "perfect_hypothesis")


def two_sum(a, b):
    """Error-free addition: ``s + err == a + b`` exactly (scalars or arrays)."""
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@dataclass
class BoostState:
    """Running state of a boosting run.

    ``margins``, ``beta_plus``, ``A`` and the values of ``alpha_by_dichotomy``
    are plain running sums; each has a ``*_lo`` companion holding the exact
    rounding error of those sums, so identities between them can be checked
    independently of the magnitude of ``A``.
    """

    t: int
    log_weights: np.ndarray
    margins: np.ndarray
    beta_plus: np.ndarray
    A: float = 0.0
    sum_logZ: float = 0.0
    alpha_by_dichotomy: dict = field(default_factory=dict)
    last_logZ: float = 0.0  # directly computed partition of the latest step
    margins_lo: np.ndarray = None
    beta_plus_lo: np.ndarray = None
    A_lo: float = 0.0
    alpha_lo: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.margins_lo is None:
            self.margins_lo = np.zeros_like(self.margins)
        if self.beta_plus_lo is None:
            self.beta_plus_lo = np.zeros_like(self.beta_plus)

    @property
    def n(self):
        return self.log_weights.shape[0]

    def weights(self):
        return np.exp(self.log_weights)

    def beta_minus(self):
        return self.A - self.beta_plus

    def normalized_margins(self):
        if self.A <= 0.0:
            raise DomainError("normalized margins are undefined before the first step")
        return self.margins / self.A

    def lambda_vector(self, m):
        """Dense length-``m`` vector of per-row coefficient shares."""
        lam = np.zeros(m)
        for j, a in self.alpha_by_dichotomy.items():
            lam[j] = a
        return lam / self.A

    def copy(self):
        return BoostState(
            self.t,
            self.log_weights.copy(),
            self.margins.copy(),
            self.beta_plus.copy(),
            self.A,
            self.sum_logZ,
            dict(self.alpha_by_dichotomy),
            self.last_logZ,
            self.margins_lo.copy(),
            self.beta_plus_lo.copy(),
            self.A_lo,
            dict(self.alpha_lo),
        )


@dataclass(frozen=True)
class IterationRecord:
    t: int
    selected: int
    edge: float
    alpha: float
    logZ: float
    weights: tuple = None  # post-update weights, only when emitted


def init_state(n):
    if n < 2:
        raise DomainError(f"need n >= 2 points, got {n}")
    return BoostState(
        t=0,
        log_weights=np.full(n, -math.log(n)),
        margins=np.zeros(n),
        beta_plus=np.zeros(n),
    )


def select_edge(state, pool):
    """Row of ``pool.mistake`` with the largest weighted agreement.

    Ties go to the smallest row index. Raises :class:`WeakLearningViolation`
    for a best edge <= 1e-12 and :class:`PerfectHypothesis` for one >= 1 - 1e-12.
    """
    if pool.n != state.n:
        raise DomainError(f"pool has {pool.n} columns, state has {state.n} points")
    w = np.exp(state.log_weights)
    j, edge = kernels.select_edge(pool.mistake_t, w)
    if edge <= WEAK_EDGE_FLOOR:
        raise WeakLearningViolation(f"best edge {edge!r} is not positive at t={state.t}", j, edge)
    if edge >= PERFECT_EDGE:
        raise PerfectHypothesis(f"edge {edge!r} reaches 1 at t={state.t}", j, edge)
    return j, edge


def edge_to_coefficients(edge):
    """``(alpha, logZ)`` for an edge in (0, 1)."""
    edge = float(edge)
    if not 0.0 < edge < 1.0:
        raise DomainError(f"edge must lie in (0, 1), got {edge!r}")
    return math.atanh(edge), 0.5 * math.log1p(-edge * edge)


def _logsumexp(x):
    mx = float(np.max(x))
    return mx + math.log(kernels.seq_sum(np.exp(x - mx)))


def apply_update(state, pool, j, edge, alpha, logZ):
    """Multiply weights by exp(-eta_j * alpha) and renormalise, in place.

    The partition is recomputed directly; if it disagrees with the closed
    form ``logZ`` by more than 1e-9 :class:`NumericalDrift` is raised and the
    state is left untouched.
    """
    eta = pool.mistake[j]
    shifted = state.log_weights - eta * alpha
    logZ_exact = _logsumexp(shifted)
    if not abs(logZ_exact - logZ) <= DRIFT_TOL:
        raise NumericalDrift(
            f"t={state.t}: partition {logZ_exact!r} vs closed form {logZ!r}"
        )
    state.log_weights = shifted - logZ_exact
    state.margins, err = two_sum(state.margins, eta * alpha)
    state.margins_lo = state.margins_lo + err
    state.beta_plus, err = two_sum(state.beta_plus, np.where(eta > 0, alpha, 0.0))
    state.beta_plus_lo = state.beta_plus_lo + err
    state.A, err = two_sum(state.A, alpha)
    state.A_lo += err
    state.sum_logZ += logZ_exact
    state.last_logZ = logZ_exact
    hi, err = two_sum(state.alpha_by_dichotomy.get(j, 0.0), alpha)
    state.alpha_by_dichotomy[j] = hi
    state.alpha_lo[j] = state.alpha_lo.get(j, 0.0) + err
    state.t += 1
    return state


def beta_residuals(state, beta_minus, beta_minus_lo):
    """``(beta+ + beta- - A, beta+ - beta- - margins)`` per point, evaluated
    from the compensated sums so only rounding of the compensation terms
    remains. ``beta_minus`` must be accumulated independently by the caller
    with :func:`two_sum`."""
    s, e = two_sum(state.beta_plus, beta_minus)
    r_total = (s - state.A) + e + (state.beta_plus_lo + beta_minus_lo - state.A_lo)
    s, e = two_sum(state.beta_plus, -beta_minus)
    r_diff = (s - state.margins) + e + (state.beta_plus_lo - beta_minus_lo - state.margins_lo)
    return r_total, r_diff


def lambda_residual(state):
    """Exact ``sum_j alpha_j - A`` from the compensated sums."""
    parts = list(state.alpha_by_dichotomy.values()) + list(state.alpha_lo.values())
    return math.fsum(parts + [-state.A, -state.A_lo])


# -- trace ------------------------------------------------------------------


def input_digest(data, pool):
    h = hashlib.sha256()
    h.update(data.digest().encode())
    h.update(pool.digest().encode())
    return h.hexdigest()


def format_real(x):
    return format(float(x), ".17g")


def _encode(obj):
    """JSON with every float written to 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise ValueError("non-finite real in trace")
        s = format_real(obj)
        if "e" not in s and "." not in s:
            s += ".0"
        return s
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def config_digest(config):
    return hashlib.sha256(_encode(config).encode()).hexdigest()


@dataclass
class Trace:
    n: int
    m: int
    dataset_digest: str
    config: dict
    records: list = field(default_factory=list)
    halt: str = None

    @property
    def edges(self):
        return np.array([r.edge for r in self.records])

    @property
    def alphas(self):
        return np.array([r.alpha for r in self.records])

    @property
    def logZs(self):
        return np.array([r.logZ for r in self.records])

    def header(self):
        return {
            "n": self.n,
            "m": self.m,
            "dataset_digest": self.dataset_digest,
            "config": self.config,
            "config_digest": config_digest(self.config),
        }

    def lines(self):
        yield _encode(self.header())
        for r in self.records:
            obj = {"t": r.t, "j": r.selected, "edge": r.edge, "alpha": r.alpha, "logZ": r.logZ}
            if r.weights is not None:
                obj["weights"] = list(r.weights)
            yield _encode(obj)
        if self.halt is not None:
            yield _encode({"halt": self.halt})


def write_trace(trace, path):
    with open(path, "w", newline="\n") as fh:
        for line in trace.lines():
            fh.write(line + "\n")


def _as_int(v, what):
    if isinstance(v, bool) or not isinstance(v, int):
        raise MalformedTrace(f"{what} must be an integer, got {v!r}")
    return v


def _as_real(v, what):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise MalformedTrace(f"{what} must be a number, got {v!r}")
    return float(v)


def read_trace(path):
    """Parse a JSON-lines trace; the header's ``config_digest`` is kept on
    ``trace.config_digest_recorded`` for the verifier."""
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise MalformedTrace(f"cannot read trace {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TruncatedTrace("empty trace file")
    try:
        objs = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise MalformedTrace(f"invalid JSON in trace: {exc}") from exc
    head = objs[0]
    if not isinstance(head, dict) or not {"n", "m", "dataset_digest", "config"} <= head.keys():
        raise MalformedTrace("first line is not a trace header")
    trace = Trace(
        n=_as_int(head["n"], "n"),
        m=_as_int(head["m"], "m"),
        dataset_digest=str(head["dataset_digest"]),
        config=head["config"],
    )
    trace.config_digest_recorded = head.get("config_digest")
    body = objs[1:]
    if not body or not isinstance(body[-1], dict) or "halt" not in body[-1]:
        raise TruncatedTrace("trace has no final halt line")
    halt = body[-1]["halt"]
    if halt not in HALT_REASONS:
        raise MalformedTrace(f"unknown halt reason {halt!r}")
    trace.halt = halt
    for k, obj in enumerate(body[:-1]):
        if not isinstance(obj, dict) or not {"t", "j", "edge", "alpha", "logZ"} <= obj.keys():
            raise MalformedTrace(f"record {k} is missing fields")
        w = obj.get("weights")
        if w is not None:
            if not isinstance(w, list):
                raise MalformedTrace(f"record {k}: weights must be a list")
            w = tuple(_as_real(v, "weight") for v in w)
        trace.records.append(
            IterationRecord(
                t=_as_int(obj["t"], "t"),
                selected=_as_int(obj["j"], "j"),
                edge=_as_real(obj["edge"], "edge"),
                alpha=_as_real(obj["alpha"], "alpha"),
                logZ=_as_real(obj["logZ"], "logZ"),
                weights=w,
            )
        )
    return trace


# -- driver -----------------------------------------------------------------


def run(data, pool, t_max, config=None, emit_weights=False, observers=()):
    """Run up to ``t_max`` iterations.

    Halting conditions end the loop early and are recorded in ``trace.halt``
    rather than raised. Each observer is called as ``obs(state, record)``
    after every completed step.
    """
    if isinstance(t_max, bool) or int(t_max) != t_max or t_max < 1:
        raise DomainError(f"t_max must be a positive integer, got {t_max!r}")
    t_max = int(t_max)
    if pool.n != data.n:
        raise DomainError(f"pool has {pool.n} columns, dataset has {data.n} points")
    cfg = {"t_max": t_max, "emit_weights": bool(emit_weights)}
    if config:
        cfg.update(config)
    trace = Trace(n=data.n, m=pool.m, dataset_digest=input_digest(data, pool), config=cfg)
    state = init_state(data.n)
    trace.halt = "t_max"
    for _ in range(t_max):
        try:
            j, edge = select_edge(state, pool)
        except (WeakLearningViolation, PerfectHypothesis) as exc:
            trace.halt = exc.reason
            break
        alpha, logZ = edge_to_coefficients(edge)
        t = state.t
        apply_update(state, pool, j, edge, alpha, logZ)
        rec = IterationRecord(
            t, j, edge, alpha, logZ,
            tuple(np.exp(state.log_weights).tolist()) if emit_weights else None,
        )
        trace.records.append(rec)
        for obs in observers:
            obs(state, rec)
    return state, trace


def replay(trace, pool, observers=()):
    """Re-apply the recorded selections and coefficients without re-selecting.

    Used to rebuild margins and weights from a trace for reporting.
    """
    state = init_state(trace.n)
    for rec in trace.records:
        if not 0 <= rec.selected < pool.m:
            raise MalformedTrace(f"record t={rec.t} selects row {rec.selected} outside pool")
        apply_update(state, pool, rec.selected, rec.edge, rec.alpha, rec.logZ)
        for obs in observers:
            obs(state, rec)
    return state
