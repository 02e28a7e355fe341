"""Zeroth-order saddle-point solvers and a deterministic reference solver.

Four stochastic variants share one driver:

=========  ==================  =========================
variant    update              component sampling
=========  ==================  =========================
OGDA_RR    optimistic          fresh permutation / epoch
OGDA_WR    optimistic          i.i.d. uniform
SGDA_RR    plain descent-asc.  fresh permutation / epoch
SGDA_WR    plain descent-asc.  i.i.d. uniform
=========  ==================  =========================

The optimistic step at inner iterate ``u_i`` with current component ``s_i``,
previous component ``s_{i-1}`` and a shared direction ``v_i`` is::

    u_{i+1} = P(u_i - eta * (F_{s_i}(u_i; v_i) + F_{s_{i-1}}(u_i; v_i) - F_{s_{i-1}}(u_{i-1}; v_{i-1})))

where the last term is cached from the previous step.  All variants return
the step-size weighted average of every inner iterate.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, NonConvergenceError, NumericalFailureError
from .geometry import FeasibleSet
from .oracle import EstimatorMode, FiniteSumOracle, GradientEstimator, QueryCounter, SeededRng

__all__ = [
    "Variant",
    "Schedule",
    "SolverConfig",
    "SolverState",
    "WeightedAverage",
    "TraceRecord",
    "Trace",
    "RunResult",
    "permute",
    "ogda_rr_epoch",
    "ogda_wr_epoch",
    "sgda_rr_epoch",
    "sgda_wr_epoch",
    "run",
    "reference_saddle",
    "fixed_point_residual",
    "estimate_smoothness",
]

TRACE_HEADER = ("epoch", "queries", "suboptimality", "wall_time_ms")


class Variant(str, enum.Enum):
    OGDA_RR = "OGDA_RR"
    OGDA_WR = "OGDA_WR"
    SGDA_RR = "SGDA_RR"
    SGDA_WR = "SGDA_WR"

    @property
    def optimistic(self) -> bool:
        return self in (Variant.OGDA_RR, Variant.OGDA_WR)

    @property
    def reshuffle(self) -> bool:
        return self in (Variant.OGDA_RR, Variant.SGDA_RR)

    @property
    def label(self) -> str:
        return {"OGDA_RR": "A-I", "OGDA_WR": "A-II", "SGDA_RR": "A-III", "SGDA_WR": "A-IV"}[self.value]


@dataclass(frozen=True)
class Schedule:
    """eta_t = eta0 (t+1)^-eta_exponent, eps_t = eps0 (t+1)^-eps_exponent."""

    eta0: float
    eps0: float
    chi: float = 0.1
    eta_exponent: float | None = None
    eps_exponent: float = 0.25

    def __post_init__(self):
        if not self.eta0 > 0:
            raise InvalidArgumentError("eta0 must be positive")
        if not self.eps0 > 0:
            raise InvalidArgumentError("eps0 must be positive")
        if not 0 < self.chi < 0.25:
            raise InvalidArgumentError("chi must lie in (0, 1/4)")
        if self.eta_exponent is None:
            object.__setattr__(self, "eta_exponent", 0.75 + self.chi)
        if self.eta_exponent < 0:
            raise InvalidArgumentError("eta_exponent must be >= 0 so steps are nonincreasing")

    def eta(self, t: int) -> float:
        return self.eta0 * (t + 1) ** (-self.eta_exponent)

    def eps(self, t: int) -> float:
        return self.eps0 * (t + 1) ** (-self.eps_exponent)


@dataclass
class SolverConfig:
    variant: Variant
    epochs: int
    schedule: Schedule
    feasible: FeasibleSet
    estimator_mode: EstimatorMode = EstimatorMode.FULL_ZO
    seed: int = 0
    init: np.ndarray | None = None
    smoothness: float | None = None
    eval_every: int = 1
    snapshot_every: int | None = None

    def __post_init__(self):
        self.variant = Variant(self.variant)
        self.estimator_mode = EstimatorMode(self.estimator_mode)
        if self.epochs < 1:
            raise InvalidArgumentError("epochs must be >= 1")
        if self.eval_every < 1:
            raise InvalidArgumentError("eval_every must be >= 1")


class WeightedAverage:
    """Running sum of weighted points; never stores the iterates."""

    def __init__(self, dim: int):
        self.total = np.zeros(dim)
        self.weight = 0.0

    def add(self, point: np.ndarray, weight: float) -> None:
        self.total += weight * point
        self.weight += weight

    @property
    def value(self) -> np.ndarray:
        if self.weight <= 0:
            raise ValueError("no points accumulated")
        return self.total / self.weight


@dataclass
class SolverState:
    u: np.ndarray
    average: WeightedAverage
    u_prev: np.ndarray | None = None
    prev_index: int | None = None
    prev_dir: np.ndarray | None = None
    lagged: np.ndarray | None = None

    @classmethod
    def start(cls, u0: np.ndarray) -> "SolverState":
        u0 = np.array(u0, dtype=np.float64)
        return cls(u=u0, average=WeightedAverage(u0.size))


@dataclass
class TraceRecord:
    epoch: int
    queries: int
    suboptimality: float | None = None
    wall_time_ms: float | None = None
    snapshot: np.ndarray | None = None


@dataclass
class Trace:
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ValueError("trace epochs must increase strictly")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_csv(self, fh=None, include_wall_time: bool = False) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in self.records:
            writer.writerow(
                [
                    r.epoch,
                    r.queries,
                    "" if r.suboptimality is None else f"{r.suboptimality:.17g}",
                    "" if (r.wall_time_ms is None or not include_wall_time) else f"{r.wall_time_ms:.3f}",
                ]
            )
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "Trace":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != TRACE_HEADER:
            raise ValueError("not a trace CSV")
        trace = cls()
        for row in rows[1:]:
            trace.append(
                TraceRecord(
                    epoch=int(row[0]),
                    queries=int(row[1]),
                    suboptimality=float(row[2]) if row[2] else None,
                    wall_time_ms=float(row[3]) if row[3] else None,
                )
            )
        return trace


@dataclass
class RunResult:
    point: np.ndarray
    trace: Trace
    queries: int
    state: SolverState


def permute(rng: SeededRng, n: int) -> np.ndarray:
    """Uniform random permutation of the 0-based component indices."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    return rng.permutation(n)


def _index_stream(rng: SeededRng, n: int, reshuffle: bool):
    if reshuffle:
        yield from permute(rng, n).tolist()
    else:
        for _ in range(n):
            yield rng.uniform_index(n)


def _checked(estimator, t, i, idx, u, eps, v):
    try:
        return estimator(idx, u, eps, v)
    except NumericalFailureError as exc:
        raise NumericalFailureError(f"non-finite evaluation at epoch {t}, step {i}: {exc}", t, i) from exc


def _optimistic_epoch(state, estimator, feasible, schedule, t, rng, reshuffle):
    eta, eps = schedule.eta(t), schedule.eps(t)
    k = estimator.direction_dim
    if state.prev_index is not None:
        # the cached lag was built with the previous epoch's radius
        state.lagged = _checked(estimator, t, -1, state.prev_index, state.u_prev, eps, state.prev_dir)
    u = state.u
    for i, idx in enumerate(_index_stream(rng, estimator.oracle.n, reshuffle)):
        v = rng.sphere(k) if k else None
        current = _checked(estimator, t, i, idx, u, eps, v)
        if state.prev_index is None:
            # cold start: u_{-1} = u_0, same index and direction, so the correction cancels
            step = current
        else:
            step = current + _checked(estimator, t, i, state.prev_index, u, eps, v) - state.lagged
        z = u - eta * step
        if not np.all(np.isfinite(z)):
            raise NumericalFailureError(f"non-finite iterate at epoch {t}, step {i}", t, i)
        u_next = feasible.project(z)
        state.average.add(u_next, eta)
        state.u_prev, state.prev_index, state.prev_dir, state.lagged = u, idx, v, current
        u = u_next
    state.u = u
    return state


def _plain_epoch(state, estimator, feasible, schedule, t, rng, reshuffle):
    eta, eps = schedule.eta(t), schedule.eps(t)
    k = estimator.direction_dim
    u = state.u
    for i, idx in enumerate(_index_stream(rng, estimator.oracle.n, reshuffle)):
        v = rng.sphere(k) if k else None
        step = _checked(estimator, t, i, idx, u, eps, v)
        z = u - eta * step
        if not np.all(np.isfinite(z)):
            raise NumericalFailureError(f"non-finite iterate at epoch {t}, step {i}", t, i)
        u_next = feasible.project(z)
        state.average.add(u_next, eta)
        state.u_prev, state.prev_index, state.prev_dir = u, idx, v
        u = u_next
    state.u = u
    return state


def ogda_rr_epoch(state, estimator, feasible, schedule, t, rng):
    return _optimistic_epoch(state, estimator, feasible, schedule, t, rng, reshuffle=True)


def ogda_wr_epoch(state, estimator, feasible, schedule, t, rng):
    return _optimistic_epoch(state, estimator, feasible, schedule, t, rng, reshuffle=False)


def sgda_rr_epoch(state, estimator, feasible, schedule, t, rng):
    return _plain_epoch(state, estimator, feasible, schedule, t, rng, reshuffle=True)


def sgda_wr_epoch(state, estimator, feasible, schedule, t, rng):
    return _plain_epoch(state, estimator, feasible, schedule, t, rng, reshuffle=False)


EPOCH_FUNCTIONS = {
    Variant.OGDA_RR: ogda_rr_epoch,
    Variant.OGDA_WR: ogda_wr_epoch,
    Variant.SGDA_RR: sgda_rr_epoch,
    Variant.SGDA_WR: sgda_wr_epoch,
}


def run(
    config: SolverConfig,
    oracle: FiniteSumOracle,
    evaluate: Callable[[np.ndarray], float] | None = None,
    observer: Callable[[int, float, np.ndarray], None] | None = None,
    stop: Callable[[TraceRecord], bool] | None = None,
) -> RunResult:
    """Run ``config.epochs`` epochs and return the weighted average iterate.

    ``evaluate`` fills the trace's suboptimality column.  ``observer`` sees
    every estimate produced.  ``stop`` may end the run early after any
    recorded epoch.
    """
    feasible = config.feasible
    if feasible.dim != oracle.dim:
        raise InvalidArgumentError(f"oracle dimension {oracle.dim} != feasible set dimension {feasible.dim}")
    if config.smoothness is not None and config.schedule.eta0 >= 1.0 / (2.0 * config.smoothness):
        warnings.warn(
            f"eta0={config.schedule.eta0} is not below 1/(2*smoothness)={1 / (2 * config.smoothness):.4g}",
            stacklevel=2,
        )
    counter = QueryCounter()
    estimator = GradientEstimator(oracle, config.estimator_mode, counter)
    if observer is not None:
        inner = estimator.__call__

        def observed(i, u, eps, v):
            out = inner(i, u, eps, v)
            observer(i, eps, out)
            return out

        estimator = _Wrapped(estimator, observed)
    rng = SeededRng(config.seed)
    u0 = np.zeros(oracle.dim) if config.init is None else np.asarray(config.init, dtype=np.float64)
    state = SolverState.start(feasible.project(u0))
    epoch_fn = EPOCH_FUNCTIONS[config.variant]
    snapshot_every = config.snapshot_every
    trace = Trace()
    started = time.perf_counter()
    for t in range(config.epochs):
        state = epoch_fn(state, estimator, feasible, config.schedule, t, rng)
        done = t + 1
        if done % config.eval_every and done != config.epochs:
            continue
        point = state.average.value
        record = TraceRecord(
            epoch=done,
            queries=counter.component_evaluations,
            suboptimality=None if evaluate is None else float(evaluate(point)),
            wall_time_ms=1e3 * (time.perf_counter() - started),
            snapshot=point.copy() if snapshot_every and done % snapshot_every == 0 else None,
        )
        trace.append(record)
        if stop is not None and stop(record):
            break
    return RunResult(point=state.average.value, trace=trace, queries=counter.component_evaluations, state=state)


class _Wrapped:
    def __init__(self, base, fn):
        self._base = base
        self._fn = fn
        self.oracle = base.oracle
        self.direction_dim = base.direction_dim
        self.counter = base.counter

    def __call__(self, i, u, eps, v):
        return self._fn(i, u, eps, v)


def fixed_point_residual(oracle: FiniteSumOracle, feasible: FeasibleSet, u: np.ndarray, step: float) -> float:
    return float(np.linalg.norm(u - feasible.project(u - step * oracle.operator(u))))


def estimate_smoothness(oracle: FiniteSumOracle, feasible: FeasibleSet, pairs: int = 1000, seed: int = 0) -> float:
    """Largest observed ||F(u) - F(u')|| / ||u - u'|| over random feasible pairs.

    Half the pairs are far apart, half are local perturbations.
    """
    rng = np.random.default_rng(seed)
    a = feasible.sample(rng, pairs)
    b = feasible.sample(rng, pairs)
    scale = 1e-3 * max(feasible.diameter(), 1e-12)
    half = pairs // 2
    b[:half] = np.array([feasible.project(p) for p in a[:half] + scale * rng.standard_normal((half, a.shape[1]))])
    best = 0.0
    for p, q in zip(a, b):
        dist = np.linalg.norm(p - q)
        if dist < 1e-12:
            continue
        best = max(best, float(np.linalg.norm(oracle.operator(p) - oracle.operator(q)) / dist))
    if best <= 0:
        raise NumericalFailureError("could not estimate a positive smoothness constant")
    return best


def reference_saddle(
    oracle: FiniteSumOracle,
    feasible: FeasibleSet,
    tol: float = 1e-10,
    max_iters: int = 200_000,
    method: str = "ogda",
    smoothness: float | None = None,
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Deterministic full-batch saddle solver with exact gradients.

    Iterates ``method`` ("ogda" or "gda") with step 1/(4*smoothness) until
    ``||u - P(u - step*F(u))|| <= tol``.
    """
    if method not in ("ogda", "gda"):
        raise InvalidArgumentError(f"unknown reference method {method!r}")
    if smoothness is None:
        smoothness = estimate_smoothness(oracle, feasible)
    step = 1.0 / (4.0 * smoothness)
    u = feasible.project(np.zeros(oracle.dim) if init is None else np.asarray(init, dtype=np.float64))
    prev_op = None
    residual = math.inf
    for _ in range(max_iters):
        op = oracle.operator(u)
        if not np.all(np.isfinite(op)):
            raise NumericalFailureError("non-finite gradient in reference solver")
        residual = float(np.linalg.norm(u - feasible.project(u - step * op)))
        if residual <= tol:
            return u
        direction = op if (method == "gda" or prev_op is None) else 2.0 * op - prev_op
        prev_op = op
        u = feasible.project(u - step * direction)
    raise NonConvergenceError(f"reference solver did not reach tol={tol} (residual {residual:.3e})", residual)
