"""Finite-sum losses and the one-point zeroth-order gradient estimator.

An oracle exposes ``n`` component losses over a joint vector ``u`` that is
split into named coordinate blocks.  Blocks flagged ``maximize`` belong to the
max player; the saddle operator negates their gradient.  Blocks flagged
``analytic`` have exact partial gradients that the hybrid estimator may use;
all other blocks are query-only and are estimated from loss values.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, NumericalFailureError, UnsupportedModeError

__all__ = [
    "Block",
    "FiniteSumOracle",
    "SeededRng",
    "QueryCounter",
    "ZoEstimate",
    "EstimatorMode",
    "GradientEstimator",
    "sample_sphere",
    "zo_gradient",
    "zo_gradient_batch",
    "hybrid_gradient",
    "smoothed_loss",
]

UNIT_TOL = 1e-6


@dataclass(frozen=True)
class Block:
    name: str
    start: int
    stop: int
    maximize: bool = False
    analytic: bool = False

    @property
    def slice(self) -> slice:
        return slice(self.start, self.stop)

    @property
    def size(self) -> int:
        return self.stop - self.start


class FiniteSumOracle:
    """L(u) = (1/n) * sum_i L_i(u).

    Subclasses set ``n`` and ``blocks`` and implement :meth:`eval_component`.
    They may override :meth:`component_gradient` (exact gradient of one
    component) and the vectorised full-batch helpers for speed.
    Implementations must be read-only after construction.
    """

    n: int
    blocks: tuple[Block, ...]

    @property
    def dim(self) -> int:
        return self.blocks[-1].stop

    @property
    def max_mask(self) -> np.ndarray:
        mask = np.zeros(self.dim, dtype=bool)
        for b in self.blocks:
            if b.maximize:
                mask[b.slice] = True
        return mask

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def eval_component(self, i: int, u: np.ndarray) -> float:
        raise NotImplementedError

    def component_gradient(self, i: int, u: np.ndarray) -> np.ndarray:
        """Exact gradient of L_i at u (no sign flip)."""
        raise UnsupportedModeError(f"{type(self).__name__} has no exact gradients")

    def partial_gradient(self, block: Block, i: int, u: np.ndarray) -> np.ndarray:
        """Exact partial gradient of L_i on an analytic block."""
        if not block.analytic:
            raise UnsupportedModeError(f"block {block.name!r} is query-only")
        return self.component_gradient(i, u)[block.slice]

    def loss(self, u: np.ndarray) -> float:
        return float(np.mean([self.eval_component(i, u) for i in range(self.n)]))

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return np.mean([self.component_gradient(i, u) for i in range(self.n)], axis=0)

    def operator(self, u: np.ndarray) -> np.ndarray:
        """Saddle operator F(u) = [grad_min L; -grad_max L] of the full loss."""
        g = self.gradient(u)
        g[self.max_mask] *= -1.0
        return g

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise InvalidArgumentError(f"component index {i} outside [0, {self.n})")


class SeededRng:
    """Reproducible randomness with independent streams for indices and directions.

    Separate streams keep the direction sequence identical across sampling
    schemes that consume index randomness differently.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        ss = np.random.SeedSequence(self.seed)
        index_ss, direction_ss, misc_ss = ss.spawn(3)
        self.index = np.random.Generator(np.random.PCG64(index_ss))
        self.direction = np.random.Generator(np.random.PCG64(direction_ss))
        self.misc = np.random.Generator(np.random.PCG64(misc_ss))

    def permutation(self, n: int) -> np.ndarray:
        return self.index.permutation(n)

    def uniform_index(self, n: int) -> int:
        return int(self.index.integers(n))

    def sphere(self, dim: int) -> np.ndarray:
        return sample_sphere(self.direction, dim)


class QueryCounter:
    __slots__ = ("component_evaluations",)

    def __init__(self) -> None:
        self.component_evaluations = 0

    def add(self, k: int = 1) -> None:
        self.component_evaluations += k


@dataclass(frozen=True)
class ZoEstimate:
    direction: np.ndarray
    radius: float
    value: np.ndarray


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.direction
    return rng


def sample_sphere(rng, dim: int) -> np.ndarray:
    """Uniform draw from the unit sphere in R^dim (normalised Gaussian)."""
    if dim < 1:
        raise InvalidArgumentError("sphere dimension must be >= 1")
    gen = _generator(rng)
    while True:
        g = gen.standard_normal(dim)
        norm = np.linalg.norm(g)
        if norm > 0.0:
            return g / norm


def _resolve_coords(oracle: FiniteSumOracle, block) -> np.ndarray:
    """Coordinate indices perturbed by the estimator; ``None`` means all."""
    if block is None:
        return np.arange(oracle.dim)
    if isinstance(block, Block):
        return np.arange(block.start, block.stop)
    if isinstance(block, str):
        return _resolve_coords(oracle, oracle.block(block))
    if isinstance(block, slice):
        return np.arange(oracle.dim)[block]
    if isinstance(block, (list, tuple)) and block and isinstance(block[0], (Block, str)):
        return np.concatenate([_resolve_coords(oracle, b) for b in block])
    return np.asarray(block, dtype=int)


def _evaluate(oracle, i, point, counter):
    value = oracle.eval_component(i, point)
    if counter is not None:
        counter.add()
    if not np.isfinite(value):
        raise NumericalFailureError(f"component {i} returned {value}", index=i)
    return value


def zo_gradient(
    oracle: FiniteSumOracle,
    i: int,
    u: np.ndarray,
    eps: float,
    v: np.ndarray,
    block=None,
    counter: QueryCounter | None = None,
) -> ZoEstimate:
    """One-point estimate (k/eps) * L_i(u + eps*v) * v over a k-dimensional block.

    The output is sign-flipped on coordinates of maximising blocks, so it
    estimates the saddle operator rather than the raw gradient.
    """
    if not eps > 0:
        raise InvalidArgumentError(f"query radius must be positive, got {eps}")
    oracle._check_index(i)
    coords = _resolve_coords(oracle, block)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (coords.size,):
        raise InvalidArgumentError(f"direction has shape {v.shape}, block needs ({coords.size},)")
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise InvalidArgumentError("direction must have unit norm")
    point = np.array(u, dtype=np.float64)
    point[coords] += eps * v
    value = _evaluate(oracle, i, point, counter)
    est = (coords.size / eps) * value * v
    est[oracle.max_mask[coords]] *= -1.0
    return ZoEstimate(direction=v, radius=float(eps), value=est)


def zo_gradient_batch(oracle, i, u, eps, directions, block=None, counter=None) -> np.ndarray:
    """Vectorised :func:`zo_gradient` over rows of ``directions``.

    Uses ``oracle.eval_component_batch`` when available.
    """
    coords = _resolve_coords(oracle, block)
    directions = np.asarray(directions, dtype=np.float64)
    points = np.repeat(np.asarray(u, dtype=np.float64)[None, :], len(directions), axis=0)
    points[:, coords] += eps * directions
    batch = getattr(oracle, "eval_component_batch", None)
    if batch is not None:
        values = batch(i, points)
    else:
        values = np.array([oracle.eval_component(i, p) for p in points])
    if counter is not None:
        counter.add(len(directions))
    est = (coords.size / eps) * values[:, None] * directions
    est[:, oracle.max_mask[coords]] *= -1.0
    return est


class EstimatorMode(str, enum.Enum):
    FULL_ZO = "full_zo"
    HYBRID = "hybrid"


class GradientEstimator:
    """Per-component operator estimates for the solvers.

    ``full_zo`` perturbs every coordinate with one direction.  ``hybrid`` uses
    exact partials on analytic blocks and a zeroth-order estimate on the
    remaining (query-only) coordinates; if there are none it is exact.
    """

    def __init__(self, oracle: FiniteSumOracle, mode=EstimatorMode.FULL_ZO, counter=None):
        self.oracle = oracle
        self.mode = EstimatorMode(mode)
        self.counter = counter if counter is not None else QueryCounter()
        if self.mode is EstimatorMode.FULL_ZO:
            self.query_blocks = list(oracle.blocks)
            self.analytic_blocks = []
        else:
            self.analytic_blocks = [b for b in oracle.blocks if b.analytic]
            if not self.analytic_blocks:
                raise UnsupportedModeError("hybrid mode needs at least one analytic block")
            self.query_blocks = [b for b in oracle.blocks if not b.analytic]
        self.coords = (
            np.concatenate([np.arange(b.start, b.stop) for b in self.query_blocks])
            if self.query_blocks
            else np.zeros(0, dtype=int)
        )
        self._sign = np.where(oracle.max_mask, -1.0, 1.0)
        # scratch flags to avoid rebuilding per call
        self._query_max = oracle.max_mask[self.coords]

    @property
    def direction_dim(self) -> int:
        return int(self.coords.size)

    def __call__(self, i: int, u: np.ndarray, eps: float, v: np.ndarray | None) -> np.ndarray:
        oracle = self.oracle
        out = np.empty(oracle.dim)
        if self.coords.size:
            point = u.copy()
            point[self.coords] += eps * v
            value = _evaluate(oracle, i, point, self.counter)
            est = (self.coords.size / eps) * value * v
            est[self._query_max] *= -1.0
            out[self.coords] = est
        for b in self.analytic_blocks:
            g = oracle.partial_gradient(b, i, u)
            if not np.all(np.isfinite(g)):
                raise NumericalFailureError(f"component {i} gradient is not finite", index=i)
            out[b.slice] = -g if b.maximize else g
        return out


def hybrid_gradient(oracle, i, u, eps, rng=None, v=None, counter=None) -> np.ndarray:
    """Exact partials on analytic blocks, one-point estimate on the rest."""
    est = GradientEstimator(oracle, EstimatorMode.HYBRID, counter)
    if v is None and est.direction_dim:
        if rng is None:
            raise InvalidArgumentError("need either rng or v")
        v = sample_sphere(rng, est.direction_dim)
    if v is not None and est.direction_dim and abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise InvalidArgumentError("direction must have unit norm")
    oracle._check_index(i)
    return est(i, np.asarray(u, dtype=np.float64), eps, v)


def smoothed_loss(oracle, i, u, eps, rng, m: int, block=None) -> float:
    """Monte Carlo estimate of E_{w ~ Unif(ball)} L_i(u + eps*w)."""
    if m < 1:
        raise InvalidArgumentError("sample count must be >= 1")
    coords = _resolve_coords(oracle, block)
    gen = _generator(rng)
    k = coords.size
    g = gen.standard_normal((m, k))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    w = g * gen.uniform(size=(m, 1)) ** (1.0 / k)
    points = np.repeat(np.asarray(u, dtype=np.float64)[None, :], m, axis=0)
    points[:, coords] += eps * w
    batch = getattr(oracle, "eval_component_batch", None)
    if batch is not None:
        return float(np.mean(batch(i, points)))
    return float(np.mean([oracle.eval_component(i, p) for p in points]))


def check_blocks(blocks: Sequence[Block]) -> tuple[Block, ...]:
    """Validate that blocks tile [0, dim) in order."""
    cursor = 0
    for b in blocks:
        if b.start != cursor or b.stop < b.start:
            raise InvalidArgumentError(f"block {b.name!r} does not continue the layout at {cursor}")
        cursor = b.stop
    return tuple(blocks)
