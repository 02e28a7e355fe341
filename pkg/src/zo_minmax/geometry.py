"""Feasible sets with exact Euclidean projections.

Every set here is convex and compact.  Points are plain 1-D float64 numpy
arrays; all operations return fresh arrays and never mutate their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "FeasibleSet",
    "Box",
    "Ball",
    "CappedSoc",
    "Product",
    "as_vector",
    "project",
    "diameter",
    "contains",
]


def as_vector(z, dim: int | None = None) -> np.ndarray:
    """Copy ``z`` into a finite 1-D float64 array, optionally checking its length."""
    arr = np.array(z, dtype=np.float64).reshape(-1)
    if arr.size < 1:
        raise InvalidArgumentError("vectors must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("vector entries must be finite")
    if dim is not None and arr.size != dim:
        raise InvalidArgumentError(f"expected a vector of dimension {dim}, got {arr.size}")
    return arr


class FeasibleSet:
    """Base class; subclasses implement the four primitive operations."""

    dim: int

    def project(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    def violation(self, z: np.ndarray) -> float:
        """Largest amount by which ``z`` breaks a defining inequality (<= 0 if feasible)."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` feasible points (not necessarily uniformly), shape (size, dim)."""
        raise NotImplementedError

    def contains(self, z, tol: float = 0.0) -> bool:
        z = self._check(z)
        return bool(self.violation(z) <= tol)

    def _check(self, z) -> np.ndarray:
        arr = np.asarray(z, dtype=np.float64).reshape(-1)
        if arr.size != self.dim:
            raise InvalidArgumentError(
                f"{type(self).__name__} has dimension {self.dim}, got a vector of size {arr.size}"
            )
        if not np.isfinite(arr).all():
            raise InvalidArgumentError("vector entries must be finite")
        return arr


@dataclass(frozen=True, eq=False)
class Box(FeasibleSet):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = as_vector(self.lo)
        hi = as_vector(self.hi, lo.size)
        if np.any(lo > hi):
            raise InvalidArgumentError("Box requires lo <= hi componentwise")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def project(self, z):
        return np.clip(self._check(z), self.lo, self.hi)

    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    def violation(self, z):
        return float(max(np.max(self.lo - z), np.max(z - self.hi)))

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size=(size, self.dim))


@dataclass(frozen=True, eq=False)
class Ball(FeasibleSet):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = as_vector(self.center)
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidArgumentError("Ball radius must be positive and finite")
        center.flags.writeable = False
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size

    def project(self, z):
        offset = self._check(z) - self.center
        norm = np.linalg.norm(offset)
        if norm <= self.radius:
            return self.center + offset
        return self.center + offset * (self.radius / norm)

    def diameter(self):
        return 2.0 * self.radius

    def violation(self, z):
        return float(np.linalg.norm(z - self.center) - self.radius)

    def sample(self, rng, size):
        g = rng.standard_normal((size, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.uniform(size=(size, 1)) ** (1.0 / self.dim)
        return self.center + r * g


@dataclass(frozen=True, eq=False)
class CappedSoc(FeasibleSet):
    """{(w, a) : ||w||_2 <= scale * a, 0 <= a <= alpha_max}, with ``a`` the last coordinate.

    ``cone_dim`` is the length of the ``w`` block.
    """

    cone_dim: int
    scale: float
    alpha_max: float

    def __post_init__(self):
        if self.cone_dim < 1:
            raise InvalidArgumentError("CappedSoc needs a cone block of dimension >= 1")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise InvalidArgumentError("CappedSoc scale must be positive and finite")
        if not (self.alpha_max > 0 and math.isfinite(self.alpha_max)):
            raise InvalidArgumentError("CappedSoc alpha_max must be positive and finite")
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "alpha_max", float(self.alpha_max))

    @property
    def dim(self) -> int:
        return self.cone_dim + 1

    def project(self, z):
        z = self._check(z)
        # the cone step is positively homogeneous, so run it on z / c to keep norms finite
        c = max(1.0, float(np.max(np.abs(z))))
        w, a = z[:-1] / c, z[-1] / c
        s = self.scale
        norm_w = float(np.linalg.norm(w))
        if norm_w <= s * a:
            pw, pa = w.copy(), a
        elif s * norm_w <= -a:
            # inside the polar cone
            pw, pa = np.zeros_like(w), 0.0
        else:
            t = (s * norm_w + a) / (1.0 + s * s)
            pw, pa = (s * t / norm_w) * w, t
        if pa > self.alpha_max / c:
            # optimum sits on the cap face; project w onto its disk
            limit = s * self.alpha_max
            pw = c * w if norm_w * c <= limit else w * (limit / norm_w)
            return np.append(pw, self.alpha_max)
        return np.append(c * pw, c * pa)

    def diameter(self):
        # rim-to-rim across the cap vs. apex-to-rim
        return self.alpha_max * max(2.0 * self.scale, math.hypot(1.0, self.scale))

    def violation(self, z):
        w, a = z[:-1], z[-1]
        return float(max(np.linalg.norm(w) - self.scale * a, -a, a - self.alpha_max))

    def sample(self, rng, size):
        a = rng.uniform(0.0, self.alpha_max, size=size)
        g = rng.standard_normal((size, self.cone_dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.scale * a * rng.uniform(size=size) ** (1.0 / self.cone_dim)
        return np.column_stack([g * r[:, None], a])


class Product(FeasibleSet):
    """Cartesian product; ``blocks`` are (slice, set) pairs partitioning range(dim)."""

    def __init__(self, blocks: Sequence[tuple[slice, FeasibleSet]]):
        normalized = []
        cursor = 0
        for sl, part in sorted(blocks, key=lambda b: b[0].start or 0):
            start, stop = sl.start or 0, sl.stop
            if sl.step not in (None, 1):
                raise InvalidArgumentError("Product blocks must be contiguous slices")
            if start != cursor:
                raise InvalidArgumentError(
                    f"Product blocks must partition the coordinates (gap or overlap at {cursor})"
                )
            if stop - start != part.dim:
                raise InvalidArgumentError(
                    f"block {start}:{stop} has width {stop - start} but its set has dimension {part.dim}"
                )
            normalized.append((slice(start, stop), part))
            cursor = stop
        if not normalized:
            raise InvalidArgumentError("Product needs at least one block")
        self.blocks = tuple(normalized)
        self.dim = cursor

    @classmethod
    def of(cls, *parts: FeasibleSet) -> "Product":
        """Stack sets in order."""
        blocks, cursor = [], 0
        for part in parts:
            blocks.append((slice(cursor, cursor + part.dim), part))
            cursor += part.dim
        return cls(blocks)

    def project(self, z):
        z = self._check(z)
        return np.concatenate([part.project(z[sl]) for sl, part in self.blocks])

    def diameter(self):
        return math.sqrt(sum(part.diameter() ** 2 for _, part in self.blocks))

    def violation(self, z):
        return max(part.violation(z[sl]) for sl, part in self.blocks)

    def sample(self, rng, size):
        return np.hstack([part.sample(rng, size) for _, part in self.blocks])


def project(feasible: FeasibleSet, z) -> np.ndarray:
    return feasible.project(z)


def diameter(feasible: FeasibleSet) -> float:
    return feasible.diameter()


def contains(feasible: FeasibleSet, z, tol: float = 0.0) -> bool:
    return feasible.contains(z, tol)
