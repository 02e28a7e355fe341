"""Small analytic saddle problems used for testing and demos."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .geometry import Ball, Box, FeasibleSet, Product
from .oracle import Block, FiniteSumOracle, check_blocks

__all__ = ["FunctionOracle", "QuadraticOracle", "BilinearToy", "make_bilinear_toy"]


class FunctionOracle(FiniteSumOracle):
    """Oracle from plain callables ``f_i(u)`` and optional gradients ``g_i(u)``."""

    def __init__(
        self,
        components: Sequence[Callable[[np.ndarray], float]],
        blocks: Sequence[Block],
        gradients: Sequence[Callable[[np.ndarray], np.ndarray]] | None = None,
    ):
        self.components = list(components)
        self.gradients = list(gradients) if gradients is not None else None
        self.n = len(self.components)
        self.blocks = check_blocks(blocks)

    def eval_component(self, i, u):
        return float(self.components[i](u))

    def component_gradient(self, i, u):
        if self.gradients is None:
            return super().component_gradient(i, u)
        return np.asarray(self.gradients[i](u), dtype=np.float64)


def min_max_blocks(dx: int, dy: int, analytic: bool = False) -> tuple[Block, Block]:
    return (
        Block("x", 0, dx, maximize=False, analytic=analytic),
        Block("y", dx, dx + dy, maximize=True, analytic=analytic),
    )


class QuadraticOracle(FiniteSumOracle):
    """L_i(u) = u^T A_i u + b_i^T u (symmetric A_i), a pure minimisation test bed."""

    def __init__(self, A: np.ndarray, b: np.ndarray, analytic: bool = False):
        A = np.asarray(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if A.ndim == 2:
            A, b = A[None], b[None]
        self.A = 0.5 * (A + np.transpose(A, (0, 2, 1)))
        self.b = b
        self.n, d, _ = self.A.shape
        self.blocks = (Block("u", 0, d, analytic=analytic),)

    def eval_component(self, i, u):
        return float(u @ self.A[i] @ u + self.b[i] @ u)

    def eval_component_batch(self, i, points):
        return np.einsum("kj,jl,kl->k", points, self.A[i], points) + points @ self.b[i]

    def component_gradient(self, i, u):
        return 2.0 * self.A[i] @ u + self.b[i]

    def smoothness(self) -> float:
        return float(max(2.0 * np.max(np.abs(np.linalg.eigvalsh(a))) for a in self.A))


class BilinearToy(FiniteSumOracle):
    """L_i(x, y) = x^T A_i y + b_i^T x + c_i^T y on a product of balls.

    The linear terms keep the saddle on the ball boundaries; with an interior
    saddle the gap of a bilinear game vanishes identically.
    """

    def __init__(self, A, b, c, radius: float = 1.0):
        self.A = np.asarray(A, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        self.c = np.asarray(c, dtype=np.float64)
        self.n, self.dx, self.dy = self.A.shape
        self.radius = float(radius)
        self.blocks = min_max_blocks(self.dx, self.dy, analytic=True)
        self._A_mean = self.A.mean(axis=0)
        self._b_mean = self.b.mean(axis=0)
        self._c_mean = self.c.mean(axis=0)

    @property
    def feasible(self) -> FeasibleSet:
        return Product.of(Ball(np.zeros(self.dx), self.radius), Ball(np.zeros(self.dy), self.radius))

    def _split(self, u):
        return u[: self.dx], u[self.dx :]

    def eval_component(self, i, u):
        x, y = self._split(u)
        return float(x @ self.A[i] @ y + self.b[i] @ x + self.c[i] @ y)

    def eval_component_batch(self, i, points):
        x, y = points[:, : self.dx], points[:, self.dx :]
        return np.einsum("kj,jl,kl->k", x, self.A[i], y) + x @ self.b[i] + y @ self.c[i]

    def component_gradient(self, i, u):
        x, y = self._split(u)
        return np.concatenate([self.A[i] @ y + self.b[i], self.A[i].T @ x + self.c[i]])

    def loss(self, u):
        x, y = self._split(u)
        return float(x @ self._A_mean @ y + self._b_mean @ x + self._c_mean @ y)

    def gradient(self, u):
        x, y = self._split(u)
        return np.concatenate([self._A_mean @ y + self._b_mean, self._A_mean.T @ x + self._c_mean])

    def smoothness(self) -> float:
        return float(max(np.linalg.norm(a, 2) for a in self.A))


def make_bilinear_toy(n: int = 8, d: int = 4, seed: int = 0, shift: float = 2.0) -> BilinearToy:
    """Random bilinear finite sum in total dimension ``d`` (split evenly between players).

    ``shift`` scales the shared linear terms relative to the unit-spectral
    coupling matrices; larger values push the saddle further onto the
    sphere boundaries.
    """
    if d < 2:
        raise InvalidArgumentError("bilinear toy needs d >= 2")
    rng = np.random.default_rng(seed)
    dx = d // 2
    dy = d - dx
    A = rng.standard_normal((n, dx, dy)) / np.sqrt(max(dx, dy))
    bx = rng.standard_normal(dx)
    cy = rng.standard_normal(dy)
    b = shift * bx / np.linalg.norm(bx) + 0.3 * rng.standard_normal((n, dx))
    c = shift * cy / np.linalg.norm(cy) + 0.3 * rng.standard_normal((n, dy))
    return BilinearToy(A, b, c)


def box_2d() -> Box:
    return Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
