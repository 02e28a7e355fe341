"""Distributionally robust strategic classification as a finite-sum saddle problem.

Agents with true label -1 move their features to maximise
``<x, theta> - ||x - x_tilde||^2 / (2 zeta)`` over the strategic coordinates;
agents labelled +1 report truthfully.  The learner sees only the reported
features, so the theta-block of the robust objective is query-only while the
alpha and gamma blocks have closed-form partials in terms of the observed
margins ``m_i = <b_i(theta), theta>``.

Layout of ``u``: ``theta`` (d), ``alpha`` (1), ``gamma`` (one entry per
positive example; negative examples carry no gamma since their weight is 0).

Constraint set: ``||theta|| <= alpha / (beta + 1)``, ``0 <= alpha <= alpha_max``,
``|gamma|_inf <= 1``, with ``beta`` the smoothness of the link.  The cap on
alpha keeps the set compact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import InvalidArgumentError, NumericalFailureError, UnsupportedModeError
from .geometry import Box, CappedSoc, FeasibleSet, Product
from .oracle import Block, FiniteSumOracle

__all__ = [
    "StrategicDataset",
    "BestResponseModel",
    "QuadraticCost",
    "CustomResponse",
    "GlmLink",
    "LOGISTIC",
    "WdrscObjective",
    "best_response",
    "response_inner_product",
    "component_loss",
    "exact_gradients",
    "build_objective",
    "quadratic_utility",
    "default_alpha_max",
]


@dataclass(frozen=True, eq=False)
class StrategicDataset:
    features: np.ndarray
    labels: np.ndarray
    strategic_mask: np.ndarray = None  # boolean, length d; defaults to all coordinates
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidArgumentError("features must be a non-empty (n, d) array")
        y = np.array(self.labels, dtype=np.float64).reshape(-1)
        if y.size != X.shape[0]:
            raise InvalidArgumentError(f"{y.size} labels for {X.shape[0]} feature rows")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise InvalidArgumentError("labels must be -1 or +1")
        if self.strategic_mask is None:
            mask = np.ones(X.shape[1], dtype=bool)
        else:
            mask = np.array(self.strategic_mask, dtype=bool).reshape(-1)
            if mask.size != X.shape[1]:
                raise InvalidArgumentError("strategic mask length must equal the feature dimension")
        for arr in (X, y, mask):
            arr.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "strategic_mask", mask)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def positives(self) -> np.ndarray:
        return np.flatnonzero(self.labels > 0)

    def subset(self, idx) -> "StrategicDataset":
        idx = np.asarray(idx, dtype=int)
        return StrategicDataset(self.features[idx], self.labels[idx], self.strategic_mask, self.feature_names)

    def with_mask(self, mask) -> "StrategicDataset":
        return StrategicDataset(self.features, self.labels, mask, self.feature_names)


def mask_from_indices(d: int, indices) -> np.ndarray:
    mask = np.zeros(d, dtype=bool)
    mask[np.asarray(list(indices), dtype=int)] = True
    return mask


class BestResponseModel:
    """Black-box response environment; the solver only ever calls :meth:`respond`."""

    dataset: StrategicDataset
    pure: bool = True

    def respond(self, i: int, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def respond_all(self, theta: np.ndarray) -> np.ndarray:
        return np.array([self.respond(i, theta) for i in range(self.dataset.n)])

    def inner(self, i: int, theta: np.ndarray) -> float:
        return float(self.respond(i, theta) @ theta)

    def inner_all(self, theta: np.ndarray) -> np.ndarray:
        return self.respond_all(theta) @ theta

    def inner_gradient(self, i: int, theta: np.ndarray) -> np.ndarray:
        raise UnsupportedModeError(f"{type(self).__name__} exposes no response derivative")

    def inner_gradient_all(self, theta: np.ndarray) -> np.ndarray:
        return np.array([self.inner_gradient(i, theta) for i in range(self.dataset.n)])


class QuadraticCost(BestResponseModel):
    """Agents with cost ||x - x_tilde||^2 / (2 zeta) on the masked coordinates.

    Negatives respond with ``x_tilde + zeta * theta`` on the mask; positives
    stay put.
    """

    def __init__(self, dataset: StrategicDataset, zeta: float, mask=None):
        if not zeta > 0:
            raise InvalidArgumentError("zeta must be positive")
        self.dataset = dataset
        self.zeta = float(zeta)
        self.mask = dataset.strategic_mask if mask is None else np.asarray(mask, dtype=bool)
        if self.mask.size != dataset.d:
            raise InvalidArgumentError("mask length must equal the feature dimension")
        self._moves = (dataset.labels < 0).astype(np.float64)

    def respond(self, i, theta):
        x = self.dataset.features[i].copy()
        if self.dataset.labels[i] < 0:
            x[self.mask] += self.zeta * theta[self.mask]
        return x

    def respond_all(self, theta):
        shift = np.where(self.mask, self.zeta * theta, 0.0)
        return self.dataset.features + self._moves[:, None] * shift

    def inner(self, i, theta):
        base = float(self.dataset.features[i] @ theta)
        if self.dataset.labels[i] < 0:
            tm = theta[self.mask]
            base += self.zeta * float(tm @ tm)
        return base

    def inner_all(self, theta):
        tm = theta[self.mask]
        return self.dataset.features @ theta + self._moves * (self.zeta * float(tm @ tm))

    def inner_gradient(self, i, theta):
        g = self.dataset.features[i].copy()
        if self.dataset.labels[i] < 0:
            g[self.mask] += 2.0 * self.zeta * theta[self.mask]
        return g

    def inner_gradient_all(self, theta):
        shift = np.where(self.mask, 2.0 * self.zeta * theta, 0.0)
        return self.dataset.features + self._moves[:, None] * shift


class CustomResponse(BestResponseModel):
    """Wrap an arbitrary response map ``fn(i, theta) -> features``.

    Positives are always returned unmoved, whatever ``fn`` does.
    """

    def __init__(self, dataset: StrategicDataset, fn: Callable[[int, np.ndarray], np.ndarray], pure: bool = True):
        self.dataset = dataset
        self.fn = fn
        self.pure = pure

    def respond(self, i, theta):
        if self.dataset.labels[i] > 0:
            return self.dataset.features[i].copy()
        return np.asarray(self.fn(i, theta), dtype=np.float64)


def best_response(model: BestResponseModel, i: int, theta) -> np.ndarray:
    return model.respond(i, np.asarray(theta, dtype=np.float64))


def quadratic_utility(x, theta, x_tilde, y_tilde, zeta) -> float:
    """Agent utility ((1 - y)/2) <x, theta> - ||x - x_tilde||^2 / (2 zeta)."""
    x = np.asarray(x, dtype=np.float64)
    diff = x - np.asarray(x_tilde, dtype=np.float64)
    return float(0.5 * (1.0 - y_tilde) * (x @ theta) - diff @ diff / (2.0 * zeta))


@dataclass(frozen=True)
class GlmLink:
    name: str
    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    d2phi: Callable[[np.ndarray], np.ndarray]
    beta: float


def _logistic_phi(z):
    # log(1 + e^z) - z/2; logaddexp never overflows
    return np.logaddexp(0.0, z) - 0.5 * z


def _logistic_dphi(z):
    return expit(z) - 0.5


def _logistic_d2phi(z):
    s = expit(z)
    return s * (1.0 - s)


LOGISTIC = GlmLink("logistic", _logistic_phi, _logistic_dphi, _logistic_d2phi, beta=0.25)
LINKS = {"logistic": LOGISTIC}


def default_alpha_max(link: GlmLink, theta_scale: float = 1.0) -> float:
    return 10.0 * (link.beta + 1.0) * theta_scale


class WdrscObjective(FiniteSumOracle):
    """Robust strategic GLM objective split into per-agent components.

    Component i::

        L_i = alpha (delta - kappa)
              + [y_i = +1] (phi(m_i) + gamma_i (m_i - alpha kappa))
              + [y_i = -1] (phi(m_i) + m_i)

    with ``m_i = <b_i(theta), theta>`` read from the response model.
    """

    def __init__(
        self,
        dataset: StrategicDataset,
        model: BestResponseModel,
        link: GlmLink = LOGISTIC,
        delta: float = 0.4,
        kappa: float = 0.5,
        alpha_max: float | None = None,
    ):
        if not delta > 0 or not kappa > 0:
            raise InvalidArgumentError("delta and kappa must be positive")
        if alpha_max is None:
            alpha_max = default_alpha_max(link)
        if not alpha_max > 0:
            raise InvalidArgumentError("alpha_max must be positive")
        pos = dataset.positives
        if pos.size == 0:
            raise InvalidArgumentError("empty max block: dataset has no +1 labels, use a pure minimisation solver")
        self.dataset = dataset
        self.model = model
        self.link = link
        self.delta = float(delta)
        self.kappa = float(kappa)
        self.alpha_max = float(alpha_max)
        self.n = dataset.n
        d = dataset.d
        self.d = d
        self.n_pos = pos.size
        self.gamma_pos = np.full(self.n, -1, dtype=int)
        self.gamma_pos[pos] = np.arange(pos.size)
        self._is_pos = dataset.labels > 0
        self._pos_idx = pos
        self.blocks = (
            Block("theta", 0, d),
            Block("alpha", d, d + 1, analytic=True),
            Block("gamma", d + 1, d + 1 + pos.size, maximize=True, analytic=True),
        )

    @property
    def feasible(self) -> FeasibleSet:
        return Product.of(
            CappedSoc(self.d, 1.0 / (self.link.beta + 1.0), self.alpha_max),
            Box(-np.ones(self.n_pos), np.ones(self.n_pos)),
        )

    def split(self, u):
        d = self.d
        return u[:d], float(u[d]), u[d + 1 :]

    def join(self, theta, alpha, gamma) -> np.ndarray:
        return np.concatenate([np.asarray(theta, dtype=np.float64), [alpha], np.asarray(gamma, dtype=np.float64)])

    def _gamma_of(self, i, gamma):
        k = self.gamma_pos[i]
        return gamma[k] if k >= 0 else 0.0

    def eval_component(self, i, u):
        theta, alpha, gamma = self.split(u)
        m = self.model.inner(i, theta)
        value = alpha * (self.delta - self.kappa) + float(self.link.phi(m))
        if self._is_pos[i]:
            value += self._gamma_of(i, gamma) * (m - alpha * self.kappa)
        else:
            value += m
        if not np.isfinite(value):
            raise NumericalFailureError(f"component {i} is not finite", index=i)
        return float(value)

    def component_values(self, u) -> np.ndarray:
        theta, alpha, gamma = self.split(u)
        m = self.model.inner_all(theta)
        values = alpha * (self.delta - self.kappa) + self.link.phi(m)
        g_full = np.zeros(self.n)
        g_full[self._pos_idx] = gamma
        return values + np.where(self._is_pos, g_full * (m - alpha * self.kappa), m)

    def loss(self, u):
        return float(np.mean(self.component_values(u)))

    def partial_gradient(self, block, i, u):
        theta, alpha, gamma = self.split(u)
        if block.name == "alpha":
            g = self.delta - self.kappa
            if self._is_pos[i]:
                g -= self._gamma_of(i, gamma) * self.kappa
            return np.array([g])
        if block.name == "gamma":
            g = np.zeros(self.n_pos)
            if self._is_pos[i]:
                g[self.gamma_pos[i]] = self.model.inner(i, theta) - alpha * self.kappa
            return g
        raise UnsupportedModeError(f"block {block.name!r} is query-only")

    def component_gradient(self, i, u):
        theta, alpha, gamma = self.split(u)
        m = self.model.inner(i, theta)
        dm = self.model.inner_gradient(i, theta)
        dphi = float(self.link.dphi(m))
        if self._is_pos[i]:
            g_i = self._gamma_of(i, gamma)
            g_theta = (dphi + g_i) * dm
        else:
            g_theta = (dphi + 1.0) * dm
        return np.concatenate(
            [g_theta, self.partial_gradient(self.blocks[1], i, u), self.partial_gradient(self.blocks[2], i, u)]
        )

    def gradient(self, u):
        theta, alpha, gamma = self.split(u)
        m = self.model.inner_all(theta)
        dm = self.model.inner_gradient_all(theta)
        g_full = np.zeros(self.n)
        g_full[self._pos_idx] = gamma
        coef = self.link.dphi(m) + np.where(self._is_pos, g_full, 1.0)
        g_theta = coef @ dm / self.n
        g_alpha = (self.delta - self.kappa) - self.kappa * gamma.sum() / self.n
        g_gamma = (m[self._pos_idx] - alpha * self.kappa) / self.n
        return np.concatenate([g_theta, [g_alpha], g_gamma])

    def initial_point(self, kind: str = "zero") -> np.ndarray:
        """Named starting points: ``zero`` or ``far`` (alpha at its cap, gamma = +1)."""
        if kind == "zero":
            return np.zeros(self.dim)
        if kind == "far":
            return self.join(np.zeros(self.d), self.alpha_max, np.ones(self.n_pos))
        raise InvalidArgumentError(f"unknown initial point {kind!r}")


def response_inner_product(objective: WdrscObjective, i: int, theta) -> float:
    return objective.model.inner(i, np.asarray(theta, dtype=np.float64))


def component_loss(objective: WdrscObjective, i: int, u) -> float:
    return objective.eval_component(i, np.asarray(u, dtype=np.float64))


def exact_gradients(objective: WdrscObjective, i: int, u):
    """(grad_theta, d/dalpha, grad_gamma) of one component; needs a differentiable model."""
    g = objective.component_gradient(i, np.asarray(u, dtype=np.float64))
    d = objective.d
    return g[:d], float(g[d]), g[d + 1 :]


def build_objective(
    dataset: StrategicDataset,
    model: BestResponseModel,
    link: GlmLink = LOGISTIC,
    delta: float = 0.4,
    kappa: float = 0.5,
    alpha_max: float | None = None,
) -> WdrscObjective:
    return WdrscObjective(dataset, model, link, delta, kappa, alpha_max)
