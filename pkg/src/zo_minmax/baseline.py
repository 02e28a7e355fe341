"""Non-robust strategic logistic regression baseline.

Minimises (1/n) sum_i phi(m_i(theta)) - (y_i / 2) m_i(theta) with
``m_i(theta) = <x_i, theta> + [y_i = -1] zeta ||theta_mask||^2``, i.e. the
learner knows the quadratic response model and its strength.
"""

from __future__ import annotations

import numpy as np

from .wdrsc import LOGISTIC, GlmLink, QuadraticCost, StrategicDataset

__all__ = ["strategic_logistic_loss", "strategic_logistic_gradient", "train_strategic_logreg"]


def strategic_logistic_loss(dataset: StrategicDataset, theta, zeta, mask=None, link: GlmLink = LOGISTIC) -> float:
    m = QuadraticCost(dataset, zeta, mask).inner_all(np.asarray(theta, dtype=np.float64))
    return float(np.mean(link.phi(m) - 0.5 * dataset.labels * m))


def strategic_logistic_gradient(dataset, theta, zeta, mask=None, link: GlmLink = LOGISTIC) -> np.ndarray:
    model = QuadraticCost(dataset, zeta, mask)
    theta = np.asarray(theta, dtype=np.float64)
    m = model.inner_all(theta)
    coef = link.dphi(m) - 0.5 * dataset.labels
    return coef @ model.inner_gradient_all(theta) / dataset.n


def train_strategic_logreg(
    dataset: StrategicDataset,
    zeta: float,
    mask=None,
    iters: int = 5000,
    step: float | None = None,
    link: GlmLink = LOGISTIC,
) -> np.ndarray:
    """Full-batch gradient descent from theta = 0 with a fixed step 1/l_hat.

    ``l_hat`` bounds the Hessian near the origin:
    beta * lambda_max(X^T X / n) + 2 zeta.
    """
    X = dataset.features
    if step is None:
        l_hat = link.beta * np.linalg.eigvalsh(X.T @ X / dataset.n)[-1] + 2.0 * zeta
        step = 1.0 / l_hat
    theta = np.zeros(dataset.d)
    for _ in range(iters):
        theta = theta - step * strategic_logistic_gradient(dataset, theta, zeta, mask, link)
    return theta
