"""Supervised and adversarially augmented objectives with closed-form gradients.

Conventions: losses are sums over samples (not means), the ReLU derivative
uses the closed indicator ``1{z >= 0}``, and the augmented objective is
``L_aug = L_sup - L_adv`` with ``L_adv = sum_p g(z_p)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SeededRng, active, relu
from .network import DiscriminatorNet, GeneratorNet, forward_generator


@dataclass(frozen=True)
class LossBreakdown:
    supervised: float
    adversarial: float
    augmented: float


@dataclass(frozen=True)
class GeneratorGradients:
    dU: np.ndarray
    dV: np.ndarray

    def max_abs(self, include_v: bool = True) -> float:
        m = float(np.max(np.abs(self.dU))) if self.dU.size else 0.0
        if include_v and self.dV.size:
            m = max(m, float(np.max(np.abs(self.dV))))
        return m


@dataclass(frozen=True)
class CriticGradients:
    dW: np.ndarray
    da: np.ndarray


def _xy(data, y=None):
    if y is None:
        return data.train_x, data.train_y
    return np.asarray(data, dtype=np.float64), np.asarray(y, dtype=np.float64)


def supervised_loss(net: GeneratorNet, data, y=None) -> float:
    """``0.5 * sum_p ||f(x_p) - y_p||^2``. Accepts a Dataset or ``(x, y)`` arrays."""
    x, y = _xy(data, y)
    r = forward_generator(net, x) - y
    return 0.5 * float(np.sum(r * r))


def adversarial_term(net: GeneratorNet, disc: DiscriminatorNet, data) -> float:
    """``sum_p g(f(x_p))``.

    With equal generator and critic widths this is exactly
    ``(1/(m sqrt(d_out))) sum_p a^T relu(W V relu(U x_p))``: relu is positively
    homogeneous, so the output scale of the generator can be moved out of
    the critic.
    """
    x = data.train_x if hasattr(data, "train_x") else np.asarray(data, dtype=np.float64)
    z = forward_generator(net, x)
    return float(np.sum(relu(z @ disc.W.T) @ disc.a) / np.sqrt(disc.m))


def loss_breakdown(net: GeneratorNet, disc: DiscriminatorNet | None, data, y=None) -> LossBreakdown:
    x, y = _xy(data, y)
    sup = supervised_loss(net, x, y)
    adv = adversarial_term(net, disc, x) if disc is not None else 0.0
    return LossBreakdown(sup, adv, sup - adv)


def critic_input_gradient(disc: DiscriminatorNet, y) -> np.ndarray:
    """``grad_y g = (1/sqrt(m)) sum_r a_r 1{w_r . y >= 0} w_r`` for each row of ``y``."""
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    gate = (y @ disc.W.T >= 0.0).astype(np.float64)
    return gate @ (disc.W * disc.a[:, None]) / np.sqrt(disc.m)


def _backprop(net: GeneratorNet, x: np.ndarray, pre: np.ndarray, dz: np.ndarray, need_v: bool = True) -> GeneratorGradients:
    """Chain ``dL/dz`` (rows per sample) through the generator at preactivations ``pre``."""
    s = net.scale
    mask = pre >= 0.0
    dV = s * (dz.T @ np.where(mask, pre, 0.0)) if need_v else np.zeros_like(net.V)
    dpre = dz @ net.V
    dpre *= mask
    dU = s * (dpre.T @ x)
    return GeneratorGradients(dU, dV)


def generator_gradients(
    net: GeneratorNet, disc: DiscriminatorNet | None, data, y=None, mode: str = "supervised", need_v: bool = True
) -> GeneratorGradients:
    """Exact gradients of ``L_sup`` (``mode='supervised'``) or ``L_aug`` (``'augmented'``).

    ``need_v=False`` skips the output-layer gradient (returned as zeros).
    """
    x, y = _xy(data, y)
    pre = x @ net.U.T
    z = net.scale * (np.where(pre >= 0.0, pre, 0.0) @ net.V.T)
    dz = z - y
    if mode == "augmented":
        if disc is None:
            raise ValueError("augmented mode needs a discriminator")
        dz = dz - critic_input_gradient(disc, z)
    elif mode != "supervised":
        raise ValueError(f"unknown gradient mode {mode!r}")
    return _backprop(net, x, pre, dz, need_v)


def interpolates(real: np.ndarray, fake: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return weights[:, None] * real + (1.0 - weights[:, None]) * fake


def _check_pairs(real, fake):
    real = np.atleast_2d(np.asarray(real, dtype=np.float64))
    fake = np.atleast_2d(np.asarray(fake, dtype=np.float64))
    if real.shape != fake.shape:
        raise ValueError(f"real/fake count mismatch: {real.shape} vs {fake.shape}")
    return real, fake


def _penalty_weights(n, gp_coeff, rng, weights):
    if gp_coeff == 0.0:
        return None
    if weights is None:
        if rng is None:
            raise ValueError("gradient penalty needs an rng or explicit interpolation weights")
        weights = rng.uniform(0.0, 1.0, size=n)
    return np.asarray(weights, dtype=np.float64)


def critic_loss(
    disc: DiscriminatorNet,
    real_labels,
    fake_preds,
    gp_coeff: float = 0.0,
    rng: SeededRng | None = None,
    weights=None,
) -> float:
    """``mean g(fake) - mean g(real) + gp * mean (||grad_y g(y_hat)|| - 1)^2``."""
    real, fake = _check_pairs(real_labels, fake_preds)
    g = lambda y: relu(y @ disc.W.T) @ disc.a / np.sqrt(disc.m)  # noqa: E731
    loss = float(np.mean(g(fake)) - np.mean(g(real)))
    weights = _penalty_weights(real.shape[0], gp_coeff, rng, weights)
    if weights is not None:
        G = critic_input_gradient(disc, interpolates(real, fake, weights))
        loss += gp_coeff * float(np.mean((np.linalg.norm(G, axis=1) - 1.0) ** 2))
    return loss


def discriminator_gradients(
    disc: DiscriminatorNet,
    real_labels,
    fake_preds,
    gp_coeff: float = 0.0,
    rng: SeededRng | None = None,
    weights=None,
) -> CriticGradients:
    """Gradients of :func:`critic_loss` with respect to ``W`` and ``a``.

    Interpolation weights for the penalty are one uniform draw per real/fake
    pair, taken from ``rng`` unless given explicitly.
    """
    real, fake = _check_pairs(real_labels, fake_preds)
    n = real.shape[0]
    c = 1.0 / np.sqrt(disc.m)

    def wass(y):
        pre = y @ disc.W.T
        mask = pre >= 0.0
        dW = (mask.T.astype(np.float64) @ y) * disc.a[:, None]
        da = np.where(mask, pre, 0.0).sum(axis=0)
        return dW, da

    dW_f, da_f = wass(fake)
    dW_r, da_r = wass(real)
    dW, da = c * (dW_f - dW_r) / n, c * (da_f - da_r) / n

    weights = _penalty_weights(n, gp_coeff, rng, weights)
    if weights is not None:
        yh = interpolates(real, fake, weights)
        gate = (yh @ disc.W.T >= 0.0).astype(np.float64)  # (n, m)
        G = (gate @ (disc.W * disc.a[:, None])) * c  # (n, d_out)
        norm = np.linalg.norm(G, axis=1)
        coef = np.where(norm > 0.0, 2.0 * (norm - 1.0) / np.where(norm > 0.0, norm, 1.0), 0.0)
        cG = (gp_coeff * coef / n)[:, None] * G
        # d/dw_r: coef * c * a_r 1_r G ; d/da_r: coef * c * 1_r (w_r . G)
        dW = dW + c * (gate.T @ cG) * disc.a[:, None]
        da = da + c * np.einsum("pr,pr->r", gate, cG @ disc.W.T)
    return CriticGradients(dW, da)


def project_row_norm(W, L: float) -> np.ndarray:
    """Radially rescale every row with norm above ``L`` onto the L-sphere."""
    if L <= 0:
        raise ValueError("L must be positive")
    W = np.array(W, dtype=np.float64)
    norms = np.linalg.norm(W, axis=1)
    over = norms > L
    W[over] *= (L / norms[over])[:, None]
    return W
