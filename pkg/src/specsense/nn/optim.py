"""Adam with coupled L2 weight decay.

One optimiser step covers every trainable array in the model; the step
counter t lives on the model and increments exactly once per call, so the
bias-correction terms are shared by all parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericError


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("learning rate must be non-negative")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be non-negative")


def adam_update(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: int,
    cfg: AdamConfig,
) -> None:
    """In-place Adam step for one array; t is the post-increment counter.

    Decay is coupled (added to the gradient), correction uses 1 - beta^t,
    and eps sits outside the square root: p -= lr * m_hat / (sqrt(v_hat) + eps).
    """
    if not np.isfinite(grad).all():
        raise NumericError("non-finite gradient passed to adam_update")
    g = grad
    if cfg.weight_decay != 0.0:
        g = g + param * param.dtype.type(cfg.weight_decay)
    b1 = param.dtype.type(cfg.beta1)
    b2 = param.dtype.type(cfg.beta2)
    m *= b1
    m += (1 - b1) * g
    v *= b2
    v += (1 - b2) * (g * g)
    corr1 = 1.0 - cfg.beta1**t
    corr2 = 1.0 - cfg.beta2**t
    m_hat = m / param.dtype.type(corr1)
    v_hat = v / param.dtype.type(corr2)
    param -= param.dtype.type(cfg.lr) * m_hat / (np.sqrt(v_hat) + param.dtype.type(cfg.eps))
