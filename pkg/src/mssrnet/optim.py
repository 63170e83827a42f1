"""Adam with bias-corrected moments, and the staged learning-rate schedule."""
from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError

# (learning rate, percent of training completed when the stage ends)
LR_STAGES = ((0.001, 50), (0.0001, 80), (0.00001, 100))


class Adam:
    def __init__(self, params, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr: float) -> None:
        """Update ``params`` in place. Nothing is modified if validation fails."""
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if len(params) != len(self.m) or len(grads) != len(self.m):
            raise ShapeError(f"expected {len(self.m)} parameter/gradient arrays, got {len(params)}/{len(grads)}")
        for i, (p, g, m) in enumerate(zip(params, grads, self.m)):
            if p.shape != m.shape or g.shape != m.shape:
                raise ShapeError(f"parameter {i}: shapes {p.shape}, grad {g.shape}, state {m.shape} differ")
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient in parameter {i}; step aborted")

        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correction1 = 1.0 - b1**self.t
        correction2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            m_hat = m / correction1
            v_hat = v / correction2
            p -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype, copy=False)


def learning_rate_for_epoch(epoch: int, total_epochs: int = 100) -> float:
    """Staged schedule: 1e-3 for the first half, 1e-4 up to 80%, then 1e-5.

    With the default 100 epochs the stages are 1-50, 51-80 and 81-100.
    Other lengths keep the proportions, assigning each epoch by its start.
    """
    if total_epochs < 1:
        raise ValueError(f"total_epochs must be >= 1, got {total_epochs}")
    if not 1 <= epoch <= total_epochs:
        raise ValueError(f"epoch {epoch} outside 1..{total_epochs}")
    for lr, end_percent in LR_STAGES:
        if (epoch - 1) * 100 < end_percent * total_epochs:
            return lr
    return LR_STAGES[-1][0]

