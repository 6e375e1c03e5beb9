"""Training losses. Values are accumulated in float64; gradients come back
in the dtype of the prediction so they can flow straight into backward()."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError, ShapeError


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch against integer targets.

    Returns (loss, grad) with grad = (softmax - onehot) / batch, computed
    via a shifted log-sum-exp so large logits cannot overflow.
    """
    if logits.ndim != 2:
        raise ShapeError(f"logits must be (batch, classes), got {logits.shape}")
    targets = np.asarray(targets)
    if targets.shape != (logits.shape[0],):
        raise ShapeError("targets must align with the logit batch")
    batch, classes = logits.shape
    if targets.min() < 0 or targets.max() >= classes:
        raise IndexError(f"targets must lie in [0, {classes})")
    z = logits.astype(np.float64)
    z -= z.max(axis=1, keepdims=True)
    expz = np.exp(z)
    denom = expz.sum(axis=1, keepdims=True)
    log_probs = z - np.log(denom)
    loss = float(-log_probs[np.arange(batch), targets].mean())
    if not np.isfinite(loss):
        raise NumericError("cross-entropy produced a non-finite loss")
    softmax = expz / denom
    softmax[np.arange(batch), targets] -= 1.0
    grad = (softmax / batch).astype(logits.dtype)
    return loss, grad


def mse_loss(target: np.ndarray, pred: np.ndarray) -> tuple[float, np.ndarray]:
    """Reconstruction error: mean over the batch of the squared L2 norm of
    the per-sample residual (sum over all remaining axes).

    Returns (loss, grad w.r.t. pred) with grad = 2 (pred - target) / batch.
    """
    if target.shape != pred.shape:
        raise ShapeError(f"shape mismatch {target.shape} vs {pred.shape}")
    batch = pred.shape[0]
    diff = pred.astype(np.float64) - target.astype(np.float64)
    loss = float((diff * diff).sum() / batch)
    if not np.isfinite(loss):
        raise NumericError("mse produced a non-finite loss")
    grad = (2.0 * diff / batch).astype(pred.dtype)
    return loss, grad


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax in float64 for confidence readouts."""
    z = logits.astype(np.float64)
    z -= z.max(axis=-1, keepdims=True)
    expz = np.exp(z)
    return expz / expz.sum(axis=-1, keepdims=True)
