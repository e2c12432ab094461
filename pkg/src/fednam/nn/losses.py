"""Classification losses: sigmoid and softmax cross-entropy with analytic gradients."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatchError
from .layers import LOGIT_CLAMP, sigmoid, softmax

BINARY = "binary"
MULTICLASS = "multiclass"


def loss_and_grad(logits: np.ndarray, target: int, task: str) -> tuple[float, np.ndarray]:
    """Per-example cross-entropy loss and dLoss/dLogits.

    Binary expects a single logit and target in {0, 1}; the gradient is
    sigmoid(z) - y. Multiclass expects C logits and target in {0..C-1}; the
    gradient is softmax(z) - onehot(y).
    """
    z = np.atleast_1d(np.asarray(logits, dtype=np.float64))
    if task == BINARY:
        if z.shape != (1,):
            raise ShapeMismatchError(f"binary task expects 1 logit, got shape {z.shape}")
        if target not in (0, 1):
            raise ValueError(f"binary target must be 0 or 1, got {target!r}")
        zc = np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP)
        loss = float(np.logaddexp(0.0, zc[0]) - target * zc[0])
        grad = sigmoid(zc) - target
        return loss, grad
    if task == MULTICLASS:
        n_classes = z.shape[0]
        if n_classes < 2:
            raise ShapeMismatchError("multiclass task expects at least 2 logits")
        if not 0 <= int(target) < n_classes:
            raise ValueError(f"target {target!r} out of range for {n_classes} classes")
        zc = np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP)
        shifted = zc - zc.max()
        lse = np.log(np.exp(shifted).sum()) + zc.max()
        loss = float(lse - zc[int(target)])
        grad = softmax(zc)
        grad[int(target)] -= 1.0
        return loss, grad
    raise ValueError(f"unknown task {task!r}")


def batch_loss_and_grad(logits: np.ndarray, targets: np.ndarray, task: str) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over a batch; gradient has the batch mean folded in."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets)
    if z.ndim != 2 or z.shape[0] != y.shape[0]:
        raise ShapeMismatchError(f"logits {z.shape} and targets {y.shape} do not align")
    n = z.shape[0]
    zc = np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP)
    if task == BINARY:
        if z.shape[1] != 1:
            raise ShapeMismatchError(f"binary task expects 1 logit column, got {z.shape[1]}")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("binary targets must be 0 or 1")
        yf = y.astype(np.float64)[:, None]
        losses = np.logaddexp(0.0, zc) - yf * zc
        grad = (sigmoid(zc) - yf) / n
        return float(losses.mean()), grad
    if task == MULTICLASS:
        c = z.shape[1]
        if ((y < 0) | (y >= c)).any():
            raise ValueError(f"multiclass targets must lie in [0, {c})")
        shifted = zc - zc.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1)) + zc.max(axis=1)
        losses = lse - zc[np.arange(n), y]
        grad = softmax(zc)
        grad[np.arange(n), y] -= 1.0
        return float(losses.mean()), grad / n
    raise ValueError(f"unknown task {task!r}")
