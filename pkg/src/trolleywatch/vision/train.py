"""Training: softmax cross-entropy, hand-rolled backprop, mini-batch SGD.

Gradients flow backwards through the linear stage, the pool stages (the
gradient is routed to each window's argmax), the ReLU gates and the conv
kernels.  ``compute_gradients`` is the single source of truth; the
acceptance suite checks every parameter against central finite
differences.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import TrainingDivergedError
from .network import ConvNetwork, ConvStage, LinearStage, PoolStage

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(scores: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy loss and its gradient w.r.t. the scores."""
    n = scores.shape[0]
    probs = softmax(scores)
    eps = 1e-12  # guards log(0) for a saturated wrong answer
    loss = float(-np.log(probs[np.arange(n), labels] + eps).mean())
    dscores = probs.copy()
    dscores[np.arange(n), labels] -= 1.0
    return loss, dscores / n


def _pool_backward(dout: np.ndarray, in_shape: tuple, idx: np.ndarray, s: int) -> np.ndarray:
    n, c, h, w = in_shape
    ho, wo = h // s, w // s
    dwin = np.zeros((n, c, ho, wo, s * s))
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    dcrop = dwin.reshape(n, c, ho, wo, s, s).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros(in_shape)
    dx[:, :, :ho * s, :wo * s] = dcrop.reshape(n, c, ho * s, wo * s)
    return dx


def _conv_backward(dpre: np.ndarray, x: np.ndarray,
                   kernels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Given d(loss)/d(pre-activation), return (dx, dkernels, dbias)."""
    kh, kw = kernels.shape[2], kernels.shape[3]
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))
    dkernels = np.einsum("ncijuv,noij->ocuv", windows, dpre, optimize=True)
    dbias = dpre.sum(axis=(0, 2, 3))
    # dx is the full correlation of dpre with the kernels flipped in both
    # spatial axes, i.e. a true convolution.
    padded = np.pad(dpre, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    dwin = sliding_window_view(padded, (kh, kw), axis=(2, 3))
    flipped = kernels[:, :, ::-1, ::-1]
    dx = np.einsum("noijuv,ocuv->ncij", dwin, flipped, optimize=True)
    return dx, dkernels, dbias


def compute_gradients(net: ConvNetwork, batch: np.ndarray,
                      labels: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Loss and gradients aligned with ``net.parameters()`` order."""
    scores, caches = net.forward_with_cache(batch)
    loss, grad = cross_entropy(scores, labels)

    grads_rev: list[np.ndarray] = []
    for stage, cache in zip(reversed(net.stages), reversed(caches)):
        if isinstance(stage, LinearStage):
            _, flat, in_shape = cache
            dw = grad.T @ flat
            db = grad.sum(axis=0)
            grad = (grad @ stage.weight).reshape(in_shape)
            grads_rev.extend([db, dw])
        elif isinstance(stage, PoolStage):
            _, in_shape, idx = cache
            grad = _pool_backward(grad, in_shape, idx, stage.size)
        elif isinstance(stage, ConvStage):
            _, x, pre = cache
            dpre = grad * (pre > 0.0)  # ReLU gate
            grad, dk, db = _conv_backward(dpre, x, stage.kernels)
            grads_rev.extend([db, dk])
    return loss, list(reversed(grads_rev))


def apply_sgd(net: ConvNetwork, grads: list[np.ndarray], lr: float) -> None:
    for param, grad in zip(net.parameters(), grads):
        param -= lr * grad


def train(net: ConvNetwork, patches: np.ndarray, labels: np.ndarray,
          cfg: TrainConfig = TrainConfig()) -> tuple[ConvNetwork, list[float]]:
    """Mini-batch SGD over normalized patches; returns (net, per-epoch losses).

    ``patches`` is (N, C, H, W) float64 (use ``normalize_patches`` on raw
    uint8 data), ``labels`` an int vector of class indices.  The network
    is updated in place and also returned.
    """
    if patches.shape[0] != labels.shape[0]:
        raise ValueError("patches and labels disagree on sample count")
    rng = np.random.default_rng(cfg.seed)
    n = patches.shape[0]
    trace: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses: list[float] = []
        for start in range(0, n, cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            loss, grads = compute_gradients(net, patches[sel], labels[sel])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}")
            apply_sgd(net, grads, cfg.learning_rate)
            losses.append(loss)
        trace.append(float(np.mean(losses)) if losses else 0.0)
        logger.debug("epoch %d mean loss %.4f", epoch, trace[-1])
    return net, trace


def normalize_patches(patches: np.ndarray) -> np.ndarray:
    """uint8 (N, H, W) or (N, C, H, W) -> float64 in [0, 1] with channel axis."""
    arr = patches.astype(np.float64) / 255.0
    if arr.ndim == 3:
        arr = arr[:, None, :, :]
    return arr


def predict(net: ConvNetwork, patches: np.ndarray) -> np.ndarray:
    """Class indices for a normalized (N, C, H, W) batch."""
    return np.argmax(net.forward(patches), axis=1)
