"""Histogram-of-oriented-gradients features and the linear classifier on top.

Exact recipe (the reference implementation in the tests follows this
paragraph, not the code):  convert to float64; take [-1, 0, 1] central
differences per axis with edge rows/columns replicated; magnitude is the
Euclidean norm, orientation is atan2 folded into [0, 180) degrees.  Each
8x8 cell accumulates a 9-bin histogram where every pixel's magnitude is
split linearly between the two bin centers nearest its orientation (bin
i has center (i + 0.5) * 20 degrees, wrapping at 180).  Cells are grouped
into 2x2 blocks with stride one cell; each block vector v is normalized
to v / sqrt(sum(v^2) + eps) with eps = 1e-6, and the normalized blocks
are concatenated row-major.  Patches smaller than one cell are rejected;
dimensions must be multiples of the cell size (callers resize first, see
``resize_nearest``).  A patch with fewer cells than a block is treated
as a single block.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .network import (FEATURES_HOG, LABELS, ConvNetwork, LinearStage,
                      load_weights, save_weights)

CELL = 8
BINS = 9
BLOCK = 2
EPS = 1e-6


@lru_cache(maxsize=512)
def _nearest_indices(in_size: int, out_size: int) -> np.ndarray:
    idx = (np.arange(out_size) * (in_size / out_size)).astype(np.intp)
    idx.setflags(write=False)
    return idx


def resize_nearest(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbour resize of a 2-D array."""
    h, w = img.shape
    rows = _nearest_indices(h, out_h)
    cols = _nearest_indices(w, out_w)
    return img[rows[:, None], cols[None, :]]


def _gradients(patch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.pad(patch.astype(np.float64), 1, mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return gx, gy


def hog(patch: np.ndarray, cell: int = CELL, bins: int = BINS,
        block: int = BLOCK, eps: float = EPS) -> np.ndarray:
    """Feature vector for one grayscale patch."""
    if patch.ndim != 2:
        raise ValueError(f"patch must be 2-D, got shape {patch.shape}")
    h, w = patch.shape
    if h < cell or w < cell:
        raise ValueError(f"patch {h}x{w} smaller than one {cell}x{cell} cell")
    if h % cell or w % cell:
        raise ValueError(f"patch dims must be multiples of {cell}, got {h}x{w}")

    gx, gy = _gradients(patch)
    mag = np.hypot(gx, gy)
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0

    bin_width = 180.0 / bins
    pos = ang / bin_width - 0.5
    lo = np.floor(pos).astype(np.intp)
    frac = pos - lo
    lo_bin = lo % bins
    hi_bin = (lo + 1) % bins

    cy = (np.arange(h) // cell)[:, None].repeat(w, axis=1)
    cx = (np.arange(w) // cell)[None, :].repeat(h, axis=0)
    ch, cw = h // cell, w // cell
    cells = np.zeros((ch, cw, bins))
    np.add.at(cells, (cy.ravel(), cx.ravel(), lo_bin.ravel()),
              ((1.0 - frac) * mag).ravel())
    np.add.at(cells, (cy.ravel(), cx.ravel(), hi_bin.ravel()),
              (frac * mag).ravel())

    if ch < block or cw < block:
        v = cells.ravel()
        return v / np.sqrt(v @ v + eps)

    parts: list[np.ndarray] = []
    for by in range(ch - block + 1):
        for bx in range(cw - block + 1):
            v = cells[by:by + block, bx:bx + block].ravel()
            parts.append(v / np.sqrt(v @ v + eps))
    return np.concatenate(parts)


def feature_length(patch: int, cell: int = CELL, bins: int = BINS,
                   block: int = BLOCK) -> int:
    ch = cw = patch // cell
    if ch < block:
        return ch * cw * bins
    return (ch - block + 1) * (cw - block + 1) * block * block * bins


@dataclass
class HogLinearClassifier:
    """Alternate detection head: HOG features into a linear softmax.

    Exposes the same predict_scores interface as the conv path so the
    pipeline can swap between them; benchmarked side by side by
    ``trolleywatch evaluate`` and the tests.
    """

    stage: LinearStage
    patch: int = 16

    @classmethod
    def create(cls, seed: int = 0, patch: int = 16) -> "HogLinearClassifier":
        rng = np.random.default_rng(seed)
        n_in = feature_length(patch)
        scale = np.sqrt(1.0 / n_in)
        stage = LinearStage(weight=rng.normal(0.0, scale, size=(len(LABELS), n_in)),
                            bias=np.zeros(len(LABELS)))
        return cls(stage=stage, patch=patch)

    def features(self, patches: np.ndarray) -> np.ndarray:
        if patches.ndim != 3:
            raise ValueError("expected a (N, H, W) uint8 batch")
        return np.stack([hog(p) for p in patches])

    def predict_scores(self, patches: np.ndarray) -> np.ndarray:
        feats = self.features(patches)
        return feats @ self.stage.weight.T + self.stage.bias

    def fit(self, patches: np.ndarray, labels: np.ndarray,
            learning_rate: float = 0.05, batch_size: int = 32,
            epochs: int = 10, seed: int = 0) -> list[float]:
        from .train import cross_entropy  # local import avoids a cycle
        feats = self.features(patches)
        rng = np.random.default_rng(seed)
        n = feats.shape[0]
        trace: list[float] = []
        for _ in range(epochs):
            order = rng.permutation(n)
            losses = []
            for start in range(0, n, batch_size):
                sel = order[start:start + batch_size]
                x, y = feats[sel], labels[sel]
                scores = x @ self.stage.weight.T + self.stage.bias
                loss, dscores = cross_entropy(scores, y)
                self.stage.weight -= learning_rate * (dscores.T @ x)
                self.stage.bias -= learning_rate * dscores.sum(axis=0)
                losses.append(loss)
            trace.append(float(np.mean(losses)))
        return trace

    def save(self, path: str) -> None:
        net = ConvNetwork(stages=[self.stage], input_shape=(1, self.patch, self.patch),
                          feature_kind=FEATURES_HOG)
        save_weights(net, path)

    @classmethod
    def load(cls, path: str) -> "HogLinearClassifier":
        net = load_weights(path)
        if net.feature_kind != FEATURES_HOG or len(net.stages) != 1:
            raise ValueError(f"{path} does not hold a HOG linear classifier")
        stage = net.stages[0]
        assert isinstance(stage, LinearStage)
        return cls(stage=stage, patch=net.input_shape[1])
