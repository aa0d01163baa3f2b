"""From-scratch convolutional classifier: forward pass and weight storage.

The building blocks mirror the math exactly:

    conv stage    y(o) = max(0, sum_c x(c) (*) h(o,c) + b(o))
                  with (*) the valid-mode cross-correlation, so a
                  (C, H, W) input and (O, C, kh, kw) kernels give a
                  (O, H-kh+1, W-kw+1) output
    pool stage    non-overlapping s x s maxima, ragged edges truncated
    linear stage  scores = W @ flatten(x) + b, no activation

Everything is float64 numpy.  The implementation lowers the convolution
to one matrix multiplication over unrolled windows; the unit tests pin
it against independent nested-loop oracles.

Weights live in a little-endian binary container starting with the magic
bytes ``TWNET1`` (layout in docs/weights_format.md).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import WeightsFormatError

MAGIC = b"TWNET1"

# Classifier output order, fixed across the package.
LABELS = ("trolley", "other")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}

FEATURES_RAW = 0   # network consumes raw pixel patches
FEATURES_HOG = 1   # network consumes gradient-histogram vectors


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(x, 0.0)


@dataclass
class ConvStage:
    kernels: np.ndarray  # (out, in, kh, kw)
    bias: np.ndarray     # (out,)


@dataclass
class PoolStage:
    size: int


@dataclass
class LinearStage:
    weight: np.ndarray   # (n_out, n_in)
    bias: np.ndarray     # (n_out,)


Stage = ConvStage | PoolStage | LinearStage


def _conv_raw(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Batched valid cross-correlation plus bias, no activation.

    x: (N, C, H, W) -> (N, O, H-kh+1, W-kw+1)
    """
    o, c, kh, kw = kernels.shape
    if x.shape[2] < kh or x.shape[3] < kw:
        raise ValueError(
            f"input {x.shape[2]}x{x.shape[3]} smaller than kernel {kh}x{kw}")
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))  # (N,C,H',W',kh,kw)
    n, _, ho, wo = windows.shape[:4]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    pre = (cols @ kernels.reshape(o, c * kh * kw).T)
    pre = pre.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    return pre + bias[None, :, None, None]


def conv_forward(stage: ConvStage, fmap: np.ndarray) -> np.ndarray:
    """Single feature map (C, H, W) through one conv stage, ReLU applied."""
    if fmap.ndim != 3:
        raise ValueError(f"feature map must be (C, H, W), got shape {fmap.shape}")
    if fmap.shape[0] != stage.kernels.shape[1]:
        raise ValueError(
            f"channel mismatch: map has {fmap.shape[0]}, kernels expect "
            f"{stage.kernels.shape[1]}")
    pre = _conv_raw(fmap[None].astype(np.float64), stage.kernels, stage.bias)
    return relu(pre[0])


def _pool_raw(x: np.ndarray, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Batched max pool; returns (output, argmax) with flat in-window indices.

    x: (N, C, H, W) -> (N, C, H//s, W//s).  Rows/columns that do not fill
    a whole window are dropped.
    """
    n, c, h, w = x.shape
    ho, wo = h // s, w // s
    if ho < 1 or wo < 1:
        raise ValueError(f"pool size {s} exceeds input {h}x{w}")
    cropped = x[:, :, :ho * s, :wo * s]
    windows = cropped.reshape(n, c, ho, s, wo, s).transpose(0, 1, 2, 4, 3, 5)
    flat = windows.reshape(n, c, ho, wo, s * s)
    idx = np.argmax(flat, axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return out, idx


def max_pool(fmap: np.ndarray, size: int) -> np.ndarray:
    """Single feature map (C, H, W) through a non-overlapping max pool."""
    if fmap.ndim != 3:
        raise ValueError(f"feature map must be (C, H, W), got shape {fmap.shape}")
    if size < 1:
        raise ValueError("pool size must be >= 1")
    out, _ = _pool_raw(fmap[None].astype(np.float64), size)
    return out[0]


@dataclass
class ConvNetwork:
    """Stage list plus the input geometry it was built for."""

    stages: list[Stage]
    input_shape: tuple[int, int, int]  # (channels, height, width)
    feature_kind: int = FEATURES_RAW

    def forward(self, batch: np.ndarray) -> np.ndarray:
        """(N, C, H, W) float batch -> (N, n_classes) raw scores."""
        scores, _ = self.forward_with_cache(batch)
        return scores

    def forward_with_cache(self, batch: np.ndarray):
        """Forward pass keeping what backprop needs.

        Cache entries per stage:
            conv   ("conv", input, pre_activation)
            pool   ("pool", input_shape, argmax)
            linear ("linear", flat_input, input_shape)
        """
        if batch.ndim != 4:
            raise ValueError(f"batch must be (N, C, H, W), got shape {batch.shape}")
        a = batch.astype(np.float64, copy=False)
        caches: list[tuple] = []
        for stage in self.stages:
            if isinstance(stage, ConvStage):
                pre = _conv_raw(a, stage.kernels, stage.bias)
                caches.append(("conv", a, pre))
                a = relu(pre)
            elif isinstance(stage, PoolStage):
                out, idx = _pool_raw(a, stage.size)
                caches.append(("pool", a.shape, idx))
                a = out
            elif isinstance(stage, LinearStage):
                flat = a.reshape(a.shape[0], -1)
                if flat.shape[1] != stage.weight.shape[1]:
                    raise ValueError(
                        f"linear stage expects {stage.weight.shape[1]} features, "
                        f"got {flat.shape[1]}")
                caches.append(("linear", flat, a.shape))
                a = flat @ stage.weight.T + stage.bias
            else:
                raise TypeError(f"unknown stage type {type(stage)!r}")
        return a, caches

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for stage in self.stages:
            if isinstance(stage, ConvStage):
                params.extend([stage.kernels, stage.bias])
            elif isinstance(stage, LinearStage):
                params.extend([stage.weight, stage.bias])
        return params


def demo_network(seed: int = 0, patch: int = 16) -> ConvNetwork:
    """The default two-conv-stage classifier used throughout.

    conv(8 kernels 5x5) -> pool 2 -> conv(16 kernels 3x3) -> pool 2 ->
    linear to the two class scores.  He-scaled init, zero biases.
    """
    rng = np.random.default_rng(seed)

    def conv(out_c: int, in_c: int, k: int) -> ConvStage:
        scale = np.sqrt(2.0 / (in_c * k * k))
        return ConvStage(
            kernels=rng.normal(0.0, scale, size=(out_c, in_c, k, k)),
            bias=np.zeros(out_c),
        )

    h = w = patch
    stages: list[Stage] = []
    stages.append(conv(8, 1, 5)); h, w = h - 4, w - 4
    stages.append(PoolStage(2)); h, w = h // 2, w // 2
    stages.append(conv(16, 8, 3)); h, w = h - 2, w - 2
    stages.append(PoolStage(2)); h, w = h // 2, w // 2
    n_feat = 16 * h * w
    scale = np.sqrt(1.0 / n_feat)
    stages.append(LinearStage(
        weight=rng.normal(0.0, scale, size=(len(LABELS), n_feat)),
        bias=np.zeros(len(LABELS)),
    ))
    return ConvNetwork(stages=stages, input_shape=(1, patch, patch))


# ---------- weight file I/O ----------

_STAGE_CONV = 1
_STAGE_POOL = 2
_STAGE_LINEAR = 3


def save_weights(net: ConvNetwork, path: str) -> None:
    """Serialize a network; see docs/weights_format.md for the layout."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<B", net.feature_kind)
    out += struct.pack("<III", *net.input_shape)
    out += struct.pack("<I", len(net.stages))
    for stage in net.stages:
        if isinstance(stage, ConvStage):
            o, c, kh, kw = stage.kernels.shape
            out += struct.pack("<BIIII", _STAGE_CONV, o, c, kh, kw)
            out += np.ascontiguousarray(stage.kernels, dtype="<f8").tobytes()
            out += np.ascontiguousarray(stage.bias, dtype="<f8").tobytes()
        elif isinstance(stage, PoolStage):
            out += struct.pack("<BI", _STAGE_POOL, stage.size)
        elif isinstance(stage, LinearStage):
            n_out, n_in = stage.weight.shape
            out += struct.pack("<BII", _STAGE_LINEAR, n_out, n_in)
            out += np.ascontiguousarray(stage.weight, dtype="<f8").tobytes()
            out += np.ascontiguousarray(stage.bias, dtype="<f8").tobytes()
        else:
            raise TypeError(f"cannot serialize stage {type(stage)!r}")
    with open(path, "wb") as fh:
        fh.write(bytes(out))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise WeightsFormatError("weights file truncated")
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals

    def floats(self, shape: tuple[int, ...]) -> np.ndarray:
        n = int(np.prod(shape))
        size = n * 8
        if self.pos + size > len(self.data):
            raise WeightsFormatError("weights file truncated")
        arr = np.frombuffer(self.data, dtype="<f8", count=n, offset=self.pos)
        self.pos += size
        return arr.reshape(shape).astype(np.float64)


def load_weights(path: str) -> ConvNetwork:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC):
        raise WeightsFormatError(f"{path}: bad magic, not a TWNET1 weights file")
    rd = _Reader(data)
    rd.pos = len(MAGIC)
    (feature_kind,) = rd.unpack("<B")
    if feature_kind not in (FEATURES_RAW, FEATURES_HOG):
        raise WeightsFormatError(f"{path}: unknown feature kind {feature_kind}")
    in_c, in_h, in_w = rd.unpack("<III")
    (n_stages,) = rd.unpack("<I")
    if n_stages > 64:
        raise WeightsFormatError(f"{path}: implausible stage count {n_stages}")
    stages: list[Stage] = []
    for _ in range(n_stages):
        (tag,) = rd.unpack("<B")
        if tag == _STAGE_CONV:
            o, c, kh, kw = rd.unpack("<IIII")
            kernels = rd.floats((o, c, kh, kw))
            bias = rd.floats((o,))
            stages.append(ConvStage(kernels=kernels, bias=bias))
        elif tag == _STAGE_POOL:
            (s,) = rd.unpack("<I")
            stages.append(PoolStage(size=s))
        elif tag == _STAGE_LINEAR:
            n_out, n_in = rd.unpack("<II")
            weight = rd.floats((n_out, n_in))
            bias = rd.floats((n_out,))
            stages.append(LinearStage(weight=weight, bias=bias))
        else:
            raise WeightsFormatError(f"{path}: unknown stage tag {tag}")
    if rd.pos != len(data):
        raise WeightsFormatError(f"{path}: {len(data) - rd.pos} trailing bytes")
    return ConvNetwork(stages=stages, input_shape=(in_c, in_h, in_w),
                       feature_kind=feature_kind)
