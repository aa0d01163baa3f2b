"""Per-camera detection pipeline.

Frame in: propose regions against the background model, classify each
region patch, count trolley detections, smooth the displayed count, and
run the occlusion gate.  The gate implements the pause/resume rule for
blocked cameras: after ``k_frames`` consecutive frames whose foreground
coverage reaches ``tau_occ`` with no trolley detections the stream is
considered blocked and counting pauses, holding the last reported count;
the first frame with trolley detections resumes it.  Frames that look
blocked (including the run-up before the gate trips) emit no observation
downstream, so a vehicle parked across the lens never manufactures a
zero-count alert.
"""

from __future__ import annotations

import statistics
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .background import (BackgroundModel, Box, background_update,
                         foreground_mask, regions_from_mask)
from .hog import HogLinearClassifier, resize_nearest
from .network import (FEATURES_HOG, LABEL_INDEX, LABELS, ConvNetwork,
                      load_weights)
from .train import softmax

ACTIVE = "active"
PAUSED = "paused"


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = 0.05          # background blend weight
    tau_d: float = 25.0          # luminance difference threshold
    a_min: int = 100             # minimum component area, px
    tau_v: float = 50.0          # minimum component luminance variance
    tau_occ: float = 0.9         # coverage treated as a blocked lens
    k_frames: int = 3            # consecutive blocked frames before pausing
    smoother_window: int = 5     # median window for the displayed count
    patch_size: int = 16         # classifier input side
    queue_capacity: int = 8      # frame queue depth in threaded mode

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        unknown = set(doc) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown pipeline options {sorted(unknown)}")
        return cls(**doc)


@dataclass(slots=True)
class Detection:
    cls: str
    box: Box
    confidence: float


class ConvNetClassifier:
    """Adapter giving the conv network the uint8-patch interface.

    Scores are memoized by patch content: surveillance frames repeat the
    same crops for as long as nothing moves, so most lookups hit.  The
    cache is bounded (FIFO eviction).  BLAS may round the same patch
    differently depending on batch shape (one ulp); the cache pins each
    patch to its first evaluation, which if anything makes repeat scores
    more reproducible, never less.
    """

    def __init__(self, net: ConvNetwork, cache_size: int = 4096):
        self.net = net
        self.cache_size = cache_size
        self._cache: dict[bytes, np.ndarray] = {}

    def _forward(self, patches: np.ndarray) -> np.ndarray:
        batch = patches.astype(np.float64) / 255.0
        return self.net.forward(batch[:, None, :, :])

    def predict_scores(self, patches: np.ndarray) -> np.ndarray:
        if self.cache_size == 0:
            return self._forward(patches)
        n = patches.shape[0]
        keys = [patches[i].tobytes() for i in range(n)]
        scores: list[np.ndarray | None] = [self._cache.get(k) for k in keys]
        misses = [i for i, s in enumerate(scores) if s is None]
        if misses:
            fresh = self._forward(patches[misses])
            for j, i in enumerate(misses):
                row = fresh[j].copy()
                scores[i] = row
                self._cache[keys[i]] = row
            while len(self._cache) > self.cache_size:
                self._cache.pop(next(iter(self._cache)))
        return np.stack(scores)


def load_classifier(path: str):
    """Open a weights file and wrap it in the right classifier adapter."""
    net = load_weights(path)
    if net.feature_kind == FEATURES_HOG:
        return HogLinearClassifier.load(path)
    return ConvNetClassifier(net)


def classify_regions(pixels: np.ndarray, regions: list[Box], classifier,
                     patch_size: int = 16) -> list[Detection]:
    """Label each proposed region. Regions are classified in list order."""
    if not regions:
        return []
    patches = np.stack([
        resize_nearest(pixels[y:y + h, x:x + w], patch_size, patch_size)
        for x, y, w, h in regions
    ])
    scores = classifier.predict_scores(patches)
    probs = softmax(scores)
    out: list[Detection] = []
    for region, p in zip(regions, probs):
        idx = int(np.argmax(p))
        out.append(Detection(cls=LABELS[idx], box=region, confidence=float(p[idx])))
    return out


BLUR_TILE = 8


def blur_non_trolley(pixels: np.ndarray, detections: list[Detection]) -> np.ndarray:
    """Privacy mosaic: every non-trolley detection box is pixelated.

    The box is tiled into BLUR_TILE x BLUR_TILE squares (clipped at the
    box edge) and each tile is replaced by its mean.  Pixels outside the
    boxes are untouched; running the mosaic twice changes nothing more.
    """
    out = pixels.copy()
    h, w = out.shape
    for det in detections:
        if det.cls == "trolley":
            continue
        x, y, bw, bh = det.box
        x0, y0 = max(0, x), max(0, y)
        x1, y1 = min(w, x + bw), min(h, y + bh)
        for ty in range(y0, y1, BLUR_TILE):
            for tx in range(x0, x1, BLUR_TILE):
                tile = out[ty:min(ty + BLUR_TILE, y1), tx:min(tx + BLUR_TILE, x1)]
                tile[:] = int(round(float(tile.mean())))
    return out


class CountSmoother:
    """Median of the last W raw counts (lower median while warming up)."""

    def __init__(self, window: int):
        if window < 1:
            raise ValueError("smoother window must be >= 1")
        self._history: deque[int] = deque(maxlen=window)

    def update(self, raw: int) -> int:
        self._history.append(raw)
        return int(statistics.median_low(self._history))


def count_trolleys(detections: list[Detection], smoother: CountSmoother) -> tuple[int, int]:
    """(raw, reported): trolley detections now, and the smoothed count."""
    raw = sum(1 for d in detections if d.cls == "trolley")
    return raw, smoother.update(raw)


@dataclass(frozen=True)
class PipelineState:
    mode: str = ACTIVE
    held_count: int = 0
    occluded_streak: int = 0


def occlusion_gate(state: PipelineState, coverage: float, detections_present: bool,
                   cfg: PipelineConfig) -> PipelineState:
    """Advance the pause/resume state machine by one frame."""
    if state.mode == PAUSED:
        if detections_present:
            return replace(state, mode=ACTIVE, occluded_streak=0)
        return state
    if coverage >= cfg.tau_occ and not detections_present:
        streak = state.occluded_streak + 1
        if streak >= cfg.k_frames:
            return replace(state, mode=PAUSED, occluded_streak=streak)
        return replace(state, occluded_streak=streak)
    return replace(state, occluded_streak=0)


@dataclass(slots=True)
class FrameResult:
    camera_id: str
    t: float
    detections: list[Detection]
    raw_count: int            # trolley detections this frame (pre-smoothing)
    reported_count: int       # what the station tile shows
    coverage: float
    mode: str
    emitted: bool             # True when an observation went downstream


class CameraPipeline:
    """Stateful pipeline for one camera."""

    def __init__(self, camera_id: str, classifier, cfg: PipelineConfig,
                 calibration: np.ndarray, initial_count: int = 0):
        self.camera_id = camera_id
        self.classifier = classifier
        self.cfg = cfg
        self.model = BackgroundModel.from_frame(calibration)
        self.smoother = CountSmoother(cfg.smoother_window)
        self.state = PipelineState(held_count=initial_count)
        self.frames_processed = 0

    def process(self, pixels: np.ndarray, t: float) -> FrameResult:
        cfg = self.cfg
        mask = foreground_mask(pixels, self.model, cfg.tau_d)
        coverage = float(mask.mean())
        regions = regions_from_mask(mask, pixels, cfg.a_min, cfg.tau_v)
        detections = classify_regions(pixels, regions, self.classifier,
                                      cfg.patch_size)
        trolleys_seen = any(d.cls == "trolley" for d in detections)

        self.state = occlusion_gate(self.state, coverage, trolleys_seen, cfg)
        suspect = self.state.mode == PAUSED or self.state.occluded_streak > 0

        if suspect:
            raw = 0
            reported = self.state.held_count
            emitted = False
        else:
            raw, reported = count_trolleys(detections, self.smoother)
            self.state = replace(self.state, held_count=reported)
            emitted = True
            # Blend genuinely background pixels back into the model.
            self.model = background_update(self.model, pixels, cfg.alpha,
                                           mask=~mask)

        self.frames_processed += 1
        return FrameResult(
            camera_id=self.camera_id, t=t, detections=detections,
            raw_count=raw, reported_count=reported, coverage=coverage,
            mode=self.state.mode, emitted=emitted,
        )
