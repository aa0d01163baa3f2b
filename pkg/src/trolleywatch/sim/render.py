"""Scene renderer: simulator state in, luminance frames plus ground truth out.

Each station has one fixed camera looking at its trolley bay.  The scene
is synthetic but deliberately shaped like the real problem: parked
trolleys are high-contrast textured rectangles on a flat floor plate,
passers-by are structureless blobs in a walkway strip, and occluding
vehicles are dark rectangles anchored at the frame bottom whose width is
set by the coverage fraction (full coverage blanks the frame).

Rendering is a pure function of (state, config, camera): the per-frame
jitter and crowd placement derive from a hash of the scenario seed, the
camera id and the clock, so identical states render identical bytes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .. import textures
from ..errors import ScenarioError, UnknownCameraError
from ..vision.frame import Frame
from .engine import SimState
from .scenario import ScenarioConfig, StationSpec

TROLLEY = "trolley"
OTHER = "other"

_JITTER = 1  # max per-axis trolley wobble, px; slot gaps must exceed 2*_JITTER


@dataclass(slots=True)
class LabeledBox:
    cls: str
    box: tuple[int, int, int, int]  # x, y, w, h


@dataclass(slots=True)
class GroundTruth:
    """What is actually visible in one frame."""

    boxes: list[LabeledBox]
    count: int          # visible trolleys; equals len of trolley-class boxes
    coverage: float     # fraction of the frame hidden by an occluder


@dataclass(frozen=True)
class _Layout:
    cols: int
    rows: int
    origin_x: int
    origin_y: int
    pitch_x: int
    pitch_y: int


def _digest_seed(*parts) -> int:
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


class Renderer:
    """Per-scenario renderer with precomputed layouts and floor plates."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        r = config.render
        if r.gap_x < 2 * _JITTER + 1 or r.gap_y < 2 * _JITTER + 1:
            raise ScenarioError("render gaps too small: jittered trolleys could touch")
        if r.person_h_max > r.walkway_h - 2:
            raise ScenarioError("person_h_max must fit inside the walkway strip")

        pitch_x = r.trolley_w + r.gap_x
        pitch_y = r.trolley_h + r.gap_y
        usable_w = r.frame_w - 2 * r.margin_x
        cols = (usable_w + r.gap_x) // pitch_x
        bay_bottom_limit = r.frame_h - r.walkway_h - 4  # clearance above the walkway
        usable_h = bay_bottom_limit - r.margin_y
        rows = (usable_h + r.gap_y) // pitch_y
        if cols < 1 or rows < 1:
            raise ScenarioError("frame too small for even one trolley slot")

        self._layouts: dict[str, _Layout] = {}
        self._plates: dict[str, np.ndarray] = {}
        for st in config.stations:
            if st.capacity > cols * rows:
                raise ScenarioError(
                    f"station {st.station_id}: capacity {st.capacity} exceeds "
                    f"{cols * rows} renderable slots at this frame size")
            self._layouts[st.camera_id] = _Layout(
                cols=cols, rows=rows,
                origin_x=r.margin_x, origin_y=r.margin_y,
                pitch_x=pitch_x, pitch_y=pitch_y,
            )
            self._plates[st.camera_id] = textures.plate_texture(
                r.frame_h, r.frame_w, _digest_seed(config.seed, "plate", st.camera_id))

        self._walkway_top = r.frame_h - r.walkway_h
        # Trolley textures only depend on size and parity; cache both phases.
        self._trolley_px = {
            phase: textures.trolley_texture(r.trolley_h, r.trolley_w, phase)
            for phase in (0, 1)
        }

    def background_plate(self, camera_id: str) -> np.ndarray:
        """Empty-bay calibration image for this camera (no dynamic objects)."""
        try:
            return self._plates[camera_id].copy()
        except KeyError:
            raise UnknownCameraError(f"unknown camera {camera_id!r}")

    def render(self, state: SimState, camera_id: str) -> tuple[Frame, GroundTruth]:
        try:
            station = self.config.camera_station(camera_id)
        except ScenarioError:
            raise UnknownCameraError(f"unknown camera {camera_id!r}")
        layout = self._layouts[camera_id]
        r = self.config.render
        rng = np.random.default_rng(
            _digest_seed(self.config.seed, camera_id, round(state.clock * 1e6)))

        canvas = self._plates[camera_id].copy()
        boxes: list[LabeledBox] = []

        count = state.station_count(station.station_id)
        if count:
            jitter = rng.integers(-_JITTER, _JITTER + 1, size=(count, 2))
            for i in range(count):
                row, col = divmod(i, layout.cols)
                x = layout.origin_x + col * layout.pitch_x + int(jitter[i, 0])
                y = layout.origin_y + row * layout.pitch_y + int(jitter[i, 1])
                tex = self._trolley_px[(row + col) % 2]
                canvas[y:y + r.trolley_h, x:x + r.trolley_w] = tex
                boxes.append(LabeledBox(TROLLEY, (x, y, r.trolley_w, r.trolley_h)))

        n_people = int(rng.integers(0, r.people_max + 1))
        for _ in range(n_people):
            pw = int(rng.integers(r.person_w_min, r.person_w_max + 1))
            ph = int(rng.integers(r.person_h_min, r.person_h_max + 1))
            x = int(rng.integers(0, r.frame_w - pw + 1))
            y = int(rng.integers(self._walkway_top, r.frame_h - ph + 1))
            mask = textures.ellipse_mask(ph, pw)
            blob = textures.speckle_texture(ph, pw, rng)
            region = canvas[y:y + ph, x:x + pw]
            region[mask] = blob[mask]
            boxes.append(LabeledBox(OTHER, (x, y, pw, ph)))

        occ_w = 0
        coverage = self._active_coverage(state, camera_id)
        if coverage > 0.0:
            occ_w = int(round(coverage * r.frame_w))
            if occ_w > 0:
                canvas[:, :occ_w] = textures.occluder_texture(r.frame_h, occ_w, rng)

        visible = [b for b in boxes if b.box[0] + b.box[2] > occ_w]
        truth = GroundTruth(
            boxes=visible,
            count=sum(1 for b in visible if b.cls == TROLLEY),
            coverage=occ_w / r.frame_w,
        )
        frame = Frame(pixels=canvas, timestamp=state.clock, camera_id=camera_id)
        return frame, truth

    def _active_coverage(self, state: SimState, camera_id: str) -> float:
        cov = 0.0
        for i in state.active_occluders:
            ev = self.config.occluder_events[i]
            if ev.camera_id == camera_id:
                cov = max(cov, ev.coverage)
        return cov


def render_frame(state: SimState, config: ScenarioConfig,
                 camera_id: str) -> tuple[Frame, GroundTruth]:
    """One-shot convenience wrapper; runtimes should hold a Renderer."""
    return Renderer(config).render(state, camera_id)
