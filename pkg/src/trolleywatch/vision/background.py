"""Running-average background model and region-of-interest proposal.

The model is one float64 mean image.  Each update blends the current
frame in with weight alpha; passing a mask restricts the blend to pixels
believed to be background so parked trolleys are never absorbed into the
model.  Proposal = threshold the absolute difference, take 4-connected
components, keep the ones that are big enough and textured enough.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

Box = tuple[int, int, int, int]  # x, y, w, h


@dataclass
class BackgroundModel:
    mean: np.ndarray  # float64 (H, W)
    updates: int = 0

    @classmethod
    def from_frame(cls, pixels: np.ndarray) -> "BackgroundModel":
        """Calibrate from a reference image (e.g. the empty bay at install)."""
        return cls(mean=pixels.astype(np.float64), updates=1)


def background_update(model: BackgroundModel, pixels: np.ndarray, alpha: float,
                      mask: np.ndarray | None = None) -> BackgroundModel:
    """Blend a frame into the model: mean <- (1 - alpha) * mean + alpha * pixel.

    With ``mask`` given, only pixels where mask is True are blended; the
    rest keep their previous mean.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    frame = pixels.astype(np.float64)
    blended = (1.0 - alpha) * model.mean + alpha * frame
    if mask is not None:
        blended = np.where(mask, blended, model.mean)
    return BackgroundModel(mean=blended, updates=model.updates + 1)


def foreground_mask(pixels: np.ndarray, model: BackgroundModel,
                    tau_d: float) -> np.ndarray:
    """Pixels differing from the background mean by more than tau_d."""
    if model.updates < 1:
        raise ValueError("background model has never been updated")
    return np.abs(pixels.astype(np.float64) - model.mean) > tau_d


def regions_from_mask(mask: np.ndarray, pixels: np.ndarray,
                      a_min: int, tau_v: float) -> list[Box]:
    """4-connected components of the mask, filtered by area and texture.

    The texture gate drops flat blobs: a kept component's luminance
    variance (over its own pixels) must reach tau_v.
    """
    labels, n = ndimage.label(mask)  # default structure = 4-connectivity
    if n == 0:
        return []
    fg = mask.ravel()
    flat_labels = labels.ravel()[fg]
    flat_pixels = pixels.ravel()[fg].astype(np.float64)
    areas = np.bincount(flat_labels, minlength=n + 1)
    sums = np.bincount(flat_labels, weights=flat_pixels, minlength=n + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / areas
        deviations = flat_pixels - means[flat_labels]
        sqdev = np.bincount(flat_labels, weights=deviations * deviations,
                            minlength=n + 1)
        variances = sqdev / areas
    regions: list[Box] = []
    for i, sl in enumerate(ndimage.find_objects(labels)):
        if sl is None:
            continue
        label = i + 1
        if areas[label] < a_min or variances[label] < tau_v:
            continue
        y0, x0 = sl[0].start, sl[1].start
        h, w = sl[0].stop - y0, sl[1].stop - x0
        regions.append((x0, y0, w, h))
    return regions


def extract_roi(pixels: np.ndarray, model: BackgroundModel, tau_d: float,
                a_min: int, tau_v: float) -> tuple[list[Box], float]:
    """Candidate object boxes plus the raw foreground coverage fraction.

    Coverage is measured on the unfiltered mask: a vehicle parked across
    the lens drives it toward 1.0 even though the texture gate may
    reject the vehicle itself as a region.
    """
    mask = foreground_mask(pixels, model, tau_d)
    coverage = float(mask.mean())
    return regions_from_mask(mask, pixels, a_min, tau_v), coverage
