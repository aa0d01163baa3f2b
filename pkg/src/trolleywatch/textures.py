"""Texture generators shared by the scene renderer and the patch corpus.

Trolleys are drawn as a fixed high-contrast basket pattern; people and
vehicles get structureless fills.  Keeping the generators in one place
guarantees the training corpus and the rendered scenes agree on what a
trolley looks like.
"""

from __future__ import annotations

import numpy as np

# Luminance levels, 8-bit. The basket cells are chosen to sit far from the
# mid-gray floor plate so a parked trolley never fades into the background.
PLATE_LEVEL = 128
TROLLEY_DARK = 40
TROLLEY_LIGHT = 220
OCCLUDER_LEVEL = 30
PERSON_BASE = 60

GRID_CELL_PX = 4  # side of one basket cell in the archetype


def trolley_texture(h: int, w: int, phase: int = 0) -> np.ndarray:
    """Basket-weave archetype: alternating dark/light cells of GRID_CELL_PX.

    ``phase`` flips the checker parity so neighbouring trolleys do not
    tile into one continuous pattern.
    """
    ys = np.arange(h)[:, None] // GRID_CELL_PX
    xs = np.arange(w)[None, :] // GRID_CELL_PX
    checker = (ys + xs + phase) % 2
    return np.where(checker == 0, TROLLEY_DARK, TROLLEY_LIGHT).astype(np.uint8)


def speckle_texture(h: int, w: int, rng: np.random.Generator,
                    base: int = PERSON_BASE, spread: int = 30) -> np.ndarray:
    """Structureless noise fill used for people and other distractors."""
    lo = max(0, base - spread)
    hi = min(255, base + spread)
    return rng.integers(lo, hi + 1, size=(h, w), dtype=np.int64).astype(np.uint8)


def ellipse_mask(h: int, w: int) -> np.ndarray:
    """Boolean ellipse inscribed in an h x w box."""
    ys = (np.arange(h) - (h - 1) / 2.0) / max(h / 2.0, 1e-9)
    xs = (np.arange(w) - (w - 1) / 2.0) / max(w / 2.0, 1e-9)
    return (ys[:, None] ** 2 + xs[None, :] ** 2) <= 1.0


def plate_texture(h: int, w: int, seed: int) -> np.ndarray:
    """Static floor plate: mid-gray with faint fixed mottling.

    The mottling variance stays well below the pipeline's texture
    threshold so bare floor is never mistaken for an object.
    """
    rng = np.random.default_rng(seed)
    mottle = rng.integers(-6, 7, size=(h, w), dtype=np.int64)
    return np.clip(PLATE_LEVEL + mottle, 0, 255).astype(np.uint8)


def occluder_texture(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """Dark low-variance fill for vehicles blocking the camera."""
    mottle = rng.integers(-8, 9, size=(h, w), dtype=np.int64)
    return np.clip(OCCLUDER_LEVEL + mottle, 0, 255).astype(np.uint8)
