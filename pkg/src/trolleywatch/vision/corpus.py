"""Labeled patch corpus: synthesis, storage, loading.

On disk a corpus is a directory of PGM patches plus an ``index.jsonl``
where each line is ``{"file": "patch_00000.pgm", "label": "trolley"}``.
Synthesis draws from the same texture generators the scene renderer
uses, so a classifier trained here matches what the cameras produce:
trolleys at assorted sizes and basket phases, and a negatives mix of
people-like speckle blobs, bare floor, vehicle fills and part-occluded
clutter.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .. import textures
from ..errors import CorpusError
from .frame import read_pgm, write_pgm
from .hog import resize_nearest
from .network import LABEL_INDEX, LABELS

INDEX_NAME = "index.jsonl"


def _on_plate(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    seed = int(rng.integers(0, 2**32))
    return textures.plate_texture(h, w, seed)


def _trolley_patch(rng: np.random.Generator, patch: int) -> np.ndarray:
    tw = int(rng.integers(10, 21))
    th = int(rng.integers(7, 15))
    margin = int(rng.integers(0, 4))
    canvas = _on_plate(rng, th + 2 * margin, tw + 2 * margin)
    ox = int(rng.integers(0, 2 * margin + 1)) if margin else 0
    oy = int(rng.integers(0, 2 * margin + 1)) if margin else 0
    ox, oy = min(ox, 2 * margin), min(oy, 2 * margin)
    tex = textures.trolley_texture(th, tw, int(rng.integers(0, 2)))
    canvas[oy:oy + th, ox:ox + tw] = tex
    noisy = canvas.astype(np.int64) + rng.integers(-5, 6, size=canvas.shape)
    return resize_nearest(np.clip(noisy, 0, 255).astype(np.uint8), patch, patch)


def _other_patch(rng: np.random.Generator, patch: int) -> np.ndarray:
    kind = int(rng.integers(0, 6))
    h = int(rng.integers(8, 25))
    w = int(rng.integers(8, 25))
    if kind == 0:  # person-like dark speckle ellipse on the floor
        canvas = _on_plate(rng, h, w)
        mask = textures.ellipse_mask(h, w)
        canvas[mask] = textures.speckle_texture(h, w, rng)[mask]
    elif kind == 1:  # bare floor
        canvas = _on_plate(rng, h, w)
    elif kind == 2:  # bright speckle (reflective clutter)
        canvas = textures.speckle_texture(h, w, rng, base=180, spread=40)
    elif kind == 3:  # occluding vehicle fill
        canvas = textures.occluder_texture(h, w, rng)
    elif kind == 4:  # vehicle edge with a sliver of trolley showing
        canvas = textures.occluder_texture(h, w, rng)
        sw, sh = max(2, w // 4), max(2, h // 4)
        tex = textures.trolley_texture(sh, sw, int(rng.integers(0, 2)))
        canvas[h - sh:, w - sw:] = tex
    else:  # smooth gradient (lighting)
        lo = int(rng.integers(40, 120))
        hi = int(rng.integers(140, 220))
        ramp = np.linspace(lo, hi, w)[None, :].repeat(h, axis=0)
        canvas = ramp.astype(np.uint8)
    return resize_nearest(canvas, patch, patch)


def synthesize_patch(rng: np.random.Generator, label: str, patch: int = 16) -> np.ndarray:
    if label == "trolley":
        return _trolley_patch(rng, patch)
    return _other_patch(rng, patch)


def build_patch_corpus(out_dir: str | os.PathLike, n: int, seed: int,
                       patch: int = 16) -> Path:
    """Write a balanced corpus of n patches; returns the index path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    index_path = out / INDEX_NAME
    with open(index_path, "w", encoding="utf-8") as idx:
        for i in range(n):
            label = LABELS[i % 2]  # strict alternation keeps classes balanced
            pixels = synthesize_patch(rng, label, patch)
            name = f"patch_{i:05d}.pgm"
            write_pgm(pixels, out / name)
            idx.write(json.dumps({"file": name, "label": label},
                                 sort_keys=True) + "\n")
    return index_path


def load_patch_corpus(corpus_dir: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Load (patches uint8 (N, H, W), labels int (N,)) from a corpus dir."""
    root = Path(corpus_dir)
    index_path = root / INDEX_NAME
    if not index_path.exists():
        raise CorpusError(f"no {INDEX_NAME} in {root}")
    patches: list[np.ndarray] = []
    labels: list[int] = []
    with open(index_path, "r", encoding="utf-8") as idx:
        for line_no, line in enumerate(idx, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
                name, label = entry["file"], entry["label"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{index_path}:{line_no}: bad index entry ({exc})")
            if label not in LABEL_INDEX:
                raise CorpusError(f"{index_path}:{line_no}: unknown label {label!r}")
            path = root / name
            if not path.exists():
                raise CorpusError(f"{index_path}:{line_no}: missing patch file {name}")
            patches.append(read_pgm(path))
            labels.append(LABEL_INDEX[label])
    if not patches:
        raise CorpusError(f"{index_path}: corpus is empty")
    shapes = {p.shape for p in patches}
    if len(shapes) != 1:
        raise CorpusError(f"corpus patches disagree on shape: {sorted(shapes)}")
    return np.stack(patches), np.asarray(labels, dtype=np.intp)
