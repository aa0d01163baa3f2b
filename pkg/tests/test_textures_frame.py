"""Procedural textures and the PGM frame container."""

from __future__ import annotations

import numpy as np
import pytest

from trolleywatch import textures
from trolleywatch.vision.frame import Frame, read_pgm, write_pgm


def test_trolley_texture_is_a_two_tone_checker():
    tex = textures.trolley_texture(8, 12, phase=0)
    assert tex.shape == (8, 12)
    assert set(np.unique(tex)) == {textures.TROLLEY_DARK, textures.TROLLEY_LIGHT}
    cell = textures.GRID_CELL_PX
    assert tex[0, 0] == textures.TROLLEY_DARK
    assert tex[0, cell] == textures.TROLLEY_LIGHT
    flipped = textures.trolley_texture(8, 12, phase=1)
    assert flipped[0, 0] == textures.TROLLEY_LIGHT
    # Checker contrast gives variance far above the texture gate.
    assert float(tex.astype(np.float64).var()) > 5000.0


def test_flat_textures_fall_below_the_texture_gate():
    plate = textures.plate_texture(60, 80, seed=0)
    occ = textures.occluder_texture(60, 80, np.random.default_rng(0))
    assert float(plate.astype(np.float64).var()) < 50.0
    assert float(occ.astype(np.float64).var()) < 50.0
    assert abs(float(plate.mean()) - textures.PLATE_LEVEL) < 2.0
    assert abs(float(occ.mean()) - textures.OCCLUDER_LEVEL) < 3.0


def test_plate_texture_is_seed_deterministic():
    a = textures.plate_texture(30, 40, seed=5)
    b = textures.plate_texture(30, 40, seed=5)
    c = textures.plate_texture(30, 40, seed=6)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_speckle_texture_uses_the_supplied_rng():
    rng = np.random.default_rng(9)
    tex = textures.speckle_texture(12, 10, rng, base=60, spread=30)
    assert tex.shape == (12, 10)
    assert tex.dtype == np.uint8
    assert tex.min() >= 60 - 30 and tex.max() <= 60 + 30
    rng2 = np.random.default_rng(9)
    np.testing.assert_array_equal(tex, textures.speckle_texture(12, 10, rng2))


def test_ellipse_mask_shape_and_symmetry():
    mask = textures.ellipse_mask(9, 7)
    assert mask.shape == (9, 7)
    assert mask.dtype == np.bool_
    assert mask[4, 3]  # centre is inside
    assert not mask[0, 0]  # corners are outside
    np.testing.assert_array_equal(mask, mask[::-1, :])
    np.testing.assert_array_equal(mask, mask[:, ::-1])


def test_frame_validates_pixels():
    good = np.zeros((4, 6), dtype=np.uint8)
    frame = Frame(pixels=good, timestamp=1.5, camera_id="cam-X")
    assert frame.pixels.shape == (4, 6)
    with pytest.raises(ValueError, match="2-D"):
        Frame(pixels=np.zeros((4, 6, 3), dtype=np.uint8), timestamp=0.0,
              camera_id="cam-X")
    with pytest.raises(ValueError, match="uint8"):
        Frame(pixels=np.zeros((4, 6), dtype=np.float64), timestamp=0.0,
              camera_id="cam-X")


def test_pgm_round_trip_preserves_bytes(tmp_path):
    rng = np.random.default_rng(4)
    pixels = rng.integers(0, 256, size=(17, 23), dtype=np.uint8)
    path = tmp_path / "frame.pgm"
    write_pgm(pixels, path)
    back = read_pgm(path)
    np.testing.assert_array_equal(pixels, back)


def test_pgm_reader_skips_header_comments(tmp_path):
    pixels = np.arange(12, dtype=np.uint8).reshape(3, 4)
    path = tmp_path / "c.pgm"
    raw = b"P5\n# a comment line\n4 3\n255\n" + pixels.tobytes()
    path.write_bytes(raw)
    np.testing.assert_array_equal(read_pgm(path), pixels)


def test_pgm_reader_rejects_truncation_and_bad_magic(tmp_path):
    pixels = np.zeros((5, 5), dtype=np.uint8)
    path = tmp_path / "t.pgm"
    write_pgm(pixels, path)
    data = path.read_bytes()
    path.write_bytes(data[:-3])
    with pytest.raises(ValueError, match="truncated"):
        read_pgm(path)
    path.write_bytes(b"P6" + data[2:])
    with pytest.raises(ValueError):
        read_pgm(path)
