"""Masked minimum compositing against a brute-force oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wastefinder.dataengine import (
    Composite,
    EmptyWindowError,
    RasterFrame,
    Window,
    min_composite,
    month_add,
)
from wastefinder.dataengine.raster import N_BANDS, load_frames, save_frames
from wastefinder.rng import make_rng


def _frame(rng, h=4, w=4, month="2020-01", mask=None):
    bands = rng.random((N_BANDS, h, w)).astype(np.float32)
    m = np.zeros((h, w), bool) if mask is None else mask
    return RasterFrame(bands=bands, mask=m, month=month)


def brute_force_min(frames, window):
    """Per-pixel/band loop oracle, independent of the vectorized path."""
    sel = [f for f in frames if window.contains(f.month)]
    h, w = sel[0].mask.shape
    out = np.zeros((N_BANDS, h, w), np.float32)
    valid = np.zeros((h, w), bool)
    for r in range(h):
        for c in range(w):
            vals = [f.bands[:, r, c] for f in sel if not f.mask[r, c]]
            if vals:
                valid[r, c] = True
                out[:, r, c] = np.min(vals, axis=0)
    return out, valid


def test_single_unmasked_frame_is_identity(rng):
    f = _frame(rng)
    comp = min_composite([f], Window("2020-01"))
    assert np.array_equal(comp.bands, f.bands)
    assert comp.valid.all()


def test_worked_pixel_example():
    # values 5, 3, masked, 7 across four frames -> 3
    frames = []
    for i, (v, masked) in enumerate([(5.0, False), (3.0, False), (1.0, True), (7.0, False)]):
        bands = np.full((N_BANDS, 1, 1), v, np.float32)
        mask = np.array([[masked]])
        frames.append(RasterFrame(bands=bands, mask=mask, month="2020-01"))
    comp = min_composite(frames, Window("2020-01"))
    assert comp.bands[0, 0, 0] == 3.0


def test_all_masked_pixel_is_invalid(rng):
    mask = np.zeros((4, 4), bool)
    mask[2, 1] = True
    frames = [_frame(rng, mask=mask.copy()), _frame(rng, mask=mask.copy())]
    comp = min_composite(frames, Window("2020-01"))
    assert not comp.valid[2, 1]
    assert comp.bands[:, 2, 1].sum() == 0.0
    assert comp.valid.sum() == 15


def test_empty_window_lists_available_timestamps(rng):
    frames = [_frame(rng, month="2020-01"), _frame(rng, month="2020-02")]
    with pytest.raises(EmptyWindowError, match="2020-01"):
        min_composite(frames, Window("2021-06"))


def test_window_membership():
    w = Window("2020-11", span=3)
    assert w.months == ["2020-11", "2020-12", "2021-01"]
    assert w.contains("2021-01") and not w.contains("2021-02")
    assert w.end == "2021-01"


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_compositing_matches_brute_force(seed, n_frames):
    rng = make_rng(seed)
    frames = [
        _frame(rng, h=8, w=8, month=month_add("2020-01", i % 3),
               mask=rng.random((8, 8)) < 0.3)
        for i in range(n_frames)
    ]
    window = Window("2020-01")
    comp = min_composite(frames, window)
    bands, valid = brute_force_min(frames, window)
    assert np.array_equal(comp.valid, valid)
    assert np.array_equal(comp.bands, bands)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 0.5))
def test_brighter_frame_never_changes_composite(seed, delta):
    # haze suppression: adding a uniformly brighter unmasked frame is a no-op
    rng = make_rng(seed)
    frames = [_frame(rng, month="2020-01", mask=rng.random((4, 4)) < 0.2) for _ in range(3)]
    window = Window("2020-01")
    base = min_composite(frames, window)
    stacked = np.stack([f.bands for f in frames])
    bright = RasterFrame(
        bands=(stacked.max(axis=0) + np.float32(delta)),
        mask=np.zeros((4, 4), bool),
        month="2020-02",
    )
    withb = min_composite(frames + [bright], window)
    assert np.array_equal(base.bands[:, base.valid], withb.bands[:, base.valid])
    # previously all-masked pixels become valid through the bright frame, never brighter pixels elsewhere
    assert (withb.valid | ~base.valid).all()


def test_frames_roundtrip_bit_exact(tmp_path, rng):
    frames = [_frame(rng, month="2020-01", mask=rng.random((4, 4)) < 0.5), _frame(rng, month="2020-02")]
    save_frames(tmp_path, frames)
    loaded, geotransform = load_frames(tmp_path)
    assert len(loaded) == 2
    for a, b in zip(frames, loaded):
        assert a.month == b.month
        assert np.array_equal(a.bands, b.bands)
        assert np.array_equal(a.mask, b.mask)
    assert len(geotransform) == 6
