"""Heatmap inference, sensitivity modes, blob candidates, patch cross-validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wastefinder.dataengine import Composite, NormStats, Window
from wastefinder.dataengine.spectrogram import SpectrogramField
from wastefinder.detect import (
    MODES,
    CandidateSite,
    Heatmap,
    PatchScoreGrid,
    average_timesteps,
    cross_validate,
    detect_blobs,
    infer_heatmap,
    infer_heatmap_tiled,
    infer_patch_grid,
)
from wastefinder.imageops import label_components
from wastefinder.models import PatchClassifier, PixelClassifier
from wastefinder.rng import make_rng


def test_sensitivity_modes_match_published_triples():
    assert (MODES["low"].pixel_threshold, MODES["low"].min_sigma, MODES["low"].patch_threshold) == (0.9, 5.0, 0.6)
    assert (MODES["med"].pixel_threshold, MODES["med"].min_sigma, MODES["med"].patch_threshold) == (0.6, 5.0, 0.6)
    assert (MODES["high"].pixel_threshold, MODES["high"].min_sigma, MODES["high"].patch_threshold) == (0.6, 3.5, 0.3)


def _norm_field(values, valid=None):
    v = np.ones(values.shape[:2], bool) if valid is None else valid
    return SpectrogramField(values=values.astype(np.float32), valid=v, normalized=True)


def test_constant_field_gives_constant_heatmap(rng):
    clf = PixelClassifier.build(0)
    vals = np.tile(rng.standard_normal((1, 1, 2, 12)).astype(np.float32), (6, 7, 1, 1))
    hm = infer_heatmap(clf, _norm_field(vals))
    assert hm.scores.shape == (6, 7)
    assert len(np.unique(hm.scores)) == 1


def test_unnormalized_field_rejected(rng):
    clf = PixelClassifier.build(0)
    fld = SpectrogramField(values=np.zeros((4, 4, 2, 12), np.float32), valid=np.ones((4, 4), bool))
    with pytest.raises(ValueError, match="normalized"):
        infer_heatmap(clf, fld)


def test_invalid_pixels_scored_zero_and_flagged(rng):
    clf = PixelClassifier.build(1)
    valid = np.ones((5, 5), bool)
    valid[2, 3] = False
    hm = infer_heatmap(clf, _norm_field(rng.standard_normal((5, 5, 2, 12)), valid))
    assert hm.scores[2, 3] == 0.0
    assert not hm.valid[2, 3]
    assert hm.valid.sum() == 24


@pytest.mark.parametrize("grid,workers", [((2, 2), 1), ((2, 2), 4), ((4, 4), 3), ((1, 3), 2)])
def test_tiled_heatmap_bitwise_equal(rng, grid, workers):
    clf = PixelClassifier.build(2)
    valid = rng.random((64, 64)) > 0.1
    fld = _norm_field(rng.standard_normal((64, 64, 2, 12)), valid)
    base = infer_heatmap(clf, fld)
    tiled = infer_heatmap_tiled(clf, fld, grid, workers=workers)
    assert np.array_equal(base.scores, tiled.scores)
    assert np.array_equal(base.valid, tiled.valid)


def _composite_pair_for(size, rng):
    bands_now = rng.random((12, size, size)).astype(np.float32)
    bands_prev = rng.random((12, size, size)).astype(np.float32)
    valid = np.ones((size, size), bool)
    return (
        Composite(bands=bands_now, valid=valid, window=Window("2020-07")),
        Composite(bands=bands_prev, valid=valid.copy(), window=Window("2020-01")),
    )


def _stats():
    return NormStats(mean=np.full(12, 0.5), std=np.full(12, 0.3))


def test_patch_grid_single_placement(rng):
    clf = PatchClassifier.build(3)
    c_now, c_prev = _composite_pair_for(28, rng)
    grid = infer_patch_grid(clf, c_now, c_prev, _stats())
    assert grid.scores.shape == (1, 1)
    assert grid.stride == 8 and grid.patch == 28


def test_patch_grid_44_gives_3x3(rng):
    # floor((44 - 28) / 8) + 1 = 3 positions per axis at 0, 8, 16
    clf = PatchClassifier.build(3)
    c_now, c_prev = _composite_pair_for(44, rng)
    grid = infer_patch_grid(clf, c_now, c_prev, _stats())
    assert grid.scores.shape == (3, 3)
    assert ((0 <= grid.scores) & (grid.scores <= 1)).all()
    assert grid.cell_origin(2, 1) == (8, 16)


def test_patch_grid_rejects_small_scene(rng):
    clf = PatchClassifier.build(3)
    c_now, c_prev = _composite_pair_for(20, rng)
    with pytest.raises(ValueError, match="smaller than one"):
        infer_patch_grid(clf, c_now, c_prev, _stats())


def test_grid_covering_cells():
    grid = PatchScoreGrid(scores=np.zeros((3, 3), np.float32))
    cells = grid.covering_cells(30, 2)  # x=30 covered by gx in {1, 2-} within patch extent
    assert all(gx * 8 <= 30 < gx * 8 + 28 and gy * 8 <= 2 < gy * 8 + 28 for gy, gx in cells)
    assert (0, 0) not in cells  # x=30 >= 0+28
    assert len({gx for _, gx in cells}) == 2 and len({gy for gy, _ in cells}) == 1


def test_average_single_heatmap_is_identity(rng):
    hm = Heatmap(scores=rng.random((6, 6)).astype(np.float32), valid=np.ones((6, 6), bool))
    avg = average_timesteps([hm])
    assert np.array_equal(avg.scores, hm.scores)


def test_average_arithmetic_and_masking():
    v = np.ones((2, 2), bool)
    a = Heatmap(scores=np.full((2, 2), 0.2, np.float32), valid=v.copy())
    b = Heatmap(scores=np.full((2, 2), 0.8, np.float32), valid=v.copy())
    b.valid[0, 0] = False
    avg = average_timesteps([a, b])
    assert avg.scores[1, 1] == pytest.approx(0.5)
    assert avg.scores[0, 0] == pytest.approx(0.2)  # only the frame where it is valid
    assert avg.valid.all()
    c = Heatmap(scores=np.zeros((2, 2), np.float32), valid=np.zeros((2, 2), bool))
    only_invalid = average_timesteps([c])
    assert not only_invalid.valid.any()


def test_average_rejects_empty_and_mismatched(rng):
    with pytest.raises(ValueError, match="empty"):
        average_timesteps([])
    a = Heatmap(scores=np.zeros((2, 2), np.float32), valid=np.ones((2, 2), bool))
    b = Heatmap(scores=np.zeros((3, 3), np.float32), valid=np.ones((3, 3), bool))
    with pytest.raises(ValueError, match="dimensions"):
        average_timesteps([a, b])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_average_is_permutation_invariant(seed):
    r = make_rng(seed)
    maps = [
        Heatmap(scores=r.random((5, 5)).astype(np.float32), valid=r.random((5, 5)) > 0.3)
        for _ in range(4)
    ]
    a = average_timesteps(maps)
    order = r.permutation(4)
    b = average_timesteps([maps[i] for i in order])
    assert np.allclose(a.scores, b.scores, atol=1e-7)
    assert np.array_equal(a.valid, b.valid)


def _bump(h, w, cx, cy, sigma, peak):
    ys, xs = np.mgrid[:h, :w]
    return peak * np.exp(-(((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma**2)))


def test_blob_detection_worked_cases():
    z = _bump(128, 128, 64, 60, 6, 1.0).astype(np.float32)
    hm = Heatmap(scores=z, valid=np.ones((128, 128), bool))
    cands = detect_blobs(hm, MODES["med"])
    assert len(cands) == 1
    assert np.hypot(cands[0].center_px[0] - 64, cands[0].center_px[1] - 60) <= 2.0
    assert cands[0].sigma >= MODES["med"].min_sigma

    two = np.clip(_bump(128, 128, 40, 64, 6, 0.95) + _bump(128, 128, 80, 64, 5, 0.9), 0, 1)
    cands2 = detect_blobs(Heatmap(scores=two.astype(np.float32), valid=np.ones((128, 128), bool)), MODES["med"])
    assert len(cands2) == 2

    low_peak = _bump(128, 128, 64, 64, 6, 0.7).astype(np.float32)
    assert detect_blobs(Heatmap(scores=low_peak, valid=np.ones((128, 128), bool)), MODES["low"]) == []


def test_blob_detection_empty_heatmap():
    hm = Heatmap(scores=np.zeros((64, 64), np.float32), valid=np.ones((64, 64), bool))
    assert detect_blobs(hm, MODES["med"]) == []


def test_blob_detection_ignores_single_pixel_noise():
    z = np.zeros((96, 96), np.float32)
    z[40, 40] = 0.99
    z[70, 20] = 0.95
    assert detect_blobs(Heatmap(scores=z, valid=np.ones((96, 96), bool)), MODES["high"]) == []


def test_threshold_monotonicity(rng):
    scores = rng.random((64, 64)).astype(np.float32)
    area_med = (np.where(scores >= 0.6, scores, 0) > 0).sum()
    area_low = (np.where(scores >= 0.9, scores, 0) > 0).sum()
    assert area_low <= area_med


def _cand(x, y, cid="c1"):
    return CandidateSite(
        id=cid, center_px=(x, y), center_geo=(float(x), float(y)),
        sigma=5.0, pixel_score=0.9, mode="med",
    )


def test_cross_validate_keeps_covered_above_threshold():
    grid = PatchScoreGrid(scores=np.full((3, 3), 0.65, np.float32))
    kept, report = cross_validate([_cand(20, 20)], [grid], MODES["med"])
    assert len(kept) == 1
    assert kept[0].patch_score == pytest.approx(0.65)
    assert report["accepted"] == 1


def test_cross_validate_drops_below_threshold():
    grid = PatchScoreGrid(scores=np.full((3, 3), 0.55, np.float32))
    kept, report = cross_validate([_cand(20, 20)], [grid], MODES["med"])
    assert kept == []
    assert report["rejected"] == 1
    assert report["rejected_sites"][0].patch_score == pytest.approx(0.55)


def test_cross_validate_records_max_covering_score():
    scores = np.full((3, 3), 0.2, np.float32)
    scores[1, 1] = 0.7
    grid = PatchScoreGrid(scores=scores)
    kept, _ = cross_validate([_cand(20, 20)], [grid], MODES["med"])
    assert kept[0].patch_score == pytest.approx(0.7)


def test_cross_validate_flags_uncovered():
    grid = PatchScoreGrid(scores=np.full((2, 2), 0.9, np.float32))
    kept, report = cross_validate([_cand(200, 200, "far")], [grid], MODES["med"])
    assert kept == []
    assert report["outside_grid"] == ["far"]


def test_cross_validate_output_is_subset(rng):
    grid = PatchScoreGrid(scores=rng.random((4, 4)).astype(np.float32))
    cands = [_cand(int(rng.integers(0, 50)), int(rng.integers(0, 50)), f"c{i}") for i in range(10)]
    kept, _ = cross_validate(cands, [grid], MODES["med"])
    ids = {c.id for c in cands}
    assert all(k.id in ids for k in kept)
    assert len(kept) <= len(cands)


def test_low_mode_candidates_within_high_mode_set(rng):
    # empirical per-heatmap check: everything low mode finds, high mode finds too
    z = np.zeros((200, 200))
    specs = [(40, 40, 6, 0.95), (120, 60, 7, 0.97), (60, 150, 5, 0.75), (150, 150, 6, 0.65)]
    for cx, cy, s, peak in specs:
        z += _bump(200, 200, cx, cy, s, peak)
    hm = Heatmap(scores=np.clip(z, 0, 1).astype(np.float32), valid=np.ones((200, 200), bool))
    low = detect_blobs(hm, MODES["low"])
    high = detect_blobs(hm, MODES["high"])
    assert len(low) <= len(high)
    for c in low:
        assert any(np.hypot(c.center_px[0] - h.center_px[0], c.center_px[1] - h.center_px[1]) <= 5 for h in high)


def test_blob_count_matches_component_oracle(rng):
    # K separated supra-threshold bumps: component count is the reference
    for trial in range(10):
        r = make_rng(trial)
        k = int(r.integers(0, 4))
        z = np.zeros((160, 160))
        centers = []
        for _ in range(k):
            for _ in range(50):
                cx, cy = r.uniform(25, 135, 2)
                if all(np.hypot(cx - a, cy - b) > 45 for a, b in centers):
                    centers.append((cx, cy))
                    break
            z += _bump(160, 160, centers[-1][0], centers[-1][1], r.uniform(5, 7), r.uniform(0.8, 1.0))
        hm = Heatmap(scores=np.clip(z, 0, 1).astype(np.float32), valid=np.ones((160, 160), bool))
        cands = detect_blobs(hm, MODES["med"])
        _, n_components = label_components(hm.scores >= 0.6, connectivity=8)
        assert len(cands) == n_components == len(centers)
