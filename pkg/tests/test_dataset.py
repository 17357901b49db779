"""Pixel/patch dataset assembly: polygon sampling, the NDVI screen, normalization."""

import numpy as np
import pytest

from wastefinder.dataengine import (
    NormStats,
    PatchSample,
    assemble_patch_dataset,
    assemble_pixel_dataset,
)
from wastefinder.dataengine.dataset import NDVI_POSITIVE_CUTOFF
from wastefinder.dataengine.raster import NIR_BAND, RED_BAND
from wastefinder.dataengine.spectrogram import SpectrogramField, ndvi_planes
from wastefinder.geometry import circle_ring
from wastefinder.rng import make_rng


def _field(values, valid=None):
    v = np.ones(values.shape[:2], bool) if valid is None else valid
    return SpectrogramField(values=values.astype(np.float32), valid=v)


def _flat_patch(h=16, w=16, base=0.3, seed=0):
    rng = make_rng(seed)
    vals = np.full((h, w, 2, 12), base) + 0.02 * rng.standard_normal((h, w, 2, 12))
    return np.abs(vals)


def test_polygon_scopes_positive_sampling():
    vals = _flat_patch()
    patch = PatchSample(field=_field(vals), label=1, pos_polygons=[circle_ring(8, 8, 3)])
    ds = assemble_pixel_dataset([patch, PatchSample(field=_field(_flat_patch(seed=1)), label=0)])
    # pixel centers within radius 3 of (8, 8)
    ys, xs = np.mgrid[:16, :16]
    expected = ((xs + 0.5 - 8) ** 2 + (ys + 0.5 - 8) ** 2 <= 9).sum()
    assert len(ds.positives) == expected
    assert len(ds.negatives) == 16 * 16


def test_degenerate_polygon_warns_not_fails():
    vals = _flat_patch()
    patch = PatchSample(field=_field(vals), label=1, pos_polygons=[circle_ring(8, 8, 0.01)])
    neg = PatchSample(field=_field(_flat_patch(seed=2)), label=0)
    with pytest.warns(UserWarning, match="no valid pixels"):
        ds = assemble_pixel_dataset([patch, neg])
    assert len(ds.positives) == 0
    assert ds.warnings


def test_ndvi_filter_deletes_vegetated_positives():
    # 100 in-polygon pixels, 20 pushed above the cutoff -> 80 positives
    vals = np.full((10, 10, 2, 12), 0.3)
    vals[..., NIR_BAND] = 0.3
    vals[..., RED_BAND] = 0.3  # ndvi 0 everywhere
    ys, xs = np.mgrid[:10, :10]
    flat_order = np.argsort((ys * 10 + xs).ravel())[:20]
    rr, cc = np.unravel_index(flat_order, (10, 10))
    vals[rr, cc, 0, NIR_BAND] = 0.9
    vals[rr, cc, 0, RED_BAND] = 0.1  # ndvi 0.8 on row 0
    ring = np.array([[-1.0, -1.0], [11.0, -1.0], [11.0, 11.0], [-1.0, 11.0]])
    patch = PatchSample(field=_field(vals), label=1, pos_polygons=[ring])
    neg = PatchSample(field=_field(_flat_patch(10, 10, seed=3)), label=0)
    ds = assemble_pixel_dataset([patch, neg])
    assert len(ds.positives) == 80
    assert ds.ndvi_deleted == 20


def test_either_row_above_cutoff_deletes():
    vals = np.full((4, 4, 2, 12), 0.3)
    vals[..., NIR_BAND], vals[..., RED_BAND] = 0.3, 0.3
    vals[0, 0, 1, NIR_BAND], vals[0, 0, 1, RED_BAND] = 0.9, 0.1  # vegetated six months ago
    ring = np.array([[-1.0, -1.0], [5.0, -1.0], [5.0, 5.0], [-1.0, 5.0]])
    ds = assemble_pixel_dataset(
        [PatchSample(field=_field(vals), label=1, pos_polygons=[ring]),
         PatchSample(field=_field(_flat_patch(4, 4, seed=4)), label=0)]
    )
    assert len(ds.positives) == 15


def test_no_positive_output_exceeds_cutoff(rng):
    vals = np.abs(rng.random((12, 12, 2, 12)))
    ring = np.array([[-1.0, -1.0], [13.0, -1.0], [13.0, 13.0], [-1.0, 13.0]])
    ds = assemble_pixel_dataset(
        [PatchSample(field=_field(vals), label=1, pos_polygons=[ring]),
         PatchSample(field=_field(_flat_patch(12, 12, seed=5)), label=0)]
    )
    raw = ds.stats.denormalize(ds.positives)
    assert not (ndvi_planes(raw) > NDVI_POSITIVE_CUTOFF + 1e-6).any()


def test_normalized_training_set_is_zero_mean_unit_std():
    patches = [
        PatchSample(field=_field(_flat_patch(seed=6)), label=1,
                    pos_polygons=[np.array([[-1.0, -1.0], [17.0, -1.0], [17.0, 17.0], [-1.0, 17.0]])]),
        PatchSample(field=_field(_flat_patch(base=0.5, seed=7)), label=0),
    ]
    ds = assemble_pixel_dataset(patches)
    pooled = np.concatenate([ds.positives, ds.negatives]).reshape(-1, 12)
    assert np.abs(pooled.mean(axis=0)).max() < 1e-6
    assert np.abs(pooled.std(axis=0) - 1.0).max() < 1e-6


def test_normalization_roundtrip(rng):
    stats = NormStats(mean=rng.random(12) + 0.2, std=rng.random(12) + 0.5)
    x = rng.random((30, 2, 12)).astype(np.float32)
    back = stats.denormalize(stats.normalize(x))
    assert np.abs(back - x).max() < 1e-6


def test_stats_require_positive_std():
    with pytest.raises(ValueError, match="std"):
        NormStats(mean=np.zeros(12), std=np.zeros(12))


def test_explicit_negative_zones_are_sampled():
    vals = _flat_patch()
    patch = PatchSample(
        field=_field(vals), label=0,
        neg_polygons=[circle_ring(8, 8, 3)],
    )
    patch_pos = PatchSample(
        field=_field(_flat_patch(seed=8)), label=1,
        pos_polygons=[circle_ring(8, 8, 4)],
        neg_polygons=[circle_ring(3, 3, 2)],
    )
    ds = assemble_pixel_dataset([patch_pos, patch])
    ys, xs = np.mgrid[:16, :16]
    n_negzone = ((xs + 0.5 - 3) ** 2 + (ys + 0.5 - 3) ** 2 <= 4).sum()
    assert len(ds.negatives) == 16 * 16 + n_negzone


def test_patch_dataset_shapes_and_masking():
    stats = NormStats(mean=np.full(12, 0.3), std=np.full(12, 0.1))
    valid = np.ones((28, 28), bool)
    valid[0, 0] = False
    vals = np.full((28, 28, 2, 12), 0.4, np.float32)
    x, y, ids = assemble_patch_dataset(
        [PatchSample(field=SpectrogramField(values=vals, valid=valid), label=1, patch_id="p0")], stats
    )
    assert x.shape == (1, 28, 28, 24)
    assert y.tolist() == [1.0]
    assert ids == ["p0"]
    assert np.allclose(x[0, 0, 0], 0.0)  # invalid pixel sits at the channel mean
    assert np.allclose(x[0, 1, 1], 1.0)  # (0.4 - 0.3) / 0.1


def test_patch_dataset_rejects_wrong_extent():
    stats = NormStats(mean=np.full(12, 0.3), std=np.full(12, 0.1))
    fld = SpectrogramField(values=np.zeros((10, 10, 2, 12), np.float32), valid=np.ones((10, 10), bool))
    with pytest.raises(ValueError, match="extent"):
        assemble_patch_dataset([PatchSample(field=fld, label=0)], stats)
