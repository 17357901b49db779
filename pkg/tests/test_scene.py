"""Synthetic scene generation: determinism, signatures, masks, persistence windows."""

import numpy as np
import pytest

from wastefinder.dataengine import ScenePlant, SceneSpec, generate_scene, load_scene, save_scene
from wastefinder.dataengine.raster import NIR_BAND, RED_BAND
from wastefinder.dataengine.scene import WASTE_SPECTRUM


def _months(n=10, start_year=2020):
    return [f"{start_year}-{m:02d}" for m in range(1, n + 1)]


def _spec(**kw):
    base = dict(width=64, height=64, months=_months(6), plants=[], cloud_fraction=0.0, noise=0.0, seed=3)
    base.update(kw)
    return SceneSpec(**base)


def test_same_seed_is_identical():
    spec = _spec(noise=0.02, cloud_fraction=0.2, plants=[ScenePlant(center=(30, 30), radius=6)])
    fa, _ = generate_scene(spec)
    fb, _ = generate_scene(_spec(noise=0.02, cloud_fraction=0.2, plants=[ScenePlant(center=(30, 30), radius=6)]))
    for a, b in zip(fa, fb):
        assert np.array_equal(a.bands, b.bands)
        assert np.array_equal(a.mask, b.mask)


def test_different_seed_differs():
    fa, _ = generate_scene(_spec(noise=0.02))
    fb, _ = generate_scene(_spec(noise=0.02, seed=4))
    assert not np.array_equal(fa[0].bands, fb[0].bands)


def test_noiseless_site_matches_signature_exactly():
    plant = ScenePlant(center=(32, 32), radius=5)
    frames, truth = generate_scene(_spec(plants=[plant]))
    mask = truth.plant_mask(plant, frames[0].month)
    assert mask.sum() > 0
    vals = frames[0].bands[:, mask]
    assert np.allclose(vals, WASTE_SPECTRUM[:, None].astype(np.float32), atol=1e-6)


def test_mask_fraction_within_tolerance():
    frames, _ = generate_scene(_spec(months=_months(10), cloud_fraction=0.3, noise=0.01))
    for f in frames:
        assert abs(f.mask.mean() - 0.3) <= 0.05


def test_out_of_bounds_plant_rejected():
    with pytest.raises(ValueError, match="bounds"):
        generate_scene(_spec(plants=[ScenePlant(center=(2, 2), radius=6)]))


def test_vegetation_varies_seasonally_waste_does_not():
    plant = ScenePlant(center=(32, 32), radius=5)
    months = _months(12)
    frames, truth = generate_scene(_spec(months=months, plants=[plant]))
    site = truth.plant_mask(plant, months[0])
    veg = ~site
    jan, jul = frames[0].bands, frames[6].bands
    ndvi = lambda b: (b[NIR_BAND] - b[RED_BAND]) / (b[NIR_BAND] + b[RED_BAND] + 1e-9)
    veg_shift = np.abs(ndvi(jan)[veg] - ndvi(jul)[veg])
    site_shift = np.abs(ndvi(jan)[site] - ndvi(jul)[site])
    assert np.median(veg_shift) > 0.05  # seasonal greenness cycle moves the background
    assert site_shift.max() < 1e-6  # waste spectrum is temporally stable


def test_persistence_window():
    plant = ScenePlant(center=(32, 32), radius=5, start="2020-03", end="2020-05")
    months = _months(6)
    frames, truth = generate_scene(_spec(months=months, plants=[plant]))
    mask = truth.plant_mask(plant, "2020-04")
    before = frames[0].bands[:, mask]  # january: not planted yet
    during = frames[3].bands[:, mask]  # april
    assert not np.allclose(before, WASTE_SPECTRUM[:, None], atol=1e-3)
    assert np.allclose(during, WASTE_SPECTRUM[:, None], atol=1e-6)
    assert truth.plant_mask(plant, "2020-01").sum() == 0


def test_radius_schedule_shrinks_site():
    plant = ScenePlant(center=(32, 32), radius=8, radius_by_month={"2020-04": 5.0})
    frames, truth = generate_scene(_spec(months=_months(6), plants=[plant]))
    a = truth.plant_mask(plant, "2020-02").sum()
    b = truth.plant_mask(plant, "2020-05").sum()
    assert b < a
    assert plant.radius_at("2020-03") == 8.0
    assert plant.radius_at("2020-04") == 5.0


def test_greenhouse_is_striped_waste_spectrum():
    plant = ScenePlant(center=(32, 32), radius=8, kind="greenhouse")
    frames, truth = generate_scene(_spec(plants=[plant]))
    disk = truth.plant_mask(plant, "2020-01")
    b = frames[0].bands
    is_waste = np.isclose(b, WASTE_SPECTRUM[:, None, None].astype(np.float32), atol=1e-6).all(axis=0)
    covered = is_waste[disk].mean()
    assert 0.3 < covered < 0.7  # stripes: roughly half the footprint carries the plastic spectrum
    rows_with = {r for r, c in zip(*np.nonzero(is_waste & disk))}
    assert rows_with  # stripes are row-aligned bands
    assert all(((r - 32) // 2) % 2 == 0 for r in rows_with)


def test_scene_roundtrip(tmp_path):
    spec = _spec(noise=0.01, cloud_fraction=0.1,
                 plants=[ScenePlant(center=(20, 40), radius=6, start="2020-02")])
    frames, truth = generate_scene(spec)
    save_scene(tmp_path, frames, truth, spec)
    loaded, truth2 = load_scene(tmp_path)
    assert [f.month for f in loaded] == [f.month for f in frames]
    assert np.array_equal(loaded[2].bands, frames[2].bands)
    assert truth2.plants[0].start == "2020-02"
    assert truth2.plants[0].center == (20, 40)
    assert (tmp_path / "truth.geojson").exists() and (tmp_path / "raster.json").exists()
