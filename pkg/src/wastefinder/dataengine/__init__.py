"""Stage-1 data generation: compositing, spectrogram pairing, dataset assembly, synthetic scenes."""

from wastefinder.dataengine.months import month_add, month_diff, month_index, month_str
from wastefinder.dataengine.raster import (
    BAND_ORDER,
    NIR_BAND,
    RED_BAND,
    Composite,
    EmptyWindowError,
    RasterFrame,
    Window,
    min_composite,
)
from wastefinder.dataengine.spectrogram import SpectrogramField, build_spectrogram_field, ndvi, ndvi_planes
from wastefinder.dataengine.dataset import (
    NormStats,
    PatchSample,
    PixelDataset,
    assemble_patch_dataset,
    assemble_pixel_dataset,
    patch_tensor,
)
from wastefinder.dataengine.scene import SceneSpec, ScenePlant, SceneTruth, generate_scene, load_scene, save_scene

__all__ = [
    "BAND_ORDER",
    "Composite",
    "EmptyWindowError",
    "NIR_BAND",
    "NormStats",
    "PatchSample",
    "PixelDataset",
    "RasterFrame",
    "RED_BAND",
    "SceneSpec",
    "ScenePlant",
    "SceneTruth",
    "SpectrogramField",
    "Window",
    "assemble_patch_dataset",
    "assemble_pixel_dataset",
    "build_spectrogram_field",
    "generate_scene",
    "load_scene",
    "min_composite",
    "month_add",
    "month_diff",
    "month_index",
    "month_str",
    "ndvi",
    "ndvi_planes",
    "patch_tensor",
    "save_scene",
]
