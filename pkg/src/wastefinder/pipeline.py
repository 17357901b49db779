"""End-to-end orchestration: scene synthesis, dataset extraction, model training, evaluation.

This is the glue the CLI, the experiment scripts, and the acceptance checks
share. Training scenes deliberately include greenhouse-style confusers and
sites that appear or vanish mid-catalog, so the datasets carry the negative
modes the pipeline is expected to reject (spectral look-alikes, single-epoch
ground).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from wastefinder.dataengine.dataset import (
    PATCH_SIZE,
    PatchSample,
    assemble_patch_dataset,
    assemble_pixel_dataset,
)
from wastefinder.dataengine.months import month_add, month_index
from wastefinder.dataengine.raster import RasterFrame, Window
from wastefinder.dataengine.scene import ScenePlant, SceneSpec, SceneTruth, generate_scene
from wastefinder.dataengine.spectrogram import SpectrogramField
from wastefinder.detect import CandidateSite, DetectionResult, composite_pair
from wastefinder.dataengine.spectrogram import build_spectrogram_field
from wastefinder.distill import (
    ModelStats,
    SoftTarget,
    build_soft_targets,
    train_student,
)
from wastefinder.models import (
    ModelBundle,
    PatchTrainConfig,
    config_hash,
    train_pixel_classifier,
    train_teacher_ensemble,
)
from wastefinder.nn import TrainConfig
from wastefinder.rng import spawn
from wastefinder.svm import default_gamma, train_svm


@dataclass
class TrainingRunConfig:
    """Knobs for the desk-scale training run; defaults fit a single-core budget."""

    seed: int = 0
    scene_size: int = 288
    n_scenes: int = 3
    catalog_start: str = "2020-01"
    catalog_months: int = 12
    timesteps_per_scene: int = 2
    sites_per_scene: int = 6
    greenhouses_per_scene: int = 3
    transients_per_scene: int = 2
    background_patches_per_scene: int = 8
    unlabeled_patches: int = 128
    pixel_epochs: int = 30
    max_pixel_positives: int = 3000  # subsample caps keep the run on budget while
    max_pixel_negatives: int = 9000  # preserving the 1:3 imbalanced regime
    teacher_count: int = 32
    teacher_epochs: int = 10
    teacher_augment: bool = False
    student_epochs: int = 12
    student_augment: bool = True
    svm_C: float = 1.0
    holdout_fraction: float = 0.2
    noise: float = 0.012
    cloud_fraction: float = 0.12

    def catalog(self) -> list[str]:
        return [month_add(self.catalog_start, i) for i in range(self.catalog_months)]

    def timestep_months(self) -> list[str]:
        cat = self.catalog()
        usable = [m for m in cat if month_index(m) - month_index(cat[0]) >= 8]
        return usable[: self.timesteps_per_scene]


def _random_plants(cfg: TrainingRunConfig, rng: np.random.Generator) -> list[ScenePlant]:
    """Sites, greenhouse confusers, and mid-catalog transients at non-overlapping spots."""
    placed: list[tuple[float, float, float]] = []
    plants: list[ScenePlant] = []
    margin = PATCH_SIZE
    cat = [month_add(cfg.catalog_start, i) for i in range(cfg.catalog_months)]

    def place(radius: float) -> tuple[float, float]:
        for _ in range(300):
            x = rng.uniform(margin, cfg.scene_size - margin)
            y = rng.uniform(margin, cfg.scene_size - margin)
            if all(np.hypot(x - px, y - py) > radius + pr + PATCH_SIZE for px, py, pr in placed):
                placed.append((x, y, radius))
                return (float(x), float(y))
        raise RuntimeError("could not place plants without overlap; lower the counts")

    for _ in range(cfg.sites_per_scene):
        r = float(rng.uniform(6.0, 11.0))
        plants.append(ScenePlant(center=place(r), radius=r, kind="site"))
    for _ in range(cfg.greenhouses_per_scene):
        r = float(rng.uniform(8.0, 12.0))
        plants.append(ScenePlant(center=place(r), radius=r, kind="greenhouse"))
    for i in range(cfg.transients_per_scene):
        r = float(rng.uniform(6.0, 10.0))
        if i % 2 == 0:  # appears mid-catalog
            plants.append(ScenePlant(center=place(r), radius=r, kind="site", start=cat[len(cat) // 2]))
        else:  # vanishes mid-catalog
            plants.append(ScenePlant(center=place(r), radius=r, kind="site", end=cat[len(cat) // 2]))
    return plants


def training_scene_specs(cfg: TrainingRunConfig) -> list[SceneSpec]:
    specs = []
    for i in range(cfg.n_scenes):
        rng = spawn(cfg.seed, 10, i)
        specs.append(
            SceneSpec(
                width=cfg.scene_size,
                height=cfg.scene_size,
                months=cfg.catalog(),
                plants=_random_plants(cfg, rng),
                cloud_fraction=cfg.cloud_fraction,
                noise=cfg.noise,
                seed=cfg.seed * 1000 + i,
            )
        )
    return specs


# ---------------------------------------------------------------------------
# patch extraction from a scene


def crop_field(fld: SpectrogramField, cx: float, cy: float, size: int = PATCH_SIZE) -> SpectrogramField | None:
    x0 = int(round(cx)) - size // 2
    y0 = int(round(cy)) - size // 2
    if x0 < 0 or y0 < 0 or x0 + size > fld.width or y0 + size > fld.height:
        return None
    return SpectrogramField(
        values=fld.values[y0 : y0 + size, x0 : x0 + size].copy(),
        valid=fld.valid[y0 : y0 + size, x0 : x0 + size].copy(),
        normalized=fld.normalized,
    )


def _fully_present(plant: ScenePlant, window: Window) -> bool:
    return all(plant.present(m) for m in window.months)


def _fully_absent(plant: ScenePlant, window: Window) -> bool:
    return not any(plant.present(m) for m in window.months)


def extract_training_patches(frames: list[RasterFrame], truth: SceneTruth, months: list[str],
                             rng: np.random.Generator, n_background: int = 10,
                             scene_tag: str = "s", jitter_px: float = 6.0) -> list[PatchSample]:
    """PatchSamples around plants plus random background patches, per timestep.

    A site fully present in both compositing windows becomes a positive patch
    with its extent as the positive polygon. A site present in exactly one
    window becomes a negative patch whose extent is an explicit negative zone
    (single-epoch ground is not waste under the six-month pairing). Greenhouse
    confusers and background crops are plain negatives. Crops are jittered off
    center: at inference the patch lattice sees targets at arbitrary offsets,
    so centered-only training would not transfer.
    """
    out: list[PatchSample] = []
    for month in months:
        c_now, c_prev = composite_pair(frames, month)
        fld, _ = build_spectrogram_field(c_now, c_prev)
        win_now, win_prev = c_now.window, c_prev.window
        for pi, plant in enumerate(truth.plants):
            # confusers are cropped at several offsets spanning the full covering
            # range of the lattice: rejection must hold for *every* covering
            # patch, including ones that catch only a corner of the stripes
            n_crops = 3 if plant.kind == "greenhouse" else 1
            spread = (PATCH_SIZE // 2 - 1) if plant.kind == "greenhouse" else jitter_px
            for ci in range(n_crops):
                jx, jy = rng.uniform(-spread, spread, 2)
                crop = crop_field(fld, plant.center[0] + jx, plant.center[1] + jy)
                if crop is None:
                    continue
                cx = plant.center[0] - (int(round(plant.center[0] + jx)) - PATCH_SIZE // 2)
                cy = plant.center[1] - (int(round(plant.center[1] + jy)) - PATCH_SIZE // 2)
                r_now = plant.radius_at(month)
                ring = _circle(cx, cy, r_now)  # rasterization clips the off-patch part
                tag = f"{scene_tag}-{month}-p{pi}-{ci}"
                if plant.kind == "greenhouse":
                    out.append(PatchSample(field=crop, label=0, patch_id=tag + "-gh"))
                elif _fully_present(plant, win_now) and _fully_present(plant, win_prev):
                    out.append(PatchSample(field=crop, label=1, pos_polygons=[ring], patch_id=tag))
                elif (_fully_present(plant, win_now) and _fully_absent(plant, win_prev)) or (
                    _fully_absent(plant, win_now) and _fully_present(plant, win_prev)
                ):
                    out.append(PatchSample(field=crop, label=0, neg_polygons=[ring], patch_id=tag + "-half"))
                # partially covered windows are ambiguous; skip them
        for bi in range(n_background):
            for _ in range(50):
                cx = rng.uniform(PATCH_SIZE, truth.width - PATCH_SIZE)
                cy = rng.uniform(PATCH_SIZE, truth.height - PATCH_SIZE)
                if all(np.hypot(cx - p.center[0], cy - p.center[1]) > p.radius + PATCH_SIZE for p in truth.plants):
                    break
            crop = crop_field(fld, cx, cy)
            if crop is not None and crop.valid.mean() > 0.7:
                out.append(PatchSample(field=crop, label=0, patch_id=f"{scene_tag}-{month}-bg{bi}"))
    return out


def _circle(cx: float, cy: float, r: float, n: int = 24) -> np.ndarray:
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t)])


# ---------------------------------------------------------------------------
# the full training run


@dataclass
class PipelineArtifacts:
    bundle: ModelBundle
    soft_targets: list[SoftTarget]
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


def f1_score(pred: np.ndarray, truth: np.ndarray) -> float:
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    tp = int((pred & truth).sum())
    fp = int((pred & ~truth).sum())
    fn = int((~pred & truth).sum())
    return 2.0 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0


def run_training(cfg: TrainingRunConfig, progress=None) -> PipelineArtifacts:
    """Generate scenes, assemble datasets, and train every model of the bundle."""

    def note(msg):
        if progress is not None:
            progress(msg)

    timings = {}
    t0 = time.perf_counter()
    patches: list[PatchSample] = []
    months = None
    for si, spec in enumerate(training_scene_specs(cfg)):
        frames, truth = generate_scene(spec)
        months = cfg.timestep_months()
        patches += extract_training_patches(
            frames, truth, months, spawn(cfg.seed, 20, si),
            n_background=cfg.background_patches_per_scene, scene_tag=f"sc{si}",
        )
    timings["scenes"] = time.perf_counter() - t0
    note(f"scenes + patches: {len(patches)} patches in {timings['scenes']:.1f}s")

    t0 = time.perf_counter()
    pixel_ds = assemble_pixel_dataset(patches)
    stats = pixel_ds.stats
    rng_sub = spawn(cfg.seed, 25)
    if len(pixel_ds.positives) > cfg.max_pixel_positives:
        keep = rng_sub.choice(len(pixel_ds.positives), cfg.max_pixel_positives, replace=False)
        pixel_ds.positives = pixel_ds.positives[np.sort(keep)]
    if len(pixel_ds.negatives) > cfg.max_pixel_negatives:
        keep = rng_sub.choice(len(pixel_ds.negatives), cfg.max_pixel_negatives, replace=False)
        pixel_ds.negatives = pixel_ds.negatives[np.sort(keep)]
    n_pos, n_neg = len(pixel_ds.positives), len(pixel_ds.negatives)
    pixel_clf, pixel_hist = train_pixel_classifier(
        pixel_ds, TrainConfig(epochs=cfg.pixel_epochs, seed=cfg.seed + 1), seed=cfg.seed + 1
    )
    x_pix, y_pix = pixel_ds.training_arrays()
    pixel_acc = float(((pixel_clf.score(x_pix) > 0.5) == (y_pix > 0.5)).mean())
    timings["pixel"] = time.perf_counter() - t0
    note(f"pixel classifier: {n_pos} pos / {n_neg} neg, train acc {pixel_acc:.3f} in {timings['pixel']:.1f}s")

    # labeled patch tensors, held-out split for voter statistics
    labeled = [p for p in patches if p.label == 1 or not p.neg_polygons]
    x_patch, y_patch, _ = assemble_patch_dataset(labeled, stats)
    rng_split = spawn(cfg.seed, 30)
    order = rng_split.permutation(len(x_patch))
    n_hold = max(int(len(x_patch) * cfg.holdout_fraction), 4)
    hold_idx, fit_idx = order[:n_hold], order[n_hold:]
    x_fit, y_fit = x_patch[fit_idx], y_patch[fit_idx]
    x_hold, y_hold = x_patch[hold_idx], y_patch[hold_idx]
    if len(np.unique(y_fit)) < 2 or len(np.unique(y_hold)) < 2:  # tiny runs: fall back to full set
        x_fit, y_fit = x_patch, y_patch
        x_hold, y_hold = x_patch, y_patch

    t0 = time.perf_counter()
    teacher_cfg = PatchTrainConfig(epochs=cfg.teacher_epochs, augment=cfg.teacher_augment)
    teachers = train_teacher_ensemble(
        x_fit, y_fit, teacher_cfg, base_seed=cfg.seed + 100, size=cfg.teacher_count,
        progress=lambda i, n: note(f"teacher {i}/{n}") if i % 8 == 0 else None,
    )
    timings["teachers"] = time.perf_counter() - t0
    note(f"{cfg.teacher_count} teachers in {timings['teachers']:.1f}s")

    t0 = time.perf_counter()
    flat_fit = x_fit.reshape(len(x_fit), -1)
    svm = train_svm(flat_fit, y_fit, C=cfg.svm_C, gamma=default_gamma(flat_fit))
    svm_stats = ModelStats.from_predictions(svm.predict(x_hold.reshape(len(x_hold), -1)), y_hold)
    from wastefinder.distill import patch_pixel_scores, pixel_aggregate_label

    pix_votes = [pixel_aggregate_label(s) for s in patch_pixel_scores(x_hold, pixel_clf)]
    pixel_stats = ModelStats.from_predictions(np.array(pix_votes), y_hold)
    timings["svm"] = time.perf_counter() - t0
    note(f"svm + voter stats in {timings['svm']:.1f}s "
         f"(svm tpr/fpr {svm_stats.tpr:.3f}/{svm_stats.fpr:.3f})")

    # unlabeled pool for distillation: fresh scene, no labels used
    t0 = time.perf_counter()
    unl_spec = training_scene_specs(cfg)[0]
    unl_spec = SceneSpec(
        width=unl_spec.width, height=unl_spec.height, months=unl_spec.months,
        plants=_random_plants(cfg, spawn(cfg.seed, 40)), cloud_fraction=cfg.cloud_fraction,
        noise=cfg.noise, seed=cfg.seed * 1000 + 77,
    )
    frames_u, truth_u = generate_scene(unl_spec)
    unl_patches = extract_training_patches(
        frames_u, truth_u, months, spawn(cfg.seed, 41),
        n_background=cfg.background_patches_per_scene, scene_tag="unl",
    )
    rng_u = spawn(cfg.seed, 42)
    if len(unl_patches) > cfg.unlabeled_patches:
        unl_patches = [unl_patches[i] for i in rng_u.choice(len(unl_patches), cfg.unlabeled_patches, replace=False)]
    x_unl, _, ids_unl = assemble_patch_dataset(unl_patches, stats)  # labels ignored: unlabeled pool
    soft = build_soft_targets(x_unl, ids_unl, teachers, svm, pixel_clf, svm_stats, pixel_stats)
    timings["soft_targets"] = time.perf_counter() - t0
    note(f"{len(soft)} soft targets in {timings['soft_targets']:.1f}s")

    t0 = time.perf_counter()
    student_cfg = PatchTrainConfig(epochs=cfg.student_epochs, augment=cfg.student_augment)
    student, _ = train_student(
        x_fit, y_fit, x_unl, np.array([t.soft_p for t in soft]), student_cfg, seed=cfg.seed + 500
    )
    timings["student"] = time.perf_counter() - t0
    note(f"student in {timings['student']:.1f}s")

    bundle = ModelBundle(
        stats=stats,
        pixel=pixel_clf,
        teachers=teachers,
        svm=svm,
        student=student,
        manifest={
            "seeds": {"base": cfg.seed, "teachers": teachers.seeds},
            "config_hash": config_hash(vars(cfg)),
            "pixel_dataset": {"positives": n_pos, "negatives": n_neg, "ndvi_deleted": pixel_ds.ndvi_deleted},
        },
    )
    metrics = {
        "pixel_train_accuracy": pixel_acc,
        "pixel_loss": pixel_hist,
        "pixel_positives": n_pos,
        "pixel_negatives": n_neg,
        "svm_stats": {"tpr": svm_stats.tpr, "fpr": svm_stats.fpr},
        "pixel_vote_stats": {"tpr": pixel_stats.tpr, "fpr": pixel_stats.fpr},
        "patch_counts": {"fit": len(x_fit), "holdout": len(x_hold), "unlabeled": len(x_unl)},
    }
    return PipelineArtifacts(bundle=bundle, soft_targets=soft, metrics=metrics, timings=timings)


# ---------------------------------------------------------------------------
# evaluation against planted truth


def match_candidates(cands: list[CandidateSite], truth: SceneTruth, month: str,
                     slack_px: float = 6.0) -> dict:
    """Site-level recall/precision: a candidate matches a site when its center
    falls within the site radius plus slack."""
    sites = [p for p in truth.sites() if p.present(month)]
    matched = set()
    true_pos = []
    false_pos = []
    for c in cands:
        hit = None
        for i, s in enumerate(sites):
            if np.hypot(c.center_px[0] - s.center[0], c.center_px[1] - s.center[1]) <= s.radius + slack_px:
                hit = i
                break
        if hit is None:
            false_pos.append(c)
        else:
            matched.add(hit)
            true_pos.append(c)
    recall = len(matched) / len(sites) if sites else None
    precision = len(true_pos) / len(cands) if cands else None
    return {
        "sites": len(sites),
        "detected": len(matched),
        "recall": recall,
        "precision": precision,
        "false_positives": len(false_pos),
    }


def confuser_rejection(result: DetectionResult, truth: SceneTruth, slack_px: float = 6.0) -> dict:
    """How many pixel-stage-flagged greenhouse confusers did the patch stage reject?

    Pixel-stage flags are blob candidates before cross-validation; a confuser
    counts as rejected when none of its flags survive it.
    """
    pre = result.candidates + result.rejected
    kept_ids = {c.id for c in result.candidates}

    def near(c, plant):
        return np.hypot(c.center_px[0] - plant.center[0], c.center_px[1] - plant.center[1]) <= plant.radius + slack_px

    flagged, rejected = 0, 0
    for plant in truth.confusers():
        flags = [c for c in pre if near(c, plant)]
        if not flags:
            continue
        flagged += 1
        if not any(c.id in kept_ids for c in flags):
            rejected += 1
    return {"flagged": flagged, "rejected": rejected,
            "rejection_rate": rejected / flagged if flagged else None}
