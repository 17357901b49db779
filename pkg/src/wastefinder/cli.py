"""Command-line entry point.

Subcommands: gen-scene, train-pixel, train-teachers, train-svm, distill,
detect, monitor, serve, eval. Every run writes a manifest (config hash, seeds,
version) next to its artifacts. Exit codes: 0 success, 1 usage error, 2 data
error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

import wastefinder
from wastefinder.server.config import ConfigError, load_config, optional, require

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; usage errors are 1 here
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _write_manifest(out_dir: Path, command: str, cfg: dict, seed) -> None:
    from wastefinder.models import config_hash

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(
        json.dumps(
            {
                "command": command,
                "config_hash": config_hash(cfg),
                "seed": seed,
                "version": wastefinder.__version__,
                "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            },
            indent=2,
        )
    )


def _scene_spec_from_config(cfg: dict, seed_override=None):
    from wastefinder.dataengine.scene import ScenePlant, SceneSpec

    plants = []
    for i, p in enumerate(optional(cfg, "scene.plants", [])):
        try:
            plants.append(
                ScenePlant(
                    center=tuple(p["center"]),
                    radius=float(p["radius"]),
                    kind=p.get("kind", "site"),
                    start=p.get("start"),
                    end=p.get("end"),
                    radius_by_month=p.get("radius_by_month") or {},
                )
            )
        except KeyError as e:
            raise ConfigError(f"scene.plants[{i}].{e.args[0]}", "missing")
    months = optional(cfg, "scene.months")
    if months is None:
        from wastefinder.dataengine.months import month_add

        start = require(cfg, "scene.catalog_start", str)
        count = require(cfg, "scene.catalog_months", int)
        months = [month_add(start, i) for i in range(count)]
    return SceneSpec(
        width=require(cfg, "scene.width", int),
        height=require(cfg, "scene.height", int),
        months=months,
        plants=plants,
        cloud_fraction=optional(cfg, "scene.cloud_fraction", 0.15),
        noise=optional(cfg, "scene.noise", 0.01),
        seed=seed_override if seed_override is not None else optional(cfg, "scene.seed", 0),
    )


def _load_training_patches(cfg: dict):
    """Patches + scene handles from the scene dirs listed under train.scenes."""
    from wastefinder.dataengine.scene import load_scene
    from wastefinder.pipeline import extract_training_patches
    from wastefinder.rng import spawn

    scene_dirs = require(cfg, "train.scenes", list)
    timesteps = require(cfg, "train.timesteps", list)
    n_bg = optional(cfg, "train.background_patches", 10)
    seed = optional(cfg, "train.seed", 0)
    patches = []
    for si, sdir in enumerate(scene_dirs):
        if not Path(sdir).is_dir():
            raise FileNotFoundError(f"scene directory {sdir} not found")
        frames, truth = load_scene(sdir)
        patches += extract_training_patches(
            frames, truth, timesteps, spawn(seed, 20, si), n_background=n_bg, scene_tag=f"sc{si}"
        )
    return patches


def _labeled_patch_arrays(cfg: dict, patches, stats):
    from wastefinder.dataengine.dataset import assemble_patch_dataset

    labeled = [p for p in patches if p.label == 1 or not p.neg_polygons]
    return assemble_patch_dataset(labeled, stats)


# ---------------------------------------------------------------------------
# subcommand bodies


def cmd_gen_scene(args, cfg) -> int:
    from wastefinder.dataengine.scene import generate_scene, save_scene

    spec = _scene_spec_from_config(cfg, seed_override=args.seed)
    frames, truth = generate_scene(spec)
    out = Path(args.out)
    save_scene(out, frames, truth, spec)
    _write_manifest(out, "gen-scene", cfg, spec.seed)
    print(f"scene: {len(frames)} frames {spec.width}x{spec.height} -> {out}")
    return EXIT_OK


def cmd_train_pixel(args, cfg) -> int:
    from wastefinder.dataengine.dataset import assemble_pixel_dataset
    from wastefinder.models import train_pixel_classifier
    from wastefinder.nn import TrainConfig

    seed = args.seed if args.seed is not None else optional(cfg, "train.seed", 0)
    patches = _load_training_patches(cfg)
    ds = assemble_pixel_dataset(patches)
    clf, history = train_pixel_classifier(
        ds, TrainConfig(epochs=optional(cfg, "train.pixel_epochs", 30), seed=seed), seed=seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds.stats.save(out / "norm_stats.json")
    clf.save(out / "pixel.wfnet")
    x, y = ds.training_arrays()
    acc = float(((clf.score(x) > 0.5) == (y > 0.5)).mean())
    (out / "pixel_metrics.json").write_text(
        json.dumps(
            {
                "positives": len(ds.positives),
                "negatives": len(ds.negatives),
                "ndvi_deleted": ds.ndvi_deleted,
                "train_accuracy": acc,
                "loss_history": history,
            },
            indent=2,
        )
    )
    _write_manifest(out, "train-pixel", cfg, seed)
    print(f"pixel classifier: {len(ds.positives)} pos / {len(ds.negatives)} neg, train acc {acc:.4f}")
    return EXIT_OK


def cmd_train_teachers(args, cfg) -> int:
    from wastefinder.dataengine.dataset import NormStats
    from wastefinder.models import PatchTrainConfig, train_teacher_ensemble

    out = Path(args.out)
    stats_path = out / "norm_stats.json"
    if not stats_path.exists():
        raise FileNotFoundError(f"{stats_path} missing; run train-pixel into {out} first")
    stats = NormStats.load(stats_path)
    seed = args.seed if args.seed is not None else optional(cfg, "train.seed", 0)
    patches = _load_training_patches(cfg)
    x, y, _ = _labeled_patch_arrays(cfg, patches, stats)
    ens = train_teacher_ensemble(
        x, y,
        PatchTrainConfig(
            epochs=optional(cfg, "train.teacher_epochs", 10),
            augment=optional(cfg, "train.teacher_augment", False),
        ),
        base_seed=seed + 100,
        size=optional(cfg, "train.teacher_count", 32),
        progress=lambda i, n: print(f"  teacher {i}/{n}", flush=True) if i % 8 == 0 else None,
    )
    tdir = out / "teachers"
    tdir.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(ens.members):
        m.save(tdir / f"teacher_{i:02d}.wfnet")
    (out / "teacher_metrics.json").write_text(json.dumps({"seeds": ens.seeds, "metrics": ens.metrics}, indent=2))
    _write_manifest(out, "train-teachers", cfg, seed)
    print(f"trained {len(ens.members)} teachers on {len(x)} patches")
    return EXIT_OK


def cmd_train_svm(args, cfg) -> int:
    from wastefinder.dataengine.dataset import NormStats
    from wastefinder.svm import train_svm

    out = Path(args.out)
    stats = NormStats.load(out / "norm_stats.json")
    seed = args.seed if args.seed is not None else optional(cfg, "train.seed", 0)
    patches = _load_training_patches(cfg)
    x, y, _ = _labeled_patch_arrays(cfg, patches, stats)
    flat = x.reshape(len(x), -1)
    svm = train_svm(flat, y, C=optional(cfg, "train.svm_C", 1.0), gamma=optional(cfg, "train.svm_gamma"))
    svm.save(out / "svm.wfsvm")
    _write_manifest(out, "train-svm", cfg, seed)
    print(f"svm: {len(svm.dual_coef)} support vectors")
    return EXIT_OK


def cmd_distill(args, cfg) -> int:
    from wastefinder.dataengine.dataset import NormStats, assemble_patch_dataset
    from wastefinder.dataengine.scene import load_scene
    from wastefinder.distill import (
        ModelStats,
        build_soft_targets,
        patch_pixel_scores,
        pixel_aggregate_label,
        save_soft_targets,
        train_student,
    )
    from wastefinder.models import PatchClassifier, PatchTrainConfig, PixelClassifier, TeacherEnsemble
    from wastefinder.pipeline import extract_training_patches
    from wastefinder.rng import spawn
    from wastefinder.svm import RbfSvm

    out = Path(args.out)
    stats = NormStats.load(out / "norm_stats.json")
    pixel = PixelClassifier.load(out / "pixel.wfnet")
    svm = RbfSvm.load(out / "svm.wfsvm")
    tdir = out / "teachers"
    tfiles = sorted(tdir.glob("teacher_*.wfnet"))
    if not tfiles:
        raise FileNotFoundError(f"no teacher weights under {tdir}; run train-teachers first")
    teachers = TeacherEnsemble(
        members=[PatchClassifier.load(p) for p in tfiles], seeds=list(range(len(tfiles)))
    )
    seed = args.seed if args.seed is not None else optional(cfg, "train.seed", 0)

    patches = _load_training_patches(cfg)
    x, y, _ = _labeled_patch_arrays(cfg, patches, stats)
    rng = spawn(seed, 30)
    order = rng.permutation(len(x))
    n_hold = max(int(len(x) * optional(cfg, "train.holdout_fraction", 0.2)), 4)
    hold, fit = order[:n_hold], order[n_hold:]
    if len(np.unique(y[fit])) < 2 or len(np.unique(y[hold])) < 2:
        hold = fit = np.arange(len(x))
    svm_stats = ModelStats.from_predictions(svm.predict(x[hold].reshape(len(hold), -1)), y[hold])
    pix_votes = [pixel_aggregate_label(s) for s in patch_pixel_scores(x[hold], pixel)]
    pixel_stats = ModelStats.from_predictions(np.array(pix_votes), y[hold])

    unl_dirs = require(cfg, "distill.unlabeled_scenes", list)
    timesteps = require(cfg, "train.timesteps", list)
    unl_patches = []
    for si, sdir in enumerate(unl_dirs):
        frames, truth = load_scene(sdir)
        unl_patches += extract_training_patches(
            frames, truth, timesteps, spawn(seed, 41, si),
            n_background=optional(cfg, "train.background_patches", 10), scene_tag=f"unl{si}",
        )
    x_unl, _, ids = assemble_patch_dataset(unl_patches, stats)
    soft = build_soft_targets(x_unl, ids, teachers, svm, pixel, svm_stats, pixel_stats)
    save_soft_targets(out / "soft_targets.jsonl", soft)

    student, _ = train_student(
        x[fit], y[fit], x_unl, np.array([t.soft_p for t in soft]),
        PatchTrainConfig(
            epochs=optional(cfg, "train.student_epochs", 12),
            augment=optional(cfg, "train.student_augment", True),
        ),
        seed=seed + 500,
    )
    student.save(out / "student.wfnet")
    _write_manifest(out, "distill", cfg, seed)
    print(f"distilled student from {len(soft)} soft targets + {len(fit)} hard labels")
    return EXIT_OK


def _load_bundle_dir(path):
    from wastefinder.dataengine.dataset import NormStats
    from wastefinder.models import ModelBundle, PatchClassifier, PixelClassifier, TeacherEnsemble
    from wastefinder.svm import RbfSvm

    d = Path(path)
    stats = NormStats.load(d / "norm_stats.json")
    pixel = PixelClassifier.load(d / "pixel.wfnet")
    student = PatchClassifier.load(d / "student.wfnet") if (d / "student.wfnet").exists() else None
    teachers = None
    tfiles = sorted((d / "teachers").glob("teacher_*.wfnet")) if (d / "teachers").is_dir() else []
    if tfiles and student is None:
        teachers = TeacherEnsemble(
            members=[PatchClassifier.load(p) for p in tfiles], seeds=list(range(len(tfiles)))
        )
    svm = RbfSvm.load(d / "svm.wfsvm") if (d / "svm.wfsvm").exists() else None
    return ModelBundle(stats=stats, pixel=pixel, teachers=teachers, svm=svm, student=student)


def cmd_detect(args, cfg) -> int:
    from wastefinder.dataengine.scene import load_scene
    from wastefinder.detect import (
        DOH_RESPONSE_THRESHOLD,
        MODES,
        candidates_to_geojson,
        run_detection,
        save_heatmap,
    )
    from wastefinder.server.store import SiteStore

    scene_dir = require(cfg, "detect.scene", str)
    bundle = _load_bundle_dir(require(cfg, "detect.models", str))
    frames, truth = load_scene(scene_dir)
    months = optional(cfg, "detect.timesteps")
    if months is None:
        from wastefinder.dataengine.months import month_index

        cat = sorted({f.month for f in frames}, key=month_index)
        months = [m for m in cat if month_index(m) - month_index(cat[0]) >= 8][:2]
    result = run_detection(
        frames, bundle, MODES[args.mode], months,
        geotransform=truth.geotransform,
        doh_threshold=optional(cfg, "detect.doh_threshold", DOH_RESPONSE_THRESHOLD),
        tile_grid=tuple(optional(cfg, "detect.tile_grid", (1, 1))),
        workers=optional(cfg, "detect.workers", 1),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "candidates.geojson").write_text(json.dumps(candidates_to_geojson(result.candidates), indent=2))
    (out / "rejected.geojson").write_text(json.dumps(candidates_to_geojson(result.rejected), indent=2))
    save_heatmap(out / "heatmap_avg", result.averaged)
    for month, hm in result.heatmaps:
        save_heatmap(out / f"heatmap_{month}", hm)
    for month, grid in result.grids:
        np.save(out / f"patch_grid_{month}.npy", grid.scores)
    (out / "report.json").write_text(json.dumps(result.report, indent=2))
    if args.store:
        store = SiteStore(args.store)
        added = store.add_candidates(result.candidates, _heatmap_thumbs(result))
        store.snapshot()
        print(f"registered {added} new candidates in {args.store}")
    _write_manifest(out, "detect", cfg, args.seed)
    print(f"{args.mode} mode: {len(result.candidates)} candidates "
          f"({result.report['rejected']} rejected by patch stage) -> {out}")
    return EXIT_OK


def _heatmap_thumbs(result, half: int = 32) -> dict:
    thumbs = {}
    hm = result.averaged
    for c in result.candidates:
        x, y = c.center_px
        x0, y0 = max(x - half, 0), max(y - half, 0)
        crop = hm.scores[y0 : y + half, x0 : x + half]
        thumbs[c.id] = {
            "origin_px": [int(x0), int(y0)],
            "scores": np.round(crop, 3).tolist(),
        }
    return thumbs


def cmd_monitor(args, cfg) -> int:
    from wastefinder.dataengine.scene import load_scene
    from wastefinder.detect import candidates_from_geojson
    from wastefinder.monitor import (
        area_series,
        distance_to_waterway,
        footprint_series,
        load_waterways_geojson,
        monthly_heatmaps,
    )
    from wastefinder.server.store import SiteStore

    scene_dir = require(cfg, "monitor.scene", str)
    bundle = _load_bundle_dir(require(cfg, "monitor.models", str))
    frames, truth = load_scene(scene_dir)
    cands_path = optional(cfg, "monitor.candidates")
    store = SiteStore(args.store) if args.store else None
    if cands_path:
        sites = candidates_from_geojson(json.loads(Path(cands_path).read_text()))
    elif store is not None:
        sites = [r.site for r in store.list_sites()]
    else:
        raise ConfigError("monitor.candidates", "missing (or pass --store)")
    waterways = None
    wpath = optional(cfg, "monitor.waterways")
    if wpath:
        waterways = load_waterways_geojson(wpath)

    series, gaps = monthly_heatmaps(frames, bundle.pixel, bundle.stats)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for site in sites:
        fp = footprint_series(site.id, series)
        payload = fp.to_geojson(truth.geotransform)
        (out / f"contours_{site.id}.json").write_text(json.dumps(payload))
        rows, mean = area_series(fp)
        entry = {"areas_ha": rows, "mean_ha": mean, "gaps": gaps}
        if waterways is not None:
            meters, tag = distance_to_waterway(site.center_geo, waterways)
            entry["waterway_m"] = meters
            entry["waterway_tag"] = tag
            if store is not None:
                store.attach_waterway(site.id, meters, tag)
        if store is not None:
            store.attach_footprints(site.id, payload)
        summary[site.id] = entry
    (out / "monitor_summary.json").write_text(json.dumps(summary, indent=2))
    _write_manifest(out, "monitor", cfg, args.seed)
    print(f"monitored {len(sites)} sites over {len(series)} months ({len(gaps)} gaps)")
    return EXIT_OK


def cmd_serve(args, cfg) -> int:
    import uvicorn

    from wastefinder.server.api import create_app
    from wastefinder.server.store import SiteStore

    store = SiteStore(require(cfg, "serve.store", str))
    app = create_app(
        store,
        ui_config=optional(cfg, "serve.ui", {"imagery_url_template": "", "api_base": ""}),
        frontend_dir=optional(cfg, "serve.frontend_dir"),
    )
    uvicorn.run(app, host=optional(cfg, "serve.host", "127.0.0.1"), port=optional(cfg, "serve.port", 8642))
    return EXIT_OK


def cmd_eval(args, cfg) -> int:
    from wastefinder.dataengine.scene import load_scene
    from wastefinder.detect import candidates_from_geojson
    from wastefinder.pipeline import match_candidates

    cands = candidates_from_geojson(json.loads(Path(require(cfg, "eval.candidates", str)).read_text()))
    frames, truth = load_scene(require(cfg, "eval.scene", str))
    month = optional(cfg, "eval.month", truth.months[-1])
    report = match_candidates(cands, truth, month)
    print(json.dumps(report, indent=2))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval_report.json").write_text(json.dumps(report, indent=2))
        _write_manifest(out, "eval", cfg, args.seed)
    return EXIT_OK


# ---------------------------------------------------------------------------


COMMANDS = {
    "gen-scene": cmd_gen_scene,
    "train-pixel": cmd_train_pixel,
    "train-teachers": cmd_train_teachers,
    "train-svm": cmd_train_svm,
    "distill": cmd_distill,
    "detect": cmd_detect,
    "monitor": cmd_monitor,
    "serve": cmd_serve,
    "eval": cmd_eval,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="wastefinder", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default="out", help="artifact directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--mode", choices=("low", "med", "high"), default="med",
                       help="sensitivity mode (detect)")
        p.add_argument("--store", default=None, help="site store directory (detect/monitor)")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_USAGE
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
