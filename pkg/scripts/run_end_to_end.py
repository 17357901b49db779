#!/usr/bin/env python3
"""End-to-end experiment: train everything, detect on a held-out scene, report.

Writes the model bundle, candidate GeoJSON, heatmap rasters, and a summary
report under --out. Mirrors what the acceptance suite measures, with knobs for
quicker exploratory runs.

    python scripts/run_end_to_end.py --out runs/e2e --teachers 8 --mode high
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

from wastefinder.dataengine.months import month_add
from wastefinder.dataengine.scene import ScenePlant, SceneSpec, generate_scene, save_scene
from wastefinder.detect import MODES, candidates_to_geojson, run_detection, save_heatmap
from wastefinder.models import save_bundle
from wastefinder.pipeline import (
    TrainingRunConfig,
    confuser_rejection,
    match_candidates,
    run_training,
)
from wastefinder.rng import spawn


def holdout_spec(cfg: TrainingRunConfig, size: int = 512, n_sites: int = 10, n_greenhouses: int = 5,
                 seed: int = 4242) -> SceneSpec:
    rng = spawn(999, 0)
    months = [month_add("2020-01", i) for i in range(12)]
    placed, plants = [], []

    def place(r, margin=30, gap=40):
        while True:
            x, y = rng.uniform(margin, size - margin, 2)
            if all(np.hypot(x - px, y - py) > r + pr + gap for px, py, pr in placed):
                placed.append((x, y, r))
                return (float(x), float(y))

    for _ in range(n_sites):
        r = float(rng.uniform(6, 11))
        plants.append(ScenePlant(center=place(r), radius=r, kind="site"))
    for _ in range(n_greenhouses):
        r = float(rng.uniform(8, 12))
        plants.append(ScenePlant(center=place(r), radius=r, kind="greenhouse"))
    return SceneSpec(width=size, height=size, months=months, plants=plants,
                     cloud_fraction=cfg.cloud_fraction, noise=cfg.noise, seed=seed)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/e2e")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--teachers", type=int, default=32)
    ap.add_argument("--mode", choices=("low", "med", "high"), default="high")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()

    cfg = TrainingRunConfig(seed=args.seed, teacher_count=args.teachers)
    art = run_training(cfg, progress=lambda m: print(f"  {m}", flush=True))
    save_bundle(out / "models", art.bundle)

    spec = holdout_spec(cfg)
    frames, truth = generate_scene(spec)
    save_scene(out / "scene", frames, truth, spec)

    t0 = time.perf_counter()
    result = run_detection(frames, art.bundle, MODES[args.mode], ["2020-09", "2020-10"],
                           geotransform=truth.geotransform)
    detect_s = time.perf_counter() - t0
    (out / "candidates.geojson").write_text(json.dumps(candidates_to_geojson(result.candidates), indent=2))
    save_heatmap(out / "heatmap_avg", result.averaged)

    rep = match_candidates(result.candidates, truth, "2020-09")
    cr = confuser_rejection(result, truth)
    summary = {
        "mode": args.mode,
        "candidates": len(result.candidates),
        "site_recall": rep["recall"],
        "precision": rep["precision"],
        "confusers_flagged": cr["flagged"],
        "confusers_rejected": cr["rejected"],
        "train_metrics": {k: v for k, v in art.metrics.items() if k != "pixel_loss"},
        "timings": {**{k: round(v, 1) for k, v in art.timings.items()}, "detect": round(detect_s, 1)},
        "total_seconds": round(time.perf_counter() - t_start, 1),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
