#!/usr/bin/env python3
"""Regenerate the committed fixtures under fixtures/.

Everything here is deterministic (fixed seeds, fixed specs), so reruns
reproduce the committed bytes exactly.  The golden detections file is the
frozen output of `detect --head lost --no-guidance --no-fusion` over the
ten-image set; regenerating after a behavior change is a deliberate act.
"""

from __future__ import annotations

import sys
from pathlib import Path

from formula.cli import main as formula_main
from formula.feature_io import write_ground_truth
from formula.synth import Rect, SceneSpec, generate_scene, write_scene

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

TEN_SCENES = [
    SceneSpec("ten00", 14, 14, Rect(3, 4, 6, 5), separation_deg=180.0, noise=0.02),
    SceneSpec("ten01", 16, 12, Rect(2, 1, 5, 4), separation_deg=160.0, noise=0.05),
    SceneSpec("ten02", 20, 20, Rect(8, 9, 7, 8), separation_deg=150.0, noise=0.04),
    SceneSpec("ten03", 15, 18, Rect(1, 2, 3, 3), separation_deg=170.0, noise=0.03),
    SceneSpec("ten04", 18, 18, Rect(10, 3, 6, 9), separation_deg=140.0, noise=0.06),
    SceneSpec("ten05", 14, 20, Rect(4, 12, 8, 6), separation_deg=165.0, noise=0.08),
    SceneSpec("ten06", 17, 15, Rect(6, 6, 2, 2), separation_deg=175.0, noise=0.02),
    SceneSpec("ten07", 20, 14, Rect(12, 2, 7, 5), separation_deg=145.0, noise=0.07),
    SceneSpec("ten08", 16, 16, Rect(0, 0, 4, 6), separation_deg=155.0, noise=0.05),
    SceneSpec("ten09", 19, 17, Rect(7, 5, 9, 7), separation_deg=180.0, noise=0.04),
]

DISTRACTOR = SceneSpec(
    "distractor", 24, 24, Rect(6, 2, 12, 8),
    extra_foreground=(Rect(11, 10, 1, 5), Rect(9, 15, 6, 6)),
    separation_deg=180.0, noise=0.02)

STABLE = SceneSpec("stable", 12, 12, Rect(3, 4, 4, 5),
                   separation_deg=170.0, noise=0.02)


def main() -> int:
    ten_dir = FIXTURES / "tenimages"
    gts = []
    manifest_paths = []
    for index, spec in enumerate(TEN_SCENES):
        manifest_path, _, _ = write_scene(spec, seed=1000 + index, out_dir=ten_dir)
        manifest_paths.append(str(manifest_path))
        gts.append(generate_scene(spec, seed=1000 + index)[2])
    write_ground_truth(gts, ten_dir / "gt.jsonl")

    write_scene(DISTRACTOR, seed=404, out_dir=FIXTURES / "distractor")
    write_scene(STABLE, seed=100, out_dir=FIXTURES / "stable")

    golden_dir = FIXTURES / "golden"
    golden_dir.mkdir(parents=True, exist_ok=True)
    status = formula_main([
        "detect", *manifest_paths,
        "--head", "lost", "--no-guidance", "--no-fusion",
        "--out", str(golden_dir / "golden_lost.jsonl"),
    ])
    if status != 0:
        print("golden detection run failed", file=sys.stderr)
        return status
    print(f"fixtures written under {FIXTURES}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
