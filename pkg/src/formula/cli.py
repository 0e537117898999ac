"""Command-line entry points: detect, eval, synth, bench.

detect runs the full pipeline over a list of manifests and writes one
detection record per image as JSON Lines; images are processed by a
thread pool but records are written sorted by image_id, so the output is
byte-identical for any --threads value.  eval scores a detections file
against ground truth and prints the CorLoc report.  synth writes planted
synthetic scenes.  bench times the guidance loop per iteration count.

Exit codes: 0 success, 1 pipeline error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_SIGMA,
    DEFAULT_TAU,
    Center,
    FusionWeights,
    GuidanceConfig,
    foreground_guided_detect,
    fuse_layers,
    gaussian_map,
    reweight,
)
from .errors import DuplicateImageId, FormulaError
from .evaluation import corloc
from .feature_io import (
    DetectionRecord,
    Manifest,
    read_detections,
    read_features,
    read_ground_truth,
    write_detections,
)
from .heads import Head, build_intermediate_map
from .synth import Rect, SceneSpec, write_scene

MAX_ITERATIONS_LIMIT = 8
BENCH_ITERATION_COUNTS = range(1, 9)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """Everything a detect run depends on; echoed by --print-config."""

    head: str
    sigma: float
    tau: float
    max_iterations: int
    fusion_weights: tuple[float, ...] | None
    guidance_enabled: bool
    fusion_enabled: bool
    manifests: tuple[str, ...]
    out: str
    threads: int
    emit_overlays: str | None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _parse_weights(text: str) -> tuple[float, ...]:
    try:
        raw = tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")
    if not raw:
        raise argparse.ArgumentTypeError("empty weight list")
    return raw


def _parse_rect(text: str) -> Rect:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(
            f"rect must be row0,col0,rows,cols: {text!r}")
    try:
        return Rect(*(int(p) for p in parts))
    except ValueError:
        raise argparse.ArgumentTypeError(f"rect parts must be integers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="formula",
        description="Unsupervised single-object discovery on stored ViT patch features.")
    sub = parser.add_subparsers(dest="command", required=True)

    detect = sub.add_parser("detect", help="run detection over feature manifests")
    detect.add_argument("manifests", nargs="+", help="manifest JSON paths")
    detect.add_argument("--head", choices=[h.value for h in Head], default="lost")
    detect.add_argument("--sigma", type=float, default=None,
                        help="Gaussian width in normalized units "
                             "(default 0.1 for lost, 1.0 for tokencut)")
    detect.add_argument("--tau", type=float, default=DEFAULT_TAU,
                        help="squared-center-shift stop threshold, patch units")
    detect.add_argument("--max-iterations", type=int, default=DEFAULT_MAX_ITERATIONS,
                        help=f"guidance iterations, 0..{MAX_ITERATIONS_LIMIT}")
    detect.add_argument("--fusion-weights", type=_parse_weights, default=None,
                        help="comma-separated per-layer weights, index 0 = last "
                             "layer; normalized to sum 1 with a warning")
    detect.add_argument("--no-guidance", action="store_true",
                        help="skip the self-iteration loop")
    detect.add_argument("--no-fusion", action="store_true",
                        help="use only the last layer")
    detect.add_argument("--emit-overlays", metavar="DIR", default=None,
                        help="write per-image heatmap PNGs with the box drawn")
    detect.add_argument("--threads", type=int, default=1)
    detect.add_argument("--out", required=True, help="output detections JSONL")
    detect.add_argument("--print-config", action="store_true",
                        help="echo the resolved run config as JSON and exit")
    detect.set_defaults(func=cmd_detect)

    ev = sub.add_parser("eval", help="score detections against ground truth")
    ev.add_argument("predictions", help="detections JSONL")
    ev.add_argument("ground_truth", help="ground-truth JSONL")
    ev.add_argument("--json", action="store_true",
                    help="print the report as JSON instead of a table")
    ev.set_defaults(func=cmd_eval)

    synth = sub.add_parser("synth", help="generate a planted synthetic scene")
    synth.add_argument("--out-dir", required=True)
    synth.add_argument("--image-id", required=True)
    synth.add_argument("--grid-h", type=int, required=True)
    synth.add_argument("--grid-w", type=int, required=True)
    synth.add_argument("--object", type=_parse_rect, required=True,
                       metavar="ROW0,COL0,ROWS,COLS", help="planted object rect")
    synth.add_argument("--distractor", type=_parse_rect, action="append",
                       default=[], metavar="ROW0,COL0,ROWS,COLS",
                       help="extra foreground rect without ground truth (repeatable)")
    synth.add_argument("--patch-size", type=int, default=16)
    synth.add_argument("--layers", type=int, default=4)
    synth.add_argument("--dim", type=int, default=48)
    synth.add_argument("--separation-deg", type=float, default=180.0)
    synth.add_argument("--noise", type=float, default=0.0)
    synth.add_argument("--seed", type=int, required=True)
    synth.set_defaults(func=cmd_synth)

    bench = sub.add_parser("bench", help="time the guidance loop per iteration count")
    bench.add_argument("manifests", nargs="*", help="manifest JSON paths")
    bench.add_argument("--head", choices=[h.value for h in Head], default="lost")
    bench.add_argument("--sigma", type=float, default=None)
    bench.add_argument("--tau", type=float, default=DEFAULT_TAU)
    bench.set_defaults(func=cmd_bench)
    return parser


def _run_config_from_args(args: argparse.Namespace,
                          parser_error) -> RunConfig:
    if not 0 <= args.max_iterations <= MAX_ITERATIONS_LIMIT:
        parser_error(f"--max-iterations must be in 0..{MAX_ITERATIONS_LIMIT}")
    if args.threads < 1:
        parser_error("--threads must be at least 1")
    head = Head(args.head)
    sigma = DEFAULT_SIGMA[head] if args.sigma is None else args.sigma
    if sigma <= 0:
        parser_error("--sigma must be positive")
    if args.tau <= 0:
        parser_error("--tau must be positive")
    weights = args.fusion_weights
    if weights is not None:
        if any(w < 0 for w in weights):
            parser_error("--fusion-weights must be nonnegative")
        total = sum(weights)
        if total <= 0:
            parser_error("--fusion-weights must not sum to zero")
        if abs(total - 1.0) > 1e-9:
            log.warning("fusion weights sum to %.6g; normalizing", total)
            weights = tuple(w / total for w in weights)
    return RunConfig(
        head=head.value,
        sigma=sigma,
        tau=args.tau,
        max_iterations=args.max_iterations,
        fusion_weights=weights,
        guidance_enabled=not args.no_guidance,
        fusion_enabled=not args.no_fusion,
        manifests=tuple(args.manifests),
        out=args.out,
        threads=args.threads,
        emit_overlays=args.emit_overlays)


def _resolve_weights(cfg: RunConfig, num_layers: int) -> FusionWeights:
    if not cfg.fusion_enabled:
        return FusionWeights.last_layer_only(num_layers)
    if cfg.fusion_weights is not None:
        return FusionWeights(cfg.fusion_weights)
    return FusionWeights.uniform(num_layers)


def _detect_one(manifest_path: str, cfg: RunConfig) -> DetectionRecord:
    manifest, stack = read_features(manifest_path)
    features = fuse_layers(stack, _resolve_weights(cfg, manifest.num_layers))
    gcfg = GuidanceConfig(
        sigma=cfg.sigma,
        tau=cfg.tau,
        max_iterations=cfg.max_iterations if cfg.guidance_enabled else 0)
    record = foreground_guided_detect(features, Head(cfg.head), gcfg, manifest)
    if cfg.emit_overlays is not None:
        _write_overlay(Path(cfg.emit_overlays), manifest, features,
                       Head(cfg.head), gcfg, record)
    return record


def _write_overlay(out_dir: Path, manifest: Manifest, features: np.ndarray,
                   head: Head, gcfg: GuidanceConfig,
                   record: DetectionRecord) -> None:
    """PNG heatmap of the map that produced the final mask, box drawn on top."""
    from PIL import Image, ImageDraw

    base, _ = build_intermediate_map(features, manifest.grid_h, manifest.grid_w, head)
    if record.iterations_run == 0:
        values = base.values
    else:
        # the final mask came from the Gaussian centered two trace entries back
        center = Center(*record.center_trace[-2])
        prob = gaussian_map(center, gcfg.sigma, manifest.grid_h, manifest.grid_w)
        values = reweight(base, prob).values
    lo, hi = values.min(), values.max()
    norm = (values - lo) / (hi - lo) if hi > lo else np.zeros_like(values)
    img = Image.fromarray((norm * 255).astype(np.uint8), "L")
    img = img.resize((manifest.image_width, manifest.image_height),
                     Image.Resampling.NEAREST).convert("RGB")
    draw = ImageDraw.Draw(img)
    x0, y0, x1, y1 = record.box
    draw.rectangle((x0, y0, x1 - 1, y1 - 1), outline=(255, 0, 0), width=2)
    out_dir.mkdir(parents=True, exist_ok=True)
    img.save(out_dir / f"{manifest.image_id}.png")


def cmd_detect(args: argparse.Namespace) -> int:
    parser_error = args.parser_error
    cfg = _run_config_from_args(args, parser_error)
    if args.print_config:
        print(cfg.to_json())
        return 0

    records: list[DetectionRecord] = []
    failures: list[tuple[str, Exception]] = []
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        futures = {pool.submit(_detect_one, path, cfg): path
                   for path in cfg.manifests}
        for future, path in futures.items():
            try:
                records.append(future.result())
            except (FormulaError, OSError) as exc:
                failures.append((path, exc))

    records.sort(key=lambda r: r.image_id)
    write_detections(records, cfg.out)
    for path, exc in sorted(failures, key=lambda f: f[0]):
        log.error("%s: %s", path, exc)
    if failures:
        log.error("%d of %d images failed", len(failures), len(cfg.manifests))
        return 1
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    preds: dict[str, tuple[float, float, float, float]] = {}
    for record in read_detections(args.predictions):
        if record.image_id in preds:
            raise DuplicateImageId(f"duplicate prediction for {record.image_id!r}")
        preds[record.image_id] = record.box
    gts = read_ground_truth(args.ground_truth)
    report = corloc(preds, gts)
    print(report.to_json() if args.json else report.to_table())
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SceneSpec(
        image_id=args.image_id,
        grid_h=args.grid_h,
        grid_w=args.grid_w,
        object_rect=args.object,
        extra_foreground=tuple(args.distractor),
        patch_size=args.patch_size,
        num_layers=args.layers,
        feature_dim=args.dim,
        separation_deg=args.separation_deg,
        noise=args.noise)
    paths = write_scene(spec, args.seed, args.out_dir)
    for path in paths:
        print(path)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    head = Head(args.head)
    sigma = DEFAULT_SIGMA[head] if args.sigma is None else args.sigma
    header = f"{'image_id':<20}" + "".join(f"  it{k:>d}_ms" for k in BENCH_ITERATION_COUNTS)
    print(header)
    for path in args.manifests:
        manifest, stack = read_features(path)
        features = fuse_layers(stack, FusionWeights.uniform(manifest.num_layers))
        cells = []
        for iters in BENCH_ITERATION_COUNTS:
            gcfg = GuidanceConfig(sigma=sigma, tau=args.tau, max_iterations=iters)
            start = time.perf_counter()
            foreground_guided_detect(features, head, gcfg, manifest)
            cells.append(f"  {1e3 * (time.perf_counter() - start):>7.1f}")
        print(f"{manifest.image_id:<20}" + "".join(cells))
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    args.parser_error = parser.error
    try:
        return args.func(args)
    except FormulaError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
