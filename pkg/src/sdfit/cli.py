"""Command line interface: fit, segment, synth, eval, bench."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .errors import FitError, InsufficientData, NoHypotheses
from .evaluation import assign_labels, fitting_error, generate_scene, ransac_baseline
from .geometry import ModelKind
from .pipeline import PipelineConfig, fit, run_pipeline
from .selection import DEFAULT_INLIER_T
from .superpixel import DEFAULT_COMPACTNESS, slic_segment

log = logging.getLogger("sdfit")

EXIT_OK, EXIT_ERROR, EXIT_DEFICIT, EXIT_NO_HYPOTHESES = 0, 1, 2, 3

CORR_FILE = "correspondences.txt"
IMAGE_FILE = "image.png"
GT_FILE = "gt.labels"
SCENE_FILE = "scene.json"


def _threads(value: str) -> int:
    n = int(value)
    if n < 0:
        raise argparse.ArgumentTypeError("thread count must be >= 0")
    return n or (os.cpu_count() or 1)


def _add_fit_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=[k.value for k in ModelKind], default="homography")
    p.add_argument("--structures", type=int, default=1, help="number of model instances l")
    p.add_argument("--superpixels", type=int, default=150, help="requested superpixel count M")
    p.add_argument("--compactness", type=float, default=DEFAULT_COMPACTNESS)
    p.add_argument("--support-frac", type=float, default=0.10,
                   help="support size as a fraction of the correspondence count")
    p.add_argument("--epsilon", type=float, default=0.8, help="stopping overlap threshold")
    p.add_argument("--tmax", type=int, default=50, help="maximum updating iterations")
    p.add_argument("--inlier-t", type=float, default=2.5,
                   help="inlier threshold in units of the estimated scale")
    p.add_argument("--threads", type=_threads, default=1, help="worker threads (0 = auto)")


def _config(args, **paths) -> PipelineConfig:
    return PipelineConfig(kind=args.model, structures=args.structures,
                          superpixels=args.superpixels, compactness=args.compactness,
                          support_frac=args.support_frac, epsilon=args.epsilon,
                          t_max=args.tmax, inlier_t=args.inlier_t, threads=args.threads,
                          **paths)


def cmd_fit(args) -> int:
    if (args.image is None) == (args.labels is None):
        raise SystemExit("fit: give exactly one of --image or --labels")
    cfg = _config(args, correspondences=args.correspondences, image=args.image,
                  labels=args.labels, output=args.output)
    result = run_pipeline(cfg)
    if args.output is None:
        sys.stdout.write(result.to_json())
    if result.error is not None:
        log.info("fitting error %.2f%%", result.error)
    return EXIT_DEFICIT if result.deficit else EXIT_OK


def cmd_segment(args) -> int:
    image = io.read_image(args.image)
    smap = slic_segment(image, args.superpixels, args.compactness, threads=args.threads)
    out = Path(args.output)
    io.write_label_map(out, smap.labels)
    sidecar = out.with_suffix(".json")
    sidecar.write_text(io.dumps_stable({
        "M_requested": smap.m_requested,
        "M_actual": smap.n_labels,
        "S": smap.S,
        "compactness": float(args.compactness),
    }), encoding="utf-8")
    return EXIT_OK


def write_scene(scene, out: Path, meta: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    io.write_correspondences(out / CORR_FILE, scene.data)
    io.write_image(out / IMAGE_FILE, scene.image)
    io.write_labels(out / GT_FILE, scene.data.gt)
    meta = dict(meta, models=[m.reshape(-1).tolist() for m in scene.models])
    (out / SCENE_FILE).write_text(io.dumps_stable(meta), encoding="utf-8")


def cmd_synth(args) -> int:
    kind = ModelKind.parse(args.model)
    scene = generate_scene(args.structures, kind, args.inliers, args.outlier_frac, args.noise,
                           width=args.width, height=args.height, seed=args.seed)
    meta = {"model": kind.value, "structures": args.structures, "inliers": args.inliers,
            "outlier_frac": args.outlier_frac, "noise": args.noise, "width": args.width,
            "height": args.height, "seed": args.seed}
    write_scene(scene, Path(args.output), meta)
    return EXIT_OK


def cmd_eval(args) -> int:
    err = fitting_error(io.read_labels(args.pred), io.read_labels(args.gt))
    print(f"{err:.2f}")
    return EXIT_OK


def _scene_dirs(root: Path) -> list[Path]:
    return sorted(p.parent for p in root.glob(f"*/{CORR_FILE}"))


def bench_scene(scene_dir: Path, args) -> list[dict]:
    meta = json.loads((scene_dir / SCENE_FILE).read_text()) if (scene_dir / SCENE_FILE).exists() else {}
    model = meta.get("model", args.model)
    l = int(meta.get("structures", args.structures))
    data = io.read_correspondences(scene_dir / CORR_FILE)
    if data.gt is None:
        raise FitError(f"{scene_dir}: correspondences carry no ground truth")
    image = io.read_image(scene_dir / IMAGE_FILE)
    cfg = _config(args)
    cfg.kind, cfg.structures = ModelKind.parse(model), l
    rows = []

    errs, times = [], []
    for _ in range(args.sdf_runs):
        t0 = time.perf_counter()
        try:
            errs.append(fit(data, cfg, image=image).error)
        except NoHypotheses:
            errs.append(100.0 * np.count_nonzero(data.gt) / len(data))
        times.append(time.perf_counter() - t0)
    rows.append(_row(scene_dir.name, "SDF", errs, times))

    errs, times = [], []
    for seed in range(args.seed, args.seed + args.ransac_runs):
        t0 = time.perf_counter()
        try:
            models = ransac_baseline(data, cfg.kind, l, args.ransac_iters,
                                     args.ransac_threshold, seed)
        except InsufficientData:
            models = []
        labels = assign_labels(models, data, DEFAULT_INLIER_T)
        errs.append(fitting_error(labels, data.gt))
        times.append(time.perf_counter() - t0)
    rows.append(_row(scene_dir.name, "RANSAC", errs, times))
    return rows


def _row(scene: str, method: str, errs, times) -> dict:
    # exact arithmetic: identical runs give a standard deviation of exactly 0
    e = [float(v) for v in errs]
    return {"scene": scene, "method": method, "runs": len(e),
            "std": statistics.pstdev(e), "avg": statistics.fmean(e), "min": min(e),
            "max": max(e), "time": float(np.mean(times))}


BENCH_FIELDS = ["scene", "method", "runs", "std", "avg", "min", "max", "time"]


def cmd_bench(args) -> int:
    root = Path(args.scenes)
    dirs = _scene_dirs(root) if not (root / CORR_FILE).exists() else [root]
    if not dirs:
        raise SystemExit(f"bench: no scenes with {CORR_FILE} under {root}")
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=BENCH_FIELDS, lineterminator="\n")
        writer.writeheader()
        for d in dirs:
            for row in bench_scene(d, args):
                writer.writerow({k: (f"{v:.4f}" if isinstance(v, float) else v)
                                 for k, v in row.items()})
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # exit code 2 is reserved for ModelDeficit
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sdfit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit models to a correspondence file")
    p.add_argument("correspondences")
    p.add_argument("--image", help="view-1 image (PPM or PNG)")
    p.add_argument("--labels", help="precomputed superpixel map (CSV or 16-bit PGM)")
    p.add_argument("--output", help="result JSON path (default: stdout)")
    _add_fit_options(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("segment", help="SLIC superpixels of an image")
    p.add_argument("image")
    p.add_argument("--superpixels", type=int, default=150)
    p.add_argument("--compactness", type=float, default=DEFAULT_COMPACTNESS)
    p.add_argument("--threads", type=_threads, default=1)
    p.add_argument("--output", required=True, help="label map path (.csv or .pgm)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("synth", help="generate a labeled synthetic scene")
    p.add_argument("--model", choices=[k.value for k in ModelKind], default="homography")
    p.add_argument("--structures", type=int, default=2)
    p.add_argument("--inliers", type=int, default=60, help="inliers per structure")
    p.add_argument("--outlier-frac", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=1.0, help="inlier noise sigma in pixels")
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="fitting error between two label files")
    p.add_argument("pred")
    p.add_argument("gt")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="compare the method with seeded RANSAC over scenes")
    p.add_argument("scenes", help="directory of scene subdirectories (or one scene)")
    p.add_argument("--output", help="CSV path (default: stdout)")
    p.add_argument("--sdf-runs", type=int, default=3)
    p.add_argument("--ransac-runs", type=int, default=50)
    p.add_argument("--ransac-iters", type=int, default=500)
    p.add_argument("--ransac-threshold", type=float, default=3.0, help="pixels")
    p.add_argument("--seed", type=int, default=0, help="first RANSAC seed")
    _add_fit_options(p)
    p.set_defaults(func=cmd_bench)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("MULTIFIT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoHypotheses as exc:
        print(f"sdfit: no hypotheses ({getattr(exc, 'stage', 'sample')}): {exc}", file=sys.stderr)
        return EXIT_NO_HYPOTHESES
    except (FitError, OSError, ValueError) as exc:
        stage = getattr(exc, "stage", None)
        prefix = f"{stage}: " if stage else ""
        print(f"sdfit: {prefix}{exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
