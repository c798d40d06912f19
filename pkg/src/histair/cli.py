"""Command-line harness: synthetic pair generation, registration,
segmentation inspection, evaluation against ground truth, and the
brute-force correlation oracle."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np
from PIL import Image

from .enhance import EnhanceConfig, wiener_filter
from .estimate import EstimationError, RigidTransform, VoteConfig
from .matching import MatchingConfig, MatchingError, pool_regions
from .oracle import oracle_search
from .raster import GrayImage, load_image, save_image
from .scene import DEFAULT_SCENE_SEED, make_test_scene
from .segment import SegmentationConfig, SegmentationError, segment_multilevel
from .warp import PipelineConfig, RegistrationResult, ResampleConfig, apply_transform, register_pair

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NO_OBJECTS = 3
EXIT_NO_CANDIDATES = 4
EXIT_ESTIMATION = 5


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _stage_error(stage: str, exc: Exception, code: int) -> int:
    payload = {"error": {"stage": stage, "message": str(exc)}}
    count = getattr(exc, "vote_count", None)
    if count is not None:
        payload["error"]["vote_count"] = count
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def _parse_alphas(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}: {exc}") from exc


def _default_threads() -> int:
    env = os.environ.get("HISTAIR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        enhance=EnhanceConfig(
            wiener_window=args.wiener_window,
            noise_variance=args.noise_variance,
        ),
        segmentation=SegmentationConfig(
            alpha_levels=args.alpha_levels,
            smoothing_radius=args.smoothing_radius,
            min_object_area=args.min_object_area,
            max_objects_per_level=args.max_objects,
            connectivity=args.connectivity,
        ),
        matching=MatchingConfig(
            gamma_max=args.gamma_max,
            mutual_best=not args.no_mutual_best,
        ),
        vote=VoteConfig(
            theta_bin_deg=args.theta_bin,
            theta_consistency_deg=args.theta_consistency,
            shift_bin_px=args.shift_bin,
            min_votes=args.min_votes,
        ),
        resample=ResampleConfig(
            interpolation=args.interpolation,
            fill_value=args.fill_value,
        ),
    )


def _add_pipeline_flags(p: argparse.ArgumentParser):
    p.add_argument("--alpha-levels", type=_parse_alphas, default=(0.20, 0.10, 0.05),
                   help="comma-separated relaxation levels (default 0.20,0.10,0.05)")
    p.add_argument("--smoothing-radius", type=int, default=2)
    p.add_argument("--min-object-area", type=int, default=16)
    p.add_argument("--max-objects", type=int, default=200)
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--wiener-window", type=int, default=5)
    p.add_argument("--noise-variance", type=float, default=None)
    p.add_argument("--gamma-max", type=float, default=0.5)
    p.add_argument("--no-mutual-best", action="store_true")
    p.add_argument("--theta-bin", type=float, default=1.0)
    p.add_argument("--theta-consistency", type=float, default=2.0)
    p.add_argument("--shift-bin", type=float, default=1.0)
    p.add_argument("--min-votes", type=int, default=3)
    p.add_argument("--interpolation", choices=("nearest", "bilinear"), default="bilinear")
    p.add_argument("--fill-value", type=int, default=0)
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help="worker cap for per-level segmentation (results identical)")


def _diag_dict(result: RegistrationResult) -> dict:
    d = result.diagnostics

    def vote(v):
        return {
            "winning_bin_center": v.winning_center,
            "winning_count": v.winning_count,
            "refined": v.refined,
            "vote_count": v.vote_count,
        }

    return {
        "rotation": vote(d.rotation),
        "shift_x": vote(d.shift_x),
        "shift_y": vote(d.shift_y),
        "anisotropic_count": d.anisotropic_count,
        "consistent_count": d.consistent_count,
    }


def _build_report(result: RegistrationResult, args, img1: GrayImage, img2: GrayImage,
                  truth: dict | None) -> dict:
    cfg_echo = dataclasses.asdict(_pipeline_config(args))
    report = {
        "schema_version": SCHEMA_VERSION,
        "estimated": {
            "theta_deg": result.transform.theta_deg,
            "dx": result.transform.dx,
            "dy": result.transform.dy,
        },
        "center_convention": "image1-center",
        "inputs": {
            "reference": {"path": args.reference, "width": img1.width,
                          "height": img1.height, "bit_depth": 8},
            "moving": {"path": args.moving, "width": img2.width,
                       "height": img2.height, "bit_depth": 8},
        },
        "object_counts": result.object_counts,
        "candidate_count": len(result.candidates),
        "vote_diagnostics": _diag_dict(result),
        "config_echo": cfg_echo,
    }
    if truth is not None:
        report["truth"] = {k: truth[k] for k in ("theta_deg", "dx", "dy")}
        report["errors"] = {
            "abs_dtheta_deg": abs(result.transform.theta_deg - truth["theta_deg"]),
            "abs_ddx": abs(result.transform.dx - truth["dx"]),
            "abs_ddy": abs(result.transform.dy - truth["dy"]),
        }
    if not args.no_timings:
        report["stage_timings_ms"] = result.stage_timings_ms
    return report


def _dump_candidates(path: str, result: RegistrationResult):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label1", "alpha1", "label2", "alpha2", "gamma", "d_theta_deg"])
        for c in result.candidates:
            writer.writerow([c.obj1.label, f"{c.obj1.alpha:g}", c.obj2.label,
                             f"{c.obj2.alpha:g}", f"{c.gamma:.9g}", f"{c.d_theta:.9g}"])


def cmd_register(args) -> int:
    try:
        img1 = load_image(args.reference)
        img2 = load_image(args.moving)
        truth = None
        if args.truth:
            with open(args.truth) as fh:
                truth = json.load(fh)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        return _stage_error("io", exc, EXIT_IO)

    try:
        result = register_pair(img1, img2, _pipeline_config(args), threads=args.threads)
    except SegmentationError as exc:
        return _stage_error("segment", exc, EXIT_NO_OBJECTS)
    except MatchingError as exc:
        return _stage_error("matching", exc, EXIT_NO_CANDIDATES)
    except EstimationError as exc:
        return _stage_error("estimate", exc, EXIT_ESTIMATION)

    report = _build_report(result, args, img1, img2, truth)
    try:
        if args.out_image:
            save_image(result.registered, args.out_image)
        if args.dump_candidates:
            _dump_candidates(args.dump_candidates, result)
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
        if args.out_report:
            with open(args.out_report, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        return _stage_error("io", exc, EXIT_IO)
    est = result.transform
    print(f"estimated theta={est.theta_deg:.4f} deg dx={est.dx:.4f} dy={est.dy:.4f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        img = load_image(args.input)
    except (OSError, ValueError) as exc:
        return _stage_error("io", exc, EXIT_IO)
    transform = RigidTransform(theta_deg=args.theta, dx=args.dx, dy=args.dy)
    out = apply_transform(img, transform, cfg=ResampleConfig(fill_value=args.fill_value))
    if args.noise_sigma > 0:
        rng = np.random.default_rng(args.seed)
        noisy = out.pixels.astype(np.float64) + rng.normal(0.0, args.noise_sigma, out.shape)
        out = GrayImage(np.clip(np.rint(noisy), 0, 255).astype(np.uint8))
    try:
        save_image(out, args.out)
        if args.truth_out:
            truth = {
                "theta_deg": args.theta,
                "dx": args.dx,
                "dy": args.dy,
                "center_convention": "image1-center",
            }
            with open(args.truth_out, "w") as fh:
                json.dump(truth, fh, indent=2, sort_keys=True)
                fh.write("\n")
    except OSError as exc:
        return _stage_error("io", exc, EXIT_IO)
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        with open(args.report) as fh:
            report = json.load(fh)
        with open(args.truth) as fh:
            truth = json.load(fh)
        est = report["estimated"]
        deltas = (
            abs(est["theta_deg"] - truth["theta_deg"]),
            abs(est["dx"] - truth["dx"]),
            abs(est["dy"] - truth["dy"]),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        return _stage_error("io", exc, EXIT_IO)
    ok = deltas[0] <= args.tol_theta and deltas[1] <= args.tol_shift and deltas[2] <= args.tol_shift
    print(f"delta_theta_deg={deltas[0]:.6g} delta_dx={deltas[1]:.6g} delta_dy={deltas[2]:.6g} "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_USAGE


_PALETTE = None


def _label_palette() -> list[int]:
    # deterministic bright palette: golden-angle hue walk, label 0 black
    global _PALETTE
    if _PALETTE is None:
        import colorsys

        flat = [0, 0, 0]
        for k in range(255):
            r, g, b = colorsys.hsv_to_rgb((k * 0.381966) % 1.0, 0.85, 1.0)
            flat += [int(255 * r), int(255 * g), int(255 * b)]
        _PALETTE = flat
    return _PALETTE


def cmd_segment(args) -> int:
    try:
        img = load_image(args.input)
    except (OSError, ValueError) as exc:
        return _stage_error("io", exc, EXIT_IO)
    if not args.raw:
        img = wiener_filter(img, EnhanceConfig(wiener_window=args.wiener_window,
                                               noise_variance=args.noise_variance))
    cfg = SegmentationConfig(
        alpha_levels=args.alpha_levels,
        smoothing_radius=args.smoothing_radius,
        min_object_area=args.min_object_area,
        max_objects_per_level=args.max_objects,
        connectivity=args.connectivity,
    )
    try:
        levels = segment_multilevel(img, cfg)
    except SegmentationError as exc:
        return _stage_error("segment", exc, EXIT_NO_OBJECTS)

    try:
        if args.out_labels:
            stem, ext = os.path.splitext(args.out_labels)
            for level in levels:
                im = Image.fromarray(np.mod(level.labels, 256).astype(np.uint8), mode="P")
                im.putpalette(_label_palette())
                im.save(f"{stem}_alpha{level.source_alpha:g}{ext or '.png'}")
        if args.out_csv:
            with open(args.out_csv, "w", newline="") as fh:
                writer = csv.writer(fh)
                if args.features:
                    writer.writerow(["label", "alpha", "area", "perimeter", "axis_ratio",
                                     "fractal_dim", "centroid_x", "centroid_y",
                                     "orientation_deg", "isotropic_flag"])
                    for region in pool_regions(levels):
                        f = region.features
                        writer.writerow([
                            region.label, f"{region.alpha:g}", f.area, f.perimeter,
                            f"{f.axis_ratio:.9g}", f"{f.fractal_dim:.9g}",
                            f"{f.centroid[0]:.9g}", f"{f.centroid[1]:.9g}",
                            f"{f.orientation_deg:.9g}", int(f.isotropic),
                        ])
                else:
                    writer.writerow(["label", "alpha", "mode", "area"])
                    for level in levels:
                        for idx, px in enumerate(level.pixels):
                            writer.writerow([idx + 1, f"{level.source_alpha:g}",
                                             level.mode_index[idx], len(px)])
    except OSError as exc:
        return _stage_error("io", exc, EXIT_IO)
    for level in levels:
        print(f"alpha={level.source_alpha:g} modes={len(level.mode_set)} "
              f"regions={level.region_count}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        img1 = load_image(args.reference)
        img2 = load_image(args.moving)
    except (OSError, ValueError) as exc:
        return _stage_error("io", exc, EXIT_IO)
    try:
        transform, score = oracle_search(
            img1, img2,
            theta_range=args.theta_range, theta_step=args.theta_step,
            shift_range=args.shift_range, shift_step=args.shift_step,
        )
    except ValueError as exc:
        return _stage_error("oracle", exc, EXIT_USAGE)
    print(json.dumps({
        "theta_deg": transform.theta_deg,
        "dx": transform.dx,
        "dy": transform.dy,
        "ncc": score,
    }, sort_keys=True))
    return EXIT_OK


def cmd_scene(args) -> int:
    img = make_test_scene(size=args.size, seed=args.seed)
    try:
        save_image(img, args.out)
    except OSError as exc:
        return _stage_error("io", exc, EXIT_IO)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="histair",
                     description="Histogram-segmentation rigid image registration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a rotated/shifted (optionally noisy) copy")
    p.add_argument("--input", required=True)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--dx", type=float, default=0.0)
    p.add_argument("--dy", type=float, default=0.0)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fill-value", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("register", help="register a moving image onto a reference")
    p.add_argument("reference")
    p.add_argument("moving")
    _add_pipeline_flags(p)
    p.add_argument("--truth", help="truth JSON; embeds error metrics in the report")
    p.add_argument("--out-report")
    p.add_argument("--out-image")
    p.add_argument("--dump-candidates")
    p.add_argument("--no-timings", action="store_true",
                   help="omit stage timings for byte-comparable reports")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("segment", help="inspect the segmentation of one image")
    p.add_argument("input")
    p.add_argument("--alpha-levels", type=_parse_alphas, default=(0.20, 0.10, 0.05))
    p.add_argument("--smoothing-radius", type=int, default=2)
    p.add_argument("--min-object-area", type=int, default=16)
    p.add_argument("--max-objects", type=int, default=200)
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--wiener-window", type=int, default=5)
    p.add_argument("--noise-variance", type=float, default=None)
    p.add_argument("--raw", action="store_true", help="skip the Wiener prefilter")
    p.add_argument("--features", action="store_true", help="emit the descriptor CSV")
    p.add_argument("--out-labels", help="label map PNG (one file per alpha)")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="compare a report against ground truth")
    p.add_argument("report")
    p.add_argument("truth")
    p.add_argument("--tol-theta", type=float, default=1.0)
    p.add_argument("--tol-shift", type=float, default=1.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="brute-force correlation search")
    p.add_argument("reference")
    p.add_argument("moving")
    p.add_argument("--theta-range", type=float, default=45.0)
    p.add_argument("--theta-step", type=float, default=1.0)
    p.add_argument("--shift-range", type=int, default=80)
    p.add_argument("--shift-step", type=int, default=1)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("scene", help="write the bundled synthetic test scene")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--seed", type=int, default=DEFAULT_SCENE_SEED)
    p.set_defaults(func=cmd_scene)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
