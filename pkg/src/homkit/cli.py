"""Command line entry points: generate / eval / report / weights-inspect."""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image as PilImage

from . import harness, metrics, synth
from .nn import load_weights


def _to_u8(img):
    """[-1, 1] channel-planar float image -> HxW[xC] uint8."""
    arr = np.clip((np.asarray(img) + 1.0) * 127.5, 0, 255)
    arr = np.rint(arr).astype(np.uint8)
    if arr.shape[0] == 1:
        return arr[0]
    return np.moveaxis(arr, 0, -1)


def _cmd_generate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = harness.list_images(args.images, args.count)
    if not paths:
        print(f"no images found in {args.images}", file=sys.stderr)
        return 1
    cfg = synth.GenConfig(patch_size=args.patch_size, rho=args.rho, seed=args.seed)
    written = 0
    for idx, path in enumerate(paths):
        img = harness.load_image(path, grayscale=not args.color)
        img = harness.resize_bilinear(img, harness.WORK_W, harness.WORK_H)
        rng = np.random.default_rng(np.random.SeedSequence((args.seed, idx, 0xA11CE)))
        try:
            pair = synth.generate_pair(img, cfg, rng)
        except Exception as exc:
            print(f"skipping {path.name}: {exc}", file=sys.stderr)
            continue
        stem = f"{idx:05d}_{path.stem}"
        PilImage.fromarray(_to_u8(pair.original)).save(out / f"{stem}_original.png")
        PilImage.fromarray(_to_u8(pair.warped)).save(out / f"{stem}_warped.png")
        with open(out / f"{stem}.json", "w") as f:
            json.dump({
                "source": path.name,
                "target": pair.target.tolist(),
                "corners": pair.corners.tolist(),
                "h_target": pair.h_target.tolist(),
                "patch_size": cfg.patch_size,
                "rho": cfg.rho,
                "seed": [args.seed, idx, 0xA11CE],
            }, f, indent=2)
        written += 1
    print(f"wrote {written} patch pairs to {out}")
    return 0


def _parse_grid(args):
    if args.grid_default or not args.corruption:
        return tuple(harness.DEFAULT_GRID)
    mags = args.magnitude if args.magnitude else [0.0]
    return tuple(synth.CorruptionSpec(args.corruption, m) for m in mags)


def _cmd_eval(args):
    overrides = {
        "image_dir": args.images,
        "methods": args.methods.split(",") if args.methods else None,
        "weights_dh": args.weights_dh,
        "weights_hh": args.weights_hh,
        "max_images": args.max_images,
        "seed": args.seed,
        "workers": args.workers,
    }
    if args.config:
        cfg = harness.config_from_json(args.config, overrides)
        if args.corruption or args.grid_default:
            cfg = harness.ExperimentConfig(
                **{**cfg.__dict__, "grid": _parse_grid(args)})
    else:
        if not args.images:
            print("either --config or --images is required", file=sys.stderr)
            return 1
        cfg = harness.ExperimentConfig(
            image_dir=args.images,
            methods=tuple((args.methods or "classical").split(",")),
            weights_dh=args.weights_dh or "",
            weights_hh=args.weights_hh or "",
            grid=_parse_grid(args),
            gen=synth.GenConfig(rho=args.rho, seed=args.seed or 0),
            max_images=args.max_images or 0,
            seed=args.seed or 0,
            workers=args.workers or 1,
        )
    records = harness.run_experiment(cfg, args.out_dir)
    summary = metrics.summarize(records)
    print(harness.report_markdown(summary))
    print(f"{len(records)} records written to {args.out_dir}")
    return 0


def _cmd_report(args):
    rows = metrics.read_summary_csv(args.summary)
    text = harness.report_markdown(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return 0


def _cmd_weights_inspect(args):
    store = load_weights(args.path)
    total = 0
    for name, tensor in store.items():
        print(f"{name}  shape={tuple(tensor.shape)}  count={tensor.size}")
        total += tensor.size
    print(f"# {len(store)} tensors, {total} parameters")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="homkit",
                                description="homography estimation and "
                                            "robustness benchmarking toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit patch-pair datasets to disk")
    g.add_argument("--images", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--count", type=int, default=0, help="0 = all images")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--patch-size", type=int, default=128)
    g.add_argument("--rho", type=int, default=32)
    g.add_argument("--color", action="store_true")
    g.set_defaults(func=_cmd_generate)

    e = sub.add_parser("eval", help="run the corruption-grid experiment")
    e.add_argument("--config", help="JSON config; flags override its values")
    e.add_argument("--images")
    e.add_argument("--methods", help="comma list from dh,hh,classical")
    e.add_argument("--weights-dh")
    e.add_argument("--weights-hh")
    e.add_argument("--corruption", choices=synth.CORRUPTION_KINDS)
    e.add_argument("--magnitude", type=float, action="append")
    e.add_argument("--grid-default", action="store_true")
    e.add_argument("--max-images", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--rho", type=int, default=32)
    e.add_argument("--workers", type=int)
    e.add_argument("--out-dir", required=True)
    e.set_defaults(func=_cmd_eval)

    r = sub.add_parser("report", help="render a summary CSV as markdown")
    r.add_argument("--summary", required=True)
    r.add_argument("--out")
    r.set_defaults(func=_cmd_report)

    w = sub.add_parser("weights-inspect", help="dump an HWTS file manifest")
    w.add_argument("path")
    w.set_defaults(func=_cmd_weights_inspect)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
