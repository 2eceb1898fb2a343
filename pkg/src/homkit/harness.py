"""Experiment driver: image ingestion, the corruption grid, and reports.

One patch pair is generated per input image; every grid cell (corruption
kind + magnitude) corrupts a copy of that pair and runs each requested
method on it.  All randomness is derived from (experiment seed, image
index, cell index) seed sequences, so results are identical regardless of
worker count or scheduling.
"""

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PilImage, UnidentifiedImageError

from . import classical, geometry, metrics, models, synth
from .errors import (
    DecodeError,
    EmptyInput,
    EstimationFailed,
    SchemaError,
    UnsupportedFormat,
)
from .nn import load_weights

__version__ = "0.1.0"

DEFAULT_GRID = (
    [synth.CorruptionSpec("none", 0.0)]
    + [synth.CorruptionSpec("noise", eta) for eta in (0.1, 0.3, 0.5)]
    + [synth.CorruptionSpec("illumination", lam) for lam in (1.2, 1.4, 1.6)]
    + [synth.CorruptionSpec("occlusion", alpha) for alpha in (0.2, 0.4, 0.6)]
)

WORK_W, WORK_H = 320, 240         # pre-resize target before patch extraction

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


def load_image(path, grayscale=True):
    """Decode an 8-bit PNG/JPEG to a [-1, 1] channel-planar image."""
    path = Path(path)
    if path.suffix.lower() not in (".png", ".jpg", ".jpeg"):
        raise UnsupportedFormat(f"unsupported image extension: {path.suffix}")
    try:
        with PilImage.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB" if not grayscale else "L")
            arr = np.asarray(im, dtype=np.float32)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    norm = arr / 127.5 - 1.0
    if norm.ndim == 2:
        img = norm[None]
    else:
        img = np.moveaxis(norm, -1, 0)
    if grayscale and img.shape[0] == 3:
        img = (_LUMA[:, None, None] * img).sum(axis=0, keepdims=True)
    return np.clip(img, -1.0, 1.0).astype(np.float32)


def resize_bilinear(img, w, h):
    """Bilinear resampling with half-pixel-center coordinates."""
    img = np.asarray(img, dtype=np.float32)
    if img.ndim == 2:
        img = img[None]
    c, in_h, in_w = img.shape
    if w < 1 or h < 1:
        raise ValueError("target size must be >= 1x1")
    if (in_w, in_h) == (w, h):
        return img.copy()
    sx = np.clip((np.arange(w) + 0.5) * (in_w / w) - 0.5, 0, in_w - 1)
    sy = np.clip((np.arange(h) + 0.5) * (in_h / h) - 0.5, 0, in_h - 1)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = (sx - x0).astype(np.float32)
    fy = (sy - y0).astype(np.float32)
    top = img[:, y0][:, :, x0] * (1 - fx) + img[:, y0][:, :, x1] * fx
    bot = img[:, y1][:, :, x0] * (1 - fx) + img[:, y1][:, :, x1] * fx
    return (top * (1 - fy)[None, :, None] + bot * fy[None, :, None]).astype(np.float32)


@dataclass(frozen=True)
class ExperimentConfig:
    image_dir: str
    methods: tuple = ("classical",)
    weights_dh: str = ""
    weights_hh: str = ""
    grid: tuple = tuple(DEFAULT_GRID)
    gen: synth.GenConfig = field(default_factory=synth.GenConfig)
    max_images: int = 0           # 0 means all
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.methods:
            raise ValueError("at least one method is required")
        for m in self.methods:
            if m not in ("dh", "hh", "classical"):
                raise ValueError(f"unknown method {m!r}")
        if not self.grid:
            raise ValueError("grid must be nonempty")


def config_from_json(path, overrides=None):
    """Build an ExperimentConfig from a JSON file plus CLI overrides."""
    with open(path) as f:
        raw = json.load(f)
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    grid = raw.get("grid")
    if grid is not None:
        grid = tuple(synth.CorruptionSpec(g["kind"], g.get("magnitude", 0.0))
                     for g in grid)
    else:
        grid = tuple(DEFAULT_GRID)
    gen_raw = raw.get("gen", {})
    return ExperimentConfig(
        image_dir=raw["image_dir"],
        methods=tuple(raw.get("methods", ["classical"])),
        weights_dh=raw.get("weights_dh", ""),
        weights_hh=raw.get("weights_hh", ""),
        grid=grid,
        gen=synth.GenConfig(patch_size=gen_raw.get("patch_size", 128),
                            rho=gen_raw.get("rho", 32),
                            seed=gen_raw.get("seed", 0)),
        max_images=raw.get("max_images", 0),
        seed=raw.get("seed", 0),
        workers=raw.get("workers", 1),
    )


def list_images(image_dir, max_images=0):
    paths = sorted(p for p in Path(image_dir).iterdir()
                   if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if max_images:
        paths = paths[:max_images]
    return paths


class _CnnRunner:
    """Loads weights once and infers the architecture from tensor shapes."""

    def __init__(self, method, weight_path):
        self.method = method
        self.store = load_weights(weight_path)
        if method == "dh":
            w1 = self.store["conv1.weight"]
            widths = tuple(int(self.store[f"conv{i}.weight"].shape[0])
                           for i in range(1, 9))
            hidden = int(self.store["fc1.weight"].shape[0])
            self.cfg = models.DhConfig(in_channels=int(w1.shape[1]),
                                       conv_widths=widths, fc_hidden=hidden)
        else:
            count = 0
            while f"module{count + 1}.fc2.bias" in self.store:
                count += 1
            if count == 0:
                raise SchemaError("no HH modules found in weight store")
            mods = []
            for m in range(1, count + 1):
                bw = tuple(int(self.store[f"module{m}.branch{i}.weight"].shape[0])
                           for i in range(1, 5))
                mw = tuple(int(self.store[f"module{m}.merged{i}.weight"].shape[0])
                           for i in range(1, 5))
                hidden = int(self.store[f"module{m}.fc1.weight"].shape[0])
                mods.append(models.HhModuleConfig(branch_widths=bw,
                                                  merged_widths=mw,
                                                  fc_hidden=hidden))
            self.cfg = models.HierarchicalStack(modules=tuple(mods))

    def estimate(self, pair):
        local = geometry.patch_corners(0, 0, pair.original.shape[-1])
        if self.method == "dh":
            per = self.cfg.in_channels // 2
            orig, warp = pair.original, pair.warped
            if per == 3 and orig.shape[0] == 1:
                orig = np.repeat(orig, 3, axis=0)
                warp = np.repeat(warp, 3, axis=0)
            return models.dh_forward(self.store, self.cfg, orig, warp)
        delta, _ = models.hh_stack_infer(self.store, self.cfg,
                                         pair.original, pair.warped, local)
        return delta


def _evaluate_sample(path, idx, cfg, runners):
    """All AceRecords for one input image, deterministic in (cfg, idx)."""
    sample_id = path.name
    records = []
    try:
        img = load_image(path, grayscale=True)
        img = resize_bilinear(img, WORK_W, WORK_H)
        gen_rng = np.random.default_rng(
            np.random.SeedSequence((cfg.seed, idx, 0xA11CE)))
        pair = synth.generate_pair(img, cfg.gen, gen_rng)
    except Exception:
        for cell_idx, spec in enumerate(cfg.grid):
            for method in cfg.methods:
                records.append(metrics.AceRecord(
                    sample_id, method, spec.kind, spec.magnitude, None))
        return records

    local = geometry.patch_corners(0, 0, cfg.gen.patch_size)
    h_target_local = geometry.h4pt_to_hmat(local, pair.target)
    for cell_idx, spec in enumerate(cfg.grid):
        cell_rng = np.random.default_rng(
            np.random.SeedSequence((cfg.seed, idx, cell_idx, 0xC0)))
        corrupted = synth.apply_corruption(pair, spec, cell_rng)
        for method in cfg.methods:
            ace_val = None
            try:
                if method == "classical":
                    r_cfg = classical.RansacConfig(seed=cfg.seed + idx)
                    delta = classical.classical_estimate(
                        corrupted.original, corrupted.warped, r_cfg)
                else:
                    delta = runners[method].estimate(corrupted)
                h_est = geometry.h4pt_to_hmat(local, delta)
                ace_val = metrics.safe_ace(h_target_local, h_est, local)
            except Exception:
                ace_val = None
            records.append(metrics.AceRecord(
                sample_id, method, spec.kind, spec.magnitude, ace_val))
    return records


def run_experiment(cfg, out_dir):
    """Run the full grid; writes records/summary/curves CSVs and a manifest.

    Returns the list of AceRecords.  Per-sample failures become undefined
    records; they never abort the run.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = list_images(cfg.image_dir, cfg.max_images)
    if not paths:
        raise EmptyInput(f"no images found in {cfg.image_dir}")

    runners = {}
    for method in cfg.methods:
        if method == "dh":
            runners["dh"] = _CnnRunner("dh", cfg.weights_dh)
        elif method == "hh":
            runners["hh"] = _CnnRunner("hh", cfg.weights_hh)

    started = time.time()
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(
                lambda args: _evaluate_sample(*args, cfg, runners),
                [(p, i) for i, p in enumerate(paths)]))
    else:
        chunks = [_evaluate_sample(p, i, cfg, runners)
                  for i, p in enumerate(paths)]
    records = [r for chunk in chunks for r in chunk]

    metrics.write_records_csv(records, out_dir / "records.csv")
    summary = metrics.summarize(records)
    metrics.write_summary_csv(summary, out_dir / "summary.csv")
    metrics.write_curves_csv(records, out_dir / "curves.csv")

    manifest = {
        "version": __version__,
        "started": started,
        "finished": time.time(),
        "config": {
            "image_dir": str(cfg.image_dir),
            "methods": list(cfg.methods),
            "weights_dh": cfg.weights_dh,
            "weights_hh": cfg.weights_hh,
            "grid": [{"kind": g.kind, "magnitude": g.magnitude} for g in cfg.grid],
            "gen": {"patch_size": cfg.gen.patch_size, "rho": cfg.gen.rho,
                    "seed": cfg.gen.seed},
            "max_images": cfg.max_images,
            "seed": cfg.seed,
            "workers": cfg.workers,
        },
        "images": [p.name for p in paths],
        "per_image_seeds": [[cfg.seed, i, 0xA11CE] for i in range(len(paths))],
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
    return records


def _fmt_cell(median, ratio, bold):
    med = "NAN" if math.isnan(median) else f"{median:.2f}"
    cell = f"{med} / {ratio:.2f}"
    return f"**{cell}**" if bold else cell


def report_markdown(summary_rows):
    """Markdown tables, one per corruption kind: methods x magnitudes,
    cells "median / OR", best (lowest) median per magnitude bolded."""
    if not summary_rows:
        raise SchemaError("empty summary")
    by_kind = {}
    for row in summary_rows:
        by_kind.setdefault(row["corruption_kind"], []).append(row)

    lines = []
    for kind in sorted(by_kind):
        rows = by_kind[kind]
        mags = sorted({r["magnitude"] for r in rows})
        methods = sorted({r["method"] for r in rows})
        cells = {(r["method"], r["magnitude"]): r for r in rows}
        best = {}
        for m in mags:
            meds = [cells[(meth, m)]["median_ace"] for meth in methods
                    if (meth, m) in cells]
            finite = [v for v in meds if not math.isnan(v)]
            best[m] = min(finite) if finite else None
        title = "ideal" if kind == "none" else kind
        lines.append(f"## {title}")
        lines.append("")
        header = ["method"] + [f"{m:g}" for m in mags]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for meth in methods:
            out = [meth]
            for m in mags:
                r = cells.get((meth, m))
                if r is None:
                    out.append("-")
                    continue
                bold = (best[m] is not None
                        and not math.isnan(r["median_ace"])
                        and r["median_ace"] == best[m])
                out.append(_fmt_cell(r["median_ace"], r["outlier_ratio"], bold))
            lines.append("| " + " | ".join(out) + " |")
        lines.append("")
    return "\n".join(lines)
