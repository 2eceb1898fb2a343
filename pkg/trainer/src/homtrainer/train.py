"""Training loops: plain DH/HH training, noise curriculum, stack training.

Loss is mean-squared error on the raw pixel-valued corner displacements,
optimized with Adam; the learning rate is halved on a fixed epoch period.
Weights are exported to HWTS with batchnorm in inference form.  The
documented full-scale regime (30 epochs, 1e5-scale pair counts) is the
default config; tests run desk-scale overrides.
"""

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch

from . import datagen, geom, models
from .errors import DataError, DivergenceDetected
from .hwts import save_hwts


@dataclass(frozen=True)
class TrainConfig:
    model: str = "dh"                 # "dh" | "hh"
    epochs: int = 30
    lr: float = 0.005
    lr_halving_period: int = 5
    batch_size: int = 64
    pairs_per_epoch: int = 5000
    val_pairs: int = 256
    noise_eta: float = 0.0
    color: bool = False
    width_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.model not in ("dh", "hh"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def mean_corner_error(pred, target):
    """ACE between two (..., 8) delta arrays: mean corner distance in px."""
    diff = (np.asarray(pred, float) - np.asarray(target, float))
    return np.linalg.norm(diff.reshape(*diff.shape[:-1], 4, 2),
                          axis=-1).mean(axis=-1)


def validation_set(image_dir, cfg, tag=0xF00D):
    """A fixed bundle of validation pairs, disjoint from the train stream."""
    sampler = datagen.PairSampler(image_dir, seed=cfg.seed,
                                  noise_eta=cfg.noise_eta, color=cfg.color)
    xs, ys = [], []
    for i in range(cfg.val_pairs):
        original, warped, target = sampler.sample(tag, i)
        xs.append(np.concatenate([original, warped], axis=0))
        ys.append(target)
    return np.stack(xs).astype(np.float32), np.stack(ys)


def zero_predictor_baseline(image_dir, cfg, n=1000):
    """Monte-Carlo median ACE of always predicting a zero delta."""
    sampler = datagen.PairSampler(image_dir, seed=cfg.seed, color=cfg.color)
    aces = [mean_corner_error(np.zeros(8), sampler.sample(0xBA5E, i)[2])
            for i in range(n)]
    return float(np.median(aces))


def median_val_ace(model, val_x, val_y, batch_size=64):
    model.eval()
    preds = []
    with torch.no_grad():
        for start in range(0, len(val_x), batch_size):
            batch = torch.from_numpy(val_x[start:start + batch_size])
            preds.append(model(batch).numpy())
    model.train()
    return float(np.median(mean_corner_error(np.concatenate(preds), val_y)))


def _log_writer(log_path, cfg):
    if log_path is None:
        return None, None
    f = open(log_path, "w", newline="")
    # Unstated hyperparameters come from framework defaults; record them.
    f.write(f"# optimizer=Adam(betas=(0.9,0.999),eps=1e-8) "
            f"init=torch-default batch_size={cfg.batch_size} "
            f"seed={cfg.seed}\n")
    writer = csv.DictWriter(f, fieldnames=["epoch", "lr", "train_loss",
                                           "val_median_ace"])
    writer.writeheader()
    return f, writer


def _train_model(model, cfg, sampler, val_x, val_y, log_path, epoch_offset=0):
    """Shared loop; mutates the model and returns the last epoch's loss."""
    torch.manual_seed(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    sched = torch.optim.lr_scheduler.StepLR(
        opt, step_size=cfg.lr_halving_period, gamma=0.5)
    loss_fn = torch.nn.MSELoss()
    f, writer = _log_writer(log_path, cfg)
    model.train()
    last = float("nan")
    try:
        for epoch in range(cfg.epochs):
            losses = []
            for xs, ys in sampler.batches(epoch + epoch_offset,
                                          cfg.pairs_per_epoch,
                                          cfg.batch_size):
                opt.zero_grad()
                loss = loss_fn(model(torch.from_numpy(xs)),
                               torch.from_numpy(ys))
                if not torch.isfinite(loss):
                    raise DivergenceDetected(
                        f"non-finite loss at epoch {epoch + 1}")
                loss.backward()
                opt.step()
                losses.append(float(loss.detach()))
            sched.step()
            last = float(np.mean(losses))
            if writer:
                writer.writerow({
                    "epoch": epoch + 1,
                    "lr": opt.param_groups[0]["lr"],
                    "train_loss": f"{last:.6f}",
                    "val_median_ace":
                        f"{median_val_ace(model, val_x, val_y):.4f}",
                })
                f.flush()
    finally:
        if f:
            f.close()
    return last


def train(cfg, image_dir, out_path, log_path=None):
    """Train a fresh model per cfg; writes HWTS weights, returns the model."""
    if cfg.model == "dh":
        model = models.DhNet(width_scale=cfg.width_scale, color=cfg.color)
    else:
        model = models.HhModuleNet(width_scale=cfg.width_scale)
    sampler = datagen.PairSampler(image_dir, seed=cfg.seed,
                                  noise_eta=cfg.noise_eta, color=cfg.color)
    val_x, val_y = validation_set(image_dir, cfg)
    _train_model(model, cfg, sampler, val_x, val_y, log_path)
    model.eval()
    if cfg.model == "dh":
        save_hwts(model.export_tensors(), out_path)
    else:
        save_hwts(models.export_hh_stack([model]), out_path)
    return model


def train_noise_curriculum(base_model, cfg, image_dir, out_dir,
                           stages=(0.1, 0.3, 0.5)):
    """Sequentially fine-tune a trained model at rising noise levels.

    Writes one weight file per stage (dh_noise_<eta*100>.hwts) and returns
    {eta: model-state snapshot} keyed in stage order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = {}
    model = base_model
    for stage_idx, eta in enumerate(stages):
        stage_cfg = replace(cfg, noise_eta=eta)
        sampler = datagen.PairSampler(image_dir, seed=cfg.seed + stage_idx + 1,
                                      noise_eta=eta, color=cfg.color)
        val_x, val_y = validation_set(image_dir, stage_cfg)
        _train_model(model, stage_cfg, sampler, val_x, val_y, None,
                     epoch_offset=1000 * (stage_idx + 1))
        model.eval()
        path = out_dir / f"dh_noise_{int(round(eta * 100))}.hwts"
        save_hwts(model.export_tensors(), path)
        results[eta] = path
        model.train()
    return results


def train_hh_stack(cfg, image_dir, out_path, module_count=3,
                   stack_pairs=512):
    """Train HH modules sequentially on residual targets.

    Module 1 trains on raw pairs.  Module i > 1 trains on residual
    targets: each sample's new warped patch is regenerated from the source
    image using the residual displacement as the homography target.
    Returns (modules, residual_medians) where residual_medians[i] is the
    median |target component| seen by stage i + 1.
    """
    sampler = datagen.PairSampler(image_dir, seed=cfg.seed,
                                  noise_eta=cfg.noise_eta)

    # One fixed roster of source samples is reused across stages so the
    # residual shrinkage is measured on matched data.
    roster = []
    for i in range(stack_pairs):
        rng = np.random.default_rng(
            np.random.SeedSequence((cfg.seed, 0xCAFE, i)))
        for attempt in range(10):
            img = sampler.images[int(rng.integers(0, len(sampler.images)))]
            try:
                original, warped, target, corners = datagen.generate_pair(
                    img, rng)
                break
            except (ValueError, DataError):
                if attempt == 9:
                    raise
        roster.append({"img": img, "original": original, "warped": warped,
                       "target": target, "corners": corners})

    modules = []
    residual_medians = []
    targets = np.stack([s["target"] for s in roster])
    warpeds = [s["warped"] for s in roster]
    for m in range(module_count):
        residual_medians.append(float(np.median(np.abs(targets))))
        module = models.HhModuleNet(width_scale=cfg.width_scale)
        _train_roster_module(module, cfg, roster, warpeds, targets)
        modules.append(module)
        if m == module_count - 1:
            break
        # Predict on the roster, then rebuild each warped patch from the
        # residual target so the next module sees the remaining motion.
        preds = _predict_roster(module, roster, warpeds)
        targets = targets - preds
        warpeds = []
        for s, residual in zip(roster, targets):
            warpeds.append(_rewarp_from_target(s, residual))
    save_hwts(models.export_hh_stack(modules), out_path)
    return modules, residual_medians


def _train_roster_module(module, cfg, roster, warpeds, targets):
    torch.manual_seed(cfg.seed)
    opt = torch.optim.Adam(module.parameters(), lr=cfg.lr)
    sched = torch.optim.lr_scheduler.StepLR(
        opt, step_size=cfg.lr_halving_period, gamma=0.5)
    loss_fn = torch.nn.MSELoss()
    xs = np.stack([np.concatenate([s["original"], w], axis=0)
                   for s, w in zip(roster, warpeds)]).astype(np.float32)
    ys = targets.astype(np.float32)
    module.train()
    order_rng = np.random.default_rng(cfg.seed)
    for epoch in range(cfg.epochs):
        order = order_rng.permutation(len(xs))
        for start in range(0, len(xs), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            opt.zero_grad()
            loss = loss_fn(module(torch.from_numpy(xs[idx])),
                           torch.from_numpy(ys[idx]))
            if not torch.isfinite(loss):
                raise DivergenceDetected(f"non-finite loss at epoch {epoch + 1}")
            loss.backward()
            opt.step()
        sched.step()


def _predict_roster(module, roster, warpeds, batch_size=32):
    xs = np.stack([np.concatenate([s["original"], w], axis=0)
                   for s, w in zip(roster, warpeds)]).astype(np.float32)
    module.eval()
    preds = []
    with torch.no_grad():
        for start in range(0, len(xs), batch_size):
            preds.append(module(
                torch.from_numpy(xs[start:start + batch_size])).numpy())
    module.train()
    return np.concatenate(preds).astype(np.float64)


def _rewarp_from_target(sample, residual):
    """New warped patch per the residual displacement target."""
    img = sample["img"]
    _, h, w = img.shape
    corners = sample["corners"]
    x0, y0 = int(corners[0, 0]), int(corners[0, 1])
    p = sample["original"].shape[-1]
    try:
        h_res = geom.h4pt_to_hmat(corners, residual)
        warped_full = geom.warp_image(img, geom.invert(h_res), w, h)
    except ValueError:
        return sample["warped"]
    return np.clip(warped_full[:, y0:y0 + p, x0:x0 + p],
                   -1.0, 1.0).astype(np.float32)
