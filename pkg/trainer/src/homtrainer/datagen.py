"""On-the-fly patch-pair generation for training.

Reimplements the evaluation-side synthesis (patch placement, corner
perturbation, warped-patch extraction, noise model) with the same RNG
draw order, so a shared seed yields byte-identical integer sub-steps and
float results within rounding of the evaluation harness.
"""

from pathlib import Path

import numpy as np
from PIL import Image as PilImage

from . import geom
from .errors import DataError

PATCH = 128
RHO = 32
WORK_W, WORK_H = 320, 240

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


def load_image(path, color=False):
    """Decode an image to a [-1, 1] channel-planar float32 array."""
    try:
        with PilImage.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB" if color else "L")
            if color and im.mode == "L":
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float32)
    except OSError as exc:
        raise DataError(f"cannot decode {path}: {exc}") from exc
    norm = arr / 127.5 - 1.0
    img = norm[None] if norm.ndim == 2 else np.moveaxis(norm, -1, 0)
    if not color and img.shape[0] == 3:
        img = (_LUMA[:, None, None] * img).sum(axis=0, keepdims=True)
    return np.clip(img, -1.0, 1.0).astype(np.float32)


def list_images(image_dir):
    paths = sorted(p for p in Path(image_dir).iterdir()
                   if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not paths:
        raise DataError(f"no images found in {image_dir}")
    return paths


def generate_pair(img, rng, patch_size=PATCH, rho=RHO):
    """One (original, warped, target) sample from an image.

    Draw order: patch x0, patch y0, then 8 uniform perturbations (redrawn
    up to 10 times on a degenerate quad).  Returns float32 patches and the
    float64 (8,) corner-displacement target.
    """
    _, h, w = img.shape
    if patch_size + 2 * rho > min(w, h):
        raise DataError(f"{w}x{h} image too small for patch {patch_size}, "
                        f"rho {rho}")
    x0 = int(rng.integers(rho, w - rho - patch_size + 1))
    y0 = int(rng.integers(rho, h - rho - patch_size + 1))
    corners = geom.patch_corners(x0, y0, patch_size)

    target = None
    for _ in range(10):
        candidate = rng.uniform(-rho, rho, size=8)
        if not geom.has_collinear_triple(corners + candidate.reshape(4, 2),
                                         tol=1e-6):
            target = candidate
            break
    if target is None:
        raise DataError("corner perturbation degenerate after 10 retries")

    h_target = geom.h4pt_to_hmat(corners, target)
    warped_full = geom.warp_image(img, geom.invert(h_target), w, h)
    original = img[:, y0:y0 + patch_size, x0:x0 + patch_size].copy()
    warped = np.clip(warped_full[:, y0:y0 + patch_size, x0:x0 + patch_size],
                     -1.0, 1.0)
    return (original, np.ascontiguousarray(warped, dtype=np.float32),
            target, corners)


def add_noise(img, eta, rng):
    """Additive scaled standard-normal noise, clipped to [-1, 1]."""
    img = np.asarray(img, dtype=np.float32)
    if eta == 0:
        return img.copy()
    noisy = img + np.float32(eta) * rng.standard_normal(img.shape).astype(
        np.float32)
    return np.clip(noisy, -1.0, 1.0)


class PairSampler:
    """Deterministic stream of training samples over an image directory.

    Sample i of epoch e is generated from a seed sequence keyed on
    (seed, e, i): identical configs replay the identical stream no matter
    how it is batched.  Noise is applied to both patches (a sensor
    corrupts every frame).
    """

    def __init__(self, image_dir, seed=0, noise_eta=0.0, color=False):
        self.paths = list_images(image_dir)
        self.images = [load_image(p, color=color) for p in self.paths]
        self.seed = seed
        self.noise_eta = noise_eta

    def sample(self, epoch, index):
        rng = np.random.default_rng(
            np.random.SeedSequence((self.seed, epoch, index)))
        # A rare perturbation draw yields a numerically singular
        # homography; redraw from the same stream rather than aborting.
        for attempt in range(10):
            img = self.images[int(rng.integers(0, len(self.images)))]
            try:
                original, warped, target, _ = generate_pair(img, rng)
                break
            except (ValueError, DataError):
                if attempt == 9:
                    raise
        if self.noise_eta:
            original = add_noise(original, self.noise_eta, rng)
            warped = add_noise(warped, self.noise_eta, rng)
        return original, warped, target

    def batches(self, epoch, n_pairs, batch_size):
        """Yield (inputs, targets) float32 batches for one epoch."""
        for start in range(0, n_pairs, batch_size):
            size = min(batch_size, n_pairs - start)
            xs, ys = [], []
            for i in range(start, start + size):
                original, warped, target = self.sample(epoch, i)
                xs.append(np.concatenate([original, warped], axis=0))
                ys.append(target)
            yield (np.stack(xs).astype(np.float32),
                   np.stack(ys).astype(np.float32))
