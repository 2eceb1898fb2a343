"""Self-supervised patch-pair generation and image corruption models.

Images are channel-planar float32 arrays of shape (C, H, W) with values in
[-1, 1] (8-bit value v maps to v / 127.5 - 1).  A pair is built by picking a
random square patch at least ``rho`` pixels from every edge, perturbing each
corner by up to ``rho`` pixels, solving the homography that realizes the
perturbation, and extracting the warped patch from the resampled image at
the original patch coordinates.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import geometry
from .errors import DegenerateConfiguration, DegenerateQuad, ImageTooSmall

CORRUPTION_KINDS = ("none", "noise", "illumination", "occlusion")


@dataclass(frozen=True)
class GenConfig:
    patch_size: int = 128
    rho: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.patch_size < 2:
            raise ValueError("patch_size must be >= 2")


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str = "none"
    magnitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CORRUPTION_KINDS:
            raise ValueError(f"unknown corruption kind {self.kind!r}")
        if self.kind == "noise" and not 0.0 <= self.magnitude <= 1.0:
            raise ValueError("noise magnitude (eta) must be in [0, 1]")
        if self.kind == "illumination" and self.magnitude <= 0.0:
            raise ValueError("illumination magnitude (lambda) must be > 0")
        if self.kind == "occlusion" and not 0.0 <= self.magnitude <= 1.0:
            raise ValueError("occlusion magnitude (alpha) must be in [0, 1]")


@dataclass(frozen=True)
class PatchPair:
    original: np.ndarray          # (C, p, p) float32 in [-1, 1]
    warped: np.ndarray            # (C, p, p) float32 in [-1, 1]
    target: np.ndarray            # (8,) corner displacements, pixels
    corners: np.ndarray           # (4, 2) absolute source-image coordinates
    h_target: np.ndarray          # 3x3, maps original corners to warped


def as_image(data):
    """Validate and coerce an array to the (C, H, W) float32 image layout."""
    img = np.asarray(data, dtype=np.float32)
    if img.ndim == 2:
        img = img[None]
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise ValueError(f"expected (C, H, W) with C in {{1, 3}}, got {img.shape}")
    if img.shape[1] < 1 or img.shape[2] < 1:
        raise ValueError("image must be at least 1x1")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    if img.min() < -1.0 or img.max() > 1.0:
        raise ValueError("image values must lie in [-1, 1]")
    return img


def _quad_ok(quad):
    """Non-degenerate check: no 3 corners collinear."""
    return not geometry._has_collinear_triple(quad, tol=1e-6)


def generate_pair(img, cfg, rng):
    """Generate one PatchPair from an image.

    Deterministic for a fixed (img, cfg, rng state).  Draw order is patch
    x0, patch y0, then the 8 perturbation values (redrawn on a degenerate
    quad, at most 10 times).
    """
    img = as_image(img)
    _, h, w = img.shape
    p, rho = cfg.patch_size, cfg.rho
    if p + 2 * rho > min(w, h):
        raise ImageTooSmall(
            f"{w}x{h} image cannot host patch_size={p} with rho={rho}")

    # Corners must stay >= rho from every edge: x0 in [rho, w-1-rho-(p-1)].
    x0 = int(rng.integers(rho, w - rho - p + 1))
    y0 = int(rng.integers(rho, h - rho - p + 1))
    corners = geometry.patch_corners(x0, y0, p)

    target = None
    for _ in range(10):
        candidate = rng.uniform(-rho, rho, size=8)
        if _quad_ok(corners + candidate.reshape(4, 2)):
            target = candidate
            break
    if target is None:
        raise DegenerateQuad("corner perturbation degenerate after 10 retries")

    try:
        h_target = geometry.h4pt_to_hmat(corners, target)
    except DegenerateConfiguration as exc:
        raise DegenerateQuad(str(exc)) from exc

    # warp_image(img, invert(h_target)) samples img at h_target(p), so the
    # patch extracted at the original coordinates shows the perturbed content.
    warped_full = geometry.warp_image(img, geometry.invert(h_target), w, h)
    original = img[:, y0:y0 + p, x0:x0 + p].copy()
    warped = np.clip(warped_full[:, y0:y0 + p, x0:x0 + p], -1.0, 1.0)
    return PatchPair(
        original=original,
        warped=np.ascontiguousarray(warped, dtype=np.float32),
        target=target,
        corners=corners,
        h_target=h_target,
    )


def add_noise(img, eta, rng):
    """Additive scaled standard-normal noise, clipped to [-1, 1]."""
    if eta < 0:
        raise ValueError("eta must be >= 0")
    img = np.asarray(img, dtype=np.float32)
    if eta == 0:
        return img.copy()
    noisy = img + np.float32(eta) * rng.standard_normal(img.shape).astype(np.float32)
    return np.clip(noisy, -1.0, 1.0)


def shift_illumination(img, lam):
    """Multiplicative illumination shift, clipped to [-1, 1]."""
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    img = np.asarray(img, dtype=np.float32)
    return np.clip(np.float32(lam) * img, -1.0, 1.0)


def occlude(img, alpha, rng):
    """Overwrite a random n x n box with one random color.

    n = round(side * sqrt(alpha)): alpha is the occluded fraction of the
    patch area.  Draw order: box x, box y, per-channel color.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    img = np.asarray(img, dtype=np.float32).copy()
    c, h, w = img.shape
    side = min(h, w)
    n = int(round(side * np.sqrt(alpha)))
    if n == 0:
        return img
    n = min(n, side)
    bx = int(rng.integers(0, w - n + 1))
    by = int(rng.integers(0, h - n + 1))
    color = rng.uniform(-1.0, 1.0, size=c).astype(np.float32)
    img[:, by:by + n, bx:bx + n] = color[:, None, None]
    return img


def apply_corruption(pair, spec, rng):
    """Corrupt a PatchPair per its spec; target and h_target are untouched.

    Noise hits both patches independently (a sensor corrupts every frame);
    illumination and occlusion hit only the warped patch.
    """
    if spec.kind == "none":
        return pair
    if spec.kind == "noise":
        return replace(pair,
                       original=add_noise(pair.original, spec.magnitude, rng),
                       warped=add_noise(pair.warped, spec.magnitude, rng))
    if spec.kind == "illumination":
        return replace(pair, warped=shift_illumination(pair.warped, spec.magnitude))
    if spec.kind == "occlusion":
        return replace(pair, warped=occlude(pair.warped, spec.magnitude, rng))
    raise ValueError(f"unknown corruption kind {spec.kind!r}")
