"""Generate the bundled textured test images (deterministic).

50 grayscale 320x240 PNGs with multi-scale texture and scattered geometric
shapes, rich enough in corners for the feature-matching baseline.  Run from
the repo root:

    python3 scripts/make_test_images.py
"""

from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

OUT = Path(__file__).resolve().parent.parent / "src" / "homkit" / "assets" / "images"
W, H = 320, 240
COUNT = 50


def texture(rng):
    img = np.zeros((H, W))
    # Band-limited noise at several scales.
    for sigma, amp in ((1.5, 0.5), (4.0, 0.8), (12.0, 1.0)):
        layer = ndimage.gaussian_filter(rng.standard_normal((H, W)), sigma)
        layer /= np.abs(layer).max() + 1e-9
        img += amp * layer
    # High-contrast shapes give FAST strong corners.
    for _ in range(rng.integers(25, 45)):
        cx, cy = rng.integers(0, W), rng.integers(0, H)
        val = rng.uniform(-1.2, 1.2)
        kind = rng.integers(0, 3)
        if kind == 0:
            w, h = rng.integers(6, 40, size=2)
            a = rng.uniform(0, np.pi)
            ys, xs = np.mgrid[0:H, 0:W]
            dx, dy = xs - cx, ys - cy
            rx = np.cos(a) * dx + np.sin(a) * dy
            ry = -np.sin(a) * dx + np.cos(a) * dy
            mask = (np.abs(rx) < w / 2) & (np.abs(ry) < h / 2)
        elif kind == 1:
            r = rng.integers(4, 24)
            ys, xs = np.mgrid[0:H, 0:W]
            mask = (xs - cx) ** 2 + (ys - cy) ** 2 < r * r
        else:
            size = rng.integers(8, 30)
            ys, xs = np.mgrid[0:H, 0:W]
            mask = (np.abs(xs - cx) + np.abs(ys - cy)) < size
        img[mask] = val
    # Checker strip adds repeatable corner structure.
    cell = int(rng.integers(8, 17))
    x0, y0 = rng.integers(0, W - 80), rng.integers(0, H - 40)
    ys, xs = np.mgrid[0:H, 0:W]
    strip = (xs // cell + ys // cell) % 2
    band = (xs >= x0) & (xs < x0 + 80) & (ys >= y0) & (ys < y0 + 40)
    img[band] = strip[band] * 1.6 - 0.8
    img = np.clip(img, -1, 1)
    return np.rint((img + 1) * 127.5).astype(np.uint8)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    root = np.random.SeedSequence(8271)
    for i, child in enumerate(root.spawn(COUNT)):
        rng = np.random.default_rng(child)
        Image.fromarray(texture(rng), mode="L").save(OUT / f"tex{i:03d}.png")
    print(f"wrote {COUNT} images to {OUT}")


if __name__ == "__main__":
    main()
