"""Minimal homography helpers for label generation.

The semantics here (normalized DLT, canonical scaling, inverse-map
bilinear warping) match the inference engine's geometry conventions so
that pairs generated for training are byte-for-byte the pairs the
evaluation harness would synthesize from the same seeds.
"""

import numpy as np

_SINGULAR_EPS = 1e-12


def canonicalize(h):
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)) or abs(np.linalg.det(h)) <= _SINGULAR_EPS:
        raise ValueError("homography is singular or non-finite")
    if abs(h[2, 2]) > 1e-8:
        return h / h[2, 2]
    return h / np.linalg.norm(h)


def apply_homography(h, pts):
    pts = np.asarray(pts, dtype=float)
    single = pts.ndim == 1
    p = np.atleast_2d(pts)
    hom = np.column_stack([p, np.ones(len(p))]) @ np.asarray(h, float).T
    w = hom[:, 2]
    if np.any(np.abs(w) < _SINGULAR_EPS):
        raise ValueError("point maps to the line at infinity")
    out = hom[:, :2] / w[:, None]
    return out[0] if single else out


def has_collinear_triple(pts, tol=1e-8):
    pts = np.asarray(pts, dtype=float)
    n = len(pts)
    scale = max(np.ptp(pts, axis=0).max(), 1.0)
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            for k in range(j + 1, n):
                a, b, c = pts[i], pts[j], pts[k]
                area2 = abs((b[0] - a[0]) * (c[1] - a[1])
                            - (b[1] - a[1]) * (c[0] - a[0]))
                if area2 < tol * scale * scale:
                    return True
    return False


def _normalization_transform(pts):
    centroid = pts.mean(axis=0)
    mean_dist = np.linalg.norm(pts - centroid, axis=1).mean()
    if mean_dist < _SINGULAR_EPS:
        raise ValueError("all points coincide")
    s = np.sqrt(2.0) / mean_dist
    return np.array([[s, 0.0, -s * centroid[0]],
                     [0.0, s, -s * centroid[1]],
                     [0.0, 0.0, 1.0]])


def dlt_homography(src, dst):
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    n = len(src)
    if n == 4 and (has_collinear_triple(src) or has_collinear_triple(dst)):
        raise ValueError("3 points of a minimal sample are collinear")
    t_src = _normalization_transform(src)
    t_dst = _normalization_transform(dst)
    ns = apply_homography(t_src, src)
    nd = apply_homography(t_dst, dst)

    a = np.zeros((2 * n, 9))
    x, y = ns[:, 0], ns[:, 1]
    u, v = nd[:, 0], nd[:, 1]
    a[0::2, 0] = -x
    a[0::2, 1] = -y
    a[0::2, 2] = -1.0
    a[0::2, 6] = u * x
    a[0::2, 7] = u * y
    a[0::2, 8] = u
    a[1::2, 3] = -x
    a[1::2, 4] = -y
    a[1::2, 5] = -1.0
    a[1::2, 6] = v * x
    a[1::2, 7] = v * y
    a[1::2, 8] = v

    _, sv, vt = np.linalg.svd(a)
    if sv[7] < 1e-10 * max(sv[0], 1.0):
        raise ValueError("correspondences are degenerate")
    h = np.linalg.inv(t_dst) @ vt[-1].reshape(3, 3) @ t_src
    return canonicalize(h)


def invert(h):
    h = np.asarray(h, dtype=float)
    if abs(np.linalg.det(h)) <= _SINGULAR_EPS:
        raise ValueError("cannot invert a near-singular homography")
    return canonicalize(np.linalg.inv(h))


def patch_corners(x0, y0, size):
    s = size - 1
    return np.array([[x0, y0], [x0 + s, y0], [x0 + s, y0 + s], [x0, y0 + s]],
                    dtype=float)


def h4pt_to_hmat(corners, delta):
    corners = np.asarray(corners, dtype=float)
    d = np.asarray(delta, dtype=float).reshape(4, 2)
    return dlt_homography(corners, corners + d)


def warp_image(img, h, out_w, out_h, fill=0.0):
    """Inverse-map bilinear warp of a channel-planar (C, H, W) image."""
    img = np.asarray(img)
    if img.ndim == 2:
        img = img[None]
    c, in_h, in_w = img.shape
    hi = invert(h)

    xs, ys = np.meshgrid(np.arange(out_w, dtype=float),
                         np.arange(out_h, dtype=float))
    w = hi[2, 0] * xs + hi[2, 1] * ys + hi[2, 2]
    w = np.where(np.abs(w) < _SINGULAR_EPS, np.nan, w)
    sx = (hi[0, 0] * xs + hi[0, 1] * ys + hi[0, 2]) / w
    sy = (hi[1, 0] * xs + hi[1, 1] * ys + hi[1, 2]) / w

    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0

    out = np.zeros((c, out_h, out_w), dtype=np.float64)
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            wgt = (fx if dx else (1.0 - fx)) * (fy if dy else (1.0 - fy))
            inside = (xi >= 0) & (xi < in_w) & (yi >= 0) & (yi < in_h)
            inside &= np.isfinite(wgt)
            xi_c = np.where(inside, xi, 0).astype(np.intp)
            yi_c = np.where(inside, yi, 0).astype(np.intp)
            for ch in range(c):
                vals = np.where(inside, img[ch, yi_c, xi_c], fill)
                out[ch] += np.where(np.isfinite(wgt), wgt, 0.0) * vals
    bad = ~np.isfinite(sx) | ~np.isfinite(sy)
    out[:, bad] = fill
    return out.astype(img.dtype if img.dtype == np.float32 else np.float64)
