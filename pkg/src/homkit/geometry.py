"""Planar projective geometry.

Homographies are 3x3 numpy arrays in canonical scaling (``m[2,2] == 1``
whenever that entry is usable, unit Frobenius norm otherwise).  Points are
(u, v) pairs with u horizontal and v vertical; point sets are (N, 2) arrays.
Corner sets follow the fixed order top-left, top-right, bottom-right,
bottom-left, and a four-point delta is the flat 8-vector
(du1, dv1, ..., du4, dv4) of corner displacements, warped minus original.
"""

import numpy as np

from .errors import (
    DegenerateConfiguration,
    NumericalFailure,
    ProjectiveDivergence,
)

_SINGULAR_EPS = 1e-12
_SCALE_EPS = 1e-9


def canonicalize(h):
    """Return h rescaled to the canonical form used for comparisons."""
    h = np.asarray(h, dtype=float)
    if h.shape != (3, 3):
        raise ValueError(f"homography must be 3x3, got {h.shape}")
    if not np.all(np.isfinite(h)) or abs(np.linalg.det(h)) <= _SINGULAR_EPS:
        raise NumericalFailure("homography is singular or non-finite")
    if abs(h[2, 2]) > _SCALE_EPS:
        return h / h[2, 2]
    return h / np.linalg.norm(h)


def apply_homography(h, pts):
    """Map one point or an (N, 2) array of points through h.

    Raises ProjectiveDivergence when a point lands on the line at infinity
    (third homogeneous coordinate below 1e-12 in magnitude).
    """
    h = np.asarray(h, dtype=float)
    pts = np.asarray(pts, dtype=float)
    single = pts.ndim == 1
    p = np.atleast_2d(pts)
    w = h[2, 0] * p[:, 0] + h[2, 1] * p[:, 1] + h[2, 2]
    if np.any(np.abs(w) < _SINGULAR_EPS):
        raise ProjectiveDivergence("point maps to the line at infinity")
    u = (h[0, 0] * p[:, 0] + h[0, 1] * p[:, 1] + h[0, 2]) / w
    v = (h[1, 0] * p[:, 0] + h[1, 1] * p[:, 1] + h[1, 2]) / w
    out = np.stack([u, v], axis=1)
    return out[0] if single else out


def _normalization_transform(pts):
    """Hartley normalization: centroid to origin, mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    dists = np.linalg.norm(pts - centroid, axis=1)
    mean_dist = dists.mean()
    if mean_dist < _SINGULAR_EPS:
        raise DegenerateConfiguration("all points coincide")
    s = np.sqrt(2.0) / mean_dist
    t = np.array([
        [s, 0.0, -s * centroid[0]],
        [0.0, s, -s * centroid[1]],
        [0.0, 0.0, 1.0],
    ])
    return t


def _has_collinear_triple(pts, tol=1e-8):
    """True if any 3 of the (<= ~8) points are collinear, scale-relative."""
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


def dlt_homography(src, dst):
    """Least-squares homography mapping src points to dst points.

    Normalized DLT: both point sets are Hartley-normalized, the 2n x 9
    system is solved by SVD, and the result is denormalized.  With exactly
    four correspondences the solution interpolates.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError("src/dst must be matching (N, 2) arrays")
    n = len(src)
    if n < 4:
        raise DegenerateConfiguration(f"need >= 4 correspondences, got {n}")
    if n == 4 and (_has_collinear_triple(src) or _has_collinear_triple(dst)):
        raise DegenerateConfiguration("3 points of a minimal sample are collinear")

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

    try:
        _, sv, vt = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("SVD did not converge") from exc
    if sv[7] < 1e-10 * max(sv[0], 1.0):
        # Rank below 8: solution is not unique.
        raise DegenerateConfiguration("correspondences are degenerate")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ hn @ t_src
    try:
        return canonicalize(h)
    except NumericalFailure as exc:
        raise DegenerateConfiguration("solved homography is singular") from exc


def invert(h):
    """Inverse homography, canonically scaled."""
    h = np.asarray(h, dtype=float)
    if abs(np.linalg.det(h)) <= _SINGULAR_EPS:
        raise NumericalFailure("cannot invert a near-singular homography")
    return canonicalize(np.linalg.inv(h))


def compose(a, b):
    """Homography applying b first, then a."""
    return canonicalize(np.asarray(a, float) @ np.asarray(b, float))


def patch_corners(x0, y0, size):
    """Corners of an axis-aligned square patch, fixed TL/TR/BR/BL order."""
    s = size - 1
    return np.array([
        [x0, y0],
        [x0 + s, y0],
        [x0 + s, y0 + s],
        [x0, y0 + s],
    ], dtype=float)


def h4pt_to_hmat(corners, delta):
    """Homography mapping each corner i to corner i + delta i."""
    corners = np.asarray(corners, dtype=float)
    d = np.asarray(delta, dtype=float).reshape(4, 2)
    return dlt_homography(corners, corners + d)


def hmat_to_h4pt(h, corners):
    """Four-point delta of h at the given corners (warped minus original)."""
    corners = np.asarray(corners, dtype=float)
    return (apply_homography(h, corners) - corners).reshape(8)


def warp_image(img, h, out_w, out_h, fill=0.0):
    """Warp an image by a homography using inverse mapping.

    img is channel-planar (C, H, W).  Every output pixel p is filled with a
    bilinear sample of img at invert(h)(p); samples whose neighbors fall
    outside the source contribute the fill value.
    """
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
    # Pixels whose inverse map diverged get pure fill.
    bad = ~np.isfinite(sx) | ~np.isfinite(sy)
    out[:, bad] = fill
    return out.astype(img.dtype if img.dtype == np.float32 else np.float64)


def _transfer_residuals(params, src, dst):
    """Residual vector of the symmetric transfer error for 8-parameter h."""
    h = np.append(params, 1.0).reshape(3, 3)
    fwd = apply_homography(h, src) - dst
    bwd = apply_homography(np.linalg.inv(h), dst) - src
    return np.concatenate([fwd.ravel(), bwd.ravel()])


def _transfer_jacobian(params, src, dst):
    """Analytic Jacobian of _transfer_residuals, shape (4n, 8)."""
    h = np.append(params, 1.0).reshape(3, 3)
    n = len(src)
    jac = np.zeros((4 * n, 8))

    # Forward block: d/dh of (h src - dst).
    x, y = src[:, 0], src[:, 1]
    w = h[2, 0] * x + h[2, 1] * y + h[2, 2]
    u = (h[0, 0] * x + h[0, 1] * y + h[0, 2]) / w
    v = (h[1, 0] * x + h[1, 1] * y + h[1, 2]) / w
    jac[0:2 * n:2, 0] = x / w
    jac[0:2 * n:2, 1] = y / w
    jac[0:2 * n:2, 2] = 1.0 / w
    jac[0:2 * n:2, 6] = -u * x / w
    jac[0:2 * n:2, 7] = -u * y / w
    jac[1:2 * n:2, 3] = x / w
    jac[1:2 * n:2, 4] = y / w
    jac[1:2 * n:2, 5] = 1.0 / w
    jac[1:2 * n:2, 6] = -v * x / w
    jac[1:2 * n:2, 7] = -v * y / w

    # Backward block: g(h) = inv(h) dst, with d inv(h)/dh_k = -G E_k G.
    g = np.linalg.inv(h)
    q = np.column_stack([dst, np.ones(n)])
    z = q @ g.T                                     # (n, 3) homogeneous
    for k in range(8):
        e = np.zeros((3, 3))
        e[k // 3, k % 3] = 1.0
        m = -g @ e @ g
        dz = q @ m.T
        jac[2 * n::2, k] = (dz[:, 0] - (z[:, 0] / z[:, 2]) * dz[:, 2]) / z[:, 2]
        jac[2 * n + 1::2, k] = (dz[:, 1] - (z[:, 1] / z[:, 2]) * dz[:, 2]) / z[:, 2]
    return jac


def refine_lm(h0, src, dst, max_iters=100, tol=1e-10):
    """Levenberg-Marquardt refinement of a homography.

    Minimizes summed squared symmetric transfer error over the 8 free
    parameters with m[2,2] pinned to 1.  Returns (h, converged); on a
    stalled damping update the best homography seen so far is returned
    with converged=False instead of raising.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    h0 = canonicalize(h0)
    if abs(h0[2, 2] - 1.0) > 1e-6:
        raise NumericalFailure("cannot pin m[2,2]=1 for this homography")
    params = h0.ravel()[:8].copy()

    try:
        r = _transfer_residuals(params, src, dst)
    except ProjectiveDivergence:
        return h0, False
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    for _ in range(max_iters):
        jac = _transfer_jacobian(params, src, dst)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        accepted = False
        while lam < 1e12:
            a = jtj + lam * np.diag(np.maximum(np.diag(jtj), 1e-12))
            try:
                step = np.linalg.solve(a, -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = params + step
            try:
                r_new = _transfer_residuals(trial, src, dst)
            except (ProjectiveDivergence, np.linalg.LinAlgError):
                lam *= 10.0
                continue
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                rel = (cost - cost_new) / max(cost, 1e-300)
                params, r, cost = trial, r_new, cost_new
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                if rel < tol:
                    converged = True
                break
            lam *= 10.0
        if not accepted:
            # Damping escalated past the cap without an acceptable step.
            converged = cost == 0.0
            break
        if converged:
            break
    h = canonicalize(np.append(params, 1.0).reshape(3, 3))
    return h, converged
