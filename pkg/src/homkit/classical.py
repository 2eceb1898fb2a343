"""Feature-matching homography baseline.

Detection is a FAST-9 segment test ranked and non-max-suppressed by the
Harris corner measure, with orientation from the intensity centroid of a
radius-15 disc.  Description is 256 fixed pseudo-random point-pair
brightness comparisons (a constant-seed pattern rotated per keypoint) on a
5x5 box-blurred image, packed to 32 bytes and matched by Hamming distance
with a ratio test and mutual cross-check.  Estimation is RANSAC over
4-point DLT samples, scored by symmetric transfer error, with a final DLT
on all inliers refined by Levenberg-Marquardt.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import geometry
from .errors import (
    DegenerateConfiguration,
    EstimationFailed,
    InsufficientCorrespondences,
    MarginViolation,
    NoModelFound,
    NumericalFailure,
    ProjectiveDivergence,
)

MARGIN = 16                       # min distance of a keypoint to any border
_FAST_ARC = 9
_FAST_THRESHOLD = 12.0 / 127.5    # segment-test contrast in [-1, 1] units
_CENTROID_RADIUS = 15
_PATTERN_RADIUS = 13
_PATTERN_SEED = 20190412
_DESC_BITS = 256

# Bresenham circle of radius 3 (dx, dy), clockwise from 12 o'clock.
_CIRCLE = np.array([
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
])

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    response: float
    orientation: float


@dataclass(frozen=True)
class MatchPair:
    query_idx: int
    train_idx: int
    distance: int


@dataclass(frozen=True)
class RansacConfig:
    inlier_threshold: float = 3.0
    max_iters: int = 2000
    confidence: float = 0.995
    seed: int = 0

    def __post_init__(self):
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be > 0")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must be in (0, 1)")


def _to_gray(img):
    img = np.asarray(img, dtype=np.float32)
    if img.ndim == 3:
        if img.shape[0] == 3:
            img = (0.299 * img[0] + 0.587 * img[1] + 0.114 * img[2]).astype(np.float32)
        else:
            img = img[0]
    return img


def _disc_offsets(radius):
    ys, xs = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    mask = xs * xs + ys * ys <= radius * radius
    return xs[mask], ys[mask]

_DISC_X, _DISC_Y = _disc_offsets(_CENTROID_RADIUS)


def _build_pattern():
    """Point-pair sampling pattern: Gaussian offsets inside a fixed disc."""
    rng = np.random.default_rng(_PATTERN_SEED)
    pts = rng.normal(0.0, _PATTERN_RADIUS / 2.0, size=(_DESC_BITS, 2, 2))
    norm = np.linalg.norm(pts, axis=2, keepdims=True)
    over = norm > _PATTERN_RADIUS
    pts = np.where(over, pts * (_PATTERN_RADIUS / np.maximum(norm, 1e-9)), pts)
    return pts

_PATTERN = _build_pattern()


def _harris_response(gray):
    ix = ndimage.sobel(gray, axis=1, mode="nearest")
    iy = ndimage.sobel(gray, axis=0, mode="nearest")
    ixx = ndimage.uniform_filter(ix * ix, size=7, mode="nearest")
    iyy = ndimage.uniform_filter(iy * iy, size=7, mode="nearest")
    ixy = ndimage.uniform_filter(ix * iy, size=7, mode="nearest")
    det = ixx * iyy - ixy * ixy
    trace = ixx + iyy
    return det - 0.04 * trace * trace


def _fast_mask(gray, threshold):
    """Boolean mask of FAST-9 segment-test candidates (borders False)."""
    h, w = gray.shape
    mask = np.zeros((h, w), dtype=bool)
    if h <= 6 or w <= 6:
        return mask
    center = gray[3:h - 3, 3:w - 3]
    ring = np.empty((16,) + center.shape, dtype=np.float32)
    for i, (dx, dy) in enumerate(_CIRCLE):
        ring[i] = gray[3 + dy:h - 3 + dy, 3 + dx:w - 3 + dx]
    bright = ring > center + threshold
    dark = ring < center - threshold
    found = np.zeros(center.shape, dtype=bool)
    for flags in (bright, dark):
        ext = np.concatenate([flags, flags[:_FAST_ARC - 1]], axis=0)
        run = np.zeros(center.shape, dtype=bool)
        for s in range(16):
            run |= ext[s:s + _FAST_ARC].all(axis=0)
        found |= run
    mask[3:h - 3, 3:w - 3] = found
    return mask


def _orientations(gray, xs, ys):
    patches = gray[ys[:, None] + _DISC_Y[None, :], xs[:, None] + _DISC_X[None, :]]
    m10 = (patches * _DISC_X[None, :]).sum(axis=1)
    m01 = (patches * _DISC_Y[None, :]).sum(axis=1)
    return np.arctan2(m01, m10)


def detect_corners(img, max_kp=1000, threshold=_FAST_THRESHOLD):
    """FAST-9 corners, Harris-ranked and non-max suppressed."""
    gray = _to_gray(img)
    h, w = gray.shape
    if h < 32 or w < 32:
        return []
    mask = _fast_mask(gray, threshold)
    # Enforce descriptor margin before ranking.
    mask[:MARGIN] = mask[-MARGIN:] = False
    mask[:, :MARGIN] = False
    mask[:, -MARGIN:] = False
    if not mask.any():
        return []

    harris = _harris_response(gray)
    score = np.where(mask, harris, -np.inf)
    # 3x3 non-max suppression among candidates.
    local_max = score >= ndimage.maximum_filter(score, size=3, mode="constant",
                                                cval=-np.inf)
    keep = mask & local_max
    ys, xs = np.nonzero(keep)
    if len(xs) == 0:
        return []
    responses = harris[ys, xs]
    order = np.argsort(-responses, kind="stable")[:max_kp]
    xs, ys, responses = xs[order], ys[order], responses[order]
    angles = _orientations(gray, xs, ys)

    # Sub-pixel localization: 1D quadratic fits on the Harris surface.
    gx = 0.5 * (harris[ys, xs + 1] - harris[ys, xs - 1])
    gxx = harris[ys, xs + 1] - 2 * harris[ys, xs] + harris[ys, xs - 1]
    gy = 0.5 * (harris[ys + 1, xs] - harris[ys - 1, xs])
    gyy = harris[ys + 1, xs] - 2 * harris[ys, xs] + harris[ys - 1, xs]
    with np.errstate(divide="ignore", invalid="ignore"):
        ox = np.where(gxx < 0, -gx / gxx, 0.0)
        oy = np.where(gyy < 0, -gy / gyy, 0.0)
    ox = np.clip(np.nan_to_num(ox), -0.5, 0.5)
    oy = np.clip(np.nan_to_num(oy), -0.5, 0.5)
    return [Keypoint(float(x + dx), float(y + dy), float(r), float(a))
            for x, y, dx, dy, r, a in zip(xs, ys, ox, oy, responses, angles)]


def describe(img, keypoints):
    """256-bit oriented binary descriptors, one 32-byte row per keypoint."""
    gray = _to_gray(img)
    h, w = gray.shape
    blurred = ndimage.uniform_filter(gray, size=5, mode="nearest")
    out = np.zeros((len(keypoints), _DESC_BITS // 8), dtype=np.uint8)
    for i, kp in enumerate(keypoints):
        x, y = int(round(kp.x)), int(round(kp.y))
        if not (MARGIN - 1 <= x <= w - MARGIN and MARGIN - 1 <= y <= h - MARGIN):
            raise MarginViolation(f"keypoint ({kp.x}, {kp.y}) too close to border")
        # Sub-pixel refinement may round one past the band; pull it back in.
        x = min(max(x, MARGIN), w - MARGIN - 1)
        y = min(max(y, MARGIN), h - MARGIN - 1)
        c, s = np.cos(kp.orientation), np.sin(kp.orientation)
        rot = np.array([[c, -s], [s, c]])
        pts = np.rint(_PATTERN @ rot.T).astype(np.intp)   # (256, 2, 2) offsets
        px = np.clip(x + pts[..., 0], 0, w - 1)
        py = np.clip(y + pts[..., 1], 0, h - 1)
        vals = blurred[py, px]
        bits = vals[:, 0] < vals[:, 1]
        out[i] = np.packbits(bits)
    return out


def hamming_matrix(a, b):
    """Pairwise Hamming distances of packed descriptor arrays."""
    x = a[:, None, :] ^ b[None, :, :]
    return _POPCOUNT[x].sum(axis=2, dtype=np.int32)


def match(a, b, ratio=0.8, cross_check=True):
    """Ratio-test nearest-neighbor matching with mutual cross-check."""
    if len(a) == 0 or len(b) == 0:
        return []
    d = hamming_matrix(np.asarray(a), np.asarray(b))
    nearest = d.argmin(axis=1)
    best = d[np.arange(len(a)), nearest]
    if d.shape[1] >= 2:
        part = np.partition(d, 1, axis=1)
        second = part[:, 1]
    else:
        second = np.full(len(a), _DESC_BITS + 1)
    keep = best < ratio * second
    if cross_check:
        reverse = d.argmin(axis=0)
        keep &= reverse[nearest] == np.arange(len(a))
    return [MatchPair(int(i), int(nearest[i]), int(best[i]))
            for i in np.nonzero(keep)[0]]


def _symmetric_errors(h, src, dst):
    """Per-correspondence RMS of forward and backward transfer distances."""
    try:
        hi = geometry.invert(h)
        fwd = geometry.apply_homography(h, src) - dst
        bwd = geometry.apply_homography(hi, dst) - src
    except (ProjectiveDivergence, NumericalFailure):
        return np.full(len(src), np.inf)
    fe = (fwd * fwd).sum(axis=1)
    be = (bwd * bwd).sum(axis=1)
    return np.sqrt(0.5 * (fe + be))


def estimate_homography_ransac(src, dst, cfg=RansacConfig()):
    """RANSAC + DLT + LM homography estimate; returns (h, inlier_mask)."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    n = len(src)
    if n < 4:
        raise InsufficientCorrespondences(f"got {n} correspondences, need >= 4")
    rng = np.random.default_rng(cfg.seed)
    thr = cfg.inlier_threshold

    best_mask = None
    best_count = 0
    max_iters = cfg.max_iters
    it = 0
    while it < max_iters:
        it += 1
        idx = rng.choice(n, size=4, replace=False)
        try:
            h = geometry.dlt_homography(src[idx], dst[idx])
        except (DegenerateConfiguration, NumericalFailure):
            continue
        errors = _symmetric_errors(h, src, dst)
        mask = errors < thr
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            w = count / n
            if w > 0:
                denom = np.log(max(1.0 - w ** 4, 1e-16))
                needed = int(np.ceil(np.log(1.0 - cfg.confidence) / denom))
                max_iters = min(cfg.max_iters, max(needed, 1))
    if best_mask is None or best_count < 4:
        raise NoModelFound("no RANSAC sample produced a 4-inlier consensus")

    try:
        h = geometry.dlt_homography(src[best_mask], dst[best_mask])
        h, _ = geometry.refine_lm(h, src[best_mask], dst[best_mask])
    except (DegenerateConfiguration, NumericalFailure):
        raise NoModelFound("consensus refit failed")
    final_mask = _symmetric_errors(h, src, dst) < thr
    if final_mask.sum() < 4:
        raise NoModelFound("refined model lost its consensus set")
    return h, final_mask


def _guided_refit(h, kp_a, kp_b, tol=2.0):
    """Recover correspondences geometrically under a model and refit.

    Every detection in A is projected through h; the nearest detection in B
    within tol pixels (one-to-one, greedy by distance) becomes a
    correspondence.  The enlarged set is refit by DLT + LM, which damps the
    corner extrapolation error of a sparse descriptor-matched set.
    """
    pa = np.array([[k.x, k.y] for k in kp_a])
    pb = np.array([[k.x, k.y] for k in kp_b])
    proj = geometry.apply_homography(h, pa)
    d = np.linalg.norm(proj[:, None, :] - pb[None, :, :], axis=2)
    order = np.argsort(d, axis=None)
    used_a, used_b = set(), set()
    src, dst = [], []
    for flat in order:
        i, j = divmod(int(flat), len(kp_b))
        if d[i, j] > tol:
            break
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        src.append(pa[i])
        dst.append(pb[j])
    if len(src) < 4:
        return h
    try:
        refit = geometry.dlt_homography(np.array(src), np.array(dst))
        refit, _ = geometry.refine_lm(refit, np.array(src), np.array(dst))
        return refit
    except (DegenerateConfiguration, NumericalFailure):
        return h


def classical_estimate(original, warped, ransac_cfg=RansacConfig(),
                       max_kp=1000, ratio=0.8):
    """Full pipeline over a patch pair; returns the (8,) four-point delta.

    The delta is expressed at the patches' own corner coordinates.  All
    failure modes raise EstimationFailed.
    """
    try:
        kp_a = detect_corners(original, max_kp=max_kp)
        kp_b = detect_corners(warped, max_kp=max_kp)
        if len(kp_a) < 4 or len(kp_b) < 4:
            raise EstimationFailed("too few keypoints")
        desc_a = describe(original, kp_a)
        desc_b = describe(warped, kp_b)
        pairs = match(desc_a, desc_b, ratio=ratio)
        if len(pairs) < 4:
            raise EstimationFailed("too few matches")
        src = np.array([[kp_a[m.query_idx].x, kp_a[m.query_idx].y] for m in pairs])
        dst = np.array([[kp_b[m.train_idx].x, kp_b[m.train_idx].y] for m in pairs])
        h, _ = estimate_homography_ransac(src, dst, ransac_cfg)
        h = _guided_refit(h, kp_a, kp_b)
        size = np.asarray(original).shape[-1]
        corners = geometry.patch_corners(0, 0, size)
        # h maps original-patch pixels to warped-patch pixels, which is the
        # inverse of the corner-perturbation homography the delta encodes
        # (the warped patch shows the image resampled at the perturbed
        # coordinates), so invert before reading off corner displacements.
        return geometry.hmat_to_h4pt(geometry.invert(h), corners)
    except EstimationFailed:
        raise
    except (InsufficientCorrespondences, NoModelFound, MarginViolation,
            DegenerateConfiguration, NumericalFailure, ProjectiveDivergence) as exc:
        raise EstimationFailed(str(exc)) from exc
