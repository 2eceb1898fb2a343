"""Corner-displacement regression networks run over the numpy kernels.

Two estimators are provided:

* ``dh_forward``: the single-trunk network.  The two patches are stacked
  along the channel axis and pushed through eight 3x3 conv layers (each
  conv -> batchnorm -> ReLU), with 2x2 max pooling *before* layers 3, 5
  and 7, then flatten -> hidden FC (ReLU) -> 8 outputs.
* ``hh_module_forward`` / ``hh_stack_infer``: the Siamese variant.  Each
  patch goes through the same four shared-weight conv layers, the feature
  maps are concatenated along channels, four more conv layers follow, with
  pooling *after* layers 2, 5 and 7, then the same FC head.  Modules are
  stacked: each module's estimate is accumulated and (for all but the
  last) used to re-warp the warped patch so the next module sees only the
  residual motion.

Dropout is the identity at inference.  Weight tensor names form a fixed
manifest validated against the store on first use.
"""

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import (
    DegenerateConfiguration,
    DegenerateQuad,
    NumericalFailure,
    ShapeMismatch,
    WeightManifestMismatch,
)
from .nn import batchnorm_inference, conv2d, linear, maxpool2, relu

PATCH = 128

_BN_SUFFIXES = ("weight", "bias", "bn.gamma", "bn.beta", "bn.mean", "bn.var")


@dataclass(frozen=True)
class DhConfig:
    in_channels: int = 2
    conv_widths: tuple = (64, 64, 64, 64, 128, 128, 128, 128)
    fc_hidden: int = 1024

    def __post_init__(self):
        if self.in_channels not in (2, 6):
            raise ValueError("in_channels must be 2 (grayscale) or 6 (color)")
        if len(self.conv_widths) != 8 or any(w <= 0 for w in self.conv_widths):
            raise ValueError("conv_widths must be 8 positive values")


@dataclass(frozen=True)
class HhModuleConfig:
    branch_widths: tuple = (64, 64, 64, 64)
    merged_widths: tuple = (128, 128, 128, 128)
    fc_hidden: int = 1024

    def __post_init__(self):
        if len(self.branch_widths) != 4 or len(self.merged_widths) != 4:
            raise ValueError("branch/merged widths must have 4 entries each")


@dataclass(frozen=True)
class HierarchicalStack:
    modules: tuple = field(default_factory=lambda: (HhModuleConfig(),) * 3)

    def __post_init__(self):
        if len(self.modules) < 1:
            raise ValueError("stack needs at least one module")


def _conv_block_names(prefix):
    return [f"{prefix}.{s}" for s in _BN_SUFFIXES]


def dh_manifest(cfg):
    """Canonical tensor names for a DH weight store, in definition order."""
    names = []
    for i in range(1, 9):
        names.extend(_conv_block_names(f"conv{i}"))
    names += ["fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"]
    return names


def hh_module_manifest(cfg, prefix=""):
    names = []
    for i in range(1, 5):
        names.extend(_conv_block_names(f"{prefix}branch{i}"))
    for i in range(1, 5):
        names.extend(_conv_block_names(f"{prefix}merged{i}"))
    names += [f"{prefix}fc1.weight", f"{prefix}fc1.bias",
              f"{prefix}fc2.weight", f"{prefix}fc2.bias"]
    return names


def hh_stack_manifest(stack):
    names = []
    for i, cfg in enumerate(stack.modules):
        names.extend(hh_module_manifest(cfg, prefix=f"module{i + 1}."))
    return names


def validate_manifest(store, expected):
    missing = [n for n in expected if n not in store]
    extra = [n for n in store.names() if n not in set(expected)]
    if missing or extra:
        raise WeightManifestMismatch(
            f"weight manifest mismatch: missing={missing[:4]} extra={extra[:4]}")


def _check_patch(img, channels, what):
    img = np.asarray(img, dtype=np.float32)
    if img.ndim == 2:
        img = img[None]
    if img.shape != (channels, PATCH, PATCH):
        raise ShapeMismatch(
            f"{what} must be ({channels}, {PATCH}, {PATCH}), got {img.shape}")
    return img


def _conv_bn_relu(x, store, prefix):
    x = conv2d(x, store[f"{prefix}.weight"], store[f"{prefix}.bias"])
    x = batchnorm_inference(x, store[f"{prefix}.bn.gamma"], store[f"{prefix}.bn.beta"],
                            store[f"{prefix}.bn.mean"], store[f"{prefix}.bn.var"])
    return relu(x)


def _fc_head(x, store, prefix=""):
    x = relu(linear(x, store[f"{prefix}fc1.weight"], store[f"{prefix}fc1.bias"]))
    out = linear(x, store[f"{prefix}fc2.weight"], store[f"{prefix}fc2.bias"])
    return out[0].astype(np.float64)


def dh_forward(store, cfg, original, warped):
    """Run the single-trunk network; returns the (8,) delta in pixels."""
    validate_manifest(store, dh_manifest(cfg))
    per = cfg.in_channels // 2
    original = _check_patch(original, per, "original")
    warped = _check_patch(warped, per, "warped")
    x = np.concatenate([original, warped], axis=0)[None]
    for i in range(1, 9):
        if i in (3, 5, 7):
            x = maxpool2(x)
        x = _conv_bn_relu(x, store, f"conv{i}")
    x = x.reshape(1, -1)
    return _fc_head(x, store)


def hh_module_forward(store, cfg, original, warped, prefix=""):
    """Run one Siamese module; returns the (8,) delta in pixels."""
    if not prefix:
        validate_manifest(store, hh_module_manifest(cfg))
    original = _check_patch(original, 1, "original")
    warped = _check_patch(warped, 1, "warped")

    branches = []
    for patch in (original, warped):
        x = patch[None]
        for i in range(1, 5):
            x = _conv_bn_relu(x, store, f"{prefix}branch{i}")
            if i == 2:
                x = maxpool2(x)
        branches.append(x)
    x = np.concatenate(branches, axis=1)
    for i in range(1, 5):
        x = _conv_bn_relu(x, store, f"{prefix}merged{i}")
        if i in (1, 3):           # global layers 5 and 7
            x = maxpool2(x)
    x = x.reshape(1, -1)
    return _fc_head(x, store, prefix)


def residual_target(prev_target, prev_estimate):
    """Remaining delta after subtracting an estimate from its target."""
    return np.asarray(prev_target, dtype=float) - np.asarray(prev_estimate, dtype=float)


def hh_stack_infer(store, stack, original, warped, corners):
    """Run the hierarchical stack; returns (accumulated delta, warp_flags).

    warp_flags[i] is True when module i's estimate produced a degenerate
    quad and the inter-module re-warp was skipped (the delta still counts
    toward the accumulated estimate).
    """
    validate_manifest(store, hh_stack_manifest(stack))
    corners = np.asarray(corners, dtype=float)
    accumulated = np.zeros(8)
    current_warped = np.asarray(warped, dtype=np.float32)
    flags = []
    n = len(stack.modules)
    for i, cfg in enumerate(stack.modules):
        delta = hh_module_forward(store, cfg, original, current_warped,
                                  prefix=f"module{i + 1}.")
        accumulated += delta
        skipped = False
        if i < n - 1:
            try:
                h_est = geometry.h4pt_to_hmat(corners, delta)
                # Resample so the estimated motion is undone: the new warped
                # patch shows current_warped at the pre-motion coordinates.
                _, ph, pw = current_warped.shape
                current_warped = np.clip(
                    geometry.warp_image(current_warped, h_est, pw, ph),
                    -1.0, 1.0).astype(np.float32)
            except (DegenerateQuad, DegenerateConfiguration, NumericalFailure):
                skipped = True
        flags.append(skipped)
    return accumulated, flags
