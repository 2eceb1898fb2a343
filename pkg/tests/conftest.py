import importlib.resources as resources
from pathlib import Path

import numpy as np
import pytest

from homkit import models
from homkit.nn import WeightStore

ASSET_DIR = Path(str(resources.files("homkit"))) / "assets" / "images"

TINY_DH = models.DhConfig(conv_widths=(16, 16, 16, 16, 32, 32, 32, 32),
                          fc_hidden=64)
TINY_HH = models.HhModuleConfig(branch_widths=(8, 8, 8, 8),
                                merged_widths=(16, 16, 16, 16), fc_hidden=64)


def _maybe(rng, shape, scale, zero):
    if zero:
        return np.zeros(shape, dtype=np.float32)
    return rng.normal(0.0, scale, shape).astype(np.float32)


def _add_conv_block(store, prefix, out_c, in_c, rng, zero):
    store.add(f"{prefix}.weight", _maybe(rng, (out_c, in_c, 3, 3), 0.1, zero))
    store.add(f"{prefix}.bias", _maybe(rng, (out_c,), 0.05, zero))
    store.add(f"{prefix}.bn.gamma", np.ones(out_c, dtype=np.float32))
    store.add(f"{prefix}.bn.beta", _maybe(rng, (out_c,), 0.05, zero))
    store.add(f"{prefix}.bn.mean", _maybe(rng, (out_c,), 0.05, zero))
    store.add(f"{prefix}.bn.var", np.ones(out_c, dtype=np.float32))


def make_dh_store(cfg=TINY_DH, seed=0, zero=False):
    rng = np.random.default_rng(seed)
    store = WeightStore()
    in_c = cfg.in_channels
    for i, width in enumerate(cfg.conv_widths, 1):
        _add_conv_block(store, f"conv{i}", width, in_c, rng, zero)
        in_c = width
    flat = cfg.conv_widths[-1] * 16 * 16
    store.add("fc1.weight", _maybe(rng, (cfg.fc_hidden, flat), 0.01, zero))
    store.add("fc1.bias", _maybe(rng, (cfg.fc_hidden,), 0.01, zero))
    store.add("fc2.weight", _maybe(rng, (8, cfg.fc_hidden), 0.01, zero))
    store.add("fc2.bias", _maybe(rng, (8,), 0.01, zero))
    return store


def add_hh_module(store, cfg=TINY_HH, prefix="", seed=0, zero=False):
    rng = np.random.default_rng(seed)
    in_c = 1
    for i, width in enumerate(cfg.branch_widths, 1):
        _add_conv_block(store, f"{prefix}branch{i}", width, in_c, rng, zero)
        in_c = width
    in_c = 2 * cfg.branch_widths[-1]
    for i, width in enumerate(cfg.merged_widths, 1):
        _add_conv_block(store, f"{prefix}merged{i}", width, in_c, rng, zero)
        in_c = width
    flat = cfg.merged_widths[-1] * 16 * 16
    store.add(f"{prefix}fc1.weight", _maybe(rng, (cfg.fc_hidden, flat), 0.01, zero))
    store.add(f"{prefix}fc1.bias", _maybe(rng, (cfg.fc_hidden,), 0.01, zero))
    store.add(f"{prefix}fc2.weight", _maybe(rng, (8, cfg.fc_hidden), 0.01, zero))
    store.add(f"{prefix}fc2.bias", _maybe(rng, (8,), 0.01, zero))
    return store


def make_hh_stack_store(stack, seed=0, zero=False):
    store = WeightStore()
    for i, cfg in enumerate(stack.modules):
        add_hh_module(store, cfg, prefix=f"module{i + 1}.", seed=seed + i, zero=zero)
    return store


@pytest.fixture(scope="session")
def asset_images():
    paths = sorted(ASSET_DIR.glob("*.png"))
    assert len(paths) == 50
    return paths


def random_homography(rng, scale=0.15):
    """Well-conditioned random homography around the identity."""
    h = np.eye(3)
    h[:2, :2] += rng.uniform(-scale, scale, (2, 2))
    h[:2, 2] = rng.uniform(-20, 20, 2)
    h[2, :2] = rng.uniform(-1e-3, 1e-3, 2)
    return h / h[2, 2]
