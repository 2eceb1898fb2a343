"""Inference-parity fixture bundles.

A bundle is an ``index.json`` plus, per case, an HWTS weight file and a
raw little-endian float32 blob of forward outputs (one 8-vector per
fixture).  Inputs are reconstructed from recorded seeds:
``default_rng(seed)`` drawing ``uniform(-1, 1, shape)`` twice (original
then warped); a null seed means all-zero inputs.
"""

import json
from pathlib import Path

import numpy as np
import torch

from . import geom, models


def _fixture_inputs(seed, shape):
    if seed is None:
        return (np.zeros(shape, dtype=np.float32),
                np.zeros(shape, dtype=np.float32))
    rng = np.random.default_rng(seed)
    return (rng.uniform(-1, 1, shape).astype(np.float32),
            rng.uniform(-1, 1, shape).astype(np.float32))


def _stack_forward(modules, original, warped):
    """Stack inference mirroring the engine: accumulate and re-warp."""
    corners = geom.patch_corners(0, 0, original.shape[-1])
    accumulated = np.zeros(8)
    current = warped
    with torch.no_grad():
        for i, module in enumerate(modules):
            x = torch.from_numpy(
                np.concatenate([original, current], axis=0)[None])
            delta = module(x).numpy()[0].astype(np.float64)
            accumulated += delta
            if i < len(modules) - 1:
                try:
                    h_est = geom.h4pt_to_hmat(corners, delta)
                    _, ph, pw = current.shape
                    current = np.clip(
                        geom.warp_image(current, h_est, pw, ph),
                        -1.0, 1.0).astype(np.float32)
                except ValueError:
                    pass
    return accumulated


def emit_case(model, name, weights_filename, out_dir, n=100, seed0=0,
              in_channels_per_patch=1):
    """Forward ``n`` fixtures through a model; returns the index entry.

    The first fixture is the all-zero input; the rest use seeds seed0,
    seed0+1, ...  The weight file itself is written by the caller.
    """
    out_dir = Path(out_dir)
    shape = (in_channels_per_patch, models.PATCH, models.PATCH)
    fixtures = [{"seed": None}]
    fixtures += [{"seed": seed0 + i} for i in range(n - 1)]
    outputs = []
    is_stack = isinstance(model, (list, tuple))
    if not is_stack:
        model.eval()
    else:
        for m in model:
            m.eval()
    for fix in fixtures:
        original, warped = _fixture_inputs(fix["seed"], shape)
        if is_stack:
            outputs.append(_stack_forward(model, original, warped))
        else:
            with torch.no_grad():
                x = torch.from_numpy(
                    np.concatenate([original, warped], axis=0)[None])
                outputs.append(model(x).numpy()[0].astype(np.float64))
    blob_name = f"{name}.out.f32"
    blob = np.asarray(outputs, dtype="<f4")
    (out_dir / blob_name).write_bytes(blob.tobytes())

    entry = {
        "name": name,
        "weights": weights_filename,
        "input_shape": list(shape),
        "fixtures": fixtures,
        "outputs": blob_name,
    }
    if is_stack:
        entry["model"] = "hh"
        entry["modules"] = [{"branch": list(m.branch_widths),
                             "merged": list(m.merged_widths),
                             "fc_hidden": m.fc_hidden} for m in model]
    else:
        entry["model"] = "dh"
        entry["conv_widths"] = list(model.conv_widths)
        entry["fc_hidden"] = model.fc_hidden
    return entry


def write_bundle(cases, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "index.json", "w") as f:
        json.dump({"version": 1, "cases": cases}, f, indent=2)
