"""Build the committed inference-parity fixture bundle.

Trains each tiny model for a handful of steps (enough to move batchnorm
running statistics and the zero-initialized output head away from their
init), exports HWTS weights, and emits seeded forward fixtures.
Run from the repository root:

    python3 trainer/scripts/make_golden.py
"""

from pathlib import Path

import torch

from homtrainer import fixtures
from homtrainer.train import TrainConfig, train, train_hh_stack

ROOT = Path(__file__).resolve().parents[2]
IMAGES = ROOT / "src" / "homkit" / "assets" / "images"
OUT = ROOT / "tests" / "fixtures" / "golden"

SCALE = 0.0625
WARMUP = TrainConfig(epochs=1, lr=0.001, batch_size=16,
                           pairs_per_epoch=64, val_pairs=8,
                           width_scale=SCALE, seed=100)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    cases = []

    torch.manual_seed(100)
    dh_gray = train(WARMUP, IMAGES, OUT / "dh_gray.hwts")
    cases.append(fixtures.emit_case(dh_gray, "dh_gray", "dh_gray.hwts",
                                    OUT, n=40, seed0=1000))

    torch.manual_seed(200)
    cfg_color = TrainConfig(epochs=1, lr=0.001, batch_size=16,
                                  pairs_per_epoch=64, val_pairs=8,
                                  width_scale=SCALE, color=True, seed=200)
    dh_color = train(cfg_color, IMAGES, OUT / "dh_color.hwts")
    cases.append(fixtures.emit_case(dh_color, "dh_color", "dh_color.hwts",
                                    OUT, n=31, seed0=2000,
                                    in_channels_per_patch=3))

    torch.manual_seed(300)
    cfg_hh = TrainConfig(model="hh", epochs=1, lr=0.001, batch_size=16,
                               pairs_per_epoch=64, val_pairs=8,
                               width_scale=SCALE, seed=300)
    modules, _ = train_hh_stack(cfg_hh, IMAGES, OUT / "hh_stack.hwts",
                                      module_count=2, stack_pairs=48)
    cases.append(fixtures.emit_case(modules, "hh_stack", "hh_stack.hwts",
                                    OUT, n=30, seed0=3000))

    fixtures.write_bundle(cases, OUT)
    total = sum(len(c["fixtures"]) for c in cases)
    print(f"wrote {len(cases)} cases, {total} fixtures, to {OUT}")


if __name__ == "__main__":
    main()
