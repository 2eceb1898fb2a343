"""Command-line entry points for training and fixture emission."""

import argparse
from pathlib import Path

from . import fixtures, models, train as train_mod
from .hwts import load_hwts, save_hwts


def _add_train_args(sub):
    sub.add_argument("--images", required=True, help="training image directory")
    sub.add_argument("--out", required=True, help="output HWTS path")
    sub.add_argument("--model", choices=("dh", "hh"), default="dh")
    sub.add_argument("--epochs", type=int, default=30)
    sub.add_argument("--lr", type=float, default=0.005)
    sub.add_argument("--lr-halving-period", type=int, default=5)
    sub.add_argument("--batch-size", type=int, default=64)
    sub.add_argument("--pairs-per-epoch", type=int, default=5000)
    sub.add_argument("--noise-eta", type=float, default=0.0)
    sub.add_argument("--color", action="store_true")
    sub.add_argument("--width-scale", type=float, default=1.0)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--log", default=None, help="CSV training log path")


def _cfg_from_args(args):
    return train_mod.TrainConfig(
        model=args.model, epochs=args.epochs, lr=args.lr,
        lr_halving_period=args.lr_halving_period, batch_size=args.batch_size,
        pairs_per_epoch=args.pairs_per_epoch, noise_eta=args.noise_eta,
        color=args.color, width_scale=args.width_scale, seed=args.seed)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="homtrainer")
    subs = parser.add_subparsers(dest="command", required=True)

    p_train = subs.add_parser("train", help="train a model, export HWTS")
    _add_train_args(p_train)

    p_cur = subs.add_parser("curriculum",
                            help="fine-tune base weights at rising noise")
    _add_train_args(p_cur)
    p_cur.add_argument("--base", required=True, help="base HWTS weights")
    p_cur.add_argument("--stages", default="0.1,0.3,0.5")

    p_fix = subs.add_parser("emit-fixtures",
                            help="emit a parity fixture bundle")
    p_fix.add_argument("--weights", required=True)
    p_fix.add_argument("--out", required=True, help="bundle directory")
    p_fix.add_argument("--model", choices=("dh", "hh"), default="dh")
    p_fix.add_argument("--width-scale", type=float, default=1.0)
    p_fix.add_argument("--color", action="store_true")
    p_fix.add_argument("--modules", type=int, default=1)
    p_fix.add_argument("-n", type=int, default=100)

    args = parser.parse_args(argv)
    if args.command == "train":
        cfg = _cfg_from_args(args)
        train_mod.train(cfg, args.images, args.out, log_path=args.log)
    elif args.command == "curriculum":
        cfg = _cfg_from_args(args)
        base = models.load_dh_from_tensors(load_hwts(args.base),
                                           width_scale=args.width_scale,
                                           color=args.color)
        stages = tuple(float(s) for s in args.stages.split(","))
        train_mod.train_noise_curriculum(base, cfg, args.images,
                                         Path(args.out).parent, stages=stages)
    else:
        tensors = load_hwts(args.weights)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        weights_name = Path(args.weights).name
        if args.model == "dh":
            model = models.load_dh_from_tensors(tensors,
                                                width_scale=args.width_scale,
                                                color=args.color)
            channels = 3 if args.color else 1
        else:
            model = models.load_hh_stack_from_tensors(
                tensors, args.modules, width_scale=args.width_scale)
            channels = 1
        case = fixtures.emit_case(model, Path(args.weights).stem,
                                  weights_name, out_dir, n=args.n,
                                  in_channels_per_patch=channels)
        fixtures.write_bundle([case], out_dir)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
