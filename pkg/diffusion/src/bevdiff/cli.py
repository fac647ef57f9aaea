"""bevdiff command line.

`enhance` implements the external-enhancer file protocol: invoked with a
condition PGM and an output path, writes a P5 PGM with identical
dimensions, exits 0.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import consistency, data, edm
from .pgm import copy_grid_sidecar, read_pgm, write_pgm


def _cmd_make_toy_data(args) -> int:
    samples = data.make_toy_dataset(args.pairs, size=args.size, seed=args.seed,
                                    sample_frac=args.sample_frac)
    data.write_dataset(samples, args.out)
    print(f"wrote {len(samples)} pairs under {args.out}/cond and {args.out}/target")
    return 0


def _cmd_train(args) -> int:
    samples = data.load_pairs(args.cond, args.target)
    cfg = edm.TrainConfig(steps=args.steps, batch_size=args.batch, lr=args.lr)
    net, losses = edm.train(samples, cfg, seed=args.seed,
                            base_channels=args.base_channels)
    sm = edm.smoothed(losses)
    schedule = edm.NoiseSchedule(num_steps=args.sample_steps)
    edm.save_checkpoint(net, args.out, kind="edm", schedule=schedule)
    print(f"trained {args.steps} steps on {len(samples)} pairs; "
          f"smoothed loss {sm[49] if len(sm) > 49 else sm[-1]:.4f} -> {sm[-1]:.4f}; "
          f"checkpoint {args.out}")
    return 0


def _cmd_distill(args) -> int:
    teacher, kind, schedule = edm.load_checkpoint(args.teacher)
    if kind != "edm":
        print(f"error: {args.teacher} is a {kind} checkpoint, need an edm teacher",
              file=sys.stderr)
        return 1
    samples = data.load_pairs(args.cond, args.target)
    cfg = consistency.DistillConfig(steps=args.steps, batch_size=args.batch,
                                    lr=args.lr)
    student, losses = consistency.distill(teacher, samples, cfg, schedule,
                                          seed=args.seed)
    edm.save_checkpoint(student, args.out, kind="consistency", schedule=schedule)
    print(f"distilled {args.steps} steps; final loss "
          f"{float(np.mean(losses[-50:])):.5f}; checkpoint {args.out}")
    return 0


def _run_enhancer(checkpoint: str, cond_path: Path, out_path: Path,
                  steps: int | None, seed: int) -> int:
    net, kind, schedule = edm.load_checkpoint(checkpoint)
    cond = read_pgm(cond_path).astype(np.float32) / 255.0
    if kind == "consistency":
        img = consistency.sample_single_step(net, cond, schedule, seed=seed)
    else:
        if steps is not None:
            schedule = edm.NoiseSchedule(schedule.sigma_min, schedule.sigma_max,
                                         schedule.rho, steps)
        img = edm.sample(net, cond, schedule, seed=seed)
    write_pgm(img, out_path)
    copy_grid_sidecar(cond_path, out_path)
    return 0


def _cmd_sample(args) -> int:
    return _run_enhancer(args.checkpoint, Path(args.cond), Path(args.out),
                         args.steps, args.seed)


def _cmd_enhance(args) -> int:
    return _run_enhancer(args.checkpoint, Path(args.condition_pgm),
                         Path(args.out_pgm), args.steps, args.seed)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bevdiff",
        description="Conditional BEV diffusion enhancer (EDM teacher + "
                    "consistency-distilled single-step student)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-toy-data", help="generate a paired toy corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", type=int, default=220)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-frac", type=float, default=0.12)
    p.set_defaults(fn=_cmd_make_toy_data)

    p = sub.add_parser("train", help="train the EDM teacher")
    p.add_argument("--cond", required=True, help="directory of condition PGMs")
    p.add_argument("--target", required=True, help="directory of target PGMs")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--steps", type=int, default=1200)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--base-channels", type=int, default=16)
    p.add_argument("--sample-steps", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("distill", help="consistency-distill a trained teacher")
    p.add_argument("--teacher", required=True)
    p.add_argument("--cond", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=700)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_distill)

    p = sub.add_parser("sample", help="sample one enhanced grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cond", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("enhance",
                       help="external-enhancer protocol: <condition.pgm> <out.pgm>")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("condition_pgm")
    p.add_argument("out_pgm")
    p.set_defaults(fn=_cmd_enhance)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
