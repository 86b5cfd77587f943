"""Command-line harness: corpus generation, training, evaluation, gradient
verification, and SVG rendering.

Exit codes: 0 success, 1 validation error (bad arguments, malformed inputs),
2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import evaluate, gradcheck, pipeline, render, synth, train
from .checkpoint import CheckpointError
from .dsm import TpsError
from .tensor import OP_KINDS


class ValidationError(ValueError):
    pass


def _cmd_gen(args) -> None:
    cfg = synth.GenConfig.from_file(args.config) if args.config else synth.GenConfig()
    if args.n < 1:
        raise ValidationError(f"--n must be >= 1, got {args.n}")
    synth.build_dataset(cfg, args.n, args.out)
    print(f"wrote {args.n} samples to {args.out}")


def _cmd_train(args) -> None:
    data = Path(args.data)
    if not (data / "manifest.jsonl").exists():
        raise ValidationError(f"no manifest.jsonl under {data}")
    cfg = train.TrainConfig(phase=args.phase, epochs=args.epochs, seed=args.seed)
    if args.lr is not None:
        cfg.lr = args.lr
    if args.noise is not None:
        cfg.noise = args.noise
    model = train.default_model_for_dataset(data, seed=args.seed)
    if args.init:
        model.load(args.init)

    def progress(entry):
        print(f"epoch {entry['epoch']:3d}  total {entry['loss_total']:.4f}  "
              f"re {entry['loss_re']:.4f}  br {entry['loss_br']:.4f}  "
              f"rec {entry['loss_rec']:.4f}", flush=True)

    train.train(model, data, cfg, args.out, progress=progress)
    print(f"saved checkpoint to {args.out}")


def _cmd_eval(args) -> None:
    data = Path(args.data)
    if not (data / "manifest.jsonl").exists():
        raise ValidationError(f"no manifest.jsonl under {data}")
    model = train.default_model_for_dataset(data)
    model.load(args.ckpt)
    report = evaluate.evaluate(
        model, data, noise=args.noise, use_rem=not args.no_rem,
        use_dsm=not args.no_dsm, iterations=args.iters, workers=args.workers,
        limit=args.limit)
    text = report.to_json()
    if args.report:
        Path(args.report).write_text(text)
    print(text, end="")


def _cmd_gradcheck(args) -> None:
    kinds = [args.op] if args.op else None
    if args.op and args.op not in OP_KINDS:
        raise ValidationError(
            f"unknown op {args.op!r}; choose from {sorted(OP_KINDS)}")
    worst = gradcheck.gradcheck_all(kinds=kinds, verbose=True)
    if worst >= gradcheck.TOLERANCE:
        raise RuntimeError(f"gradient check failed: worst error {worst:.3e}")
    print(f"all gradients verified, worst relative error {worst:.3e}")


def _cmd_render(args) -> None:
    data = Path(args.data)
    records = {int(r["id"]): r for r in synth.load_manifest(data)}
    if args.id not in records:
        raise ValidationError(f"sample id {args.id} not in {data}")
    model = train.default_model_for_dataset(data)
    model.load(args.ckpt)
    sample = synth.load_sample(data, records[args.id])
    import numpy as np
    inputs = pipeline.prepare_inputs(
        sample, args.noise, np.random.default_rng([1234, args.id, 0x5EED]))
    res = pipeline.forward_eval(model, inputs)
    render.render(sample, res, args.out, boundary=inputs.boundary)
    print(f"wrote {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iast",
                                description="arbitrary-shape text spotting core")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic corpus")
    g.add_argument("--config", help="plain-text key=value generator config")
    g.add_argument("--out", required=True, help="output dataset directory")
    g.add_argument("--n", type=int, required=True, help="number of samples")
    g.set_defaults(func=_cmd_gen)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--phase", choices=("pretrain", "finetune"), required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--epochs", type=int, required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="checkpoint output path")
    t.add_argument("--init", help="checkpoint to start from")
    t.add_argument("--lr", type=float)
    t.add_argument("--noise", type=float)
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--no-rem", action="store_true",
                   help="replace learned reading order with the upright prior")
    e.add_argument("--no-dsm", action="store_true",
                   help="disable dynamic grid offsets")
    e.add_argument("--iters", type=int, default=3,
                   help="boundary refinement iterations")
    e.add_argument("--report", help="write the report JSON here")
    e.add_argument("--noise", type=float, default=0.1)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--limit", type=int)
    e.set_defaults(func=_cmd_eval)

    c = sub.add_parser("gradcheck", help="verify analytic gradients")
    c.add_argument("--op", help="check a single op kind")
    c.set_defaults(func=_cmd_gradcheck)

    r = sub.add_parser("render", help="render one sample as SVG")
    r.add_argument("--ckpt", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--id", type=int, required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--noise", type=float, default=0.1)
    r.set_defaults(func=_cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        args.func(args)
    except (RuntimeError, TpsError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, ValueError, KeyError, FileNotFoundError,
            CheckpointError, synth.DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
