"""Training loop: joint objective with per-phase loss weight schedules,
momentum SGD, teacher forcing with scheduled sampling, and a per-epoch
loss log."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pipeline, synth
from . import tensor as T
from .model import Model, ModelConfig
from .tensor import Tensor


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    phase: str = "finetune"          # "pretrain" | "finetune"
    epochs: int = 12
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 4
    seed: int = 0
    noise: float = 0.1
    lambda_rec: float = 0.2
    brm_iters: int = 5
    teacher_forcing_frac: float = 0.75  # switch to predicted corners afterwards
    plateau_patience: int = 10
    alpha: float = 0.1

    def __post_init__(self):
        if self.phase not in ("pretrain", "finetune"):
            raise ValueError(f"unknown phase {self.phase!r}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")

    def lambdas(self, epoch: int) -> tuple[float, float, float]:
        """(lambda_re, lambda_br, lambda_rec) for a 1-indexed epoch."""
        if self.phase == "pretrain":
            ramp = math.exp((epoch - self.epochs) / self.epochs)
            return ramp, 0.1 * ramp, self.lambda_rec
        return 1.0, 0.01, self.lambda_rec


class MomentumSGD:
    def __init__(self, params: dict[str, Tensor], lr: float, momentum: float):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.velocity = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self, scale: float = 1.0) -> None:
        for name, p in self.params.items():
            if p.grad is None:
                continue
            v = self.velocity[name]
            v *= self.momentum
            v += p.grad * scale
            p.data = p.data - self.lr * v
            p.zero_grad()


def train(model: Model, data_dir: str | Path, cfg: TrainConfig,
          out_checkpoint: str | Path,
          progress=None) -> list[dict]:
    """Train in place; writes the checkpoint and a JSON loss log next to it.

    Returns the per-epoch log entries.
    """
    records = synth.load_manifest(data_dir)
    if not records:
        raise TrainingError(f"empty dataset at {data_dir}")
    params = model.named_params()
    opt = MomentumSGD(params, cfg.lr, cfg.momentum)
    log: list[dict] = []
    best_loss = math.inf
    stall = 0
    order_rng = np.random.default_rng([cfg.seed, 0x7A])

    for epoch in range(1, cfg.epochs + 1):
        lam_re, lam_br, lam_rec = cfg.lambdas(epoch)
        teacher = epoch <= max(1, int(round(cfg.teacher_forcing_frac * cfg.epochs)))
        order = order_rng.permutation(len(records))
        sums = {"re": 0.0, "br": 0.0, "rec": 0.0, "total": 0.0}
        in_batch = 0
        for j, ridx in enumerate(order):
            record = records[ridx]
            sample = synth.load_sample(data_dir, record)
            inputs = pipeline.prepare_inputs(
                sample, cfg.noise, np.random.default_rng(
                    [cfg.seed, epoch, int(record["id"]), 0x5EED]))
            res = pipeline.forward_train(model, inputs, teacher_forcing=teacher,
                                         brm_iters=cfg.brm_iters, alpha=cfg.alpha)
            total = T.add(T.add(T.scale(res.loss_re, lam_re),
                                T.scale(res.loss_br, lam_br)),
                          T.scale(res.loss_rec, lam_rec))
            if not np.isfinite(total.data):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, sample {record['id']}")
            T.backward(total)
            in_batch += 1
            if in_batch == cfg.batch_size or j == len(order) - 1:
                opt.step(scale=1.0 / in_batch)
                in_batch = 0
            sums["re"] += float(res.loss_re.data)
            sums["br"] += float(res.loss_br.data)
            sums["rec"] += float(res.loss_rec.data)
            sums["total"] += float(total.data)
        n = len(records)
        entry = {
            "epoch": epoch, "lr": opt.lr,
            "lambda_re": lam_re, "lambda_br": lam_br, "lambda_rec": lam_rec,
            "teacher_forcing": teacher,
            "loss_re": sums["re"] / n, "loss_br": sums["br"] / n,
            "loss_rec": sums["rec"] / n, "loss_total": sums["total"] / n,
        }
        log.append(entry)
        if progress is not None:
            progress(entry)
        if entry["loss_total"] < best_loss * (1.0 - 1e-6):
            best_loss = entry["loss_total"]
            stall = 0
        else:
            stall += 1
            if stall >= cfg.plateau_patience:
                opt.lr *= 0.5
                stall = 0

    model.save(out_checkpoint)
    log_path = Path(str(out_checkpoint) + ".log.json")
    log_path.write_text(json.dumps(log, indent=2, sort_keys=True) + "\n")
    return log


def default_model_for_dataset(data_dir: str | Path, seed: int = 0) -> Model:
    """Model sized from the dataset's generator config (falls back to defaults)."""
    cfg_path = Path(data_dir) / "gen_config.json"
    mc = ModelConfig()
    if cfg_path.exists():
        gen = json.loads(cfg_path.read_text())
        mc = ModelConfig(k=int(gen.get("k", mc.k)),
                         grid_w=int(gen.get("grid_w", mc.grid_w)),
                         grid_h=int(gen.get("grid_h", mc.grid_h)))
    return Model(mc, seed=seed)
