"""Full model: order-embedding table plus the four trainable heads, with
checkpoint round-tripping under stable parameter names."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import brm, dsm, recognizer, rem
from .checkpoint import load_checkpoint, save_checkpoint
from .embedding import EMBED_DIM, init_order_embedding
from .tensor import Tensor


@dataclass
class ModelConfig:
    k: int = 16            # control points; boundary carries 2 * k vertices
    grid_w: int = 64
    grid_h: int = 16
    rem_conv_channels: int = rem.CONV_CHANNELS
    rem_fusion_channels: int = rem.FUSION_CHANNELS
    rem_head_channels: tuple[int, ...] = rem.HEAD_CHANNELS
    brm_channels: int = brm.REFINE_CHANNELS

    @property
    def boundary_len(self) -> int:
        return 2 * self.k


class Model:
    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng([seed, 0xA11])
        self.order_table = init_order_embedding(rng, config.boundary_len, EMBED_DIM)
        self.rem = rem.init_rem_params(
            rng, conv_channels=config.rem_conv_channels,
            fusion_channels=config.rem_fusion_channels,
            head_channels=config.rem_head_channels)
        self.brm = brm.init_brm_params(rng, channels=config.brm_channels)
        self.dsm = dsm.init_dsm_params(rng)
        self.rec = recognizer.init_recognizer_params(rng)

    def named_params(self) -> dict[str, Tensor]:
        out = {"embed.order_table": self.order_table}
        out.update(self.rem.named())
        out.update(self.brm.named())
        out.update(self.dsm.named())
        out.update(self.rec.named())
        return out

    def zero_grads(self) -> None:
        for p in self.named_params().values():
            p.zero_grad()

    def save(self, path) -> None:
        save_checkpoint({k: v.data for k, v in self.named_params().items()}, path)

    def load(self, path) -> None:
        stored = load_checkpoint(path)
        params = self.named_params()
        missing = sorted(set(params) - set(stored))
        if missing:
            raise KeyError(f"checkpoint {path} is missing parameters: {missing}")
        for name, tensor in params.items():
            arr = stored[name]
            if arr.shape != tensor.data.shape:
                raise KeyError(f"checkpoint {path}: parameter {name!r} has shape "
                               f"{arr.shape}, expected {tensor.data.shape}")
            tensor.data = arr
