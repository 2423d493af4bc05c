"""Selection network: temporal difference images -> per-row softmax channel weights."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .transformer import TransformerConfig, _init_weights, halving_conv

# running = BN_MOMENTUM * running + (1 - BN_MOMENTUM) * batch
BN_MOMENTUM = 0.9


@dataclass(frozen=True)
class SelectorConfig:
    N: int = 50
    rows: int = 6
    delta: int = 4
    channels: int = 3
    height: int = 256
    width: int = 256
    ndf: int = 16
    filter_size: int = 5
    reduce_blocks: int | None = None
    max_mult: int = 8

    @classmethod
    def for_transformer(cls, tcfg: TransformerConfig, ndf=16, filter_size=5, reduce_blocks=None):
        cfg = cls(N=tcfg.N, rows=tcfg.rows, delta=tcfg.delta, channels=tcfg.channels,
                  height=tcfg.height, width=tcfg.width, ndf=ndf, filter_size=filter_size,
                  reduce_blocks=reduce_blocks)
        if reduce_blocks is None:
            cfg = replace(cfg, reduce_blocks=default_reduce_blocks(cfg, tcfg))
        return cfg

    def block_channels(self):
        return [self.ndf * min(2 ** i, self.max_mult) for i in range(self.rows)]

    def bottom_size(self):
        h, w = self.height, self.width
        for _ in range(self.rows):
            h, w = -(-h // 2), -(-w // 2)
        return h, w

    def dense_inputs(self, reduce_blocks=None):
        r = self.reduce_blocks if reduce_blocks is None else reduce_blocks
        h, w = self.bottom_size()
        ch = self.block_channels()[-1] // 2 ** r
        return ch * h * w

    def validate(self):
        if self.delta < 2:
            raise ValueError(f"selector needs delta >= 2 to form difference images, got {self.delta}")
        if self.ndf < 1 or self.rows < 1 or self.N < 1:
            raise ValueError("ndf, rows and N must be >= 1")
        if self.filter_size < 1 or self.filter_size % 2 == 0:
            raise ValueError(f"filter_size must be odd, got {self.filter_size}")
        r = self.reduce_blocks
        if r is None or r < 0 or self.block_channels()[-1] // 2 ** r < 1:
            raise ValueError(f"invalid reduce_blocks={r}")
        return self


def selector_parameter_count(cfg: SelectorConfig, reduce_blocks: int):
    k2 = cfg.filter_size ** 2
    chans = cfg.block_channels()
    total = 0
    c_in = (cfg.delta - 1) * cfg.channels
    for i, c in enumerate(chans):
        total += c_in * c * k2 + c + (2 * c if i else 0)
        c_in = c
    for _ in range(reduce_blocks):
        total += c_in * (c_in // 2) * k2 + 3 * (c_in // 2)
        c_in //= 2
    return total + cfg.dense_inputs(reduce_blocks) * cfg.rows * cfg.N + cfg.rows * cfg.N


def transformer_parameter_count(tcfg: TransformerConfig):
    N, C, k2 = tcfg.N, tcfg.channels, tcfg.filter_size ** 2
    half = tcfg.rows
    total = C * tcfg.delta * N * k2 + N
    total += (half - 1) * (N * N * k2 + 3 * N)
    total += (half - 1) * (2 * N * N * k2 + 3 * N)
    return total + 2 * N * C * k2 + C


def default_reduce_blocks(cfg: SelectorConfig, tcfg: TransformerConfig, max_ratio=4.0):
    """Smallest number of channel-halving blocks keeping the selector within
    ``max_ratio`` times the transformer's parameter count.

    Falls back to the count minimizing the selector size when no count
    meets the budget.
    """
    budget = max_ratio * transformer_parameter_count(tcfg)
    max_r = int(np.log2(cfg.block_channels()[-1]))
    counts = [selector_parameter_count(cfg, r) for r in range(max_r + 1)]
    for r, n in enumerate(counts):
        if n <= budget:
            return r
    return int(np.argmin(counts))


def diff_frontend(x):
    """Absolute differences of consecutive frames, channel-stacked.

    ``(B, delta, C, H, W)`` -> ``(B, (delta - 1) * C, H, W)``.
    """
    if x.dim() != 5 or x.shape[1] < 2:
        raise ValueError(f"need a (B, delta>=2, C, H, W) window, got {tuple(x.shape)}")
    d = (x[:, 1:] - x[:, :-1]).abs()
    return d.reshape(d.shape[0], -1, *d.shape[-2:])


class SelectorNet(nn.Module):
    def __init__(self, config: SelectorConfig):
        super().__init__()
        self.config = config.validate()
        k = config.filter_size
        chans = config.block_channels()
        c_in = (config.delta - 1) * config.channels
        self.down = nn.ModuleList()
        for c in chans:
            self.down.append(nn.Conv2d(c_in, c, k, stride=2))
            c_in = c
        self.down_norm = nn.ModuleList(
            [nn.BatchNorm2d(c, momentum=1 - BN_MOMENTUM) for c in chans[1:]])
        self.reduce = nn.ModuleList()
        self.reduce_norm = nn.ModuleList()
        for _ in range(config.reduce_blocks):
            self.reduce.append(nn.Conv2d(c_in, c_in // 2, k, padding=k // 2))
            self.reduce_norm.append(nn.BatchNorm2d(c_in // 2, momentum=1 - BN_MOMENTUM))
            c_in //= 2
        self.dense = nn.Linear(config.dense_inputs(), config.rows * config.N)
        _init_weights(self)

    def logits(self, x):
        cfg = self.config
        want = (cfg.delta, cfg.channels, cfg.height, cfg.width)
        if x.dim() != 5 or tuple(x.shape[1:]) != want:
            raise ValueError(f"expected input (B, {', '.join(map(str, want))}), got {tuple(x.shape)}")
        h = halving_conv(diff_frontend(x), self.down[0])
        for conv, norm in zip(self.down[1:], self.down_norm):
            h = norm(halving_conv(F.relu(h), conv))
        for conv, norm in zip(self.reduce, self.reduce_norm):
            h = norm(conv(F.relu(h)))
        h = self.dense(F.relu(h).flatten(1))
        return h.view(-1, cfg.rows, cfg.N)

    def forward(self, x):
        """Return unscaled weights ``alpha_hat`` of shape ``(B, rows, N)``; each row sums to 1."""
        return torch.softmax(self.logits(x), dim=-1)


def active_channels(alpha_hat, threshold=0.5):
    """Per-row count of channels whose scaled weight ``N * alpha_hat`` exceeds ``threshold``."""
    a = alpha_hat.detach().cpu().numpy() if torch.is_tensor(alpha_hat) else np.asarray(alpha_hat)
    N = a.shape[-1]
    return (N * a > threshold).sum(axis=-1)
