"""Encoder-decoder transformation network with selector-modulated decoder.

The encoder is ``L/2`` stride-2 blocks (the first a bare convolution, the
rest ReLU -> Conv -> InstanceNorm). The decoder is ``L/2`` blocks of
ReLU -> ConvTranspose -> InstanceNorm, the last one ending in tanh instead of
a norm. Decoder block ``d`` consumes ``[skip ; alpha_d * prev]`` where
``alpha_d = N * alpha_hat[d]`` scales each channel of the decoder branch.
Block 0 receives the bottleneck on both branches.

Odd spatial sizes are handled by ceil-halving in the encoder (one extra
zero row/column on the bottom/right) and by trimming each decoder output to
the size of its skip partner.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

DECOMPOSE_MODES = ("full", "foreground", "background")


class BottleneckSizeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TransformerConfig:
    N: int = 50
    L: int = 12
    delta: int = 4
    channels: int = 3
    height: int = 256
    width: int = 256
    filter_size: int = 4

    @property
    def rows(self):
        return self.L // 2

    def level_sizes(self):
        """Spatial size of each encoder level, ``Y^0`` first."""
        h, w = self.height, self.width
        sizes = []
        for _ in range(self.rows):
            h, w = -(-h // 2), -(-w // 2)
            sizes.append((h, w))
        return sizes

    def validate(self):
        if self.L < 4 or self.L % 2:
            raise ValueError(f"L must be even and >= 4, got {self.L}")
        if self.N < 1 or self.delta < 1:
            raise ValueError("N and delta must be >= 1")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.filter_size < 2 or self.filter_size % 2:
            raise ValueError(f"filter_size must be even and >= 2, got {self.filter_size}")
        bh, bw = self.level_sizes()[-1]
        if min(self.height, self.width) < 2 ** self.rows:
            raise ValueError(
                f"frame {self.height}x{self.width} too small for L={self.L} "
                f"(needs at least {2 ** self.rows} px per side)")
        if not 3 <= min(bh, bw) <= 7:
            warnings.warn(f"bottleneck is {bh}x{bw}; 3 to 7 px per side is recommended",
                          BottleneckSizeWarning, stacklevel=2)
        return self


def _init_weights(module, std=0.02):
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, (nn.InstanceNorm2d, nn.BatchNorm2d)) and m.affine:
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


def halving_conv(x, conv):
    """Stride-2 convolution whose output is ``ceil(size / 2)`` on each axis."""
    k = conv.kernel_size[0]
    h, w = x.shape[-2:]
    lead = (k - 2) // 2
    pad_h = (math.ceil(h / 2) - 1) * 2 + k - h
    pad_w = (math.ceil(w / 2) - 1) * 2 + k - w
    x = F.pad(x, (lead, pad_w - lead, lead, pad_h - lead))
    return conv(x)


class TransformerNet(nn.Module):
    def __init__(self, config: TransformerConfig):
        super().__init__()
        self.config = config.validate()
        N, C, k = config.N, config.channels, config.filter_size
        half = config.rows
        self.enc = nn.ModuleList(
            [nn.Conv2d(C * config.delta, N, k, stride=2)] +
            [nn.Conv2d(N, N, k, stride=2) for _ in range(half - 1)])
        self.enc_norm = nn.ModuleList([nn.InstanceNorm2d(N, affine=True) for _ in range(half - 1)])
        pad = (k - 2) // 2
        self.dec = nn.ModuleList(
            [nn.ConvTranspose2d(2 * N, N, k, stride=2, padding=pad) for _ in range(half - 1)] +
            [nn.ConvTranspose2d(2 * N, C, k, stride=2, padding=pad)])
        self.dec_norm = nn.ModuleList([nn.InstanceNorm2d(N, affine=True) for _ in range(half - 1)])
        _init_weights(self)

    def _check_input(self, x):
        cfg = self.config
        want = (cfg.delta, cfg.channels, cfg.height, cfg.width)
        if x.dim() != 5 or tuple(x.shape[1:]) != want:
            raise ValueError(f"expected input (B, {', '.join(map(str, want))}), got {tuple(x.shape)}")

    def encode(self, x):
        """Return the feature pyramid ``[Y^0, ..., bottleneck]`` for a ``(B, delta, C, H, W)`` window."""
        self._check_input(x)
        h = x.reshape(x.shape[0], -1, *x.shape[-2:])
        levels = [halving_conv(h, self.enc[0])]
        for conv, norm in zip(self.enc[1:], self.enc_norm):
            levels.append(norm(halving_conv(F.relu(levels[-1]), conv)))
        return levels

    def _scaled_alpha(self, alpha_hat, batch):
        cfg = self.config
        if alpha_hat is None:
            return None
        if alpha_hat.dim() == 2:
            alpha_hat = alpha_hat.unsqueeze(0).expand(batch, -1, -1)
        if tuple(alpha_hat.shape[1:]) != (cfg.rows, cfg.N):
            raise ValueError(f"alpha must be (B, {cfg.rows}, {cfg.N}), got {tuple(alpha_hat.shape)}")
        return cfg.N * alpha_hat

    def _merge_inputs(self, pyramid, alpha_hat):
        """Run decoder blocks ``0 .. L/2-2`` and return the inputs to the output block.

        Returns ``(skip, modulated)``, both already rectified.
        """
        alpha = self._scaled_alpha(alpha_hat, pyramid[0].shape[0])
        prev = pyramid[-1]
        n_levels = len(pyramid)
        for d, (deconv, norm) in enumerate(zip(self.dec[:-1], self.dec_norm)):
            skip = pyramid[n_levels - 1 - d]
            mod = prev if alpha is None else prev * alpha[:, d, :, None, None]
            h = deconv(F.relu(torch.cat([skip, mod], dim=1)))
            th, tw = pyramid[n_levels - 2 - d].shape[-2:]
            prev = norm(h[..., :th, :tw])
        skip = pyramid[0]
        mod = prev if alpha is None else prev * alpha[:, -1, :, None, None]
        return F.relu(skip), F.relu(mod)

    def _trim(self, z):
        return z[..., :self.config.height, :self.config.width]

    def final_preactivation(self, pyramid, alpha_hat):
        """Pre-tanh output computed by a single transposed convolution over the concatenation."""
        skip, mod = self._merge_inputs(pyramid, alpha_hat)
        return self._trim(self.dec[-1](torch.cat([skip, mod], dim=1)))

    def split_preactivation(self, pyramid, alpha_hat):
        """Split the output pre-activation into ``(background, foreground, bias)`` parts.

        ``background`` collects the contribution of the skip channels,
        ``foreground`` that of the modulated decoder channels.
        """
        N = self.config.N
        skip, mod = self._merge_inputs(pyramid, alpha_hat)
        last = self.dec[-1]
        weight = last.weight
        pad = last.padding
        z_bg = F.conv_transpose2d(skip, weight[:N], stride=2, padding=pad)
        z_fg = F.conv_transpose2d(mod, weight[N:], stride=2, padding=pad)
        return self._trim(z_bg), self._trim(z_fg), last.bias[None, :, None, None]

    def decode(self, pyramid, alpha_hat):
        return torch.tanh(self.final_preactivation(pyramid, alpha_hat))

    def forward(self, x, alpha_hat=None):
        """Predict the next frame. ``alpha_hat=None`` runs the plain, unmodulated U-net."""
        return self.decode(self.encode(x), alpha_hat)

    def decompose(self, x, alpha_hat, mode="full"):
        """Render the full output or its foreground/background part.

        ``foreground`` drops the skip-path term, ``background`` drops the
        modulated-path term; the bias is kept in both.
        """
        if mode not in DECOMPOSE_MODES:
            raise ValueError(f"mode must be one of {DECOMPOSE_MODES}, got {mode!r}")
        if mode == "full":
            return self.forward(x, alpha_hat)
        z_bg, z_fg, bias = self.split_preactivation(self.encode(x), alpha_hat)
        z = z_fg if mode == "foreground" else z_bg
        return torch.tanh(z + bias)


def count_parameters(module):
    return sum(p.numel() for p in module.parameters())
