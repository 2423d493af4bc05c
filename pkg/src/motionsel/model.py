"""The dual network: selector output modulates the transformer's decoder."""

from __future__ import annotations

import torch
import torch.nn as nn

from .selector import SelectorConfig, SelectorNet
from .transformer import TransformerConfig, TransformerNet

# Evaluation ladder: (selector enabled, mu_motion). B0 needs no model.
VARIANTS = {
    "B1": (False, 0.0),
    "M1": (True, 0.0),
    "M2": (True, 10.0),
}


class DualNet(nn.Module):
    """Transformer plus optional selector.

    With ``selector=None`` the weights are uniform (``alpha_hat = 1/N``),
    which reduces the decoder to a plain U-net.
    """

    def __init__(self, transformer: TransformerNet, selector: SelectorNet | None = None):
        super().__init__()
        self.transformer = transformer
        self.selector = selector
        if selector is not None:
            t, s = transformer.config, selector.config
            if (s.rows, s.N, s.delta, s.channels, s.height, s.width) != (
                    t.rows, t.N, t.delta, t.channels, t.height, t.width):
                raise ValueError("selector and transformer configs disagree")

    @classmethod
    def build(cls, tcfg: TransformerConfig, scfg: SelectorConfig | None = None,
              use_selector=True, seed=None):
        if seed is not None:
            torch.manual_seed(seed)
        transformer = TransformerNet(tcfg)
        selector = None
        if use_selector:
            selector = SelectorNet(scfg or SelectorConfig.for_transformer(tcfg))
        return cls(transformer, selector)

    @property
    def config(self):
        return self.transformer.config

    @property
    def delta(self):
        return self.transformer.config.delta

    def alpha(self, x):
        if self.selector is None:
            cfg = self.transformer.config
            return x.new_full((x.shape[0], cfg.rows, cfg.N), 1.0 / cfg.N)
        return self.selector(x)

    def forward(self, x):
        """``(B, delta, C, H, W)`` -> ``(next_frame, alpha_hat)``."""
        alpha_hat = self.alpha(x)
        return self.transformer(x, alpha_hat), alpha_hat

    def decompose(self, x, mode="full"):
        return self.transformer.decompose(x, self.alpha(x), mode)
