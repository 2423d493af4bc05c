"""Shared finite-difference gradient harness for the dual network."""

import numpy as np
import torch

from motionsel.losses import sequence_terms
from motionsel.model import DualNet
from motionsel.selector import SelectorConfig
from motionsel.trainer import rollout
from motionsel.transformer import TransformerConfig


def build_case(seed=0):
    tcfg = TransformerConfig(N=2, L=4, delta=2, channels=1, height=8, width=8)
    scfg = SelectorConfig.for_transformer(tcfg, ndf=2, filter_size=3)
    model = DualNet.build(tcfg, scfg, seed=seed).double()
    # the default init is tiny; larger weights keep the check away from flat regions
    with torch.no_grad():
        for name, p in model.named_parameters():
            if p.dim() > 1:
                p.normal_(0, 0.2)
    rng = np.random.default_rng(seed)
    clip = torch.from_numpy(rng.uniform(-1, 1, (2, 4, 1, 8, 8)))
    return model, clip


def loss_terms(model, clip):
    preds, _ = rollout(model, clip[:, :2], 2)
    return sequence_terms(preds, list(clip[:, 2:].unbind(1)))


def group_errors(model, clip, term, step=1e-3, max_entries=12, seed=0, kink_tol=0.05):
    """Relative error between analytic and central-difference gradients, per parameter group.

    Absolute values and rectifiers make the loss piecewise smooth. An entry
    whose one-sided differences disagree by more than ``kink_tol`` (relative)
    straddles a kink, where central differences are meaningless, so it is
    left out. Returns ``{name: (relative_error, n_checked, n_skipped)}``.
    """
    model.train()
    params = dict(model.named_parameters())
    model.zero_grad()
    f0 = loss_terms(model, clip)[term]
    f0.backward()
    f0 = f0.item()
    rng = np.random.default_rng(seed)
    out = {}
    for name, p in params.items():
        flat = p.data.view(-1)
        idx = np.arange(flat.numel())
        if len(idx) > max_entries:
            idx = rng.choice(idx, max_entries, replace=False)
        analytic, numeric, skipped = [], [], 0
        with torch.no_grad():
            for i in idx:
                orig = flat[i].item()
                flat[i] = orig + step
                up = loss_terms(model, clip)[term].item()
                flat[i] = orig - step
                down = loss_terms(model, clip)[term].item()
                flat[i] = orig
                fwd, bwd = (up - f0) / step, (f0 - down) / step
                if abs(fwd - bwd) > kink_tol * max(abs(fwd), abs(bwd), 1e-6):
                    skipped += 1
                    continue
                analytic.append(p.grad.view(-1)[i].item())
                numeric.append((up - down) / (2 * step))
        analytic, numeric = np.array(analytic), np.array(numeric)
        scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
        err = float(np.linalg.norm(analytic - numeric) / scale) if len(analytic) else np.nan
        out[name] = (err, len(analytic), skipped)
    return out
