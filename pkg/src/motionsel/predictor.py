"""Inference-time recursive frame generation."""

from __future__ import annotations

import numpy as np
import torch


def predict_with_alpha_trace(model, conditioning, horizon):
    """Generate ``horizon`` frames after ``conditioning`` (``(delta, C, H, W)``, values in [-1, 1]).

    Returns ``(frames, alphas)`` with shapes ``(horizon, C, H, W)`` and
    ``(horizon, rows, N)``; ``alphas[j]`` produced ``frames[j]``. Generated
    frames are fed back as reals, without 8-bit requantization.
    """
    conditioning = np.asarray(conditioning, dtype=np.float32)
    if conditioning.ndim != 4 or len(conditioning) != model.delta:
        raise ValueError(f"conditioning must hold delta={model.delta} frames, "
                         f"got shape {conditioning.shape}")
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    cfg = model.config
    frames = np.empty((horizon,) + conditioning.shape[1:], dtype=np.float32)
    alphas = np.empty((horizon, cfg.rows, cfg.N), dtype=np.float32)
    was_training = model.training
    model.eval()
    try:
        dtype = next(model.parameters()).dtype
        window = torch.from_numpy(conditioning).to(dtype)[None]
        with torch.no_grad():
            for j in range(horizon):
                nxt, alpha = model(window)
                frames[j] = nxt[0].float().numpy()
                alphas[j] = alpha[0].float().numpy()
                window = torch.cat([window[:, 1:], nxt[:, None]], dim=1)
    finally:
        model.train(was_training)
    return frames, alphas


def predict(model, conditioning, horizon):
    return predict_with_alpha_trace(model, conditioning, horizon)[0]
