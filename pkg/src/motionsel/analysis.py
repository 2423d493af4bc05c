"""Interpretability outputs: alpha curves, foreground/background renders, temporal averages."""

from __future__ import annotations

import csv
import os

import numpy as np
import torch

from .video_io import write_frame


def export_alpha_curves(trace, path, frame_offset=0):
    """Write an alpha trace ``(T, rows, N)`` of unscaled weights as CSV.

    Columns: ``frame, row, channel, alpha_scaled`` with ``alpha_scaled = N * alpha_hat``.
    """
    trace = np.asarray(trace, dtype=np.float64)
    if trace.ndim != 3 or len(trace) == 0:
        raise ValueError(f"need a non-empty (T, rows, N) trace, got shape {trace.shape}")
    N = trace.shape[2]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "row", "channel", "alpha_scaled"])
        for t, mat in enumerate(trace):
            for r, row in enumerate(mat):
                for n, a in enumerate(row):
                    w.writerow([t + frame_offset, r, n, repr(float(N * a))])


def load_alpha_curves(path):
    """Read a CSV written by :func:`export_alpha_curves`; returns ``(trace, frame_offset)``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no alpha rows")
    frames = np.array([int(r["frame"]) for r in rows])
    ri = np.array([int(r["row"]) for r in rows])
    ci = np.array([int(r["channel"]) for r in rows])
    vals = np.array([float(r["alpha_scaled"]) for r in rows])
    offset = int(frames.min())
    N = int(ci.max()) + 1
    trace = np.zeros((int(frames.max()) - offset + 1, int(ri.max()) + 1, N))
    trace[frames - offset, ri, ci] = vals / N
    return trace, offset


def temporal_average(clip):
    clip = np.asarray(clip)
    if len(clip) == 0:
        raise ValueError("cannot average an empty clip")
    return clip.mean(axis=0)


def decompose_step(model, window):
    """Full, foreground and background renders for one ``(1, delta, C, H, W)`` window.

    Also returns the largest deviation between the single-convolution output
    pre-activation and the sum of its two parts plus bias.
    """
    tnet = model.transformer
    alpha = model.alpha(window)
    pyramid = tnet.encode(window)
    z_full = tnet.final_preactivation(pyramid, alpha)
    z_bg, z_fg, bias = tnet.split_preactivation(pyramid, alpha)
    residual = float((z_full - (z_bg + z_fg + bias)).abs().max())
    full = tnet.decompose(window, alpha, "full")
    return full, torch.tanh(z_fg + bias), torch.tanh(z_bg + bias), residual


def render_decomposition(model, conditioning, horizon, out_dir):
    """Roll out ``horizon`` steps writing ``full_``, ``fg_`` and ``bg_`` PNGs per step.

    Returns ``(full_frames, fg_frames, bg_frames, max_residual)``. Full frames
    are fed back to drive the rollout, so they match :func:`predictor.predict`.
    """
    os.makedirs(out_dir, exist_ok=True)
    conditioning = np.asarray(conditioning, dtype=np.float32)
    if len(conditioning) != model.delta:
        raise ValueError(f"conditioning must hold delta={model.delta} frames")
    outs = ([], [], [])
    worst = 0.0
    was_training = model.training
    model.eval()
    try:
        dtype = next(model.parameters()).dtype
        window = torch.from_numpy(conditioning).to(dtype)[None]
        with torch.no_grad():
            for j in range(horizon):
                full, fg, bg, residual = decompose_step(model, window)
                worst = max(worst, residual)
                for kind, img, acc in zip(("full", "fg", "bg"), (full, fg, bg), outs):
                    frame = img[0].float().numpy()
                    acc.append(frame)
                    write_frame(frame, os.path.join(out_dir, f"{kind}_{j:03d}.png"))
                window = torch.cat([window[:, 1:], full[:, None]], dim=1)
    finally:
        model.train(was_training)
    shape = (0,) + conditioning.shape[1:]
    stack = lambda xs: np.stack(xs) if xs else np.zeros(shape, np.float32)
    return stack(outs[0]), stack(outs[1]), stack(outs[2]), worst


def box_concentration(frame, box):
    """Share of a frame's absolute deviation from its median that falls inside ``box``.

    ``box`` is ``(top, left, bottom, right)``, end-exclusive.
    """
    frame = np.asarray(frame, dtype=np.float64)
    dev = np.abs(frame - np.median(frame)).sum(axis=0) if frame.ndim == 3 else np.abs(frame - np.median(frame))
    total = dev.sum()
    if total == 0:
        return 0.0
    top, left, bottom, right = box
    return float(dev[top:bottom, left:right].sum() / total)
