"""Reconstruction and temporal motion losses (mean-reduced)."""

from dataclasses import dataclass

import torch


@dataclass(frozen=True)
class LossConfig:
    mu_motion: float = 10.0

    def __post_init__(self):
        if self.mu_motion < 0:
            raise ValueError(f"mu_motion must be >= 0, got {self.mu_motion}")


def _same_shape(*tensors):
    shape = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != shape:
            raise ValueError(f"shape mismatch: {tuple(shape)} vs {tuple(t.shape)}")


def l1_loss(pred, gt):
    _same_shape(pred, gt)
    return (pred - gt).abs().mean()


def motion_loss(pred_t, pred_prev, gt_t, gt_prev):
    """Mean of ``| |pred_t - pred_prev| - |gt_t - gt_prev| |``."""
    _same_shape(pred_t, pred_prev, gt_t, gt_prev)
    return ((pred_t - pred_prev).abs() - (gt_t - gt_prev).abs()).abs().mean()


def sequence_terms(preds, gts):
    """Summed L1 and motion terms over a predicted sequence.

    ``preds`` and ``gts`` are sequences (or tensors with a leading time
    axis) of equal length. The first predicted frame has no motion term.
    """
    if len(preds) != len(gts):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(gts)} targets")
    if len(preds) == 0:
        raise ValueError("empty sequence")
    l1 = sum(l1_loss(p, g) for p, g in zip(preds, gts))
    motion = sum((motion_loss(preds[t], preds[t - 1], gts[t], gts[t - 1])
                  for t in range(1, len(preds))), torch.zeros((), dtype=l1.dtype))
    return l1, motion


def sequence_loss(preds, gts, config=LossConfig()):
    l1, motion = sequence_terms(preds, gts)
    return l1 + config.mu_motion * motion
