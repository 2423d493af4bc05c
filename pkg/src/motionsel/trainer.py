"""Two-stage curriculum training of the dual network.

Stage 1 draws short windows and grows the number of recursively predicted
frames ``K`` from 0 to ``delta - 1``. Stage 2 rolls out the whole training
span from its first ``delta`` frames, one optimizer step per rollout, with
early stopping.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import torch

from . import checkpoint as ckpt_io
from .losses import LossConfig, sequence_terms
from .model import DualNet
from .optim import Adam, lr_at
from .selector import SelectorConfig, SelectorNet, active_channels
from .transformer import TransformerConfig, TransformerNet
from .video_io import flip_lr, sample_window

log = logging.getLogger(__name__)


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    lr0: float = 2e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 4
    iters_per_K: int = 1000
    stage2_max: int = 500
    early_stop_patience: int = 20
    early_stop_min_rel: float = 1e-3
    mu_motion: float = 10.0
    seed: int = 0
    t_train: int | None = None
    flip_prob: float = 0.5
    halve_every: int = 2000
    stop_gradient: bool = False
    reset_moments_stage2: bool = True
    log_every: int = 50

    def validate(self):
        if self.lr0 <= 0:
            raise ValueError(f"lr0 must be > 0, got {self.lr0}")
        if self.iters_per_K < 1 or self.batch_size < 1:
            raise ValueError("iters_per_K and batch_size must be >= 1")
        if self.stage2_max < 0 or self.early_stop_patience < 1:
            raise ValueError("stage2_max must be >= 0 and early_stop_patience >= 1")
        LossConfig(self.mu_motion)
        return self


@dataclass
class TrainLogRecord:
    iteration: int
    stage: int
    K: int
    lr: float
    l1: float
    motion: float
    total: float
    active: tuple = field(default=())


def rollout(model, context, steps, stop_gradient=False, hook=None):
    """Predict ``steps`` frames recursively from a ``(B, delta, C, H, W)`` context.

    Each prediction replaces the oldest frame of the conditioning set.
    ``hook(j, n_generated)`` is called before prediction ``j``.
    Returns lists of predicted frames and alpha matrices.
    """
    delta = context.shape[1]
    frames = list(context.unbind(1))
    preds, alphas = [], []
    for j in range(steps):
        if hook is not None:
            hook(j, min(j, delta))
        cond = torch.stack(frames[-delta:], dim=1)
        pred, alpha = model(cond)
        preds.append(pred)
        alphas.append(alpha)
        frames.append(pred.detach() if stop_gradient else pred)
    return preds, alphas


def rollout_training_window(window, model, K, stop_gradient=False, hook=None):
    """Predict the ``K + 1`` targets of a stage-1 window.

    ``window`` is a ``(B, delta + K + 1, C, H, W)`` tensor.
    """
    delta = model.delta
    if K >= delta:
        raise ValueError(f"stage-1 K must be < delta={delta}, got {K}")
    if window.shape[1] != delta + K + 1:
        raise ValueError(f"window must hold {delta + K + 1} frames, got {window.shape[1]}")
    preds, _ = rollout(model, window[:, :delta], K + 1, stop_gradient, hook)
    return preds


class Trainer:
    def __init__(self, model: DualNet, config: TrainConfig = None):
        self.model = model
        self.config = (config or TrainConfig()).validate()
        self.rng = np.random.default_rng(self.config.seed)
        self.optimizer = Adam(model.named_parameters(), self.config.adam_beta1,
                              self.config.adam_beta2, self.config.adam_eps)
        self.loss_config = LossConfig(self.config.mu_motion)
        self.iteration = 0
        self.log = []
        self.on_iteration = None

    @property
    def lr(self):
        return lr_at(self.iteration, self.config.lr0, self.config.halve_every)

    def _training_span(self, clip):
        t_train = self.config.t_train or len(clip)
        if t_train > len(clip):
            raise ValueError(f"t_train={t_train} exceeds clip length {len(clip)}")
        return np.asarray(clip[:t_train], dtype=np.float32)

    def _step(self, preds, gts, stage, K, alpha):
        l1, motion = sequence_terms(preds, gts)
        total = l1 + self.loss_config.mu_motion * motion
        if not torch.isfinite(total):
            raise TrainingDivergedError(f"non-finite loss at iteration {self.iteration}")
        lr = self.lr
        self.optimizer.zero_grad()
        total.backward()
        self.optimizer.step(lr)
        active = ()
        if self.iteration % self.config.log_every == 0:
            active = tuple(int(c) for c in active_channels(alpha[0]))
        rec = TrainLogRecord(self.iteration, stage, K, lr, l1.item(), motion.item(),
                             total.item(), active)
        self.log.append(rec)
        self.iteration += 1
        if self.on_iteration is not None:
            self.on_iteration(self, rec)
        return rec

    def stage1(self, clip, hook=None):
        """Windowed curriculum, ``K = 0 .. delta - 1``; returns this stage's log records."""
        cfg = self.config
        span = self._training_span(clip)
        delta = self.model.delta
        first = len(self.log)
        self.model.train()
        for K in range(delta):
            for _ in range(cfg.iters_per_K):
                windows = [sample_window(span, delta, K, self.rng) for _ in range(cfg.batch_size)]
                flip = bool(self.rng.random() < cfg.flip_prob)
                batch = np.stack([flip_lr(w, flip).frames for w in windows])
                batch = torch.from_numpy(batch).to(self._dtype())
                preds, alphas = rollout(
                    self.model, batch[:, :delta], K + 1, cfg.stop_gradient,
                    None if hook is None else (lambda j, n, K=K: hook(K, j, n)))
                gts = list(batch[:, delta:].unbind(1))
                self._step(preds, gts, 1, K, alphas[0].detach())
        return self.log[first:]

    def stage2(self, clip):
        """Full recursive rollouts over the training span with early stopping."""
        cfg = self.config
        span = torch.from_numpy(self._training_span(clip)).to(self._dtype())
        delta = self.model.delta
        if len(span) <= delta:
            raise ValueError(f"training span of {len(span)} frames leaves nothing to predict")
        first = len(self.log)
        if cfg.reset_moments_stage2:
            # the full-rollout loss has a different gradient scale than the windowed one
            self.optimizer.reset()
        self.model.eval()
        context = span[None, :delta]
        gts = list(span[None, delta:].unbind(1))
        best, stale = np.inf, 0
        for _ in range(cfg.stage2_max):
            preds, alphas = rollout(self.model, context, len(gts), cfg.stop_gradient)
            rec = self._step(preds, gts, 2, len(gts) - 1, alphas[0].detach())
            if rec.total < best * (1 - cfg.early_stop_min_rel):
                best, stale = rec.total, 0
            else:
                stale += 1
                if stale >= cfg.early_stop_patience:
                    log.info("early stop at iteration %d (best loss %.5f)", self.iteration, best)
                    break
        return self.log[first:]

    def fit(self, clip):
        self.stage1(clip)
        self.stage2(clip)
        return self.log

    def _dtype(self):
        return next(self.model.parameters()).dtype

    def state(self):
        """Snapshot model, optimizer, counters and RNG into a :class:`Checkpoint`."""
        arrays, counters = {}, {}
        for name, t in self.model.state_dict().items():
            if t.is_floating_point():
                arrays[f"model.{name}"] = t.detach().cpu().numpy()
            else:
                counters[name] = int(t)
        for name, t in self.optimizer.state_arrays().items():
            arrays[name] = t.detach().cpu().numpy()
        meta = {
            "transformer": asdict(self.model.transformer.config),
            "selector": None if self.model.selector is None else asdict(self.model.selector.config),
            "train": asdict(self.config),
            "iteration": self.iteration,
            "adam_step": self.optimizer.step_count,
            "rng_state": self.rng.bit_generator.state,
            "int_buffers": counters,
        }
        return ckpt_io.Checkpoint(meta, arrays)

    def save(self, path):
        ckpt_io.save_checkpoint(path, self.state())

    @classmethod
    def from_checkpoint(cls, ckpt):
        model = model_from_checkpoint(ckpt)
        known = {f.name for f in fields(TrainConfig)}
        trainer = cls(model, TrainConfig(**{k: v for k, v in ckpt.meta["train"].items()
                                            if k in known}))
        trainer.optimizer.load_state_arrays(
            {k: torch.from_numpy(v) for k, v in ckpt.arrays.items() if k.startswith("adam.")},
            ckpt.meta["adam_step"])
        trainer.iteration = ckpt.meta["iteration"]
        trainer.rng.bit_generator.state = ckpt.meta["rng_state"]
        return trainer


def model_from_checkpoint(ckpt):
    """Rebuild a :class:`DualNet` with the weights stored in ``ckpt``."""
    meta = ckpt.meta
    try:
        tcfg = TransformerConfig(**meta["transformer"])
        scfg = None if meta["selector"] is None else SelectorConfig(**meta["selector"])
    except (KeyError, TypeError) as exc:
        raise ckpt_io.CheckpointFormatError(f"bad model configuration in checkpoint: {exc}") from None
    model = DualNet(TransformerNet(tcfg), None if scfg is None else SelectorNet(scfg))
    state = {}
    for name, ref in model.state_dict().items():
        if ref.is_floating_point():
            key = f"model.{name}"
            if key not in ckpt.arrays:
                raise ckpt_io.CheckpointFormatError(f"checkpoint lacks array {key!r}")
            state[name] = torch.from_numpy(ckpt.arrays[key].copy())
        else:
            state[name] = torch.tensor(meta.get("int_buffers", {}).get(name, 0), dtype=ref.dtype)
    model.load_state_dict(state)
    return model


def write_log_csv(records, path):
    """Append-style CSV of log records: one row per optimizer step."""
    rows = max((len(r.active) for r in records), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "stage", "K", "lr", "l1", "motion", "total"] +
                   [f"active_channels_row{i}" for i in range(rows)])
        for r in records:
            active = list(r.active) + [""] * (rows - len(r.active))
            w.writerow([r.iteration, r.stage, r.K, repr(r.lr), f"{r.l1:.8g}", f"{r.motion:.8g}",
                        f"{r.total:.8g}"] + active)
