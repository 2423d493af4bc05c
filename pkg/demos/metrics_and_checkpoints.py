"""
Metrics, learning-rate schedule and checkpoints
===============================================

Small self-contained checks of the supporting pieces.
"""

import os
import tempfile

import numpy as np

from motionsel import DualNet, TrainConfig, Trainer, TransformerConfig
from motionsel.checkpoint import load_checkpoint
from motionsel.metrics import psnr, ssim
from motionsel.optim import lr_at
from motionsel.synth import SynthSpec, generate

rng = np.random.default_rng(0)
a = rng.uniform(0, 255, (64, 64))

# a uniform error of 25.5 levels is exactly 20 dB; doubling the error costs about 6 dB
print("PSNR(a, a+25.5) =", psnr(a, a + 25.5))
noise = rng.normal(0, 5, a.shape)
print("PSNR drop for 2x noise:", psnr(a, a + noise) - psnr(a, a + 2 * noise))
print("SSIM(a, a) =", ssim(a, a), " SSIM(a, a+noise) =", round(ssim(a, a + noise), 4))

# step schedule: halve every 2000 iterations
print([lr_at(i, 1e-3) for i in (0, 1999, 2000, 4000)])

# checkpoints are self-describing and resume bit-for-bit
clip = generate(SynthSpec(height=16, width=16, size=4, amplitude=1, period=8, length=12))
cfg = TransformerConfig(N=4, L=4, delta=3, channels=1, height=16, width=16)
trainer = Trainer(DualNet.build(cfg, seed=1), TrainConfig(iters_per_K=5, stage2_max=5, seed=1))
trainer.stage1(clip)
with tempfile.TemporaryDirectory() as d:
    path = os.path.join(d, "ckpt.bin")
    trainer.save(path)
    resumed = Trainer.from_checkpoint(load_checkpoint(path))
    print("resumed at iteration", resumed.iteration, "of", trainer.iteration,
          "| file size", os.path.getsize(path), "bytes")
