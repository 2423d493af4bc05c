"""
Foreground/background renders and alpha curves
==============================================

The output layer sees two inputs: the encoder skip path and the
selector-modulated decoder path. Rendering each alone separates static
content from motion. The selector's weights over time form the alpha
curves.
"""

import tempfile

import numpy as np

from motionsel import DualNet, TrainConfig, Trainer, TransformerConfig
from motionsel.analysis import (box_concentration, export_alpha_curves, load_alpha_curves,
                                render_decomposition)
from motionsel.predictor import predict_with_alpha_trace
from motionsel.synth import SynthSpec, generate, object_boxes

spec = SynthSpec()
clip = generate(spec)
cfg = TransformerConfig(N=16, L=8, delta=3, channels=1, height=64, width=64)
model = DualNet.build(cfg, seed=7)
Trainer(model, TrainConfig(iters_per_K=150, stage2_max=60, t_train=32, seed=7)).fit(clip)

with tempfile.TemporaryDirectory() as d:
    full, fg, bg, residual = render_decomposition(model, clip[29:32], 8, d)
    # the split is exact up to float rounding
    print(f"largest additivity residual {residual:.2e}")

    boxes = object_boxes(spec)
    for j in range(0, 8, 2):
        share = box_concentration(fg[j], boxes[32 + j])
        print(f"frame {32 + j}: {share:.0%} of the foreground render's deviation lies on the square")

    _, alphas = predict_with_alpha_trace(model, clip[29:32], 16)
    export_alpha_curves(alphas, f"{d}/alpha.csv", frame_offset=32)
    trace, first = load_alpha_curves(f"{d}/alpha.csv")

# scaled weights N * alpha of the last decoder row; 1.0 means uniform
last_row = cfg.N * trace[:, -1]
print("most variable channels of the last row:", np.argsort(last_row.std(0))[::-1][:3])
print("active channels per row at the end:", (cfg.N * trace[-1] > 0.5).sum(-1))
