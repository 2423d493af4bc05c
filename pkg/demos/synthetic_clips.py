"""
Synthetic clips and the copy-last baseline
==========================================

Generates the deterministic test clips, writes them as PNG frames and
measures how quickly copying the last frame falls behind.
"""

import tempfile

import numpy as np

from motionsel import synth
from motionsel.metrics import baseline_b0
from motionsel.video_io import load_clip

# a striped square moving 2 px per frame, back and forth every 16 frames
spec = synth.SynthSpec(kind="oscillating_square", length=48, period=16)
clip = synth.generate(spec)
print("clip", clip.shape, clip.dtype, "range", clip.min(), clip.max())

# the motion is integer-pixel, so the clip repeats exactly
print("frame 0 == frame 16:", np.array_equal(clip[0], clip[16]))

# frames go through PNG and come back unchanged
with tempfile.TemporaryDirectory() as d:
    pattern = synth.write(spec, d)
    print("PNG roundtrip lossless:", np.array_equal(load_clip(pattern), clip))

# copy-last error grows while the bar keeps moving away from its last position
bar = synth.generate(synth.SynthSpec(kind="translating_bar", amplitude=1, length=10))
report = baseline_b0(bar[0], bar[1:])
for h, (m, p) in enumerate(zip(report.mse, report.psnr), 1):
    print(f"horizon {h}: MSE {m:8.2f}  PSNR {p:6.2f} dB")
