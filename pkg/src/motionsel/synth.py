"""Deterministic synthetic clips: a moving object over a fixed textured background.

Objects move with integer-pixel, triangle-wave trajectories so future frames
are exact replays of earlier ones.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .video_io import normalize, write_clip

KINDS = ("oscillating_square", "translating_bar", "static")


@dataclass(frozen=True)
class SynthSpec:
    kind: str = "oscillating_square"
    height: int = 64
    width: int = 64
    period: int = 16
    amplitude: int = 2  # pixels per frame
    texture_seed: int = 0
    length: int = 48
    size: int = 12  # square side, or bar width
    channels: int = 1
    grain: float = 0.0  # std of per-pixel background noise, in 8-bit levels


def triangle_offsets(spec):
    """Horizontal object offset for each frame: rises ``amplitude`` px/frame for half a period, then returns."""
    t = np.arange(spec.length) % spec.period
    half = spec.period // 2
    return spec.amplitude * np.where(t <= half, t, spec.period - t)


def object_boxes(spec):
    """Per-frame object bounding box ``(top, left, bottom, right)``, end-exclusive."""
    if spec.kind == "static":
        return [None] * spec.length
    x0 = (spec.width - (spec.size + spec.amplitude * (spec.period // 2))) // 2
    if spec.kind == "oscillating_square":
        top = (spec.height - spec.size) // 2
        bottom = top + spec.size
    else:
        top, bottom = 0, spec.height
    return [(top, x0 + int(dx), bottom, x0 + int(dx) + spec.size) for dx in triangle_offsets(spec)]


def _validate(spec):
    if spec.kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {spec.kind!r}")
    if spec.period < 2 or spec.period % 2:
        raise ValueError(f"period must be an even number >= 2, got {spec.period}")
    if spec.length < 1 or spec.channels not in (1, 3):
        raise ValueError("length must be >= 1 and channels 1 or 3")
    if spec.kind == "static":
        return
    travel = spec.amplitude * (spec.period // 2)
    if spec.size < 1 or spec.size + travel > spec.width or (
            spec.kind == "oscillating_square" and spec.size > spec.height):
        raise ValueError(f"object of size {spec.size} travelling {travel} px leaves the "
                         f"{spec.height}x{spec.width} frame")


def generate_pixels(spec):
    """Return the clip as uint8 ``(T, H, W, C)``."""
    _validate(spec)
    rng = np.random.default_rng(spec.texture_seed)
    shape = (spec.height, spec.width, spec.channels)
    # blocky background texture, optionally with per-pixel grain
    coarse = rng.uniform(40, 150, size=(-(-spec.height // 4), -(-spec.width // 4), spec.channels))
    bg = np.repeat(np.repeat(coarse, 4, axis=0), 4, axis=1)[:spec.height, :spec.width]
    if spec.grain > 0:
        bg = np.clip(bg + rng.normal(0, spec.grain, size=shape), 0, 255)
    fg_color = rng.uniform(200, 250, size=spec.channels)
    frames = np.repeat(bg[None], spec.length, axis=0)
    for t, box in enumerate(object_boxes(spec)):
        if box is None:
            continue
        top, left, bottom, right = box
        patch = np.broadcast_to(fg_color, (bottom - top, right - left, spec.channels)).copy()
        patch[:, ::4] -= 60  # vertical stripes make horizontal motion visible inside the object
        frames[t, top:bottom, left:right] = patch
    return np.round(frames).astype(np.uint8)


def generate(spec):
    """Normalized ``(T, C, H, W)`` float32 clip."""
    return np.stack([normalize(f) for f in generate_pixels(spec)])


def write(spec, directory, pattern="frame_%03d.png"):
    """Write the clip as PNGs; returns the full path pattern for :func:`load_clip`."""
    write_clip(generate(spec), directory, pattern)
    return os.path.join(directory, pattern)
