"""Frame sequence I/O, normalization and training-window sampling.

Clips are held in memory as float32 arrays of shape ``(T, C, H, W)`` with
values in ``[-1, 1]``. On disk, frames are 8-bit PNGs named with a printf
index pattern such as ``frame_%03d.png``.
"""

from __future__ import annotations

import glob
import os
import re
from dataclasses import dataclass

import numpy as np
from PIL import Image


class FrameFormatError(ValueError):
    """Raised when frame files cannot form a uniform clip."""


@dataclass
class Window:
    """A contiguous slice of a clip: ``delta`` context frames then ``K + 1`` targets."""

    conditioning: np.ndarray
    targets: np.ndarray
    start_index: int

    @property
    def frames(self):
        return np.concatenate([self.conditioning, self.targets], axis=0)


def normalize(raw):
    """Map 8-bit pixels (``H x W`` or ``H x W x C``) to a ``C x H x W`` float32 frame in [-1, 1]."""
    raw = np.asarray(raw)
    if raw.ndim == 2:
        raw = raw[:, :, None]
    if raw.ndim != 3:
        raise FrameFormatError(f"expected H x W x C pixels, got shape {raw.shape}")
    out = raw.astype(np.float32) * np.float32(2.0 / 255.0) - np.float32(1.0)
    return np.ascontiguousarray(out.transpose(2, 0, 1))


def denormalize(frame):
    """Inverse of :func:`normalize`: clamp to [0, 255], round half up, return ``H x W x C`` uint8."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 2:
        frame = frame[None]
    v = (frame + 1.0) * 127.5
    v = np.floor(np.clip(v, 0.0, 255.0) + 0.5)
    return np.ascontiguousarray(v.astype(np.uint8).transpose(1, 2, 0))


def check_clip(clip):
    """Validate clip invariants and return it as a float32 array."""
    clip = np.asarray(clip, dtype=np.float32)
    if clip.ndim != 4 or clip.shape[0] < 1:
        raise FrameFormatError(f"clip must have shape (T>=1, C, H, W), got {clip.shape}")
    if clip.shape[1] not in (1, 3):
        raise FrameFormatError(f"clip must have 1 or 3 channels, got {clip.shape[1]}")
    if np.any(np.abs(clip) > 1.0):
        raise FrameFormatError("clip values must lie in [-1, 1]")
    return clip


_INDEX_RE = re.compile(r"%0?(\d*)d")


def _expand_pattern(pattern):
    """Return ``(index, path)`` pairs for every existing file matching a printf pattern."""
    m = _INDEX_RE.search(pattern)
    if m is None:
        paths = sorted(glob.glob(pattern))
        return list(enumerate(paths))
    head, tail = pattern[: m.start()], pattern[m.end():]
    width = m.group(1)
    digits = rf"\d{{{int(width)}}}" if width else r"\d+"
    rx = re.compile(re.escape(head) + f"({digits})" + re.escape(tail) + "$")
    found = []
    for path in glob.glob(glob.escape(head) + "*" + glob.escape(tail)):
        hit = rx.match(path)
        if hit:
            found.append((int(hit.group(1)), path))
    return sorted(found)


def list_frames(path_pattern, frame_range=None):
    """Resolve a frame pattern to a list of paths in index order.

    ``frame_range`` is an inclusive ``(first, last)`` pair of indices.
    """
    if frame_range is not None:
        first, last = frame_range
        if "%" not in path_pattern:
            raise ValueError("frame_range requires a printf-style index pattern")
        paths = [path_pattern % i for i in range(first, last + 1)]
        missing = [p for p in paths if not os.path.isfile(p)]
        if missing:
            raise FileNotFoundError(f"missing frame file(s): {missing[0]}" +
                                    (f" and {len(missing) - 1} more" if len(missing) > 1 else ""))
        return paths
    paths = [p for _, p in _expand_pattern(path_pattern)]
    if not paths:
        raise FileNotFoundError(f"no frame files match {path_pattern!r}")
    return paths


def read_frame(path):
    """Decode one image file to normalized ``C x H x W`` float32."""
    with Image.open(path) as img:
        gray = img.mode in ("1", "L", "LA")
        arr = np.asarray(img.convert("L" if gray else "RGB"))
    return normalize(arr)


def load_clip(path_pattern, frame_range=None):
    """Load a frame sequence as a ``(T, C, H, W)`` clip in [-1, 1].

    Raises ``FileNotFoundError`` when no frame (or a requested frame) exists,
    and :class:`FrameFormatError` when frames disagree in shape or channels.
    """
    paths = list_frames(path_pattern, frame_range)
    frames = []
    for path in paths:
        frame = read_frame(path)
        if frames and frame.shape != frames[0].shape:
            raise FrameFormatError(
                f"{path}: frame shape {frame.shape} differs from {frames[0].shape} ({paths[0]})")
        frames.append(frame)
    return check_clip(np.stack(frames))


def write_frame(frame, path):
    """Write a normalized ``C x H x W`` frame as an 8-bit PNG."""
    pixels = denormalize(frame)
    if pixels.shape[2] == 1:
        img = Image.fromarray(pixels[:, :, 0], mode="L")
    else:
        img = Image.fromarray(pixels, mode="RGB")
    dirname = os.path.dirname(path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    img.save(path, format="PNG")


def write_clip(clip, directory, pattern="frame_%03d.png", first_index=0):
    """Write every frame of ``clip`` into ``directory``; returns the written paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, frame in enumerate(clip):
        path = os.path.join(directory, pattern % (first_index + i))
        write_frame(frame, path)
        paths.append(path)
    return paths


def sample_window(clip, delta, K, rng):
    """Draw a window of ``delta`` conditioning and ``K + 1`` target frames.

    The start index is uniform over all valid positions.
    """
    if delta < 1 or K < 0:
        raise ValueError(f"need delta >= 1 and K >= 0, got delta={delta}, K={K}")
    span = delta + K + 1
    if len(clip) < span:
        raise ValueError(f"clip of length {len(clip)} too short for delta={delta}, K={K}")
    start = int(rng.integers(0, len(clip) - span + 1))
    frames = np.asarray(clip[start:start + span])
    return Window(frames[:delta].copy(), frames[delta:].copy(), start)


def flip_lr(window, apply):
    """Mirror every frame of the window horizontally when ``apply`` is true."""
    if not apply:
        return window
    return Window(np.ascontiguousarray(window.conditioning[..., ::-1]),
                  np.ascontiguousarray(window.targets[..., ::-1]),
                  window.start_index)


def error_map(pred, gt):
    """Per-pixel squared error summed over channels, rescaled so the maximum is 255."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    err = ((pred - gt) ** 2).sum(axis=0) if pred.ndim == 3 else (pred - gt) ** 2
    peak = err.max()
    if peak <= 0:
        return np.zeros(err.shape, dtype=np.uint8)
    return np.floor(err / peak * 255.0 + 0.5).astype(np.uint8)


def write_error_map(pred, gt, path):
    """Save :func:`error_map` of two normalized frames as a grayscale PNG."""
    img = error_map(pred, gt)
    dirname = os.path.dirname(path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    Image.fromarray(img, mode="L").save(path, format="PNG")
