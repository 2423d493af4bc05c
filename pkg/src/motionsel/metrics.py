"""PSNR / SSIM / MSE on 8-bit-scale frames, prediction reports and the copy-last baseline.

Metric functions take ``H x W`` or ``H x W x C`` arrays with values in
[0, 255]. :func:`evaluate` accepts normalized clips ``(T, C, H, W)`` and
quantizes them exactly as they would be written to PNG.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .video_io import denormalize

MAX_VALUE = 255.0
PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b):
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b):
    """Peak signal-to-noise ratio in dB; identical inputs give ``PSNR_CAP``."""
    err = mse(a, b)
    if err == 0:
        return PSNR_CAP
    return float(10.0 * np.log10(MAX_VALUE ** 2 / err))


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-x ** 2 / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img, g):
    # separable correlation, then keep positions where the window fits entirely
    out = correlate1d(correlate1d(img, g, axis=0, mode="constant"), g, axis=1, mode="constant")
    r = len(g) // 2
    return out[r:img.shape[0] - r, r:img.shape[1] - r]


def _ssim_plane(a, b):
    g = gaussian_window()
    c1 = (SSIM_K1 * MAX_VALUE) ** 2
    c2 = (SSIM_K2 * MAX_VALUE) ** 2
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a ** 2
    var_b = _filter_valid(b * b, g) - mu_b ** 2
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def ssim(a, b):
    """Mean structural similarity (11x11 Gaussian window, sigma 1.5), averaged over channels."""
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ValueError(f"frames of {a.shape[0]}x{a.shape[1]} are smaller than the "
                         f"{SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    return float(np.mean([_ssim_plane(a[:, :, c], b[:, :, c]) for c in range(a.shape[2])]))


@dataclass
class PredictionReport:
    label: str
    mse: np.ndarray
    psnr: np.ndarray
    ssim: np.ndarray

    @property
    def horizon(self):
        return len(self.mse)

    @property
    def mean_mse(self):
        return float(np.mean(self.mse))

    @property
    def mean_psnr(self):
        return float(np.mean(self.psnr))

    @property
    def mean_ssim(self):
        return float(np.mean(self.ssim))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["horizon", "mse", "psnr", "ssim"])
            for i in range(self.horizon):
                w.writerow([i + 1, repr(float(self.mse[i])), repr(float(self.psnr[i])),
                            repr(float(self.ssim[i]))])
            w.writerow(["mean", repr(self.mean_mse), repr(self.mean_psnr), repr(self.mean_ssim)])


def evaluate(pred, gt, label="M2"):
    """Per-frame metrics of a predicted clip against ground truth (both normalized)."""
    if len(pred) != len(gt):
        raise ValueError(f"length mismatch: {len(pred)} predicted vs {len(gt)} ground-truth frames")
    if len(pred) == 0:
        raise ValueError("nothing to evaluate")
    pa = [denormalize(f) for f in pred]
    ga = [denormalize(f) for f in gt]
    return PredictionReport(
        label,
        np.array([mse(p, g) for p, g in zip(pa, ga)]),
        np.array([psnr(p, g) for p, g in zip(pa, ga)]),
        np.array([ssim(p, g) for p, g in zip(pa, ga)]),
    )


def baseline_b0(conditioning_last, gt_future):
    """Copy-last baseline: every future frame is predicted as the last conditioning frame."""
    gt_future = np.asarray(gt_future)
    if len(gt_future) == 0:
        raise ValueError("empty ground-truth future")
    copies = np.repeat(np.asarray(conditioning_last)[None], len(gt_future), axis=0)
    return evaluate(copies, gt_future, "B0")


def format_table(rows):
    """Render ``{clip: {variant: (psnr, ssim or None)}}`` as a plain-text table.

    Variants appear in B0, B1, M1, M2 order; B0 shows PSNR only.
    """
    variants = ["B0", "B1", "M1", "M2"]
    header = ["", "B0", "B1", "M1", "M2 (FDN)"]
    body = []
    for clip, entries in rows.items():
        line = [clip]
        for v in variants:
            if v not in entries:
                line.append("-")
                continue
            p, s = entries[v]
            line.append(f"{p:g}" if s is None or v == "B0" else f"{p:g}/{s:g}")
        body.append(line)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    fmt = lambda r: " | ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), sep] + [fmt(r) for r in body])


def report_entry(report):
    return (round(report.mean_psnr, 2), round(report.mean_ssim, 3))
