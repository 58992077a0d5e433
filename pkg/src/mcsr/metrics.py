"""Image quality metrics and the paired significance test.

PSNR uses a fixed peak of 1.0 matching the [0, 1] intensity convention of
the phantom data. SSIM follows the standard constants (k1=0.01, k2=0.03,
11x11 Gaussian window with sigma 1.5, unit dynamic range) with 'valid'
windowing, i.e. border pixels without a full window are skipped.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import signal, stats

from .errors import ConfigError, ShapeError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_same_shape(pred, gt, what):
    if pred.shape != gt.shape:
        raise ShapeError(f"{what}: shape mismatch {pred.shape} vs {gt.shape}")


def mse(pred, gt) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt, "mse")
    return float(np.mean((pred - gt) ** 2))


def psnr(pred, gt, max_val: float = 1.0) -> float:
    """10*log10(max_val^2 / MSE); +inf when the images are identical."""
    err = mse(pred, gt)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val**2 / err)


def _gaussian_window(size, sigma):
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    kern = np.outer(g, g)
    return kern / kern.sum()


def ssim(pred, gt, max_val: float = 1.0) -> float:
    """Mean local structural similarity over valid windows."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt, "ssim")
    if pred.ndim != 2:
        raise ShapeError(f"ssim expects 2D images, got shape {pred.shape}")
    if min(pred.shape) < SSIM_WINDOW:
        raise ConfigError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM, got {pred.shape}"
        )
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    def filt(img):
        return signal.correlate2d(img, win, mode="valid")

    mu_x = filt(pred)
    mu_y = filt(gt)
    xx = filt(pred * pred) - mu_x * mu_x
    yy = filt(gt * gt) - mu_y * mu_y
    xy = filt(pred * gt) - mu_x * mu_y
    c1 = (SSIM_K1 * max_val) ** 2
    c2 = (SSIM_K2 * max_val) ** 2
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def nmse(pred, gt) -> float:
    """Squared error energy over ground-truth energy."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt, "nmse")
    denom = float(np.sum(gt**2))
    if denom == 0.0:
        raise ConfigError("nmse undefined for an all-zero ground truth")
    return float(np.sum((pred - gt) ** 2)) / denom


def paired_t_test(a, b):
    """Two-sided paired t-test; returns (t, p).

    Conventions for degenerate inputs: identical vectors give p=1; zero
    variance with nonzero mean difference gives t=+-inf and p=0.0
    (reported as p < 1e-12).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"paired vectors must match: {a.shape} vs {b.shape}")
    n = a.size
    if n < 2:
        raise ConfigError("paired t-test needs at least 2 samples")
    d = a - b
    if np.all(d == 0.0):
        return 0.0, 1.0
    sd = d.std(ddof=1)
    mean = d.mean()
    if sd == 0.0:
        return math.copysign(math.inf, mean), 0.0
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(stats.t.sf(abs(t), df=n - 1))
    return float(t), p


def error_map(pred, gt, saturation: float = 0.2) -> np.ndarray:
    """|pred - gt| scaled so `saturation` maps to 1.0, clipped to [0, 1]."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt, "error_map")
    if saturation <= 0:
        raise ConfigError(f"saturation must be positive, got {saturation}")
    return np.clip(np.abs(pred - gt) / saturation, 0.0, 1.0)


def save_png(path, img) -> None:
    """Export a [0, 1] float image as 8-bit grayscale PNG."""
    from PIL import Image

    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L").save(path)
