"""Frequency-domain degradation of high-resolution magnitude images.

Low-resolution acquisition is simulated by transforming an image to its
frequency grid, keeping only the central block (the low spatial
frequencies), and transforming back at the smaller size. Conventions used
throughout:

* orthonormal transforms (``norm="ortho"``), so Parseval holds exactly and
  the transform pair is symmetric;
* the DC coefficient sits at index ``(H // 2, W // 2)`` (floor convention
  on even sizes);
* the retained central block is scaled by ``1/s`` so a constant image
  degrades to the same constant and the image mean is preserved.

Cropping an even-sized grid keeps a Nyquist row/column whose positive-
frequency mirror is discarded, so the inverse transform of a truncated
grid carries a small, legitimate imaginary component. ``ifft2c`` therefore
checks the imaginary residue only when the caller expects a Hermitian
grid (the default); ``degrade`` opts out and keeps the real part.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

__all__ = [
    "fft2c",
    "ifft2c",
    "truncate_center",
    "degrade",
    "zero_fill_upsample",
    "validate_scale",
]


def validate_scale(height: int, width: int, s: int) -> None:
    """Raise ConfigError unless ``s`` is a positive integer dividing both dims."""
    if not isinstance(s, (int, np.integer)) or isinstance(s, bool):
        raise ConfigError(f"scale factor must be an integer, got {s!r}")
    if s < 1:
        raise ConfigError(f"scale factor must be >= 1, got {s}")
    if height % s or width % s:
        raise ConfigError(
            f"scale factor {s} must divide image dimensions {height}x{width}"
        )


def fft2c(image: np.ndarray) -> np.ndarray:
    """Centered orthonormal 2D DFT of a real image.

    Returns a complex grid of the same shape with DC at (H//2, W//2).
    Non-finite input is rejected.
    """
    image = np.asarray(image)
    if image.ndim != 2 or image.shape[0] < 1 or image.shape[1] < 1:
        raise ShapeError(f"expected a 2D image, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise NumericError("fft2c: input contains NaN or Inf")
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(image), norm="ortho"))


def ifft2c(k: np.ndarray, check_hermitian: bool = True) -> np.ndarray:
    """Inverse of :func:`fft2c`; returns the real part.

    With ``check_hermitian`` (the default) the imaginary residue must stay
    below 1e-4 of the real part's max magnitude, which holds for grids
    obtained from real images. Callers handing in truncated grids, whose
    Nyquist rows are legitimately asymmetric, disable the check.
    """
    k = np.asarray(k)
    if k.ndim != 2:
        raise ShapeError(f"expected a 2D grid, got shape {k.shape}")
    if not np.all(np.isfinite(k)):
        raise NumericError("ifft2c: input contains NaN or Inf")
    img = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(k), norm="ortho"))
    real = img.real
    if check_hermitian:
        imag_max = np.max(np.abs(img.imag))
        real_max = np.max(np.abs(real))
        if imag_max > 1e-4 * max(real_max, np.finfo(real.dtype).tiny):
            raise NumericError(
                f"ifft2c: imaginary residue {imag_max:.3e} exceeds 1e-4 of the "
                f"real part's max {real_max:.3e}; grid is not Hermitian-symmetric"
            )
    return real.copy()


def truncate_center(k: np.ndarray, s: int) -> np.ndarray:
    """Keep the central (H/s)x(W/s) block of a centered grid, scaled by 1/s.

    DC stays at the new center. The 1/s factor keeps constant images
    intensity-preserved under :func:`degrade`.
    """
    k = np.asarray(k)
    if k.ndim != 2:
        raise ShapeError(f"expected a 2D grid, got shape {k.shape}")
    h, w = k.shape
    validate_scale(h, w, s)
    if s == 1:
        return k.copy()
    h2, w2 = h // s, w // s
    r0 = h // 2 - h2 // 2
    c0 = w // 2 - w2 // 2
    return k[r0 : r0 + h2, c0 : c0 + w2] / s


def degrade(hr: np.ndarray, s: int) -> np.ndarray:
    """Simulated low-resolution acquisition of an HR magnitude image.

    fft2c -> central truncation by ``s`` -> inverse transform, real part.
    Output is (H/s)x(W/s); the map is linear in the input and preserves
    the image mean.
    """
    hr = np.asarray(hr)
    k = fft2c(hr)
    k_low = truncate_center(k, s)
    return ifft2c(k_low, check_hermitian=False)


def _hermitian_project(k_centered: np.ndarray) -> np.ndarray:
    """Project a centered grid onto the Hermitian-symmetric subspace."""
    k = np.fft.ifftshift(k_centered)
    mirror = np.conj(np.roll(k[::-1, ::-1], shift=(1, 1), axis=(0, 1)))
    return np.fft.fftshift((k + mirror) / 2)


def zero_fill_upsample(lr: np.ndarray, s: int) -> np.ndarray:
    """Upsample by embedding the LR grid in a zero-padded HR grid.

    The inverse of the truncation step up to the discarded frequencies:
    the LR frequency grid is scaled by ``s``, placed at the center of an
    (sH)x(sW) grid of zeros, Hermitian-projected (splitting Nyquist energy
    between mirrored rows so the result is exactly real), and inverse
    transformed. Serves as the zero-filled reconstruction baseline.
    """
    lr = np.asarray(lr)
    if lr.ndim != 2:
        raise ShapeError(f"expected a 2D image, got shape {lr.shape}")
    if not isinstance(s, (int, np.integer)) or isinstance(s, bool) or s < 1:
        raise ConfigError(f"scale factor must be a positive integer, got {s!r}")
    h2, w2 = lr.shape
    h, w = h2 * s, w2 * s
    k_low = fft2c(lr) * s
    k = np.zeros((h, w), dtype=complex)
    r0 = h // 2 - h2 // 2
    c0 = w // 2 - w2 // 2
    k[r0 : r0 + h2, c0 : c0 + w2] = k_low
    k = _hermitian_project(k)
    return ifft2c(k, check_hermitian=True)
