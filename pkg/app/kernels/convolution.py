"""Periodic convolution of fields with kernels."""
import logging
from typing import Literal

import numpy as np
from scipy import fft as sp_fft

from app.core.config import settings
from app.core.exceptions import GridMismatch
from app.kernels.builders import Kernel
from app.kernels.grid import Field

logger = logging.getLogger(__name__)

Method = Literal["auto", "direct", "spectral"]


def convolve_direct(kernel: Kernel, values: np.ndarray) -> np.ndarray:
    """Accumulate w_j * u(x - y_j) over nonzero lags in lattice order."""
    centre = np.array([n // 2 for n in kernel.grid.cells])
    axes = tuple(range(kernel.dims))
    out = np.zeros_like(values, dtype=float)
    for idx in zip(*np.nonzero(kernel.weights)):
        shift = tuple(int(s) for s in np.asarray(idx) - centre)
        out += kernel.weights[idx] * np.roll(values, shift, axis=axes)
    return out


def convolve_spectral(kernel: Kernel, values: np.ndarray) -> np.ndarray:
    """Product of real FFTs, using the kernel's cached spectrum."""
    shape = kernel.grid.shape
    axes = tuple(range(kernel.dims))
    u_hat = sp_fft.rfftn(values, s=shape, axes=axes, workers=settings.max_workers)
    return sp_fft.irfftn(kernel.spectrum * u_hat, s=shape, axes=axes, workers=settings.max_workers)


def convolve_values(kernel: Kernel, values: np.ndarray, method: Method = "auto") -> np.ndarray:
    """
    Periodic convolution a*u on raw arrays.

    Args:
        kernel: Kernel on the same grid as values
        values: Cell values of shape kernel.grid.shape
        method: "direct", "spectral" or "auto" (spectral from
            settings.spectral_threshold cells on)

    Returns:
        Array of convolved values
    """
    if values.shape != kernel.grid.shape:
        raise GridMismatch(f"field of shape {values.shape} does not fit kernel grid {kernel.grid.shape}")
    if method == "auto":
        method = "spectral" if kernel.grid.size >= settings.spectral_threshold else "direct"
    if method == "direct":
        return convolve_direct(kernel, values)
    return convolve_spectral(kernel, values)


def convolve(kernel: Kernel, field: Field, method: Method = "auto") -> Field:
    """
    Periodic convolution of a field with a kernel.

    Raises:
        GridMismatch: kernel and field grids differ
    """
    if kernel.grid != field.grid:
        raise GridMismatch(
            f"kernel grid {kernel.grid.shape} differs from field grid {field.grid.shape}"
        )
    return field.with_values(convolve_values(kernel, field.values, method))
