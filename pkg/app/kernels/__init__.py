"""Dispersal kernels on periodic grids."""
from app.kernels.builders import (
    Kernel,
    KernelSpec,
    build_kernel,
    embed_kernel,
    kernel_from_weights,
    normalize_kernel,
    reduce_kernel,
    truncate_kernel,
)
from app.kernels.convolution import convolve, convolve_values
from app.kernels.grid import Field, Grid

__all__ = [
    "Field",
    "Grid",
    "Kernel",
    "KernelSpec",
    "build_kernel",
    "convolve",
    "convolve_values",
    "embed_kernel",
    "kernel_from_weights",
    "normalize_kernel",
    "reduce_kernel",
    "truncate_kernel",
]
