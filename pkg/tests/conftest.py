import os

import numpy as np
import pytest

# Settings are read at import time; pin them before any app import.
os.environ.setdefault("MAX_WORKERS", "1")
os.environ.setdefault("LOG_LEVEL", "WARNING")

from app.evolution import EvolveOptions  # noqa: E402
from app.kernels import Field, Grid, KernelSpec, build_kernel  # noqa: E402
from app.nonlinearity import Model, kpp_local, power_general  # noqa: E402


@pytest.fixture()
def line_grid() -> Grid:
    """[-50, 50) with 512 cells; spectral path."""
    return Grid.line(100.0, 512)


@pytest.fixture()
def small_grid() -> Grid:
    """[-10, 10) with 64 cells; direct convolution path."""
    return Grid.line(20.0, 64)


@pytest.fixture()
def gaussian_kernel(line_grid):
    return build_kernel(KernelSpec(family="gaussian", sigma=1.0), line_grid)


@pytest.fixture()
def shifted_kernel(line_grid):
    """Mean-1 Gaussian."""
    return build_kernel(KernelSpec(family="gaussian", sigma=1.0, mean=1.0), line_grid)


@pytest.fixture()
def logistic_model(gaussian_kernel) -> Model:
    """kappa=2, m=1, kappa_minus=1, a_minus = a; theta = 1."""
    return Model.logistic(2.0, 1.0, 1.0, gaussian_kernel)


@pytest.fixture()
def model_factory(line_grid):
    """Build models of each variant on line_grid."""

    def _create_model(variant: str = "logistic", kernel=None, kappa: float = 2.0, m: float = 1.0,
                      theta: float = 1.0, n: float = 2.0) -> Model:
        kernel = kernel or build_kernel(KernelSpec(family="gaussian", sigma=1.0), line_grid)
        beta = kappa - m
        if variant == "logistic":
            return Model.logistic(kappa, m, beta / theta, kernel)
        if variant == "local":
            return Model(kappa, m, kpp_local(beta, theta))
        if variant == "general":
            return Model(kappa, m, power_general(beta, theta, n, kernel))
        raise ValueError(variant)

    return _create_model


@pytest.fixture()
def bump(line_grid) -> Field:
    """0.2 on [-1, 1]."""
    return Field.from_function(line_grid, lambda x: np.where(np.abs(x) <= 1.0, 0.2, 0.0))


@pytest.fixture()
def fast_opts() -> EvolveOptions:
    return EvolveOptions(max_dt=0.05, snapshot_interval=1.0)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


# Acceptance-scale set-up: [-200, 200) with 8192 cells, Gaussian sigma = 1.

@pytest.fixture(scope="session")
def wide_grid() -> Grid:
    return Grid.line(400.0, 8192)


@pytest.fixture(scope="session")
def wide_kernel(wide_grid):
    return build_kernel(KernelSpec(family="gaussian", sigma=1.0), wide_grid)


@pytest.fixture(scope="session")
def wide_model(wide_kernel) -> Model:
    return Model.logistic(2.0, 1.0, 1.0, wide_kernel)


@pytest.fixture(scope="session")
def wide_bump(wide_grid) -> Field:
    return Field.from_function(wide_grid, lambda x: np.where(np.abs(x) <= 1.0, 0.2, 0.0))
