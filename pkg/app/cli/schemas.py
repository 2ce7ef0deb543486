"""Pydantic schemas for experiment configuration files."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Type, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.exceptions import ConfigError
from app.kernels.builders import KernelSpec
from app.kernels.grid import Grid

logger = logging.getLogger(__name__)

ScenarioName = Literal[
    "simulate", "compare", "speeds", "hair_trigger", "subsolution", "lemmas", "verify_assumptions"
]


class GridConfig(BaseModel):
    """Torus [-L/2, L/2)^d with an even number of cells per axis."""

    extent: Union[float, List[float]] = Field(..., description="Side length(s) L")
    cells: Union[int, List[int]] = Field(..., description="Cells per axis")
    dims: int = Field(1, ge=1, le=2)

    @model_validator(mode="after")
    def _check_axes(self) -> "GridConfig":
        self.to_grid()
        return self

    def to_grid(self) -> Grid:
        extent = self.extent if isinstance(self.extent, list) else [self.extent] * self.dims
        cells = self.cells if isinstance(self.cells, list) else [self.cells] * self.dims
        if len(extent) != len(cells):
            raise ValueError("extent and cells need one entry per axis")
        return Grid(extent=tuple(float(e) for e in extent), cells=tuple(int(n) for n in cells))


class ModelConfig(BaseModel):
    """Rates and competition operator of the equation."""

    variant: Literal["logistic", "local", "general"]
    kappa: float = Field(..., gt=0)
    m: float = Field(..., ge=0)
    dispersal: str = Field("a", description="Name of the dispersal kernel")
    competition_kernel: Optional[str] = Field(None, description="Name of a^- (defaults to the dispersal kernel)")
    kappa_minus: Optional[float] = Field(None, gt=0)
    form: Literal["kpp", "power"] = "kpp"
    theta: Optional[float] = Field(None, gt=0)
    n: float = Field(2.0, gt=0)

    @model_validator(mode="after")
    def _check_variant(self) -> "ModelConfig":
        if self.variant == "logistic" and self.kappa_minus is None:
            raise ValueError("logistic model needs kappa_minus")
        if self.variant in ("local", "general") and self.theta is None:
            raise ValueError(f"{self.variant} model needs theta")
        return self


class InitialConfig(BaseModel):
    """Initial datum u0."""

    shape: Literal["bump", "constant", "step", "gaussian"] = "bump"
    amplitude: float = Field(0.2, ge=0)
    radius: float = Field(1.0, gt=0)
    centre: List[float] = Field(default_factory=lambda: [0.0])
    xi: List[float] = Field(default_factory=lambda: [1.0], description="step: profile falls along xi")


class EvolveConfig(BaseModel):
    """Optional overrides of the integrator settings."""

    picard_tol: Optional[float] = Field(None, gt=0)
    max_iter: Optional[int] = Field(None, ge=1)
    alpha: Optional[float] = Field(None, gt=0, lt=1)
    max_dt: Optional[float] = Field(None, gt=0)
    max_halvings: Optional[int] = Field(None, ge=0)

    def overrides(self) -> Dict[str, Any]:
        return self.model_dump(exclude_none=True)


class SimulateParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    horizon: float = Field(10.0, gt=0)
    snapshot_interval: float = Field(1.0, gt=0)
    initial: InitialConfig = Field(default_factory=InitialConfig)
    window: Optional[float] = Field(None, gt=0, description="Positivity window half-width")
    tol: float = Field(1e-8, gt=0)
    constant_tol: float = Field(1e-6, gt=0)


class CompareParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    horizon: float = Field(10.0, gt=0)
    snapshot_interval: float = Field(1.0, gt=0)
    pairs: int = Field(20, ge=1)
    tol: float = Field(1e-8, gt=0)
    shift_cells: List[int] = Field(default_factory=lambda: [37])
    equivariance_tol: float = Field(1e-10, gt=0)
    monotone_window: Optional[float] = Field(None, gt=0)
    monotone_tol: float = Field(1e-10, gt=0)
    truncation_radius: Optional[float] = Field(None, gt=0, description="Runs the truncated-kernel sandwich")
    window: float = Field(5.0, gt=0)
    eps: float = Field(0.05, gt=0)
    initial: InitialConfig = Field(default_factory=InitialConfig)


class SpeedsParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t: float = Field(1.0, gt=0)
    directions: List[List[float]] = Field(default_factory=lambda: [[1.0], [-1.0]])
    tol_c: float = Field(0.05, gt=0)
    half_width: Optional[float] = Field(None, gt=0)
    n_max: int = Field(200, ge=1)
    stall_tol: float = Field(1e-6, gt=0)
    oracle_tol: Optional[float] = Field(0.05, gt=0, description="Relative tolerance against the linear oracle")
    dichotomy_offset: Optional[float] = Field(0.5, gt=0)
    front_horizon: Optional[float] = Field(None, gt=0, description="Direct-simulation horizon for front_speed")
    front_levels: List[float] = Field(default_factory=lambda: [0.1, 0.5, 0.9])
    front_tol: float = Field(0.05, gt=0)
    initial: InitialConfig = Field(default_factory=InitialConfig)

    @field_validator("front_levels")
    @classmethod
    def _levels_inside(cls, v):
        if any(not 0 < x < 1 for x in v):
            raise ValueError("front levels are fractions of theta in (0, 1)")
        return v


class HairTriggerParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    horizon: float = Field(60.0, gt=0)
    snapshot_interval: float = Field(1.0, gt=0)
    window: float = Field(5.0, gt=0, description="Half-width of K")
    drift: Optional[List[float]] = Field(None, description="Frame velocity (defaults to the computed drift)")
    expected_drift: Optional[List[float]] = None
    drift_tol: float = Field(1e-6, gt=0)
    eps: List[float] = Field(default_factory=lambda: [0.1, 0.01])
    t_max: float = Field(60.0, gt=0)
    compare_undrifted: bool = False
    initial: InitialConfig = Field(default_factory=InitialConfig)

    @field_validator("eps")
    @classmethod
    def _eps_positive(cls, v):
        if not v or any(e <= 0 for e in v):
            raise ValueError("eps values must be positive")
        return v


class SubsolutionScenarioParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha_fraction: float = Field(0.5, gt=0, lt=1, description="alpha as a fraction of alpha0")
    q_fraction: float = Field(0.5, gt=0, lt=1, description="q as a fraction of q0")
    drift: Optional[List[float]] = None
    tol: float = Field(1e-10, gt=0)
    t_cap: float = Field(2.0 ** 14, gt=0)
    domination_factor: float = Field(4.0, gt=1, description="Domination is checked on [T, factor * T]")
    domination_tol: float = Field(1e-6, gt=0)
    lower_bound_tau: Optional[float] = Field(None, gt=0)
    lower_bound_t: float = Field(5.0, gt=0)
    initial: InitialConfig = Field(default_factory=InitialConfig)


class LemmasParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    jump_kernel: Optional[str] = Field(None, description="Kernel b (defaults to the dispersal kernel)")
    profile_half_width: float = Field(60.0, gt=0)
    r_sequence: List[float] = Field(default_factory=lambda: [10.0, 20.0, 30.0, 40.0])
    jump_tol: float = Field(1e-3, gt=0)
    r1: float = Field(1.0, gt=0)
    p: float = Field(1.0, gt=0)
    q: float = Field(1.0, gt=0)
    target_sum: float = Field(5.0, gt=0)
    asymptotic: bool = True
    constant_r: Optional[float] = Field(None, ge=0)
    constant_t: float = Field(1.0986122886681098, gt=0)
    constant_tol: float = Field(1e-6, gt=0)


class AssumptionsParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    samples: int = Field(24, ge=1)
    truncation_radius: Optional[float] = Field(None, gt=0)


SCENARIO_PARAMS: Dict[str, Type[BaseModel]] = {
    "simulate": SimulateParams,
    "compare": CompareParams,
    "speeds": SpeedsParams,
    "hair_trigger": HairTriggerParams,
    "subsolution": SubsolutionScenarioParams,
    "lemmas": LemmasParams,
    "verify_assumptions": AssumptionsParams,
}


class ExperimentConfig(BaseModel):
    """One experiment: grid, kernels, model, scenario and its parameters."""

    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    grid: GridConfig
    kernels: Dict[str, KernelSpec] = Field(..., min_length=1)
    model: ModelConfig
    scenario: ScenarioName
    params: Dict[str, Any] = Field(default_factory=dict)
    evolve: EvolveConfig = Field(default_factory=EvolveConfig)
    output_dir: Optional[Path] = None
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _check_references(self) -> "ExperimentConfig":
        referenced = [self.model.dispersal]
        if self.model.competition_kernel:
            referenced.append(self.model.competition_kernel)
        jump = self.params.get("jump_kernel") if self.scenario == "lemmas" else None
        if jump:
            referenced.append(jump)
        missing = [name for name in referenced if name not in self.kernels]
        if missing:
            raise ValueError(f"undefined kernel(s): {', '.join(missing)}")
        return self

    def scenario_params(self) -> BaseModel:
        return SCENARIO_PARAMS[self.scenario].model_validate(self.params)


def _format_errors(exc: ValidationError, prefix: str = "") -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in (prefix, *err["loc"]) if part != "")
        lines.append(f"{loc or '<root>'}: {err['msg']}")
    return "; ".join(lines)


def load_config(path: Path) -> ExperimentConfig:
    """
    Read and validate an experiment file.

    Raises:
        ConfigError: unreadable file, malformed JSON (with line/column) or
            a validation error (with the field path)
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}",
            {"line": exc.lineno, "column": exc.colno},
        ) from exc
    try:
        config = ExperimentConfig.model_validate(data)
        config.scenario_params()
    except ValidationError as exc:
        prefix = "params" if "params" in data and not _is_top_level(exc) else ""
        raise ConfigError(f"{path}: {_format_errors(exc, prefix)}", {"errors": exc.errors(include_url=False, include_context=False, include_input=False)}) from exc
    if config.name is None:
        config.name = path.stem
    logger.info(f"Loaded experiment {config.name} (scenario {config.scenario})")
    return config


def _is_top_level(exc: ValidationError) -> bool:
    return exc.title == ExperimentConfig.__name__
