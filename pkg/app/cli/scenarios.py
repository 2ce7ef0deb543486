"""Scenario registry: binds a validated experiment to module operations and artifacts."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from app.cli.schemas import ExperimentConfig, InitialConfig
from app.core.config import settings
from app.core.exceptions import ConfigError, ToolkitError
from app.core.parallel import parallel_map
from app.core.reports import CheckReport, Verdict, verdict_of
from app.diagnostics import (
    check_avg_jump_lemma,
    check_constant_data,
    check_recurrence_divergence,
    front_speed,
    hair_trigger_metric,
    hair_trigger_verdict,
)
from app.evolution import (
    EvolveOptions,
    check_comparison,
    check_directional_monotonicity,
    check_equivariance,
    check_linear_bound,
    check_positivity,
    check_time_regularity,
    check_tube,
    evolve,
    ordered_pairs,
)
from app.kernels import Field, Grid, Kernel, build_kernel
from app.nonlinearity import (
    Model,
    approximating_model,
    check_approximation,
    check_assumptions,
    drift,
    kpp_local,
    power_general,
    power_local,
)
from app.reporting import (
    RunDirectory,
    export_kernel_csv,
    plot_polygon,
    plot_series,
    plot_trajectory,
    report_text,
    trajectory_frame,
    write_manifest,
)
from app.spreading import (
    estimate_cstar,
    linear_spreading_speed,
    probe,
    profile_lattice,
    step_profile,
    upsilon_contains,
    upsilon_polygon,
)
from app.subsolution import (
    SubsolutionParams,
    alpha0,
    check_domination,
    check_lower_bound_form,
    verify_nonlinear_subsolution,
)
from app.subsolution.gaussian import admissible_amplitude

logger = logging.getLogger(__name__)


@dataclass
class ScenarioContext:
    """Everything a scenario needs, built once from the experiment config."""

    config: ExperimentConfig
    grid: Grid
    kernels: Dict[str, Kernel]
    model: Model
    run: RunDirectory
    seed: int
    notes: List[str] = field(default_factory=list)

    @property
    def kernel(self) -> Kernel:
        return self.kernels[self.config.model.dispersal]

    @property
    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def options(self, **kwargs) -> EvolveOptions:
        return EvolveOptions(**{**self.config.evolve.overrides(), **kwargs})


@dataclass
class RunOutcome:
    exit_status: int
    run_dir: Path
    reports: List[CheckReport]


def build_model(config: ExperimentConfig, kernels: Dict[str, Kernel]) -> Model:
    spec = config.model
    kernel = kernels[spec.dispersal]
    competition = kernels[spec.competition_kernel or spec.dispersal]
    beta = spec.kappa - spec.m
    if spec.variant == "logistic":
        model = Model.logistic(spec.kappa, spec.m, spec.kappa_minus, competition)
    elif spec.variant == "local":
        op = kpp_local(beta, spec.theta) if spec.form == "kpp" else power_local(beta, spec.theta, spec.n)
        model = Model(spec.kappa, spec.m, op)
    else:
        model = Model(spec.kappa, spec.m, power_general(beta, spec.theta, spec.n, competition))
    return Model(model.kappa, model.m, model.competition, label=f"{spec.variant}:{kernel.label}")


def initial_field(spec: InitialConfig, grid: Grid) -> Field:
    """u0 from its declarative description."""
    centre = list(spec.centre) * grid.dims if len(spec.centre) == 1 else list(spec.centre)
    offsets = [coord - c for coord, c in zip(grid.mesh(), centre)]
    r2 = sum(o ** 2 for o in offsets)
    if spec.shape == "constant":
        values = np.full(grid.shape, spec.amplitude)
    elif spec.shape == "bump":
        values = np.where(r2 <= spec.radius ** 2 * (1 + 1e-12), spec.amplitude, 0.0)
    elif spec.shape == "gaussian":
        values = spec.amplitude * np.exp(-r2 / (2 * spec.radius ** 2))
    else:
        xi = list(spec.xi) * grid.dims if len(spec.xi) == 1 else list(spec.xi)
        along = sum(o * x for o, x in zip(offsets, xi))
        values = np.where(along < 0, spec.amplitude, 0.0)
    return Field(grid, values)


def _padded(values: List[int], dims: int) -> List[int]:
    return (list(values) + [0] * dims)[:dims]


def _save_trajectory(ctx: ScenarioContext, traj, stem: str = "trajectory") -> None:
    ctx.run.write_frame(f"{stem}.csv", trajectory_frame(traj))
    ctx.run.track(plot_trajectory(traj, ctx.run.path(f"{stem}.png")))
    ctx.run.write_table(
        f"{stem}_steps.csv", [{"t": r.t, "dt": r.dt, "iterations": r.iterations, "residual": r.residual}
                              for r in traj.step_log]
    )


def scenario_simulate(ctx: ScenarioContext) -> List[CheckReport]:
    params = ctx.config.scenario_params()
    model, kernel, theta = ctx.model, ctx.kernel, ctx.model.theta
    u0 = initial_field(params.initial, ctx.grid)
    traj = evolve(u0, params.horizon, model, kernel, ctx.options(snapshot_interval=params.snapshot_interval))
    _save_trajectory(ctx, traj)
    ctx.run.track(export_kernel_csv(kernel, ctx.run.path("kernel.csv")))

    reports = [
        check_tube(traj, theta, params.tol),
        check_linear_bound(traj, params.tol),
        check_time_regularity(traj, theta),
        check_positivity(traj, params.snapshot_interval, params.window, theta=theta),
    ]
    if params.initial.shape == "constant":
        reports.append(check_constant_data(model, kernel, params.initial.amplitude, params.horizon,
                                           params.constant_tol, ctx.options()))
    return reports


def scenario_compare(ctx: ScenarioContext) -> List[CheckReport]:
    params = ctx.config.scenario_params()
    model, kernel, grid, theta = ctx.model, ctx.kernel, ctx.grid, ctx.model.theta
    opts = ctx.options(snapshot_interval=params.snapshot_interval)

    def run_pair(pair):
        lo, hi = (evolve(u, params.horizon, model, kernel, opts) for u in pair)
        return check_comparison(lo, hi, params.tol), min(check_tube(lo, theta, params.tol).margin,
                                                         check_tube(hi, theta, params.tol).margin)

    results = parallel_map(run_pair, ordered_pairs(grid, theta, params.pairs, ctx.rng))
    rows = [{"pair": i, "order_margin": r.margin, "tube_margin": tube, "t": r.witness["t"]}
            for i, (r, tube) in enumerate(results)]
    ctx.run.write_table("ordered_pairs.csv", rows)
    order_worst = min(row["order_margin"] for row in rows)
    tube_worst = min(row["tube_margin"] for row in rows)
    reports = [
        CheckReport(check="comparison", verdict=verdict_of(order_worst >= -params.tol), margin=order_worst,
                    witness={"pairs": len(rows)}, table=rows),
        CheckReport(check="tube", verdict=verdict_of(tube_worst >= -params.tol), margin=tube_worst,
                    witness={"pairs": len(rows)}),
    ]

    u0 = initial_field(params.initial, grid)
    reports.append(check_equivariance(u0, _padded(params.shift_cells, grid.dims), params.horizon, model, kernel,
                                      ctx.options(), params.equivariance_tol))

    xi = [1.0] + [0.0] * (grid.dims - 1)
    step = initial_field(InitialConfig(shape="step", amplitude=theta / 2, xi=xi, centre=[0.0]), grid)
    window = params.monotone_window or min(grid.extent) / 4
    reports.append(check_directional_monotonicity(evolve(step, params.horizon, model, kernel, opts), xi, window,
                                                  tol=params.monotone_tol))

    if params.truncation_radius is not None:
        reports.extend(_truncation_sandwich(ctx, params, u0, opts))
    return reports


def _truncation_sandwich(ctx: ScenarioContext, params, u0: Field, opts: EvolveOptions) -> List[CheckReport]:
    model, kernel = ctx.model, ctx.kernel
    model_n, kernel_n, drift_n = approximating_model(model, kernel, params.truncation_radius)
    reports = [check_approximation(model, kernel, model_n, kernel_n, seed=ctx.seed)]
    full = evolve(u0, params.horizon, model, kernel, opts)
    truncated = evolve(u0, params.horizon, model_n, kernel_n, opts)
    sandwich = check_comparison(truncated, full, params.tol)
    sandwich.check = "truncated_sandwich"
    reports.append(sandwich)
    series = hair_trigger_metric(truncated, params.window, drift_n)
    ctx.run.write_table("truncated_metric.csv", series.to_rows())
    reports.append(hair_trigger_verdict(series, model_n.theta, params.eps, params.horizon))
    ctx.notes.append(f"truncated model: theta_n={model_n.theta:.6g}, drift_n={drift_n.tolist()}")
    return reports


def scenario_speeds(ctx: ScenarioContext) -> List[CheckReport]:
    params = ctx.config.scenario_params()
    model, kernel, theta = ctx.model, ctx.kernel, ctx.model.theta
    opts = ctx.options()
    common = dict(tol_c=params.tol_c, half_width=params.half_width, n_max=params.n_max,
                  stall_tol=params.stall_tol, opts=opts)

    results = [estimate_cstar(params.t, xi, model, kernel, **common) for xi in params.directions]
    rows = [res.to_row() for res in results]
    reports: List[CheckReport] = []
    for row, res, xi in zip(rows, results, params.directions):
        oracle = linear_spreading_speed(params.t, xi, model, kernel)
        row["linear_oracle"] = oracle
        if params.oracle_tol is not None:
            rel = abs(res.c_star - oracle) / max(abs(oracle), 1e-12)
            reports.append(CheckReport(check=f"linear_oracle{xi}", verdict=verdict_of(rel <= params.oracle_tol),
                                       margin=params.oracle_tol - rel,
                                       witness={"c_star": res.c_star, "oracle": oracle}))
        if params.dichotomy_offset is not None:
            above = probe(res.c_star + params.dichotomy_offset, params.t, xi, model, kernel,
                          params.half_width, params.n_max, params.stall_tol, opts)
            below = probe(res.c_star - params.dichotomy_offset, params.t, xi, model, kernel,
                          params.half_width, params.n_max, params.stall_tol, opts)
            ok = above.side == "zero" and below.side == "theta"
            reports.append(CheckReport(check=f"dichotomy{xi}", verdict=verdict_of(ok),
                                       witness={"below": below.right_limit, "above": above.right_limit}))
    ctx.run.write_table("speeds.csv", rows)

    drift_report = upsilon_contains(params.t * drift(model, kernel), params.t, model, kernel,
                                    params.directions, results=results)
    drift_report.check = "drift_in_front"
    reports.append(drift_report)
    if ctx.grid.dims == 2:
        ctx.run.track(plot_polygon(upsilon_polygon(results), params.t * drift(model, kernel),
                                   ctx.run.path("upsilon.png")))

    if params.front_horizon is not None:
        reports.extend(_front_checks(ctx, params, results[0]))
    return reports


def _front_checks(ctx: ScenarioContext, params, result) -> List[CheckReport]:
    model, kernel, theta = ctx.model, ctx.kernel, ctx.model.theta
    u0 = initial_field(params.initial, ctx.grid)
    traj = evolve(u0, params.front_horizon, model, kernel, ctx.options(snapshot_interval=1.0))
    window = (params.front_horizon / 2, params.front_horizon)
    fits = [front_speed(traj, frac * theta, result.xi, window) for frac in params.front_levels]
    rows = [{"level": f.level, "speed": f.speed, "residual": f.residual} for f in fits]
    ctx.run.write_table("front_speed.csv", rows)
    target = result.c_star / params.t
    mid = fits[len(fits) // 2].speed
    rel = abs(mid - target) / max(abs(target), 1e-12)
    speeds = [f.speed for f in fits]
    spread = (max(speeds) - min(speeds)) / max(abs(np.mean(speeds)), 1e-12)
    return [
        CheckReport(check="front_speed", verdict=verdict_of(rel <= params.front_tol),
                    margin=params.front_tol - rel, witness={"front_speed": mid, "c_star_per_time": target},
                    table=rows),
        CheckReport(check="front_coherence", verdict=verdict_of(spread <= 0.1), margin=0.1 - spread,
                    witness={"speeds": speeds}),
    ]


def scenario_hair_trigger(ctx: ScenarioContext) -> List[CheckReport]:
    params = ctx.config.scenario_params()
    model, kernel, theta = ctx.model, ctx.kernel, ctx.model.theta
    m_vec = drift(model, kernel)
    reports: List[CheckReport] = []
    if params.expected_drift is not None:
        err = float(np.max(np.abs(m_vec - np.asarray(params.expected_drift))))
        reports.append(CheckReport(check="drift", verdict=verdict_of(err <= params.drift_tol),
                                   margin=params.drift_tol - err, witness={"drift": m_vec.tolist()}))

    frame = np.asarray(params.drift) if params.drift is not None else m_vec
    u0 = initial_field(params.initial, ctx.grid)
    traj = evolve(u0, params.horizon, model, kernel, ctx.options(snapshot_interval=params.snapshot_interval))
    series = hair_trigger_metric(traj, params.window, frame)
    ctx.run.write_table("metric.csv", series.to_rows())
    ctx.run.track(plot_series(series.to_rows(), "t", ["window_min"], ctx.run.path("metric.png"),
                              title=f"min over K of u(x + t*{frame.tolist()}, t)"))
    for eps in params.eps:
        reports.append(hair_trigger_verdict(series, theta, eps, params.t_max))

    if params.compare_undrifted:
        still = hair_trigger_metric(traj, params.window, np.zeros(ctx.grid.dims))
        ctx.run.write_table("metric_undrifted.csv", still.to_rows())
        reports.append(CheckReport(check="undrifted_metric", verdict=Verdict.NOT_APPLICABLE,
                                   witness={"final": still.values[-1], "max": max(still.values)}))
    return reports


def scenario_subsolution(ctx: ScenarioContext) -> List[CheckReport]:
    params = ctx.config.scenario_params()
    model, kernel = ctx.model, ctx.kernel
    a0 = alpha0(kernel, model.kappa)
    q0 = admissible_amplitude(model, ctx.grid)
    frame = params.drift if params.drift is not None else drift(model, kernel).tolist()
    sub = SubsolutionParams(q=params.q_fraction * q0, alpha=params.alpha_fraction * a0, T=1.0,
                            drift=frame, q0=q0, alpha0=a0)
    logger.info(f"Sub-solution candidate q={sub.q:.6g}, alpha={sub.alpha:.6g} (alpha0={a0:.6g})")

    cert = verify_nonlinear_subsolution(sub, model, kernel, tol=params.tol, t_cap=params.t_cap, seed=ctx.seed)
    ctx.run.write_table("certificate.csv", cert.table)
    reports = [cert]
    certified = sub.model_copy(update={"T": cert.witness["T"]})
    t_end = params.domination_factor * certified.T
    reports.append(check_domination(certified, model, kernel, t_end, tol=params.domination_tol,
                                    opts=ctx.options(snapshot_interval=(t_end - certified.T) / 10)))

    if params.lower_bound_tau is not None:
        u0 = initial_field(params.initial, ctx.grid)
        traj = evolve(u0, params.lower_bound_t, model, kernel, ctx.options())
        reports.append(check_lower_bound_form(traj, params.initial.centre, params.lower_bound_tau,
                                              params.lower_bound_t, r=params.initial.radius))
    return reports


def scenario_lemmas(ctx: ScenarioContext) -> List[CheckReport]:
    params = ctx.config.scenario_params()
    model, theta = ctx.model, ctx.model.theta
    b = ctx.kernels[params.jump_kernel or ctx.config.model.dispersal]
    lattice = profile_lattice(params.profile_half_width, b.grid.spacing[0])
    jump = check_avg_jump_lemma(b, step_profile(lattice, theta), params.r_sequence, params.jump_tol)
    ctx.run.write_table("avg_jump.csv", jump.table)

    recurrence = check_recurrence_divergence(params.r1, params.p, params.q, params.target_sum,
                                             asymptotic=params.asymptotic)
    ctx.run.write_table("recurrence.csv", [{**recurrence.witness, **recurrence.details}])

    r = theta / 2 if params.constant_r is None else params.constant_r
    constant = check_constant_data(model, ctx.kernel, r, params.constant_t, params.constant_tol, ctx.options())
    return [jump, recurrence, constant]


def scenario_verify_assumptions(ctx: ScenarioContext) -> List[CheckReport]:
    params = ctx.config.scenario_params()
    report = check_assumptions(ctx.model, ctx.kernel, params.samples, ctx.seed)
    rows = [{"assumption": name, "verdict": r.verdict.value, "margin": r.margin}
            for name, r in report.checks.items()]
    ctx.run.write_table("assumptions.csv", rows)
    ctx.notes.append(
        f"constants: theta={report.theta}, l_theta={report.lipschitz_theta}, p={report.p}, "
        f"q={report.q}, delta={report.delta}, b={report.b_kernel}"
    )
    reports = list(report.checks.values())
    if params.truncation_radius is not None:
        model_n, kernel_n, _ = approximating_model(ctx.model, ctx.kernel, params.truncation_radius)
        reports.append(check_approximation(ctx.model, ctx.kernel, model_n, kernel_n, seed=ctx.seed))
    return reports


SCENARIOS: Dict[str, tuple] = {
    "simulate": ("Evolve one initial datum; tube, linear bound, regularity and positivity checks",
                 scenario_simulate),
    "compare": ("Comparison principle on ordered pairs, equivariance, monotonicity, truncated sandwich",
                scenario_compare),
    "speeds": ("Spreading speeds c*_t(xi) by Weinberger bisection, oracle and drift-in-front checks",
               scenario_speeds),
    "hair_trigger": ("Moving-window minimum of a bump solution against theta - eps", scenario_hair_trigger),
    "subsolution": ("Gaussian sub-solution certificate and domination run", scenario_subsolution),
    "lemmas": ("Jump-average integral, step recurrence divergence and constant-data oracle", scenario_lemmas),
    "verify_assumptions": ("Verdicts for the structural assumptions on model and kernel",
                           scenario_verify_assumptions),
}


def list_scenarios() -> str:
    width = max(len(name) for name in SCENARIOS)
    return "\n".join(f"{name.ljust(width)}  {desc}" for name, (desc, _) in SCENARIOS.items())


def build_context(config: ExperimentConfig, run: RunDirectory) -> ScenarioContext:
    """
    Grid, kernels and model for a config.

    Raises:
        ConfigError: the kernels or the model cannot be built on the grid
    """
    grid = config.grid.to_grid()
    try:
        kernels = {}
        for name, spec in config.kernels.items():
            spec = spec if spec.label else spec.model_copy(update={"label": name})
            kernels[name] = build_kernel(spec, grid)
        model = build_model(config, kernels)
    except (ToolkitError, ValueError) as exc:
        raise ConfigError(f"cannot build the experiment: {exc}") from exc
    seed = settings.default_seed if config.seed is None else config.seed
    return ScenarioContext(config=config, grid=grid, kernels=kernels, model=model, run=run, seed=seed)


def run_experiment(config: ExperimentConfig, output_root: Optional[Path] = None) -> RunOutcome:
    """
    Execute the configured scenario and write its artifacts.

    Exit status 0 when every check holds, 1 on a failed check or a toolkit
    error during the run, 2 when the experiment cannot be built. The
    manifest is written in every case.
    """
    if output_root is not None:
        run_root = Path(output_root) / config.name
    elif config.output_dir is not None:
        run_root = Path(config.output_dir)
    else:
        run_root = Path(settings.output_dir) / config.name
    run = RunDirectory(run_root)
    resolved = config.model_dump(mode="json")
    seed = settings.default_seed if config.seed is None else config.seed
    reports: List[CheckReport] = []
    # anything escaping below still leaves a manifest marked as failed
    status, error = 1, None
    try:
        ctx = build_context(config, run)
        _, scenario = SCENARIOS[config.scenario]
        logger.info(f"Running scenario {config.scenario} -> {run.root}")
        reports = scenario(ctx)
        status = 0 if all(r.passed for r in reports) else 1
        run.write_text("report.txt", report_text(f"{config.name} ({config.scenario})", reports, ctx.notes))
    except ConfigError as exc:
        status, error = 2, str(exc)
        logger.error(f"Configuration error: {exc}")
    except ToolkitError as exc:
        status, error = 1, f"{type(exc).__name__}: {exc}"
        logger.error(f"Scenario {config.scenario} aborted: {error}")
        run.write_text("report.txt", report_text(f"{config.name} ({config.scenario})", reports, [error]))
    finally:
        write_manifest(run, resolved, status, seed, error)
    failed = [r.check for r in reports if not r.passed]
    if failed:
        logger.warning(f"Failed checks: {', '.join(failed)}")
    return RunOutcome(exit_status=status, run_dir=run.root, reports=reports)
