"""Experiment runner: config schemas and the scenario registry."""
from app.cli.scenarios import SCENARIOS, RunOutcome, list_scenarios, run_experiment
from app.cli.schemas import ExperimentConfig, load_config

__all__ = ["SCENARIOS", "ExperimentConfig", "RunOutcome", "list_scenarios", "load_config", "run_experiment"]
