from app.diagnostics.fronts import FrontSpeed, front_speed, level_set_position
from app.diagnostics.hair_trigger import MetricSeries, hair_trigger_metric, hair_trigger_verdict
from app.diagnostics.lemmas import (
    check_avg_jump_lemma,
    check_constant_data,
    check_recurrence_divergence,
    constant_data_oracle,
)

__all__ = [
    "FrontSpeed",
    "MetricSeries",
    "check_avg_jump_lemma",
    "check_constant_data",
    "check_recurrence_divergence",
    "constant_data_oracle",
    "front_speed",
    "hair_trigger_metric",
    "hair_trigger_verdict",
    "level_set_position",
]
