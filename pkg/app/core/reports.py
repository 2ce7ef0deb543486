"""Shared verdict and report types."""
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class Verdict(str, Enum):
    """Outcome of a property check."""
    HOLDS = "holds"
    FAILS = "fails"
    NOT_APPLICABLE = "not_applicable"


class CheckReport(BaseModel):
    """Result of one numerical property check."""

    check: str = Field(..., description="Name of the property checked")
    verdict: Verdict
    margin: Optional[float] = Field(None, description="Worst signed margin (>= 0 means satisfied)")
    witness: Dict[str, Any] = Field(default_factory=dict, description="Reproducible witness data")
    details: Dict[str, Any] = Field(default_factory=dict)
    table: List[Dict[str, Any]] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        """Not-applicable checks do not count as failures."""
        return self.verdict != Verdict.FAILS

    def to_text(self) -> str:
        """Render as `check: verdict: witness`."""
        witness = ", ".join(f"{k}={_fmt(v)}" for k, v in self.witness.items())
        margin = "" if self.margin is None else f" (margin={_fmt(self.margin)})"
        return f"{self.check}: {self.verdict.value}{margin}: {witness}"


def verdict_of(ok: bool) -> Verdict:
    return Verdict.HOLDS if ok else Verdict.FAILS


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return "(" + ", ".join(_fmt(v) for v in value) + ")"
    return str(value)
