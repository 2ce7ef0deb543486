"""Weinberger recursion, spreading speeds and the spreading set."""
from app.spreading.profile import Profile, embed_planar, make_phi, profile_lattice, step_profile
from app.spreading.speeds import (
    SpreadingResult,
    check_drift_in_front,
    check_profile_stability,
    estimate_cstar,
    linear_spreading_speed,
    probe,
    upsilon_contains,
    upsilon_polygon,
)
from app.spreading.weinberger import WeinbergerProblem, weinberger_limit, weinberger_step

__all__ = [
    "Profile",
    "SpreadingResult",
    "WeinbergerProblem",
    "check_drift_in_front",
    "check_profile_stability",
    "embed_planar",
    "estimate_cstar",
    "linear_spreading_speed",
    "make_phi",
    "probe",
    "profile_lattice",
    "step_profile",
    "upsilon_contains",
    "upsilon_polygon",
    "weinberger_limit",
    "weinberger_step",
]
