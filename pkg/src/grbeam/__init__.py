"""General-rank multiuser downlink beamforming with shaping constraints."""

from .ostbc import build_code, encode, equalize
from .pipeline import BeamformingSolution, SolveOptions, solve_downlink
from .scenario import Scenario, ShapingConstraint, User, example1, example2, example4

__version__ = "0.1.0"

__all__ = [
    "BeamformingSolution", "Scenario", "ShapingConstraint", "SolveOptions", "User",
    "build_code", "encode", "equalize", "example1", "example2", "example4", "solve_downlink",
]
