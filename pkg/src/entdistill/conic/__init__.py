"""Conic solvers: dense SDPs and exact rational LPs."""

from .lp import IncrementalLp, LpSolution, RationalLp, solve_lp_exact
from .sdp import Affine, SdpProblem, SdpSolution, SolverError, solve_sdp

__all__ = [
    "Affine",
    "SdpProblem",
    "SdpSolution",
    "SolverError",
    "solve_sdp",
    "RationalLp",
    "LpSolution",
    "solve_lp_exact",
    "IncrementalLp",
]
