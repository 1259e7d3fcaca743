"""Harmonic metrics of Higgs bundles on the Poincare disk."""

from .bundle import (
    DifferentialTuple,
    HiggsMatrixField,
    HolomorphicChain,
    MetricField,
    PairingMatrix,
    PDViolation,
    companion_field,
    companion_higgs,
    weak_domination_margins,
)
from .grid import PolarGrid
from .hyperbolic import MobiusMap, a_kn, hx_field, hx_metric
from .solver import SolverConfig, SolveReport, exhaust, hitchin_residual, solve_dirichlet, solve_toda_chain
from .estimators import CurvatureSolver, ExhaustionEstimator, HitchinDirichletSolver, TodaChainSolver

__version__ = "0.1.0"

__all__ = [
    "DifferentialTuple",
    "HiggsMatrixField",
    "HolomorphicChain",
    "MetricField",
    "PairingMatrix",
    "PDViolation",
    "companion_field",
    "companion_higgs",
    "weak_domination_margins",
    "PolarGrid",
    "MobiusMap",
    "a_kn",
    "hx_field",
    "hx_metric",
    "SolverConfig",
    "SolveReport",
    "exhaust",
    "hitchin_residual",
    "solve_dirichlet",
    "solve_toda_chain",
    "CurvatureSolver",
    "ExhaustionEstimator",
    "HitchinDirichletSolver",
    "TodaChainSolver",
]
