"""Numerics for non-selfadjoint first-order systems J y' + Q(x) y = lambda y.

Computes fundamental and square-integrable (Weyl) solutions on the
half-line, the associated matrix Weyl function and its Schur-class Cayley
transform, counts decaying solutions, and checks the finite-interval
dimension bookkeeping of the underlying operator pairs.
"""

from .config import DEFAULTS, Tolerances
from .core import (
    ConstantPotential,
    DiracExpression,
    FiniteInterval,
    FundamentalSolution,
    HalfLine,
    IntegrationFailure,
    NlsOffdiagPotential,
    Potential,
    SampledPotential,
    ScaledProfilePotential,
    SignatureMatrix,
    SymmetryReport,
    WholeLine,
    classify,
    kappa,
    l2_tail_norm,
    lagrange_residual,
    make_potential,
    propagate,
)

__version__ = "0.1.0"
