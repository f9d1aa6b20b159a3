"""Numerical tolerances and solver settings, shared across the library.

Every operation that needs a threshold takes a :class:`Tolerances` instance
(defaulting to :data:`DEFAULTS`) so that nothing is hard-coded at call sites.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """Knobs for integration, quadrature and rank decisions.

    Attributes
    ----------
    rtol, atol : float
        Relative/absolute tolerance of the adaptive Runge-Kutta 5(4) pair.
    ivp_method : str
        scipy ``solve_ivp`` method name; an embedded RK pair is assumed.
    signature_tol : float
        Acceptance threshold for the algebraic identities a signature
        matrix must satisfy.
    hermitian_tol : float
        Threshold for Hermiticity of the real/imaginary potential parts.
    rank_rtol : float
        Relative singular-value cutoff for kernel dimension counts.
    subspace_rank_rtol : float
        Relative cutoff for rank decisions in finite-interval checks.
    angle_tol : float
        Principal-angle threshold for subspace equality.
    completion_tol : float
        Acceptance threshold for the completion identity ``Y* J X = J``.
    cond_limit : float
        Condition-number limit above which a boundary matrix is reported
        singular instead of being inverted.
    quad_points : int
        Sample count for composite Simpson quadrature (kept of the form
        2**k + 1 so grid halving is exact).
    ortho_step : float
        Length of integration segments between QR re-orthonormalizations
        in subspace continuation.
    tail_fraction : float
        Fraction of the window used for decay-ratio and growth-exponent
        estimates.
    fundamental_residual_tol : float
        Relative tolerance of the a-posteriori collocation residual of a
        fundamental solution (limited by dense-output interpolation).
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    ivp_method: str = "RK45"
    signature_tol: float = 1e-12
    hermitian_tol: float = 1e-14
    rank_rtol: float = 1e-10
    subspace_rank_rtol: float = 1e-8
    angle_tol: float = 1e-8
    completion_tol: float = 1e-10
    cond_limit: float = 1e12
    quad_points: int = 4097
    ortho_step: float = 2.0
    tail_fraction: float = 0.4
    fundamental_residual_tol: float = 1e-5

    def with_(self, **kwargs) -> "Tolerances":
        """Return a copy with the given fields replaced."""
        return replace(self, **kwargs)


DEFAULTS = Tolerances()
