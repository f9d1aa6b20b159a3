"""Closed forms for constant-coefficient systems.

For constant Q the system y' = J^{-1}(lambda I - Q) y is solved exactly by a
matrix exponential, and the square-integrable subspace on the half-line is
spanned by the eigenvectors whose eigenvalues have negative real part.
These closed forms are the independent cross-checks for the truncation
engine and the growth-exponent counters; they never touch the adaptive
integrator.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .boundary import Completion
from .core import SignatureMatrix

__all__ = [
    "constant_coefficient_matrix",
    "constant_fundamental",
    "decaying_modes",
    "constant_weyl_function",
    "constant_growth_exponents",
]


def constant_coefficient_matrix(J: SignatureMatrix, q0, lam: complex) -> np.ndarray:
    """A = J^{-1}(lambda I - Q0) of the explicit first-order form."""
    q0 = np.asarray(q0, dtype=complex)
    return J.inv @ (lam * np.eye(J.n) - q0)


def constant_fundamental(J: SignatureMatrix, q0, lam: complex, x: float) -> np.ndarray:
    """Y(x) = exp(x A) for the constant-coefficient system."""
    return expm(x * constant_coefficient_matrix(J, q0, lam))


def decaying_modes(J: SignatureMatrix, q0, lam: complex,
                   margin: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors of A with eigenvalue real part below -margin.

    Returns (basis, exponents); the basis columns span the initial values of
    solutions decaying at +infinity.  Raises if any eigenvalue sits within
    the margin of the imaginary axis, since then membership is undecided.
    """
    a = constant_coefficient_matrix(J, q0, lam)
    w, v = np.linalg.eig(a)
    if np.any(np.abs(w.real) <= margin):
        raise ValueError(
            f"marginal exponent {w[np.argmin(np.abs(w.real))]:.6g}; "
            "no clean decaying/growing split")
    sel = w.real < 0
    order = np.argsort(w.real[sel])
    return v[:, sel][:, order], w[sel][order]


def constant_weyl_function(J: SignatureMatrix, q0, comp: Completion,
                           lam: complex) -> np.ndarray:
    """Weyl function of a constant-coefficient half-line system.

    Closed form from the decaying eigenbasis V:
    M = (C3 V1 + C4 V2)(C1 V1 + C2 V2)^{-1}; requires exactly p decaying
    modes and an invertible boundary combination.
    """
    p = comp.p
    basis, _ = decaying_modes(J, q0, lam)
    if basis.shape[1] != p:
        raise ValueError(
            f"{basis.shape[1]} decaying modes, need p = {p}")
    c1, c2, c3, c4 = comp.blocks("B")
    den = c1 @ basis[:p] + c2 @ basis[p:]
    num = c3 @ basis[:p] + c4 @ basis[p:]
    return num @ np.linalg.inv(den)


def constant_growth_exponents(J: SignatureMatrix, q0, lam: complex) -> np.ndarray:
    """All exponent real parts, sorted descending."""
    w = np.linalg.eigvals(constant_coefficient_matrix(J, q0, lam))
    return np.sort(w.real)[::-1]
