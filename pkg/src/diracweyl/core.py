"""First-order systems J y' + Q(x) y = lambda y: representation and integration.

The building blocks are a constant skew-unitary signature matrix J, a locally
integrable potential Q(x) and an interval descriptor.  On top of those this
module provides the fundamental-solution integrator, the symmetry classifier,
the Lagrange-identity residual and the quadrature helpers used everywhere
else in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.interpolate import CubicSpline

from .config import DEFAULTS, Tolerances

__all__ = [
    "SignatureMatrix",
    "kappa",
    "FiniteInterval",
    "HalfLine",
    "WholeLine",
    "Potential",
    "ConstantPotential",
    "ScaledProfilePotential",
    "NlsOffdiagPotential",
    "SampledPotential",
    "make_potential",
    "DiracExpression",
    "SymmetryReport",
    "classify",
    "FundamentalSolution",
    "propagate",
    "IntegrationFailure",
    "lagrange_residual",
    "l2_tail_norm",
    "Quadrature",
    "simpson_matrix",
    "flip_conjugation_matrix",
]


# ---------------------------------------------------------------------------
# signature matrices
# ---------------------------------------------------------------------------

class SignatureMatrix:
    """Constant matrix J with J* = J^{-1} = -J.

    Parameters
    ----------
    matrix : (n, n) array_like
        The candidate signature matrix; validated on construction.

    Raises
    ------
    ValueError
        If the skew-adjointness or unitarity identity fails beyond
        ``tol.signature_tol``.
    """

    def __init__(self, matrix, tol: Tolerances = DEFAULTS):
        mat = np.array(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"signature matrix must be square, got {mat.shape}")
        n = mat.shape[0]
        skew = np.linalg.norm(mat.conj().T + mat, 2)
        unit = np.linalg.norm(mat.conj().T @ mat - np.eye(n), 2)
        if skew > tol.signature_tol or unit > tol.signature_tol:
            raise ValueError(
                "not a signature matrix: ||J*+J||=%.3e, ||J*J-I||=%.3e "
                "(tol %.1e)" % (skew, unit, tol.signature_tol)
            )
        self.mat = mat
        self.mat.setflags(write=False)
        self.n = n

    @property
    def inv(self) -> np.ndarray:
        """J^{-1}, which equals -J."""
        return -self.mat

    # -- canonical block forms -------------------------------------------

    @classmethod
    def canonical(cls, p: int) -> "SignatureMatrix":
        """Off-diagonal form [[0, -I_p], [I_p, 0]] on C^p (+) C^p."""
        z = np.zeros((p, p))
        i = np.eye(p)
        return cls(np.block([[z, -i], [i, z]]))

    @classmethod
    def i_diag(cls, p: int) -> "SignatureMatrix":
        """Diagonal form i*diag(I_p, -I_p)."""
        return cls(1j * np.diag(np.r_[np.ones(p), -np.ones(p)]))

    @classmethod
    def diag_mp(cls, p: int) -> "SignatureMatrix":
        """Diagonal form diag(-i I_p, i I_p)."""
        return cls(np.diag(np.r_[-1j * np.ones(p), 1j * np.ones(p)]))

    _FORMS = {"canonical": "canonical", "i_diag": "i_diag", "diag_mp": "diag_mp"}

    @classmethod
    def from_name(cls, name: str, p: int) -> "SignatureMatrix":
        try:
            return getattr(cls, cls._FORMS[name])(p)
        except KeyError:
            raise ValueError(
                f"unknown signature form {name!r}; known: {sorted(cls._FORMS)}"
            ) from None

    def __repr__(self):
        return f"SignatureMatrix(n={self.n})"


def kappa(J: SignatureMatrix, tol: Tolerances = DEFAULTS) -> tuple[int, int]:
    """Kernel dimensions (kappa_+, kappa_-) of J + iI and J - iI.

    Computed from singular values with relative threshold
    ``tol.rank_rtol * ||J||``; the two counts always sum to n.
    """
    thr = tol.rank_rtol * np.linalg.norm(J.mat, 2)
    k_plus = int(np.sum(np.linalg.svd(J.mat + 1j * np.eye(J.n), compute_uv=False) < thr))
    k_minus = int(np.sum(np.linalg.svd(J.mat - 1j * np.eye(J.n), compute_uv=False) < thr))
    if k_plus + k_minus != J.n:
        raise ValueError(f"kappa counts {k_plus}+{k_minus} != n={J.n}")
    return k_plus, k_minus


def flip_conjugation_matrix(n: int) -> np.ndarray:
    """Block swap U = [[0, I_p], [I_p, 0]]; the conjugation acts as U conj(.)."""
    if n % 2:
        raise ValueError("flip conjugation needs even dimension")
    p = n // 2
    z = np.zeros((p, p))
    i = np.eye(p)
    return np.block([[z, i], [i, z]])


# ---------------------------------------------------------------------------
# interval descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteInterval:
    """[0, length] with both endpoints regular."""
    length: float

    @property
    def x_max(self) -> float:
        return self.length

    @property
    def x_min(self) -> float:
        return 0.0


@dataclass(frozen=True)
class HalfLine:
    """[0, inf), truncated at l_max for numerics."""
    l_max: float = 160.0

    @property
    def x_max(self) -> float:
        return self.l_max

    @property
    def x_min(self) -> float:
        return 0.0


@dataclass(frozen=True)
class WholeLine:
    """(-inf, inf), truncated at +-l_max."""
    l_max: float = 80.0

    @property
    def x_max(self) -> float:
        return self.l_max

    @property
    def x_min(self) -> float:
        return -self.l_max


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

class Potential:
    """Matrix-valued potential Q(x).

    Subclasses provide ``__call__`` for a scalar point and may override
    ``batch`` with a vectorized evaluation.  The Hermitian split
    Q = Q1 + i Q2 with Q1 = (Q+Q*)/2 and Q2 = (Q-Q*)/(2i) is derived here.
    """

    n: int
    family: str = "custom"
    params: dict = {}
    breakpoints: tuple = ()

    def __call__(self, x: float) -> np.ndarray:
        raise NotImplementedError

    def batch(self, xs: np.ndarray) -> np.ndarray:
        """Evaluate at many points; shape (len(xs), n, n)."""
        return np.stack([self(float(x)) for x in np.asarray(xs, dtype=float)])

    def q1(self, x: float) -> np.ndarray:
        q = self(x)
        return (q + q.conj().T) / 2.0

    def q2(self, x: float) -> np.ndarray:
        q = self(x)
        return (q - q.conj().T) / 2j

    def q2_batch(self, xs: np.ndarray) -> np.ndarray:
        qs = self.batch(xs)
        return (qs - qs.conj().transpose(0, 2, 1)) / 2j

    def validate_split(self, xs, tol: Tolerances = DEFAULTS) -> None:
        """Assert Hermiticity of Q1, Q2 at the given probe points."""
        for x in xs:
            for part in (self.q1(x), self.q2(x)):
                dev = np.linalg.norm(part - part.conj().T, 2)
                if dev > tol.hermitian_tol * max(1.0, np.linalg.norm(part, 2)):
                    raise AssertionError(
                        f"Hermitian split violated at x={x}: deviation {dev:.3e}"
                    )

    def imag_bounds(self, window: tuple[float, float], num: int = 201) -> tuple[float, float]:
        """Extremal eigenvalues (alpha, beta) of Q2(x) over the window.

        Sampled on ``num`` points; subclasses with exact structure override.
        """
        xs = np.linspace(window[0], window[1], num)
        lo, hi = np.inf, -np.inf
        for q2 in self.q2_batch(xs):
            w = np.linalg.eigvalsh(q2)
            lo = min(lo, w[0])
            hi = max(hi, w[-1])
        return float(lo), float(hi)

    def decays_to_zero(self) -> bool:
        """Whether Q(x) -> 0 for large |x| (used to extend bound sampling)."""
        return False


class ConstantPotential(Potential):
    """Q(x) identically equal to a fixed matrix."""

    def __init__(self, q0):
        q0 = np.asarray(q0, dtype=complex)
        if q0.ndim != 2 or q0.shape[0] != q0.shape[1]:
            raise ValueError("constant potential must be a square matrix")
        self.q0 = q0
        self.n = q0.shape[0]
        self.family = "zero" if not q0.any() else "constant"
        self.params = {"q0": q0}

    def __call__(self, x):
        return self.q0

    def batch(self, xs):
        return np.broadcast_to(self.q0, (len(xs),) + self.q0.shape).copy()

    def imag_bounds(self, window, num=201):
        w = np.linalg.eigvalsh((self.q0 - self.q0.conj().T) / 2j)
        return float(w[0]), float(w[-1])


_PROFILES = {
    "exp_decay": lambda xs, p: np.exp(-p.get("mu", 1.0) * xs),
    "exp_decay_abs": lambda xs, p: np.exp(-p.get("mu", 1.0) * np.abs(xs)),
    "gauss_bump": lambda xs, p: np.exp(
        -(((xs - p.get("center", 0.0)) / p.get("width", 1.0)) ** 2)
    ),
}


class ScaledProfilePotential(Potential):
    """Q(x) = f(x) * Q0 for a real scalar profile f."""

    def __init__(self, q0, profile: str, **profile_params):
        q0 = np.asarray(q0, dtype=complex)
        if profile not in _PROFILES:
            raise ValueError(f"unknown profile {profile!r}; known: {sorted(_PROFILES)}")
        self.q0 = q0
        self.n = q0.shape[0]
        self.profile = profile
        self.family = profile
        self.params = {"q0": q0, **profile_params}

    def _factor(self, xs):
        return _PROFILES[self.profile](np.asarray(xs, dtype=float), self.params)

    def __call__(self, x):
        return self._factor(x) * self.q0

    def batch(self, xs):
        return np.einsum("m,ij->mij", self._factor(xs), self.q0)

    def imag_bounds(self, window, num=201):
        w = np.linalg.eigvalsh((self.q0 - self.q0.conj().T) / 2j)
        f = self._factor(np.linspace(window[0], window[1], num))
        cands = np.concatenate([np.outer([f.min(), f.max(), 0.0], w).ravel()])
        return float(cands.min()), float(cands.max())

    def decays_to_zero(self):
        return True


class NlsOffdiagPotential(Potential):
    """Off-diagonal shape i*[[0, -q(x)], [-q(x)*, 0]] built from symmetric q.

    ``q(x) = f(x) * q0`` with a p x p complex symmetric base matrix q0 and a
    real scalar profile f, so the expression is compatible with the flip
    conjugation whenever q0 = q0^T.
    """

    def __init__(self, q0, profile: str = "exp_decay", **profile_params):
        q0 = np.asarray(q0, dtype=complex)
        if q0.ndim != 2 or q0.shape[0] != q0.shape[1]:
            raise ValueError("base matrix q0 must be square")
        if profile not in _PROFILES:
            raise ValueError(f"unknown profile {profile!r}; known: {sorted(_PROFILES)}")
        self.q0 = q0
        self.p = q0.shape[0]
        self.n = 2 * self.p
        self.profile = profile
        self.family = "nls_offdiag"
        self.params = {"q0": q0, "profile": profile, **profile_params}

    def _factor(self, xs):
        return _PROFILES[self.profile](np.asarray(xs, dtype=float), self.params)

    def _shape(self) -> np.ndarray:
        z = np.zeros((self.p, self.p))
        return 1j * np.block([[z, -self.q0], [-self.q0.conj().T, z]])

    def __call__(self, x):
        return self._factor(x) * self._shape()

    def batch(self, xs):
        return np.einsum("m,ij->mij", self._factor(xs), self._shape())

    def imag_bounds(self, window, num=201):
        # Q2(x) = f(x) * [[0, -q0], [-q0*, 0]]; eigenvalues are +- singular
        # values of q0 scaled by f.
        smax = np.linalg.norm(self.q0, 2)
        f = self._factor(np.linspace(window[0], window[1], num))
        hi = max(f.max() * smax, 0.0)
        return -hi, hi

    def decays_to_zero(self):
        return True


class SampledPotential(Potential):
    """Q given on a grid, interpolated entrywise with cubic splines.

    Declared breakpoints split the interpolation into independent pieces and
    force the integrator to restart a step there, so jump discontinuities
    stay where the caller put them.
    """

    def __init__(self, xs, qs, breakpoints: Sequence[float] = ()):
        xs = np.asarray(xs, dtype=float)
        qs = np.asarray(qs, dtype=complex)
        if xs.ndim != 1 or np.any(np.diff(xs) <= 0):
            raise ValueError("sample abscissas must be strictly increasing")
        if qs.shape != (len(xs), qs.shape[1], qs.shape[1]):
            raise ValueError("samples must have shape (len(xs), n, n)")
        if not np.all(np.isfinite(qs)):
            raise ValueError("non-finite potential samples rejected at ingestion")
        self.xs = xs
        self.n = qs.shape[1]
        self.family = "sampled"
        self.params = {"xs": xs, "qs": qs, "breakpoints": tuple(breakpoints)}
        self.breakpoints = tuple(float(b) for b in breakpoints)
        edges = [xs[0], *self.breakpoints, xs[-1]]
        self._pieces = []
        for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
            sel = (xs >= a - 1e-12) & (xs <= b + 1e-12)
            if k > 0:
                sel &= xs > a + 1e-12  # the breakpoint sample belongs left
            if np.sum(sel) < 4:
                raise ValueError(f"need >= 4 samples per piece, piece [{a}, {b}]")
            self._pieces.append((a, b, CubicSpline(xs[sel], qs[sel], axis=0)))

    def __call__(self, x):
        if x < self.xs[0] - 1e-9 or x > self.xs[-1] + 1e-9:
            raise ValueError(f"x={x} outside sampled range [{self.xs[0]}, {self.xs[-1]}]")
        for a, b, spl in self._pieces:
            if x <= b or (a, b, spl) is self._pieces[-1]:
                return np.asarray(spl(x), dtype=complex)
        raise AssertionError("unreachable")

    def imag_bounds(self, window, num=201):
        lo = max(window[0], self.xs[0])
        hi = min(window[1], self.xs[-1])
        return super().imag_bounds((lo, hi), num)


def make_potential(family: str, n: Optional[int] = None, **params) -> Potential:
    """Build a registered potential family by name.

    Families: ``zero``, ``constant``, ``exp_decay``, ``nls_offdiag``,
    ``gauss_bump``, ``sampled``.
    """
    if family == "zero":
        if n is None:
            raise ValueError("zero family needs the dimension n")
        return ConstantPotential(np.zeros((n, n)))
    if family == "constant":
        return ConstantPotential(params["q0"])
    if family in ("exp_decay", "exp_decay_abs", "gauss_bump"):
        q0 = params.pop("q0")
        return ScaledProfilePotential(q0, family, **params)
    if family == "nls_offdiag":
        q0 = params.pop("q0")
        return NlsOffdiagPotential(q0, **params)
    if family == "sampled":
        return SampledPotential(params["xs"], params["qs"],
                                params.get("breakpoints", ()))
    raise ValueError(f"unknown potential family {family!r}")


# ---------------------------------------------------------------------------
# the differential expression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiracExpression:
    """The expression J y' + Q(x) y on a declared interval.

    Instances are immutable and safe to share between threads.
    """

    J: SignatureMatrix
    Q: Potential
    interval: FiniteInterval | HalfLine | WholeLine = field(default_factory=HalfLine)

    def __post_init__(self):
        if self.J.n != self.Q.n:
            raise ValueError(f"dimension mismatch: J is {self.J.n}, Q is {self.Q.n}")
        if isinstance(self.Q, SampledPotential):
            if self.interval.x_min < self.Q.xs[0] - 1e-9 or \
                    self.interval.x_max > self.Q.xs[-1] + 1e-9:
                raise ValueError("interval extends beyond the sampled potential range")

    @property
    def n(self) -> int:
        return self.J.n

    def adjoint(self) -> "DiracExpression":
        """The expression with Q replaced by Q*."""
        return DiracExpression(self.J, _AdjointPotential(self.Q), self.interval)

    def coefficient(self, x: float, lam: complex) -> np.ndarray:
        """A(x) = J^{-1} (lambda I - Q(x)) of the explicit form y' = A(x) y."""
        return self.J.inv @ (lam * np.eye(self.n) - self.Q(x))

    def apply(self, x: float, y: np.ndarray, dy: np.ndarray) -> np.ndarray:
        """Evaluate J dy + Q(x) y at a point."""
        return self.J.mat @ dy + self.Q(x) @ y

    def imag_bounds(self, num: int = 201) -> tuple[float, float]:
        """Bounds (alpha, beta) of the imaginary part over the working window."""
        return self.Q.imag_bounds((self.interval.x_min, self.interval.x_max), num)


class _AdjointPotential(Potential):
    """Pointwise adjoint of a wrapped potential."""

    def __init__(self, base: Potential):
        self.base = base
        self.n = base.n
        self.family = base.family + "*"
        self.params = base.params
        self.breakpoints = base.breakpoints

    def __call__(self, x):
        return self.base(x).conj().T

    def batch(self, xs):
        return self.base.batch(xs).conj().transpose(0, 2, 1)

    def imag_bounds(self, window, num=201):
        lo, hi = self.base.imag_bounds(window, num)
        return -hi, -lo

    def decays_to_zero(self):
        return self.base.decays_to_zero()


# ---------------------------------------------------------------------------
# symmetry classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryReport:
    """Outcome of :func:`classify`."""

    formally_selfadjoint: bool
    j_symmetric: bool
    almost_fsa: bool
    alpha_q: float
    beta_q: float
    p: Optional[int]
    reasons: dict


def classify(expr: DiracExpression, tol: float = 1e-10,
             probe_points: int = 201) -> SymmetryReport:
    """Classify the symmetry type of an expression.

    ``formally_selfadjoint`` holds when Q(x) = Q*(x) at every probe point;
    ``j_symmetric`` when the flip conjugation U conj(.) with
    U = [[0, I_p], [I_p, 0]] fixes J and maps Q to Q*; ``almost_fsa`` when
    the imaginary part is bounded on the window, in which case its extremal
    eigenvalue bounds (alpha_q, beta_q) are reported.
    """
    lo, hi = expr.interval.x_min, expr.interval.x_max
    xs = np.linspace(lo, hi, probe_points)
    qs = expr.Q.batch(xs)

    fsa_dev = float(np.max(np.linalg.norm(qs - qs.conj().transpose(0, 2, 1), axis=(1, 2))))
    formally_selfadjoint = fsa_dev <= tol

    reasons = {}
    if expr.n % 2:
        j_symmetric = False
        reasons["j_symmetric"] = "n odd"
    else:
        u = flip_conjugation_matrix(expr.n)
        j_dev = np.linalg.norm(u @ expr.J.mat.conj() @ u - expr.J.mat, 2)
        if j_dev > tol:
            j_symmetric = False
            reasons["j_symmetric"] = "J not invariant under the flip conjugation"
        else:
            q_dev = float(np.max(np.linalg.norm(
                np.einsum("ab,mbc,cd->mad", u, qs.conj(), u)
                - qs.conj().transpose(0, 2, 1), axis=(1, 2))))
            j_symmetric = q_dev <= tol
            if not j_symmetric:
                reasons["j_symmetric"] = f"potential deviation {q_dev:.3e}"

    alpha_q, beta_q = expr.imag_bounds(probe_points)
    almost_fsa = math.isfinite(alpha_q) and math.isfinite(beta_q)
    return SymmetryReport(
        formally_selfadjoint=formally_selfadjoint,
        j_symmetric=j_symmetric,
        almost_fsa=almost_fsa,
        alpha_q=alpha_q,
        beta_q=beta_q,
        p=expr.n // 2 if expr.n % 2 == 0 else None,
        reasons=reasons,
    )


# ---------------------------------------------------------------------------
# fundamental solutions
# ---------------------------------------------------------------------------

class IntegrationFailure(RuntimeError):
    """Adaptive integration broke down (step-size underflow or blowup)."""

    def __init__(self, message: str, last_x: float):
        super().__init__(f"{message} (last reached x = {last_x:.6g})")
        self.last_x = last_x


@dataclass
class FundamentalSolution:
    """Matrix solution Y(x) of Y' = A(x) Y with Y(0) = I.

    ``grid`` is ascending; ``values`` holds Y at the grid points; ``sol``
    evaluates the dense output anywhere between 0 and ``x_end``.
    """

    lam: complex
    x_end: float
    grid: np.ndarray
    values: np.ndarray
    expr: DiracExpression
    _segments: list
    steps: int
    nfev: int
    rejected_estimate: int
    max_condition: float

    @property
    def n(self) -> int:
        return self.expr.n

    def __call__(self, x):
        """Evaluate Y at scalar or array abscissas; shape (..., n, n)."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        lo_all, hi_all = sorted((0.0, self.x_end))
        if np.any(xs < lo_all - 1e-9) or np.any(xs > hi_all + 1e-9):
            raise ValueError("evaluation point outside the integrated range")
        xs = np.clip(xs, lo_all, hi_all)
        out = np.empty((len(xs), self.n, self.n), dtype=complex)
        for (a, b, sol) in self._segments:
            lo, hi = min(a, b), max(a, b)
            sel = (xs >= lo - 1e-12) & (xs <= hi + 1e-12)
            if np.any(sel):
                out[sel] = sol(xs[sel]).T.reshape(-1, self.n, self.n)
        if np.ndim(x) == 0:
            return out[0]
        return out

    def column(self, j: int):
        """Value/derivative callables of column j (derivative via the ODE)."""
        def value(x):
            y = self(x)
            return y[..., :, j]

        def derivative(x):
            xs = np.atleast_1d(np.asarray(x, dtype=float))
            ys = self(xs)[..., :, j]
            out = np.stack([
                self.expr.coefficient(float(xx), self.lam) @ yy
                for xx, yy in zip(xs, ys)
            ])
            return out[0] if np.ndim(x) == 0 else out

        return value, derivative

    def ode_residual(self, n_probe: int = 9, h: float = 1e-4) -> float:
        """Max relative collocation residual ||Y'_fd - A Y|| at interior points.

        The derivative comes from central differences of the dense output, so
        the attainable floor is set by interpolation error, not the ODE.
        """
        lo, hi = sorted((0.0, self.x_end))
        xs = np.linspace(lo + h, hi - h, n_probe)
        worst = 0.0
        for x in xs:
            yd = (self(x + h) - self(x - h)) / (2 * h)
            a = self.expr.coefficient(float(x), self.lam)
            y = self(x)
            scale = (1.0 + np.linalg.norm(a, 2)) * max(np.linalg.norm(y, 2), 1e-30)
            worst = max(worst, np.linalg.norm(yd - a @ y, 2) / scale)
        return worst

    def to_table(self) -> tuple[list[str], np.ndarray]:
        """Columnar dump (x, Re/Im of every entry), row per grid point."""
        n = self.n
        header = ["x"]
        for i in range(n):
            for j in range(n):
                header += [f"re_Y_{i + 1}{j + 1}", f"im_Y_{i + 1}{j + 1}"]
        rows = np.empty((len(self.grid), 1 + 2 * n * n))
        rows[:, 0] = self.grid
        flat = self.values.reshape(len(self.grid), n * n)
        rows[:, 1::2] = flat.real
        rows[:, 2::2] = flat.imag
        return header, rows


def _integrate_matrix(expr, lam, x0, x1, y0, tol: Tolerances):
    """One solve_ivp call for the matrix system on [x0, x1], x1 != x0."""
    n = expr.n
    jinv = expr.J.inv
    eye = np.eye(n)
    pot = expr.Q
    # keep endpoint evaluations strictly inside the open segment so that a
    # jump declared at the segment edge resolves to this side of it
    lo, hi = sorted((x0, x1))
    eps = 1e-10 * (1.0 + hi - lo)

    def rhs(x, y):
        a = jinv @ (lam * eye - pot(min(max(x, lo + eps), hi - eps)))
        return (a @ y.reshape(n, -1)).ravel()

    res = solve_ivp(rhs, (x0, x1), y0.ravel(), method=tol.ivp_method,
                    rtol=tol.rtol, atol=tol.atol, dense_output=True)
    if not res.success:
        last = res.t[-1] if len(res.t) else x0
        raise IntegrationFailure(res.message, float(last))
    return res


def _split_at_breakpoints(x0, x1, breakpoints):
    """Sub-intervals of [x0, x1] (either orientation) cut at breakpoints."""
    inner = [b for b in breakpoints if min(x0, x1) < b < max(x0, x1)]
    pts = [x0] + sorted(inner, reverse=x1 < x0) + [x1]
    return list(zip(pts[:-1], pts[1:]))


def propagate(expr: DiracExpression, lam: complex, x_end: float,
              tol: Tolerances = DEFAULTS) -> FundamentalSolution:
    """Fundamental solution of J y' + Q y = lambda y with Y(0) = I.

    Integrates the explicit form Y' = J^{-1}(lambda I - Q(x)) Y with an
    adaptive embedded Runge-Kutta 5(4) pair from 0 to ``x_end`` (either
    sign), restarting at declared potential breakpoints.  Deterministic for
    fixed inputs and tolerances.

    Raises
    ------
    IntegrationFailure
        On step-size underflow or divergence, carrying the last reached x.
    """
    if x_end == 0.0:
        grid = np.array([0.0])
        vals = np.eye(expr.n, dtype=complex)[None]
        ident = lambda xs: np.tile(np.eye(expr.n, dtype=complex).ravel()[:, None],
                                   (1, np.size(xs)))
        return FundamentalSolution(lam, 0.0, grid, vals, expr,
                                   [(0.0, 0.0, ident)], 0, 0, 0, 1.0)
    if not (expr.interval.x_min - 1e-12 <= x_end <= expr.interval.x_max + 1e-12):
        raise ValueError(f"x_end={x_end} outside interval descriptor")

    segments = []
    ts, ys = [], []
    y = np.eye(expr.n, dtype=complex)
    steps = nfev = 0
    for k, (a, b) in enumerate(_split_at_breakpoints(0.0, x_end, expr.Q.breakpoints)):
        res = _integrate_matrix(expr, lam, a, b, y, tol)
        segments.append((a, b, res.sol))
        skip = 1 if k > 0 else 0  # segment start duplicates previous endpoint
        ts.append(res.t[skip:])
        ys.append(res.y.T.reshape(-1, expr.n, expr.n)[skip:])
        y = ys[-1][-1]
        steps += len(res.t) - 1
        nfev += res.nfev

    grid = np.concatenate(ts)
    values = np.concatenate(ys)
    if x_end < 0:
        grid, values = grid[::-1], values[::-1]

    conds = np.array([np.linalg.cond(v) for v in values])
    if not np.all(np.isfinite(conds)):
        raise IntegrationFailure("fundamental matrix lost invertibility",
                                 float(grid[-1]))
    rejected = max(0, round(nfev / 6) - steps - len(segments))
    fs = FundamentalSolution(lam, float(x_end), grid, values, expr, segments,
                             steps, nfev, rejected, float(conds.max()))
    # Y(0) = I exactly: enforced by construction, asserted cheaply here.
    assert np.array_equal(fs(0.0), np.eye(expr.n, dtype=complex)) or \
        np.linalg.norm(fs(0.0) - np.eye(expr.n), 2) < 1e-13
    return fs


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Quadrature:
    """Composite-Simpson value with a grid-halving error estimate."""
    value: float
    error: float


def _simpson_pair(samples: np.ndarray, xs: np.ndarray):
    full = simpson(samples, x=xs, axis=0)
    half = simpson(samples[::2], x=xs[::2], axis=0)
    return full, np.abs(full - half) / 15.0


def simpson_matrix(samples: np.ndarray, xs: np.ndarray):
    """Entrywise composite Simpson of matrix samples along axis 0.

    Needs ``len(xs)`` odd so grid halving is exact; returns
    (integral, error_estimate).
    """
    if len(xs) % 2 == 0:
        raise ValueError("need an odd sample count for halving estimate")
    return _simpson_pair(samples, xs)


def l2_tail_norm(f: Callable, a: float, b: float,
                 npoints: int = DEFAULTS.quad_points) -> Quadrature:
    """Squared-norm integral of a vector/matrix function over [a, b].

    ``f`` must accept an array of abscissas and return values whose leading
    axis matches it; the squared Frobenius norm is integrated by composite
    Simpson with a grid-halving error estimate.
    """
    if not a < b:
        raise ValueError(f"window [{a}, {b}] is empty")
    xs = np.linspace(a, b, npoints if npoints % 2 == 1 else npoints + 1)
    vals = np.asarray(f(xs))
    nsq = np.sum(np.abs(vals.reshape(len(xs), -1)) ** 2, axis=1)
    value, err = _simpson_pair(nsq, xs)
    return Quadrature(float(value), float(err))


def lagrange_residual(expr: DiracExpression, y, dy, z, dz, length: float,
                      npoints: int = DEFAULTS.quad_points) -> complex:
    """Residual of the boundary identity on [0, length].

    Computes

        int_0^L [(D(Q)y, z) - (y, D(Q*)z)] dx + (J y(0), z(0)) - (J y(L), z(L))

    which vanishes for absolutely continuous y, z up to quadrature error.
    ``y, dy`` belong to the expression itself, ``z, dz`` to its adjoint;
    all four callables must be vectorized over abscissa arrays.
    """
    xs = np.linspace(0.0, length, npoints if npoints % 2 == 1 else npoints + 1)
    yv, dyv = np.asarray(y(xs)), np.asarray(dy(xs))
    zv, dzv = np.asarray(z(xs)), np.asarray(dz(xs))
    if yv.shape != zv.shape or yv.shape[-1] != expr.n:
        raise ValueError("mismatched dimensions between y, z and the expression")

    qs = expr.Q.batch(xs)
    jmat = expr.J.mat
    d_y = np.einsum("ab,mb->ma", jmat, dyv) + np.einsum("mab,mb->ma", qs, yv)
    d_z = np.einsum("ab,mb->ma", jmat, dzv) + \
        np.einsum("mab,mb->ma", qs.conj().transpose(0, 2, 1), zv)
    integrand = np.einsum("ma,ma->m", d_y, zv.conj()) - \
        np.einsum("ma,ma->m", yv, d_z.conj())
    integral = simpson(integrand, x=xs)

    bdry0 = np.vdot(zv[0], jmat @ yv[0])
    bdryL = np.vdot(zv[-1], jmat @ yv[-1])
    return complex(integral + bdry0 - bdryL)
