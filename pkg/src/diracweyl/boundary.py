"""Finite-dimensional boundary machinery.

Subspaces of boundary values and their crosses, admissible matrix pairs,
completions X, Y with Y* J X = J, rotation-parametrized boundary schemes,
the boundary maps (Gamma_0, Gamma_1), and the unitary frame rotations that
bring a diagonal-form signature matrix to the canonical off-diagonal block
form.  Everything here is pure linear algebra on small matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import null_space, subspace_angles

from .config import DEFAULTS, Tolerances
from .core import SignatureMatrix

__all__ = [
    "BoundarySubspace",
    "AdmissiblePair",
    "Completion",
    "PhiParameter",
    "theta_cross",
    "theta_from_pair",
    "pair_from_subspace",
    "complete_pair",
    "completion_from_phi",
    "identity_completion",
    "gamma_maps",
    "subspaces_equal",
    "FrameRotation",
    "canonical_frame",
]


# ---------------------------------------------------------------------------
# subspaces
# ---------------------------------------------------------------------------

class BoundarySubspace:
    """Subspace of C^n held as an n x k matrix with orthonormal columns."""

    def __init__(self, basis, tol: Tolerances = DEFAULTS):
        basis = np.array(basis, dtype=complex)
        if basis.ndim != 2:
            raise ValueError("basis must be a 2-d array (n x k)")
        n, k = basis.shape
        if k > 0:
            gram = basis.conj().T @ basis
            if np.linalg.norm(gram - np.eye(k), 2) > 1e-12:
                raise ValueError("basis columns are not orthonormal")
        self.basis = basis
        self.n = n
        self.dim = k

    @classmethod
    def from_span(cls, vectors) -> "BoundarySubspace":
        """Orthonormalize a (possibly redundant) spanning set of columns."""
        vectors = np.asarray(vectors, dtype=complex)
        if vectors.size == 0 or vectors.shape[1] == 0:
            return cls(np.zeros((vectors.shape[0], 0)))
        u, s, _ = np.linalg.svd(vectors, full_matrices=False)
        rank = int(np.sum(s > 1e-12 * s[0])) if s.size else 0
        return cls(u[:, :rank])

    @classmethod
    def zero(cls, n: int) -> "BoundarySubspace":
        return cls(np.zeros((n, 0)))

    @classmethod
    def full(cls, n: int) -> "BoundarySubspace":
        return cls(np.eye(n))

    def __repr__(self):
        return f"BoundarySubspace(n={self.n}, dim={self.dim})"


def subspaces_equal(a: BoundarySubspace, b: BoundarySubspace,
                    tol: Tolerances = DEFAULTS) -> bool:
    """Equality by principal angles below ``tol.angle_tol``."""
    if a.n != b.n or a.dim != b.dim:
        return False
    if a.dim == 0:
        return True
    return float(np.max(subspace_angles(a.basis, b.basis))) < tol.angle_tol


def theta_cross(theta: BoundarySubspace, J: SignatureMatrix) -> BoundarySubspace:
    """Orthogonal complement of J theta in C^n; dimension n - dim theta."""
    if theta.n != J.n:
        raise ValueError("subspace and signature matrix dimensions differ")
    if theta.dim == 0:
        return BoundarySubspace.full(J.n)
    image = J.mat @ theta.basis
    comp = null_space(image.conj().T)
    return BoundarySubspace(comp if comp.size else np.zeros((J.n, 0)))


# ---------------------------------------------------------------------------
# admissible pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmissiblePair:
    """Pair (C1, C2) of p x p matrices with full row rank of [C1 C2]."""

    c1: np.ndarray
    c2: np.ndarray

    def __post_init__(self):
        c1 = np.asarray(self.c1, dtype=complex)
        c2 = np.asarray(self.c2, dtype=complex)
        if c1.shape != c2.shape or c1.ndim != 2 or c1.shape[0] != c1.shape[1]:
            raise ValueError("C1, C2 must be square matrices of equal size")
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)

    @property
    def p(self) -> int:
        return self.c1.shape[0]

    @property
    def row(self) -> np.ndarray:
        """The p x 2p block row [C1 C2]."""
        return np.hstack([self.c1, self.c2])

    def rank(self, tol: Tolerances = DEFAULTS) -> int:
        s = np.linalg.svd(self.row, compute_uv=False)
        return int(np.sum(s > tol.rank_rtol * max(s[0], 1.0)))

    def is_admissible(self, tol: Tolerances = DEFAULTS) -> bool:
        return self.rank(tol) == self.p


def theta_from_pair(pair: AdmissiblePair, tol: Tolerances = DEFAULTS) -> BoundarySubspace:
    """Kernel of the block row [C1 C2] as a p-dimensional subspace of C^2p."""
    rank = pair.rank(tol)
    if rank != pair.p:
        raise ValueError(
            f"pair is not admissible: rank [C1 C2] = {rank}, need {pair.p}")
    kern = null_space(pair.row)
    theta = BoundarySubspace(kern)
    if theta.dim != pair.p:
        raise ValueError(f"kernel dimension {theta.dim} != p = {pair.p}")
    return theta


def pair_from_subspace(theta: BoundarySubspace) -> AdmissiblePair:
    """An admissible pair whose kernel is the given p-dim subspace of C^2p."""
    if theta.n % 2 or theta.dim != theta.n // 2:
        raise ValueError("need dim theta = p with ambient dimension 2p")
    p = theta.dim
    row = null_space(theta.basis.conj().T).conj().T
    return AdmissiblePair(row[:, :p], row[:, p:])


# ---------------------------------------------------------------------------
# completions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Completion:
    """Matrices X, Y (2p x 2p) with Y* J X = J for the canonical J.

    The blocks of X are (C1, C2; C3, C4) and drive the boundary maps on the
    direct side; the blocks of Y drive the adjoint side.
    """

    X: np.ndarray
    Y: np.ndarray
    J: SignatureMatrix

    @property
    def p(self) -> int:
        return self.X.shape[0] // 2

    def blocks(self, side: str = "B") -> tuple[np.ndarray, ...]:
        m = {"B": self.X, "A": self.Y}[side]
        p = self.p
        return m[:p, :p], m[:p, p:], m[p:, :p], m[p:, p:]

    @cached_property
    def residual(self) -> float:
        return float(np.linalg.norm(
            self.Y.conj().T @ self.J.mat @ self.X - self.J.mat, 2))

    def validate(self, tol: Tolerances = DEFAULTS) -> "Completion":
        if self.residual > tol.completion_tol:
            raise ValueError(
                f"completion identity fails: ||Y*JX - J|| = {self.residual:.3e}")
        return self


def _require_canonical(J: SignatureMatrix):
    p = J.n // 2
    if J.n % 2 or np.linalg.norm(J.mat - SignatureMatrix.canonical(p).mat, 2) > 1e-12:
        raise ValueError(
            "completion needs the canonical off-diagonal J; "
            "rotate the frame first (see canonical_frame)")
    return p


def complete_pair(pair: AdmissiblePair, J: SignatureMatrix,
                  tol: Tolerances = DEFAULTS) -> Completion:
    """Extend an admissible pair to a completion (X, Y).

    The bottom block row starts from the candidate [-C2, C1] (the top row
    hit by J from the right), is projected onto the orthogonal complement of
    the top row space and symmetrically orthonormalized; that reduces to the
    rotation form exactly when (C1, C2) commute as Hermitian cosine/sine
    blocks.  Y is then forced by the identity as J^{-1} X^{-*} J.
    """
    p = _require_canonical(J)
    if pair.p != p:
        raise ValueError(f"pair size {pair.p} does not match J (p = {p})")
    if not pair.is_admissible(tol):
        raise ValueError(f"pair is not admissible: rank = {pair.rank(tol)}")

    top = pair.row
    cand = np.hstack([-pair.c2, pair.c1])
    gram_top = top @ top.conj().T
    proj = cand - (cand @ top.conj().T) @ np.linalg.solve(gram_top, top)

    g = proj @ proj.conj().T
    w, v = np.linalg.eigh(g)
    if w[0] > tol.rank_rtol * max(w[-1], 1.0):
        # symmetric (Loewdin) orthonormalization of the projected candidate
        bottom = v @ np.diag(1.0 / np.sqrt(w)) @ v.conj().T @ proj
    else:
        bottom = null_space(top).conj().T

    x = np.vstack([top, bottom])
    y = J.inv @ np.linalg.inv(x).conj().T @ J.mat
    return Completion(x, y, J).validate(tol)


@dataclass(frozen=True)
class PhiParameter:
    """Hermitian p x p rotation parameter."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=complex)
        if np.linalg.norm(phi - phi.conj().T, 2) > 1e-12:
            raise ValueError("rotation parameter must be Hermitian")
        object.__setattr__(self, "phi", phi)

    @property
    def p(self) -> int:
        return self.phi.shape[0]

    @cached_property
    def cos_sin(self) -> tuple[np.ndarray, np.ndarray]:
        w, v = np.linalg.eigh(self.phi)
        c = (v * np.cos(w)) @ v.conj().T
        s = (v * np.sin(w)) @ v.conj().T
        return c, s


def completion_from_phi(phi: PhiParameter, J: SignatureMatrix,
                        tol: Tolerances = DEFAULTS) -> Completion:
    """Unitary rotation completion [[cos, sin], [-sin, cos]]; here Y = X."""
    p = _require_canonical(J)
    if phi.p != p:
        raise ValueError(f"parameter size {phi.p} does not match J (p = {p})")
    c, s = phi.cos_sin
    x = np.block([[c, s], [-s, c]])
    return Completion(x, x, J).validate(tol)


def identity_completion(p: int) -> Completion:
    """The trivial completion X = Y = I for the canonical J."""
    return Completion(np.eye(2 * p, dtype=complex), np.eye(2 * p, dtype=complex),
                      SignatureMatrix.canonical(p))


def gamma_maps(comp: Completion, boundary_value: np.ndarray,
               side: str = "B") -> tuple[np.ndarray, np.ndarray]:
    """Boundary maps (Gamma_0, Gamma_1) of a boundary value in C^2p.

    Side ``"B"`` applies the X blocks to the value of a function in the
    domain of the direct maximal operator; side ``"A"`` applies the Y blocks
    on the adjoint side.  Accepts a vector or a 2p x k matrix of columns.
    """
    val = np.asarray(boundary_value, dtype=complex)
    p = comp.p
    if val.shape[0] != 2 * p:
        raise ValueError(f"boundary value must have 2p = {2 * p} rows")
    b1, b2, b3, b4 = comp.blocks(side)
    top, bot = val[:p], val[p:]
    return b1 @ top + b2 @ bot, b3 @ top + b4 @ bot


# ---------------------------------------------------------------------------
# frame rotations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrameRotation:
    """Unitary U with U* J U equal to the canonical off-diagonal form."""

    U: np.ndarray

    def to_canonical(self, vec: np.ndarray) -> np.ndarray:
        return self.U.conj().T @ vec

    def from_canonical(self, vec: np.ndarray) -> np.ndarray:
        return self.U @ vec


def _paper_u(p: int) -> np.ndarray:
    i = np.eye(p)
    return np.block([[1j * i, i], [-1j * i, i]]) / np.sqrt(2.0)


def canonical_frame(J: SignatureMatrix) -> FrameRotation:
    """Unitary frame rotation taking J to the canonical off-diagonal form.

    Requires balanced kernel dimensions (kappa_+ = kappa_- = p).  The two
    diagonal forms get fixed, reproducible rotations; anything else falls
    back to an eigenbasis construction with deterministic phase fixing.
    """
    n = J.n
    if n % 2:
        raise ValueError("no canonical frame in odd dimension")
    p = n // 2
    if np.linalg.norm(J.mat - SignatureMatrix.canonical(p).mat, 2) < 1e-12:
        return FrameRotation(np.eye(n, dtype=complex))
    if np.linalg.norm(J.mat - SignatureMatrix.diag_mp(p).mat, 2) < 1e-12:
        return FrameRotation(_paper_u(p))
    if np.linalg.norm(J.mat - SignatureMatrix.i_diag(p).mat, 2) < 1e-12:
        swap = np.block([[np.zeros((p, p)), np.eye(p)], [np.eye(p), np.zeros((p, p))]])
        return FrameRotation(swap @ _paper_u(p))

    w, v = np.linalg.eigh(1j * J.mat)  # Hermitian; eigenvalues are +-1
    plus = v[:, w > 0]   # kernel of J + iI
    minus = v[:, w < 0]  # kernel of J - iI
    if plus.shape[1] != p or minus.shape[1] != p:
        raise ValueError(
            f"kernel dimensions ({plus.shape[1]}, {minus.shape[1]}) are not "
            f"balanced; no frame rotation to the canonical form exists")
    for block in (plus, minus):
        for j in range(block.shape[1]):
            k = int(np.argmax(np.abs(block[:, j])))
            phase = block[k, j] / abs(block[k, j])
            block[:, j] /= phase
    i = np.eye(p)
    vc = np.hstack([np.vstack([i, 1j * i]), np.vstack([i, -1j * i])]) / np.sqrt(2.0)
    u = np.hstack([plus, minus]) @ vc.conj().T
    rot = FrameRotation(u)
    check = np.linalg.norm(u.conj().T @ J.mat @ u - SignatureMatrix.canonical(p).mat, 2)
    if check > 1e-10:
        raise AssertionError(f"frame rotation failed, residual {check:.3e}")
    return rot
