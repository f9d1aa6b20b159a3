import numpy as np
import pytest
from numpy.polynomial import Polynomial
from scipy.linalg import expm

from diracweyl import (
    DEFAULTS,
    ConstantPotential,
    DiracExpression,
    FiniteInterval,
    HalfLine,
    IntegrationFailure,
    NlsOffdiagPotential,
    Potential,
    SampledPotential,
    ScaledProfilePotential,
    SignatureMatrix,
    classify,
    kappa,
    l2_tail_norm,
    lagrange_residual,
    make_potential,
    propagate,
)
from diracweyl.core import flip_conjugation_matrix

J2 = SignatureMatrix([[0, -1], [1, 0]])


def free_expr(interval=HalfLine(80.0)):
    return DiracExpression(J2, make_potential("zero", n=2), interval)


def random_signature(rng, n):
    # random unitary eigenbasis with +-i eigenvalues, kp of them +(-i)
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, _ = np.linalg.qr(z)
    kp = rng.integers(0, n + 1)
    eigs = np.r_[-1j * np.ones(kp), 1j * np.ones(n - kp)]
    return SignatureMatrix(q @ np.diag(eigs) @ q.conj().T), int(kp)


# ---------------------------------------------------------------------------
# signature matrices and kappa
# ---------------------------------------------------------------------------

def test_signature_invariants_enforced():
    j = SignatureMatrix.canonical(2)
    n = j.n
    assert np.linalg.norm(j.mat.conj().T + j.mat, 2) < 1e-12
    assert np.linalg.norm(j.mat.conj().T @ j.mat - np.eye(n), 2) < 1e-12
    with pytest.raises(ValueError):
        SignatureMatrix(np.eye(2))


def test_kappa_examples():
    assert kappa(J2) == (1, 1)
    for p in (1, 2, 3):
        assert kappa(SignatureMatrix.i_diag(p)) == (p, p)
    assert kappa(SignatureMatrix.diag_mp(1)) == (1, 1)


def test_kappa_sum_rule_random():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(1, 7))
        j, kp = random_signature(rng, n)
        got = kappa(j)
        assert got == (kp, n - kp)
        assert got[0] + got[1] == n


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

def test_classify_zero_potential():
    rep = classify(free_expr())
    assert rep.formally_selfadjoint
    assert rep.almost_fsa and rep.alpha_q == rep.beta_q == 0.0
    assert rep.p == 1


def test_classify_nls_offdiag_is_j_symmetric():
    # scalar q(x) = e^{-x}, symmetric by triviality
    q = NlsOffdiagPotential(np.array([[1.0]]), "exp_decay", mu=1.0)
    expr = DiracExpression(SignatureMatrix.i_diag(1), q, HalfLine(40.0))
    rep = classify(expr)
    assert rep.j_symmetric
    assert not rep.formally_selfadjoint


def test_classify_constant_shift_bounds():
    q1 = np.array([[0.0, 0.3], [0.3, 0.1]])
    pot = ConstantPotential(q1 + 0.5j * np.eye(2))
    rep = classify(DiracExpression(J2, pot, HalfLine(40.0)))
    assert rep.almost_fsa
    assert abs(rep.alpha_q - 0.5) < 1e-12 and abs(rep.beta_q - 0.5) < 1e-12
    assert not rep.formally_selfadjoint


def test_classify_odd_dimension_reason():
    j3 = SignatureMatrix(1j * np.diag([1.0, 1.0, -1.0]))
    rep = classify(DiracExpression(j3, make_potential("zero", n=3), HalfLine(10.0)))
    assert not rep.j_symmetric
    assert rep.reasons["j_symmetric"] == "n odd"
    assert rep.p is None


def test_classify_resampling_stable():
    q = NlsOffdiagPotential(np.array([[1.0, 0.3], [0.3, 0.5]]), "exp_decay", mu=1.0)
    expr = DiracExpression(SignatureMatrix.i_diag(2), q, HalfLine(40.0))
    a = classify(expr, probe_points=201)
    b = classify(expr, probe_points=403)
    assert (a.formally_selfadjoint, a.j_symmetric) == (b.formally_selfadjoint, b.j_symmetric)
    assert abs(a.beta_q - b.beta_q) < 1e-6


# ---------------------------------------------------------------------------
# propagate
# ---------------------------------------------------------------------------

def test_propagate_free_matches_exponential():
    sol = propagate(free_expr(), 1j, 1.0)
    k = 1j * np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert np.linalg.norm(sol(1.0) - expm(k), 2) < 1e-9
    # decaying column through (1, i)
    v = sol(1.0) @ np.array([1.0, 1j])
    assert np.linalg.norm(v - np.exp(-1.0) * np.array([1.0, 1j])) < 1e-9


def test_propagate_at_origin_is_identity():
    sol = propagate(free_expr(), 2.0 + 0.5j, 0.0)
    assert np.array_equal(sol(0.0), np.eye(2, dtype=complex))


def test_propagate_constant_potential_oracle():
    rng = np.random.default_rng(3)
    for n, jmat in ((2, SignatureMatrix.canonical(1)), (4, SignatureMatrix.canonical(2))):
        q0 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        expr = DiracExpression(jmat, ConstantPotential(0.4 * q0), HalfLine(20.0))
        lam = 0.3 + 1.7j
        x = 1.3
        sol = propagate(expr, lam, x)
        oracle = expm(x * (jmat.inv @ (lam * np.eye(n) - 0.4 * q0)))
        assert np.linalg.norm(sol(x) - oracle, 2) < 1e-8 * np.linalg.norm(oracle, 2)


def test_propagate_semigroup_property():
    rng = np.random.default_rng(11)
    q0 = np.array([[0.2, 0.5], [0.5, -0.1]]) + 0.3j * np.eye(2)
    for _ in range(20):
        lam = complex(rng.uniform(-1, 1), rng.uniform(0.6, 2.0))
        x1 = float(rng.uniform(0.3, 1.5))
        x2 = x1 + float(rng.uniform(0.3, 1.5))
        mu = 0.7
        base = ScaledProfilePotential(q0, "exp_decay", mu=mu)
        expr = DiracExpression(J2, base, HalfLine(20.0))
        direct = propagate(expr, lam, x2)
        # restarting at x1 means propagating the shifted potential
        shifted = ScaledProfilePotential(np.exp(-mu * x1) * q0, "exp_decay", mu=mu)
        tail = propagate(DiracExpression(J2, shifted, HalfLine(20.0)), lam, x2 - x1)
        err = np.linalg.norm(tail(x2 - x1) @ direct(x1) - direct(x2), 2)
        assert err < 10 * DEFAULTS.rtol * max(1.0, np.linalg.norm(direct(x2), 2))


def test_propagate_liouville_nonvanishing_det():
    expr = DiracExpression(J2, ConstantPotential([[0.1, 0.4], [0.2, -0.3]]), HalfLine(30.0))
    sol = propagate(expr, 1.5j, 6.0)
    dets = np.abs(np.linalg.det(sol.values))
    assert np.all(dets > 0)
    assert sol.max_condition < 1e12


def test_propagate_conjugation_symmetry():
    # flip-conjugated fundamental solution solves the adjoint system at conj(lam)
    q = NlsOffdiagPotential(np.array([[1.0, 0.3], [0.3, 0.5]]), "exp_decay", mu=1.0)
    expr = DiracExpression(SignatureMatrix.i_diag(2), q, HalfLine(20.0))
    lam = 0.7 + 0.4j
    y = propagate(expr, lam, 3.0)
    w = propagate(expr.adjoint(), np.conj(lam), 3.0)
    u = flip_conjugation_matrix(4)
    xs = np.linspace(0.0, 3.0, 31)
    dev = max(
        np.linalg.norm(u @ y(float(x)).conj() @ u - w(float(x)), 2) for x in xs
    )
    assert dev < 1e-8


def test_propagate_residual_and_table():
    sol = propagate(free_expr(), 1j, 2.0)
    assert sol.ode_residual() < DEFAULTS.fundamental_residual_tol
    header, rows = sol.to_table()
    assert header[0] == "x" and len(header) == 1 + 2 * 4
    assert rows.shape == (len(sol.grid), 9)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_propagate_failure_diagnostic():
    # solution grows like e^{2000 x}; overflow forces step-size underflow
    expr = DiracExpression(J2, ConstantPotential(-2000.0 * J2.mat), FiniteInterval(1.0))
    with pytest.raises(IntegrationFailure) as exc:
        propagate(expr, 1j, 1.0, DEFAULTS.with_(rtol=1e-8, atol=1e-10))
    assert 0.0 < exc.value.last_x < 1.0


def test_propagate_sampled_with_breakpoint_restart():
    # piecewise constant-ish potential with a declared jump at x = 1
    xs = np.r_[np.linspace(0, 1, 21), np.linspace(1.0 + 1e-9, 2, 21)]
    qs = np.array([np.eye(2) * (0.2 if x <= 1 else -0.4) for x in xs], dtype=complex)
    pot = SampledPotential(xs, qs, breakpoints=(1.0,))
    expr = DiracExpression(J2, pot, FiniteInterval(2.0))
    sol = propagate(expr, 0.8j, 2.0)
    a1 = J2.inv @ (0.8j * np.eye(2) - 0.2 * np.eye(2))
    a2 = J2.inv @ (0.8j * np.eye(2) + 0.4 * np.eye(2))
    oracle = expm(a2) @ expm(a1)
    assert np.linalg.norm(sol(2.0) - oracle, 2) < 1e-6
    assert np.all(np.diff(sol.grid) > 0)


# ---------------------------------------------------------------------------
# Lagrange identity residual
# ---------------------------------------------------------------------------

def test_lagrange_residual_solution_columns():
    expr = free_expr()
    y_sol = propagate(expr, 1j, 5.0)
    z_sol = propagate(expr.adjoint(), -1j, 5.0)
    y, dy = y_sol.column(0)
    z, dz = z_sol.column(0)
    res = lagrange_residual(expr, y, dy, z, dz, 5.0)
    assert abs(res) < 1e-9


def test_lagrange_residual_compact_support():
    q0 = np.array([[0.1, 0.2 - 0.1j], [0.2 + 0.1j, -0.3]])  # Hermitian
    expr = DiracExpression(J2, ConstantPotential(q0), FiniteInterval(1.0))

    def bump(xs):
        xs = np.asarray(xs, dtype=float)
        t = np.clip((xs - 0.3) / 0.4, 0.0, 1.0)
        f = (t * (1 - t)) ** 3
        return np.stack([f, np.zeros_like(f)], axis=-1)

    def dbump(xs):
        xs = np.asarray(xs, dtype=float)
        t = np.clip((xs - 0.3) / 0.4, 0.0, 1.0)
        df = 3 * (t * (1 - t)) ** 2 * (1 - 2 * t) / 0.4
        inside = ((xs > 0.3) & (xs < 0.7)).astype(float)
        return np.stack([df * inside, np.zeros_like(df)], axis=-1)

    def z(xs):
        xs = np.asarray(xs, dtype=float)
        return np.stack([np.sin(xs), np.cos(xs)], axis=-1).astype(complex)

    def dz(xs):
        xs = np.asarray(xs, dtype=float)
        return np.stack([np.cos(xs), -np.sin(xs)], axis=-1).astype(complex)

    res = lagrange_residual(expr, bump, dbump, z, dz, 1.0)
    assert abs(res) < 1e-8


def test_lagrange_residual_polynomials_vs_exact_oracle():
    rng = np.random.default_rng(5)
    q0 = np.array([[0.4, 0.1 + 0.2j], [0.1 - 0.2j, -0.2]])  # Hermitian
    expr = DiracExpression(J2, ConstantPotential(q0), FiniteInterval(1.0))
    jmat = J2.mat

    for _ in range(3):
        coef = rng.standard_normal((2, 2, 4)) + 1j * rng.standard_normal((2, 2, 4))
        ypoly = [Polynomial(coef[0, i]) for i in range(2)]
        zpoly = [Polynomial(coef[1, i]) for i in range(2)]
        dypoly = [p.deriv() for p in ypoly]
        dzpoly = [p.deriv() for p in zpoly]

        def vec(polys):
            return lambda xs: np.stack([p(np.asarray(xs, dtype=float))
                                        for p in polys], axis=-1)

        res = lagrange_residual(expr, vec(ypoly), vec(dypoly),
                                vec(zpoly), vec(dzpoly), 1.0)

        # independent oracle: exact polynomial integration of the identity
        conj = lambda p: Polynomial(np.conj(p.coef))
        d_y = [sum(jmat[i, j] * dypoly[j] + q0[i, j] * ypoly[j] for j in range(2))
               for i in range(2)]
        d_z = [sum(jmat[i, j] * dzpoly[j] + np.conj(q0[j, i]) * zpoly[j]
                   for j in range(2)) for i in range(2)]
        integrand = sum(d_y[i] * conj(zpoly[i]) for i in range(2)) - \
            sum(ypoly[i] * conj(d_z[i]) for i in range(2))
        exact_int = integrand.integ()(1.0) - integrand.integ()(0.0)
        y0 = np.array([p(0.0) for p in ypoly])
        yL = np.array([p(1.0) for p in ypoly])
        z0 = np.array([p(0.0) for p in zpoly])
        zL = np.array([p(1.0) for p in zpoly])
        exact = exact_int + np.vdot(z0, jmat @ y0) - np.vdot(zL, jmat @ yL)

        assert abs(exact) < 1e-12  # identity holds exactly for polynomials
        assert abs(res - exact) < 1e-8
        assert abs(res) < 1e-8


def test_lagrange_residual_dimension_mismatch():
    expr = free_expr()
    three = lambda xs: np.zeros((np.size(xs), 3))
    with pytest.raises(ValueError):
        lagrange_residual(expr, three, three, three, three, 1.0)


# ---------------------------------------------------------------------------
# tail norms
# ---------------------------------------------------------------------------

def test_l2_tail_norm_decaying_column():
    f = lambda xs: np.exp(-np.asarray(xs))[:, None] * np.array([1.0, 1j])
    q = l2_tail_norm(f, 0.0, 40.0)
    assert abs(q.value - 1.0) < 1e-8
    assert q.error < 1e-8


def test_l2_tail_norm_trivial():
    zero = lambda xs: np.zeros((np.size(xs), 2))
    assert l2_tail_norm(zero, 0.0, 1.0).value == 0.0
    const = lambda xs: np.tile(np.array([1.0, 0.0]), (np.size(xs), 1))
    assert abs(l2_tail_norm(const, 0.0, 1.0).value - 1.0) < 1e-14


def test_l2_tail_norm_bad_window():
    f = lambda xs: np.zeros((np.size(xs), 1))
    with pytest.raises(ValueError):
        l2_tail_norm(f, 2.0, 1.0)
