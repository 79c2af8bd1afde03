import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import lasso_by_enumeration, random_spd
from sdenet import dynamics as dyn
from sdenet import estimator as est
from sdenet.conditions import batch_moments
from sdenet.errors import NeedsGroundTruthError, NoInnerResolutionError, SdenetError


@pytest.fixture(scope="module")
def model3():
    return dyn.make_random_binary_model(3, 1.0, 2)


@pytest.fixture(scope="module")
def traj3(model3):
    return dyn.simulate_discrete(model3, 0.1, 2000, seed=4)


# --- losses -------------------------------------------------------------------


def test_noiseless_loss_vanishes_at_truth(model3):
    tr = dyn.simulate_discrete(model3, 0.1, 50, seed=1, noise=False)
    for r in range(3):
        assert est.discrete_loss(model3.A0[r], tr, r) == pytest.approx(0.0, abs=1e-25)


def test_loss_at_zero(traj3):
    dx = np.diff(traj3.samples[:, 1])
    expect = dx @ dx / (2 * 0.1**2 * traj3.n)
    assert est.discrete_loss(np.zeros(3), traj3, 1) == pytest.approx(expect, rel=1e-13)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.integers(0, 2))
def test_quadratic_identity(a, row):
    model = dyn.make_random_binary_model(3, 1.0, 2)
    tr = dyn.simulate_discrete(model, 0.1, 500, seed=4)
    gh = est.gradient_hessian(tr, row, path="ground-truth", model=model)
    a = np.array(a)
    d = a - model.A0[row]
    lhs = est.discrete_loss(a, tr, row)
    rhs = est.discrete_loss(model.A0[row], tr, row) - gh.G_hat @ d + 0.5 * d @ gh.Q_hat @ d
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


@given(st.integers(0, 10**6))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    model = dyn.make_random_binary_model(4, 1.5, 3)
    tr = dyn.simulate_discrete(model, 0.1, 300, seed=8)
    row = int(rng.integers(4))
    gh = est.gradient_hessian(tr, row)
    a = rng.standard_normal(4)
    h = 1e-3
    fd = np.array([(est.discrete_loss(a + h * e, tr, row) - est.discrete_loss(a - h * e, tr, row)) / (2 * h) for e in np.eye(4)])
    g = gh.grad(a)
    assert np.max(np.abs(fd - g)) <= 1e-6 * max(1.0, np.max(np.abs(g)))


def test_continuous_loss_zero_at_origin(model3):
    tr = dyn.simulate_continuous(model3, 5.0, 0.01, 0.1, seed=1)
    assert est.continuous_loss(np.zeros(3), tr, 0) == 0.0


def test_continuous_equals_discrete_minus_constant_when_delta_is_eta(model3):
    tr = dyn.simulate_continuous(model3, 20.0, 0.1, 0.1, seed=3)
    rng = np.random.default_rng(0)
    for _ in range(5):
        a, r = rng.standard_normal(3), int(rng.integers(3))
        dx = np.diff(tr.samples[:, r])
        const = dx @ dx / (2 * 0.1**2 * tr.n)
        assert est.continuous_loss(a, tr, r) == pytest.approx(est.discrete_loss(a, tr, r) - const, abs=1e-12 * const)


def test_continuous_gradient_matches_loss(model3):
    tr = dyn.simulate_continuous(model3, 5.0, 0.01, 0.1, seed=3)
    gh = est.gradient_hessian(tr, 2, mode="continuous")
    a = np.array([0.3, -0.2, 1.0])
    h = 1e-3
    fd = np.array([(est.continuous_loss(a + h * e, tr, 2) - est.continuous_loss(a - h * e, tr, 2)) / (2 * h) for e in np.eye(3)])
    assert np.allclose(fd, gh.grad(a), atol=1e-8)


def test_continuous_loss_refinement_rate(model3):
    # strong error of an Ito sum under grid refinement shrinks like delta^(1/2)
    base, T = 0.1 / 256, 10.0
    a = model3.A0[0] + 0.5
    levels = [1, 2, 4, 8, 16, 32]
    errs = np.zeros(len(levels) - 1)
    for seed in range(20):
        tr = dyn.simulate_continuous(model3, T, base, 0.1, seed=seed)
        ref = est.continuous_loss(a, tr, 0)
        for i, r in enumerate(levels[1:]):
            coarse = dyn.Trajectory(tr.samples, 0.1, tr.provenance, seed, base * r, tr.inner[::r])
            errs[i] += abs(est.continuous_loss(a, coarse, 0) - ref)
    slope = np.polyfit(np.log(levels[2:]), np.log(errs[1:]), 1)[0]
    assert 0.3 <= slope <= 0.75


def test_continuous_needs_inner(traj3):
    with pytest.raises(NoInnerResolutionError):
        est.continuous_loss(np.zeros(3), traj3, 0)
    with pytest.raises(NoInnerResolutionError):
        est.gradient_hessian(traj3, 0, mode="continuous")


def test_ground_truth_path_needs_model(traj3):
    with pytest.raises(NeedsGroundTruthError):
        est.gradient_hessian(traj3, 0, path="ground-truth")


def test_row_and_length_validation(traj3):
    with pytest.raises(SdenetError):
        est.discrete_loss(np.zeros(3), traj3, 3)
    with pytest.raises(SdenetError):
        est.discrete_loss(np.zeros(2), traj3, 0)


# --- statistics of G_hat and Q_hat ------------------------------------------------


def test_gradient_is_centred(model3):
    G, _ = batch_moments(model3, 0.1, 100, 10_000, seed=3, row=1)
    mean, sd = G.mean(axis=0), G.std(axis=0, ddof=1)
    assert np.all(np.abs(mean) <= 3 * sd / math.sqrt(len(G)))


def test_hessian_consistent(model3):
    tr = dyn.simulate_discrete(model3, 0.1, 100_000, seed=9)
    gh = est.gradient_hessian(tr, 0)
    Q0 = dyn.solve_lyapunov_discrete(model3, 0.1).Q0
    assert np.max(np.abs(gh.Q_hat - Q0)) < 0.05


def test_coupled_gradient_converges(model3):
    T, delta = 20.0, 0.05 / 16
    errs = []
    for n in (100, 200, 400):
        e = 0.0
        for seed in range(10):
            disc, cont = dyn.simulate_coupled(model3, T, n, seed, delta)
            gd = est.gradient_hessian(disc, 0, path="ground-truth", model=model3).G_hat
            gc = est.gradient_hessian(cont, 0, mode="continuous", path="ground-truth", model=model3).G_hat
            e += np.max(np.abs(gd - gc))
        errs.append(e)
    assert errs[0] > errs[1] > errs[2]


# --- lasso ---------------------------------------------------------------------


def test_lambda_zero_is_least_squares(rng):
    Q = random_spd(rng, 6)
    b = rng.standard_normal(6)
    r = est.solve_quadratic_lasso(Q, b, 0.0, tol=1e-12)
    assert np.allclose(r.a_hat, np.linalg.solve(Q, b), atol=1e-8)


def test_large_lambda_gives_zero(rng):
    Q = random_spd(rng, 5)
    b = rng.standard_normal(5)
    r = est.solve_quadratic_lasso(Q, b, np.max(np.abs(b)))
    assert np.all(r.a_hat == 0.0) and r.iterations == 0


@pytest.mark.parametrize("seed", range(40))
def test_matches_sign_pattern_enumeration(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, 7))
    Q = random_spd(rng, p)
    b = rng.standard_normal(p)
    lam = rng.uniform(0.05, 0.8) * np.max(np.abs(b))
    r = est.solve_quadratic_lasso(Q, b, lam, tol=1e-12)
    ref = lasso_by_enumeration(Q, b, lam)
    assert np.allclose(r.a_hat, ref, atol=1e-8)
    assert r.kkt_residual <= 1e-12


@given(st.integers(0, 10**6))
def test_kkt_certificate_and_monotone_objective(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, 12))
    Q = random_spd(rng, p, cond=100.0)
    b = rng.standard_normal(p)
    lam = rng.uniform(0.0, 1.0) * np.max(np.abs(b))
    r = est.solve_quadratic_lasso(Q, b, lam)
    assert r.converged and r.kkt_residual <= 1e-8
    assert np.all(np.abs(r.dual) <= 1.0)
    assert np.max(np.abs(Q @ r.a_hat - b + lam * r.dual)) <= 1e-8
    obj = r.objective[: r.iterations + 1]
    assert np.all(np.diff(obj) <= 1e-12 * max(1.0, abs(obj[0])))


def test_scale_invariance(rng):
    Q = random_spd(rng, 5)
    b = rng.standard_normal(5)
    lam = 0.3 * np.max(np.abs(b))
    a = est.solve_quadratic_lasso(Q, b, lam, tol=1e-13).a_hat
    c = 7.5
    ac = est.solve_quadratic_lasso(c * Q, c * b, c * lam, tol=1e-12).a_hat
    assert np.allclose(a, ac, atol=1e-10)
    assert np.array_equal(np.sign(a), np.sign(ac))


def test_negative_lambda_rejected(rng):
    with pytest.raises(SdenetError):
        est.solve_quadratic_lasso(np.eye(2), np.ones(2), -1.0)


def test_lambda_grid():
    g = est.lambda_grid(np.array([0.5, -2.0]))
    assert len(g) == 50 and g[0] == pytest.approx(2.0) and g[-1] == pytest.approx(2e-3)
    assert np.all(np.diff(g) < 0)


# --- regularization rules ---------------------------------------------------------


def test_theorem_lambda_worked_value():
    lam = est.theorem_lambda("thm1", p=16, delta=0.1, T=100, alpha=0.5, rho_min=1.0)
    assert lam == pytest.approx(math.sqrt(36 * math.log(640) / 25), rel=1e-12)
    assert lam == pytest.approx(3.0503, abs=1e-4)


def test_theorem_three_matches_one_when_D_equals_rho():
    a = est.theorem_lambda("thm1", p=10, delta=0.05, T=50, alpha=0.7, rho_min=1.3)
    b = est.theorem_lambda("thm3", p=10, delta=0.05, T=50, alpha=0.7, D=1.3)
    assert a == pytest.approx(b, rel=1e-14)


def test_theorem_two_with_k_equal_m():
    lam = est.theorem_lambda("thm2", p=16, delta=0.1, T=100, k=3, m=3)
    assert lam == pytest.approx(12 * math.sqrt(math.log(640) / 300), rel=1e-12)


@pytest.mark.parametrize(
    "kw",
    [
        dict(which="thm1", p=16, delta=0.1, T=0, alpha=0.5, rho_min=1.0),
        dict(which="thm1", p=16, delta=1.0, T=10, alpha=0.5, rho_min=1.0),
        dict(which="thm1", p=16, delta=0.1, T=10, alpha=0.0, rho_min=1.0),
        dict(which="thm2", p=16, delta=0.1, T=10, k=2, m=-1),
        dict(which="thm3", p=16, delta=0.1, T=10, alpha=0.5, D=0.0),
        dict(which="thm9", p=16, delta=0.1, T=10),
    ],
)
def test_theorem_lambda_rejects(kw):
    with pytest.raises(SdenetError):
        est.theorem_lambda(**kw)


# --- network recovery -------------------------------------------------------------


def test_noiseless_unregularized_recovers_exactly():
    A = np.array([[-1.0, 1.0, 0.0], [0.0, -2.0, 1.0], [0.0, 0.0, -3.0]])
    tr = dyn.simulate_discrete(A, 0.2, 10, seed=5, noise=False)
    net = est.recover_network(tr, est.Fixed(0.0), tol=1e-14)
    assert np.allclose(net.A_hat, A, atol=1e-8)


def test_oracle_needs_model(traj3):
    with pytest.raises(NeedsGroundTruthError):
        est.recover_network(traj3, est.OracleGrid())


def test_recovery_with_long_trajectories():
    wins = 0
    for s in range(40):
        model = dyn.make_random_binary_model(16, 4.0, 1000 + s)
        tr = dyn.simulate_discrete(model, 0.1, 4000, seed=s)
        net = est.recover_network(tr, est.OracleGrid(), model=model, rows=[s % 16])
        wins += net.all_rows_recovered
    assert wins / 40 >= 0.9


def test_permutation_equivariance():
    model = dyn.make_random_binary_model(6, 2.0, 12)
    tr = dyn.simulate_discrete(model, 0.1, 3000, seed=2)
    perm = np.random.default_rng(0).permutation(6)
    ptr = dyn.Trajectory(tr.samples[:, perm], tr.eta, tr.provenance, tr.seed)
    lam = 0.3
    A = est.recover_network(tr, est.Fixed(lam), tol=1e-13).A_hat
    B = est.recover_network(ptr, est.Fixed(lam), tol=1e-13).A_hat
    assert np.allclose(B, A[np.ix_(perm, perm)], atol=1e-9)
    assert np.array_equal(np.sign(B), np.sign(A[np.ix_(perm, perm)]))


def test_theorem_rule_strategy(traj3):
    rule = est.TheoremRule("thm1", dict(p=3, delta=0.1, T=traj3.T, alpha=0.5, rho_min=1.0))
    net = est.recover_network(traj3, rule)
    lam = est.theorem_lambda("thm1", p=3, delta=0.1, T=traj3.T, alpha=0.5, rho_min=1.0)
    assert all(e.lam == lam for e in net.estimates)
    assert net.success is None


# --- dual certificate -----------------------------------------------------------------


def test_dual_check_diagonal_case():
    Q = np.diag([1.0, 2.0, 3.0])
    a0 = np.array([1.0, 0.0, 0.0])
    gh = est.GradientHessian(Q, Q @ a0, "discrete", 0, np.zeros(3))
    r = est.solve_quadratic_lasso(Q, gh.b, 0.1, tol=1e-14)
    rep = est.kkt_dual_check(r, gh, 0.1, [0], A_min=1.0, a0_row=a0)
    assert rep.dual_bound == 0.0 and rep.z_off_norm == 0.0 and rep.dual_holds
    assert rep.error_condition and rep.error_holds


def test_dual_bound_never_violated():
    rng = np.random.default_rng(2024)
    bad_dual = bad_err = 0
    for _ in range(10_000):
        p = int(rng.integers(3, 7))
        X = rng.standard_normal((int(rng.integers(p + 2, 40)), p))
        Q = X.T @ X / len(X)
        k = int(rng.integers(1, p))
        S = np.sort(rng.choice(p, k, replace=False))
        a0 = np.zeros(p)
        a0[S] = rng.choice([-1.0, 1.0], k) * rng.uniform(0.5, 2.0, k)
        G = rng.standard_normal(p) * rng.uniform(0.0, 0.3)
        gh = est.GradientHessian(Q, Q @ a0 + G, "discrete", 0, G)
        lam = rng.uniform(0.01, 1.0)
        r = est.solve_quadratic_lasso(Q, gh.b, lam)
        rep = est.kkt_dual_check(r, gh, lam, S, A_min=float(np.min(np.abs(a0[S]))), a0_row=a0)
        bad_dual += not rep.dual_holds
        bad_err += not rep.error_holds
    assert bad_dual == 0 and bad_err == 0


def test_dual_check_needs_ground_truth(rng):
    gh = est.GradientHessian(np.eye(2), np.ones(2), "discrete", 0)
    r = est.solve_quadratic_lasso(np.eye(2), np.ones(2), 0.1)
    with pytest.raises(NeedsGroundTruthError):
        est.kkt_dual_check(r, gh, 0.1, [0], A_min=1.0)
