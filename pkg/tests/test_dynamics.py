import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from conftest import random_stable
from sdenet import dynamics as dyn
from sdenet.errors import BadSubsamplingError, NotContractiveError, NotStableError, SdenetError, SolverError


# --- ensembles ------------------------------------------------------------------


def test_zero_probability_edges():
    lit = dyn.make_random_binary_model(4, 0.0, 3, "binary-literal")
    assert np.array_equal(lit.A0, np.zeros((4, 4)))
    stab = dyn.make_random_binary_model(4, 0.0, 3)
    c = stab.params["shift"]
    assert np.array_equal(stab.A0, -c * np.eye(4))
    assert [list(s) for s in stab.supports] == [[0], [1], [2], [3]]


def test_binary_literal_edge_count_is_binomial():
    p, k, seeds = 16, 5.0, 1000
    counts = [np.count_nonzero(dyn.make_random_binary_model(p, k, s, "binary-literal").A0) for s in range(seeds)]
    q = k / p
    mean, sd = p * p * q, math.sqrt(p * p * q * (1 - q))
    assert abs(np.mean(counts) - mean) <= 3 * sd / math.sqrt(seeds)


@pytest.mark.parametrize("seed", range(20))
def test_stabilized_symmetric_part_negative_definite(seed):
    m = dyn.make_random_binary_model(16, 4.0, seed)
    assert np.all(np.linalg.eigvalsh((m.A0 + m.A0.T) / 2) < 0)
    assert m.stable and m.ensemble == "stabilized-binary"


def test_binary_model_validation():
    with pytest.raises(SdenetError):
        dyn.make_random_binary_model(1, 0.5, 0)
    with pytest.raises(SdenetError):
        dyn.make_random_binary_model(4, 4.0, 0)
    with pytest.raises(SdenetError):
        dyn.make_random_binary_model(4, 1.0, 0, "other")


def test_binary_model_deterministic():
    a = dyn.make_random_binary_model(10, 3.0, 77)
    b = dyn.make_random_binary_model(10, 3.0, 77)
    assert np.array_equal(a.A0, b.A0)


def test_supports_match_nonzeros(rng):
    A = rng.standard_normal((5, 5)) * (rng.random((5, 5)) < 0.4)
    m = dyn.explicit_model(A)
    for r in range(5):
        assert list(m.supports[r]) == list(np.flatnonzero(A[r]))


def test_laplacian_single_edge():
    m = dyn.make_laplacian_model([[0, 1], [1, 0]], 1.0)
    assert np.array_equal(m.A0, [[-2, 1], [1, -2]])


def test_laplacian_path_p3():
    adj = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    m = dyn.make_laplacian_model(adj, 2.0)
    assert np.array_equal(np.diag(m.A0), [-3, -4, -3])
    assert np.all(np.linalg.eigvalsh(m.A0) <= -2.0 + 1e-12)


def test_laplacian_star():
    adj = np.zeros((5, 5))
    adj[0, 1:] = adj[1:, 0] = 1
    m = dyn.make_laplacian_model(adj, 1.0)
    assert np.linalg.eigvalsh(m.A0)[-1] < 0
    assert m.rho_min() >= 1.0 - 1e-12
    assert m.params["k"] == 4


def test_laplacian_rejections():
    with pytest.raises(SdenetError):
        dyn.make_laplacian_model(np.zeros((3, 3)), 1.0)  # disconnected
    with pytest.raises(SdenetError):
        dyn.make_laplacian_model([[0, 1], [1, 0]], 0.0)
    with pytest.raises(SdenetError):
        dyn.make_laplacian_model([[0, 1], [0, 0]], 1.0)


@given(st.integers(3, 12), st.integers(2, 4), st.floats(0.1, 3.0), st.integers(0, 10**6))
def test_laplacian_spectrum_below_minus_m(p, k, m, seed):
    adj = dyn.random_bounded_degree_graph(p, k, np.random.default_rng(seed))
    assert adj.sum(axis=1).max() <= k
    model = dyn.make_laplacian_model(adj, m)
    assert np.linalg.eigvalsh(model.A0)[-1] <= -m + 1e-10
    off = model.A0 - np.diag(np.diag(model.A0))
    assert np.allclose(model.A0.sum(axis=1) + m, 0)
    assert set(np.unique(off)) <= {0.0, 1.0}


# --- Lyapunov -------------------------------------------------------------------


def test_lyapunov_minus_identity():
    Q = dyn.solve_lyapunov_continuous(-np.eye(2)).Q0
    assert np.allclose(Q, 0.5 * np.eye(2), atol=1e-14)


def test_lyapunov_symmetric_is_minus_half_inverse():
    A = np.array([[-2.0, 1.0], [1.0, -2.0]])
    Q = dyn.solve_lyapunov_continuous(A).Q0
    assert np.allclose(Q, 0.5 * np.array([[2 / 3, 1 / 3], [1 / 3, 2 / 3]]), atol=1e-14)


def test_lyapunov_unstable_rejected():
    with pytest.raises(NotStableError):
        dyn.solve_lyapunov_continuous(np.array([[0.5, 0.0], [0.0, -1.0]]))


def test_lyapunov_solver_error_carries_residual():
    with pytest.raises(SolverError) as exc:
        dyn.solve_lyapunov_continuous(-np.eye(3), tol=0.0 - 1.0)
    assert exc.value.residual >= 0


@given(st.integers(1, 32), st.integers(0, 10**6))
def test_lyapunov_residuals(p, seed):
    A = random_stable(np.random.default_rng(seed), p)
    cov = dyn.solve_lyapunov_continuous(A)
    assert dyn.continuous_residual(A, cov.Q0) <= 1e-10
    assert np.allclose(cov.Q0, cov.Q0.T)
    assert np.linalg.eigvalsh(cov.Q0)[0] > 0
    rho = -np.linalg.eigvalsh((A + A.T) / 2)[-1]
    eta = rho / np.linalg.norm(A, 2) ** 2
    d = dyn.solve_lyapunov_discrete(A, eta)
    assert dyn.discrete_residual(A, d.Q0, eta) <= 1e-10


def test_kronecker_and_schur_paths_agree(rng):
    A = random_stable(rng, 12)
    C = -np.eye(12)
    assert np.allclose(dyn._kron_lyap(A, C), scipy.linalg.solve_continuous_lyapunov(A, C), atol=1e-12)
    M = np.eye(12) + 0.05 * A
    assert np.allclose(dyn._kron_stein(M, -0.05 * np.eye(12)), scipy.linalg.solve_discrete_lyapunov(M, 0.05 * np.eye(12)), atol=1e-12)


def test_discrete_scalar_value():
    assert dyn.solve_lyapunov_discrete(np.array([[-1.0]]), 0.5).Q0[0, 0] == pytest.approx(2 / 3, abs=1e-14)
    assert dyn.solve_lyapunov_discrete(np.array([[-1.0]]), 0.0).Q0[0, 0] == pytest.approx(0.5, abs=1e-14)


def test_discrete_not_contractive():
    with pytest.raises(NotContractiveError):
        dyn.solve_lyapunov_discrete(np.array([[-1.0]]), 2.5)


@pytest.mark.parametrize("seed", range(5))
def test_discrete_converges_to_continuous(seed):
    m = dyn.make_random_binary_model(6, 2.0, seed)
    Qc = dyn.solve_lyapunov_continuous(m).Q0
    errs = [np.max(np.abs(dyn.solve_lyapunov_discrete(m, e).Q0 - Qc)) for e in (0.1, 0.01, 0.001)]
    assert errs[0] > errs[1] > errs[2]


def test_lyapunov_matches_long_run_covariance(rng):
    A = random_stable(rng, 5, scale=0.5)
    Q = dyn.solve_lyapunov_continuous(A).Q0
    tr = dyn.simulate_continuous(A, 20000.0, 0.005, 0.5, seed=4, keep_inner=False)
    emp = np.cov(tr.samples.T)
    assert np.max(np.abs(emp - Q)) <= 0.05 * np.max(np.abs(Q))


# --- simulation -----------------------------------------------------------------


def test_eta_zero_is_constant():
    tr = dyn.simulate_discrete(-np.eye(3), 0.0, 10, seed=1)
    assert np.all(tr.samples == tr.samples[0])


def test_discrete_scalar_stationary_variance():
    n, eta = 100_000, 0.1
    tr = dyn.simulate_discrete(np.array([[-1.0]]), eta, n, seed=11)
    Q = 1 / 1.9
    phi = 0.9
    sd = Q * math.sqrt(2 * (1 + phi**2) / (1 - phi**2) / n)
    assert abs(tr.samples[:, 0].var() - Q) <= 3 * sd


def test_lag_one_autocovariance():
    m = dyn.make_random_binary_model(3, 1.0, 2)
    eta = 0.1
    tr = dyn.simulate_discrete(m, eta, 200_000, seed=5)
    X = tr.samples
    lag1 = X[1:].T @ X[:-1] / (len(X) - 1)
    Q = dyn.solve_lyapunov_discrete(m, eta).Q0
    expect = (np.eye(3) + eta * m.A0) @ Q
    assert np.max(np.abs(lag1 - expect)) <= 0.05 * np.max(np.abs(expect))


def test_stationarity_ks():
    m = dyn.make_random_binary_model(3, 1.0, 8)
    first, mid = [], []
    for s in range(400):
        tr = dyn.simulate_discrete(m, 0.1, 40, seed=s)
        first.append(tr.samples[0, 0])
        mid.append(tr.samples[20, 0])
    assert ks_2samp(first, mid).pvalue > 0.001


def test_simulation_deterministic():
    m = dyn.make_random_binary_model(5, 2.0, 1)
    a = dyn.simulate_discrete(m, 0.1, 50, seed=9)
    b = dyn.simulate_discrete(m, 0.1, 50, seed=9)
    assert np.array_equal(a.samples, b.samples)
    c = dyn.simulate_continuous(m, 5.0, None, 0.1, seed=9)
    d = dyn.simulate_continuous(m, 5.0, None, 0.1, seed=9)
    assert np.array_equal(c.inner, d.inner)


def test_continuous_with_delta_equal_eta_is_the_recursion():
    m = dyn.make_random_binary_model(4, 1.0, 3)
    eta = 0.1
    tr = dyn.simulate_continuous(m, 3.0, eta, eta, seed=2)
    M = np.eye(4) + eta * m.A0
    assert np.allclose(tr.samples[1:] - tr.samples[:-1] @ M.T, tr.increments, atol=1e-13)


def test_continuous_scalar_variance():
    T, d = 1000.0, 0.001
    tr = dyn.simulate_continuous(np.array([[-1.0]]), T, d, 0.01, seed=21, keep_inner=False)
    sd = 0.5 * math.sqrt(2 / T)
    assert abs(tr.samples[:, 0].var() - 0.5) <= 3 * sd


def test_subsampling_consistency():
    m = dyn.make_random_binary_model(4, 1.0, 3)
    trs = {e: dyn.simulate_continuous(m, 2.0, 0.025 / 8, e, seed=6) for e in (0.1, 0.05, 0.025)}
    assert np.array_equal(trs[0.1].samples, trs[0.025].samples[::4])
    assert np.array_equal(trs[0.05].samples, trs[0.025].samples[::2])
    assert np.array_equal(trs[0.025].resample(0.1).samples, trs[0.1].samples)


def test_subsampling_errors():
    with pytest.raises(BadSubsamplingError):
        dyn.simulate_continuous(-np.eye(2), 1.0, 0.03, 0.1, seed=0)
    with pytest.raises(BadSubsamplingError):
        dyn.simulate_continuous(-np.eye(2), 1.0, 0.2, 0.1, seed=0)
    with pytest.raises(BadSubsamplingError):
        dyn.simulate_continuous(-np.eye(2), 1.05, 0.01, 0.1, seed=0)


def test_head_prefix():
    tr = dyn.simulate_continuous(-np.eye(2), 2.0, 0.01, 0.1, seed=0)
    h = tr.head(5)
    assert h.n == 5 and np.array_equal(h.samples, tr.samples[:6])
    assert np.array_equal(h.inner, tr.inner[:51])


def test_coupling_transform_for_minus_identity():
    eta = 0.2
    L = dyn.coupling_transform(-np.eye(3), eta)
    assert np.allclose(L, math.sqrt(2 / (2 - eta)) * np.eye(3), atol=1e-12)


def test_coupled_pair_shares_noise():
    m = dyn.make_random_binary_model(3, 1.0, 4)
    disc, cont = dyn.simulate_coupled(m, T=2.0, n=20, seed=3, delta=0.01)
    eta = 0.1
    M = np.eye(3) + eta * m.A0
    w = disc.samples[1:] - disc.samples[:-1] @ M.T
    assert np.allclose(w.sum(axis=0), cont.increments.sum(axis=0), atol=1e-12)
    assert np.allclose(disc.samples[0], dyn.coupling_transform(m, eta) @ cont.samples[0])
    assert disc.provenance == cont.provenance == "coupled"
