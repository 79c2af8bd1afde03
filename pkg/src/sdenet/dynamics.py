"""System matrices, stationary covariances and trajectory simulation.

Two models share one drift matrix ``A0``:

* continuous time, ``dx = A0 x dt + db`` with ``b`` a standard Brownian
  motion; simulated by Euler-Maruyama at an inner step ``delta`` and
  returned subsampled every ``eta``;
* discrete time, ``x(t) = x(t-1) + eta A0 x(t-1) + w(t)`` with
  ``w(t) ~ N(0, eta I)``.

Both simulators start in the stationary state of the model they simulate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .errors import (
    BadSubsamplingError,
    NotContractiveError,
    NotStableError,
    SdenetError,
    SolverError,
)
from .rng import MODEL_STREAM, PATH_STREAM, stream

ENSEMBLES = ("binary-literal", "stabilized-binary", "laplacian", "explicit")
PROVENANCES = ("discrete-native", "subsampled-continuous", "coupled")

# dense Kronecker solves up to this dimension, Bartels-Stewart above it
KRON_MAX_P = 16
DEFAULT_TOL = 1e-10
SQRT_CLIP = 1e-12
DEFAULT_INNER_STEPS = 32
# sigma_max within this of 1 counts as non-contractive: the Stein equation is
# numerically singular there
CONTRACTION_MARGIN = 1e-12


def _readonly(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SystemModel:
    """Drift matrix plus the sparsity metadata the estimators are scored on."""

    A0: np.ndarray
    ensemble: str = "explicit"
    params: dict = field(default_factory=dict)
    seed: Optional[int] = None
    stable: bool = False
    supports: tuple = ()

    def __post_init__(self):
        A0 = _readonly(self.A0)
        if A0.ndim != 2 or A0.shape[0] != A0.shape[1]:
            raise SdenetError("A0 must be square")
        if self.ensemble not in ENSEMBLES:
            raise SdenetError(f"unknown ensemble {self.ensemble!r}")
        object.__setattr__(self, "A0", A0)
        supports = tuple(np.flatnonzero(row) for row in A0)
        for s in supports:
            s.setflags(write=False)
        object.__setattr__(self, "supports", supports)
        eig = np.linalg.eigvals(A0)
        object.__setattr__(self, "stable", bool(np.all(eig.real < 0)))

    @property
    def p(self) -> int:
        return self.A0.shape[0]

    def signed_support(self, row: int) -> np.ndarray:
        return np.sign(self.A0[row]).astype(int)

    def a_min(self, row: int) -> float:
        s = self.supports[row]
        return float(np.min(np.abs(self.A0[row, s]))) if len(s) else math.inf

    def rho_min(self) -> float:
        """Minus the top eigenvalue of the symmetric part of A0."""
        return float(-np.linalg.eigvalsh((self.A0 + self.A0.T) / 2.0)[-1])

    def sigma_max(self, eta: float) -> float:
        return float(np.linalg.norm(np.eye(self.p) + eta * self.A0, 2))

    def contractive(self, eta: float) -> bool:
        return self.sigma_max(eta) < 1.0 - CONTRACTION_MARGIN

    def permuted(self, perm) -> "SystemModel":
        """Relabel nodes: new node i is old node perm[i]."""
        perm = np.asarray(perm)
        return SystemModel(self.A0[np.ix_(perm, perm)], self.ensemble, dict(self.params), self.seed)


def explicit_model(A0) -> SystemModel:
    return SystemModel(np.atleast_2d(np.asarray(A0, dtype=float)), "explicit")


def make_random_binary_model(p: int, k: float, seed: int, variant: str = "stabilized") -> SystemModel:
    """Random {0,1} matrix with independent entries, P(A_ij = 1) = k/p.

    ``variant="binary-literal"`` returns the matrix as drawn. ``"stabilized"``
    subtracts ``c I`` with ``c = max_i (rowsum_i + colsum_i)/2 + 1``, which
    by Gershgorin makes the symmetric part negative definite (top eigenvalue
    at most -1).
    """
    if p < 2:
        raise SdenetError("p must be at least 2")
    if not 0 <= k < p:
        raise SdenetError("k must satisfy 0 <= k < p")
    if variant not in ("binary-literal", "stabilized"):
        raise SdenetError(f"unknown variant {variant!r}")
    rng = stream(seed, MODEL_STREAM)
    B = (rng.random((p, p)) < k / p).astype(float)
    params = {"k": float(k), "variant": variant}
    if variant == "binary-literal":
        return SystemModel(B, "binary-literal", params, seed)
    c = float(np.max(B.sum(axis=1) + B.sum(axis=0)) / 2.0 + 1.0)
    params["shift"] = c
    model = SystemModel(B - c * np.eye(p), "stabilized-binary", params, seed)
    if model.rho_min() <= 0:
        raise NotStableError("stabilizing shift failed to make the symmetric part negative definite")
    return model


def make_laplacian_model(adjacency, m: float) -> SystemModel:
    """A0 = -m I + laplacian(adjacency) for a connected simple graph."""
    adj = np.asarray(adjacency, dtype=float)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise SdenetError("adjacency must be square")
    if not np.array_equal(adj, adj.T):
        raise SdenetError("adjacency must be symmetric")
    if np.any(np.diag(adj) != 0) or not np.all((adj == 0) | (adj == 1)):
        raise SdenetError("adjacency must be 0/1 with zero diagonal")
    if m <= 0:
        raise SdenetError("m must be positive")
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        raise SdenetError("graph must be connected")
    deg = adj.sum(axis=1)
    A0 = adj - np.diag(deg + m)
    return SystemModel(A0, "laplacian", {"m": float(m), "k": int(deg.max())})


def random_bounded_degree_graph(p: int, k: int, rng: np.random.Generator, extra: float = 0.5):
    """Random connected simple graph with maximum degree <= k.

    A random spanning tree is grown under the degree cap, then roughly
    ``extra * p`` further edges are attempted, each kept only if both ends
    still have spare degree.
    """
    if k < 2 and p > 2:
        raise SdenetError("a connected graph on more than two nodes needs k >= 2")
    adj = np.zeros((p, p))
    order = rng.permutation(p)
    for idx in range(1, p):
        node = order[idx]
        placed = order[:idx]
        open_ = [u for u in placed if adj[u].sum() < k]
        u = open_[rng.integers(len(open_))]
        adj[node, u] = adj[u, node] = 1
    for _ in range(int(extra * p)):
        i, j = rng.choice(p, size=2, replace=False)
        if adj[i, j] == 0 and adj[i].sum() < k and adj[j].sum() < k:
            adj[i, j] = adj[j, i] = 1
    return adj


def as_model(model) -> SystemModel:
    return model if isinstance(model, SystemModel) else explicit_model(model)


# --- stationary covariances -------------------------------------------------


@dataclass(frozen=True)
class StationaryCovariance:
    Q0: np.ndarray
    kind: str
    eta: Optional[float] = None
    residual: float = 0.0


def continuous_residual(A, Q) -> float:
    return float(np.max(np.abs(A @ Q + Q @ A.T + np.eye(A.shape[0]))))


def discrete_residual(A, Q, eta) -> float:
    return float(np.max(np.abs(A @ Q + Q @ A.T + eta * A @ Q @ A.T + np.eye(A.shape[0]))))


def _kron_lyap(A, C):
    """Solve A X + X A^T = C by the vectorized linear system."""
    p = A.shape[0]
    I = np.eye(p)
    K = np.kron(A, I) + np.kron(I, A)
    return np.linalg.solve(K, C.reshape(-1)).reshape(p, p)


def _kron_stein(M, C):
    """Solve M X M^T - X = C by the vectorized linear system."""
    p = M.shape[0]
    K = np.kron(M, M) - np.eye(p * p)
    return np.linalg.solve(K, C.reshape(-1)).reshape(p, p)


def _lyap(A, C):
    if A.shape[0] <= KRON_MAX_P:
        return _kron_lyap(A, C)
    return scipy.linalg.solve_continuous_lyapunov(A, C)


def _stein(M, C):
    if M.shape[0] <= KRON_MAX_P:
        return _kron_stein(M, C)
    # scipy solves M X M^T - X + Q = 0
    return scipy.linalg.solve_discrete_lyapunov(M, -C)


def solve_lyapunov_continuous(model, tol: float = DEFAULT_TOL) -> StationaryCovariance:
    """Q0 with A0 Q0 + Q0 A0^T + I = 0."""
    model = as_model(model)
    if not model.stable:
        raise NotStableError("A0 has an eigenvalue with nonnegative real part")
    A = model.A0
    I = np.eye(model.p)
    Q = _lyap(A, -I)
    Q = (Q + Q.T) / 2.0
    # one step of iterative refinement on the residual
    R = A @ Q + Q @ A.T + I
    Q = Q + _lyap(A, -R)
    Q = (Q + Q.T) / 2.0
    res = continuous_residual(A, Q)
    if not res <= tol:
        raise SolverError(f"Lyapunov residual {res:.3e} exceeds tol {tol:.1e}", res)
    return StationaryCovariance(Q, "continuous", None, res)


def solve_lyapunov_discrete(model, eta: float, tol: float = DEFAULT_TOL) -> StationaryCovariance:
    """Q0(eta) with A0 Q + Q A0^T + eta A0 Q A0^T + I = 0.

    Solved in the equivalent Stein form M Q M^T - Q + eta I = 0 with
    M = I + eta A0. ``eta = 0`` falls back to the continuous equation.
    """
    model = as_model(model)
    if eta < 0:
        raise SdenetError("eta must be nonnegative")
    if eta == 0:
        cov = solve_lyapunov_continuous(model, tol)
        return StationaryCovariance(cov.Q0, "discrete", 0.0, cov.residual)
    smax = model.sigma_max(eta)
    if not smax < 1.0 - CONTRACTION_MARGIN:
        raise NotContractiveError(f"sigma_max(I + eta A0) = {smax:.6f} >= 1")
    A = model.A0
    I = np.eye(model.p)
    M = I + eta * A
    Q = _stein(M, -eta * I)
    Q = (Q + Q.T) / 2.0
    R = M @ Q @ M.T - Q + eta * I
    Q = Q + _stein(M, -R)
    Q = (Q + Q.T) / 2.0
    res = discrete_residual(A, Q, eta)
    if not res <= tol:
        raise SolverError(f"modified Lyapunov residual {res:.3e} exceeds tol {tol:.1e}", res)
    return StationaryCovariance(Q, "discrete", float(eta), res)


def psd_sqrt(S, clip: float = SQRT_CLIP):
    """Symmetric square root of a PSD matrix, eigenvalues clipped at ``clip``."""
    w, V = np.linalg.eigh((S + S.T) / 2.0)
    return (V * np.sqrt(np.maximum(w, clip))) @ V.T


# --- trajectories -------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """n+1 samples spaced ``eta`` apart.

    Continuous-time trajectories may also carry the inner Euler grid
    (``inner``, spacing ``delta``) and its Brownian increments, which the
    continuous-time likelihood needs.
    """

    samples: np.ndarray
    eta: float
    provenance: str
    seed: int
    delta: Optional[float] = None
    inner: Optional[np.ndarray] = None
    increments: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise SdenetError(f"unknown provenance {self.provenance!r}")
        samples = np.atleast_2d(self.samples)
        if samples.shape[0] < 2:
            raise SdenetError("a trajectory needs at least two samples")
        if self.eta < 0:
            raise SdenetError("eta must be nonnegative")
        object.__setattr__(self, "samples", _readonly(samples))
        for name in ("inner", "increments"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _readonly(val))

    @property
    def n(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def p(self) -> int:
        return self.samples.shape[1]

    @property
    def T(self) -> float:
        return self.n * self.eta

    @property
    def has_inner(self) -> bool:
        return self.inner is not None

    def head(self, n: int) -> "Trajectory":
        """The first n transitions (n+1 samples)."""
        if not 1 <= n <= self.n:
            raise SdenetError("prefix length out of range")
        inner = incr = None
        if self.inner is not None:
            ratio = _ratio(self.eta, self.delta)
            inner = self.inner[: n * ratio + 1]
            incr = None if self.increments is None else self.increments[: n * ratio]
        return Trajectory(self.samples[: n + 1], self.eta, self.provenance, self.seed, self.delta, inner, incr)

    def resample(self, eta: float) -> "Trajectory":
        """Subsample the inner grid at a new spacing (continuous data only)."""
        if self.inner is None:
            raise SdenetError("resampling needs inner-resolution data")
        ratio = _ratio(eta, self.delta)
        N = self.inner.shape[0] - 1
        if N % ratio:
            raise BadSubsamplingError("eta must divide the observed interval")
        return Trajectory(self.inner[::ratio], float(eta), self.provenance, self.seed, self.delta, self.inner, self.increments)


def _ratio(big: float, small: float) -> int:
    if small is None or small <= 0 or big <= 0:
        raise BadSubsamplingError("spacings must be positive")
    r = big / small
    ri = int(round(r))
    if ri < 1 or abs(r - ri) > 1e-9 * max(1.0, r):
        raise BadSubsamplingError(f"{small} does not divide {big}")
    return ri


def _gaussian(rng, cov):
    return psd_sqrt(cov) @ rng.standard_normal(cov.shape[0])


def simulate_discrete(model, eta: float, n: int, seed: int, noise: bool = True) -> Trajectory:
    """Stationary run of x(t) = (I + eta A0) x(t-1) + w(t), w ~ N(0, eta I).

    ``noise=False`` keeps the random stationary start but drops w, giving a
    deterministic relaxation (used for degenerate sanity checks).
    """
    model = as_model(model)
    if n < 1:
        raise SdenetError("n must be at least 1")
    cov = solve_lyapunov_discrete(model, eta)
    rng = stream(seed, PATH_STREAM)
    x0 = _gaussian(rng, cov.Q0)
    w = math.sqrt(eta) * rng.standard_normal((n, model.p))
    if not noise:
        w[:] = 0.0
    M = np.eye(model.p) + eta * model.A0
    states = _kernels.linear_recursion(M, x0, w)
    return Trajectory(states, float(eta), "discrete-native", int(seed))


def _euler_path(model, T, delta, seed):
    N = _ratio(T, delta)
    cov = solve_lyapunov_continuous(model)
    rng = stream(seed, PATH_STREAM)
    x0 = _gaussian(rng, cov.Q0)
    db = math.sqrt(delta) * rng.standard_normal((N, model.p))
    M = np.eye(model.p) + delta * model.A0
    return _kernels.linear_recursion(M, x0, db), db, cov


def simulate_continuous(model, T: float, delta: Optional[float], eta: float, seed: int, keep_inner: bool = True) -> Trajectory:
    """Euler-Maruyama at step delta from x(0) ~ N(0, Q0), sampled every eta.

    ``delta=None`` uses eta / 32. The inner path depends only on
    (model, T, delta, seed), so runs that differ only in eta observe the
    same Brownian path.
    """
    model = as_model(model)
    if delta is None:
        delta = eta / DEFAULT_INNER_STEPS
    if delta > eta:
        raise BadSubsamplingError("delta must not exceed eta")
    ratio = _ratio(eta, delta)
    _ratio(T, eta)
    inner, db, _ = _euler_path(model, T, delta, seed)
    samples = inner[::ratio]
    if keep_inner:
        return Trajectory(samples, float(eta), "subsampled-continuous", int(seed), float(delta), inner, db)
    return Trajectory(samples, float(eta), "subsampled-continuous", int(seed), float(delta))


def coupling_transform(model, eta: float):
    """Q0(eta)^{1/2} Q0^{-1/2}, mapping a continuous stationary state to a discrete one."""
    Qc = solve_lyapunov_continuous(model).Q0
    Qd = solve_lyapunov_discrete(model, eta).Q0
    w, V = np.linalg.eigh(Qc)
    inv_root = (V / np.sqrt(np.maximum(w, SQRT_CLIP))) @ V.T
    return psd_sqrt(Qd) @ inv_root


def simulate_coupled(model, T: float, n: int, seed: int, delta: float):
    """Discrete and continuous trajectories driven by one Brownian path.

    The discrete chain uses eta = T/n, noise w(i) = b(i eta) - b((i-1) eta)
    and starts from the continuous initial state mapped through
    ``coupling_transform``. Returns (discrete, continuous).
    """
    model = as_model(model)
    eta = T / n
    ratio = _ratio(eta, delta)
    L = coupling_transform(model, eta)
    inner, db, _ = _euler_path(model, T, delta, seed)
    w = db.reshape(n, ratio, model.p).sum(axis=1)
    M = np.eye(model.p) + eta * model.A0
    disc = _kernels.linear_recursion(M, L @ inner[0], w)
    cont = Trajectory(inner[::ratio], float(eta), "coupled", int(seed), float(delta), inner, db)
    return Trajectory(disc, float(eta), "coupled", int(seed)), cont
