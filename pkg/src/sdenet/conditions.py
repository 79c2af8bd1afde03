"""Recovery conditions, sample-complexity bounds and numerical audits.

``compute_condition_report`` collects every quantity the recovery theorems
are stated in. ``check_prop3`` evaluates the four sufficient conditions on
a concrete (G_hat, Q_hat). The ``empirical_tail_*`` functions compare Monte
Carlo tail rates with the closed-form concentration bounds, and the
``verify_*`` functions rebuild the matrices used in the supporting lemmas
and check the stated identities and inequalities at small scale.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import (
    SystemModel,
    as_model,
    make_laplacian_model,
    psd_sqrt,
    solve_lyapunov_continuous,
    solve_lyapunov_discrete,
)
from .errors import NotContractiveError, OutOfRegimeError, SdenetError, TooLargeError
from .estimator import GradientHessian, inf_norm, solve_quadratic_lasso, support_matches
from .rng import PATH_STREAM, stream
from .stats import wilson_interval

SERIES_TOL = 1e-16
SERIES_MAX_TERMS = 100_000
SPECTRAL_MAX_DIM = 200
DEFAULT_DELTA = 0.1


def _split(p, S):
    S = np.asarray(sorted(int(s) for s in S), dtype=int)
    return S, np.setdiff1d(np.arange(p), S)


def incoherence(Q, S) -> float:
    """|||Q_ScS Q_SS^-1|||_inf; zero when either block is empty."""
    S, Sc = _split(Q.shape[0], S)
    if len(S) == 0 or len(Sc) == 0:
        return 0.0
    return inf_norm(Q[np.ix_(Sc, S)] @ np.linalg.inv(Q[np.ix_(S, S)]))


def c_min(Q, S) -> float:
    S = np.asarray(sorted(S), dtype=int)
    return float(np.linalg.eigvalsh(Q[np.ix_(S, S)])[0]) if len(S) else math.inf


def _div(num, den):
    return num / den if den != 0 else math.nan


def bound_thm1(k, rho_min, A_min, alpha, C_min, p, delta) -> float:
    """10^4 k^2 (k rho^-2 + A_min^-2) / (alpha^2 rho C_min^2) log(4pk/delta)."""
    try:
        core = k * rho_min**-2 + A_min**-2
        return 1e4 * k**2 * core / (alpha**2 * rho_min * C_min**2) * math.log(4 * p * k / delta)
    except (ZeroDivisionError, ValueError):
        return math.nan


def bound_thm2(k, m, p, delta) -> float:
    """2 10^5 k^2 ((k+m)/m)^5 (k + m^2) log(4pk/delta)."""
    return 2e5 * k**2 * ((k + m) / m) ** 5 * (k + m**2) * math.log(4 * p * k / delta)


def bound_thm3(k, D, A_min, alpha, C_min, p, delta) -> float:
    """10^4 k^2 (k D^-2 + A_min^-2) / (alpha^2 D C_min^2) log(4pk/delta)."""
    return bound_thm1(k, D, A_min, alpha, C_min, p, delta)


@dataclass(frozen=True)
class ConditionReport:
    p: int
    row: int
    k: float
    delta: float
    C_min: float
    alpha: float
    rho_min: float
    A_min: float
    T_thm1: float
    T_thm2: Optional[float] = None
    eta: Optional[float] = None
    sigma_max: Optional[float] = None
    D: Optional[float] = None
    C_min_eta: Optional[float] = None
    alpha_eta: Optional[float] = None
    n_eta_thm3: Optional[float] = None
    failures: tuple = ()
    prop3: Optional[dict] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["failures"] = list(self.failures)
        return d


def compute_condition_report(model, row: int, eta: Optional[float] = None, delta: float = DEFAULT_DELTA, k: Optional[float] = None) -> ConditionReport:
    """Theorem hypotheses and bounds for one row.

    ``k`` defaults to the row's support size; the laplacian bound uses the
    graph's maximum degree. Hypothesis failures are listed in ``failures``
    rather than raised.
    """
    model = as_model(model)
    p = model.p
    if not 0 <= row < p:
        raise SdenetError("row out of range")
    S = model.supports[row]
    if k is None:
        k = max(len(S), 1)
    Qc = solve_lyapunov_continuous(model).Q0
    cmin = c_min(Qc, S)
    alpha = 1.0 - incoherence(Qc, S)
    rho = model.rho_min()
    amin = model.a_min(row)
    failures = []
    if cmin <= 0:
        failures.append("C_min<=0")
    if alpha <= 0:
        failures.append("alpha<=0")
    if rho <= 0:
        failures.append("rho_min<=0")
    t1 = bound_thm1(k, rho, amin, alpha, cmin, p, delta)
    t2 = None
    if model.ensemble == "laplacian":
        t2 = bound_thm2(model.params["k"], model.params["m"], p, delta)
    fields = {}
    if eta is not None:
        smax = model.sigma_max(eta)
        D = (1.0 - smax) / eta
        fields.update(eta=float(eta), sigma_max=smax, D=D)
        if not model.contractive(eta):
            failures.append("D<=0")
            fields.update(C_min_eta=math.nan, alpha_eta=math.nan, n_eta_thm3=math.nan)
        else:
            Qd = solve_lyapunov_discrete(model, eta).Q0
            cd = c_min(Qd, S)
            ad = 1.0 - incoherence(Qd, S)
            if cd <= 0:
                failures.append("C_min_eta<=0")
            if ad <= 0:
                failures.append("alpha_eta<=0")
            fields.update(C_min_eta=cd, alpha_eta=ad, n_eta_thm3=bound_thm3(k, D, amin, ad, cd, p, delta))
    return ConditionReport(p, row, float(k), float(delta), cmin, alpha, rho, amin, t1, t2, failures=tuple(failures), **fields)


# --- sufficient conditions -------------------------------------------------


@dataclass(frozen=True)
class Inequality:
    value: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - self.value

    @property
    def holds(self) -> bool:
        return self.value <= self.bound


@dataclass(frozen=True)
class Prop3Report:
    gradient: Inequality
    gradient_support: Inequality
    hessian_off: Inequality
    hessian_support: Inequality

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in (self.gradient, self.gradient_support, self.hessian_off, self.hessian_support))

    def to_dict(self) -> dict:
        out = {}
        for name in ("gradient", "gradient_support", "hessian_off", "hessian_support"):
            c = getattr(self, name)
            out[name] = {"value": c.value, "bound": c.bound, "slack": c.slack, "holds": c.holds}
        out["all_hold"] = self.all_hold
        return out


def check_prop3(gh: GradientHessian, Q0, S0, lam: float, A_min: float, C_min: float, alpha: float, k: float) -> Prop3Report:
    """The four sufficient conditions for signed-support recovery."""
    if gh.G_hat is None:
        raise SdenetError("check_prop3 needs G_hat (ground-truth gradient)")
    Q0 = np.asarray(Q0)
    S, Sc = _split(Q0.shape[0], S0)
    G = gh.G_hat
    dQ = gh.Q_hat - Q0
    q_bound = alpha / 12.0 * C_min / math.sqrt(k)
    return Prop3Report(
        gradient=Inequality(float(np.max(np.abs(G))), lam * alpha / 3.0),
        gradient_support=Inequality(float(np.max(np.abs(G[S]))) if len(S) else 0.0, A_min * C_min / (4.0 * k) - lam),
        hessian_off=Inequality(inf_norm(dQ[np.ix_(Sc, S)]) if len(Sc) and len(S) else 0.0, q_bound),
        hessian_support=Inequality(inf_norm(dQ[np.ix_(S, S)]) if len(S) else 0.0, q_bound),
    )


# --- Monte Carlo concentration checks ------------------------------------


def batch_moments(model, eta: float, n: int, trials: int, seed: int, row: int = 0, start: str = "stationary", m: int = 0):
    """Per-trial G_hat for ``row`` and Q_hat from independent trajectories.

    Trajectories run in lockstep as a (trials, p) state array. With
    ``start="stationary"`` each begins in N(0, Q0(eta)) and Q_hat averages
    x(0..n-1). With ``start="cold"`` each begins at x(-m) = w(-m) and Q_hat
    averages the n+m states x(-m..n-1); G_hat then covers t = 0..n-1 only.
    Returns (G_hat [trials, p], Q_hat [trials, p, p]).
    """
    model = as_model(model)
    p = model.p
    M = np.eye(p) + eta * model.A0
    rng = stream(seed, PATH_STREAM)
    sq = math.sqrt(eta)
    G = np.zeros((trials, p))
    Q = np.zeros((trials, p, p))
    if start == "stationary":
        Q0 = solve_lyapunov_discrete(model, eta).Q0
        x = rng.standard_normal((trials, p)) @ psd_sqrt(Q0)
        burn, count = 0, n
    elif start == "cold":
        x = sq * rng.standard_normal((trials, p))
        burn, count = m, n + m
    else:
        raise SdenetError(f"unknown start {start!r}")
    total = burn + n
    # keep each block near 32 MB
    chunk = max(1, (1 << 22) // (trials * p * p))
    t = 0
    while t < total:
        steps = min(chunk, total - t)
        block = np.empty((steps, trials, p))
        noise = sq * rng.standard_normal((steps, trials, p))
        for s in range(steps):
            block[s] = x
            x = x @ M.T + noise[s]
        Q += np.einsum("sti,stj->tij", block, block)
        # gradient pairs x(t) with w_r(t+1) for observed times only
        lo = max(0, burn - t)
        if lo < steps:
            G += np.einsum("sti,st->ti", block[lo:], noise[lo:, :, row])
        t += steps
    return G / (n * eta), Q / count


@dataclass(frozen=True)
class TailResult:
    rate: float
    lo: float
    hi: float
    bound: float
    exceed: int
    trials: int

    @property
    def violation(self) -> bool:
        """Only a significant excess counts: the Wilson lower limit above the bound."""
        return self.lo > self.bound


def _tail(exceed, trials, bound, confidence):
    lo, hi = wilson_interval(int(exceed), trials, confidence)
    return TailResult(exceed / trials, lo, hi, float(bound), int(exceed), trials)


def gradient_tail_bound(n, sigma_max, S_size, epsilon) -> float:
    return 2 * S_size * math.exp(-n * (1 - sigma_max) * epsilon**2 / 4.0)


def covariance_tail_bound(n, eta, sigma_max, epsilon) -> float:
    return 2 * math.exp(-n / (32 * eta**2) * (1 - sigma_max) ** 3 * epsilon**2)


def covariance_matrix_tail_bound(n, eta, sigma_max, J_size, k, epsilon) -> float:
    return 2 * J_size * k * math.exp(-n / (32 * k**2 * eta**2) * (1 - sigma_max) ** 3 * epsilon**2)


def empirical_tail_gradient(model, eta: float, n: int, S: Sequence[int], epsilon: float, trials: int, row: int = 0, seed: int = 0, confidence: float = 0.95, moments=None) -> TailResult:
    """P(|G_hat_S|_inf > eps) by Monte Carlo against 2|S| exp(-n (1-sigma) eps^2 / 4)."""
    model = as_model(model)
    smax = model.sigma_max(eta)
    if not model.contractive(eta):
        raise NotContractiveError("sigma_max(I + eta A0) >= 1")
    if not epsilon < 0.5:
        raise OutOfRegimeError("the gradient bound assumes epsilon < 1/2")
    S = np.asarray(list(S), dtype=int)
    G, _ = moments if moments is not None else batch_moments(model, eta, n, trials, seed, row)
    exceed = int(np.sum(np.max(np.abs(G[:, S]), axis=1) > epsilon))
    return _tail(exceed, G.shape[0], gradient_tail_bound(n, smax, len(S), epsilon), confidence)


def _cov_regime(model, eta, n):
    smax = model.sigma_max(eta)
    if not model.contractive(eta):
        raise NotContractiveError("sigma_max(I + eta A0) >= 1")
    D = (1 - smax) / eta
    if not n * eta > 3 / D:
        raise OutOfRegimeError("needs n eta > 3/D")
    return smax, D


def empirical_tail_covariance(model, eta: float, n: int, i: int, j: int, epsilon: float, trials: int, seed: int = 0, confidence: float = 0.95, moments=None) -> TailResult:
    """P(|Q_hat_ij - Q0_ij| > eps) against 2 exp(-(n / 32 eta^2) (1-sigma)^3 eps^2)."""
    model = as_model(model)
    smax, D = _cov_regime(model, eta, n)
    if not 0 < epsilon < 2 / D:
        raise OutOfRegimeError("needs 0 < epsilon < 2/D")
    Q0 = solve_lyapunov_discrete(model, eta).Q0
    _, Q = moments if moments is not None else batch_moments(model, eta, n, trials, seed)
    exceed = int(np.sum(np.abs(Q[:, i, j] - Q0[i, j]) > epsilon))
    return _tail(exceed, Q.shape[0], covariance_tail_bound(n, eta, smax, epsilon), confidence)


@dataclass(frozen=True)
class MatrixTailResult:
    norm: TailResult
    entrywise_rates: np.ndarray
    union_bound: float

    @property
    def union_consistent(self) -> bool:
        """Matrix-norm rate never exceeds the summed entrywise rates at eps/|S|."""
        return self.norm.rate <= float(np.sum(self.entrywise_rates)) + 1e-15


def empirical_tail_covariance_matrix(model, eta: float, n: int, J: Sequence[int], S: Sequence[int], epsilon: float, trials: int, seed: int = 0, confidence: float = 0.95, moments=None) -> MatrixTailResult:
    """P(|||Q_hat_JS - Q0_JS|||_inf > eps) against 2 |J| k exp(-n (1-sigma)^3 eps^2 / (32 k^2 eta^2)), k = |S|.

    Also returns, on the same samples, the entrywise exceedance rates at
    eps/|S| and the union bound |J||S| max_ij bound(eps/|S|).
    """
    model = as_model(model)
    smax, D = _cov_regime(model, eta, n)
    J = np.asarray(list(J), dtype=int)
    S = np.asarray(list(S), dtype=int)
    k = len(S)
    if not 0 < epsilon < 2 * k / D:
        raise OutOfRegimeError("needs 0 < epsilon < 2k/D")
    Q0 = solve_lyapunov_discrete(model, eta).Q0
    _, Q = moments if moments is not None else batch_moments(model, eta, n, trials, seed)
    dQ = Q[:, J][:, :, S] - Q0[np.ix_(J, S)]
    norms = np.max(np.sum(np.abs(dQ), axis=2), axis=1)
    exceed = int(np.sum(norms > epsilon))
    entry = np.mean(np.abs(dQ) > epsilon / k, axis=0)
    eps_entry = epsilon / k
    union = len(J) * k * covariance_tail_bound(n, eta, smax, eps_entry)
    res = _tail(exceed, Q.shape[0], covariance_matrix_tail_bound(n, eta, smax, len(J), k, epsilon), confidence)
    return MatrixTailResult(res, entry, union)


# --- lemma verifiers ---------------------------------------------------------


@dataclass(frozen=True)
class DecompositionReport:
    T1: np.ndarray
    T2: np.ndarray
    T3: np.ndarray
    identity_residual: float
    precondition: bool
    bounds: dict = field(default_factory=dict)

    @property
    def bounds_hold(self) -> bool:
        return all(b.holds for b in self.bounds.values())


def verify_decomposition(Q_hat, Q0, S, C_min: Optional[float] = None, k: Optional[float] = None) -> DecompositionReport:
    """Split Q_hat_ScS Q_hat_SS^-1 into T1 + T2 + T3 + Q0_ScS Q0_SS^-1 and bound each term."""
    Q_hat = np.asarray(Q_hat, dtype=float)
    Q0 = np.asarray(Q0, dtype=float)
    S, Sc = _split(Q0.shape[0], S)
    if len(S) == 0:
        raise SdenetError("empty support")
    k = len(S) if k is None else k
    C_min = c_min(Q0, S) if C_min is None else C_min
    try:
        Qh_inv = np.linalg.inv(Q_hat[np.ix_(S, S)])
        Q0_inv = np.linalg.inv(Q0[np.ix_(S, S)])
    except np.linalg.LinAlgError as exc:
        raise SdenetError("singular support block") from exc
    Q0_cs = Q0[np.ix_(Sc, S)]
    dcs = Q_hat[np.ix_(Sc, S)] - Q0_cs
    dss = Q_hat[np.ix_(S, S)] - Q0[np.ix_(S, S)]
    dinv = Qh_inv - Q0_inv
    T1 = Q0_cs @ dinv
    T2 = dcs @ Q0_inv
    T3 = dcs @ dinv
    lhs = Q_hat[np.ix_(Sc, S)] @ Qh_inv
    resid = float(np.max(np.abs(lhs - (T1 + T2 + T3 + Q0_cs @ Q0_inv)))) if lhs.size else 0.0
    pre = bool(c_min(Q_hat, S) >= C_min / 2 > 0 and incoherence(Q0, S) < 1)
    bounds = {}
    if pre:
        nss, ncs = inf_norm(dss), inf_norm(dcs) if dcs.size else 0.0
        rk = math.sqrt(k)
        bounds = {
            "T1": Inequality(inf_norm(T1) if T1.size else 0.0, 2 * rk / C_min * nss),
            "T2": Inequality(inf_norm(T2) if T2.size else 0.0, rk / C_min * ncs),
            "T3": Inequality(inf_norm(T3) if T3.size else 0.0, 2 * rk / C_min**2 * ncs * nss),
        }
    return DecompositionReport(T1, T2, T3, resid, pre, bounds)


def _power_rows(M, row, count):
    """row ``row`` of M^tau for tau = 0..count-1, stacked."""
    p = M.shape[0]
    out = np.empty((count, p))
    v = np.zeros(p)
    v[row] = 1.0
    for tau in range(count):
        out[tau] = v
        v = v @ M
    return out


def gradient_block_matrix(model, eta: float, n: int, m: int, r: int, j: int):
    """The block lower-triangular matrix R~(j) of size p(n+m+1).

    Block rows and columns are indexed by time -m..n. Block (t+1, s) for
    t = 0..n-1 and s <= t holds a p x p matrix whose only nonzero row is
    row r, equal to row j of (I + eta A0)^(t-s). With z the stacked noise
    divided by sqrt(eta), X_j W_r' = eta z' R~ z.
    """
    model = as_model(model)
    p = model.p
    M = np.eye(p) + eta * model.A0
    size = n + m + 1
    rows = _power_rows(M, j, n + m)
    R = np.zeros((p * size, p * size))
    for a in range(m + 1, size):
        for c in range(a):
            tau = a - 1 - c
            R[a * p + r, c * p:(c + 1) * p] = rows[tau]
    return R


def hessian_block_matrix(model, eta: float, n: int, m: int, j: int):
    """Phi_j of shape n x p(n+m): row t holds row j of (I + eta A0)^(t+m-c) in block column c."""
    model = as_model(model)
    p = model.p
    M = np.eye(p) + eta * model.A0
    rows = _power_rows(M, j, n + m)
    Phi = np.zeros((n, p * (n + m)))
    for t in range(n):
        for c in range(t + m + 1):
            Phi[t, c * p:(c + 1) * p] = rows[t + m - c]
    return Phi


@dataclass(frozen=True)
class SpectralReport:
    sigma_max: float
    trace: float
    grad_max_eig: Inequality
    grad_sum_sq: Inequality
    hess_max_eig: Inequality
    hess_mean_sq: Inequality
    trace_tol: float = 1e-10

    @property
    def all_hold(self) -> bool:
        return abs(self.trace) <= self.trace_tol and all(
            c.holds for c in (self.grad_max_eig, self.grad_sum_sq, self.hess_max_eig, self.hess_mean_sq)
        )


def verify_spectral_lemmas(model, eta: float, n: int, m: int, r: int, j: int, i: int) -> SpectralReport:
    """Eigenvalue bounds for the symmetrized gradient and Hessian block matrices."""
    model = as_model(model)
    p = model.p
    if p * (n + m + 1) > SPECTRAL_MAX_DIM:
        raise TooLargeError(f"block matrix dimension {p * (n + m + 1)} exceeds {SPECTRAL_MAX_DIM}")
    smax = model.sigma_max(eta)
    if not model.contractive(eta):
        raise NotContractiveError("sigma_max(I + eta A0) >= 1")
    g = 1.0 - smax
    Rt = gradient_block_matrix(model, eta, n, m, r, j)
    R = (Rt + Rt.T) / 2.0
    nu = np.linalg.eigvalsh(R)
    Phi_i = hessian_block_matrix(model, eta, n, m, i)
    Phi_j = hessian_block_matrix(model, eta, n, m, j)
    H = (Phi_j.T @ Phi_i + Phi_i.T @ Phi_j) / 2.0
    mu = np.linalg.eigvalsh(H)
    return SpectralReport(
        sigma_max=smax,
        trace=float(np.sum(nu)),
        grad_max_eig=Inequality(float(np.max(np.abs(nu))), 1.0 / g),
        grad_sum_sq=Inequality(float(np.sum(nu**2)), 0.5 * n / g),
        hess_max_eig=Inequality(float(np.max(np.abs(mu))), 1.0 / g**2),
        hess_mean_sq=Inequality(float(np.sum(mu**2)) / n, 2.0 / g**3 * (1.0 + 1.5 / (n * g))),
    )


def stationary_series(model, eta: float):
    """Q0(eta) = eta sum_l rho^l rho'^l, truncated once a term drops below 1e-16."""
    model = as_model(model)
    M = np.eye(model.p) + eta * model.A0
    P = np.eye(model.p)
    total = np.zeros_like(P)
    for _ in range(SERIES_MAX_TERMS):
        term = P @ P.T
        total += term
        if np.max(np.abs(term)) < SERIES_TOL:
            break
        P = M @ P
    return eta * total


def expected_cold_start_hessian(model, eta: float, n: int, m: int):
    """E Q_hat = eta sum_{l<n+m} (n+m-l)/(n+m) rho^l rho'^l for a chain started at x(-m) = w(-m)."""
    model = as_model(model)
    M = np.eye(model.p) + eta * model.A0
    N = n + m
    P = np.eye(model.p)
    total = np.zeros_like(P)
    for l in range(N):
        total += (N - l) / N * (P @ P.T)
        P = M @ P
    return eta * total


@dataclass(frozen=True)
class BiasReport:
    expected: float
    stationary: float
    bias: Inequality
    mc_mean: Optional[float] = None
    mc_stderr: Optional[float] = None

    @property
    def mc_agrees(self) -> Optional[bool]:
        if self.mc_mean is None:
            return None
        return abs(self.mc_mean - self.expected) <= 3 * self.mc_stderr


def verify_bias_bound(model, eta: float, n: int, m: int, i: int, j: int, mc_trials: int = 0, seed: int = 0) -> BiasReport:
    """|E Q_hat_ij - Q0_ij| <= eta / ((n+m)(1-sigma)^2) for the cold-started chain.

    The Monte Carlo cross-check averages x_i x_j over the n+m states
    x(-m), ..., x(n-1), which is the average the closed form describes.
    """
    model = as_model(model)
    smax = model.sigma_max(eta)
    if not model.contractive(eta):
        raise NotContractiveError("sigma_max(I + eta A0) >= 1")
    E = expected_cold_start_hessian(model, eta, n, m)[i, j]
    Q0 = stationary_series(model, eta)[i, j]
    bias = Inequality(abs(E - Q0), eta / ((n + m) * (1 - smax) ** 2))
    if mc_trials:
        _, Q = batch_moments(model, eta, n, mc_trials, seed, start="cold", m=m)
        vals = Q[:, i, j]
        return BiasReport(float(E), float(Q0), bias, float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(mc_trials)))
    return BiasReport(float(E), float(Q0), bias)


@dataclass(frozen=True)
class DLimitReport:
    etas: np.ndarray
    D: np.ndarray
    lower: float
    upper: float
    tol: float

    @property
    def bracketed(self) -> bool:
        return self.lower - self.tol <= self.D[-1] <= self.upper + self.tol

    @property
    def stabilizing(self) -> bool:
        diffs = np.abs(np.diff(self.D))
        return bool(np.all(np.diff(diffs) <= 1e-15))


def verify_d_limit(model, eta_grid: Sequence[float]) -> DLimitReport:
    """(1 - sigma_max(I + eta A0)) / eta on a decreasing grid, bracketed by the symmetric-part spectrum.

    The bracket tolerance is |A0|_2^2 times the smallest eta, the size of
    the second-order term in the expansion of sigma_max.
    """
    model = as_model(model)
    etas = np.asarray(eta_grid, dtype=float)
    if np.any(etas <= 0) or np.any(np.diff(etas) >= 0):
        raise SdenetError("eta grid must be positive and strictly decreasing")
    D = np.array([(1.0 - model.sigma_max(e)) / e for e in etas])
    sym = np.linalg.eigvalsh((model.A0 + model.A0.T) / 2.0)
    tol = float(np.linalg.norm(model.A0, 2) ** 2 * etas[-1])
    return DLimitReport(etas, D, float(-sym[-1]), float(-sym[0]), tol)


@dataclass(frozen=True)
class IncoherenceReport:
    via_covariance: float
    via_drift: float
    bound: float
    k: int
    m: float
    walk_estimate: Optional[np.ndarray] = None
    walk_exact: Optional[np.ndarray] = None
    walk_stderr: Optional[np.ndarray] = None

    @property
    def identity_gap(self) -> float:
        return abs(self.via_covariance - self.via_drift)

    @property
    def holds(self) -> bool:
        return self.via_covariance <= self.bound + 1e-12

    @property
    def walk_agrees(self) -> Optional[bool]:
        if self.walk_estimate is None:
            return None
        return bool(np.all(np.abs(self.walk_estimate - self.walk_exact) <= 3 * self.walk_stderr + 1e-12))


def _hitting_walks(adj, m, start, targets, walks, rng):
    """Fraction of killed random walks from ``start`` that reach ``targets``.

    At node u the walk dies with probability m / (m + deg u), otherwise it
    steps to a uniform neighbour.
    """
    deg = adj.sum(axis=1)
    nbrs = [np.flatnonzero(row) for row in adj]
    target = np.zeros(adj.shape[0], dtype=bool)
    target[list(targets)] = True
    hits = 0
    for _ in range(walks):
        u = start
        while True:
            if rng.random() < m / (m + deg[u]):
                break
            u = nbrs[u][rng.integers(len(nbrs[u]))]
            if target[u]:
                hits += 1
                break
    return hits / walks


def verify_laplacian_incoherence(adjacency, m: float, row: int, walks: int = 0, seed: int = 0) -> IncoherenceReport:
    """|||Q0_ScS Q0_SS^-1||| computed from Q0 and from A0 blocks, against k/(k+m).

    With ``walks > 0`` each row sum of |(A0_ScSc)^-1 A0_ScS| is also
    estimated as a killed-random-walk hitting probability.
    """
    adj = np.asarray(adjacency, dtype=float)
    model = make_laplacian_model(adj, m)
    p = model.p
    S, Sc = _split(p, model.supports[row])
    Q0 = solve_lyapunov_continuous(model).Q0
    via_q = incoherence(Q0, S)
    k = int(model.params["k"])
    if len(Sc) == 0:
        return IncoherenceReport(via_q, 0.0, k / (k + m), k, m)
    A = model.A0
    B = np.linalg.solve(A[np.ix_(Sc, Sc)], A[np.ix_(Sc, S)])
    via_a = inf_norm(B)
    report = IncoherenceReport(via_q, via_a, k / (k + m), k, m)
    if walks:
        rng = stream(seed, PATH_STREAM)
        exact = np.sum(np.abs(B), axis=1)
        est = np.array([_hitting_walks(adj, m, int(u), S, walks, rng) for u in Sc])
        se = np.sqrt(np.maximum(exact * (1 - exact), 1e-300) / walks)
        report = IncoherenceReport(via_q, via_a, k / (k + m), k, m, est, exact, se)
    return report


# --- implication audit -------------------------------------------------------


@dataclass
class ImplicationAudit:
    """Counts over instances where all four sufficient conditions held."""

    qualifying: int = 0
    examined: int = 0
    counterexamples: list = field(default_factory=list)

    def merge(self, other: "ImplicationAudit") -> None:
        self.qualifying += other.qualifying
        self.examined += other.examined
        self.counterexamples.extend(other.counterexamples)


def prop3_audit(model, eta: float, n: int, trials: int, seed: int, row: int = 0, lam: Optional[float] = None) -> ImplicationAudit:
    """Check that the four conditions force exact signed-support recovery.

    Draws ``trials`` stationary trajectories of the discrete model, forms
    (G_hat, Q_hat) for ``row`` and, whenever all four conditions hold
    against Q0(eta) at ``lam`` (default A_min C_min / 8k), solves the lasso
    and compares signed supports.
    """
    model = as_model(model)
    S = model.supports[row]
    k = max(len(S), 1)
    Q0 = solve_lyapunov_discrete(model, eta).Q0
    cmin = c_min(Q0, S)
    alpha = 1.0 - incoherence(Q0, S)
    amin = model.a_min(row)
    audit = ImplicationAudit()
    if not (cmin > 0 and alpha > 0):
        return audit
    lam = amin * cmin / (8.0 * k) if lam is None else lam
    truth = model.A0[row]
    G, Q = batch_moments(model, eta, n, trials, seed, row)
    for t in range(trials):
        Qt = (Q[t] + Q[t].T) / 2.0
        gh = GradientHessian(Qt, Qt @ truth + G[t], "discrete", row, G[t])
        audit.examined += 1
        if not check_prop3(gh, Q0, S, lam, amin, cmin, alpha, k).all_hold:
            continue
        audit.qualifying += 1
        est = solve_quadratic_lasso(gh.Q_hat, gh.b, lam, row=row)
        if not support_matches(est.a_hat, truth):
            audit.counterexamples.append((int(seed), t))
    return audit
