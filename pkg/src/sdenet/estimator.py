"""Row-wise l1-regularized least squares for the drift matrix.

Both likelihoods are quadratic in the row ``a``::

    L(a) = const - b'a + a'Qa / 2

so everything downstream works on the pair (Q, b). For the discrete loss
``Q = X X'/n`` and ``b = X dX_r'/(n eta)``; for the continuous loss the
same sums run over the inner Euler grid (left-endpoint, i.e. Ito, sums).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .dynamics import SystemModel, Trajectory
from .errors import NeedsGroundTruthError, NoInnerResolutionError, SdenetError

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100_000
GRID_SIZE = 50
GRID_LOW = 1e-3


def _check_row(traj: Trajectory, row: int):
    if not 0 <= row < traj.p:
        raise SdenetError(f"row {row} out of range for p={traj.p}")


def _check_vec(a, p):
    a = np.asarray(a, dtype=float)
    if a.shape != (p,):
        raise SdenetError(f"expected a vector of length {p}, got shape {a.shape}")
    return a


def discrete_loss(a_r, traj: Trajectory, row: int) -> float:
    """(1 / 2 eta^2 n) sum_t (x_r(t+1) - x_r(t) - eta a'x(t))^2."""
    _check_row(traj, row)
    a = _check_vec(a_r, traj.p)
    X = traj.samples[:-1]
    dx = np.diff(traj.samples[:, row])
    resid = dx - traj.eta * (X @ a)
    return float(resid @ resid / (2.0 * traj.eta**2 * traj.n))


def continuous_loss(a_r, traj: Trajectory, row: int) -> float:
    """(1/2T) int (a'x)^2 dt - (1/T) int (a'x) dx_r, as Ito sums on the inner grid."""
    _check_row(traj, row)
    if traj.inner is None:
        raise NoInnerResolutionError("continuous loss needs inner-resolution samples")
    a = _check_vec(a_r, traj.p)
    Y = traj.inner[:-1]
    dy = np.diff(traj.inner[:, row])
    T = Y.shape[0] * traj.delta
    ay = Y @ a
    return float(traj.delta * (ay @ ay) / (2.0 * T) - (ay @ dy) / T)


@dataclass(frozen=True)
class GradientHessian:
    """Hessian Q_hat, model-free linear term b and, with ground truth, G_hat.

    ``grad(a) = Q_hat a - b`` is the gradient of either loss; ``G_hat`` is
    minus that gradient at the true row.
    """

    Q_hat: np.ndarray
    b: np.ndarray
    mode: str
    row: int
    G_hat: Optional[np.ndarray] = None

    def grad(self, a):
        return self.Q_hat @ np.asarray(a, dtype=float) - self.b


def gradient_hessian(traj: Trajectory, row: int, mode: str = "discrete", path: str = "model-free", model: Optional[SystemModel] = None) -> GradientHessian:
    """Quadratic data of the row-``row`` loss.

    ``path="ground-truth"`` additionally returns G_hat, which needs the true
    drift matrix (test and experiment use only).
    """
    _check_row(traj, row)
    if mode == "discrete":
        X = traj.samples[:-1]
        dx = np.diff(traj.samples[:, row])
        n = X.shape[0]
        Q = X.T @ X / n
        b = X.T @ dx / (n * traj.eta)
    elif mode == "continuous":
        if traj.inner is None:
            raise NoInnerResolutionError("continuous mode needs inner-resolution samples")
        Y = traj.inner[:-1]
        dy = np.diff(traj.inner[:, row])
        N = Y.shape[0]
        Q = Y.T @ Y / N
        b = Y.T @ dy / (N * traj.delta)
    else:
        raise SdenetError(f"unknown mode {mode!r}")
    Q = (Q + Q.T) / 2.0
    G = None
    if path == "ground-truth":
        if model is None:
            raise NeedsGroundTruthError("G_hat needs the true drift matrix")
        G = b - Q @ model.A0[row]
    elif path != "model-free":
        raise SdenetError(f"unknown path {path!r}")
    return GradientHessian(Q, b, mode, row, G)


@dataclass(frozen=True)
class RowProblem:
    trajectory: Trajectory
    row: int
    lam: float
    mode: str = "discrete"

    def __post_init__(self):
        if self.lam < 0:
            raise SdenetError("lambda must be nonnegative")
        _check_row(self.trajectory, self.row)

    def quadratic(self) -> GradientHessian:
        return gradient_hessian(self.trajectory, self.row, self.mode)


@dataclass(frozen=True)
class RowEstimate:
    a_hat: np.ndarray
    signed_support: np.ndarray
    lam: float
    dual: np.ndarray
    kkt_residual: float
    iterations: int
    converged: bool
    objective: np.ndarray = field(repr=False, default=None)
    row: Optional[int] = None

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.signed_support)


def solve_quadratic_lasso(Q, b, lam: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER, init=None, row=None) -> RowEstimate:
    """Minimize a'Qa/2 - b'a + lam |a|_1 by cyclic coordinate descent."""
    if lam < 0:
        raise SdenetError("lambda must be nonnegative")
    Q = np.ascontiguousarray(Q, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(b))):
        raise SdenetError("non-finite problem data")
    a0 = np.zeros_like(b) if init is None else np.array(init, dtype=float)
    a, sweeps, kkt, trace = _kernels.cd_lasso(Q, b, float(lam), a0, float(tol), int(max_iter))
    g = Q @ a - b
    if lam > 0:
        dual = np.where(a != 0, np.sign(a), np.clip(-g / lam, -1.0, 1.0))
    else:
        dual = np.sign(a)
    return RowEstimate(
        a_hat=a,
        signed_support=np.sign(a).astype(int),
        lam=float(lam),
        dual=dual,
        kkt_residual=float(kkt),
        iterations=int(sweeps),
        converged=bool(kkt <= tol),
        objective=trace,
        row=row,
    )


def lasso_solve(problem: RowProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER, init=None) -> RowEstimate:
    gh = problem.quadratic()
    return solve_quadratic_lasso(gh.Q_hat, gh.b, problem.lam, tol, max_iter, init, problem.row)


def lambda_grid(b, n_grid: int = GRID_SIZE, low: float = GRID_LOW):
    """Descending log grid over [low, 1] * |grad L(0)|_inf."""
    top = float(np.max(np.abs(b)))
    return top * np.logspace(0.0, math.log10(low), n_grid)


# --- regularization rules ---------------------------------------------------


def _positive(**kw):
    for name, val in kw.items():
        if val is None or not val > 0:
            raise SdenetError(f"{name} must be strictly positive")


def theorem_lambda(which: str, p: float, delta: float, T: float = None, alpha: float = None, rho_min: float = None, D: float = None, k: float = None, m: float = None) -> float:
    """Regularization level prescribed by the recovery theorems.

    ``thm1``: sqrt(36 log(4p/delta) / (T alpha^2 rho_min))
    ``thm2``: sqrt(36 (k+m)^2 log(4p/delta) / (T m^3))
    ``thm3``: sqrt(36 log(4p/delta) / (D alpha^2 T)), with T = n eta
    """
    _positive(p=p, delta=delta, T=T)
    if not delta < 1:
        raise SdenetError("delta must lie in (0, 1)")
    log_term = math.log(4.0 * p / delta)
    if which == "thm1":
        _positive(alpha=alpha, rho_min=rho_min)
        return math.sqrt(36.0 * log_term / (T * alpha**2 * rho_min))
    if which == "thm2":
        _positive(k=k, m=m)
        return math.sqrt(36.0 * (k + m) ** 2 * log_term / (T * m**3))
    if which == "thm3":
        _positive(alpha=alpha, D=D)
        return math.sqrt(36.0 * log_term / (D * alpha**2 * T))
    raise SdenetError(f"unknown rule {which!r}")


@dataclass(frozen=True)
class Fixed:
    lam: float


@dataclass(frozen=True)
class TheoremRule:
    which: str
    params: dict


@dataclass(frozen=True)
class OracleGrid:
    n_grid: int = GRID_SIZE
    low: float = GRID_LOW
    grid: Optional[tuple] = None


def support_matches(a_hat, truth_row, signed: bool = True) -> bool:
    est = np.sign(a_hat)
    ref = np.sign(truth_row)
    if not signed:
        est, ref = est != 0, ref != 0
    return bool(np.array_equal(est, ref))


def oracle_grid_solve(gh: GradientHessian, truth_row, grid=None, signed: bool = True, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Walk a descending lambda grid with warm starts; stop at the first exact recovery.

    Returns (estimate, success). Without a success the estimate at the last
    grid value is returned.
    """
    lams = lambda_grid(gh.b) if grid is None else np.asarray(grid, dtype=float)
    a = np.zeros_like(gh.b)
    est = None
    for lam in lams:
        est = solve_quadratic_lasso(gh.Q_hat, gh.b, lam, tol, max_iter, a, gh.row)
        a = est.a_hat
        if support_matches(a, truth_row, signed):
            return est, True
    return est, False


@dataclass
class NetworkEstimate:
    estimates: list
    success: Optional[list] = None

    @property
    def A_hat(self):
        return np.vstack([e.a_hat for e in self.estimates])

    @property
    def all_rows_recovered(self) -> Optional[bool]:
        return None if self.success is None else all(self.success)


def recover_network(traj: Trajectory, strategy, model: Optional[SystemModel] = None, rows: Optional[Sequence[int]] = None, mode: str = "discrete", signed: bool = True, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> NetworkEstimate:
    """Estimate each requested row independently.

    ``strategy`` is a ``Fixed``, ``TheoremRule`` or ``OracleGrid``. The
    oracle grid scores against ``model`` and therefore requires it.
    """
    rows = range(traj.p) if rows is None else list(rows)
    if isinstance(strategy, OracleGrid) and model is None:
        raise NeedsGroundTruthError("oracle-grid lambda selection needs the true model")
    estimates, success = [], []
    for r in rows:
        gh = gradient_hessian(traj, r, mode)
        if isinstance(strategy, Fixed):
            est = solve_quadratic_lasso(gh.Q_hat, gh.b, strategy.lam, tol, max_iter, row=r)
        elif isinstance(strategy, TheoremRule):
            lam = theorem_lambda(strategy.which, **strategy.params)
            est = solve_quadratic_lasso(gh.Q_hat, gh.b, lam, tol, max_iter, row=r)
        elif isinstance(strategy, OracleGrid):
            grid = strategy.grid if strategy.grid is not None else lambda_grid(gh.b, strategy.n_grid, strategy.low)
            est, _ = oracle_grid_solve(gh, model.A0[r], grid, signed, tol, max_iter)
        else:
            raise SdenetError(f"unknown lambda strategy {strategy!r}")
        estimates.append(est)
        if model is not None:
            success.append(support_matches(est.a_hat, model.A0[r], signed))
    return NetworkEstimate(estimates, success if model is not None else None)


# --- dual certificate -------------------------------------------------------


def inf_norm(M) -> float:
    """Operator sup norm: max absolute row sum."""
    M = np.atleast_2d(M)
    return float(np.max(np.sum(np.abs(M), axis=1))) if M.size else 0.0


@dataclass(frozen=True)
class DualReport:
    z_off_norm: float
    dual_bound: float
    dual_slack: float
    dual_holds: bool
    error_condition: bool
    error_sup: Optional[float]
    error_slack: Optional[float]
    error_holds: Optional[bool]


def kkt_dual_check(estimate: RowEstimate, gh: GradientHessian, lam: float, S0, A_min: float, C_min: float = None, a0_row=None, slack_tol: float = None) -> DualReport:
    """Compare the measured off-support dual with its bound.

    Bound: |z_Sc| <= |||Q_ScS Q_SS^-1||| (1 + |G_S|/lam) + |G_Sc|/lam.
    If |G_S| <= A_min lambda_min(Q_SS) / 2k - lam, the estimation error
    |A0_r - A_hat_r|_inf must be at most A_min/2 (checked when ``a0_row``
    is given). The error statement concerns the support-restricted
    solution, which coincides with the lasso solution only when the dual
    bound is below 1, so ``error_condition`` also requires that.
    ``C_min`` is accepted for reporting symmetry and unused.
    """
    if gh.G_hat is None:
        raise NeedsGroundTruthError("the dual bound needs G_hat")
    if lam <= 0:
        raise SdenetError("lambda must be positive")
    p = gh.b.shape[0]
    S = np.asarray(sorted(S0), dtype=int)
    Sc = np.setdiff1d(np.arange(p), S)
    QSS = gh.Q_hat[np.ix_(S, S)]
    try:
        QSS_inv = np.linalg.inv(QSS)
    except np.linalg.LinAlgError as exc:
        raise SdenetError("singular Q_hat restricted to the support") from exc
    G = gh.G_hat
    gS = float(np.max(np.abs(G[S]))) if len(S) else 0.0
    gSc = float(np.max(np.abs(G[Sc]))) if len(Sc) else 0.0
    incoh = inf_norm(gh.Q_hat[np.ix_(Sc, S)] @ QSS_inv) if len(Sc) and len(S) else 0.0
    bound = incoh * (1.0 + gS / lam) + gSc / lam
    z_off = float(np.max(np.abs(estimate.dual[Sc]))) if len(Sc) else 0.0
    if slack_tol is None:
        slack_tol = estimate.kkt_residual / lam + 1e-12
    k = max(len(S), 1)
    lam_min = float(np.linalg.eigvalsh(QSS)[0]) if len(S) else math.inf
    err_cond = gS <= A_min * lam_min / (2 * k) - lam and bound < 1.0
    err = err_slack = err_holds = None
    if a0_row is not None:
        err = float(np.max(np.abs(np.asarray(a0_row) - estimate.a_hat)))
        err_slack = A_min / 2.0 - err
        err_holds = (not err_cond) or err_slack >= -slack_tol
    return DualReport(z_off, bound, bound - z_off, z_off <= bound + slack_tol, bool(err_cond), err, err_slack, err_holds)
