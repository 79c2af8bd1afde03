"""Batch audits of the supporting lemmas, run by ``sdenet verify-appendix``.

Each audit returns a ``Check`` with a pass flag, the number of cases and
the worst observed slack or residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conditions import (
    incoherence,
    verify_bias_bound,
    verify_d_limit,
    verify_decomposition,
    verify_laplacian_incoherence,
    verify_spectral_lemmas,
)
from .dynamics import make_random_binary_model, random_bounded_degree_graph, solve_lyapunov_continuous
from .errors import NotContractiveError
from .rng import derive_seed, stream

IDENTITY_TOL = 1e-10


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    cases: int
    worst: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.cases} cases, worst {self.worst:.3g}{'; ' + self.detail if self.detail else ''}"


def audit_decomposition(seed: int = 0, cases: int = 1000) -> Check:
    """Identity residual and T1/T2/T3 norm bounds under random symmetric perturbations."""
    rng = stream(seed, 0)
    done = bad = 0
    worst_res, worst_slack = 0.0, math.inf
    draw = 0
    while done < cases:
        draw += 1
        p = int(rng.integers(4, 11))
        model = make_random_binary_model(p, 2.0, derive_seed(seed, draw))
        row = int(rng.integers(p))
        S = model.supports[row]
        Q0 = solve_lyapunov_continuous(model).Q0
        if len(S) == p or incoherence(Q0, S) >= 1:
            continue
        E = rng.standard_normal((p, p))
        E = (E + E.T) / 2.0
        E *= rng.uniform(0.0, 0.5) * np.abs(Q0).max() / np.abs(E).max()
        rep = verify_decomposition(Q0 + E, Q0, S)
        if not rep.precondition:
            continue
        done += 1
        worst_res = max(worst_res, rep.identity_residual)
        worst_slack = min(worst_slack, *(b.slack for b in rep.bounds.values()))
        if rep.identity_residual > IDENTITY_TOL or not rep.bounds_hold:
            bad += 1
    return Check("decomposition identity and T1/T2/T3 bounds", bad == 0, done, worst_res, f"min slack {worst_slack:.3g}, {bad} violations")


def audit_spectral(seed: int = 0, cases: int = 100) -> Check:
    """Eigenvalue bounds of the gradient and Hessian block matrices on tiny models."""
    rng = stream(seed, 1)
    done = bad = 0
    worst = math.inf
    draw = 0
    while done < cases:
        draw += 1
        p = int(rng.integers(2, 4))
        eta = float(rng.choice([0.05, 0.1, 0.2]))
        n = int(rng.integers(2, 16))
        m = int(rng.integers(0, 6))
        if p * (n + m + 1) > 200:
            continue
        model = make_random_binary_model(p, 1.0, derive_seed(seed, 10_000 + draw))
        r, j, i = (int(v) for v in rng.integers(p, size=3))
        try:
            rep = verify_spectral_lemmas(model, eta, n, m, r, j, i)
        except NotContractiveError:
            continue
        done += 1
        slacks = [c.slack for c in (rep.grad_max_eig, rep.grad_sum_sq, rep.hess_max_eig, rep.hess_mean_sq)]
        worst = min(worst, *slacks)
        if not rep.all_hold:
            bad += 1
    return Check("gradient/Hessian spectral bounds", bad == 0, done, worst, f"{bad} violations")


def audit_bias(seed: int = 0, mc_trials: int = 2000) -> Check:
    """Bias bound over an (n, m) grid plus a Monte Carlo cross-check of E Q_hat."""
    model = make_random_binary_model(3, 1.0, derive_seed(seed, 20_000))
    bad = cases = 0
    worst = math.inf
    notes = []
    for n in (10, 50, 200):
        for m in (0, 5, 20):
            for i, j in ((0, 0), (0, 1)):
                rep = verify_bias_bound(model, 0.1, n, m, i, j, mc_trials=mc_trials, seed=derive_seed(seed, n, m, i, j))
                cases += 1
                worst = min(worst, rep.bias.slack)
                if not rep.bias.holds or not rep.mc_agrees:
                    bad += 1
                    notes.append(f"(n={n},m={m},{i}{j})")
    return Check("cold-start bias bound with Monte Carlo cross-check", bad == 0, cases, worst, " ".join(notes) or "MC within 3 sigma")


def audit_d_limit(seed: int = 0, cases: int = 20) -> Check:
    grid = [0.1 / 2**i for i in range(8)]
    bad = 0
    worst = math.inf
    for c in range(cases):
        model = make_random_binary_model(int(stream(seed, 3 + c).integers(3, 9)), 2.0, derive_seed(seed, 30_000 + c))
        rep = verify_d_limit(model, grid)
        worst = min(worst, rep.D[-1] - (rep.lower - rep.tol), (rep.upper + rep.tol) - rep.D[-1])
        if not (rep.bracketed and rep.stabilizing):
            bad += 1
    return Check("contraction margin bracketing as eta -> 0", bad == 0, cases, worst, f"{bad} violations")


def audit_laplacian(seed: int = 0, cases: int = 100, walk_cases: int = 5, walks: int = 4000) -> Check:
    """Incoherence of laplacian drifts below k/(k+m), two routes agreeing."""
    rng = stream(seed, 4)
    bad = 0
    worst_gap, worst_slack = 0.0, math.inf
    for c in range(cases):
        p = int(rng.integers(4, 13))
        k = int(rng.integers(2, 5))
        m = float(rng.choice([0.5, 1.0, 2.0]))
        adj = random_bounded_degree_graph(p, k, rng)
        row = int(rng.integers(p))
        rep = verify_laplacian_incoherence(adj, m, row, walks=walks if c < walk_cases else 0, seed=derive_seed(seed, 40_000 + c))
        worst_gap = max(worst_gap, rep.identity_gap)
        worst_slack = min(worst_slack, rep.bound - rep.via_covariance)
        if not rep.holds or rep.identity_gap > IDENTITY_TOL or rep.walk_agrees is False:
            bad += 1
    return Check("laplacian incoherence <= k/(k+m)", bad == 0, cases, worst_gap, f"min slack {worst_slack:.3g}, {bad} violations")


AUDITS = (audit_decomposition, audit_spectral, audit_bias, audit_d_limit, audit_laplacian)


def run_appendix_suite(seed: int = 0) -> list:
    return [audit(seed) for audit in AUDITS]
