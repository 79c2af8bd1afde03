import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("sdenet", database=None, max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("sdenet")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stable(rng, p, scale=1.0):
    """Dense random drift with a margin-1 stable symmetric part."""
    B = rng.standard_normal((p, p)) * scale
    sym = np.linalg.eigvalsh((B + B.T) / 2.0)[-1]
    return B - (sym + 1.0) * np.eye(p)


def lasso_by_enumeration(Q, b, lam):
    """Exact lasso minimizer by trying every sign pattern (small p only).

    For each pattern s the stationarity equation on supp(s) gives a
    candidate; it is feasible when its signs reproduce s. The minimizer is
    the feasible candidate with the smallest objective.
    """
    import itertools

    p = len(b)
    best, best_val = np.zeros(p), 0.0
    for s in itertools.product((-1, 0, 1), repeat=p):
        s = np.array(s)
        S = np.flatnonzero(s)
        if not len(S):
            continue
        aS = np.linalg.solve(Q[np.ix_(S, S)], b[S] - lam * s[S])
        if not np.all(np.sign(aS) == s[S]):
            continue
        a = np.zeros(p)
        a[S] = aS
        val = 0.5 * a @ Q @ a - b @ a + lam * np.abs(a).sum()
        if val < best_val:
            best, best_val = a, val
    return best


def random_spd(rng, p, cond=20.0):
    V, _ = np.linalg.qr(rng.standard_normal((p, p)))
    w = np.exp(rng.uniform(0, np.log(cond), p))
    return (V * w) @ V.T
