"""Seeded success-rate sweeps, result persistence and plot emission.

A sweep enumerates the product grid p x k x m x eta x T. Each (cell, trial)
draws a fresh model, simulates, estimates one uniformly drawn row and
records whether its signed support was recovered exactly.

With ``nested_lengths`` (the default) cells that differ only in T (and, in
continuous mode, in eta) share one trajectory per trial: it is simulated
once at the longest T and every cell reads a prefix of it. Such cells form
a *group*, and trial seeds are ``derive_seed(base_seed, group, trial)``.
Without nesting every cell is its own group.

Output directory layout::

    trials.csv     cell,trial,seed,attempts,row,status,success
    cells.csv      one aggregate row per cell (also cells.json)
    manifest.json  config, versions, per-cell trial seeds and a condition
                   report of each group's first-trial model
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import logging
import math
import os
import platform
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .dynamics import (
    make_laplacian_model,
    make_random_binary_model,
    random_bounded_degree_graph,
    simulate_continuous,
    simulate_discrete,
)
from .errors import NotContractiveError, NotStableError, SdenetError
from .fileio import jsonable
from .estimator import (
    gradient_hessian,
    lambda_grid,
    solve_quadratic_lasso,
    support_matches,
    theorem_lambda,
)
from .rng import MODEL_STREAM, ROW_STREAM, derive_seed, stream
from .stats import linear_fit_r2, wilson_interval

log = logging.getLogger(__name__)

MODES = ("discrete", "continuous")
ENSEMBLE_CHOICES = ("stabilized", "binary-literal", "laplacian")
STRATEGIES = ("oracle-grid", "fixed", "thm1", "thm2", "thm3")
ESTIMATOR_DATA = ("sampled", "inner")
TRIAL_FIELDS = ("cell", "trial", "seed", "attempts", "row", "status", "success")
CELL_FIELDS = ("cell", "p", "k", "m", "eta", "T", "n", "successes", "trials", "failed", "rate", "wilson_lo", "wilson_hi")
CURVE_FIELDS = ("x", "rate", "wilson_lo", "wilson_hi", "trials")
PLOT_KINDS = ("rate-vs-T", "complexity-vs-p", "rate-vs-eta")
NOT_REACHED = "not reached"


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep definition. Grid axes are lists; every combination is a cell.

    ``T`` is the observation length n*eta, and each T must be a whole
    multiple of each eta. ``m`` is only used by the laplacian ensemble.
    ``delta`` is the Euler step in continuous mode (default min(eta)/32).
    ``estimator_data="sampled"`` fits on the eta-spaced samples;
    ``"inner"`` uses the continuous-time likelihood on the Euler grid.
    ``support_tol`` treats |a_hat| <= tol as zero when scoring success and
    ``solver_tol`` is the lasso KKT stopping tolerance.
    """

    p: tuple = (16,)
    k: tuple = (4.0,)
    eta: tuple = (0.1,)
    T: tuple = (100.0,)
    m: tuple = (1.0,)
    mode: str = "discrete"
    ensemble: str = "stabilized"
    trials: int = 256
    lambda_strategy: str = "oracle-grid"
    lam: Optional[float] = None
    confidence_delta: float = 0.1
    success_threshold: float = 0.9
    confidence: float = 0.95
    base_seed: int = 0
    output_dir: str = "results"
    delta: Optional[float] = None
    estimator_data: str = "sampled"
    signed: bool = True
    full_matrix: bool = False
    nested_lengths: bool = True
    noise: bool = True
    support_tol: float = 0.0
    solver_tol: float = 1e-8
    max_retries: int = 50
    name: str = "sweep"

    def __post_init__(self):
        for axis in ("p", "k", "eta", "T", "m"):
            val = getattr(self, axis)
            val = tuple(val) if isinstance(val, (list, tuple)) else (val,)
            if not val:
                raise SdenetError(f"grid axis {axis!r} is empty")
            object.__setattr__(self, axis, val)
        object.__setattr__(self, "p", tuple(int(v) for v in self.p))
        object.__setattr__(self, "k", tuple(float(v) for v in self.k))
        for axis in ("eta", "T", "m"):
            object.__setattr__(self, axis, tuple(float(v) for v in getattr(self, axis)))
        if self.mode not in MODES:
            raise SdenetError(f"mode must be one of {MODES}")
        if self.ensemble not in ENSEMBLE_CHOICES:
            raise SdenetError(f"ensemble must be one of {ENSEMBLE_CHOICES}")
        if self.lambda_strategy not in STRATEGIES:
            raise SdenetError(f"lambda_strategy must be one of {STRATEGIES}")
        if self.lambda_strategy == "fixed" and (self.lam is None or self.lam < 0):
            raise SdenetError("fixed strategy needs lam >= 0")
        if self.lambda_strategy == "thm2" and self.ensemble != "laplacian":
            raise SdenetError("thm2 applies to the laplacian ensemble only")
        if self.estimator_data not in ESTIMATOR_DATA:
            raise SdenetError(f"estimator_data must be one of {ESTIMATOR_DATA}")
        if not self.solver_tol > 0 or self.support_tol < 0:
            raise SdenetError("solver_tol must be positive and support_tol nonnegative")
        if self.trials < 1:
            raise SdenetError("trials must be positive")
        if not 0 < self.success_threshold < 1:
            raise SdenetError("success_threshold must lie in (0, 1)")
        if min(self.eta) <= 0 or min(self.T) <= 0:
            raise SdenetError("eta and T must be positive")
        if min(self.p) < 2 or min(self.k) <= 0 or min(self.m) <= 0:
            raise SdenetError("p must be at least 2 and k, m positive")
        for eta, T in itertools.product(self.eta, self.T):
            n = round(T / eta)
            if n < 1 or abs(n * eta - T) > 1e-9 * T:
                raise SdenetError(f"T={T} is not a whole multiple of eta={eta}")
        if self.mode == "continuous":
            d = self.inner_step
            for eta in self.eta:
                r = eta / d
                if abs(r - round(r)) > 1e-9 * r:
                    raise SdenetError(f"delta={d} does not divide eta={eta}")
        elif not self.noise and self.mode != "discrete":
            raise SdenetError("noise=False is a discrete-mode option")

    @property
    def inner_step(self) -> float:
        return self.delta if self.delta is not None else min(self.eta) / 32.0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for axis in ("p", "k", "eta", "T", "m"):
            d[axis] = list(d[axis])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise SdenetError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SdenetError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise SdenetError("config must be a JSON object")
        return cls.from_dict(d)


@dataclass(frozen=True)
class Cell:
    id: int
    group: int
    p: int
    k: float
    m: float
    eta: float
    T: float

    @property
    def n(self) -> int:
        return int(round(self.T / self.eta))

    def params(self) -> dict:
        return {"p": self.p, "k": self.k, "m": self.m, "eta": self.eta, "T": self.T, "n": self.n}


def enumerate_cells(config: ExperimentConfig) -> list:
    """Cells in grid order p, k, m, eta, T, each tagged with its group id."""
    cells, groups = [], {}
    use_m = config.ensemble == "laplacian"
    ms = config.m if use_m else (config.m[0],)
    for i, (p, k, m, eta, T) in enumerate(itertools.product(config.p, config.k, ms, config.eta, config.T)):
        if not config.nested_lengths:
            key = i
        elif config.mode == "continuous":
            key = (p, k, m)
        else:
            key = (p, k, m, eta)
        gid = groups.setdefault(key, len(groups))
        cells.append(Cell(i, gid, p, k, m if use_m else math.nan, eta, T))
    return cells


# --- single trial ------------------------------------------------------------


def draw_model(config: ExperimentConfig, cell: Cell, seed: int):
    if config.ensemble == "laplacian":
        adj = random_bounded_degree_graph(cell.p, int(cell.k), stream(seed, MODEL_STREAM))
        return make_laplacian_model(adj, cell.m)
    variant = "stabilized" if config.ensemble == "stabilized" else "binary-literal"
    model = make_random_binary_model(cell.p, cell.k, seed, variant)
    if not model.stable:
        raise NotStableError("drift matrix has an eigenvalue with nonnegative real part")
    return model


def _admissible(config, model, etas):
    if config.mode == "discrete":
        for eta in etas:
            if not model.contractive(eta):
                raise NotContractiveError(f"sigma_max(I + {eta} A0) >= 1")


def _lambda(config, model, row, gh, traj):
    strat = config.lambda_strategy
    if strat == "fixed":
        return config.lam
    from .conditions import compute_condition_report

    if strat == "thm2":
        return theorem_lambda("thm2", model.p, config.confidence_delta, T=traj.T, k=model.params["k"], m=model.params["m"])
    rep = compute_condition_report(model, row, eta=traj.eta if strat == "thm3" else None, delta=config.confidence_delta)
    if strat == "thm1":
        return theorem_lambda("thm1", model.p, config.confidence_delta, T=traj.T, alpha=rep.alpha, rho_min=rep.rho_min)
    return theorem_lambda("thm3", model.p, config.confidence_delta, T=traj.T, alpha=rep.alpha_eta, D=rep.D)


def _score(config, model, traj, rows):
    """Signed-support success on every row in ``rows``.

    The oracle strategy walks the descending lambda grid with warm starts
    and stops at the first exact match.
    """
    mode = "continuous" if (config.mode == "continuous" and config.estimator_data == "inner") else "discrete"
    for r in rows:
        gh = gradient_hessian(traj, r, mode=mode)
        truth = model.A0[r]
        if config.lambda_strategy == "oracle-grid":
            lams = lambda_grid(gh.b)
        else:
            lams = [_lambda(config, model, r, gh, traj)]
        a = None
        ok = False
        for lam in lams:
            a = solve_quadratic_lasso(gh.Q_hat, gh.b, lam, tol=config.solver_tol, init=a, row=r).a_hat
            if support_matches(np.where(np.abs(a) <= config.support_tol, 0.0, a), truth, config.signed):
                ok = True
                break
        if not ok:
            return False
    return True


def run_group_trial(config: ExperimentConfig, cells: list, trial: int) -> list:
    """Run one trial for every cell of a group; returns trial records."""
    head = cells[0]
    etas = sorted({c.eta for c in cells})
    base = derive_seed(config.base_seed, head.group, trial)
    model = seed = None
    attempts = 0
    for attempts in range(1, config.max_retries + 2):
        seed = base if attempts == 1 else derive_seed(config.base_seed, head.group, trial, attempts - 1)
        try:
            model = draw_model(config, head, seed)
            _admissible(config, model, etas)
            break
        except (NotStableError, NotContractiveError) as exc:
            log.info("group %d trial %d attempt %d redrawn: %s", head.group, trial, attempts, exc)
            model = None
    if model is None:
        return [{"cell": c.id, "trial": trial, "seed": seed, "attempts": attempts, "row": -1, "status": "exhausted", "success": 0} for c in cells]
    rng = stream(seed, ROW_STREAM)
    row = int(rng.integers(head.p))
    rows = range(head.p) if config.full_matrix else [row]
    out = []
    if config.mode == "discrete":
        n_max = max(c.n for c in cells)
        full = simulate_discrete(model, head.eta, n_max, seed, noise=config.noise)
        for c in cells:
            ok = _score(config, model, full.head(c.n), rows)
            out.append({"cell": c.id, "trial": trial, "seed": seed, "attempts": attempts, "row": row, "status": "ok", "success": int(ok)})
    else:
        d = config.inner_step
        T_max = max(c.T for c in cells)
        full = simulate_continuous(model, T_max, d, d, seed)
        for c in cells:
            traj = full.resample(c.eta).head(c.n)
            ok = _score(config, model, traj, rows)
            out.append({"cell": c.id, "trial": trial, "seed": seed, "attempts": attempts, "row": row, "status": "ok", "success": int(ok)})
    return out


# --- sweep -------------------------------------------------------------------


@dataclass
class CellResult:
    cell: Cell
    successes: int
    trials: int
    failed: int
    confidence: float = 0.95

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else math.nan

    @property
    def wilson(self):
        return wilson_interval(self.successes, self.trials, self.confidence) if self.trials else (math.nan, math.nan)

    def row(self) -> dict:
        lo, hi = self.wilson
        d = {"cell": self.cell.id, **self.cell.params(), "successes": self.successes, "trials": self.trials, "failed": self.failed}
        d.update(rate=self.rate, wilson_lo=lo, wilson_hi=hi)
        return d


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    cells: list
    records: list
    manifest: dict = field(default_factory=dict)

    def cell(self, **params) -> CellResult:
        hits = [c for c in self.cells if all(np.isclose(getattr(c.cell, k), v) for k, v in params.items())]
        if len(hits) != 1:
            raise SdenetError(f"{len(hits)} cells match {params}")
        return hits[0]

    def curves(self, x_axis: str) -> dict:
        """Cells grouped by every grid axis except ``x_axis``, sorted along it."""
        axes = [a for a in ("p", "k", "m", "eta", "T") if a != x_axis]
        out = {}
        for c in self.cells:
            key = tuple((a, getattr(c.cell, a)) for a in axes)
            out.setdefault(key, []).append(c)
        return {k: sorted(v, key=lambda c: getattr(c.cell, x_axis)) for k, v in out.items()}

    def sample_complexity(self, threshold: Optional[float] = None) -> dict:
        """Per rate-vs-T curve: first T where the rate reaches ``threshold``.

        Linear interpolation between the bracketing grid points; ``None``
        when the threshold is never reached. Also returns the crossings of
        the Wilson upper and lower curves as (lo, hi) uncertainty limits.
        """
        thr = self.config.success_threshold if threshold is None else threshold
        out = {}
        for key, cells in self.curves("T").items():
            Ts = [c.cell.T for c in cells]
            est = crossing(Ts, [c.rate for c in cells], thr)
            lo = crossing(Ts, [c.wilson[1] for c in cells], thr)
            hi = crossing(Ts, [c.wilson[0] for c in cells], thr)
            out[key] = (est, lo, hi)
        return out

    @property
    def total_failed(self) -> int:
        return sum(c.failed for c in self.cells)


def crossing(xs, ys, thr) -> Optional[float]:
    for i, y in enumerate(ys):
        if y >= thr:
            if i == 0:
                return float(xs[0])
            x0, x1, y0 = xs[i - 1], xs[i], ys[i - 1]
            return float(x0 + (thr - y0) * (x1 - x0) / (y - y0))
    return None


def _read_records(path: Path) -> dict:
    done = {}
    if not path.exists():
        return done
    with path.open(newline="") as fh:
        for rec in csv.DictReader(fh):
            try:
                r = {k: rec[k] for k in TRIAL_FIELDS}
                for key in ("cell", "trial", "seed", "attempts", "row", "success"):
                    r[key] = int(r[key])
            except (KeyError, TypeError, ValueError):
                continue  # torn final line from an interrupted write
            done[(r["cell"], r["trial"])] = r
    return done


def _versions() -> dict:
    import numba
    import scipy

    return {"sdenet": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__, "python": platform.python_version()}


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        env = os.environ.get("SDENET_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise SdenetError("thread count must be positive")
    return threads


def run_sweep(config: ExperimentConfig, threads: Optional[int] = None, out_dir=None, resume: bool = True, write: bool = True) -> ExperimentResult:
    """Run every (group, trial) unit not already present in trials.csv.

    Records are appended as units finish, so an interrupted sweep resumes
    where it stopped. Aggregates are pure counts and do not depend on the
    thread count or completion order.
    """
    threads = resolve_threads(threads)
    cells = enumerate_cells(config)
    groups = {}
    for c in cells:
        groups.setdefault(c.group, []).append(c)
    out = Path(out_dir if out_dir is not None else config.output_dir)
    trials_path = out / "trials.csv"
    done = {}
    if write:
        out.mkdir(parents=True, exist_ok=True)
        if resume:
            done = _read_records(trials_path)
        else:
            trials_path.unlink(missing_ok=True)
    todo = [
        (gid, t)
        for gid, members in groups.items()
        for t in range(config.trials)
        if not all((c.id, t) in done for c in members)
    ]
    records = dict(done)
    lock = threading.Lock()
    fh = None
    if write:
        fresh = not trials_path.exists() or trials_path.stat().st_size == 0
        fh = trials_path.open("a", newline="")
        writer = csv.DictWriter(fh, fieldnames=TRIAL_FIELDS, lineterminator="\n")
        if fresh:
            writer.writeheader()
            fh.flush()

    def finish(recs):
        with lock:
            for r in recs:
                records[(r["cell"], r["trial"])] = r
            if fh is not None:
                writer.writerows(recs)
                fh.flush()

    try:
        if threads == 1:
            for gid, t in todo:
                finish(run_group_trial(config, groups[gid], t))
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futs = [pool.submit(run_group_trial, config, groups[gid], t) for gid, t in todo]
                for f in futs:
                    finish(f.result())
    finally:
        if fh is not None:
            fh.close()
    result = aggregate(config, cells, records)
    if write:
        save_result(result, out)
    return result


def aggregate(config: ExperimentConfig, cells: list, records: dict) -> ExperimentResult:
    results = []
    seeds = {}
    for c in cells:
        recs = [records[(c.id, t)] for t in range(config.trials) if (c.id, t) in records]
        ok = [r for r in recs if r["status"] == "ok"]
        results.append(CellResult(c, sum(r["success"] for r in ok), len(ok), len(recs) - len(ok), config.confidence))
        seeds[str(c.id)] = [r["seed"] for r in sorted(recs, key=lambda r: r["trial"])]
    manifest = {
        "config": config.to_dict(),
        "versions": _versions(),
        "cells": [dict(id=c.id, group=c.group, **c.params()) for c in cells],
        "seeds": seeds,
        "seed_rule": "derive_seed(base_seed, group, trial), redraws derive_seed(base_seed, group, trial, attempt)",
        "condition_reports": _condition_reports(config, cells, records),
    }
    ordered = [records[k] for k in sorted(records)]
    return ExperimentResult(config, results, ordered, manifest)


def _condition_reports(config, cells, records) -> dict:
    """Condition report of the first trial's model and row, one per group.

    Later trials draw fresh models, so this documents a representative
    instance rather than the whole ensemble.
    """
    from .conditions import compute_condition_report

    out = {}
    for c in cells:
        rec = records.get((c.id, 0))
        if str(c.group) in out or rec is None or rec["status"] != "ok":
            continue
        model = draw_model(config, c, rec["seed"])
        eta = c.eta if config.mode == "discrete" else None
        rep = compute_condition_report(model, rec["row"], eta=eta, delta=config.confidence_delta)
        out[str(c.group)] = {"trial": 0, "seed": rec["seed"], **jsonable(rep.to_dict())}
    return out


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def save_result(result: ExperimentResult, out) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "trials.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRIAL_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(result.records)
    rows = [c.row() for c in result.cells]
    with (out / "cells.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CELL_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    (out / "cells.json").write_text(json.dumps([{k: _json_safe(v) for k, v in r.items()} for r in rows], indent=2) + "\n")
    (out / "manifest.json").write_text(json.dumps(jsonable(result.manifest), indent=2) + "\n")


def replay_trial(manifest: dict, cell_id: int, trial: int) -> int:
    """Recompute one success bit from a manifest alone."""
    config = ExperimentConfig.from_dict(manifest["config"])
    cells = enumerate_cells(config)
    target = cells[cell_id]
    members = [c for c in cells if c.group == target.group]
    recs = run_group_trial(config, members, trial)
    return next(r["success"] for r in recs if r["cell"] == cell_id)


# --- plots -------------------------------------------------------------------

_W, _H, _PAD = 480, 320, 48


def _fmt(v) -> str:
    return "%.6g" % v


def _curve_name(key) -> str:
    parts = []
    for a, v in key:
        if isinstance(v, float) and math.isnan(v):
            continue
        parts.append(f"{a}{_fmt(v)}")
    return "_".join(parts) or "all"


def render_svg(series: list, title: str, xlabel: str, ylabel: str, y_range=None) -> str:
    """Minimal self-contained line chart; ``series`` is [(label, xs, ys)]."""
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys) if y is not None]
    xs_all = [p[0] for p in pts] or [0.0]
    ys_all = [p[1] for p in pts] or [0.0]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = y_range if y_range else (min(ys_all), max(ys_all))
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    iw, ih = _W - 2 * _PAD, _H - 2 * _PAD

    def sx(x):
        return _PAD + (x - x0) / (x1 - x0) * iw

    def sy(y):
        return _PAD + (1.0 - (y - y0) / (y1 - y0)) * ih

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.2f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<text x="{_W / 2:.2f}" y="{_H - 10}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="14" y="{_H / 2:.2f}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {_H / 2:.2f})">{ylabel}</text>',
        f'<text x="{_PAD}" y="{_H - _PAD + 16}" text-anchor="middle" font-size="10">{_fmt(x0)}</text>',
        f'<text x="{_W - _PAD}" y="{_H - _PAD + 16}" text-anchor="middle" font-size="10">{_fmt(x1)}</text>',
        f'<text x="{_PAD - 6}" y="{_H - _PAD}" text-anchor="end" font-size="10">{_fmt(y0)}</text>',
        f'<text x="{_PAD - 6}" y="{_PAD + 4}" text-anchor="end" font-size="10">{_fmt(y1)}</text>',
    ]
    for i, (label, xs, ys) in enumerate(series):
        col = colors[i % len(colors)]
        coords = [f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys) if y is not None]
        if coords:
            out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{" ".join(coords)}"/>')
        for c in coords:
            cx, cy = c.split(",")
            out.append(f'<circle cx="{cx}" cy="{cy}" r="2.5" fill="{col}"/>')
        out.append(f'<text x="{_W - _PAD + 4}" y="{_PAD + 14 * i + 10}" font-size="10" fill="{col}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _write_curve_csv(path: Path, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_FIELDS)
        for r in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) if isinstance(v, float) else v for v in r])


def emit_plots(result: ExperimentResult, kind: str, out_dir) -> list:
    """One CSV per curve and one SVG per kind; returns the written paths.

    For ``complexity-vs-p`` the ``rate`` column holds the sample complexity
    (T at the success threshold) and the Wilson columns hold the crossings
    of the upper and lower Wilson curves. Uncrossed thresholds read
    ``not reached``.
    """
    if kind not in PLOT_KINDS:
        raise SdenetError(f"unknown plot kind {kind!r}")
    if not result.cells:
        raise SdenetError("empty result")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written, series = [], []
    if kind in ("rate-vs-T", "rate-vs-eta"):
        axis = "T" if kind == "rate-vs-T" else "eta"
        for key, cells in sorted(result.curves(axis).items()):
            rows = [(getattr(c.cell, axis), c.rate, c.wilson[0], c.wilson[1], c.trials) for c in cells]
            path = out / f"{kind}_{_curve_name(key)}.csv"
            _write_curve_csv(path, rows)
            written.append(path)
            series.append((_curve_name(key), [r[0] for r in rows], [r[1] for r in rows]))
        svg = render_svg(series, kind, "T = n eta" if axis == "T" else "eta", "success rate", (0.0, 1.0))
    else:
        sc = result.sample_complexity()
        by_rest = {}
        for key, (est, lo, hi) in sc.items():
            d = dict(key)
            rest = tuple((a, v) for a, v in key if a != "p")
            total = sum(c.trials for c in result.curves("T")[key])
            by_rest.setdefault(rest, []).append((d["p"], est, lo, hi, total))
        for rest, rows in sorted(by_rest.items()):
            rows.sort()
            path = out / f"{kind}_{_curve_name(rest)}.csv"
            _write_curve_csv(path, [tuple(NOT_REACHED if v is None else float(v) if i in (1, 2, 3) else v for i, v in enumerate(r)) for r in rows])
            written.append(path)
            series.append((_curve_name(rest), [math.log2(r[0]) for r in rows], [r[1] for r in rows]))
        svg = render_svg(series, kind, "log2 p", f"T at rate {_fmt(result.config.success_threshold)}")
    svg_path = out / f"{kind}.svg"
    svg_path.write_text(svg)
    written.append(svg_path)
    return written


def complexity_fit(result: ExperimentResult):
    """Linear fit of sample complexity against log2 p; returns (slope, intercept, r2, points)."""
    pts = []
    for key, (est, _, _) in result.sample_complexity().items():
        if est is not None:
            pts.append((math.log2(dict(key)["p"]), est))
    pts.sort()
    if len(pts) < 2:
        raise SdenetError("need at least two reached thresholds to fit")
    slope, icpt, r2 = linear_fit_r2([x for x, _ in pts], [y for _, y in pts])
    return slope, icpt, r2, pts


# --- canned desk-scale reproductions ------------------------------------------

FIG1_T_GRID = tuple(float(round(25 * 2 ** (i / 4))) for i in range(21))


def canned_config(name: str, base_seed: int = 0, output_dir: Optional[str] = None, trials: int = 256) -> ExperimentConfig:
    common = dict(base_seed=base_seed, trials=trials, name=name, output_dir=output_dir or f"results/{name}")
    if name == "fig1-left":
        return ExperimentConfig(p=(8, 16, 32), k=(5.0,), eta=(0.1,), T=FIG1_T_GRID, **common)
    if name == "fig1-right":
        return ExperimentConfig(p=(8, 16, 32, 64), k=(5.0,), eta=(0.1,), T=FIG1_T_GRID, **common)
    if name == "fig2":
        return ExperimentConfig(p=(16,), k=(4.0,), eta=(0.2, 0.1, 0.05), T=(50.0, 100.0, 150.0), mode="continuous", delta=0.05 / 32, **common)
    raise SdenetError(f"unknown reproduction {name!r}")


CANNED = ("fig1-left", "fig1-right", "fig2")
