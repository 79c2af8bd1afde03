"""Plain-text formats for matrices, trajectories and reports.

Reals are written with 17 significant digits so every float64 round-trips
exactly.

Matrix file::

    p
    a11 a12 ... a1p
    ...

Trajectory file::

    eta=<real> n=<int> p=<int> provenance=<tag> seed=<int>
    x(0) as p reals
    ...
    x(n)

Estimate report (CSV)::

    r,lambda,kkt_residual,iterations,signed_support,a_0,...,a_{p-1}

``signed_support`` is a string over ``+``, ``-`` and ``0``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .dynamics import PROVENANCES, Trajectory
from .errors import SdenetError

FMT = "%.17g"


def _fmt(x) -> str:
    return FMT % x


def _read_lines(path):
    return [ln for ln in Path(path).read_text().splitlines() if ln.strip()]


# --- matrix ------------------------------------------------------------------


def format_matrix(A) -> str:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SdenetError("matrix must be square")
    rows = [" ".join(_fmt(v) for v in row) for row in A]
    return "\n".join([str(A.shape[0])] + rows) + "\n"


def write_matrix(path, A) -> None:
    Path(path).write_text(format_matrix(A))


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SdenetError("empty matrix file")
    try:
        p = int(lines[0])
        A = np.array([[float(v) for v in ln.split()] for ln in lines[1:]], dtype=float)
    except ValueError as exc:
        raise SdenetError(f"malformed matrix file: {exc}") from exc
    if p <= 0 or A.shape != (p, p):
        raise SdenetError(f"matrix file declares p={p} but holds shape {A.shape}")
    return A


def read_matrix(path) -> np.ndarray:
    return parse_matrix(Path(path).read_text())


# --- trajectory --------------------------------------------------------------


def format_trajectory(traj: Trajectory) -> str:
    head = f"eta={_fmt(traj.eta)} n={traj.n} p={traj.p} provenance={traj.provenance} seed={traj.seed}"
    body = [" ".join(_fmt(v) for v in row) for row in traj.samples]
    return "\n".join([head] + body) + "\n"


def write_trajectory(path, traj: Trajectory) -> None:
    Path(path).write_text(format_trajectory(traj))


def parse_trajectory(text: str) -> Trajectory:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SdenetError("empty trajectory file")
    try:
        header = dict(tok.split("=", 1) for tok in lines[0].split())
        eta = float(header["eta"])
        n = int(header["n"])
        p = int(header["p"])
        prov = header["provenance"]
        seed = int(header["seed"])
        X = np.array([[float(v) for v in ln.split()] for ln in lines[1:]], dtype=float)
    except (KeyError, ValueError) as exc:
        raise SdenetError(f"malformed trajectory file: {exc}") from exc
    if prov not in PROVENANCES:
        raise SdenetError(f"unknown provenance {prov!r}")
    if X.shape != (n + 1, p):
        raise SdenetError(f"trajectory header says {(n + 1, p)} rows/cols, file holds {X.shape}")
    return Trajectory(samples=X, eta=eta, provenance=prov, seed=seed)


def read_trajectory(path) -> Trajectory:
    return parse_trajectory(Path(path).read_text())


# --- estimate report ---------------------------------------------------------


def ternary(signs) -> str:
    return "".join("+" if s > 0 else "-" if s < 0 else "0" for s in signs)


def parse_ternary(s: str) -> np.ndarray:
    table = {"+": 1, "-": -1, "0": 0}
    try:
        return np.array([table[c] for c in s], dtype=int)
    except KeyError as exc:
        raise SdenetError(f"bad signed-support string {s!r}") from exc


def estimate_rows(estimates) -> list:
    out = []
    for est in estimates:
        out.append(
            {
                "r": int(est.row),
                "lambda": float(est.lam),
                "kkt_residual": float(est.kkt_residual),
                "iterations": int(est.iterations),
                "signed_support": ternary(est.signed_support),
                "a_hat": [float(v) for v in est.a_hat],
            }
        )
    return out


def format_estimate_report(estimates, fmt: str = "csv") -> str:
    rows = estimate_rows(estimates)
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    if fmt != "csv":
        raise SdenetError(f"unknown format {fmt!r}")
    p = len(rows[0]["a_hat"]) if rows else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "lambda", "kkt_residual", "iterations", "signed_support"] + [f"a_{j}" for j in range(p)])
    for r in rows:
        w.writerow([r["r"], _fmt(r["lambda"]), _fmt(r["kkt_residual"]), r["iterations"], r["signed_support"]] + [_fmt(v) for v in r["a_hat"]])
    return buf.getvalue()


def parse_estimate_report(text: str) -> list:
    """Inverse of the CSV estimate report: list of dicts with numpy a_hat."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        keys = sorted((k for k in rec if k.startswith("a_")), key=lambda k: int(k[2:]))
        out.append(
            {
                "r": int(rec["r"]),
                "lambda": float(rec["lambda"]),
                "kkt_residual": float(rec["kkt_residual"]),
                "iterations": int(rec["iterations"]),
                "signed_support": parse_ternary(rec["signed_support"]),
                "a_hat": np.array([float(rec[k]) for k in keys]),
            }
        )
    return out


# --- condition report ----------------------------------------------------------


def jsonable(v):
    if isinstance(v, dict):
        return {k: jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def format_condition_report_kv(report) -> str:
    """One ``name = value`` line per field; nested dicts flatten with dots."""
    lines = []

    def emit(prefix, value):
        if isinstance(value, dict):
            for k, v in value.items():
                emit(f"{prefix}.{k}" if prefix else k, v)
        elif isinstance(value, (list, tuple)):
            lines.append(f"{prefix} = {','.join(str(x) for x in value)}")
        elif isinstance(value, (float, np.floating)):
            lines.append(f"{prefix} = {_fmt(value)}")
        else:
            lines.append(f"{prefix} = {value}")

    emit("", report.to_dict())
    return "\n".join(lines) + "\n"


def format_condition_report_json(report) -> str:
    return json.dumps(jsonable(report.to_dict()), indent=2, sort_keys=True) + "\n"


def parse_kv(text: str) -> dict:
    out = {}
    for ln in text.splitlines():
        if not ln.strip():
            continue
        if " = " not in ln:
            raise SdenetError(f"malformed key-value line {ln!r}")
        k, v = ln.split(" = ", 1)
        out[k] = v
    return out


def to_json(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"
