import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sdenet import dynamics as dyn
from sdenet import fileio
from sdenet.conditions import compute_condition_report
from sdenet.errors import SdenetError
from sdenet.estimator import Fixed, recover_network

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.integers(1, 6).flatmap(lambda p: arrays(np.float64, (p, p), elements=finite)))
def test_matrix_roundtrip_bit_exact(A):
    B = fileio.parse_matrix(fileio.format_matrix(A))
    assert np.array_equal(A.view(np.int64), B.view(np.int64))


@given(st.integers(1, 20), st.integers(1, 4), st.data())
def test_trajectory_roundtrip_bit_exact(n, p, data):
    X = data.draw(arrays(np.float64, (n + 1, p), elements=finite))
    eta = data.draw(st.floats(0, 10, allow_nan=False))
    tr = dyn.Trajectory(X, eta, "discrete-native", data.draw(st.integers(0, 2**63)))
    back = fileio.parse_trajectory(fileio.format_trajectory(tr))
    assert np.array_equal(back.samples.view(np.int64), tr.samples.view(np.int64))
    assert back.eta == tr.eta and back.seed == tr.seed and back.provenance == tr.provenance


def test_trajectory_file_roundtrip(tmp_path):
    tr = dyn.simulate_discrete(-np.eye(3), 0.1, 30, seed=2)
    path = tmp_path / "t.txt"
    fileio.write_trajectory(path, tr)
    assert np.array_equal(fileio.read_trajectory(path).samples, tr.samples)
    assert path.read_text().splitlines()[0] == "eta=0.10000000000000001 n=30 p=3 provenance=discrete-native seed=2"


@pytest.mark.parametrize(
    "text",
    ["", "2\n1 2\n3\n", "x\n", "3\n1 2 3\n4 5 6\n", "2\n1 a\n2 3\n"],
)
def test_malformed_matrix(text):
    with pytest.raises(SdenetError):
        fileio.parse_matrix(text)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "eta=0.1 n=2 p=1 provenance=discrete-native seed=0\n1\n2\n",
        "eta=0.1 n=1 p=1 provenance=bogus seed=0\n1\n2\n",
        "eta=0.1 n=1 p=1 seed=0\n1\n2\n",
    ],
)
def test_malformed_trajectory(text):
    with pytest.raises(SdenetError):
        fileio.parse_trajectory(text)


def test_ternary_roundtrip():
    s = np.array([1, -1, 0, 0, 1])
    assert fileio.ternary(s) == "+-00+"
    assert np.array_equal(fileio.parse_ternary("+-00+"), s)
    with pytest.raises(SdenetError):
        fileio.parse_ternary("+x")


def test_estimate_report_roundtrip():
    model = dyn.make_random_binary_model(4, 1.0, 1)
    tr = dyn.simulate_discrete(model, 0.1, 500, seed=1)
    net = recover_network(tr, Fixed(0.2))
    text = fileio.format_estimate_report(net.estimates)
    assert text.splitlines()[0] == "r,lambda,kkt_residual,iterations,signed_support,a_0,a_1,a_2,a_3"
    rows = fileio.parse_estimate_report(text)
    for rec, e in zip(rows, net.estimates):
        assert np.array_equal(rec["a_hat"], e.a_hat)
        assert np.array_equal(rec["signed_support"], e.signed_support)
        assert rec["kkt_residual"] == e.kkt_residual
    js = json.loads(fileio.format_estimate_report(net.estimates, "json"))
    assert js[0]["signed_support"] == fileio.ternary(net.estimates[0].signed_support)


def test_condition_report_formats():
    rep = compute_condition_report(dyn.make_random_binary_model(5, 2.0, 3), 1, eta=0.1)
    kv = fileio.parse_kv(fileio.format_condition_report_kv(rep))
    js = json.loads(fileio.format_condition_report_json(rep))
    assert float(kv["C_min"]) == rep.C_min == js["C_min"]
    assert float(kv["D"]) == rep.D
    assert set(js) == set(rep.to_dict())


def test_condition_report_nan_is_serialisable():
    rep = compute_condition_report(-np.eye(2), 0, eta=2.5)
    js = json.loads(fileio.format_condition_report_json(rep))
    assert js["C_min_eta"] == "nan"
    assert fileio.parse_kv(fileio.format_condition_report_kv(rep))["C_min_eta"] == "nan"
