import numpy as np
import pytest

from persistify.environment import FieldSpec, InfoDensity
from persistify.sim import SimConfig, TaskConfig, run
from persistify.traceio import ROBOT_FIELDS, TraceFormatError, read_trace, write_trace


@pytest.fixture(scope="module")
def trace():
    cfg = SimConfig(n_robots=3, T=0.4, density=InfoDensity(center=(0.0, 0.0), variance=0.1),
                    field=FieldSpec.two_lobe(), task=TaskConfig(K=5, basis_resolution=50))
    return run(cfg)


def test_round_trip_is_exact(trace, tmp_path):
    tb = read_trace(write_trace(trace, tmp_path / "t.csv"))
    assert tb.n_robots == 3 and tb.metric_name == "ergodic_eps"
    assert np.array_equal(tb.t, trace.t)
    assert np.array_equal(tb.robot("E"), trace.E)
    assert np.array_equal(tb.robot("u1"), trace.u[:, :, 0])
    assert np.array_equal(tb.robot("qp_status"), trace.status)
    assert np.array_equal(tb.C, trace.C) and np.array_equal(tb.metric, trace.metric)


def test_column_count(trace, tmp_path):
    lines = write_trace(trace, tmp_path / "t.csv").read_text().splitlines()
    assert len(lines) == trace.t.size + 1
    assert all(len(l.split(",")) == 1 + len(ROBOT_FIELDS) * 3 + 2 for l in lines)


def test_bytes_are_reproducible(trace, tmp_path):
    a = write_trace(trace, tmp_path / "a.csv").read_bytes()
    assert a == write_trace(trace, tmp_path / "b.csv").read_bytes()


@pytest.mark.parametrize("mutate,row,msg", [
    (lambda L: L[:3] + [L[3] + ",1.0"] + L[4:], 4, "fields"),
    (lambda L: L[:2] + [L[2].replace(L[2].split(",")[1], "abc", 1)] + L[3:], 3, "abc"),
    (lambda L: [L[0], L[2], L[1]] + L[3:], 3, "monotone"),
    (lambda L: ["s" + L[0][1:]] + L[1:], 1, "header"),
])
def test_malformed_rows(trace, tmp_path, mutate, row, msg):
    lines = write_trace(trace, tmp_path / "t.csv").read_text().splitlines()
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(mutate(lines)) + "\n")
    with pytest.raises(TraceFormatError, match=msg) as exc:
        read_trace(bad)
    assert exc.value.row == row
    assert str(exc.value).startswith(f"row {row}:")
