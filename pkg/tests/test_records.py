import io
import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chamberflow import get_spec, integrate
from chamberflow.records import dumps, event_record, is_finite_record, read_records, trajectory_lines, write_records

RHO1 = get_spec("rho1-SU3-SO3")


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_round_trip(x):
    assert json.loads(dumps(x)) == x


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        dumps(float("nan"))
    with pytest.raises(ValueError):
        dumps([1.0, math.inf])


def test_nested_values():
    text = dumps({"a": [1, 2.5, None, True], "b": "xé", "c": (0.1,)})
    assert json.loads(text) == {"a": [1, 2.5, None, True], "b": "xé", "c": [0.1]}


def test_trajectory_file_round_trip():
    traj, ev = integrate(RHO1, [math.pi / 12, 0.0])
    buf = io.StringIO()
    write_records(buf, trajectory_lines(traj, ev))
    buf.seek(0)
    samples, events = read_records(buf)
    assert len(samples) == len(traj.samples)
    assert [s["t"] for s in samples] == [s.t for s in traj.samples]
    assert [s["y"] for s in samples] == [list(s.y) for s in traj.samples]
    assert all(is_finite_record(s) for s in samples)
    assert set(samples[0]) == {"t", "y", "rho", "x_norm"}
    (rec,) = events
    assert rec["event"] == "collapse"
    assert rec["T_est"] == ev.T_est
    assert rec["active"] == [[0, "V_lower"]]
    assert rec["type_I_theory"] == 0.5


def test_time_offset_applies_to_samples_and_events():
    traj, ev = integrate(RHO1, [math.pi / 12, 0.0])
    lines = list(trajectory_lines(traj, ev, t_offset=1.0))
    assert json.loads(lines[0])["t"] == 1.0
    assert json.loads(lines[-1])["T_est"] == pytest.approx(1.0 + ev.T_est)


def test_fixed_point_record():
    _, term = integrate(RHO1, [math.pi / 6, 0.0])
    rec = event_record(term)
    assert rec["event"] == "fixed_point"


def test_bad_line_reports_line_number():
    with pytest.raises(ValueError, match="line 2"):
        read_records(io.StringIO('{"t": 0}\n{oops\n'))
