"""Line-oriented JSON records for trajectories and flow events.

Every float is written with 17 significant digits so that re-reading gives
back the exact doubles.
"""

from __future__ import annotations

import json
import math

from ._format import fmt17
from .flow import CollapseEvent, FixedPoint, Timeout


def dumps(obj):
    """JSON text for ``obj`` with round-trip float formatting and stable key order."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt17(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "tolist"):
        return dumps(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def sample_record(sample, t_offset=0.0):
    return {"t": float(sample.t + t_offset), "y": [float(v) for v in sample.y],
            "rho": float(sample.rho), "x_norm": float(sample.x_norm)}


def event_record(term, t_offset=0.0):
    if isinstance(term, CollapseEvent):
        return {"event": "collapse", "T_est": term.T_est + t_offset, "limit": list(term.limit),
                "active": [[a.root, a.kind] for a in term.active], "stratum_dim": term.stratum_dim,
                "blowup_rate_est": term.blowup_rate_est, "type_I_est": term.type_I_est,
                "type_I_theory": term.type_I_theory}
    if isinstance(term, FixedPoint):
        return {"event": "fixed_point", "t": term.t + t_offset, "point": list(term.point),
                "x_norm": term.x_norm}
    if isinstance(term, Timeout):
        return {"event": "timeout", "t": term.t + t_offset, "point": list(term.point)}
    raise TypeError(f"unknown termination {term!r}")


def trajectory_lines(traj, term=None, t_offset=0.0):
    for s in traj.samples:
        yield dumps(sample_record(s, t_offset))
    if term is not None:
        yield dumps(event_record(term, t_offset))


def write_records(stream, lines):
    for line in lines:
        stream.write(line + "\n")


def read_records(stream):
    """Parse a record file into ``(samples, events)`` lists of dicts."""
    samples, events = [], []
    for n, line in enumerate(stream, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {n}: {exc}") from None
        (events if "event" in rec else samples).append(rec)
    return samples, events


def is_finite_record(rec):
    return all(math.isfinite(v) for v in [rec["t"], rec["rho"], rec["x_norm"], *rec["y"]])
