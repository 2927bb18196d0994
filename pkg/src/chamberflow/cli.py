"""Command-line front end.

Exit codes: 0 success, 1 verification mismatch, 2 usage error or unknown
name, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager

import numpy as np

from . import records
from .errors import CatalogError, ChamberflowError
from .flow import CollapseEvent, FixedPoint, FlowOptions, backward_trace, cascade, integrate, minimal_point
from .meanfield import lift_family, lift_principal_curvatures, orbit_shape_spectrum
from .rootsys import ActionSpec, MarkedRoot, catalog, chamber, find_row, strata
from .verify import (DEFAULT_SEED, consistency_sweep, cot_series_check, fd_gradient_check,
                     load_allowlist, load_transcriptions, table3_crosscheck)

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _fmt(x):
    x = float(x)
    return "0.0000000000000000" if x == 0.0 else f"{x:.16f}"


def _point(text):
    try:
        vals = [float(v) for v in str(text).replace(" ", "").split(",")]
    except ValueError:
        raise UsageError(f"cannot parse point {text!r}; expected e.g. 0.25,0") from None
    return np.array(vals)


# ---------------------------------------------------------------------------
# configuration


def _load_config(args):
    cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    for key in ("action", "roots", "start", "out", "seed", "q", "j"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    opts = dict(cfg.get("options", {}))
    for key in ("rtol", "atol", "wall_eps", "max_time"):
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    cfg["options"] = opts
    return cfg


def _spec_from(cfg):
    if cfg.get("roots") is not None:
        raw = cfg["roots"]
        if isinstance(raw, str):
            try:
                raw = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise UsageError(f"--roots is not valid JSON: {exc}") from None
        try:
            roots = tuple(MarkedRoot(tuple(r["vector"]), r.get("m_V", 0), r.get("m_H", 0), r.get("label", ""))
                          for r in raw)
        except (KeyError, TypeError) as exc:
            raise UsageError(f"malformed inline root data: {exc!r}") from None
        return ActionSpec(cfg.get("name", "inline"), roots)
    if not cfg.get("action"):
        raise UsageError("give --action NAME or --roots JSON")
    row = find_row(cfg["action"])
    params = {k: cfg[k] for k in ("q", "j") if cfg.get(k) is not None and k in row.params}
    extra = [k for k in ("q", "j") if cfg.get(k) is not None and k not in row.params]
    if extra:
        raise UsageError(f"{row.name} takes no parameter(s) {extra}")
    if isinstance(cfg.get("params"), dict):
        params = {**cfg["params"], **params}
    return row.instantiate(**params)


def _options(cfg):
    try:
        return FlowOptions(**{k: float(v) for k, v in cfg["options"].items()})
    except TypeError as exc:
        raise UsageError(f"unknown integrator option: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _start(cfg, spec):
    if cfg.get("start") is None:
        raise UsageError("give --start X1,X2")
    Y = _point(cfg["start"]) if isinstance(cfg["start"], str) else np.array(cfg["start"], dtype=float)
    if Y.shape != (spec.rank,):
        raise UsageError(f"start point needs {spec.rank} coordinates")
    ch = chamber(spec)
    if not ch.contains(Y):
        k = int(np.argmin(ch.margins(Y)))
        raise UsageError(f"start {Y.tolist()} is not inside the chamber ({ch.describe(k)} fails)")
    return Y


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield None
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yield fh


# ---------------------------------------------------------------------------
# commands


def cmd_catalog(args):
    if args.what == "list":
        for row in catalog():
            params = f" [{','.join(row.params)}]" if row.params else ""
            print(f"{row.name}\trank {row.rank}\t{len(row.roots)} roots{params}\t{row.label}")
        return EXIT_OK
    if not args.name:
        raise UsageError("catalog show needs a row name")
    row = find_row(args.name)
    params = {k: getattr(args, k) for k in ("q", "j") if getattr(args, k) is not None}
    spec = row.instantiate(**params)
    ch = chamber(spec)
    print(f"{row.name}: {row.label}")
    print(f"cartan type {row.cartan_type}, rank {spec.rank}")
    if spec.params:
        print("parameters " + ", ".join(f"{k}={v}" for k, v in spec.params))
    for key, val in row.metadata:
        print(f"{key}: {val}")
    print("roots:")
    for i, r in enumerate(ch.spec.roots):
        flip = " (reoriented)" if i in ch.flipped else ""
        print(f"  {r.label or i}: vector ({', '.join(_fmt(v) for v in r.vector)}) m_V={r.m_V} m_H={r.m_H}{flip}")
    print(f"chamber ({len(ch.constraints)} constraints):")
    for k in range(len(ch.constraints)):
        print(f"  {ch.describe(k)}")
    print("reference point " + ", ".join(_fmt(v) for v in ch.reference_point))
    faces = strata(ch)
    print(f"faces: {sum(f.dim == spec.rank - 1 for f in faces)} facets, {sum(f.dim == 0 for f in faces)} vertices")
    for t in row.multiplicity_audit(**dict(spec.params)):
        print(f"warning: {t[0]} lists total multiplicity {t[1]} but m_V + m_H = {t[2]}")
    if row.note:
        print(f"note: {row.note}")
    return EXIT_OK


def _summary(term):
    if isinstance(term, CollapseEvent):
        parts = [f"collapse T_est={term.T_est:.12g}",
                 "limit=(" + ", ".join(f"{v:.12g}" for v in term.limit) + ")",
                 f"stratum_dim={term.stratum_dim}"]
        if term.type_I_est is not None:
            parts += [f"blowup_rate_est={term.blowup_rate_est:.6g}", f"type_I_est={term.type_I_est:.6g}",
                      f"type_I_theory={term.type_I_theory:.6g}"]
        else:
            parts.append("corner collapse (no type-I estimate)")
        return " ".join(parts)
    if isinstance(term, FixedPoint):
        return "fixed point at (" + ", ".join(f"{v:.12g}" for v in term.point) + ")"
    return f"timeout at t={term.t:.6g}"


def cmd_flow(args):
    cfg = _load_config(args)
    spec = _spec_from(cfg)
    Y = _start(cfg, spec)
    traj, term = integrate(spec, Y, _options(cfg))
    with _output(cfg.get("out")) as fh:
        if fh:
            records.write_records(fh, records.trajectory_lines(traj, term))
    print(_summary(term))
    return EXIT_OK


def cmd_cascade(args):
    cfg = _load_config(args)
    spec = _spec_from(cfg)
    Y = _start(cfg, spec)
    res = cascade(spec, Y, _options(cfg))
    offset = 0.0
    with _output(cfg.get("out")) as fh:
        for traj, ev in zip(res.segments, [*res.events, res.terminal][:len(res.segments)]):
            term = ev if ev is not None else None
            if fh:
                records.write_records(fh, records.trajectory_lines(traj, term, offset))
            if isinstance(ev, CollapseEvent):
                offset += ev.T_est
    for k, ev in enumerate(res.events, 1):
        print(f"event {k}: {_summary(ev)}")
    if not isinstance(res.terminal, CollapseEvent):
        print(f"end: {_summary(res.terminal)}")
    else:
        print("end: vertex")
    return EXIT_OK


def cmd_minimal(args):
    cfg = _load_config(args)
    spec = _spec_from(cfg)
    w0 = minimal_point(spec, seed=int(cfg.get("seed", 0) or 0))
    print("w0 = " + ", ".join(_fmt(v) for v in w0))
    return EXIT_OK


def cmd_backtrace(args):
    cfg = _load_config(args)
    spec = _spec_from(cfg)
    p = _point(args.point)
    deltas = args.delta or [1e-3, 1e-4]
    trajs = backward_trace(spec, p, deltas, _options(cfg))
    with _output(cfg.get("out")) as fh:
        for d, traj in zip(deltas, trajs):
            end = traj.Y[-1]
            if fh:
                records.write_records(fh, records.trajectory_lines(traj, FixedPoint(tuple(end.tolist()),
                                                                                   traj.t[-1], traj.x_norm[-1])))
            print(f"delta={d:g}: end (" + ", ".join(_fmt(v) for v in end) + f") after t={traj.t[-1]:.6g}")
    return EXIT_OK


def cmd_spectrum(args):
    cfg = _load_config(args)
    spec = _spec_from(cfg)
    Y = _point(args.point)
    v = _point(args.direction)
    total = 0.0
    for e in orbit_shape_spectrum(spec, Y, v):
        label = spec.roots[e.root].label or str(e.root)
        print(f"{e.eigenvalue:.16g}\tx{e.multiplicity}\t{label}\t{e.block}")
        total += e.eigenvalue * e.multiplicity
    print(f"trace {total:.16g}")
    if args.lifted:
        fam = lift_family(spec, Y)
        for val, m, a, j in lift_principal_curvatures(fam, np.zeros(spec.rank), v, args.lifted):
            print(f"lifted\t{val:.16g}\tx{m}\tentry {a}\tj={j}")
    return EXIT_OK


def _check_rows(names, allowlist, seed, n_points):
    rows = [find_row(n) for n in names] if names else list(catalog())
    specs = [r.instantiate() for r in rows]
    by_row = {s.name: s for s in specs}
    trans = load_transcriptions()
    rng = np.random.default_rng(seed)
    out, failed = [], False
    sweep = consistency_sweep(specs, n_points=n_points, seed=seed)
    for spec in specs:
        ch = chamber(spec)
        fd = max(fd_gradient_check(spec, Y) for Y in ch.sample(n_points, rng))
        rec = {"row": spec.name, "fd_gradient_max": fd, "consistency_max": sweep[spec.name],
               "fd_ok": fd <= 1e-5, "consistency_ok": sweep[spec.name] <= 1e-11}
        audits = []
        for tid, entry in trans.items():
            if entry["row"] == spec.name:
                rep = table3_crosscheck(by_row[spec.name], entry, 20, allowlist, seed)
                audits.append(rep.to_record())
        rec["transcriptions"] = audits
        bad = (not rec["fd_ok"] or not rec["consistency_ok"]
               or any(a["verdict"] == "mismatch" or a["chamber_verdict"] == "mismatch" for a in audits))
        rec["status"] = "fail" if bad else "ok"
        failed |= bad
        out.append(rec)
    series = []
    for theta in (0.3, math.pi / 2, 2.7, math.pi):
        for J in (100, 1000, 10000):
            r = cot_series_check(theta, J)
            series.append({"theta": theta, "J": J, **r})
    zero_ok = all(s["partial"] == 0.0 for s in series if s["theta"] == math.pi)
    conv_ok = all(
        next(s["error"] for s in series if s["theta"] == th and s["J"] == 10000)
        < next(s["error"] for s in series if s["theta"] == th and s["J"] == 100)
        for th in (0.3, math.pi / 2, 2.7))
    failed |= not (zero_ok and conv_ok)
    return out, {"cot_series": series, "cot_series_ok": zero_ok and conv_ok}, failed


def cmd_check(args):
    if not args.all and not args.action:
        raise UsageError("check needs --all or --action NAME")
    allowlist = load_allowlist(args.allowlist) if args.allowlist else load_allowlist()
    names = None if args.all else [args.action]
    rows, extra, failed = _check_rows(names, allowlist, args.seed, args.points)
    report = args.report or "check_report.jsonl"
    with open(report, "w", encoding="utf-8", newline="\n") as fh:
        for rec in rows:
            fh.write(records.dumps(rec) + "\n")
        fh.write(records.dumps({"summary": True, **extra, "failed": failed}) + "\n")
    for rec in rows:
        verdicts = ", ".join(f"{a['transcription']}: {a['verdict']}"
                             + ("" if a["chamber_verdict"] == "match" else f" (chamber {a['chamber_verdict']})")
                             for a in rec["transcriptions"])
        print(f"{rec['row']}: {rec['status']}; fd {rec['fd_gradient_max']:.1e}, "
              f"lift {rec['consistency_max']:.1e}; {verdicts}")
    print(f"report written to {report}")
    return EXIT_MISMATCH if failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_run_args(p, start=True):
    p.add_argument("--action", help="catalog row name")
    p.add_argument("--roots", help="inline root data as JSON: [{\"vector\": [..], \"m_V\": 1, \"m_H\": 0}, ...]")
    p.add_argument("--q", type=int)
    p.add_argument("--j", type=int)
    p.add_argument("--config", help="JSON file with the same keys; command-line values win")
    p.add_argument("--seed", type=int)
    if start:
        p.add_argument("--start", help="start point X1,X2 in chamber coordinates")
    p.add_argument("--out", help="write trajectory records here")
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--wall-eps", dest="wall_eps", type=float)
    p.add_argument("--max-time", dest="max_time", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="chamberflow",
                                     description="Chamber gradient flows of rank-2 Hermann actions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="list or show catalog rows")
    p.add_argument("what", choices=["list", "show"])
    p.add_argument("name", nargs="?")
    p.add_argument("--q", type=int)
    p.add_argument("--j", type=int)
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("flow", help="integrate the chamber flow from a start point")
    _add_run_args(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("cascade", help="follow collapses through faces")
    _add_run_args(p)
    p.set_defaults(func=cmd_cascade)

    p = sub.add_parser("minimal", help="minimal point of rho")
    _add_run_args(p, start=False)
    p.set_defaults(func=cmd_minimal)

    p = sub.add_parser("backtrace", help="backward flows from a facet point")
    _add_run_args(p, start=False)
    p.add_argument("--point", required=True)
    p.add_argument("--delta", type=float, action="append")
    p.set_defaults(func=cmd_backtrace)

    p = sub.add_parser("spectrum", help="orbit shape-operator spectrum")
    _add_run_args(p, start=False)
    p.add_argument("--point", required=True)
    p.add_argument("--direction", required=True)
    p.add_argument("--lifted", type=int, default=0, metavar="J",
                   help="also list lifted principal curvatures with |j| <= J")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("check", help="run the verification suite")
    p.add_argument("--all", action="store_true")
    p.add_argument("--action")
    p.add_argument("--allowlist")
    p.add_argument("--report")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--points", type=int, default=100)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, CatalogError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ChamberflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
