"""Independent checks of the closed-form field and audits of transcribed formulas.

Transcriptions are plain expressions in ``x1``, ``x2``, ``q``, ``j``,
``pi``, ``sqrt``, ``cot`` and ``tan``.  They are checked two ways: a numeric
evaluator compares values with :func:`~chamberflow.meanfield.vector_field_X`
at random chamber points, and a term expander rewrites each component as a
sum ``coef * f(linear form)`` so differences can be named term by term.
"""

from __future__ import annotations

import ast
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ._format import linear_form
from .errors import DomainError
from .meanfield import cot_series, lift_family, lift_mean_curvature, potential_rho, vector_field_X
from .rootsys import chamber

DEFAULT_SEED = 20240601
MATCH_TOL = 1e-9


# ---------------------------------------------------------------------------
# finite differences and series


def fd_gradient_check(spec, Y, h=1e-6):
    """``|central-difference grad rho - X| / max(1, |X|)`` at ``Y``."""
    Y = np.asarray(Y, dtype=float)
    margin = chamber(spec).min_margin(Y)
    norms = np.linalg.norm(chamber(spec).A, axis=1)
    if margin <= 10 * h * float(norms.max()):
        raise DomainError(f"{spec.name}: margin {margin:.3e} too small for step {h}", margin=margin)
    X = vector_field_X(spec, Y)
    g = np.empty_like(Y)
    for i in range(len(Y)):
        e = np.zeros_like(Y)
        e[i] = h
        g[i] = (potential_rho(spec, Y + e) - potential_rho(spec, Y - e)) / (2 * h)
    return float(np.linalg.norm(g - X) / max(1.0, float(np.linalg.norm(X))))


def cot_series_check(theta, J):
    """Truncated ``sum 2/(theta + 2 j pi)`` against ``cot(theta/2)``."""
    if not 0.0 < theta < 2 * math.pi:
        raise DomainError(f"theta={theta!r} must lie in (0, 2 pi)")
    partial = cot_series(theta, J)
    exact = 0.0 if theta == math.pi else 1.0 / math.tan(theta / 2)
    return {"partial": partial, "exact": exact, "error": abs(partial - exact)}


def fit_inverse_envelope(Js, errors):
    """Smallest ``C`` with ``error(J) <= C/J`` over the given truncations."""
    return max(e * J for J, e in zip(Js, errors))


def consistency_sweep(specs, n_points=100, seed=DEFAULT_SEED):
    """Per-row max of ``|lifted mean curvature at w=0 - X|`` over random interior points."""
    rng = np.random.default_rng(seed)
    out = {}
    zero = None
    for spec in specs:
        ch = chamber(spec)
        zero = np.zeros(ch.rank)
        worst = 0.0
        for Y in ch.sample(n_points, rng):
            d = lift_mean_curvature(lift_family(spec, Y), zero) - vector_field_X(spec, Y)
            worst = max(worst, float(np.max(np.abs(d))))
        out[spec.name] = worst
    return out


# ---------------------------------------------------------------------------
# expression handling

_FUNCS = {"cot", "tan", "sqrt"}


def _parse(text):
    try:
        return ast.parse(text.replace("^", "**"), mode="eval").body
    except SyntaxError as exc:
        raise ValueError(f"cannot parse {text!r}: {exc}") from None


def evaluate(text, x, params=None):
    """Numerically evaluate a transcribed expression at ``x`` (a point, or arrays of coordinates)."""
    return _evaluate_node(_parse(text), x, params)


def _evaluate_node(tree, x, params=None):
    env = {"x1": np.asarray(x[0], dtype=float), "x2": np.asarray(x[1], dtype=float), "pi": math.pi,
           **(params or {})}
    funcs = {"cot": lambda a: 1.0 / np.tan(a), "tan": np.tan, "sqrt": np.sqrt}

    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise ValueError(f"unknown symbol {node.id!r}")
            return env[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            a, b = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div):
                return a / b
            if isinstance(node.op, ast.Pow):
                return a ** b
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in funcs \
                and len(node.args) == 1:
            return funcs[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported syntax: {ast.dump(node)}")

    out = ev(tree)
    return float(out) if np.ndim(out) == 0 else out


class _Linear:
    """Affine form ``a1 x1 + a2 x2 + c`` with numeric coefficients."""

    def __init__(self, a=(0.0, 0.0), c=0.0):
        self.a = np.array(a, dtype=float)
        self.c = float(c)

    def is_const(self):
        return not np.any(self.a)


def _expand(node, params):
    """Expand to ``{('const', None): c, (func, arg): coef}``; args are normalised linear forms."""
    if isinstance(node, ast.Constant):
        return {("const", None): float(node.value)}
    if isinstance(node, ast.Name):
        if node.id == "pi":
            return {("const", None): math.pi}
        if node.id in params:
            return {("const", None): float(params[node.id])}
        if node.id in ("x1", "x2"):
            raise ValueError("bare coordinate outside cot/tan")
        raise ValueError(f"unknown symbol {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _expand(node.operand, params)
        s = -1.0 if isinstance(node.op, ast.USub) else 1.0
        return {k: s * v for k, v in inner.items()}
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub)):
        a, b = _expand(node.left, params), _expand(node.right, params)
        s = 1.0 if isinstance(node.op, ast.Add) else -1.0
        out = dict(a)
        for k, v in b.items():
            out[k] = out.get(k, 0.0) + s * v
        return out
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Mult, ast.Div)):
        a, b = _expand(node.left, params), _expand(node.right, params)
        if isinstance(node.op, ast.Div):
            if set(b) != {("const", None)}:
                raise ValueError("division by a non-constant")
            return {k: v / b[("const", None)] for k, v in a.items()}
        for const, other in ((a, b), (b, a)):
            if set(const) == {("const", None)}:
                return {k: const[("const", None)] * v for k, v in other.items()}
        raise ValueError("product of two non-constant factors")
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
        if node.func.id == "sqrt":
            inner = _expand(node.args[0], params)
            if set(inner) != {("const", None)}:
                raise ValueError("sqrt of a non-constant")
            return {("const", None): math.sqrt(inner[("const", None)])}
        lin = _linear(node.args[0], params)
        if lin.c != 0.0:
            raise ValueError("shifted arguments are not supported")
        a = lin.a
        first = a[np.nonzero(np.abs(a) > 1e-12)[0][0]]
        sign = 1.0 if first > 0 else -1.0  # cot and tan are odd
        key = (node.func.id, tuple(np.round(sign * a, 9) + 0.0))
        return {key: sign}
    raise ValueError(f"unsupported syntax: {ast.dump(node)}")


def _linear(node, params):
    if isinstance(node, ast.Name) and node.id in ("x1", "x2"):
        return _Linear((1.0, 0.0) if node.id == "x1" else (0.0, 1.0))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _linear(node.operand, params)
        s = -1.0 if isinstance(node.op, ast.USub) else 1.0
        return _Linear(s * inner.a, s * inner.c)
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub)):
        a, b = _linear(node.left, params), _linear(node.right, params)
        s = 1.0 if isinstance(node.op, ast.Add) else -1.0
        return _Linear(a.a + s * b.a, a.c + s * b.c)
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Mult, ast.Div)):
        a, b = _linear(node.left, params), _linear(node.right, params)
        if isinstance(node.op, ast.Div):
            if not b.is_const():
                raise ValueError("division by a coordinate")
            return _Linear(a.a / b.c, a.c / b.c)
        if a.is_const():
            return _Linear(a.c * b.a, a.c * b.c)
        if b.is_const():
            return _Linear(b.c * a.a, b.c * a.c)
        raise ValueError("nonlinear argument")
    const = _expand(node, params)
    if set(const) != {("const", None)}:
        raise ValueError("unsupported argument")
    return _Linear(c=const[("const", None)])


def expand_terms(text, params=None):
    """Canonical ``{(func, arg_vector): coef}`` for a component expression."""
    terms = _expand(_parse(text), params or {})
    if abs(terms.pop(("const", None), 0.0)) > 1e-12:
        raise ValueError(f"{text!r} has a constant term")
    return {k: v for k, v in terms.items() if abs(v) > 1e-12}


def generated_terms(spec):
    """The same canonical form for the field built from marked roots (one dict per component)."""
    comps = [dict() for _ in range(spec.rank)]
    for r in spec.roots:
        a = np.array(r.vector)
        first = a[np.nonzero(np.abs(a) > 1e-12)[0][0]]
        s = 1.0 if first > 0 else -1.0
        arg = tuple(np.round(s * a, 9) + 0.0)
        for i in range(spec.rank):
            # cot and tan are odd: f(beta) beta_i = f(s beta) (s beta)_i
            if r.m_V:
                comps[i][("cot", arg)] = comps[i].get(("cot", arg), 0.0) - r.m_V * s * a[i]
            if r.m_H:
                comps[i][("tan", arg)] = comps[i].get(("tan", arg), 0.0) + r.m_H * s * a[i]
    return [{k: v for k, v in c.items() if abs(v) > 1e-12} for c in comps]


def term_descriptor(component, key):
    func, arg = key
    return f"X{component + 1}: {func}({linear_form(arg)})"


# ---------------------------------------------------------------------------
# transcription data


def _data_path(name):
    return resources.files("chamberflow").joinpath(f"data/{name}")


def load_transcriptions(path=None):
    """Transcribed formulas keyed by transcription id."""
    src = path or _data_path("transcriptions.json")
    with open(src, encoding="utf-8") as fh:
        data = json.load(fh)
    return {e["id"]: e for e in data["entries"]}


def load_allowlist(path=None):
    """Known discrepancies: ``{transcription id: {descriptor: note}}``."""
    src = path or _data_path("allowlist.json")
    with open(src, encoding="utf-8") as fh:
        data = json.load(fh)
    return {k: {e["term"]: e.get("note", "") for e in v} for k, v in data.get("entries", {}).items()}


@dataclass
class CrosscheckReport:
    row: str
    transcription: str
    points: list = field(default_factory=list)
    deviations: list = field(default_factory=list)
    term_diffs: list = field(default_factory=list)
    verdict: str = "match"
    chamber_disagreement: float = 0.0
    chamber_verdict: str = "match"
    unexplained: list = field(default_factory=list)

    @property
    def max_deviation(self):
        return max(self.deviations) if self.deviations else 0.0

    def to_record(self):
        return {"row": self.row, "transcription": self.transcription, "n_points": len(self.points),
                "max_deviation": self.max_deviation, "verdict": self.verdict,
                "term_diffs": [list(d) for d in self.term_diffs],
                "chamber_disagreement": self.chamber_disagreement,
                "chamber_verdict": self.chamber_verdict, "unexplained": self.unexplained}


def _inside(inequalities, pts, params):
    """Boolean membership of each row of ``pts`` in the region cut out by chained inequalities."""
    x = (pts[:, 0], pts[:, 1])
    ok = np.ones(len(pts), dtype=bool)
    for text in inequalities:
        node = _parse(text)
        if not isinstance(node, ast.Compare):
            raise ValueError(f"not an inequality: {text!r}")
        vals = [np.broadcast_to(_evaluate_node(v, x, params), (len(pts),))
                for v in [node.left, *node.comparators]]
        for op, a, b in zip(node.ops, vals, vals[1:]):
            if isinstance(op, ast.Lt):
                ok &= a < b
            elif isinstance(op, ast.Gt):
                ok &= a > b
            elif isinstance(op, ast.LtE):
                ok &= a <= b
            elif isinstance(op, ast.GtE):
                ok &= a >= b
            else:
                raise ValueError(f"unsupported comparison in {text!r}")
    return ok


def chamber_audit(spec, inequalities, n=4000, seed=DEFAULT_SEED):
    """Fraction of box samples where the transcribed chamber and the computed one disagree.

    Samples within 1e-9 of a computed wall are skipped.
    """
    ch = chamber(spec)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-math.pi, math.pi, size=(n, ch.rank))
    m = pts @ ch.A.T + ch.c
    usable = np.min(np.abs(m), axis=1) >= 1e-9
    mine = np.all(m > 0, axis=1)
    theirs = _inside(inequalities, pts, dict(spec.params))
    return float(np.sum((mine != theirs) & usable) / max(int(np.sum(usable)), 1))


def table3_crosscheck(spec, transcription, n_points=20, allowlist=None, seed=DEFAULT_SEED):
    """Audit one transcription against the field built from the spec's marked roots."""
    allow = (allowlist or {}).get(transcription["id"], {})
    params = {k: v for k, v in spec.params}
    exprs = [transcription["X1"], transcription["X2"]]
    rep = CrosscheckReport(spec.name, transcription["id"])

    gen = generated_terms(spec)
    for i, text in enumerate(exprs):
        tab = expand_terms(text, params)
        for key in sorted(set(tab) | set(gen[i])):
            a, b = tab.get(key, 0.0), gen[i].get(key, 0.0)
            if abs(a - b) > MATCH_TOL * max(1.0, abs(b)):
                rep.term_diffs.append((term_descriptor(i, key), a, b))

    if n_points > 0:
        rng = np.random.default_rng(seed)
        for Y in chamber(spec).sample(n_points, rng):
            X = vector_field_X(spec, Y)
            T = np.array([evaluate(e, Y, params) for e in exprs])
            rep.points.append(tuple(Y.tolist()))
            rep.deviations.append(float(np.max(np.abs(T - X))))
        differs = rep.max_deviation > MATCH_TOL
    else:
        differs = bool(rep.term_diffs)

    unexplained = [d[0] for d in rep.term_diffs if d[0] not in allow]
    if not differs:
        rep.verdict = "match"
    elif rep.term_diffs and not unexplained:
        rep.verdict = "known-discrepancy"
    else:
        rep.verdict = "mismatch"
        rep.unexplained += unexplained or ["numeric deviation without a term difference"]

    if transcription.get("chamber"):
        frac = chamber_audit(spec, transcription["chamber"], seed=seed)
        rep.chamber_disagreement = frac
        if frac > 0.0:
            if "chamber" in allow:
                rep.chamber_verdict = "known-discrepancy"
            else:
                rep.chamber_verdict = "mismatch"
                rep.unexplained.append("chamber")
    return rep
