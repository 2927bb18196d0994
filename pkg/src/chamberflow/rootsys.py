"""Marked root data, the Hermann-action catalog, and chamber geometry.

A catalog row lists positive roots of a rank-2 restricted root system together
with two multiplicities per root: ``m_V`` (vertical block) and ``m_H``
(horizontal block).  From these the fundamental domain of the action is the
open polytope

    0 < beta(Y) < pi            for every root with m_V >= 1,
    -pi/2 < beta(Y) < pi/2      for every root with m_H >= 1,

which :func:`chamber` builds, and whose faces :func:`strata` enumerates.
"""

from __future__ import annotations

import ast
import functools
import itertools
import json
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from ._format import linear_form
from .errors import CatalogError

CATALOG_ENV = "CHAMBERFLOW_CATALOG"
KINDS = ("V_lower", "V_upper", "H_lower", "H_upper")

# tolerance for "this constraint is tight at this vertex"
_TIGHT = 1e-9


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MarkedRoot:
    """A linear functional beta(Y) = <vector, Y> with multiplicities."""

    vector: tuple
    m_V: int
    m_H: int
    label: str = ""

    def __post_init__(self):
        vec = tuple(float(v) for v in self.vector)
        object.__setattr__(self, "vector", vec)
        if not vec or all(v == 0.0 for v in vec):
            raise CatalogError(f"root {self.label or vec}: vector must be nonzero")
        for m in (self.m_V, self.m_H):
            if int(m) != m or m < 0:
                raise CatalogError(f"root {self.label or vec}: multiplicities must be nonnegative integers")
        object.__setattr__(self, "m_V", int(self.m_V))
        object.__setattr__(self, "m_H", int(self.m_H))
        if self.m_V + self.m_H < 1:
            raise CatalogError(f"root {self.label or vec}: both multiplicities are zero")

    @property
    def sharp(self):
        return np.array(self.vector)

    def __call__(self, Y):
        return float(np.dot(self.vector, Y))

    def negated(self):
        label = self.label[1:] if self.label.startswith("-") else "-" + self.label if self.label else ""
        return MarkedRoot(tuple(-v for v in self.vector), self.m_V, self.m_H, label)


@dataclass(frozen=True)
class ActionSpec:
    """One concrete catalog row: marked roots with numeric multiplicities."""

    name: str
    roots: tuple
    params: tuple = ()
    metadata: tuple = ()
    label: str = ""
    orientation_hint: tuple | None = None

    def __post_init__(self):
        roots = tuple(self.roots)
        object.__setattr__(self, "roots", roots)
        if not roots:
            raise CatalogError(f"{self.name}: no roots")
        ranks = {len(r.vector) for r in roots}
        if len(ranks) != 1:
            raise CatalogError(f"{self.name}: root vectors have inconsistent dimensions")
        object.__setattr__(self, "params", tuple(tuple(p) for p in self.params))
        object.__setattr__(self, "metadata", tuple(tuple(m) for m in self.metadata))
        if self.orientation_hint is not None:
            object.__setattr__(self, "orientation_hint", tuple(float(v) for v in self.orientation_hint))

    @property
    def rank(self):
        return len(self.roots[0].vector)

    @cached_property
    def vectors(self):
        return _readonly([r.vector for r in self.roots])

    @cached_property
    def m_V(self):
        return _readonly([r.m_V for r in self.roots])

    @cached_property
    def m_H(self):
        return _readonly([r.m_H for r in self.roots])

    def param(self, key, default=None):
        return dict(self.params).get(key, default)

    def meta(self, key, default=""):
        return dict(self.metadata).get(key, default)


# ---------------------------------------------------------------------------
# catalog loading


_INT_OPS = {ast.Add: lambda a, b: a + b, ast.Sub: lambda a, b: a - b, ast.Mult: lambda a, b: a * b}
_CMP_OPS = {ast.Gt: lambda a, b: a > b, ast.GtE: lambda a, b: a >= b,
            ast.Lt: lambda a, b: a < b, ast.LtE: lambda a, b: a <= b,
            ast.Eq: lambda a, b: a == b, ast.NotEq: lambda a, b: a != b}


def _eval_int(expr, env):
    """Evaluate an integer expression such as ``"2*q-2*j-2"`` or ``"q>2"``."""
    if isinstance(expr, int):
        return expr

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return node.value
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise CatalogError(f"unknown parameter {node.id!r} in {expr!r}")
            return env[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -walk(node.operand)
        if isinstance(node, ast.BinOp) and type(node.op) in _INT_OPS:
            return _INT_OPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.Compare):
            left = walk(node.left)
            for op, comp in zip(node.ops, node.comparators):
                right = walk(comp)
                if type(op) not in _CMP_OPS or not _CMP_OPS[type(op)](left, right):
                    return False
                left = right
            return True
        raise CatalogError(f"unsupported syntax in multiplicity expression {expr!r}")

    try:
        tree = ast.parse(str(expr), mode="eval")
    except SyntaxError as exc:
        raise CatalogError(f"cannot parse {expr!r}: {exc}") from None
    return walk(tree)


class RootTemplate(NamedTuple):
    label: str
    vector: tuple
    m_total: str
    m_V: str
    m_H: str


@dataclass(frozen=True)
class CatalogRow:
    """A catalog row whose multiplicities may still depend on ``q`` and ``j``."""

    name: str
    label: str
    cartan_type: str
    roots: tuple
    params: tuple = ()
    defaults: tuple = ()
    param_constraints: tuple = ()
    metadata: tuple = ()
    orientation_hint: tuple | None = None
    note: str = ""

    @property
    def is_parametrized(self):
        return bool(self.params)

    @property
    def rank(self):
        return len(self.roots[0].vector)

    def instantiate(self, **values):
        """Evaluate multiplicities at the given parameters (defaults fill gaps).

        Raises :class:`CatalogError` if a parameter constraint fails or any
        multiplicity comes out negative.
        """
        env = dict(self.defaults)
        unknown = set(values) - set(self.params)
        if unknown:
            raise CatalogError(f"{self.name}: unknown parameter(s) {sorted(unknown)}")
        env.update({k: int(v) for k, v in values.items() if v is not None})
        missing = [p for p in self.params if p not in env]
        if missing:
            raise CatalogError(f"{self.name}: missing parameter(s) {missing}")
        for cond in self.param_constraints:
            if not _eval_int(cond, env):
                raise CatalogError(f"{self.name}: parameter constraint {cond!r} fails for {env}")
        roots = []
        for t in self.roots:
            mv, mh = _eval_int(t.m_V, env), _eval_int(t.m_H, env)
            for kind, m, expr in (("m_V", mv, t.m_V), ("m_H", mh, t.m_H)):
                if m < 0:
                    raise CatalogError(
                        f"{self.name}: {t.label} {kind} = {expr} = {m} < 0 at {env}")
            if mv + mh > 0:
                roots.append(MarkedRoot(t.vector, mv, mh, t.label))
        params = tuple((p, env[p]) for p in self.params)
        return ActionSpec(self.name, tuple(roots), params, self.metadata, self.label,
                          self.orientation_hint)

    def multiplicity_audit(self, **values):
        """Roots whose m_V + m_H differs from the listed total multiplicity."""
        env = dict(self.defaults)
        env.update(values)
        out = []
        for t in self.roots:
            tot = _eval_int(t.m_total, env)
            s = _eval_int(t.m_V, env) + _eval_int(t.m_H, env)
            if tot != s:
                out.append((t.label, tot, s))
        return out


def default_catalog_path():
    """Catalog path: ``$CHAMBERFLOW_CATALOG`` if set, else the bundled file."""
    env = os.environ.get(CATALOG_ENV)
    if env:
        return env
    return str(resources.files("chamberflow").joinpath("data/catalog.json"))


def _parse_row(raw, cartan):
    name = raw.get("name") if isinstance(raw, dict) else None
    try:
        ct = raw.get("cartan_type")
        roots = []
        for r in raw["roots"]:
            if "vector" in r:
                vec = tuple(float(v) for v in r["vector"])
            else:
                basis = cartan[ct]
                a, b = r["coeffs"]
                vec = tuple(a * x + b * y for x, y in zip(basis["alpha"], basis["beta"]))
            m_v, m_h = str(r.get("m_V", 0)), str(r.get("m_H", 0))
            total = str(r.get("m_total", f"({m_v})+({m_h})"))
            roots.append(RootTemplate(r.get("label", ""), vec, total, m_v, m_h))
        hint = raw.get("orientation_hint")
        if hint is None and ct in cartan:
            hint = cartan[ct].get("dominant")
        row = CatalogRow(
            name=str(raw["name"]),
            label=str(raw.get("label", raw["name"])),
            cartan_type=str(ct or ""),
            roots=tuple(roots),
            params=tuple(raw.get("params", [])),
            defaults=tuple(sorted((k, int(v)) for k, v in raw.get("defaults", {}).items())),
            param_constraints=tuple(raw.get("param_constraints", [])),
            metadata=tuple(sorted(raw.get("metadata", {}).items())),
            orientation_hint=tuple(hint) if hint is not None else None,
            note=str(raw.get("note", "")),
        )
        if not row.roots:
            raise ValueError("no roots")
        # multiplicity expressions must at least parse and evaluate at defaults
        if all(p in dict(row.defaults) for p in row.params):
            row.multiplicity_audit()
    except CatalogError as exc:
        raise CatalogError(f"catalog row {name!r}: {exc}") from None
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise CatalogError(f"catalog row {name!r} is malformed: {exc!r}") from None
    return row


def load_catalog(source=None):
    """Parse catalog data into a list of :class:`CatalogRow`.

    ``source`` may be a path, an open text stream, or an already decoded
    mapping; ``None`` means :func:`default_catalog_path`.
    """
    if source is None:
        source = default_catalog_path()
    if isinstance(source, dict):
        data = source
    elif hasattr(source, "read"):
        data = json.load(source)
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise CatalogError(f"cannot read catalog {source}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise CatalogError(f"catalog {source} is not valid JSON: {exc}") from None
    if not isinstance(data, dict) or "rows" not in data:
        raise CatalogError("catalog data must be a mapping with a 'rows' list")
    cartan = data.get("cartan_types", {})
    rows, seen = [], set()
    for raw in data["rows"]:
        row = _parse_row(raw, cartan)
        if row.name in seen:
            raise CatalogError(f"duplicate catalog row name {row.name!r}")
        seen.add(row.name)
        rows.append(row)
    return rows


@functools.lru_cache(maxsize=8)
def _cached_catalog(path):
    return tuple(load_catalog(path))


def catalog(path=None):
    """The catalog as a tuple of rows (cached per path)."""
    return _cached_catalog(path or default_catalog_path())


def find_row(name, path=None):
    """Look up a row by name (case-insensitive); :class:`CatalogError` if absent."""
    rows = catalog(path)
    for row in rows:
        if row.name == name:
            return row
    for row in rows:
        if row.name.lower() == name.lower() or row.label == name:
            return row
    raise CatalogError(f"unknown action {name!r}; try 'catalog list'")


def get_spec(name, path=None, **params):
    """Instantiate a catalog row by name (defaults fill missing parameters)."""
    return find_row(name, path).instantiate(**params)


def default_specs(path=None):
    """Every catalog row instantiated at its default parameters."""
    return [row.instantiate() for row in catalog(path)]


# ---------------------------------------------------------------------------
# chamber geometry


class Constraint(NamedTuple):
    root: int
    kind: str


def _constraint_data(spec):
    cons, rows, offs = [], [], []
    for i, r in enumerate(spec.roots):
        v = np.array(r.vector)
        if r.m_V >= 1:
            cons += [Constraint(i, "V_lower"), Constraint(i, "V_upper")]
            rows += [v, -v]
            offs += [0.0, math.pi]
        if r.m_H >= 1:
            cons += [Constraint(i, "H_lower"), Constraint(i, "H_upper")]
            rows += [v, -v]
            offs += [math.pi / 2, math.pi / 2]
    return tuple(cons), np.array(rows), np.array(offs)


def chebyshev_center(A, c):
    """Center and radius of the largest ball inside {Y : A Y + c >= 0}.

    Returns ``(center, radius)``; radius <= 0 means empty interior and
    ``None`` for the center means the system is unbounded.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    c = np.asarray(c, dtype=float)
    norms = np.linalg.norm(A, axis=1)
    keep = norms > 1e-14
    if not np.all(c[~keep] > 0):
        return np.zeros(A.shape[1]), -1.0
    A, c, norms = A[keep], c[keep], norms[keep]
    n = A.shape[1]
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    A_ub = np.hstack([-A, norms[:, None]])
    res = linprog(cost, A_ub=A_ub, b_ub=c, bounds=[(None, None)] * n + [(None, None)],
                  method="highs")
    if res.status == 3:
        return None, math.inf
    if res.status != 0:
        return np.zeros(n), -1.0
    return res.x[:n], float(res.x[-1])


@dataclass(frozen=True, eq=False)
class Chamber:
    """The open polytope of an action, with roots oriented so that V roots are positive."""

    spec: ActionSpec
    constraints: tuple
    A: np.ndarray
    c: np.ndarray
    reference_point: np.ndarray
    inradius: float
    flipped: tuple = ()

    @property
    def rank(self):
        return self.spec.rank

    def margins(self, Y):
        """Signed margins (functional units) of all constraints at ``Y``."""
        return self.A @ np.asarray(Y, dtype=float) + self.c

    def min_margin(self, Y):
        return float(np.min(self.margins(Y)))

    def contains(self, Y, eps=0.0):
        return bool(np.all(self.margins(Y) > eps))

    def describe(self, k):
        con = self.constraints[k]
        root = self.spec.roots[con.root]
        form = linear_form(root.vector)
        return {
            "V_lower": f"{form} > 0",
            "V_upper": f"{form} < pi",
            "H_lower": f"{form} > -pi/2",
            "H_upper": f"{form} < pi/2",
        }[con.kind]

    def index(self, con):
        return self.constraints.index(Constraint(*con))

    @cached_property
    def vertices(self):
        return _vertices(self.A, self.c)

    def sample(self, n, rng, min_margin=0.05):
        """Uniform samples from {margins >= min_margin} by rejection from the bounding box."""
        V = self.vertices
        lo, hi = V.min(axis=0), V.max(axis=0)
        out = []
        tries = 0
        while len(out) < n:
            batch = rng.uniform(lo, hi, size=(max(64, 4 * (n - len(out))), self.rank))
            ok = np.all(batch @ self.A.T + self.c >= min_margin, axis=1)
            out.extend(batch[ok])
            tries += 1
            if tries > 1000:
                raise CatalogError(f"{self.spec.name}: cannot sample with margin {min_margin}")
        return np.array(out[:n])


def _default_direction(spec):
    """A direction on which no vertical root vanishes."""
    vecs = spec.vectors[spec.m_V >= 1]
    if len(vecs) == 0:
        return np.ones(spec.rank)
    for k in range(1, 200):
        ang = 0.1 + 0.618033988749895 * k
        d = np.array([math.cos(ang), math.sin(ang)]) if spec.rank == 2 else \
            np.random.default_rng(k).standard_normal(spec.rank)
        if np.min(np.abs(vecs @ d) / np.linalg.norm(vecs, axis=1)) > 1e-3:
            return d
    raise CatalogError(f"{spec.name}: could not find a generic orientation direction")


@functools.lru_cache(maxsize=256)
def chamber(spec):
    """Build the oriented chamber of ``spec``.

    Roots with ``m_V >= 1`` are negated where needed so that every vertical
    root is positive on the chamber selected by the spec's orientation hint.
    """
    d = np.array(spec.orientation_hint) if spec.orientation_hint is not None else _default_direction(spec)
    roots, flipped = [], []
    for i, r in enumerate(spec.roots):
        val = float(np.dot(r.vector, d))
        if r.m_V >= 1 and abs(val) < 1e-12:
            raise CatalogError(f"{spec.name}: orientation hint lies on the wall of {r.label or i}")
        if r.m_V >= 1 and val < 0:
            roots.append(r.negated())
            flipped.append(i)
        else:
            roots.append(r)
    oriented = ActionSpec(spec.name, tuple(roots), spec.params, spec.metadata, spec.label,
                          spec.orientation_hint)
    cons, A, c = _constraint_data(oriented)
    center, radius = chebyshev_center(A, c)
    if center is None:
        raise CatalogError(f"{spec.name}: chamber is unbounded (roots do not span)")
    if radius <= 1e-12:
        raise CatalogError(f"{spec.name}: chamber has empty interior")
    return Chamber(oriented, cons, _readonly(A), _readonly(c), _readonly(center), radius,
                   tuple(flipped))


def _vertices(A, c, tol=_TIGHT):
    n, r = A.shape
    pts = []
    for idx in itertools.combinations(range(n), r):
        sub = A[list(idx)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        p = np.linalg.solve(sub, -c[list(idx)])
        if np.all(A @ p + c >= -tol) and not any(np.allclose(p, q, atol=tol) for q in pts):
            pts.append(p)
    return np.array(pts)


@dataclass(frozen=True, eq=False)
class Stratum:
    """A face of the chamber identified by its active (pinned) constraints."""

    chamber: Chamber
    active: frozenset
    dim: int
    affine_point: np.ndarray
    tangent_basis: np.ndarray
    vertices: np.ndarray

    @property
    def key(self):
        return tuple(sorted(self.active))

    @cached_property
    def projector(self):
        B = self.tangent_basis
        return _readonly(B.T @ B) if len(B) else _readonly(np.zeros((self.chamber.rank,) * 2))

    @cached_property
    def active_indices(self):
        return tuple(self.chamber.index(a) for a in sorted(self.active))

    @cached_property
    def wall_indices(self):
        act = set(self.active_indices)
        return tuple(k for k in range(len(self.chamber.constraints)) if k not in act)

    def project(self, Y):
        """Orthogonal projection onto the face's affine hull."""
        Y = np.asarray(Y, dtype=float)
        return self.affine_point + self.projector @ (Y - self.affine_point)

    def contains(self, Y, tol=1e-9):
        """True if ``Y`` is (numerically) in the face's relative interior."""
        m = self.chamber.margins(Y)
        act = list(self.active_indices)
        walls = list(self.wall_indices)
        return bool(np.all(np.abs(m[act]) <= tol) and np.all(m[walls] > tol))

    def sample(self, n, rng):
        """Random relative-interior points (Dirichlet mixtures of the face's vertices)."""
        w = rng.dirichlet(np.ones(len(self.vertices)), size=n)
        return w @ self.vertices

    def describe(self):
        names = []
        for a in sorted(self.active):
            root = self.chamber.spec.roots[a.root]
            names.append(f"{root.label or a.root}:{a.kind}")
        return f"dim {self.dim} face [{', '.join(names)}]"


def _null_basis(M, r):
    if M.size == 0:
        return np.eye(r)
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > 1e-10 * max(1.0, s[0])))
    return vt[rank:]


@functools.lru_cache(maxsize=256)
def _strata_cached(ch):
    A, c = ch.A, ch.c
    r = ch.rank
    verts = ch.vertices
    tight = [frozenset(np.nonzero(np.abs(A @ v + c) <= _TIGHT)[0]) for v in verts]
    facet_sets = set()
    for k in range(len(ch.constraints)):
        vs = frozenset(i for i, t in enumerate(tight) if k in t)
        if vs:
            facet_sets.add(vs)
    faces = set(facet_sets)
    frontier = set(facet_sets)
    while frontier:
        new = set()
        for a in frontier:
            for b in facet_sets:
                inter = a & b
                if inter and inter not in faces:
                    new.add(inter)
        faces |= new
        frontier = new
    out = []
    for vs in faces:
        act_idx = sorted(frozenset.intersection(*(tight[i] for i in vs)))
        normals = A[act_idx]
        basis = _null_basis(normals, r)
        dim = basis.shape[0]
        pts = verts[sorted(vs)]
        aff = np.linalg.matrix_rank(pts - pts[0], tol=1e-9) if len(pts) > 1 else 0
        if aff != dim:
            continue  # not a genuine face (cannot happen for a polytope)
        out.append(Stratum(ch, frozenset(ch.constraints[k] for k in act_idx), dim,
                           _readonly(pts.mean(axis=0)), _readonly(basis), _readonly(pts)))
    out.sort(key=lambda s: (-s.dim, s.key))
    return tuple(out)


def strata(ch):
    """All proper faces of ``ch`` (dimensions rank-1 down to 0), highest dimension first."""
    if isinstance(ch, ActionSpec):
        ch = chamber(ch)
    return list(_strata_cached(ch))


def find_stratum(ch, active):
    """The face whose active set equals ``active`` (a set of Constraint)."""
    active = frozenset(Constraint(*a) for a in active)
    for s in strata(ch):
        if s.active == active:
            return s
    raise CatalogError(f"no face with active set {sorted(active)}")
