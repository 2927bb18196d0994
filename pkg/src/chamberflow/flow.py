"""Gradient flow of rho on a chamber or one of its faces, with collapse detection.

Forward trajectories of ``Y' = X(Y)`` leave the interior equilibrium and hit
the boundary in finite time.  Near a wall the distance ``d`` to the wall
behaves like ``d^2 ~ 2 m (T - t)`` where ``m`` is the wall's multiplicity, so
the integrator stops once the wall margin drops below ``wall_eps`` and
extrapolates the collapse time from that model.  A collapse limit lies on a
face; the cascade restarts the flow there using the face's own field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _rk
from .errors import (ConvergenceError, DomainError, IntegrationError, InvariantError,
                     UnsupportedCollapse)
from .rootsys import ActionSpec, Constraint, Stratum, chamber, chebyshev_center, strata

TANGENCY_TOL = 1e-10
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class FlowOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    wall_eps: float = 1e-8
    max_time: float = 1e3
    max_steps: int = 1_000_000
    fixed_tol: float = 1e-12
    corner_tol: float = 1e-6
    fit_window: int = 50
    direction: int = 1

    def __post_init__(self):
        for name in ("rtol", "atol", "wall_eps", "max_time", "max_steps", "fixed_tol", "corner_tol"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0) and not (name == "atol" and val == 0):
                raise ValueError(f"{name} must be positive and finite, got {val!r}")
        if self.fit_window < 3:
            raise ValueError("fit_window must be at least 3")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")


# ---------------------------------------------------------------------------
# flow domains


class _OutOfDomain(Exception):
    pass


class FlowDomain:
    """Field, potential and wall margins for the chamber or one of its faces.

    On a face, roots pinned by an active constraint are dropped entirely and
    the remaining field is projected onto the face's affine hull; the part
    normal to the face must vanish up to :data:`TANGENCY_TOL`.
    """

    def __init__(self, target):
        if isinstance(target, Stratum):
            self.stratum = target
            self.chamber = target.chamber
        elif isinstance(target, ActionSpec):
            self.stratum = None
            self.chamber = chamber(target)
        else:
            raise TypeError("flow target must be an ActionSpec or a Stratum")
        ch = self.chamber
        self.spec = ch.spec
        r = ch.rank
        if self.stratum is None:
            active = frozenset()
            self.P = np.eye(r)
            self.point = np.array(ch.reference_point)
            self.basis = np.eye(r)
            self.dim = r
        else:
            active = self.stratum.active
            self.P = np.array(self.stratum.projector)
            self.point = np.array(self.stratum.affine_point)
            self.basis = np.array(self.stratum.tangent_basis)
            self.dim = self.stratum.dim
        self.active = active
        pinned = {a.root for a in active}
        keep = np.array([i not in pinned for i in range(len(self.spec.roots))], dtype=bool)
        B = self.spec.vectors
        v = keep & (self.spec.m_V > 0)
        h = keep & (self.spec.m_H > 0)
        self.BV, self.mV = B[v], self.spec.m_V[v]
        self.BH, self.mH = B[h], self.spec.m_H[h]
        self.nV = np.linalg.norm(self.BV, axis=1)
        self.nH = np.linalg.norm(self.BH, axis=1)
        act_idx = {ch.index(a) for a in active}
        self.wall_idx = np.array([k for k in range(len(ch.constraints)) if k not in act_idx], dtype=int)
        self.Aw = ch.A[self.wall_idx]
        self.cw = ch.c[self.wall_idx]
        self.walls = [ch.constraints[k] for k in self.wall_idx]

    @property
    def is_face(self):
        return self.stratum is not None

    def margins(self, Y):
        return self.Aw @ Y + self.cw

    def raw_field(self, Y):
        """Sum of the kept terms before projection, plus a bound on its rounding error.

        A term ``m cot(beta)`` evaluated with an argument error ``eps |beta|``
        is off by about ``m eps |beta| / sin^2 beta``, which dominates near
        corners; the bound adds that to ``eps`` times the term magnitudes.
        """
        bv, bh = self.BV @ Y, self.BH @ Y
        tv = self.mV / np.tan(bv)
        th = self.mH * np.tan(bh)
        raw = th @ self.BH - tv @ self.BV
        if not self.is_face:
            return raw, 0.0
        nv, nh = self.nV, self.nH
        mag = np.abs(tv) @ nv + np.abs(th) @ nh
        slope = (self.mV * (1.0 + np.abs(bv)) / np.sin(bv) ** 2) @ nv \
            + (self.mH * (1.0 + np.abs(bh)) / np.cos(bh) ** 2) @ nh
        return raw, float(mag + slope) * _EPS

    def field(self, Y, check=True):
        raw, rounding = self.raw_field(Y)
        if not self.is_face:
            return raw
        X = self.P @ raw
        if check:
            resid = float(np.linalg.norm(raw - X))
            if resid > TANGENCY_TOL + 64.0 * rounding:
                raise InvariantError(
                    f"{self.spec.name}: field is not tangent to {self.stratum.describe()} at "
                    f"{np.asarray(Y).tolist()} (normal residual {resid:.3e})")
        return X

    def potential(self, Y):
        return math.fsum(np.concatenate([-self.mV * np.log(np.abs(np.sin(self.BV @ Y))),
                                         -self.mH * np.log(np.cos(self.BH @ Y))]))

    def hessian(self, Y):
        bv, bh = self.BV @ Y, self.BH @ Y
        H = (self.BV * (self.mV / np.sin(bv) ** 2)[:, None]).T @ self.BV \
            + (self.BH * (self.mH / np.cos(bh) ** 2)[:, None]).T @ self.BH
        return 0.5 * (H + H.T)

    def project(self, Y):
        if not self.is_face:
            return np.asarray(Y, dtype=float)
        return self.stratum.project(Y)

    def check_start(self, Y, tol=1e-9):
        Y = np.asarray(Y, dtype=float)
        if Y.shape != (self.chamber.rank,) or not np.all(np.isfinite(Y)):
            raise DomainError(f"invalid start point {Y.tolist()}")
        if self.is_face:
            m_act = self.chamber.margins(Y)[list(self.stratum.active_indices)]
            if np.any(np.abs(m_act) > tol):
                raise DomainError(f"start {Y.tolist()} is not on {self.stratum.describe()}")
            Y = self.project(Y)
        m = self.margins(Y)
        if len(m) and np.min(m) <= 0.0:
            k = int(np.argmin(m))
            raise DomainError(f"{self.spec.name}: start {Y.tolist()} is outside the domain "
                              f"({self.chamber.describe(int(self.wall_idx[k]))}, margin {m[k]:.3e})",
                              constraint=self.walls[k], margin=float(m[k]))
        return Y

    def guarded(self, sign=1.0):
        def f(Y):
            if len(self.cw) and np.min(self.margins(Y)) <= 0.0:
                raise _OutOfDomain
            return sign * self.field(Y)
        return f


def stratum_field(spec, stratum, Y):
    """Face flow field at a relative-interior point ``Y`` of ``stratum``.

    Raises :class:`InvariantError` if the kept terms are not tangent to the
    face and :class:`DomainError` if ``Y`` is not in its relative interior.
    """
    if stratum.chamber.spec.name != spec.name:
        raise ValueError("stratum belongs to a different action")
    dom = FlowDomain(stratum)
    if stratum.dim == 0:
        return np.zeros(stratum.chamber.rank)
    Y = dom.check_start(Y)
    return dom.field(Y)


def normal_residual(stratum, Y):
    """Norm of the face-normal part of the face field at ``Y`` (no exception)."""
    dom = FlowDomain(stratum)
    raw, _ = dom.raw_field(np.asarray(Y, dtype=float))
    return float(np.linalg.norm(raw - dom.P @ raw))


def tangency_tolerance(stratum, Y):
    """Threshold used by the tangency check at ``Y``: 1e-10 plus a rounding allowance."""
    _, rounding = FlowDomain(stratum).raw_field(np.asarray(Y, dtype=float))
    return TANGENCY_TOL + 64.0 * rounding


def stratum_potential(stratum, Y):
    """Potential whose gradient (within the face) is the face field."""
    return FlowDomain(stratum).potential(np.asarray(Y, dtype=float))


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class Sample:
    t: float
    y: tuple
    rho: float
    x_norm: float


@dataclass
class Trajectory:
    """Accepted integration steps.

    ``h[k]`` is the step from state ``k`` to ``k+1``; ``tau`` (time to go,
    filled in on collapse) is accumulated from the step sizes so it stays
    accurate when ``T - t`` is below the resolution of ``t``.
    """

    t: list = field(default_factory=list)
    Y: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    x_norm: list = field(default_factory=list)
    h: list = field(default_factory=list)
    tau: np.ndarray | None = None
    stats: dict = field(default_factory=lambda: {"accepted": 0, "rejected": 0, "evaluations": 0})
    domain: FlowDomain | None = None

    def append(self, t, Y, rho, x_norm):
        self.t.append(t)
        self.Y.append(np.array(Y))
        self.rho.append(rho)
        self.x_norm.append(x_norm)

    def __len__(self):
        return len(self.t)

    @property
    def samples(self):
        """States with strictly increasing float time."""
        out, last = [], -math.inf
        for t, Y, r, x in zip(self.t, self.Y, self.rho, self.x_norm):
            if t > last:
                out.append(Sample(t, tuple(Y.tolist()), r, x))
                last = t
        return out

    @property
    def points(self):
        return np.array(self.Y)


@dataclass(frozen=True)
class CollapseEvent:
    T_est: float
    limit: tuple
    active: tuple
    stratum_dim: int
    blowup_rate_est: float | None
    type_I_est: float | None
    type_I_theory: float | None
    walls: tuple = ()
    m_eff: int | None = None
    corner: bool = False

    kind = "collapse"


@dataclass(frozen=True)
class FixedPoint:
    point: tuple
    t: float
    x_norm: float

    kind = "fixed_point"


@dataclass(frozen=True)
class Timeout:
    point: tuple
    t: float

    kind = "timeout"


# ---------------------------------------------------------------------------
# integration


def _scaled_error(y, y5, err, m, m5, m4, opts):
    sy = opts.atol + opts.rtol * np.maximum(np.abs(y), np.abs(y5))
    parts = [err / sy]
    if len(m):
        sm = opts.atol + opts.rtol * np.maximum(np.abs(m), np.abs(m5))
        parts.append((m5 - m4) / sm)
    e = np.concatenate(parts)
    return float(np.sqrt(np.mean(e * e)))


def _initial_step(dom, Y, X):
    nx = float(np.linalg.norm(X))
    m = dom.margins(Y)
    d = float(np.min(m / np.linalg.norm(dom.Aw, axis=1))) if len(m) else 1.0
    return min(1e-2 * d / max(nx, 1e-300), 1e-2)


def integrate(target, Y_start, opts=None, **overrides):
    """Integrate ``Y' = X(Y)`` on the chamber (``ActionSpec``) or a face (``Stratum``).

    Returns ``(trajectory, termination)`` where termination is a
    :class:`CollapseEvent`, :class:`FixedPoint` or :class:`Timeout`.
    Keyword overrides replace fields of ``opts`` (see :class:`FlowOptions`).
    """
    opts = replace(opts or FlowOptions(), **overrides)
    dom = target if isinstance(target, FlowDomain) else FlowDomain(target)
    Y = dom.check_start(Y_start)
    sign = float(opts.direction)
    f = dom.guarded(sign)
    traj = Trajectory(domain=dom)
    X = dom.field(Y)
    t = 0.0
    traj.append(t, Y, dom.potential(Y), float(np.linalg.norm(X)))
    traj.stats["evaluations"] += 1

    if dom.dim == 0 or traj.x_norm[-1] <= opts.fixed_tol:
        return traj, FixedPoint(tuple(Y.tolist()), t, traj.x_norm[-1])
    if len(dom.cw) and np.min(dom.margins(Y)) < opts.wall_eps:
        return traj, _collapse(dom, traj, opts)

    k1 = sign * X
    h = _initial_step(dom, Y, X)
    ctrl = _rk.PIController()
    rejections_in_row = 0
    while True:
        if traj.stats["accepted"] >= opts.max_steps:
            raise IntegrationError(f"{dom.spec.name}: step limit {opts.max_steps} reached",
                                   _diagnostics(dom, traj, h))
        h = min(h, opts.max_time - t) if opts.max_time - t > 0 else h
        m = dom.margins(Y)
        try:
            y5, err, k7 = _rk.step(f, Y, k1, h)
            traj.stats["evaluations"] += 6
            if dom.is_face:
                y5 = dom.project(y5)
            m5 = dom.margins(y5)
            if len(m5) and np.min(m5) <= 0.0:
                raise _OutOfDomain
            m4 = m5 - dom.Aw @ err
            e = _scaled_error(Y, y5, err, m, m5, m4, opts)
            ok = e <= 1.0
        except _OutOfDomain:
            ok, e = False, math.inf
        if not ok:
            traj.stats["rejected"] += 1
            rejections_in_row += 1
            h *= 0.25 if e == math.inf else ctrl.factor(e, False)
            dist = float(np.min(m / np.linalg.norm(dom.Aw, axis=1))) if len(m) else 1.0
            speed = float(np.linalg.norm(k1))
            if h < 1e-10 * dist / max(speed, 1e-300) or rejections_in_row > 60 or t + h == t and h < 1e-300:
                raise IntegrationError(f"{dom.spec.name}: step size underflow at t={t!r}",
                                       _diagnostics(dom, traj, h))
            continue
        rejections_in_row = 0
        traj.h.append(h)
        t = t + h
        Y = y5
        k1 = k7
        if dom.is_face:
            k1 = sign * dom.field(Y)
            traj.stats["evaluations"] += 1
        xn = float(np.linalg.norm(k1))
        traj.append(t, Y, dom.potential(Y), xn)
        traj.stats["accepted"] += 1
        if xn <= opts.fixed_tol:
            return traj, FixedPoint(tuple(Y.tolist()), t, xn)
        if len(m5) and np.min(m5) < opts.wall_eps:
            return traj, _collapse(dom, traj, opts)
        if t >= opts.max_time:
            return traj, Timeout(tuple(Y.tolist()), t)
        h *= ctrl.factor(e, True)


def _diagnostics(dom, traj, h):
    Y = traj.Y[-1]
    return {"action": dom.spec.name, "t": traj.t[-1], "y": Y.tolist(), "h": h,
            "min_margin": float(np.min(dom.margins(Y))) if len(dom.cw) else None,
            "x_norm": traj.x_norm[-1], **traj.stats}


def _relevant_multiplicity(spec, con):
    root = spec.roots[con.root]
    return root.m_V if con.kind.startswith("V") else root.m_H


def _collapse(dom, traj, opts):
    """Build the collapse event from the trajectory tail and fill ``traj.tau``."""
    ch, spec = dom.chamber, dom.spec
    Y = traj.Y[-1]
    m = dom.margins(Y)
    hit = [k for k in range(len(m)) if m[k] <= opts.corner_tol]
    normals = dom.Aw[hit] @ dom.P  # rows of A projected into the hull (P symmetric)
    lens = np.linalg.norm(normals, axis=1)
    if np.any(lens < 1e-12):
        raise InvariantError(f"{spec.name}: a wall parallel to {dom.stratum.describe()} is collapsing")
    units = normals / lens[:, None]
    s = np.linalg.svd(units, compute_uv=False)
    corner = int(np.sum(s > 1e-8)) > 1

    # limit: project onto the collapsing walls within the hull
    Ah = normals
    resid = dom.Aw[hit] @ Y + dom.cw[hit]
    step = np.linalg.pinv(Ah) @ resid
    limit = Y - step
    if dom.is_face:
        limit = dom.project(limit)
    marg = ch.margins(limit)
    tight = {ch.constraints[k] for k in np.nonzero(np.abs(marg) <= 1e-9)[0]}
    active = frozenset(tight | set(dom.active) | {dom.walls[k] for k in hit})
    face = None
    for st in strata(ch):
        if st.active == active:
            face = st
            break
    if face is None:
        raise IntegrationError(f"{spec.name}: collapse limit {limit.tolist()} does not match a face",
                               {"active": sorted(active), "margins": marg.tolist()})
    limit = face.project(limit)

    walls = tuple(dom.walls[k] for k in hit)
    if corner:
        tail = _tail_corner(dom, traj, hit)
        traj.tau = _tau(traj.h, tail)
        return CollapseEvent(math.fsum(traj.h) + tail, tuple(limit.tolist()), tuple(sorted(face.active)),
                             face.dim, None, None, None, walls, None, True)

    m_eff = sum(_relevant_multiplicity(spec, dom.walls[k]) for k in hit)
    lead = max(range(len(hit)), key=lambda i: (_relevant_multiplicity(spec, dom.walls[hit[i]]), -i))
    k0 = hit[lead]
    nb = float(lens[lead])
    a, tail = _fit_tail(dom, traj, k0, nb, m_eff, opts.fit_window)
    traj.tau = _tau(traj.h, tail)
    return CollapseEvent(math.fsum(traj.h) + tail, tuple(limit.tolist()), tuple(sorted(face.active)),
                         face.dim, a * nb * nb, 1.0 / a, 1.0 / (2 * m_eff), walls, m_eff, False)


def _tau(h, tail):
    h = np.asarray(h, dtype=float)
    rev = np.cumsum(h[::-1])[::-1]
    return np.append(rev, 0.0) + tail


def _fit_tail(dom, traj, k0, nb, m_eff, window):
    """Fit ``d^2 = a (S + tail)`` over the last steps; ``S`` is the summed step size to the end."""
    h = np.asarray(traj.h, dtype=float)
    n = min(window, len(h))
    d_last = float(dom.Aw[k0] @ traj.Y[-1] + dom.cw[k0]) / nb
    if n < 3:
        return 2.0 * m_eff, d_last ** 2 / (2.0 * m_eff)
    Ys = np.array(traj.Y[-(n + 1):])
    d = (Ys @ dom.Aw[k0] + dom.cw[k0]) / nb
    S = np.append(np.cumsum(h[-n:][::-1])[::-1], 0.0)
    w = 1.0 / d ** 2  # relative residuals
    M = np.column_stack([S, np.ones_like(S)]) * w[:, None]
    col = np.linalg.norm(M, axis=0)
    coef, *_ = np.linalg.lstsq(M / col, d ** 2 * w, rcond=None)
    a, b = (float(x) for x in coef / col)
    if not (a > 0 and b >= 0 and math.isfinite(a)):
        return 2.0 * m_eff, d_last ** 2 / (2.0 * m_eff)
    return a, b / a


def _tail_corner(dom, traj, hit):
    # crude model: the fastest-closing wall sets the remaining time
    Y = traj.Y[-1]
    best = math.inf
    for k in hit:
        nb = float(np.linalg.norm(dom.Aw[k] @ dom.P))
        d = float(dom.Aw[k] @ Y + dom.cw[k]) / nb
        m = _relevant_multiplicity(dom.spec, dom.walls[k])
        best = min(best, d * d / (2.0 * m))
    return best


def type_I_estimate(trajectory, event, window=50):
    """Empirical type-I constant of a codimension-one collapse and its predicted value.

    ``est`` extrapolates ``(T - t) |beta0|^2 / margin(t)^2`` to the collapse
    time; ``theory`` is ``1/(2 m)``.  Corner collapses raise
    :class:`UnsupportedCollapse`.
    """
    if event.corner or len(event.walls) == 0:
        raise UnsupportedCollapse("type-I estimate needs a collapse onto a single wall")
    dom = trajectory.domain
    spec = dom.spec
    k0 = max(range(len(event.walls)), key=lambda i: (_relevant_multiplicity(spec, event.walls[i]), -i))
    k = dom.walls.index(event.walls[k0])
    nb = float(np.linalg.norm(dom.Aw[k] @ dom.P))
    a, _ = _fit_tail(dom, trajectory, k, nb, event.m_eff, window)
    return {"est": 1.0 / a, "theory": 1.0 / (2 * event.m_eff)}


# ---------------------------------------------------------------------------
# minimal points


def _newton(dom, z0, max_iter=200):
    p0, B = dom.point, dom.basis

    def Y_of(z):
        return p0 + B.T @ z

    def interior(z):
        return not len(dom.cw) or np.min(dom.margins(Y_of(z))) > 0.0

    z = np.array(z0, dtype=float)
    if not interior(z):
        raise DomainError("Newton start is not interior")
    for it in range(max_iter):
        Y = Y_of(z)
        g = B @ dom.raw_field(Y)[0]
        if np.linalg.norm(dom.field(Y, check=False)) <= 1e-12:
            return Y, it
        H = B @ dom.hessian(Y) @ B.T
        dz = -np.linalg.solve(H, g)
        f0 = dom.potential(Y)
        slope = float(g @ dz)
        s = 1.0
        while True:
            zn = z + s * dz
            if interior(zn) and dom.potential(Y_of(zn)) <= f0 + 1e-4 * s * slope:
                break
            s *= 0.5
            if s < 1e-16:
                break
        if s < 1e-16:
            # no decrease measurable at double precision: accept a pure Newton step if interior
            if interior(z + dz):
                z = z + dz
            break
        z = zn
    Y = Y_of(z)
    for _ in range(3):
        g = B @ dom.raw_field(Y)[0]
        if np.linalg.norm(g) <= 1e-12:
            break
        zn = z - np.linalg.solve(B @ dom.hessian(Y) @ B.T, g)
        if not interior(zn):
            break
        z, Y = zn, Y_of(zn)
    xn = float(np.linalg.norm(dom.field(Y, check=False)))
    if xn > 1e-12 * max(1.0, _field_scale(dom, Y)):
        raise ConvergenceError(f"{dom.spec.name}: Newton did not converge (|X| = {xn:.3e})")
    return Y, max_iter


def _field_scale(dom, Y):
    return float(np.sum(np.abs(dom.mV / np.tan(dom.BV @ Y))) + np.sum(np.abs(dom.mH * np.tan(dom.BH @ Y))))


def _start_in_hull(dom):
    Az = dom.Aw @ dom.basis.T
    cz = dom.Aw @ dom.point + dom.cw
    center, radius = chebyshev_center(Az, cz)
    if center is None or radius <= 0:
        raise ConvergenceError(f"{dom.spec.name}: face has no interior to start Newton from")
    return center


def minimal_point(target, starts=5, seed=0, return_info=False):
    """Unique minimizer of rho on the chamber, or of the face potential on a face.

    Damped Newton from the Chebyshev center; ``starts`` extra random interior
    starts must reach the same point within 1e-9.
    """
    dom = target if isinstance(target, FlowDomain) else FlowDomain(target)
    if dom.dim == 0:
        Y = np.array(dom.point)
        return (Y, {"spread": 0.0, "iterations": 0}) if return_info else Y
    Y, its = _newton(dom, _start_in_hull(dom))
    rng = np.random.default_rng(seed)
    verts = dom.stratum.vertices if dom.is_face else dom.chamber.vertices
    spread = 0.0
    for _ in range(starts):
        wts = rng.dirichlet(np.ones(len(verts)))
        Ys = wts @ verts
        z0 = dom.basis @ (Ys - dom.point)
        Y2, _ = _newton(dom, z0)
        spread = max(spread, float(np.linalg.norm(Y2 - Y)))
    if spread > 1e-9:
        raise ConvergenceError(f"{dom.spec.name}: Newton starts disagree by {spread:.3e}")
    if return_info:
        return Y, {"spread": spread, "iterations": its}
    return Y


# ---------------------------------------------------------------------------
# cascades and backward traces


@dataclass
class CascadeResult:
    events: list
    segments: list
    terminal: object
    faces: list

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def __getitem__(self, k):
        return self.events[k]


def _face_of(ch, active):
    active = frozenset(Constraint(*a) for a in active)
    for st in strata(ch):
        if st.active == active:
            return st
    raise IntegrationError(f"no face with active set {sorted(active)}")


def cascade(spec, Y_start, opts=None, **overrides):
    """Follow collapses from the chamber down through faces.

    Stops at a vertex or at a fixed point of a face flow; the chain has at
    most ``rank`` events.
    """
    ch = chamber(spec)
    target = spec
    Y = np.asarray(Y_start, dtype=float)
    events, segments, faces = [], [], []
    for _ in range(ch.rank + 1):
        traj, term = integrate(target, Y, opts, **overrides)
        segments.append(traj)
        if not isinstance(term, CollapseEvent):
            return CascadeResult(events, segments, term, faces)
        events.append(term)
        face = _face_of(ch, term.active)
        faces.append(face)
        if face.dim == 0:
            return CascadeResult(events, segments, term, faces)
        target = face
        Y = np.array(term.limit)
    raise InvariantError(f"{spec.name}: cascade exceeded {ch.rank} collapses")


def backward_trace(spec, boundary_point, delta_list, opts=None, tol=1e-9, **overrides):
    """Backward gradient trajectories started just inside a facet.

    Each run starts at ``boundary_point + delta * n`` (``n`` the inward unit
    normal) and follows ``-X`` until ``|X| <= tol``.
    """
    ch = chamber(spec)
    p = np.asarray(boundary_point, dtype=float)
    m = ch.margins(p)
    tight = np.nonzero(np.abs(m) <= 1e-9)[0]
    if len(tight) == 0 or np.any(m < -1e-9):
        raise DomainError(f"{spec.name}: {p.tolist()} is not on the chamber boundary")
    face = _face_of(ch, {ch.constraints[k] for k in tight})
    if face.dim != ch.rank - 1:
        raise DomainError(f"{spec.name}: {p.tolist()} is not in the relative interior of a facet")
    n = ch.A[tight[0]]
    n = n / np.linalg.norm(n)
    out = []
    for delta in delta_list:
        traj, term = integrate(spec, p + delta * n, opts,
                               **{"direction": -1, "fixed_tol": tol, **overrides})
        if not isinstance(term, FixedPoint):
            raise IntegrationError(f"{spec.name}: backward trace from delta={delta} ended with {term.kind}",
                                   {"end": traj.Y[-1].tolist()})
        out.append(traj)
    return out
