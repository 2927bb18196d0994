import math

import numpy as np
import pytest

from chamberflow import (CollapseEvent, DomainError, FixedPoint, IntegrationError, InvariantError, Timeout,
                         UnsupportedCollapse, backward_trace, cascade, chamber, get_spec, integrate,
                         minimal_point, potential_rho, strata, stratum_field, type_I_estimate)
from chamberflow.flow import FlowOptions, normal_residual
from chamberflow.rootsys import catalog, default_specs

SQ3 = math.sqrt(3.0)
RHO1 = get_spec("rho1-SU3-SO3")
W0 = np.array([math.pi / 6, 0.0])
TOP = math.pi / (2 * SQ3)
GOOD_ROWS = [r.name for r in catalog()
             if r.name not in {"rho4-SO8-U4", "rho7-Sp2-U2", "SU4-Sp4-Sp2Sp2", "U4-Sp4-Sp2Sp2",
                               "Sp2Sp2-Sp4-Sp2Sp2", "rho8-Sp2Sp2-Sp2", "rho9-Sp2Sp2-Sp2",
                               "Sp4-E6-Spin10U1", "SU6SU2-E6-Spin10U1", "rho10-E6-Spin10U1",
                               "rho11-E6-Spin10U1", "rho12-E6-Spin10U1"}]


def facet(spec, label, kind):
    ch = chamber(spec)
    for f in strata(ch):
        if f.dim == ch.rank - 1 and any(c.kind == kind and ch.spec.roots[c.root].label == label
                                        for c in f.active):
            return f
    raise LookupError


@pytest.fixture(scope="module")
def rho1_collapse():
    return integrate(RHO1, [math.pi / 12, 0.0])


def test_collapse_from_axis(rho1_collapse):
    traj, ev = rho1_collapse
    assert isinstance(ev, CollapseEvent) and ev.kind == "collapse"
    assert np.linalg.norm(ev.limit) <= 1e-6
    assert [(RHO1.roots[c.root].label, c.kind) for c in ev.active] == [("alpha", "V_lower")]
    assert ev.stratum_dim == 1
    assert ev.type_I_theory == 0.5
    # near-wall model: x1^2 shrinks at rate 2, so T is close to x1(0)^2 / 2
    assert ev.T_est == pytest.approx((math.pi / 12) ** 2 / 2, rel=0.2)
    assert ev.blowup_rate_est == pytest.approx(8.0, rel=0.02)
    assert ev.type_I_est == pytest.approx(0.5, rel=0.02)


def test_collapse_time_matches_tight_tolerance_run(rho1_collapse):
    _, ev = rho1_collapse
    _, tight = integrate(RHO1, [math.pi / 12, 0.0], rtol=1e-12, atol=1e-14)
    assert ev.T_est == pytest.approx(tight.T_est, rel=1e-6)


def test_trajectory_invariants(rho1_collapse):
    traj, ev = rho1_collapse
    t = np.array([s.t for s in traj.samples])
    assert np.all(np.diff(t) > 0)
    rho = np.array([s.rho for s in traj.samples])
    assert np.all(np.diff(rho) >= -1e-9)
    # the tail past the last sample can be below one ulp of T
    assert traj.samples[-1].t <= ev.T_est
    ch = chamber(RHO1)
    m = ch.margins(np.array(ev.limit))
    act = [ch.constraints.index(c) for c in ev.active]
    assert np.all(np.abs(m[act]) <= 1e-8)
    assert np.all(np.delete(m, act) > 0)


def test_type_I_estimate(rho1_collapse):
    traj, ev = rho1_collapse
    est = type_I_estimate(traj, ev)
    assert est["theory"] == 0.5
    assert est["est"] == pytest.approx(0.5, rel=0.02)


def test_type_I_theory_for_double_multiplicity_wall():
    spec = get_spec("SO6-SU6-Sp3")
    ch = chamber(spec)
    f = facet(spec, "alpha", "V_lower")
    p = np.mean(f.vertices, axis=0)
    n = ch.A[f.active_indices[0]] / np.linalg.norm(ch.A[f.active_indices[0]])
    _, ev = integrate(spec, p + 0.05 * n)
    assert isinstance(ev, CollapseEvent)
    assert [ch.spec.roots[c.root].label for c in ev.active] == ["alpha"]
    assert ev.type_I_theory == 0.25
    assert ev.type_I_est == pytest.approx(0.25, rel=0.02)


def test_horizontal_wall_theory():
    ch = chamber(RHO1)
    f = facet(RHO1, "beta", "H_lower")
    p = np.mean(f.vertices, axis=0)
    n = ch.A[f.active_indices[0]] / np.linalg.norm(ch.A[f.active_indices[0]])
    _, ev = integrate(RHO1, p + 0.02 * n)
    assert isinstance(ev, CollapseEvent)
    assert ev.type_I_theory == 0.5
    assert ev.type_I_est == pytest.approx(0.5, rel=0.02)


def test_fixed_point_start():
    traj, term = integrate(RHO1, W0)
    assert isinstance(term, FixedPoint)
    assert len(traj.samples) == 1


def test_timeout():
    _, term = integrate(RHO1, [0.4, 0.05], max_time=1e-3)
    assert isinstance(term, Timeout)
    assert term.t == pytest.approx(1e-3)


def test_start_outside_rejected():
    with pytest.raises(DomainError):
        integrate(RHO1, [0.0, 0.1])
    with pytest.raises(DomainError):
        integrate(RHO1, [1.0, 1.0])


@pytest.mark.parametrize("name", [r.name for r in catalog()])
def test_perturbed_minimum_collapses(name):
    spec = get_spec(name)
    w0 = minimal_point(spec)
    traj, ev = integrate(spec, w0 + np.array([1e-3, 0.0]))
    assert isinstance(ev, CollapseEvent)
    assert math.isfinite(ev.T_est)
    assert np.all(np.diff(traj.rho) > 0)


def test_stratum_field_on_rho1_facet():
    f = facet(RHO1, "alpha", "V_lower")
    for x2 in (-0.5, -0.1, 0.2, 0.7):
        got = stratum_field(RHO1, f, [0.0, x2])
        assert got == pytest.approx([0.0, 2 * SQ3 * math.tan(SQ3 * x2)], abs=1e-12)
    assert np.array_equal(stratum_field(RHO1, f, [0.0, 0.0]), [0.0, 0.0])


def test_stratum_field_at_vertex_is_zero():
    for f in strata(chamber(RHO1)):
        if f.dim == 0:
            assert np.array_equal(stratum_field(RHO1, f, f.affine_point), [0.0, 0.0])


@pytest.mark.parametrize("name", GOOD_ROWS)
def test_stratum_fields_are_tangent(name):
    spec = get_spec(name)
    rng = np.random.default_rng(3)
    for f in strata(chamber(spec)):
        if f.dim == 1:
            for Y in f.sample(10, rng):
                assert np.linalg.norm(normal_residual(f, Y)) <= 1e-10


def test_inconsistent_row_raises_on_tangency():
    spec = get_spec("rho4-SO8-U4")
    f = facet(spec, "2alpha+beta", "H_upper")
    Y = np.mean(f.vertices, axis=0)
    assert np.linalg.norm(normal_residual(f, Y)) > 1e-3
    with pytest.raises(InvariantError):
        stratum_field(spec, f, Y)


def test_minimal_point_rho1():
    w0, info = minimal_point(RHO1, return_info=True)
    assert np.linalg.norm(w0 - W0) <= 1e-10
    assert info["spread"] <= 1e-9


def test_minimal_point_rho1_facet():
    w0 = minimal_point(facet(RHO1, "alpha", "V_lower"))
    assert np.linalg.norm(w0) <= 1e-10


@pytest.mark.parametrize("spec", default_specs()[::5], ids=lambda s: s.name)
def test_minimal_point_is_global_minimum(spec):
    w0 = minimal_point(spec)
    r0 = potential_rho(spec, w0)
    for Y in chamber(spec).sample(100, np.random.default_rng(11)):
        assert r0 <= potential_rho(spec, Y) + 1e-12


def test_cascade_on_axis_stops_at_facet_minimum():
    res = cascade(RHO1, [math.pi / 12, 0.0])
    assert len(res) == 1
    assert isinstance(res.terminal, FixedPoint)
    assert np.linalg.norm(res.terminal.point) <= 1e-6


def test_cascade_off_axis_reaches_vertex():
    res = cascade(RHO1, [math.pi / 12, 0.01])
    assert len(res) == 2
    first, second = res
    assert first.limit[0] == pytest.approx(0.0, abs=1e-8) and 0 < first.limit[1] < 0.05
    assert second.stratum_dim == 0
    assert second.limit == pytest.approx([0.0, TOP], abs=1e-8)
    for seg in res.segments:
        assert np.all(np.diff(seg.rho) > 0)


def test_corner_collapse():
    # along the symmetry axis the flow runs straight into the vertex where three walls meet
    traj, ev = integrate(RHO1, [math.pi / 2 - 0.05, 0.0])
    assert isinstance(ev, CollapseEvent) and ev.corner
    assert ev.stratum_dim == 0
    assert ev.limit == pytest.approx([math.pi / 2, 0.0], abs=1e-6)
    assert ev.type_I_est is None and ev.type_I_theory is None
    with pytest.raises(UnsupportedCollapse):
        type_I_estimate(traj, ev)


def test_backward_trace():
    a, b = backward_trace(RHO1, [0.0, 0.3], [1e-3, 1e-4])
    for t in (a, b):
        assert np.linalg.norm(t.Y[-1] - W0) <= 1e-6
        assert np.all(np.diff(t.rho) <= 1e-12)
    assert np.linalg.norm(a.Y[-1] - b.Y[-1]) <= 1e-6


def test_backward_trace_rejects_vertex_and_interior():
    with pytest.raises(DomainError):
        backward_trace(RHO1, [0.0, TOP], [1e-3])
    with pytest.raises(DomainError):
        backward_trace(RHO1, W0, [1e-3])


def test_options_are_validated():
    with pytest.raises(TypeError):
        FlowOptions(nonsense=1)
    with pytest.raises((ValueError, IntegrationError)):
        integrate(RHO1, [0.3, 0.1], rtol=-1.0)
