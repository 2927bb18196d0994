import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chamberflow import DomainError, chamber, get_spec, minimal_point
from chamberflow.rootsys import default_specs
from chamberflow.verify import (chamber_audit, consistency_sweep, cot_series_check, evaluate, expand_terms,
                                fd_gradient_check, fit_inverse_envelope, generated_terms, load_allowlist,
                                load_transcriptions, table3_crosscheck, term_descriptor)

SQ3 = math.sqrt(3.0)
RHO1 = get_spec("rho1-SU3-SO3")
TRANS = load_transcriptions()
ALLOW = load_allowlist()


def test_fd_check_rho1():
    assert fd_gradient_check(RHO1, [math.pi / 4, 0.1]) <= 1e-5


def test_fd_check_at_minimum_is_tiny():
    assert fd_gradient_check(RHO1, minimal_point(RHO1)) <= 1e-8


def test_fd_check_step_sweep():
    Y = [math.pi / 4, 0.1]
    errs = [fd_gradient_check(RHO1, Y, h) for h in (1e-2, 1e-3, 1e-4)]
    assert errs[0] > errs[1] > errs[2]
    # very small steps hit the rounding floor instead of improving further
    assert fd_gradient_check(RHO1, Y, 1e-9) > errs[2]


def test_fd_check_margin_guard():
    with pytest.raises(DomainError):
        fd_gradient_check(RHO1, [1e-6, 0.0], h=1e-6)


@pytest.mark.parametrize("J", [0, 1, 7, 1000])
def test_cot_check_at_pi(J):
    r = cot_series_check(math.pi, J)
    assert r["partial"] == 0.0 and r["exact"] == 0.0 and r["error"] == 0.0


def test_cot_check_half_pi():
    r = cot_series_check(math.pi / 2, 0)
    assert r["partial"] == pytest.approx(4 / math.pi)
    assert r["exact"] == pytest.approx(1.0)


@pytest.mark.parametrize("theta", [0.3, math.pi / 2, 2.7])
def test_cot_check_inverse_envelope(theta):
    Js = [100, 1000, 10_000]
    errs = [cot_series_check(theta, J)["error"] for J in Js]
    assert errs[2] < errs[0]
    C = fit_inverse_envelope(Js, errs)
    assert all(e <= C / J * (1 + 1e-12) for e, J in zip(errs, Js))
    assert errs[0] * 100 == pytest.approx(errs[2] * 10_000, rel=0.05)


def test_cot_check_poles():
    with pytest.raises(DomainError):
        cot_series_check(0.0, 5)
    with pytest.raises(DomainError):
        cot_series_check(2 * math.pi, 5)


def test_consistency_sweep():
    specs = default_specs()
    sweep = consistency_sweep(specs, n_points=50)
    assert set(sweep) == {s.name for s in specs}
    assert sweep[RHO1.name] <= 1e-12
    assert max(sweep.values()) <= 1e-11


@given(st.floats(0.05, 0.7), st.floats(-0.3, 0.3))
def test_evaluate_matches_python(x1, x2):
    text = "tan(x1+sqrt(3)*x2) - 2*cot(2*x1) + x2^2/4"
    want = math.tan(x1 + SQ3 * x2) - 2 / math.tan(2 * x1) + x2 ** 2 / 4
    assert evaluate(text, (x1, x2)) == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_evaluate_rejects_unknown():
    with pytest.raises(ValueError):
        evaluate("sin(x1)", (0.1, 0.2))
    with pytest.raises(ValueError):
        evaluate("y + 1", (0.1, 0.2))


def test_expand_terms_canonical_sign():
    a = expand_terms("cot(x2-x1)")
    b = expand_terms("-cot(x1-x2)")
    assert a == b
    assert expand_terms("2*(q-1)*tan(x1)", {"q": 4}) == {("tan", (1.0, 0.0)): 6.0}


def test_generated_terms_rho1():
    gen = generated_terms(RHO1)
    assert gen[0] == expand_terms(TRANS["rho1-SU3-SO3"]["X1"])
    assert gen[1] == expand_terms(TRANS["rho1-SU3-SO3"]["X2"])


def test_term_descriptor():
    assert term_descriptor(0, ("cot", (1.0, -1.0))) == "X1: cot(x1-x2)"


def test_rho1_strict_match():
    rep = table3_crosscheck(RHO1, TRANS["rho1-SU3-SO3"], 20, ALLOW)
    assert rep.verdict == "match" and rep.chamber_verdict == "match"
    assert rep.max_deviation <= 1e-12
    assert rep.chamber_disagreement == 0.0


def test_su_q2_row_is_known_discrepancy():
    spec = get_spec("SOq2-SUq2-SU2Uq", q=4)
    rep = table3_crosscheck(spec, TRANS["SOq2-SUq2-SU2Uq"], 20, ALLOW)
    assert rep.verdict == "known-discrepancy"
    assert [d[0] for d in rep.term_diffs] == ["X1: cot(x1-x2)"]
    # printed coefficient has the opposite sign
    _, printed, generated = rep.term_diffs[0]
    assert printed == -generated


def test_removing_allowlist_entry_reports_mismatch():
    spec = get_spec("SOq2-SUq2-SU2Uq", q=4)
    rep = table3_crosscheck(spec, TRANS["SOq2-SUq2-SU2Uq"], 20, {})
    assert rep.verdict == "mismatch"
    assert rep.unexplained == ["X1: cot(x1-x2)"]


def test_zero_points_decides_from_terms():
    spec = get_spec("SOq2-SUq2-SU2Uq", q=4)
    rep = table3_crosscheck(spec, TRANS["SOq2-SUq2-SU2Uq"], 0, ALLOW)
    assert rep.points == [] and rep.deviations == []
    assert rep.verdict == "known-discrepancy"
    rep = table3_crosscheck(RHO1, TRANS["rho1-SU3-SO3"], 0, {})
    assert rep.verdict == "match"


def test_chamber_audit():
    assert chamber_audit(RHO1, TRANS["rho1-SU3-SO3"]["chamber"]) == 0.0
    assert chamber_audit(RHO1, ["x1>0", "x2>0"]) > 0.0


def test_every_transcription_is_classified():
    specs = {s.name: s for s in default_specs()}
    rows_seen = set()
    for tid, entry in TRANS.items():
        rep = table3_crosscheck(specs[entry["row"]], entry, 5, ALLOW)
        assert rep.verdict in ("match", "known-discrepancy"), (tid, rep.unexplained)
        assert rep.chamber_verdict in ("match", "known-discrepancy"), tid
        rows_seen.add(entry["row"])
    assert rows_seen == set(specs)


def test_custom_allowlist_file(tmp_path):
    path = tmp_path / "allow.json"
    path.write_text(json.dumps({"format": "chamberflow-allowlist", "version": 1,
                                "entries": {"x": [{"term": "X1: tan(x1)", "note": "n"}]}}))
    assert load_allowlist(path) == {"x": {"X1: tan(x1)": "n"}}


def test_parametrized_rows_use_their_parameters():
    spec = get_spec("SOj1SOqj1-SOq2-SO2SOq", q=6, j=3)
    entry = TRANS["SOj1SOqj1-SOq2-SO2SOq"]
    rep = table3_crosscheck(spec, entry, 10, ALLOW)
    assert rep.verdict == "match"
    ch = chamber(spec)
    assert np.all(ch.margins(ch.reference_point) > 0)
