import numpy as np
import pytest

from graspgauge.aggregate import (OutcomeTally, default_bin_edges, s_est,
                                  s_gen, success_curve, tally)
from graspgauge.errors import ParameterError, UndefinedRateError
from graspgauge.metrics import PoseErrorVector
from graspgauge.oracle import (GraspOutcome, OutcomeCategory, TrialRecord)
from graspgauge.se3 import RigidTransform

I = RigidTransform.identity()


def record(outcome: str, translation: float = 0.0) -> TrialRecord:
    return TrialRecord(
        object_id="obj", gripper_name="grip", grasp_index=0,
        pose_gt=I, pose_est=I,
        errors=PoseErrorVector(add=translation, adi=translation,
                               mssd=translation, mspd=0.0,
                               translation=translation, rotation=0.0),
        outcome=GraspOutcome(OutcomeCategory(outcome)), condition="gt-gt")


def test_s_gen_arithmetic():
    assert s_gen(0, 5000) == 0.0
    assert s_gen(5000, 5000) == 100.0
    assert s_gen(1234, 5000) == pytest.approx(24.68)


def test_s_gen_errors():
    with pytest.raises(UndefinedRateError):
        s_gen(0, 0)
    with pytest.raises(ParameterError):
        s_gen(6, 5)


def test_s_est_arithmetic():
    assert s_est([GraspOutcome(OutcomeCategory.SUCCESS)] * 10) == 100.0
    outcomes = [GraspOutcome(OutcomeCategory.SUCCESS)] * 899 \
        + [GraspOutcome(OutcomeCategory.SLIPPED)] * 101
    assert s_est(outcomes) == pytest.approx(89.9)


def test_s_est_empty_is_undefined():
    with pytest.raises(UndefinedRateError):
        s_est([])


def test_s_est_scale_free():
    outcomes = [GraspOutcome(OutcomeCategory.SUCCESS),
                GraspOutcome(OutcomeCategory.COLLISION)]
    assert s_est(outcomes) == s_est(outcomes * 7)


def test_tally_counts():
    assert tally([]).total == 0
    records = [record("success")] * 3 + [record("collision")]
    t = tally(records)
    assert (t.success, t.slipped, t.no_contact, t.collision, t.total) \
        == (3, 0, 0, 1, 4)


def test_tally_permutation_invariant():
    records = [record("success"), record("slipped"), record("no_contact"),
               record("collision"), record("success")]
    a = tally(records)
    b = tally(list(reversed(records)))
    assert a == b


def test_tally_consistent_with_s_est():
    records = [record("success")] * 7 + [record("slipped")] * 3
    t = tally(records)
    assert 100.0 * t.success / t.total == s_est(records)


def test_success_curve_step_function():
    # success iff translation < 10
    records = [record("success", t) for t in (1, 3, 5, 8)] \
        + [record("no_contact", t) for t in (12, 15, 19)]
    curve = success_curve(records, "translation", [0.0, 10.0, 20.0])
    assert curve.rates == [100.0, 0.0]
    assert curve.counts == [4, 3]


def test_success_curve_single_bin_equals_s_est():
    records = [record("success", 1.0), record("slipped", 2.0),
               record("success", 3.0)]
    curve = success_curve(records, "translation", [0.0, 10.0])
    assert curve.rates[0] == pytest.approx(s_est(records))
    assert curve.counts[0] == 3


def test_success_curve_matches_recount():
    rng = np.random.default_rng(0)
    records = [record("success" if rng.random() < 0.5 else "slipped",
                      float(rng.uniform(0, 30))) for _ in range(200)]
    edges = [0.0, 5.0, 10.0, 20.0, 30.0]
    curve = success_curve(records, "translation", edges)
    for i in range(len(edges) - 1):
        lo, hi = edges[i], edges[i + 1]
        if i == len(edges) - 2:
            sel = [r for r in records
                   if lo <= r.errors.translation <= hi]
        else:
            sel = [r for r in records
                   if lo <= r.errors.translation < hi]
        assert curve.counts[i] == len(sel)
        if sel:
            want = 100.0 * sum(
                r.outcome.category == OutcomeCategory.SUCCESS
                for r in sel) / len(sel)
            assert curve.rates[i] == pytest.approx(want)
        else:
            assert curve.rates[i] is None


def test_empty_bins_report_none():
    records = [record("success", 1.0)]
    curve = success_curve(records, "translation", [0.0, 2.0, 4.0])
    assert curve.rates == [100.0, None]
    assert curve.counts == [1, 0]


def test_unsorted_edges_rejected():
    with pytest.raises(ParameterError):
        success_curve([record("success")], "translation", [0.0, 5.0, 5.0])


def test_default_bin_edges():
    edges = default_bin_edges(np.linspace(0, 100, 500))
    assert len(edges) == 11
    assert edges[0] == 0.0
    assert all(b > a for a, b in zip(edges, edges[1:]))


def test_outcome_tally_fractions():
    t = OutcomeTally(success=2, slipped=1, no_contact=1, collision=0)
    f = t.fractions()
    assert f["success"] == 0.5 and sum(f.values()) == pytest.approx(1.0)
