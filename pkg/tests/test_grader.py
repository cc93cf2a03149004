import json
from types import SimpleNamespace

import pytest
from hypothesis import given, settings, strategies as st

import replies as R
from conftest import make_instance
from strides.errors import EmptyInput
from strides.grader import (
    FAMILIES,
    ScoreBreakdown,
    aggregate,
    control_coverage,
    control_score,
    format_improve,
    grade,
    improve_pct,
    match_strength,
    render_json,
    render_text,
)
from strides.schema import ModelType, design_from_dict, instance_from_dict

GT_CONTROLS = [
    "GOV: government intervention",
    "FIN: financial development",
    "URB: urbanization level",
    "GDP: gross domestic product per capita",
    "CON: consumption level",
    "INDUS: industrial structure",
]


def gt_design(**overrides):
    return make_instance(**overrides).ground_truth


def pred_design(**changes):
    base = make_instance().ground_truth.to_dict()
    base.update(changes)
    return design_from_dict(base, strict=False)


@pytest.mark.parametrize("label", ["DiD", "Difference-in-Differences", "difference in differences",
                                   "Difference-in-Differences (DiD)"])
def test_model_type_aliases_score_identically(label):
    gt = gt_design()
    s = grade(pred_design(**{"Model type": label}), gt)
    assert s.model_type_score == 10
    assert s == grade(pred_design(), gt)


def test_identity_scores_full_marks():
    gt = gt_design(**{"Reasons for choosing this model": "Staggered rollout across regions."})
    s = grade(gt, gt)
    got = (s.model_type_score, s.core_iv_score, s.group_score, s.control_var_score, s.dependent_var_score,
           s.reasoning_score, s.explanation_score)
    assert got == (10, 10, 10, 5, 5, 2, 3) and s.total == 45 and s.normalized == 1.0


def test_human_capital_identity(human_capital_case):
    gt = instance_from_dict(human_capital_case["ground_truth"]).ground_truth
    assert grade(gt, gt).total == 45


def test_control_thresholds():
    four = ["government intervention", "financial development", "urbanization", "GDP per capita"]
    two = ["government intervention", "financial development"]
    assert control_coverage(GT_CONTROLS, four) == pytest.approx(4 / 6)
    assert control_score(control_coverage(GT_CONTROLS, four)) == 5
    assert control_score(control_coverage(GT_CONTROLS, two)) == 2
    assert control_score(control_coverage(GT_CONTROLS, ["rainfall"])) == 0
    assert control_score(0.5) == 2


def test_abbreviations_and_phrase_aliases_match():
    assert match_strength("GDP per capita", "per capita gross domestic product") >= 0.8
    assert control_coverage(GT_CONTROLS, ["INDUS", "CON", "GOV"]) == pytest.approx(0.5)


@settings(max_examples=40, deadline=None)
@given(base=st.sets(st.sampled_from(range(6))), extra=st.sampled_from(range(6)))
def test_adding_matched_control_never_lowers_score(base, extra):
    names = [c.split(": ")[1] for c in GT_CONTROLS]
    before = control_score(control_coverage(GT_CONTROLS, [names[i] for i in base]))
    after = control_score(control_coverage(GT_CONTROLS, [names[i] for i in base | {extra}]))
    assert after >= before


def test_wrong_model_gates_reasoning():
    gt = gt_design()
    s = grade(pred_design(**{"Model type": "Instrumental Variables",
                             "Reasons for choosing this model": "A long and eloquent justification."}), gt)
    assert s.model_type_score == 0 and s.reasoning_score == 0
    with pytest.raises(ValueError):
        ScoreBreakdown(model_type_score=0, reasoning_score=2)
    assert ScoreBreakdown.build(model_type_score=0, reasoning_score=2).reasoning_score == 0


def test_off_menu_prediction_scores_zero_model_type():
    s = grade(pred_design(**{"Model type": "Fixed Effects"}), gt_design())
    assert s.model_type_score == 0


def test_opposite_direction_loses_explanation():
    gt = gt_design()
    s = grade(pred_design(Explanation="The policy reduces the outcome."), gt)
    assert s.explanation_score == 0


def test_missing_prediction_scores_zero():
    s = grade(None, gt_design())
    assert s.total == 0 and "failed" in s.comments


def judge_reply(**scores):
    breakdown = {"model_type_score": 10, "core_iv_score": 5, "group_score": 5, "control_var_score": 2,
                 "dependent_var_score": 5, "reasoning_score": 2, "explanation_score": 3}
    breakdown.update(scores)
    return json.dumps({"breakdown": breakdown, "comments": "judged"})


def test_judge_scores_used():
    gt = gt_design()
    s = grade(pred_design(), gt, "judge", backend=R.scripted({"judge": [judge_reply()]}))
    assert s.mode == "judge" and not s.fallback
    assert (s.core_iv_score, s.group_score, s.control_var_score) == (5, 5, 2)


def test_judge_cannot_override_model_type_or_gate():
    gt = gt_design()
    pred = pred_design(**{"Model type": "Regression Discontinuity"})
    s = grade(pred, gt, "judge", backend=R.scripted({"judge": [judge_reply(model_type_score=10)]}))
    assert s.model_type_score == 0 and s.reasoning_score == 0 and not s.fallback


def test_judge_parse_failure_falls_back():
    gt = gt_design()
    s = grade(pred_design(), gt, "judge", backend=R.scripted({"judge": ["no idea", '{"breakdown": {"x": 1}}']}))
    assert s.fallback and s.mode == "judge"
    assert s.total == grade(pred_design(), gt).total


def test_judge_out_of_range_falls_back():
    s = grade(pred_design(), gt_design(), "judge", backend=R.scripted({"judge": [judge_reply(core_iv_score=7)]}))
    assert s.fallback


def test_judge_requires_backend():
    with pytest.raises(ValueError):
        grade(pred_design(), gt_design(), "judge")
    with pytest.raises(ValueError):
        grade(pred_design(), gt_design(), "fuzzy")


# -- aggregation -----------------------------------------------------------


def record(mode, score, truth=ModelType.DiD, predicted=None, domain="Environment", status="ok"):
    predicted = truth if predicted is None else predicted
    run = SimpleNamespace(mode=mode, status=status, final_design=SimpleNamespace(model_type=predicted))
    inst = SimpleNamespace(ground_truth=SimpleNamespace(model_type=truth),
                           metadata=SimpleNamespace(policy_type=domain))
    return run, score, inst


def test_mean_of_two_runs():
    # Only the mean arithmetic matters here, so the scores are stand-ins.
    zero = {name: 0 for name in ScoreBreakdown().to_dict() if name.endswith("_score")}
    runs = [record("strides", SimpleNamespace(normalized=v, **zero)) for v in (0.6, 0.7)]
    assert aggregate(runs).rows["strides"]["final_score"] == pytest.approx(0.65)


def test_single_record_reproduces_scores():
    s = ScoreBreakdown.build(model_type_score=10, core_iv_score=5, group_score=10, control_var_score=2,
                             dependent_var_score=5, reasoning_score=2, explanation_score=0)
    row = aggregate([record("direct", s)]).rows["direct"]
    assert row["final_score"] == s.normalized
    assert row["core_iv"] == 0.5 and row["controls"] == 0.4 and row["explanation"] == 0.0
    assert all(0 <= v <= 1 for v in row.values())


def test_diagonal_confusion_with_split_counts():
    counts = {ModelType.DiD: 42, ModelType.IV: 15, ModelType.RD: 7, ModelType.SCM: 7, ModelType.PSM: 3}
    records = [record("strides", ScoreBreakdown(), truth=f) for f, n in counts.items() for _ in range(n)]
    report = aggregate(records)
    m = report.confusion["strides"]
    for i, f in enumerate(FAMILIES):
        assert m[i][i] == counts[f] and sum(m[i]) == counts[f]
    assert sum(map(sum, m)) == 74
    assert all(v == 1.0 for v in report.per_method["strides"].values())


def test_unclassified_predictions_counted_separately():
    run, score, inst = record("direct", ScoreBreakdown())
    run.final_design = SimpleNamespace(model_type=None)
    report = aggregate([(run, score, inst)])
    assert report.unclassified["direct"][0] == 1 and sum(map(sum, report.confusion["direct"])) == 0


def test_improve_and_rendering():
    hi = ScoreBreakdown.build(model_type_score=10, core_iv_score=10, group_score=10, control_var_score=5,
                              dependent_var_score=5, reasoning_score=2, explanation_score=3)
    lo = ScoreBreakdown.build(core_iv_score=10, group_score=10, dependent_var_score=5)
    report = aggregate([record("direct", lo), record("strides", hi)])
    expected = (1.0 - 25 / 45) / (25 / 45) * 100
    assert report.improve["strides_vs_direct"] == pytest.approx(expected)
    text = render_text(report)
    assert f"Improve (strides vs direct): {format_improve(expected)}" in text
    assert render_json(report) == render_json(aggregate([record("direct", lo), record("strides", hi)]))
    assert format_improve(improve_pct(0.578, 0.665)) == "+15.1%"


def test_failed_runs_counted():
    report = aggregate([record("strides", ScoreBreakdown(), status="failed"), record("strides", ScoreBreakdown())])
    assert report.failed_runs["strides"] == 1


def test_empty_input():
    with pytest.raises(EmptyInput):
        aggregate([])
