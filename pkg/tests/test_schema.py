import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from strides.errors import MalformedRecord, MissingField, UnknownModelType
from strides.schema import (
    CausalDesign,
    Group,
    Hypothesis,
    HypothesisSet,
    ModelType,
    normalize_model_type,
    parse_design,
    parse_instance,
    serialize_design,
    serialize_instance,
    validate_design,
)

SAMPLE = __import__("pathlib").Path(__import__("strides").__file__).parent / "data" / "sample_instances.jsonl"


def _design(**kw):
    base = dict(model_type=ModelType.DiD, core_independent_variable="pilot status", dependent_variable="patents",
                group=Group("pilot cities", "other cities"), control_variables=("GDP", "urbanization"))
    base.update(kw)
    return CausalDesign(**base)


@pytest.mark.parametrize("label,expected", [
    ("Difference-in-Differences", ModelType.DiD),
    ("did", ModelType.DiD),
    ("Difference-in-Differences (DiD)", ModelType.DiD),
    ("Two-Stage Least Squares", ModelType.IV),
    ("2SLS", ModelType.IV),
    ("Instrumental Variables (IV)", ModelType.IV),
    ("Regression Discontinuity", ModelType.RD),
    ("RDD", ModelType.RD),
    ("Synthetic Control", ModelType.SCM),
    ("Propensity Score Matching", ModelType.PSM),
])
def test_normalize_aliases(label, expected):
    assert normalize_model_type(label) is expected


@pytest.mark.parametrize("label", ["Causal Forest / Double Machine Learning in a panel setting", "OLS", ""])
def test_normalize_rejects_unknown(label):
    with pytest.raises(UnknownModelType):
        normalize_model_type(label)


@pytest.mark.parametrize("family", list(ModelType))
def test_normalize_idempotent(family):
    assert normalize_model_type(family.label) is family
    assert normalize_model_type(family.value) is family


def test_parse_instance_iv_record(human_capital_case):
    inst = parse_instance(json.dumps(human_capital_case["ground_truth"]))
    assert inst.ground_truth.model_type is ModelType.IV
    assert inst.metadata.policy_name.startswith("Innovative Human Capital")
    assert len(inst.ground_truth.control_variables) == 6


def test_parse_instance_missing_aim(human_capital_case):
    raw = dict(human_capital_case["ground_truth"])
    del raw["Aim"]
    with pytest.raises(MissingField) as err:
        parse_instance(json.dumps(raw))
    assert "Aim" in str(err.value)


def test_parse_instance_malformed():
    with pytest.raises(MalformedRecord):
        parse_instance("{not json")
    with pytest.raises(MalformedRecord):
        parse_instance("[1, 2]")


def test_sample_corpus_round_trips():
    for line in SAMPLE.read_text(encoding="utf-8").splitlines():
        inst = parse_instance(line)
        again = parse_instance(serialize_instance(inst))
        assert again == inst
        assert serialize_instance(again) == serialize_instance(inst)


def test_unknown_fields_kept_as_extras(human_capital_case):
    raw = dict(human_capital_case["ground_truth"], **{"Model parameter": {"IV_2SLS": "0.247"}})
    inst = parse_instance(json.dumps(raw))
    assert inst.extras["Model parameter"] == {"IV_2SLS": "0.247"}
    assert parse_instance(serialize_instance(inst)) == inst


def test_validate_clean_design():
    assert not validate_design(_design())


def test_validate_iv_requires_instrument():
    assert "iv-required" in validate_design(_design(model_type=ModelType.IV))


def test_validate_duplicate_controls():
    assert "duplicate-control" in validate_design(_design(control_variables=("GDP", " gdp ")))


def test_validate_empty_groups():
    report = validate_design(_design(group=Group("", " ")))
    assert "empty-treatment-group" in report and "empty-control-group" in report


def test_valid_design_survives_serialization():
    d = _design()
    back = parse_design(serialize_design(d))
    assert back == d and not validate_design(back)


def test_hypothesis_direction_and_ids():
    h = Hypothesis("H1", "x raises y", "cost channel", "Positive")
    assert h.sign == 1
    with pytest.raises(ValueError):
        HypothesisSet("theory", (h, h))


_text = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=30).filter(str.strip)


@given(treatment=_text, control=_text, dep=_text, core=_text)
def test_design_round_trip_property(treatment, control, dep, core):
    d = _design(group=Group(treatment, control), dependent_variable=dep, core_independent_variable=core,
                control_variables=())
    assert parse_design(serialize_design(d)) .to_dict() == d.to_dict()
