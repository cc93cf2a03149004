import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from strides.errors import InvalidParams
from strides.schema import ModelType
from strides.simulate import MAX_ROWS, MIN_ROWS, DgpTruth, SimParams, describe_schema, simulate


@pytest.mark.parametrize("family", list(ModelType))
def test_same_inputs_same_csv(family):
    a = simulate(family, SimParams(), 17)
    b = simulate(family, SimParams(), 17)
    assert a.to_csv() == b.to_csv() and a.truth_record() == b.truth_record()
    assert simulate(family, SimParams(), 18).to_csv() != a.to_csv()


@pytest.mark.parametrize("family", list(ModelType))
def test_default_sizes(family):
    assert MIN_ROWS <= simulate(family, SimParams(), 0).n_rows <= MAX_ROWS


def test_scm_too_few_donors():
    with pytest.raises(InvalidParams):
        simulate("SCM", SimParams(n_donors=2), 0)


def test_unknown_parameter_is_invalid():
    with pytest.raises(InvalidParams):
        simulate("DiD", {"n_rowz": 10}, 0)


def test_negative_noise_rejected():
    with pytest.raises(InvalidParams):
        simulate("IV", SimParams(noise_sd=-1.0), 0)


def test_direction_contradiction_rejected():
    with pytest.raises(InvalidParams):
        simulate("RD", SimParams(true_effect=1.0, direction="Negative"), 0)
    with pytest.raises(ValueError):
        DgpTruth(ModelType.RD, 1.0, "Negative")


def test_schema_kinds():
    did = describe_schema(simulate("DiD", SimParams(), 1))
    assert did.kind("post_policy") == "binary" and did.kind("outcome") == "numeric"
    psm = describe_schema(simulate("PSM", SimParams(), 1))
    assert all(psm.kind(f"covariate_{i}") == "numeric" for i in (1, 2, 3))
    assert psm.kind("treatment") == "binary"


def test_did_noiseless_double_difference():
    d = simulate("DiD", SimParams(noise_sd=0.0), 7)
    y, g, p = d["outcome"], d["treatment_intensity"], d["post_policy"]
    dd = (y[(g == 1) & (p == 1)].mean() - y[(g == 1) & (p == 0)].mean()) - (
        y[(g == 0) & (p == 1)].mean() - y[(g == 0) & (p == 0)].mean())
    assert dd == pytest.approx(2.0, abs=1e-9)


@pytest.mark.parametrize("family", list(ModelType))
def test_negative_effect_sets_direction(family):
    data = simulate(family, SimParams(true_effect=-1.0), 3)
    assert data.truth.direction == "Negative" and data.truth.true_effect == -1.0


def test_rd_has_both_sides():
    x = simulate("RD", SimParams(), 5)["running"]
    assert (x < 0).any() and (x >= 0).any()


def test_columns_are_read_only():
    data = simulate("IV", SimParams(), 0)
    with pytest.raises(ValueError):
        data["outcome"][0] = 1.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32), family=st.sampled_from(list(ModelType)))
def test_any_seed_gives_finite_table(seed, family):
    data = simulate(family, SimParams(), seed)
    for name in data.names:
        assert np.all(np.isfinite(data[name].astype(float)))
