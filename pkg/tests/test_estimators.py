import numpy as np
import pytest

from strides.errors import (
    ColumnMiss,
    InsufficientPrePeriods,
    NoMatches,
    NoSupport,
    RankDeficient,
    SeparationDetected,
)
from strides.estimators import (
    DiagnosticCode,
    DiagnosticResult,
    ToolCall,
    execute_tool,
    fit_logit,
    ols,
    project_simplex,
    run_did,
    run_iv,
    run_psm,
    run_rd,
    run_scm,
    solve_simplex_ls,
    two_stage_least_squares,
)
from strides.estimators import did as did_mod
from strides.estimators.rd import default_bandwidth
from strides.schema import ModelType
from strides.simulate import DgpTruth, MockDataset, SimParams, simulate

DID_MAP = {"dependent": "outcome", "treatment": "treatment_intensity", "time": "post_policy",
           "unit": "unit", "period": "year"}
IV_MAP = {"dependent": "outcome", "treatment": "treatment", "instrument": "instrument"}
RD_MAP = {"dependent": "outcome", "running": "running", "cutoff": 0.0}
SCM_MAP = {"dependent": "outcome", "unit": "unit", "time": "period", "treated_unit": 0, "post": "post_policy"}
PSM_MAP = {"dependent": "outcome", "treatment": "treatment", "covariates": ["covariate_1", "covariate_2", "covariate_3"]}


def table(family, **cols):
    return MockDataset(cols, seed=0, truth=DgpTruth(ModelType(family), 1.0, "Positive"))


# -- OLS core --------------------------------------------------------------


def test_ols_exact_line():
    x = np.arange(10.0)
    fit = ols(np.column_stack([np.ones(10), x]), 2 * x)
    assert np.allclose(fit.coefficients, [0, 2], atol=1e-12) and fit.r_squared == pytest.approx(1.0)


def test_ols_three_points_closed_form():
    # Normal equations by hand: X'X = [[3, 3], [3, 5]], X'y = [7, 10].
    fit = ols(np.column_stack([np.ones(3), [0.0, 1.0, 2.0]]), np.array([1.0, 2.0, 4.0]))
    assert fit.coefficients[1] == pytest.approx(1.5, abs=1e-12)
    assert fit.coefficients[0] == pytest.approx(5 / 6, abs=1e-12)
    assert fit.residual_dof == 1


def test_ols_rank_deficient():
    x = np.arange(8.0)
    with pytest.raises(RankDeficient):
        ols(np.column_stack([np.ones(8), x, x]), x)


def test_ols_pvalues_in_unit_interval():
    rng = np.random.default_rng(0)
    X = np.column_stack([np.ones(50), rng.normal(size=(50, 3))])
    fit = ols(X, rng.normal(size=50))
    assert np.all((fit.p_values >= 0) & (fit.p_values <= 1))
    assert np.allclose(fit.t_stats, fit.coefficients / fit.standard_errors)


def test_diagnostic_triggered_follows_comparison():
    assert DiagnosticResult(DiagnosticCode.WeakInstrument, 3.0, 10.0, "<").triggered
    assert not DiagnosticResult(DiagnosticCode.WeakInstrument, 12.0, 10.0, "<").triggered
    assert DiagnosticResult(DiagnosticCode.Multicollinearity, 12.0, 10.0, ">").triggered


# -- DiD -------------------------------------------------------------------


def _two_by_two(tau=2.0, n=5, noise=None):
    g = np.repeat([0, 0, 1, 1], n).astype(float)
    p = np.repeat([0, 1, 0, 1], n).astype(float)
    y = 1.0 + 0.5 * g + 0.3 * p + tau * g * p
    if noise is not None:
        y = y + noise
    unit = np.concatenate([np.arange(n), np.arange(n), np.arange(n, 2 * n), np.arange(n, 2 * n)]).astype(float)
    return table("DiD", outcome=y, treatment_intensity=g, post_policy=p, unit=unit, year=p)


def test_did_noiseless_two_by_two():
    res = run_did(_two_by_two(), ToolCall("DiD", DID_MAP))
    assert res.effect == pytest.approx(2.0, abs=1e-9)


def test_did_matches_cell_means():
    rng = np.random.default_rng(11)
    data = _two_by_two(n=6, noise=rng.normal(size=24))
    y, g, p = data["outcome"], data["treatment_intensity"], data["post_policy"]
    oracle = (y[(g == 1) & (p == 1)].mean() - y[(g == 1) & (p == 0)].mean()) - (
        y[(g == 0) & (p == 1)].mean() - y[(g == 0) & (p == 0)].mean())
    assert run_did(data, ToolCall("DiD", DID_MAP)).effect == pytest.approx(oracle, abs=1e-9)


def test_did_flags_diverging_pretrends():
    data = simulate("DiD", SimParams(pre_trend_gap=1.0, noise_sd=0.1), 1)
    res = run_did(data, ToolCall("DiD", DID_MAP))
    assert res.diagnostic(DiagnosticCode.ParallelTrendsFail).triggered


def test_parallel_trends_noiseless_equal_slopes():
    data = simulate("DiD", SimParams(noise_sd=0.0), 4)
    diag = did_mod.test_parallel_trends(data, ToolCall("DiD", DID_MAP))
    assert not diag.triggered


def test_parallel_trends_recomputed_with_ols_core():
    data = simulate("DiD", SimParams(pre_trend_gap=1.0, noise_sd=0.1), 1)
    pre = data["post_policy"] == 0
    t = data["year"][pre] - np.unique(data["year"][pre]).mean()
    g = data["treatment_intensity"][pre]
    X = np.column_stack([np.ones(pre.sum()), t, g, t * g])
    p = ols(X, data["outcome"][pre]).p_values[3]
    diag = did_mod.test_parallel_trends(data, ToolCall("DiD", DID_MAP))
    assert diag.statistic == pytest.approx(p) and p < 0.05


def test_parallel_trends_single_pre_period():
    with pytest.raises(InsufficientPrePeriods):
        did_mod.test_parallel_trends(_two_by_two(), ToolCall("DiD", DID_MAP))


# -- IV --------------------------------------------------------------------


def test_iv_noiseless():
    res = run_iv(simulate("IV", SimParams(noise_sd=0.0, true_effect=1.5), 2), ToolCall("IV", IV_MAP))
    assert res.effect == pytest.approx(1.5, abs=1e-8)


def test_iv_weak_instrument():
    res = run_iv(simulate("IV", SimParams(instrument_strength=0.0), 2), ToolCall("IV", IV_MAP))
    assert res.diagnostic(DiagnosticCode.WeakInstrument).triggered


def test_2sls_with_self_instrument_is_ols():
    rng = np.random.default_rng(5)
    x = rng.normal(size=100)
    y = 1 + 0.7 * x + rng.normal(size=100)
    beta_ols = ols(np.column_stack([np.ones(100), x]), y).coefficients[1]
    assert two_stage_least_squares(y, x, x)[0] == pytest.approx(beta_ols, abs=1e-9)


# -- RD --------------------------------------------------------------------


def test_rd_pure_jump():
    x = np.linspace(-1, 1, 401)
    res = run_rd(table("RD", running=x, outcome=1 + 3 * (x >= 0)), ToolCall("RD", RD_MAP))
    assert res.effect == pytest.approx(3.0, abs=1e-8)


def test_rd_symmetric_no_jump():
    x = np.linspace(-1, 1, 400)
    res = run_rd(table("RD", running=x, outcome=0.5 * x), ToolCall("RD", RD_MAP))
    assert abs(res.effect) < 1e-9


def test_rd_default_bandwidth_matches_side_fits():
    data = simulate("RD", SimParams(), 2)
    x, y = data["running"], data["outcome"]
    h = 0.5 * np.std(x)
    fits = []
    for mask in ((x >= -h) & (x < 0), (x >= 0) & (x <= h)):
        fits.append(ols(np.column_stack([np.ones(mask.sum()), x[mask]]), y[mask]).coefficients[0])
    res = run_rd(data, ToolCall("RD", RD_MAP))
    assert default_bandwidth(x) == pytest.approx(h)
    assert res.effect == pytest.approx(fits[1] - fits[0], abs=1e-12)


def test_rd_empty_side():
    x = np.linspace(0.1, 1, 50)
    with pytest.raises(NoSupport):
        run_rd(table("RD", running=x, outcome=x), ToolCall("RD", RD_MAP))


def test_rd_thin_support_reported():
    x = np.concatenate([np.linspace(-1, -0.01, 10), np.linspace(0, 1, 200)])
    res = run_rd(table("RD", running=x, outcome=x + (x >= 0)), ToolCall("RD", RD_MAP), bandwidth=1.0)
    assert res.diagnostic(DiagnosticCode.ThinSupport).triggered


# -- SCM -------------------------------------------------------------------


def test_project_simplex():
    w = project_simplex(np.array([0.5, 2.0, -1.0]))
    assert w.sum() == pytest.approx(1.0) and w.min() >= 0
    assert np.allclose(project_simplex(np.array([0.2, 0.3, 0.5])), [0.2, 0.3, 0.5])


def _scm_table(Y, T0):
    n, T = Y.shape
    return table("SCM", unit=np.repeat(np.arange(n), T).astype(float), period=np.tile(np.arange(T), n).astype(float),
                 post_policy=np.tile((np.arange(T) >= T0).astype(float), n), outcome=Y.ravel())


def test_scm_perfect_match_donor():
    rng = np.random.default_rng(3)
    donors = rng.normal(size=(6, 10)).cumsum(axis=1)
    Y = np.vstack([donors[2], donors])
    res = run_scm(_scm_table(Y, 7), ToolCall("SCM", SCM_MAP))
    weights = {int(float(k)): w for k, w in res.details["weights"].items()}
    assert weights[3] >= 0.99


def test_scm_convex_combination_effect():
    rng = np.random.default_rng(8)
    donors = rng.normal(size=(5, 12)).cumsum(axis=1)
    treated = 0.5 * (donors[0] + donors[1])
    treated[8:] += 1.0
    res = run_scm(_scm_table(np.vstack([treated, donors]), 8), ToolCall("SCM", SCM_MAP))
    assert res.effect == pytest.approx(1.0, abs=1e-6)
    assert res.p_value is not None and 0 < res.p_value <= 1


def test_scm_solver_trace_monotone():
    data = simulate("SCM", SimParams(), 9)
    Y = data["outcome"].reshape(21, 12)
    fit = solve_simplex_ls(Y[1:, :8].T, Y[0, :8])
    assert fit.converged and np.all(np.diff(fit.trace) <= 0)
    assert abs(fit.weights.sum() - 1) < 1e-6 and fit.weights.min() >= -1e-9


# -- PSM -------------------------------------------------------------------


def test_psm_twins_exact():
    res = run_psm(simulate("PSM", SimParams(noise_sd=0.0, twins=True), 1), ToolCall("PSM", PSM_MAP))
    assert res.effect == pytest.approx(2.0, abs=1e-12)


def test_psm_independent_covariates_within_two_se():
    hits = 0
    for s in range(1, 51):
        res = run_psm(simulate("PSM", SimParams(propensity_strength=0.0), s), ToolCall("PSM", PSM_MAP))
        hits += abs(res.effect - 2.0) <= 2 * res.standard_error
    assert hits >= 47


def test_psm_separation():
    x = np.linspace(-1, 1, 100)
    t = (x > 0).astype(float)
    data = table("PSM", covariate_1=x, covariate_2=np.cos(x * 7), covariate_3=np.sin(x * 5), treatment=t, outcome=x)
    with pytest.raises(SeparationDetected) as err:
        run_psm(data, ToolCall("PSM", PSM_MAP))
    assert err.value.diagnostic.code is DiagnosticCode.NonConvergence


def test_psm_no_matches_with_tiny_caliper():
    data = simulate("PSM", SimParams(), 1)
    with pytest.raises(NoMatches):
        run_psm(data, ToolCall("PSM", PSM_MAP), caliper=1e-15)


def test_logit_recovers_coefficients():
    rng = np.random.default_rng(1)
    X = np.column_stack([np.ones(4000), rng.normal(size=4000)])
    t = (rng.random(4000) < 1 / (1 + np.exp(-(0.3 + 0.8 * X[:, 1])))).astype(float)
    fit = fit_logit(X, t)
    assert fit.converged and np.allclose(fit.coefficients, [0.3, 0.8], atol=0.15)


# -- dispatch --------------------------------------------------------------


def test_execute_ok_and_mapping_failure():
    data = simulate("DiD", SimParams(), 1)
    ok = execute_tool(ToolCall("DiD", DID_MAP), data)
    assert ok.ok and ok.to_dict()["ok"]
    miss = execute_tool(ToolCall("DiD", DID_MAP | {"dependent": "gdp2"}), data)
    assert not miss.ok and miss.kind == "mapping" and miss.error_type == ColumnMiss.__name__


def test_execute_statistical_failure():
    x = np.arange(40.0)
    data = table("IV", outcome=x, treatment=x, instrument=np.zeros(40))
    res = execute_tool(ToolCall("IV", IV_MAP), data)
    assert not res.ok and res.kind == "statistical"


def test_execute_separation_carries_finding():
    x = np.linspace(-1, 1, 100)
    data = table("PSM", covariate_1=x, covariate_2=np.cos(7 * x), covariate_3=np.sin(5 * x),
                 treatment=(x > 0).astype(float), outcome=x)
    res = execute_tool(ToolCall("PSM", PSM_MAP), data)
    assert res.kind == "statistical" and res.findings[0].code is DiagnosticCode.NonConvergence


@pytest.mark.parametrize("family,column_map", [("DiD", DID_MAP), ("IV", IV_MAP), ("RD", RD_MAP),
                                               ("SCM", SCM_MAP), ("PSM", PSM_MAP)])
def test_execute_is_total(family, column_map):
    data = simulate(family, SimParams(), 3)
    for cm in (column_map, {k: "nope" for k in column_map}, {}):
        res = execute_tool(ToolCall(family, cm), data)
        assert res.ok or res.kind in ("mapping", "statistical", "internal")
    est = execute_tool(ToolCall(family, column_map), data).estimate
    assert est.p_value is None or 0 <= est.p_value <= 1
    if est.standard_error:
        assert abs(est.t_stat - est.effect / est.standard_error) <= 1e-9
