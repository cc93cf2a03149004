"""Two-way fixed-effects difference-in-differences and its pre-trend test."""

from __future__ import annotations

import numpy as np

from ..errors import InsufficientPrePeriods, InvalidParams
from ..schema import ModelType
from .core import ALPHA, DiagnosticCode, DiagnosticResult, EstimateResult, effect_inference, indicator_block, ols
from .tools import ToolCall, check_call, numeric


def _periods(data, call: ToolCall) -> np.ndarray:
    name = call.column_map.get("period")
    return numeric(data, str(name)) if name else numeric(data, call.column("time"))


def test_parallel_trends(data, call: ToolCall) -> DiagnosticResult:
    """Pre-period regression of the outcome on time, group, and time x group.

    The statistic is the p-value of the interaction; the diagnostic fires
    below 0.05.
    """
    y = numeric(data, call.column("dependent"))
    group = numeric(data, call.column("treatment"))
    post = numeric(data, call.column("time"))
    period = _periods(data, call)
    pre = post == 0
    pre_periods = np.unique(period[pre])
    if len(pre_periods) < 2:
        raise InsufficientPrePeriods(f"need at least 2 pre-periods, found {len(pre_periods)}")
    t = period[pre] - pre_periods.mean()
    g = group[pre]
    X = np.column_stack([np.ones(pre.sum()), t, g, t * g])
    fit = ols(X, y[pre])
    return DiagnosticResult(
        DiagnosticCode.ParallelTrendsFail,
        statistic=float(fit.p_values[3]),
        threshold=ALPHA,
        comparison="<",
        payload={"slope_gap": float(fit.coefficients[3]), "n_pre_periods": int(len(pre_periods))},
    )


# pytest would otherwise try to collect the function above when imported into a test module.
test_parallel_trends.__test__ = False


def run_did(data, call: ToolCall) -> EstimateResult:
    check_call(call, data.names if hasattr(data, "names") else list(data))
    y = numeric(data, call.column("dependent"))
    group = numeric(data, call.column("treatment"))
    post = numeric(data, call.column("time"))
    unit = numeric(data, call.column("unit"))
    period = _periods(data, call)

    treated_units = np.unique(unit[group == 1])
    control_units = np.unique(unit[group == 0])
    if len(treated_units) < 2 or len(control_units) < 2:
        raise InvalidParams("DiD needs at least 2 units per arm")
    if len(np.unique(period)) < 2:
        raise InvalidParams("DiD needs at least 2 periods")

    blocks = [np.ones(len(y)), group * post, indicator_block(unit), indicator_block(period)]
    covs = call.columns("covariates")
    if covs:
        blocks.append(np.column_stack([numeric(data, c) for c in covs]))
    X = np.column_stack(blocks)
    fit = ols(X, y)
    effect = float(fit.coefficients[1])
    se, t, p = effect_inference(effect, float(fit.standard_errors[1]), fit.residual_dof)

    diagnostics = []
    try:
        diagnostics.append(test_parallel_trends(data, call))
    except InsufficientPrePeriods:
        pass
    return EstimateResult(
        tool=ModelType.DiD,
        effect=effect,
        standard_error=se,
        t_stat=t,
        p_value=p,
        n_used=len(y),
        diagnostics=tuple(diagnostics),
        condition_number=fit.condition_number,
        details={"r_squared": fit.r_squared, "residual_dof": fit.residual_dof},
    )
