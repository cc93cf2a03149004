"""Just-identified two-stage least squares with a first-stage strength check."""

from __future__ import annotations

import math

import numpy as np

from ..schema import ModelType
from .core import DiagnosticCode, DiagnosticResult, EstimateResult, effect_inference, ols
from .tools import ToolCall, check_call, numeric

WEAK_F = 10.0


def two_stage_least_squares(y, x, z, W=None):
    """Return (beta, se, dof, first_stage_F, condition_number, pi) for the coefficient on ``x``.

    ``W`` holds exogenous covariates; an intercept is always included.
    """
    n = len(y)
    exog = np.ones((n, 1)) if W is None else np.column_stack([np.ones(n), W])
    first = ols(np.column_stack([exog[:, :1], z, exog[:, 1:]]), x)
    t_z = float(first.t_stats[1])
    F = 0.0 if math.isnan(t_z) else t_z * t_z
    x_hat = x - first.residuals

    Xhat = np.column_stack([exog[:, :1], x_hat, exog[:, 1:]])
    second = ols(Xhat, y)
    beta = second.coefficients
    X = np.column_stack([exog[:, :1], x, exog[:, 1:]])
    resid = y - X @ beta
    dof = n - X.shape[1]
    sigma2 = float(resid @ resid) / dof
    se = math.sqrt(max(sigma2 * second.cov_unscaled[1, 1], 0.0))
    return float(beta[1]), se, dof, F, second.condition_number, float(first.coefficients[1])


def run_iv(data, call: ToolCall) -> EstimateResult:
    check_call(call, data.names if hasattr(data, "names") else list(data))
    y = numeric(data, call.column("dependent"))
    x = numeric(data, call.column("treatment"))
    z = numeric(data, call.column("instrument"))
    covs = call.columns("covariates")
    W = np.column_stack([numeric(data, c) for c in covs]) if covs else None

    effect, se_raw, dof, F, cond, pi_hat = two_stage_least_squares(y, x, z, W)
    se, t, p = effect_inference(effect, se_raw, dof)

    naive_X = np.column_stack([np.ones(len(y)), x] + ([W] if W is not None else []))
    naive = ols(naive_X, y)
    weak = DiagnosticResult(
        DiagnosticCode.WeakInstrument,
        statistic=F,
        threshold=WEAK_F,
        comparison="<",
        payload={"first_stage_coefficient": pi_hat},
    )
    return EstimateResult(
        tool=ModelType.IV,
        effect=effect,
        standard_error=se,
        t_stat=t,
        p_value=p,
        n_used=len(y),
        diagnostics=(weak,),
        condition_number=cond,
        details={"first_stage_F": F, "ols_effect": float(naive.coefficients[1])},
    )
