"""Sharp regression discontinuity by local linear fits on each side of the cutoff."""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidParams, NoSupport
from ..schema import ModelType
from .core import DiagnosticCode, DiagnosticResult, EstimateResult, effect_inference, ols
from .tools import ToolCall, check_call, numeric

MIN_SIDE = 20
BANDWIDTH_FACTOR = 0.5


def resolve_cutoff(data, call: ToolCall) -> float:
    raw = call.column_map.get("cutoff")
    if isinstance(raw, str) and raw in data:
        values = np.unique(numeric(data, raw))
        if len(values) != 1:
            raise InvalidParams(f"cutoff column {raw!r} is not constant")
        return float(values[0])
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise InvalidParams(f"cutoff {raw!r} is neither a number nor a constant column") from None


def default_bandwidth(running: np.ndarray) -> float:
    return BANDWIDTH_FACTOR * float(np.std(running))


def run_rd(data, call: ToolCall, bandwidth: float | None = None) -> EstimateResult:
    check_call(call, data.names if hasattr(data, "names") else list(data))
    y = numeric(data, call.column("dependent"))
    x = numeric(data, call.column("running"))
    c = resolve_cutoff(data, call)
    if bandwidth is None:
        bandwidth = call.options.get("bandwidth")
    h = float(bandwidth) if bandwidth is not None else default_bandwidth(x)
    if not h > 0:
        raise InvalidParams(f"bandwidth must be positive, got {h}")

    left = (x >= c - h) & (x < c)
    right = (x >= c) & (x <= c + h)
    n_left, n_right = int(left.sum()), int(right.sum())
    if n_left < 3 or n_right < 3:
        raise NoSupport(f"too few observations within bandwidth: {n_left} left, {n_right} right")

    fits = []
    for side in (left, right):
        X = np.column_stack([np.ones(side.sum()), x[side] - c])
        fits.append(ols(X, y[side]))
    fl, fr = fits
    effect = float(fr.coefficients[0] - fl.coefficients[0])
    se_raw = math.sqrt(fl.standard_errors[0] ** 2 + fr.standard_errors[0] ** 2)
    dof = fl.residual_dof + fr.residual_dof
    se, t, p = effect_inference(effect, se_raw, dof)

    thin = DiagnosticResult(
        DiagnosticCode.ThinSupport,
        statistic=float(min(n_left, n_right)),
        threshold=float(MIN_SIDE),
        comparison="<",
        payload={"n_left": n_left, "n_right": n_right},
    )
    return EstimateResult(
        tool=ModelType.RD,
        effect=effect,
        standard_error=se,
        t_stat=t,
        p_value=p,
        n_used=n_left + n_right,
        diagnostics=(thin,),
        condition_number=max(fl.condition_number, fr.condition_number),
        details={
            "bandwidth": h,
            "cutoff": c,
            "left_intercept": float(fl.coefficients[0]),
            "right_intercept": float(fr.coefficients[0]),
        },
    )
