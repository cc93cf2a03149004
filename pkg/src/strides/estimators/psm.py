"""Propensity score matching: logistic fit, 1-NN on the log-odds with replacement, ATT."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParams, NoMatches, RankDeficient, SeparationDetected
from ..schema import ModelType
from .core import DiagnosticCode, DiagnosticResult, EstimateResult, effect_inference, ols
from .tools import ToolCall, check_call, numeric

MAX_NEWTON = 100
NEWTON_TOL = 1e-8
CALIPER_FACTOR = 0.2
VIF_LIMIT = 10.0
TIE_EPS = 1e-9


@dataclass(frozen=True)
class LogitFit:
    coefficients: np.ndarray
    log_odds: np.ndarray
    iterations: int
    last_step: float
    converged: bool


def fit_logit(X: np.ndarray, t: np.ndarray, max_iter: int = MAX_NEWTON, tol: float = NEWTON_TOL) -> LogitFit:
    """Newton-Raphson for a logistic regression; ``X`` already carries an intercept.

    Raises SeparationDetected when the fitted probabilities collapse onto the
    labels or Newton fails to settle within ``max_iter`` steps.
    """
    beta = np.zeros(X.shape[1])
    step_norm = math.inf
    for it in range(1, max_iter + 1):
        eta = X @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        w = p * (1.0 - p)
        if np.all(np.abs(p - t) < 1e-8) or w.max() < 1e-12:
            raise SeparationDetected("treatment is perfectly predicted by the covariates",
                                     _nonconvergence(step_norm, it))
        H = X.T @ (X * w[:, None])
        g = X.T @ (t - p)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            raise SeparationDetected("singular information matrix in the propensity fit",
                                     _nonconvergence(step_norm, it)) from None
        beta = beta + step
        step_norm = float(np.max(np.abs(step)))
        if step_norm < tol:
            return LogitFit(beta, X @ beta, it, step_norm, True)
    raise SeparationDetected(f"propensity fit did not converge in {max_iter} Newton steps",
                             _nonconvergence(step_norm, max_iter))


def _nonconvergence(step_norm: float, iterations: int) -> DiagnosticResult:
    return DiagnosticResult(
        DiagnosticCode.NonConvergence,
        statistic=step_norm,
        threshold=NEWTON_TOL,
        comparison=">",
        payload={"iterations": iterations},
    )


def max_vif(C: np.ndarray) -> float:
    """Largest variance inflation factor across the columns of ``C``."""
    k = C.shape[1]
    if k < 2:
        return 1.0
    worst = 1.0
    for j in range(k):
        others = np.column_stack([np.ones(len(C)), np.delete(C, j, axis=1)])
        try:
            r2 = ols(others, C[:, j]).r_squared
        except RankDeficient:
            return math.inf
        worst = max(worst, math.inf if r2 >= 1.0 else 1.0 / (1.0 - r2))
    return worst


def smd_table(C, t, names, weights_c=None) -> dict[str, float]:
    """Standardized mean differences; control means optionally weighted by match counts."""
    out = {}
    treated, control = C[t == 1], C[t == 0]
    for j, name in enumerate(names):
        mc = np.average(control[:, j], weights=weights_c) if weights_c is not None else control[:, j].mean()
        pooled = math.sqrt(0.5 * (treated[:, j].var(ddof=1) + control[:, j].var(ddof=1)))
        diff = treated[:, j].mean() - mc
        out[name] = float(diff / pooled) if pooled > 0 else 0.0
    return out


def match_nearest(lo_t, lo_c, C_t, C_c, caliper):
    """Index of the matched control for each treated unit, or -1 outside the caliper.

    Near-ties on the log-odds are broken by standardized covariate distance.
    """
    scale = np.concatenate([C_t, C_c]).std(axis=0)
    scale[scale == 0] = 1.0
    out = np.full(len(lo_t), -1)
    for i, lo in enumerate(lo_t):
        d = np.abs(lo_c - lo)
        best = d.min()
        if best > caliper + 1e-9:
            continue
        cand = np.nonzero(d <= best + TIE_EPS)[0]
        if len(cand) > 1:
            cd = np.sum(((C_c[cand] - C_t[i]) / scale) ** 2, axis=1)
            cand = cand[np.argsort(cd, kind="stable")]
        out[i] = cand[0]
    return out


def run_psm(data, call: ToolCall, caliper: float | None = None) -> EstimateResult:
    check_call(call, data.names if hasattr(data, "names") else list(data))
    y = numeric(data, call.column("dependent"))
    t = numeric(data, call.column("treatment"))
    names = call.columns("covariates")
    C = np.column_stack([numeric(data, c) for c in names])
    if not np.isin(t, (0.0, 1.0)).all():
        raise InvalidParams("PSM treatment column must be binary 0/1")
    if t.sum() == 0 or t.sum() == len(t):
        raise InvalidParams("PSM needs both treated and control units")

    vif = DiagnosticResult(DiagnosticCode.Multicollinearity, statistic=max_vif(C),
                           threshold=VIF_LIMIT, comparison=">")
    logit = fit_logit(np.column_stack([np.ones(len(t)), C]), t)
    converged = _nonconvergence(logit.last_step, logit.iterations)

    lo = logit.log_odds
    if caliper is None:
        caliper = call.options.get("caliper")
    cal = float(caliper) if caliper is not None else CALIPER_FACTOR * float(np.std(lo))
    tm, cm = t == 1, t == 0
    idx = match_nearest(lo[tm], lo[cm], C[tm], C[cm], cal)
    ok = idx >= 0
    if not ok.any():
        raise NoMatches(f"no treated unit has a control within caliper {cal:.4g}")

    y_t, y_c = y[tm][ok], y[cm]
    diffs = y_t - y_c[idx[ok]]
    effect = float(diffs.mean())
    n1 = int(ok.sum())
    counts = np.bincount(idx[ok], minlength=int(cm.sum())).astype(float)
    var_t = y_t.var(ddof=1) if n1 > 1 else 0.0
    used = counts > 0
    var_c = y_c[used].var(ddof=1) if used.sum() > 1 else 0.0
    se_raw = math.sqrt(var_t / n1 + var_c * float((counts**2).sum()) / n1**2)
    se, tstat, p = effect_inference(effect, se_raw, max(n1 - 1, 1))

    balance = {
        "before": smd_table(C, t, names),
        "after": smd_table(np.vstack([C[tm][ok], C[cm]]),
                           np.concatenate([np.ones(n1), np.zeros(int(cm.sum()))]),
                           names, weights_c=counts if used.any() else None),
    }
    vif = DiagnosticResult(vif.code, vif.statistic, vif.threshold, vif.comparison, payload={"balance": balance})
    return EstimateResult(
        tool=ModelType.PSM,
        effect=effect,
        standard_error=se,
        t_stat=tstat,
        p_value=p,
        n_used=n1 + int(used.sum()),
        diagnostics=(vif, converged),
        condition_number=None,
        details={"caliper": cal, "n_treated_matched": n1, "n_treated_dropped": int((~ok).sum()),
                 "newton_iterations": logit.iterations, "balance": balance},
    )
