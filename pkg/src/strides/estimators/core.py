"""Least-squares core and the result records every estimator returns."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy import linalg, stats

from ..errors import NonFinite, RankDeficient
from ..schema import ModelType

RANK_COND_LIMIT = 1e12
ALPHA = 0.05


class DiagnosticCode(str, enum.Enum):
    ParallelTrendsFail = "ParallelTrendsFail"
    WeakInstrument = "WeakInstrument"
    Multicollinearity = "Multicollinearity"
    NonConvergence = "NonConvergence"
    SignContradiction = "SignContradiction"
    ThinSupport = "ThinSupport"

    @property
    def label(self) -> str:
        """Wording used in critic output and transcripts."""
        return _LABELS[self]


_LABELS = {
    DiagnosticCode.ParallelTrendsFail: "Parallel Trends Test Failed",
    DiagnosticCode.WeakInstrument: "Weak Instruments",
    DiagnosticCode.Multicollinearity: "Multicollinearity",
    DiagnosticCode.NonConvergence: "Non-convergence",
    DiagnosticCode.SignContradiction: "Sign Contradiction",
    DiagnosticCode.ThinSupport: "Thin Support",
}


@dataclass(frozen=True)
class DiagnosticResult:
    """One falsification check; ``triggered`` is derived from the comparison."""

    code: DiagnosticCode
    statistic: float
    threshold: float
    comparison: str = "<"  # triggered iff statistic <comparison> threshold
    payload: Mapping[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.comparison not in ("<", ">"):
            raise ValueError(f"comparison must be '<' or '>', got {self.comparison!r}")

    @property
    def triggered(self) -> bool:
        if math.isnan(self.statistic):
            return False
        if self.comparison == "<":
            return self.statistic < self.threshold
        return self.statistic > self.threshold

    def to_dict(self) -> dict[str, Any]:
        return {
            "code": self.code.value,
            "label": self.code.label,
            "statistic": _jsonable(self.statistic),
            "threshold": self.threshold,
            "comparison": self.comparison,
            "triggered": self.triggered,
            "payload": _jsonable(dict(self.payload)),
        }


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(value, np.integer):
        return int(value)
    return value


@dataclass(frozen=True)
class RegressionFit:
    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    residual_dof: int
    r_squared: float
    condition_number: float
    sigma2: float
    residuals: np.ndarray = field(repr=False)
    cov_unscaled: np.ndarray = field(repr=False)
    converged: bool = True


@dataclass(frozen=True)
class EstimateResult:
    tool: ModelType
    effect: float
    standard_error: float | None
    t_stat: float | None
    p_value: float
    n_used: int
    diagnostics: tuple[DiagnosticResult, ...] = ()
    condition_number: float | None = None
    details: Mapping[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def diagnostic(self, code: DiagnosticCode) -> DiagnosticResult | None:
        for d in self.diagnostics:
            if d.code is code:
                return d
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool": self.tool.value,
            "effect": _jsonable(self.effect),
            "standard_error": _jsonable(self.standard_error),
            "t_stat": _jsonable(self.t_stat),
            "p_value": _jsonable(self.p_value),
            "n_used": self.n_used,
            "condition_number": _jsonable(self.condition_number),
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "details": _jsonable(dict(self.details)),
        }


def t_pvalue(t: float, dof: int) -> float:
    """Two-sided p-value from the t distribution; degenerate cases clamp to [0, 1]."""
    if math.isnan(t):
        return 1.0
    if math.isinf(t):
        return 0.0
    p = 2.0 * stats.t.sf(abs(t), dof) if dof > 0 else float("nan")
    return 1.0 if math.isnan(p) else min(1.0, max(0.0, float(p)))


def ols(X, y, se_mode: str = "classical") -> RegressionFit:
    """Least squares via QR with classical standard errors sigma^2 (X'X)^-1."""
    if se_mode != "classical":
        raise ValueError(f"unsupported se_mode {se_mode!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if y.shape != (n,):
        raise ValueError(f"response has shape {y.shape}, expected ({n},)")
    if n < k + 1:
        raise ValueError(f"need at least {k + 1} rows for {k} columns, got {n}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFinite("design matrix or response contains non-finite values")

    sv = np.linalg.svd(X, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if cond > RANK_COND_LIMIT:
        raise RankDeficient(cond)

    Q, R = np.linalg.qr(X, mode="reduced")
    beta = linalg.solve_triangular(R, Q.T @ y)
    resid = y - X @ beta
    dof = n - k
    rss = float(resid @ resid)
    sigma2 = rss / dof
    R_inv = linalg.solve_triangular(R, np.eye(k))
    cov_unscaled = R_inv @ R_inv.T
    se = np.sqrt(np.maximum(sigma2 * np.diag(cov_unscaled), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / np.where(se > 0, se, 1.0), np.where(beta == 0, np.nan, np.sign(beta) * np.inf))
    p = np.array([t_pvalue(float(ti), dof) for ti in t])
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return RegressionFit(beta, se, t, p, dof, r2, cond, sigma2, resid, cov_unscaled)


def degenerate_se(se: float, effect: float) -> bool:
    """True when the standard error is numerically zero (noiseless data)."""
    return se <= 1e-10 * max(1.0, abs(effect))


def effect_inference(effect: float, se: float, dof: int) -> tuple[float | None, float | None, float]:
    """(standard_error, t_stat, p_value) with the noiseless case made explicit."""
    if degenerate_se(se, effect):
        return None, None, 0.0 if abs(effect) > 1e-12 else 1.0
    t = effect / se
    return se, t, t_pvalue(t, dof)


def indicator_block(codes: np.ndarray, drop_first: bool = True) -> np.ndarray:
    """Dummy columns for a categorical array, first level dropped as baseline."""
    levels, inverse = np.unique(codes, return_inverse=True)
    D = np.zeros((len(codes), len(levels)))
    D[np.arange(len(codes)), inverse] = 1.0
    return D[:, 1:] if drop_first else D
