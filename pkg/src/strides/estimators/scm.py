"""Synthetic control: simplex-constrained donor weights fitted on pre-treatment outcomes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from ..errors import InvalidParams, SolverFail
from ..schema import ModelType
from .core import EstimateResult
from .tools import ToolCall, check_call, numeric

MAX_ITER = 10_000
TOL = 1e-8


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


@dataclass(frozen=True)
class SimplexFit:
    weights: np.ndarray
    objective: float
    trace: tuple[float, ...]
    iterations: int
    converged: bool


def solve_simplex_ls(A: np.ndarray, b: np.ndarray, max_iter: int = MAX_ITER, tol: float = TOL) -> SimplexFit:
    """Minimise ||A w - b||^2 over the simplex with monotone FISTA.

    The accepted iterate never has a larger objective than its predecessor,
    so ``trace`` is non-increasing. Convergence is declared when the
    projected-gradient step falls below ``tol`` in max-norm.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    J = A.shape[1]
    # On the simplex A w - b == (A - m 1')w - (b - m) for any m; removing the
    # row means drops the common-level direction that otherwise dominates L.
    m = A.mean(axis=1)
    A_c, b_c = A - m[:, None], b - m
    scale = max(1.0, float(np.abs(A_c).max(initial=0.0)))
    A_s, b_s = A_c / scale, b_c / scale
    L = 2.0 * float(np.linalg.norm(A_s, 2)) ** 2
    if L == 0.0:
        w = np.full(J, 1.0 / J)
        f = float(np.sum((A @ w - b) ** 2))
        return SimplexFit(w, f, (f,), 0, True)

    def f_s(w):
        r = A_s @ w - b_s
        return float(r @ r)

    def grad(w):
        return 2.0 * A_s.T @ (A_s @ w - b_s)

    x = np.full(J, 1.0 / J)
    fx = f_s(x)
    y, t = x.copy(), 1.0
    trace = [fx * scale**2]
    converged = False
    for it in range(1, max_iter + 1):
        z = project_simplex(y - grad(y) / L)
        fz = f_s(z)
        x_prev = x
        if fz <= fx:
            x, fx = z, fz
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev)
        t = t_next
        trace.append(fx * scale**2)
        if _gradient_map(x, grad, L) < tol:
            converged = True
            break
    polished = _polish(A_s, b_s, x)
    if polished is not None and f_s(polished) <= fx:
        x, fx = polished, f_s(polished)
        trace.append(fx * scale**2)
        converged = converged or _gradient_map(x, grad, L) < tol
    return SimplexFit(x, fx * scale**2, tuple(trace), it, converged)


def _gradient_map(x, grad, L) -> float:
    return float(np.max(np.abs(x - project_simplex(x - grad(x) / L))))


def _polish(A, b, x, floor: float = 1e-10):
    """Active-set refinement: exact least squares on the support of ``x`` with sum(w) = 1.

    Moves along the null space of the sum constraint by the minimum-norm
    step, so the result stays close to ``x``. Coordinates pushed negative
    leave the support and the step is retried. Returns None if nothing
    feasible remains.
    """
    S = np.nonzero(x > floor)[0]
    while len(S) >= 2:
        start = x[S] / x[S].sum()
        N = null_space(np.ones((1, len(S))))
        r = A[:, S] @ start - b
        z = np.linalg.lstsq(A[:, S] @ N, -r, rcond=1e-12)[0]
        w_S = start + N @ z
        if w_S.min() >= 0:
            w = np.zeros_like(x)
            w[S] = w_S / w_S.sum()
            return w
        # Drop the coordinates the step pushed negative and retry on the smaller support.
        S = S[w_S > 0]
    return None


def _panel(data, call: ToolCall):
    y = numeric(data, call.column("dependent"))
    unit = np.asarray(data[call.column("unit")])
    time = numeric(data, call.column("time"))
    treated_id = call.column_map["treated_unit"]
    units = np.unique(unit)
    match = [u for u in units if str(u) == str(treated_id) or _num_eq(u, treated_id)]
    if not match:
        raise InvalidParams(f"treated unit {treated_id!r} not found in column {call.column('unit')!r}")
    treated = match[0]
    periods = np.unique(time)
    index = {u: i for i, u in enumerate(units)}
    pidx = {p: i for i, p in enumerate(periods)}
    panel = np.full((len(units), len(periods)), np.nan)
    for u, p, v in zip(unit, time, y):
        panel[index[u], pidx[p]] = v
    if np.isnan(panel).any():
        raise InvalidParams("SCM needs a balanced unit x time panel")

    if call.column_map.get("post"):
        post_col = numeric(data, str(call.column_map["post"]))
        sel = unit == treated
        post = np.zeros(len(periods), dtype=bool)
        for p, flag in zip(time[sel], post_col[sel]):
            post[pidx[p]] = flag == 1
    elif "treatment_time" in call.options:
        post = periods >= float(call.options["treatment_time"])
    else:
        raise InvalidParams("SCM needs a 'post' column role or a treatment_time option")
    treated_row = panel[index[treated]]
    donors = np.delete(panel, index[treated], axis=0)
    donor_ids = [u for u in units if u != treated]
    return treated_row, donors, post, donor_ids


def _num_eq(a, b) -> bool:
    try:
        return float(a) == float(b)
    except (TypeError, ValueError):
        return False


def _gap_ratio(treated_row, donors, post):
    fit = solve_simplex_ls(donors[:, ~post].T, treated_row[~post])
    gap = treated_row - fit.weights @ donors
    pre_rmspe = np.sqrt(np.mean(gap[~post] ** 2))
    post_rmspe = np.sqrt(np.mean(gap[post] ** 2))
    return fit, gap, post_rmspe / max(pre_rmspe, 1e-12)


def run_scm(data, call: ToolCall) -> EstimateResult:
    """Effect is the mean post-period gap between the treated unit and its synthetic control.

    Inference is by in-space placebos: each donor in turn is treated as if it
    were the treated unit, and the p-value is the share of units whose
    post/pre RMSPE ratio is at least the treated unit's.
    """
    check_call(call, data.names if hasattr(data, "names") else list(data))
    treated_row, donors, post, donor_ids = _panel(data, call)
    if donors.shape[0] < 3:
        raise InvalidParams("SCM needs at least 3 donors")
    if (~post).sum() < 3 or post.sum() < 1:
        raise InvalidParams("SCM needs at least 3 pre-periods and one post-period")

    fit, gap, ratio = _gap_ratio(treated_row, donors, post)
    if not fit.converged:
        raise SolverFail(f"simplex solver did not converge in {fit.iterations} iterations")
    effect = float(np.mean(gap[post]))

    ratios = [ratio]
    if call.options.get("placebos", True):
        for j in range(donors.shape[0]):
            others = np.delete(donors, j, axis=0)
            ratios.append(_gap_ratio(donors[j], others, post)[2])
    p_value = float(np.mean(np.array(ratios) >= ratio - 1e-12)) if len(ratios) > 1 else 1.0

    return EstimateResult(
        tool=ModelType.SCM,
        effect=effect,
        standard_error=None,
        t_stat=None,
        p_value=p_value,
        n_used=int(donors.size + treated_row.size),
        diagnostics=(),
        condition_number=None,
        details={
            "weights": {str(u): float(w) for u, w in zip(donor_ids, fit.weights)},
            "pre_period_mse": float(np.mean(gap[~post] ** 2)),
            "solver_iterations": fit.iterations,
            "rmspe_ratio": float(ratio),
        },
    )
