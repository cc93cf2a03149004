"""Econometric tool suite: a shared OLS core and five identification strategies."""

from .core import ALPHA, DiagnosticCode, DiagnosticResult, EstimateResult, RegressionFit, ols, t_pvalue
from .did import run_did, test_parallel_trends
from .dispatch import ExecutionResult, execute_tool
from .iv import run_iv, two_stage_least_squares
from .psm import fit_logit, run_psm
from .rd import run_rd
from .scm import project_simplex, run_scm, solve_simplex_ls
from .tools import LITERAL_ROLES, OPTIONAL_ROLES, REQUIRED_ROLES, ToolCall, check_call

__all__ = [
    "ALPHA", "DiagnosticCode", "DiagnosticResult", "EstimateResult", "ExecutionResult", "LITERAL_ROLES",
    "OPTIONAL_ROLES", "REQUIRED_ROLES", "RegressionFit", "ToolCall", "check_call", "execute_tool", "fit_logit",
    "ols", "project_simplex", "run_did", "run_iv", "run_psm", "run_rd", "run_scm", "solve_simplex_ls",
    "t_pvalue", "test_parallel_trends", "two_stage_least_squares",
]
