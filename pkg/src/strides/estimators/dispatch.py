"""Route a ToolCall to its estimator and turn every outcome into data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..errors import EstimationError, InvalidParams, PlanError, SeparationDetected
from ..schema import ModelType
from .core import DiagnosticResult, EstimateResult
from .did import run_did
from .iv import run_iv
from .psm import run_psm
from .rd import run_rd
from .scm import run_scm
from .tools import ToolCall

RUNNERS = {
    ModelType.DiD: run_did,
    ModelType.IV: run_iv,
    ModelType.RD: run_rd,
    ModelType.SCM: run_scm,
    ModelType.PSM: run_psm,
}

FAILURE_KINDS = ("mapping", "statistical", "internal")


@dataclass(frozen=True)
class ExecutionResult:
    """Either an estimate or a structured failure (``kind`` in mapping/statistical/internal)."""

    tool: ModelType | None
    estimate: EstimateResult | None = None
    kind: str | None = None
    error_type: str | None = None
    message: str = ""
    findings: tuple[DiagnosticResult, ...] = field(default=())

    def __post_init__(self):
        if (self.estimate is None) == (self.kind is None):
            raise ValueError("exactly one of estimate or failure kind must be set")
        if self.kind is not None and self.kind not in FAILURE_KINDS:
            raise ValueError(f"unknown failure kind {self.kind!r}")

    @property
    def ok(self) -> bool:
        return self.estimate is not None

    @classmethod
    def failure(cls, tool, kind: str, error: BaseException | str, findings=()) -> ExecutionResult:
        if isinstance(error, BaseException):
            return cls(tool, kind=kind, error_type=type(error).__name__, message=str(error), findings=tuple(findings))
        return cls(tool, kind=kind, error_type=kind, message=str(error), findings=tuple(findings))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"ok": self.ok, "tool": self.tool.value if self.tool else None}
        if self.ok:
            out["estimate"] = self.estimate.to_dict()
        else:
            out["failure"] = {"kind": self.kind, "error_type": self.error_type, "message": self.message}
            out["findings"] = [f.to_dict() for f in self.findings]
        return out


def execute_tool(call: ToolCall, data) -> ExecutionResult:
    """Run ``call`` against ``data``. Never raises."""
    tool = getattr(call, "tool", None)
    try:
        return ExecutionResult(tool, estimate=RUNNERS[tool](data, call))
    except PlanError as exc:
        return ExecutionResult.failure(tool, "mapping", exc)
    except SeparationDetected as exc:
        findings = (exc.diagnostic,) if exc.diagnostic is not None else ()
        return ExecutionResult.failure(tool, "statistical", exc, findings)
    except (EstimationError, InvalidParams) as exc:
        return ExecutionResult.failure(tool, "statistical", exc)
    except Exception as exc:  # noqa: BLE001 - failures are data for the critic
        return ExecutionResult.failure(tool if isinstance(tool, ModelType) else None, "internal", exc)
