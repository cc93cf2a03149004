"""Exception hierarchy shared across the package."""

from __future__ import annotations


class StridesError(Exception):
    """Base class for every error raised by this package."""


# -- schema -----------------------------------------------------------------


class MissingField(StridesError):
    def __init__(self, name: str):
        super().__init__(f"missing required field {name!r}")
        self.name = name


class MalformedRecord(StridesError):
    def __init__(self, position: int, detail: str = ""):
        msg = f"malformed record at position {position}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.position = position
        self.detail = detail


class UnknownModelType(StridesError):
    def __init__(self, label: str):
        super().__init__(f"unknown model type {label!r}")
        self.label = label


# -- backend ----------------------------------------------------------------


class BackendError(StridesError):
    pass


class Exhausted(BackendError):
    def __init__(self, retries: int, last_error: str = ""):
        super().__init__(f"request failed after {retries} retries: {last_error}")
        self.retries = retries
        self.last_error = last_error


class TranscriptMiss(BackendError):
    def __init__(self, role_tag: str, index: int):
        super().__init__(f"no transcript entry for {role_tag!r} at index {index}")
        self.role_tag = role_tag
        self.index = index


class AuthMissing(BackendError):
    def __init__(self, env_var: str):
        super().__init__(f"credential environment variable {env_var} is not set")
        self.env_var = env_var


class ExtractionError(StridesError):
    """Structured value could not be pulled out of a model reply."""


class NoObjectFound(ExtractionError):
    pass


class UnbalancedBraces(ExtractionError):
    pass


class MalformedObject(ExtractionError):
    pass


# -- agents -----------------------------------------------------------------


class ParseFailure(StridesError):
    def __init__(self, role: str, detail: str):
        super().__init__(f"{role}: could not parse reply ({detail})")
        self.role = role
        self.detail = detail


class SchemaViolation(StridesError):
    def __init__(self, violations):
        super().__init__("schema violations: " + ", ".join(violations))
        self.violations = list(violations)


class PlanError(StridesError):
    """A tool call could not be assembled from the design and the columns."""


class ColumnMiss(PlanError):
    def __init__(self, name: str):
        super().__init__(f"column {name!r} not present in dataset")
        self.name = name


class RoleMissing(PlanError):
    def __init__(self, role: str, tool: str = ""):
        super().__init__(f"required role {role!r} missing" + (f" for {tool}" if tool else ""))
        self.role = role


# -- simulate / estimators -----------------------------------------------------


class InvalidParams(StridesError):
    pass


class EstimationError(StridesError):
    """Statistical failure inside an estimator."""


class RankDeficient(EstimationError):
    def __init__(self, condition_number: float):
        super().__init__(f"design matrix is rank deficient (condition number {condition_number:.3g})")
        self.condition_number = condition_number


class NonFinite(EstimationError):
    pass


class InsufficientPrePeriods(EstimationError):
    pass


class NoSupport(EstimationError):
    pass


class SolverFail(EstimationError):
    pass


class NoMatches(EstimationError):
    pass


class SeparationDetected(EstimationError):
    def __init__(self, message: str, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic


# -- critic / orchestrator / grader / cli -------------------------------------


class CalledOnPass(StridesError):
    pass


class IllegalTransition(StridesError):
    pass


class StepFailed(StridesError):
    def __init__(self, phase: str, cause: Exception | None = None):
        super().__init__(f"step failed in phase {phase}: {cause}")
        self.phase = phase
        self.cause = cause


class JudgeParseFailure(StridesError):
    pass


class EmptyInput(StridesError):
    pass


class Unreadable(StridesError):
    pass
