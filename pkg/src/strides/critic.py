"""Falsification checks over an execution result and refinement routing.

The deterministic layer decides pass/fail. An optional LLM review runs
afterwards and may only add text; it never turns a failure into a pass.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any

from .agents import AgentConfig, AgentRole, DesignDraft, ask, render_prompt
from .backend import Backend, extract_structured
from .errors import CalledOnPass, StridesError
from .estimators.core import ALPHA, DiagnosticCode, DiagnosticResult
from .estimators.dispatch import ExecutionResult
from .schema import HypothesisSet

COND_LIMIT = 1e8

# Findings whose remedy is a different identification strategy.
ASSUMPTION_CODES = {DiagnosticCode.ParallelTrendsFail, DiagnosticCode.WeakInstrument, DiagnosticCode.SignContradiction}
# Diagnostics that fail the critique when triggered. ThinSupport is reported only.
BLOCKING_CODES = {
    DiagnosticCode.ParallelTrendsFail,
    DiagnosticCode.WeakInstrument,
    DiagnosticCode.Multicollinearity,
    DiagnosticCode.NonConvergence,
    DiagnosticCode.SignContradiction,
}


class RefinementTarget(str, enum.Enum):
    Methodology = "Methodology"
    AnalysisPlanner = "AnalysisPlanner"


@dataclass(frozen=True)
class CritiqueReport:
    passed: bool
    findings: tuple[DiagnosticResult, ...] = ()
    critique_text: str = ""
    suggestion_text: str = ""
    route: RefinementTarget | None = None
    execution_failure: str | None = None  # failure kind when estimation did not run
    llm_verdict: bool | None = None
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.passed and self.route is not None:
            raise ValueError("a passing critique has no route")
        if not self.passed and not self.findings and not self.execution_failure:
            raise ValueError("a failing critique needs findings or an execution failure")

    def finding_labels(self) -> list[str]:
        labels = [f.code.label for f in self.findings]
        if self.execution_failure:
            labels.insert(0, f"Execution Failure ({self.execution_failure})")
        return labels

    def to_dict(self) -> dict[str, Any]:
        return {
            "pass": self.passed,
            "findings": [f.to_dict() for f in self.findings],
            "critique": self.critique_text,
            "suggestion": self.suggestion_text,
            "route": self.route.value if self.route else None,
            "execution_failure": self.execution_failure,
            "llm_verdict": self.llm_verdict,
            "notes": list(self.notes),
        }


def sign_contradiction(exec_result: ExecutionResult, hyp: HypothesisSet) -> DiagnosticResult | None:
    """Significant estimate whose sign opposes every hypothesised direction.

    The statistic is the p-value when the sign disagrees with all hypotheses
    and 1.0 otherwise, so the check fires iff p < ALPHA and the signs clash.
    """
    if not exec_result.ok:
        return None
    est = exec_result.estimate
    if est.effect == 0 or math.isnan(est.effect):
        return None
    sign = 1 if est.effect > 0 else -1
    opposed = all(h.sign != sign for h in hyp.hypotheses)
    return DiagnosticResult(
        DiagnosticCode.SignContradiction,
        statistic=float(est.p_value) if opposed else 1.0,
        threshold=ALPHA,
        comparison="<",
        payload={"effect": est.effect, "directions": [h.expected_direction for h in hyp.hypotheses]},
    )


def deterministic_findings(exec_result: ExecutionResult, hyp: HypothesisSet) -> tuple[DiagnosticResult, ...]:
    findings: list[DiagnosticResult] = []
    if not exec_result.ok:
        findings.extend(f for f in exec_result.findings if f.triggered)
        return tuple(findings)
    est = exec_result.estimate
    for d in est.diagnostics:
        if d.triggered and d.code in BLOCKING_CODES:
            findings.append(d)
    has_mc = any(f.code is DiagnosticCode.Multicollinearity for f in findings)
    if not has_mc and est.condition_number is not None and est.condition_number > COND_LIMIT:
        findings.append(DiagnosticResult(DiagnosticCode.Multicollinearity, est.condition_number,
                                         COND_LIMIT, ">", {"source": "condition_number"}))
    sc = sign_contradiction(exec_result, hyp)
    if sc is not None and sc.triggered:
        findings.append(sc)
    return tuple(findings)


def _describe(f: DiagnosticResult) -> str:
    stat = f.statistic
    shown = f"{stat:.4g}" if isinstance(stat, float) and math.isfinite(stat) else str(stat)
    return f"{f.code.label} (statistic {shown} {f.comparison} {f.threshold:g})"


_SUGGESTIONS = {
    DiagnosticCode.ParallelTrendsFail: "Pre-treatment trends diverge; reconsider the comparison group or the design family.",
    DiagnosticCode.WeakInstrument: "The instrument barely moves the treatment; find a stronger instrument or another design.",
    DiagnosticCode.SignContradiction: "The estimate contradicts the hypothesised direction; revisit the mechanism or the design.",
    DiagnosticCode.Multicollinearity: "Regressors are nearly collinear; drop redundant covariates or remap columns.",
    DiagnosticCode.NonConvergence: "The fit did not converge; simplify the covariate set or remap columns.",
}


def route(report: CritiqueReport, exec_result: ExecutionResult | None = None) -> RefinementTarget:
    """Send assumption problems to Methodology and mechanical ones to the planner.

    Any assumption-level finding wins when both kinds are present.
    """
    if report.passed:
        raise CalledOnPass("route() called on a passing critique")
    codes = {f.code for f in report.findings}
    if codes & ASSUMPTION_CODES:
        return RefinementTarget.Methodology
    return RefinementTarget.AnalysisPlanner


def review(exec_result: ExecutionResult, hyp: HypothesisSet, draft: DesignDraft | None = None,
           cfg: AgentConfig | None = None, backend: Backend | None = None, log: list | None = None) -> CritiqueReport:
    findings = deterministic_findings(exec_result, hyp)
    failure = None if exec_result.ok else exec_result.kind
    passed = not findings and failure is None

    lines = []
    if failure:
        lines.append(f"Estimation failed ({failure}): {exec_result.error_type}: {exec_result.message}")
    lines.extend(_describe(f) for f in findings)
    critique = "; ".join(lines) if lines else "No diagnostic failures."
    if passed:
        suggestion = ""
    elif findings:
        suggestion = " ".join(dict.fromkeys(_SUGGESTIONS[f.code] for f in findings))
    else:
        suggestion = "Fix the column mapping or estimator inputs and rerun."

    notes: list[str] = []
    verdict = None
    if backend is not None:
        cfg = cfg or AgentConfig(AgentRole.CriticLLM)
        try:
            verdict, extra_critique, extra_suggestion = _llm_review(exec_result, draft, findings, cfg, backend, log)
        except StridesError as exc:
            notes.append(f"llm critic unavailable: {type(exc).__name__}: {exc}")
        else:
            if extra_critique:
                critique = f"{critique}\n{extra_critique}"
            if extra_suggestion:
                suggestion = f"{suggestion}\n{extra_suggestion}".strip()
            if verdict and not passed:
                notes.append("llm critic passed a run the deterministic checks failed; deterministic verdict kept")
            if verdict is False and passed:
                notes.append("llm critic objected without a deterministic finding; recorded only")

    report = CritiqueReport(
        passed=passed,
        findings=findings,
        critique_text=critique,
        suggestion_text=suggestion,
        execution_failure=failure,
        llm_verdict=verdict,
        notes=tuple(notes),
    )
    if not passed:
        report = CritiqueReport(**{**report.__dict__, "route": route(report, exec_result)})
    return report


def _llm_review(exec_result, draft, findings, cfg, backend, log):
    prompt = render_prompt(
        AgentRole.CriticLLM,
        methodology=json.dumps(draft.to_dict(), ensure_ascii=False) if draft else "unavailable",
        code_results=json.dumps(exec_result.to_dict(), ensure_ascii=False),
        findings="\n".join(_describe(f) for f in findings) or "none",
    )

    def parse(text: str):
        obj = extract_structured(text)
        if not isinstance(obj, dict) or "pass" not in obj:
            raise KeyError("pass")
        raw = obj["pass"]
        verdict = raw if isinstance(raw, bool) else str(raw).strip().lower() == "true"
        return verdict, str(obj.get("critique") or ""), str(obj.get("suggestion") or "")

    return ask(cfg, backend, prompt, parse, log)
