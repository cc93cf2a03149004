"""Pipeline state machine: agents over a fixed phase graph with a critic loop.

``step`` applies exactly one transition; ``run_pipeline`` drives ``step``
until the run is Done or Failed and packs the result into a RunRecord.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from .agents import (
    AgentConfig,
    AgentRole,
    DesignDraft,
    SimulationSpec,
    SummaryContext,
    VariableMapping,
    run_data_retrieval,
    run_direct,
    run_methodology,
    run_plan_analysis,
    run_simulation_params,
    run_summary,
    run_theory_architect,
)
from .backend import Backend
from .critic import CritiqueReport, RefinementTarget, review
from .errors import IllegalTransition, InvalidParams, PlanError, StepFailed, StridesError, UnknownModelType
from .estimators.dispatch import ExecutionResult, execute_tool
from .estimators.tools import ToolCall
from .schema import BenchInstance, CausalDesign, HypothesisSet
from .simulate import MockDataset, SimParams, describe_schema, simulate


class Phase(str, enum.Enum):
    Theory = "Theory"
    Methodology = "Methodology"
    Retrieval = "Retrieval"
    Simulation = "Simulation"
    Analysis = "Analysis"
    Execution = "Execution"
    Critique = "Critique"
    Summary = "Summary"
    Done = "Done"
    Failed = "Failed"


TERMINAL = {Phase.Done, Phase.Failed}

# Allowed transitions; any live phase may also go to Failed.
EDGES = {
    Phase.Theory: {Phase.Methodology},
    Phase.Methodology: {Phase.Retrieval, Phase.Methodology, Phase.Summary},
    Phase.Retrieval: {Phase.Simulation},
    Phase.Simulation: {Phase.Analysis},
    Phase.Analysis: {Phase.Execution, Phase.Critique},
    Phase.Execution: {Phase.Critique},
    Phase.Critique: {Phase.Summary, Phase.Methodology, Phase.Analysis},
    Phase.Summary: {Phase.Done},
}

CANONICAL_ORDER = (
    Phase.Theory, Phase.Methodology, Phase.Retrieval, Phase.Simulation,
    Phase.Analysis, Phase.Execution, Phase.Critique, Phase.Summary, Phase.Done,
)


@dataclass(frozen=True)
class PipelineConfig:
    max_iterations: int = 3
    seed: int = 0
    knowledge_snippets: tuple[str, ...] = ()
    use_llm_critic: bool = True
    temperatures: Mapping[str, float] = field(default_factory=dict)
    max_tokens: int = 4096

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    def agent(self, role: AgentRole, prefix: str = "") -> AgentConfig:
        return AgentConfig(role, temperature=self.temperatures.get(AgentRole(role).value),
                           knowledge_snippets=self.knowledge_snippets, tag_prefix=prefix,
                           max_tokens=self.max_tokens)


def derive_seed(base: int, instance_id: str, iteration: int) -> int:
    h = hashlib.sha256(f"{base}:{instance_id}:{iteration}".encode()).digest()
    return int.from_bytes(h[:8], "big")


@dataclass(frozen=True)
class StepRecord:
    phase: str
    iteration: int
    role: str
    role_tag: str
    temperature: float
    prompt_digest: str
    response_digest: str
    prompt_tokens: int
    completion_tokens: int
    estimated: bool
    repair: bool
    duration: float

    @property
    def tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self, timing: bool = True) -> dict[str, Any]:
        out = {
            "phase": self.phase, "iteration": self.iteration, "role": self.role, "role_tag": self.role_tag,
            "temperature": self.temperature, "prompt_digest": self.prompt_digest,
            "response_digest": self.response_digest, "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens, "tokens": self.tokens,
            "estimated": self.estimated, "repair": self.repair,
        }
        if timing:
            out["duration"] = round(self.duration, 6)
        return out


@dataclass
class PipelineContext:
    hypotheses: HypothesisSet | None = None
    draft: DesignDraft | None = None
    mapping: VariableMapping | None = None
    simulation: SimulationSpec | None = None
    dataset: MockDataset | None = None
    tool_call: ToolCall | None = None
    execution: ExecutionResult | None = None
    critique: CritiqueReport | None = None
    design: CausalDesign | None = None
    methodology_feedback: str = ""
    planner_feedback: str = ""
    terminal_failure: str | None = None
    critiques: list[CritiqueReport] = field(default_factory=list)


@dataclass
class PipelineState:
    """Mutable run state. ``step`` updates it in place and returns it."""

    instance: BenchInstance
    phase: Phase = Phase.Theory
    iteration: int = 0
    context: PipelineContext = field(default_factory=PipelineContext)
    trace: list[str] = field(default_factory=lambda: [Phase.Theory.value])
    log: list[StepRecord] = field(default_factory=list)
    error: str | None = None

    @property
    def prefix(self) -> str:
        return self.instance.instance_id


def _move(state: PipelineState, target: Phase) -> PipelineState:
    if target is not Phase.Failed and target not in EDGES.get(state.phase, set()):
        raise IllegalTransition(f"{state.phase.value} -> {target.value}")
    state.phase = target
    state.trace.append(target.value)
    return state


def _run_agent(state: PipelineState, fn, *args, **kwargs):
    exchanges: list = []
    try:
        return fn(*args, log=exchanges, **kwargs)
    finally:
        for ex in exchanges:
            state.log.append(StepRecord(
                phase=state.phase.value, iteration=state.iteration, role=ex.role, role_tag=ex.role_tag,
                temperature=ex.temperature, prompt_digest=ex.prompt_digest, response_digest=ex.response_digest,
                prompt_tokens=ex.prompt_tokens, completion_tokens=ex.completion_tokens,
                estimated=ex.estimated, repair=ex.repair, duration=ex.duration,
            ))


def step(state: PipelineState, cfg: PipelineConfig, backend: Backend) -> PipelineState:
    """Apply one transition. Agent failures move the run to Failed."""
    if state.phase in TERMINAL:
        raise IllegalTransition(f"no transition out of {state.phase.value}")
    try:
        return _HANDLERS[state.phase](state, cfg, backend)
    except IllegalTransition:
        raise
    except StridesError as exc:
        failed = StepFailed(state.phase.value, exc)
        state.error = str(failed)
        return _move(state, Phase.Failed)


def _theory(state, cfg, backend):
    ctx = state.context
    meta = state.instance.metadata
    ctx.hypotheses = _run_agent(state, run_theory_architect, meta, cfg.agent(AgentRole.TheoryArchitect, state.prefix),
                                backend)
    return _move(state, Phase.Methodology)


def _methodology(state, cfg, backend):
    ctx = state.context
    try:
        ctx.draft = _run_agent(state, run_methodology, ctx.hypotheses, state.instance.metadata,
                               cfg.agent(AgentRole.Methodology, state.prefix), backend,
                               feedback=ctx.methodology_feedback)
    except UnknownModelType as exc:
        state.iteration += 1
        note = f"Model {exc.label!r} is not one of DiD, IV, RD, SCM, PSM. Choose one of those."
        ctx.methodology_feedback = note
        if state.iteration >= cfg.max_iterations:
            ctx.terminal_failure = f"methodology proposed an unsupported model: {exc.label!r}"
            return _move(state, Phase.Summary)
        return _move(state, Phase.Methodology)
    # A new design invalidates everything built on the previous one.
    ctx.mapping = ctx.simulation = ctx.dataset = ctx.tool_call = ctx.execution = None
    ctx.planner_feedback = ""
    return _move(state, Phase.Retrieval)


def _retrieval(state, cfg, backend):
    ctx = state.context
    ctx.mapping = _run_agent(state, run_data_retrieval, ctx.draft, cfg.agent(AgentRole.DataRetrieval, state.prefix),
                             backend)
    return _move(state, Phase.Simulation)


def _simulation(state, cfg, backend):
    ctx = state.context
    spec = _run_agent(state, run_simulation_params, ctx.draft, ctx.hypotheses,
                      cfg.agent(AgentRole.Simulation, state.prefix), backend)
    seed = derive_seed(cfg.seed, state.instance.instance_id, state.iteration)
    try:
        dataset = simulate(spec.family, spec.params, seed)
    except InvalidParams as exc:
        fallback = SimParams(true_effect=spec.params.true_effect, direction=spec.params.direction)
        spec = SimulationSpec(spec.family, fallback, spec.adjustments + (f"defaults used: {exc}",))
        dataset = simulate(spec.family, fallback, seed)
    ctx.simulation, ctx.dataset = spec, dataset
    return _move(state, Phase.Analysis)


def _analysis(state, cfg, backend):
    ctx = state.context
    try:
        ctx.tool_call = _run_agent(state, run_plan_analysis, ctx.draft, describe_schema(ctx.dataset),
                                   cfg.agent(AgentRole.AnalysisPlanner, state.prefix), backend,
                                   error_context=ctx.planner_feedback)
    except PlanError as exc:
        ctx.tool_call = None
        ctx.execution = ExecutionResult.failure(ctx.draft.model_name, "mapping", exc)
        return _move(state, Phase.Critique)
    return _move(state, Phase.Execution)


def _execution(state, cfg, backend):
    ctx = state.context
    ctx.execution = execute_tool(ctx.tool_call, ctx.dataset)
    return _move(state, Phase.Critique)


def _critique(state, cfg, backend):
    ctx = state.context
    llm = backend if cfg.use_llm_critic else None
    report = _run_agent(state, review, ctx.execution, ctx.hypotheses, ctx.draft,
                        cfg.agent(AgentRole.CriticLLM, state.prefix), llm)
    ctx.critique = report
    ctx.critiques.append(report)
    if report.passed:
        return _move(state, Phase.Summary)
    state.iteration += 1
    if state.iteration >= cfg.max_iterations:
        return _move(state, Phase.Summary)
    feedback = f"{report.critique_text}\n{report.suggestion_text}".strip()
    if report.route is RefinementTarget.Methodology:
        ctx.methodology_feedback = feedback
        return _move(state, Phase.Methodology)
    ctx.planner_feedback = "Previous attempt failed: " + feedback
    return _move(state, Phase.Analysis)


def _summary(state, cfg, backend):
    ctx = state.context
    critique = ctx.critique
    verified = critique is not None and critique.passed
    findings = tuple(critique.finding_labels()) if critique is not None and not critique.passed else ()
    sctx = SummaryContext(
        meta=state.instance.metadata, draft=ctx.draft, execution=ctx.execution, critique=critique,
        verified=verified, terminal_failure=ctx.terminal_failure, findings=findings,
    )
    ctx.design = _run_agent(state, run_summary, sctx, cfg.agent(AgentRole.Summary, state.prefix), backend)
    return _move(state, Phase.Done)


_HANDLERS = {
    Phase.Theory: _theory,
    Phase.Methodology: _methodology,
    Phase.Retrieval: _retrieval,
    Phase.Simulation: _simulation,
    Phase.Analysis: _analysis,
    Phase.Execution: _execution,
    Phase.Critique: _critique,
    Phase.Summary: _summary,
}


@dataclass(frozen=True)
class RunRecord:
    instance_id: str
    mode: str  # strides | direct
    status: str  # ok | failed
    final_design: CausalDesign | None
    iterations_used: int
    verified: bool
    step_log: tuple[StepRecord, ...] = ()
    phase_trace: tuple[str, ...] = ()
    critiques: tuple[dict, ...] = ()
    execution: dict | None = None
    error: str | None = None

    def __post_init__(self):
        if self.mode == "direct" and self.iterations_used != 0:
            raise ValueError("direct runs use no refinement iterations")

    @property
    def total_tokens(self) -> int:
        return sum(s.tokens for s in self.step_log)

    def to_dict(self, timing: bool = True) -> dict[str, Any]:
        return {
            "instance_id": self.instance_id,
            "mode": self.mode,
            "status": self.status,
            "final_design": self.final_design.to_dict() if self.final_design else None,
            "iterations_used": self.iterations_used,
            "verified": self.verified,
            "total_tokens": self.total_tokens,
            "phase_trace": list(self.phase_trace),
            "critiques": list(self.critiques),
            "execution": self.execution,
            "error": self.error,
            "step_log": [s.to_dict(timing) for s in self.step_log],
        }

    def digest(self) -> str:
        """Content hash that ignores wall-clock timings."""
        blob = json.dumps(self.to_dict(timing=False), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def record_from_state(state: PipelineState) -> RunRecord:
    ctx = state.context
    ok = state.phase is Phase.Done
    return RunRecord(
        instance_id=state.instance.instance_id,
        mode="strides",
        status="ok" if ok else "failed",
        final_design=ctx.design if ok else None,
        iterations_used=state.iteration,
        verified=bool(ok and ctx.critique is not None and ctx.critique.passed),
        step_log=tuple(state.log),
        phase_trace=tuple(state.trace),
        critiques=tuple(c.to_dict() for c in ctx.critiques),
        execution=ctx.execution.to_dict() if ctx.execution is not None else None,
        error=state.error,
    )


def run_pipeline(inst: BenchInstance, cfg: PipelineConfig, backend: Backend) -> RunRecord:
    state = PipelineState(inst)
    # Each refinement replays at most every live phase once more.
    budget = (cfg.max_iterations + 1) * len(EDGES) + 1
    try:
        for _ in range(budget):
            if state.phase in TERMINAL:
                break
            step(state, cfg, backend)
        else:
            state.error = "transition budget exhausted"
            _move(state, Phase.Failed)
    except Exception as exc:  # noqa: BLE001 - one broken run must not take down a batch
        state.error = f"{type(exc).__name__}: {exc}"
        state.phase = Phase.Failed
        state.trace.append(Phase.Failed.value)
    return record_from_state(state)


def run_direct_mode(inst: BenchInstance, cfg: PipelineConfig, backend: Backend) -> RunRecord:
    """Single-shot baseline. Off-menu model families are kept and graded as wrong."""
    log: list = []
    design, error = None, None
    try:
        design = run_direct(inst.metadata, cfg.agent(AgentRole.DirectReasoner, inst.instance_id), backend,
                            lenient=True, log=log)
    except StridesError as exc:
        error = str(StepFailed("Direct", exc))
    steps = tuple(
        StepRecord(phase="Direct", iteration=0, role=ex.role, role_tag=ex.role_tag, temperature=ex.temperature,
                   prompt_digest=ex.prompt_digest, response_digest=ex.response_digest,
                   prompt_tokens=ex.prompt_tokens, completion_tokens=ex.completion_tokens,
                   estimated=ex.estimated, repair=ex.repair, duration=ex.duration)
        for ex in log
    )
    return RunRecord(
        instance_id=inst.instance_id,
        mode="direct",
        status="ok" if design is not None else "failed",
        final_design=design,
        iterations_used=0,
        verified=False,
        step_log=steps,
        phase_trace=("Direct", "Done" if design is not None else "Failed"),
        error=error,
    )
