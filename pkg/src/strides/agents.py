"""Prompt rendering and reply parsing for the generative agent roles.

Each ``run_*`` function performs one backend call plus at most one repair
re-ask when the reply cannot be parsed. Errors that carry routing meaning
(an off-menu model family, a column the dataset lacks) are not repaired;
they propagate so the orchestrator can send the run back for refinement.
"""

from __future__ import annotations

import enum
import hashlib
import json
import time
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Callable, Mapping, Sequence

from .backend import Backend, ChatRequest, complete, extract_structured
from .errors import (
    ExtractionError,
    MalformedRecord,
    MissingField,
    ParseFailure,
    PlanError,
    SchemaViolation,
    UnknownModelType,
)
from .estimators.tools import OPTIONAL_ROLES, REQUIRED_ROLES, ToolCall, check_call
from .schema import (
    CausalDesign,
    Hypothesis,
    HypothesisSet,
    ModelType,
    PolicyMetadata,
    design_from_dict,
    flatten_text,
    normalize_model_type,
    parse_controls,
    validate_design,
)
from .simulate import MAX_ROWS, MIN_ROWS, ColumnSchema, SimParams


class AgentRole(str, enum.Enum):
    TheoryArchitect = "TheoryArchitect"
    Methodology = "Methodology"
    DataRetrieval = "DataRetrieval"
    Simulation = "Simulation"
    AnalysisPlanner = "AnalysisPlanner"
    Summary = "Summary"
    CriticLLM = "CriticLLM"
    DirectReasoner = "DirectReasoner"
    Judge = "Judge"


# Logic-bearing roles run greedy; generative roles get some diversity.
DEFAULT_TEMPERATURE = {
    AgentRole.TheoryArchitect: 0.0,
    AgentRole.Methodology: 0.0,
    AgentRole.AnalysisPlanner: 0.0,
    AgentRole.CriticLLM: 0.0,
    AgentRole.Judge: 0.0,
    AgentRole.DataRetrieval: 0.7,
    AgentRole.Simulation: 0.7,
    AgentRole.Summary: 0.7,
    AgentRole.DirectReasoner: 0.7,
}

ROLE_TAGS = {
    AgentRole.TheoryArchitect: "theory",
    AgentRole.Methodology: "methodology",
    AgentRole.DataRetrieval: "retrieval",
    AgentRole.Simulation: "simulation",
    AgentRole.AnalysisPlanner: "planner",
    AgentRole.Summary: "summary",
    AgentRole.CriticLLM: "critic",
    AgentRole.DirectReasoner: "direct",
    AgentRole.Judge: "judge",
}

TEMPLATES = {
    AgentRole.TheoryArchitect: "theory.txt",
    AgentRole.Methodology: "methodology.txt",
    AgentRole.DataRetrieval: "retrieval.txt",
    AgentRole.Simulation: "simulation.txt",
    AgentRole.AnalysisPlanner: "planner.txt",
    AgentRole.Summary: "summary.txt",
    AgentRole.CriticLLM: "critic.txt",
    AgentRole.DirectReasoner: "direct.txt",
    AgentRole.Judge: "judge.txt",
}

PERSONAS = {
    AgentRole.TheoryArchitect: "You are a social scientist who builds theoretical frameworks for policy evaluation.",
    AgentRole.Methodology: "You are an econometrician who chooses identification strategies.",
    AgentRole.DataRetrieval: "You are a data engineer who locates measurable indicators for research variables.",
    AgentRole.Simulation: "You are a simulation scientist who designs synthetic test data.",
    AgentRole.AnalysisPlanner: "You are a statistician who configures estimation tools.",
    AgentRole.Summary: "You are a policy analyst who writes up verified study designs.",
    AgentRole.CriticLLM: "You are an adversarial reviewer of causal inference results.",
    AgentRole.DirectReasoner: "You are a social science researcher specialising in causal inference.",
    AgentRole.Judge: "You grade causal inference designs against a reference answer.",
}

REPAIR_NOTE = (
    "\n\nYour previous reply could not be used ({error}). "
    "Reply again with exactly one valid JSON object following the schema above and nothing else."
)


@dataclass(frozen=True)
class AgentConfig:
    role: AgentRole
    temperature: float | None = None
    knowledge_snippets: tuple[str, ...] = ()
    tag_prefix: str = ""
    max_tokens: int = 4096

    def __post_init__(self):
        object.__setattr__(self, "role", AgentRole(self.role))
        if self.temperature is None:
            object.__setattr__(self, "temperature", DEFAULT_TEMPERATURE[self.role])
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature must lie in [0, 1], got {self.temperature}")
        object.__setattr__(self, "knowledge_snippets", tuple(self.knowledge_snippets))

    @property
    def role_tag(self) -> str:
        tag = ROLE_TAGS[self.role]
        return f"{self.tag_prefix}/{tag}" if self.tag_prefix else tag


@dataclass(frozen=True)
class Exchange:
    """One backend round trip, as logged by the orchestrator."""

    role: str
    role_tag: str
    temperature: float
    prompt_digest: str
    response_digest: str
    prompt_tokens: int
    completion_tokens: int
    estimated: bool
    duration: float
    repair: bool = False

    @property
    def tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files("strides.prompts").joinpath(name).read_text(encoding="utf-8")


def render_prompt(role: AgentRole, **fields: Any) -> str:
    return load_template(TEMPLATES[AgentRole(role)]).format(**fields)


def system_prompt(cfg: AgentConfig) -> str:
    text = PERSONAS[cfg.role]
    if cfg.knowledge_snippets:
        text += "\n\nBackground knowledge:\n" + "\n".join(f"- {s}" for s in cfg.knowledge_snippets)
    return text


# Errors that a repair re-ask may fix. Routing errors are deliberately absent.
_REPAIRABLE = (ExtractionError, MissingField, MalformedRecord, SchemaViolation, ValueError, KeyError, TypeError)


def ask(cfg: AgentConfig, backend: Backend, user_prompt: str, parse: Callable[[str], Any],
        log: list | None = None) -> Any:
    """Send ``user_prompt``; parse the reply, re-asking once with a repair note on failure."""
    system = system_prompt(cfg)

    def exchange(prompt: str, repair: bool) -> str:
        request = ChatRequest(system, prompt, cfg.role_tag, cfg.temperature, cfg.max_tokens)
        start = time.perf_counter()
        response = complete(request, backend)
        if log is not None:
            log.append(Exchange(
                role=cfg.role.value,
                role_tag=cfg.role_tag,
                temperature=cfg.temperature,
                prompt_digest=digest(system + "\n" + prompt),
                response_digest=digest(response.text),
                prompt_tokens=response.prompt_tokens,
                completion_tokens=response.completion_tokens,
                estimated=response.estimated,
                duration=time.perf_counter() - start,
                repair=repair,
            ))
        return response.text

    text = exchange(user_prompt, False)
    try:
        return parse(text)
    except (UnknownModelType, PlanError):
        raise
    except _REPAIRABLE as exc:
        first_error = exc
    text = exchange(user_prompt + REPAIR_NOTE.format(error=_short(first_error)), True)
    try:
        return parse(text)
    except (UnknownModelType, PlanError, SchemaViolation):
        raise
    except _REPAIRABLE as exc:
        raise ParseFailure(cfg.role.value, _short(exc)) from exc


def _short(exc: BaseException) -> str:
    msg = f"{type(exc).__name__}: {exc}"
    return msg if len(msg) <= 200 else msg[:197] + "..."


def _object(text: str) -> dict:
    obj = extract_structured(text)
    if not isinstance(obj, dict):
        raise TypeError("reply is not a JSON object")
    return obj


def _lookup(obj: Mapping[str, Any], *names: str, default: Any = None) -> Any:
    """Case- and separator-insensitive key lookup."""
    norm = {str(k).lower().replace("_", " ").replace("-", " ").strip(): v for k, v in obj.items()}
    for name in names:
        key = name.lower().replace("_", " ").replace("-", " ").strip()
        if key in norm:
            return norm[key]
    return default


def _text(value: Any) -> str:
    return flatten_text(value).strip()


def _optional(value: Any) -> str | None:
    text = _text(value)
    return None if text.lower() in ("", "null", "none", "n/a", "not applicable") else text


# ---------------------------------------------------------------------------
# Theory Architect
# ---------------------------------------------------------------------------


def _direction(raw: Any) -> str:
    word = _text(raw).strip("()[] .").lower()
    if word.startswith("pos"):
        return "Positive"
    if word.startswith("neg"):
        return "Negative"
    raise ValueError(f"expected_direction must be Positive or Negative, got {raw!r}")


def parse_hypotheses(text: str) -> HypothesisSet:
    obj = _object(text)
    items = _lookup(obj, "hypotheses")
    if not isinstance(items, list) or not items:
        raise MissingField("hypotheses")
    hyps = []
    for i, item in enumerate(items):
        if not isinstance(item, Mapping):
            raise TypeError(f"hypothesis {i} is not an object")
        hyps.append(Hypothesis(
            id=_text(_lookup(item, "id")) or f"H{i + 1}",
            statement=_text(_lookup(item, "statement")),
            mechanism=_text(_lookup(item, "mechanism")),
            expected_direction=_direction(_lookup(item, "expected_direction", "direction")),
        ))
    return HypothesisSet(_text(_lookup(obj, "theoretical_framework", default="")), tuple(hyps))


def run_theory_architect(meta: PolicyMetadata, cfg: AgentConfig, backend: Backend,
                         log: list | None = None) -> HypothesisSet:
    prompt = render_prompt(AgentRole.TheoryArchitect, policy_name=meta.policy_name,
                           policy_type=meta.policy_type, region=meta.country_region, aim=meta.aim)
    return ask(cfg, backend, prompt, parse_hypotheses, log)


# ---------------------------------------------------------------------------
# Methodology
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DesignDraft:
    """An identification strategy before it has been tested on mock data."""

    model_name: ModelType
    reason: str
    equation_text: str
    dependent: str
    treatment: str
    controls: tuple[str, ...] = ()
    instrument: str | None = None
    treatment_group: str = ""
    control_group: str = ""
    model_label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "model_name", normalize_model_type(self.model_name))
        object.__setattr__(self, "controls", tuple(self.controls))
        if not self.treatment.strip():
            raise ValueError("draft treatment variable must be non-empty")
        if not self.model_label:
            object.__setattr__(self, "model_label", self.model_name.label)

    def variables(self) -> list[str]:
        names = [self.dependent, self.treatment, *self.controls]
        if self.instrument:
            names.append(self.instrument)
        return [n for n in names if n]

    def to_dict(self) -> dict[str, Any]:
        return {
            "model_selection": {"model_name": self.model_name.value, "reason": self.reason},
            "equation_text": self.equation_text,
            "variables": {"dependent": self.dependent, "treatment": self.treatment,
                          "controls": list(self.controls), "instrument": self.instrument},
            "groups": {"treatment_group": self.treatment_group, "control_group": self.control_group},
        }


def parse_methodology(text: str) -> DesignDraft:
    obj = _object(text)
    sel = _lookup(obj, "model_selection")
    if not isinstance(sel, Mapping):
        raise MissingField("model_selection")
    label = _text(_lookup(sel, "model_name", "model"))
    model = normalize_model_type(label)  # UnknownModelType propagates un-repaired
    econ = _lookup(obj, "econometric_model", default=obj)
    if not isinstance(econ, Mapping):
        raise TypeError("econometric_model is not an object")
    variables = _lookup(econ, "variables_definition", "variables") or _lookup(obj, "variables_definition", "variables")
    if not isinstance(variables, Mapping):
        raise MissingField("variables_definition")
    groups = _lookup(econ, "group_definition", "groups") or _lookup(obj, "group_definition", "groups") or {}
    if not isinstance(groups, Mapping):
        raise TypeError("group_definition is not an object")
    return DesignDraft(
        model_name=model,
        model_label=label,
        reason=_text(_lookup(sel, "reason", default="")),
        equation_text=_text(_lookup(econ, "equation_latex", "equation", default="")),
        dependent=_text(_lookup(variables, "Y", "dependent", "outcome", default="")),
        treatment=_text(_lookup(variables, "Treatment", "independent", default="")),
        controls=parse_controls(_lookup(variables, "Controls")),
        instrument=_optional(_lookup(variables, "Instrumental_Variable", "instrument")),
        treatment_group=_text(_lookup(groups, "Treatment_Group", "treatment", default="")),
        control_group=_text(_lookup(groups, "Control_Group", "control", default="")),
    )


def format_hypotheses(hyp: HypothesisSet) -> str:
    return json.dumps(hyp.to_dict(), ensure_ascii=False)


def run_methodology(hyp: HypothesisSet, meta: PolicyMetadata, cfg: AgentConfig, backend: Backend,
                    feedback: str = "", log: list | None = None) -> DesignDraft:
    note = f"\nReviewer feedback on the previous design:\n{feedback}\n" if feedback else ""
    prompt = render_prompt(AgentRole.Methodology, policy_name=meta.policy_name,
                           impl_time=meta.implementation_time, region=meta.country_region,
                           hypotheses=format_hypotheses(hyp), feedback=note)
    return ask(cfg, backend, prompt, parse_methodology, log)


# ---------------------------------------------------------------------------
# Data Retrieval
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VariableSource:
    source: str
    proxy_if_needed: str | None = None
    backfilled: bool = False


@dataclass(frozen=True)
class VariableMapping:
    entries: Mapping[str, VariableSource]

    @property
    def backfilled(self) -> list[str]:
        return [name for name, src in self.entries.items() if src.backfilled]

    def to_dict(self) -> dict[str, Any]:
        return {name: {"source": s.source, "proxy_if_needed": s.proxy_if_needed, "backfilled": s.backfilled}
                for name, s in self.entries.items()}


def parse_variable_mapping(text: str, draft: DesignDraft) -> VariableMapping:
    obj = _object(text)
    raw = _lookup(obj, "variable_mapping", default=None)
    if not isinstance(raw, Mapping):
        raise MissingField("variable_mapping")
    given = {}
    for name, value in raw.items():
        if isinstance(value, Mapping):
            given[str(name)] = VariableSource(_text(_lookup(value, "source", default="")),
                                              _optional(_lookup(value, "proxy_if_needed", "proxy")))
        else:
            given[str(name)] = VariableSource(_text(value))
    by_norm = {" ".join(k.lower().split()): k for k in given}
    entries: dict[str, VariableSource] = {}
    used = set()
    for var in draft.variables():
        key = by_norm.get(" ".join(var.lower().split()))
        if key is None:
            entries[var] = VariableSource("", "unspecified", backfilled=True)
        else:
            entries[var] = given[key]
            used.add(key)
    for name, src in given.items():
        if name not in used:
            entries.setdefault(name, src)
    return VariableMapping(entries)


def run_data_retrieval(draft: DesignDraft, cfg: AgentConfig, backend: Backend,
                       log: list | None = None) -> VariableMapping:
    prompt = render_prompt(AgentRole.DataRetrieval, results=json.dumps(draft.to_dict(), ensure_ascii=False))
    return ask(cfg, backend, prompt, lambda t: parse_variable_mapping(t, draft), log)


# ---------------------------------------------------------------------------
# Simulation parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationSpec:
    family: ModelType
    params: SimParams
    adjustments: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        from dataclasses import asdict

        return {"family": self.family.value, "params": asdict(self.params), "adjustments": list(self.adjustments)}


_SIM_FIELDS = {f for f in SimParams.__dataclass_fields__}


def parse_simulation(text: str, draft: DesignDraft, hyp: HypothesisSet) -> SimulationSpec:
    """Turn the agent's parameter choice into a SimParams for the draft's family.

    The family always follows the draft and the effect sign always follows
    the first hypothesis; row counts are clamped into the allowed band.
    Every such override is recorded in ``adjustments``.
    """
    obj = _object(text)
    notes = []
    family = draft.model_name
    claimed = _lookup(obj, "family")
    if claimed is not None and _text(claimed):
        try:
            if normalize_model_type(_text(claimed)) is not family:
                notes.append(f"family {claimed!r} replaced by design family {family.value}")
        except UnknownModelType:
            notes.append(f"unknown family {claimed!r} replaced by design family {family.value}")

    values: dict[str, Any] = {}
    defaults = SimParams()
    for key, raw in obj.items():
        name = str(key).strip()
        if name not in _SIM_FIELDS or name in ("direction", "family"):
            continue
        kind = type(getattr(defaults, name))
        values[name] = bool(raw) if kind is bool else kind(raw)

    direction = hyp.hypotheses[0].expected_direction
    effect = abs(float(values.get("true_effect", defaults.true_effect)))
    if _lookup(obj, "direction") is not None and _direction(_lookup(obj, "direction")) != direction:
        notes.append(f"direction forced to {direction} by the hypotheses")
    values["true_effect"] = effect if direction == "Positive" else -effect
    values["direction"] = direction
    if values.get("noise_sd", 0.0) < 0:
        raise ValueError("noise_sd must be nonnegative")

    rows = int(values.get("n_rows", defaults.n_rows))
    if not MIN_ROWS <= rows <= MAX_ROWS:
        notes.append(f"n_rows {rows} clamped into [{MIN_ROWS}, {MAX_ROWS}]")
        rows = min(MAX_ROWS, max(MIN_ROWS, rows))
    values["n_rows"] = rows
    if family is ModelType.DiD and "n_units" not in values:
        periods = int(values.get("n_periods", defaults.n_periods))
        values["n_units"] = max(4, rows // max(periods, 1))
    return SimulationSpec(family, SimParams(**values), tuple(notes))


def run_simulation_params(draft: DesignDraft, hyp: HypothesisSet, cfg: AgentConfig, backend: Backend,
                          error_context: str = "", log: list | None = None) -> SimulationSpec:
    prompt = render_prompt(AgentRole.Simulation, design=json.dumps(draft.to_dict(), ensure_ascii=False),
                           hypotheses=format_hypotheses(hyp), error_context=error_context)
    return ask(cfg, backend, prompt, lambda t: parse_simulation(t, draft, hyp), log)


# ---------------------------------------------------------------------------
# Analysis planner
# ---------------------------------------------------------------------------


def parse_tool_call(text: str, draft: DesignDraft, schema: ColumnSchema) -> ToolCall:
    obj = _object(text)
    column_map = _lookup(obj, "column_map", "columns")
    if not isinstance(column_map, Mapping):
        raise MissingField("column_map")
    options = _lookup(obj, "options", default={}) or {}
    if not isinstance(options, Mapping):
        raise TypeError("options is not an object")
    call = ToolCall(draft.model_name, dict(column_map), dict(options))
    check_call(call, schema.names)  # ColumnMiss / RoleMissing propagate for routing
    return call


def run_plan_analysis(draft: DesignDraft, schema: ColumnSchema, cfg: AgentConfig, backend: Backend,
                      error_context: str = "", log: list | None = None) -> ToolCall:
    tool = draft.model_name
    prompt = render_prompt(
        AgentRole.AnalysisPlanner,
        methodology=json.dumps(draft.to_dict(), ensure_ascii=False),
        columns=json.dumps(schema.to_dict()),
        tool=tool.value,
        required_roles=", ".join(REQUIRED_ROLES[tool]),
        optional_roles=", ".join(OPTIONAL_ROLES[tool]) or "none",
        error_context=error_context,
    )
    return ask(cfg, backend, prompt, lambda t: parse_tool_call(t, draft, schema), log)


plan_analysis = run_plan_analysis


# ---------------------------------------------------------------------------
# Summary and direct reasoning
# ---------------------------------------------------------------------------


@dataclass
class SummaryContext:
    """What the Summary agent sees. ``critique`` is a critic report or None."""

    meta: PolicyMetadata
    draft: DesignDraft | None = None
    execution: Any = None
    critique: Any = None
    verified: bool = False
    terminal_failure: str | None = None
    findings: Sequence[str] = field(default_factory=tuple)


UNVERIFIED_MARK = "[unverified]"


def _mentions(text: str | None, phrase: str) -> bool:
    return bool(text) and phrase.lower() in text.lower()


def finalize_design(design: CausalDesign, ctx: SummaryContext) -> CausalDesign:
    """Align a summary reply with the pipeline state it summarises."""
    changes: dict[str, Any] = {}
    draft = ctx.draft
    if draft is not None:
        changes["model_type"] = draft.model_name
        changes["model_label"] = draft.model_name.label
        if not design.core_independent_variable.strip():
            changes["core_independent_variable"] = draft.treatment
        if not design.dependent_variable.strip():
            changes["dependent_variable"] = draft.dependent
        if not design.control_variables and draft.controls:
            changes["control_variables"] = draft.controls
        if draft.model_name is ModelType.IV and not design.instrumental_variable:
            changes["instrumental_variable"] = draft.instrument
        if draft.model_name is not ModelType.IV:
            changes["instrumental_variable"] = None
        if not design.group.treatment.strip() and draft.treatment_group:
            from .schema import Group

            changes["group"] = Group(draft.treatment_group, draft.control_group or design.group.control)

    seen, controls = set(), []
    for c in changes.get("control_variables", design.control_variables):
        key = " ".join(c.split()).lower()
        if key not in seen:
            seen.add(key)
            controls.append(c)
    changes["control_variables"] = tuple(controls)

    explanation = design.explanation or ""
    significance = design.model_significance
    missing = [f for f in ctx.findings if not (_mentions(explanation, f) or _mentions(significance, f))]
    if missing:
        note = "Critic findings: " + "; ".join(missing) + "."
        explanation = f"{explanation.rstrip()}\n{note}" if explanation.strip() else note
    changes["explanation"] = explanation or None
    if not ctx.verified and not _mentions(significance, UNVERIFIED_MARK):
        significance = f"{UNVERIFIED_MARK} {significance}" if significance else UNVERIFIED_MARK
    changes["model_significance"] = significance
    return design.replace(**changes)


# Violations that leave a design ungradeable; the rest are tolerated.
FATAL_VIOLATIONS = ("empty-dependent-variable", "empty-treatment-group", "empty-control-group", "iv-required")


def _checked(design: CausalDesign) -> CausalDesign:
    fatal = [v for v in validate_design(design) if v in FATAL_VIOLATIONS]
    if fatal:
        raise SchemaViolation(fatal)
    return design


def parse_summary(text: str, ctx: SummaryContext) -> CausalDesign:
    design = design_from_dict(_object(text), strict=ctx.draft is None)
    return _checked(finalize_design(design, ctx))


def _critique_fields(ctx: SummaryContext) -> dict[str, str]:
    c = ctx.critique
    if c is None:
        return {"critic_pass": "n/a", "critic_critique": ctx.terminal_failure or "none",
                "critic_suggestion": "none", "critic_findings": ", ".join(ctx.findings) or "none"}
    return {
        "critic_pass": "true" if c.passed else "false",
        "critic_critique": c.critique_text or "none",
        "critic_suggestion": c.suggestion_text or "none",
        "critic_findings": ", ".join(ctx.findings) or "none",
    }


def run_summary(ctx: SummaryContext, cfg: AgentConfig, backend: Backend, log: list | None = None) -> CausalDesign:
    results = ctx.execution.to_dict() if ctx.execution is not None else {"failure": ctx.terminal_failure}
    prompt = render_prompt(
        AgentRole.Summary,
        meta=json.dumps(ctx.meta.to_dict(), ensure_ascii=False),
        methodology=json.dumps(ctx.draft.to_dict(), ensure_ascii=False) if ctx.draft else "none",
        results=json.dumps(results, ensure_ascii=False, default=str),
        **_critique_fields(ctx),
    )
    return ask(cfg, backend, prompt, lambda t: parse_summary(t, ctx), log)


def parse_direct(text: str, lenient: bool = False) -> CausalDesign:
    design = design_from_dict(_object(text), strict=not lenient)
    if design.model_type is None:
        return design
    return _checked(design)


def run_direct(meta: PolicyMetadata, cfg: AgentConfig, backend: Backend, lenient: bool = False,
               log: list | None = None) -> CausalDesign:
    """Single-shot design. Off-menu model families raise unless ``lenient``."""
    prompt = render_prompt(
        AgentRole.DirectReasoner,
        policy_name=meta.policy_name, policy_type=meta.policy_type, country_region=meta.country_region,
        observed_period=meta.observed_period, implementation_time=meta.implementation_time,
        aim=meta.aim, dataset=meta.dataset_description,
    )
    return ask(cfg, backend, prompt, lambda t: parse_direct(t, lenient), log)
