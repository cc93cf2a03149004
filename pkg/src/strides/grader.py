"""Rubric scoring of predicted designs and corpus-level aggregation.

Scores follow a 45-point rubric over seven components. Lexical mode decides
semantic matches by token overlap against the reference; judge mode asks a
model for those decisions but recomputes every total and gate locally.
"""

from __future__ import annotations

import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .agents import AgentConfig, AgentRole, ask, render_prompt
from .backend import Backend, extract_structured
from .errors import EmptyInput, JudgeParseFailure, StridesError
from .schema import CausalDesign, ModelType

MAX_POINTS = 45
FULL_MATCH = 0.8
PARTIAL_MATCH = 0.4

ALLOWED = {
    "model_type_score": (0, 10),
    "core_iv_score": (0, 5, 10),
    "group_score": (0, 5, 10),
    "control_var_score": (0, 2, 5),
    "dependent_var_score": (0, 5),
    "reasoning_score": (0, 2),
    "explanation_score": (0, 3),
}
COMPONENTS = tuple(ALLOWED)
COMPONENT_MAX = {k: max(v) for k, v in ALLOWED.items()}

# Report columns, in order, with the breakdown field each one averages.
METRIC_COLUMNS = (
    ("Final Score", None),
    ("Model Type", "model_type_score"),
    ("Core IV", "core_iv_score"),
    ("Group Def", "group_score"),
    ("Controls", "control_var_score"),
    ("Dep Var", "dependent_var_score"),
    ("Reasoning", "reasoning_score"),
    ("Explanation", "explanation_score"),
)
METRIC_KEYS = ("final_score", "model_type", "core_iv", "group_def", "controls", "dep_var", "reasoning", "explanation")


@dataclass(frozen=True)
class ScoreBreakdown:
    model_type_score: int = 0
    core_iv_score: int = 0
    group_score: int = 0
    control_var_score: int = 0
    dependent_var_score: int = 0
    reasoning_score: int = 0
    explanation_score: int = 0
    comments: str = ""
    mode: str = "lexical"
    fallback: bool = False

    def __post_init__(self):
        for name, allowed in ALLOWED.items():
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.reasoning_score > 0 and self.model_type_score != 10:
            raise ValueError("reasoning can only score when the model type is correct")

    @classmethod
    def build(cls, **scores) -> ScoreBreakdown:
        """Construct with the reasoning gate applied rather than checked."""
        if scores.get("model_type_score", 0) != 10:
            scores["reasoning_score"] = 0
        return cls(**scores)

    @property
    def total(self) -> int:
        return sum(getattr(self, name) for name in COMPONENTS)

    @property
    def normalized(self) -> float:
        return self.total / MAX_POINTS

    def to_dict(self) -> dict[str, Any]:
        out = {name: getattr(self, name) for name in COMPONENTS}
        out.update(total=self.total, normalized=self.normalized, comments=self.comments,
                   mode=self.mode, fallback=self.fallback)
        return out


ZERO = ScoreBreakdown()


# ---------------------------------------------------------------------------
# Lexical matching
# ---------------------------------------------------------------------------

_STOPWORDS = frozenset("""
a an and are as at be by for from in into is it its of on or per the their this to with within which
that these those than such e g eg i ie etc each all any other others using used use via over under
level levels rate ratio share index measured measure proxy proxied variable variables total number
""".split())

# Phrase and abbreviation aliases applied before tokenisation.
_PHRASES = (
    ("gross domestic product", "gdp"),
    ("research and development", "rd"),
    ("r&d", "rd"),
    ("foreign direct investment", "fdi"),
    ("intellectual property rights", "ipr"),
    ("intellectual property", "ipr"),
    ("science and technology", "st"),
    ("s&t", "st"),
    ("difference-in-differences", "did"),
    ("difference in differences", "did"),
)
_ABBREVIATIONS = {
    "gov": "government", "govt": "government", "fin": "financial", "finance": "financial",
    "urb": "urbanization", "urbanisation": "urbanization", "urban": "urbanization",
    "con": "consumption", "indus": "industrial", "industry": "industrial",
    "edu": "education", "educational": "education", "pop": "population",
    "economy": "economic", "innovation": "innovative",
}
_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _stem(word: str) -> str:
    if len(word) > 4 and word.endswith("ies"):
        return word[:-3] + "y"
    if len(word) > 3 and word.endswith("s") and not word.endswith("ss"):
        return word[:-1]
    return word


def tokens(text: str | None) -> set[str]:
    if not text:
        return set()
    low = text.lower()
    for phrase, repl in _PHRASES:
        low = low.replace(phrase, f" {repl} ")
    out = set()
    for tok in _TOKEN_RE.findall(low):
        if tok in _STOPWORDS:
            continue
        tok = _ABBREVIATIONS.get(tok, tok)
        out.add(_stem(tok))
    return out


def overlap(reference: str | None, candidate: str | None) -> float:
    """Fraction of the reference's content tokens that appear in the candidate."""
    ref = tokens(reference)
    if not ref:
        return 0.0
    return len(ref & tokens(candidate)) / len(ref)


def _head(text: str) -> str:
    """The label part of "name: description" or the first clause of a sentence."""
    for sep in (":", ";", "\n", ". ", ","):
        if sep in text:
            head = text.split(sep, 1)[0].strip()
            if tokens(head):
                return head
    return text


def match_strength(reference: str | None, candidate: str | None) -> float:
    if not reference:
        return 0.0
    return max(overlap(reference, candidate), overlap(_head(reference), candidate))


def _tier(strength: float, full: int, partial: int) -> int:
    if strength >= FULL_MATCH:
        return full
    if strength >= PARTIAL_MATCH:
        return partial
    return 0


def _control_candidates(ctrl: str) -> list[str]:
    cands = [ctrl]
    if ":" in ctrl:
        name, desc = ctrl.split(":", 1)
        cands += [name, _head(desc.strip())]
    return [c for c in cands if tokens(c)]


def control_coverage(reference: Sequence[str], predicted: Sequence[str]) -> float:
    """Share of reference controls matched by at least one predicted control."""
    if not reference:
        return 0.0
    hits = 0
    for ctrl in reference:
        if any(overlap(c, p) >= FULL_MATCH for c in _control_candidates(ctrl) for p in predicted):
            hits += 1
    return hits / len(reference)


def control_score(coverage: float) -> int:
    if coverage > 0.5:
        return 5
    if coverage > 0:
        return 2
    return 0


_POSITIVE = frozenset("positive positively increase increases increased enhance enhances enhanced improve improves "
                      "improved raise raises raised boost boosts promote promotes promoted strengthen strengthens "
                      "higher gain gains".split())
_NEGATIVE = frozenset("negative negatively decrease decreases decreased reduce reduces reduced lower lowers lowered "
                      "decline declines declined harm harms inhibit inhibits suppress suppresses weaken weakens "
                      "worsen worsens loss".split())


def direction_of(text: str | None) -> int:
    if not text:
        return 0
    words = _TOKEN_RE.findall(text.lower())
    pos = sum(w in _POSITIVE for w in words)
    neg = sum(w in _NEGATIVE for w in words)
    return (pos > neg) - (neg > pos)


def _narrative(design: CausalDesign) -> str:
    return " ".join(t for t in (design.model_significance, design.explanation) if t)


def model_type_score(pred: CausalDesign, gt: CausalDesign) -> int:
    return 10 if pred.model_type is not None and pred.model_type is gt.model_type else 0


def _lexical(pred: CausalDesign, gt: CausalDesign) -> dict[str, int]:
    mt = model_type_score(pred, gt)
    t_match = match_strength(gt.group.treatment, pred.group.treatment)
    c_match = match_strength(gt.group.control, pred.group.control)
    if min(t_match, c_match) >= FULL_MATCH:
        group = 10
    elif (t_match + c_match) / 2 >= PARTIAL_MATCH:
        group = 5
    else:
        group = 0
    gt_dir, pred_dir = direction_of(_narrative(gt)), direction_of(_narrative(pred))
    if gt_dir and pred_dir:
        expl = 3 if gt_dir == pred_dir else 0
    else:
        expl = 3 if match_strength(_narrative(gt), _narrative(pred)) >= PARTIAL_MATCH else 0
    return {
        "model_type_score": mt,
        "core_iv_score": _tier(match_strength(gt.core_independent_variable, pred.core_independent_variable), 10, 5),
        "group_score": group,
        "control_var_score": control_score(control_coverage(gt.control_variables, pred.control_variables)),
        "dependent_var_score": 5 if match_strength(gt.dependent_variable, pred.dependent_variable) >= FULL_MATCH else 0,
        "reasoning_score": 2 if mt == 10 and (pred.reasons or "").strip() else 0,
        "explanation_score": expl,
    }


# ---------------------------------------------------------------------------
# Grading
# ---------------------------------------------------------------------------


def _judge_scores(text: str) -> tuple[dict[str, int], str]:
    try:
        obj = extract_structured(text)
    except StridesError as exc:
        raise JudgeParseFailure(str(exc)) from exc
    breakdown = obj.get("breakdown") if isinstance(obj, dict) else None
    if not isinstance(breakdown, dict):
        raise JudgeParseFailure("reply has no breakdown object")
    scores = {}
    for name, allowed in ALLOWED.items():
        try:
            value = int(breakdown[name])
        except (KeyError, TypeError, ValueError):
            raise JudgeParseFailure(f"missing or non-integer {name}") from None
        if value not in allowed:
            raise JudgeParseFailure(f"{name}={value} is not one of {allowed}")
        scores[name] = value
    return scores, str(obj.get("comments") or "")


def grade(pred: CausalDesign | None, gt: CausalDesign, mode: str = "lexical", backend: Backend | None = None,
          cfg: AgentConfig | None = None, log: list | None = None) -> ScoreBreakdown:
    """Score ``pred`` against ``gt``. A missing prediction scores zero everywhere."""
    if mode not in ("lexical", "judge"):
        raise ValueError(f"unknown grading mode {mode!r}")
    if pred is None:
        return ScoreBreakdown(comments="no prediction (run failed)", mode=mode)
    lexical = _lexical(pred, gt)
    if mode == "lexical":
        return ScoreBreakdown.build(**lexical, mode="lexical")
    if backend is None:
        raise ValueError("judge mode requires a backend")

    cfg = cfg or AgentConfig(AgentRole.Judge)
    prompt = render_prompt(AgentRole.Judge, reference=json.dumps(gt.to_dict(), ensure_ascii=False),
                           prediction=json.dumps(pred.to_dict(), ensure_ascii=False))
    try:
        scores, comments = ask(cfg, backend, prompt, _judge_scores_strict, log)
    except (JudgeParseFailure, StridesError) as exc:
        return ScoreBreakdown.build(**lexical, mode="judge", fallback=True,
                                    comments=f"judge unusable ({type(exc).__name__}); lexical scores used")
    # The model-type decision and every gate stay local.
    scores["model_type_score"] = lexical["model_type_score"]
    return ScoreBreakdown.build(**scores, mode="judge", comments=comments)


def _judge_scores_strict(text: str):
    try:
        return _judge_scores(text)
    except JudgeParseFailure as exc:
        # Surface as a repairable error so the judge gets one re-ask.
        raise ValueError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def improve_pct(direct: float, strides: float) -> float:
    return (strides - direct) / direct * 100.0


FAMILIES = tuple(ModelType)


@dataclass(frozen=True)
class ReportTable:
    rows: Mapping[str, Mapping[str, float]]
    counts: Mapping[str, int]
    improve: Mapping[str, float] = field(default_factory=dict)
    confusion: Mapping[str, list[list[int]]] = field(default_factory=dict)
    unclassified: Mapping[str, list[int]] = field(default_factory=dict)
    per_method: Mapping[str, Mapping[str, float | None]] = field(default_factory=dict)
    per_domain: Mapping[str, Mapping[str, Mapping[str, float]]] = field(default_factory=dict)
    failed_runs: Mapping[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "metrics": list(METRIC_KEYS),
            "rows": {k: dict(v) for k, v in self.rows.items()},
            "counts": dict(self.counts),
            "improve_pct": dict(self.improve),
            "confusion": {
                "families": [f.value for f in FAMILIES],
                **{k: {"matrix": v, "unclassified": self.unclassified[k]} for k, v in self.confusion.items()},
            },
            "per_method_accuracy": {k: dict(v) for k, v in self.per_method.items()},
            "per_domain": {k: {d: dict(m) for d, m in v.items()} for k, v in self.per_domain.items()},
            "failed_runs": dict(self.failed_runs),
        }


def _config_order(names: Iterable[str]) -> list[str]:
    preferred = ["direct", "strides"]
    names = set(names)
    return [n for n in preferred if n in names] + sorted(names - set(preferred))


def aggregate(records: Sequence[tuple[Any, ScoreBreakdown, Any]]) -> ReportTable:
    """Means per configuration (the run's ``mode``), confusion and accuracy tables."""
    if not records:
        raise EmptyInput("no graded records to aggregate")
    by_config: dict[str, list] = defaultdict(list)
    for run, score, inst in records:
        by_config[run.mode].append((run, score, inst))

    rows, counts, confusion, unclassified, per_method, per_domain, failed = {}, {}, {}, {}, {}, {}, {}
    index = {f: i for i, f in enumerate(FAMILIES)}
    for config in _config_order(by_config):
        items = by_config[config]
        n = len(items)
        row = {"final_score": sum(s.normalized for _, s, _ in items) / n}
        for key, (_, field_name) in zip(METRIC_KEYS[1:], METRIC_COLUMNS[1:]):
            row[key] = sum(getattr(s, field_name) / COMPONENT_MAX[field_name] for _, s, _ in items) / n
        rows[config], counts[config] = row, n
        failed[config] = sum(1 for r, _, _ in items if getattr(r, "status", "ok") != "ok")

        matrix = [[0] * len(FAMILIES) for _ in FAMILIES]
        missing = [0] * len(FAMILIES)
        hits: Counter = Counter()
        totals: Counter = Counter()
        domains: dict[str, list] = defaultdict(list)
        for run, score, inst in items:
            truth = inst.ground_truth.model_type
            design = run.final_design
            predicted = design.model_type if design is not None else None
            domain = inst.metadata.policy_type or "unspecified"
            domains[domain].append((score, predicted is truth))
            if truth is None:
                continue
            totals[truth] += 1
            if predicted is None:
                missing[index[truth]] += 1
            else:
                matrix[index[truth]][index[predicted]] += 1
                hits[truth] += predicted is truth
        confusion[config], unclassified[config] = matrix, missing
        per_method[config] = {f.value: (hits[f] / totals[f] if totals[f] else None) for f in FAMILIES}
        per_domain[config] = {
            d: {"n": len(v), "final_score": sum(s.normalized for s, _ in v) / len(v),
                "model_type_accuracy": sum(ok for _, ok in v) / len(v)}
            for d, v in sorted(domains.items())
        }

    improve = {}
    if "direct" in rows and "strides" in rows and rows["direct"]["final_score"] > 0:
        improve["strides_vs_direct"] = improve_pct(rows["direct"]["final_score"], rows["strides"]["final_score"])
    return ReportTable(rows, counts, improve, confusion, unclassified, per_method, per_domain, failed)


def render_text(report: ReportTable) -> str:
    headers = ["Configuration", "N"] + [name for name, _ in METRIC_COLUMNS]
    widths = [max(13, max((len(k) for k in report.rows), default=0)), 4] + [max(6, len(h)) for h, _ in METRIC_COLUMNS]
    lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(headers, widths)))]
    lines.append("  ".join("-" * w for w in widths))
    for config, row in report.rows.items():
        cells = [config.ljust(widths[0]), str(report.counts[config]).rjust(widths[1])]
        cells += [f"{row[k]:.3f}".rjust(w) for k, w in zip(METRIC_KEYS, widths[2:])]
        lines.append("  ".join(cells))
    for name, value in report.improve.items():
        left, right = name.split("_vs_")
        lines.append(f"Improve ({left} vs {right}): {format_improve(value)}")
    return "\n".join(lines) + "\n"


def format_improve(value: float) -> str:
    return f"{value:+.1f}%"


def render_json(report: ReportTable) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
