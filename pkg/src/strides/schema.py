"""Domain records, their canonical line-delimited JSON form, and validation.

Serialized field names follow the benchmark's published record layout
("Policy name", "Model type", "Core independent variable", ...), so
benchmark files load without a conversion step.
"""

from __future__ import annotations

import enum
import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import MalformedRecord, MissingField, UnknownModelType


class ModelType(str, enum.Enum):
    DiD = "DiD"
    IV = "IV"
    RD = "RD"
    SCM = "SCM"
    PSM = "PSM"

    @property
    def label(self) -> str:
        return _CANONICAL_LABELS[self]


_CANONICAL_LABELS = {
    ModelType.DiD: "Difference-in-Differences (DiD)",
    ModelType.IV: "Instrumental Variables (IV)",
    ModelType.RD: "Regression Discontinuity (RD)",
    ModelType.SCM: "Synthetic Control Method (SCM)",
    ModelType.PSM: "Propensity Score Matching (PSM)",
}

_ALIASES = {
    ModelType.DiD: [
        "did", "dd", "diff in diff", "diff in diffs", "difference in difference",
        "difference in differences", "differences in differences",
        "difference in differences did",
    ],
    ModelType.IV: [
        "iv", "ivs", "instrumental variable", "instrumental variables",
        "two stage least squares", "2sls", "tsls", "iv 2sls", "2sls iv",
        "instrumental variable regression", "instrumental variables regression",
    ],
    ModelType.RD: [
        "rd", "rdd", "regression discontinuity", "regression discontinuity design",
        "sharp rd", "sharp rdd", "sharp regression discontinuity",
        "fuzzy rd", "fuzzy rdd", "fuzzy regression discontinuity",
    ],
    ModelType.SCM: [
        "scm", "synthetic control", "synthetic controls", "synthetic control method",
        "synthetic control methods",
    ],
    ModelType.PSM: [
        "psm", "propensity score matching", "propensity score match",
        "propensity scores matching",
    ],
}


def _norm_label(text: str) -> str:
    text = text.lower().replace("&", " and ")
    return " ".join(re.sub(r"[^a-z0-9]+", " ", text).split())


_ALIAS_TABLE = {_norm_label(a): mt for mt, aliases in _ALIASES.items() for a in aliases}
_ALIAS_TABLE.update({_norm_label(lbl): mt for mt, lbl in _CANONICAL_LABELS.items()})


def _lookup(fragments: Iterable[str]) -> ModelType | None:
    found = set()
    for frag in fragments:
        key = _norm_label(frag)
        if not key:
            continue
        if key not in _ALIAS_TABLE:
            return None
        found.add(_ALIAS_TABLE[key])
    return found.pop() if len(found) == 1 else None


def normalize_model_type(label: str) -> ModelType:
    """Map a surface form ("2SLS", "Regression Discontinuity (RD)", "did") to its family.

    A label is accepted only when every fragment of it (the text outside
    parentheses, each parenthetical, and each ``/``-separated alternative)
    names the same family.
    """
    if isinstance(label, ModelType):
        return label
    if not label or not label.strip():
        raise UnknownModelType(label)
    key = _norm_label(label)
    if key in _ALIAS_TABLE:
        return _ALIAS_TABLE[key]
    outer = re.sub(r"\([^)]*\)", " ", label)
    inner = re.findall(r"\(([^)]*)\)", label)
    parts = [p for chunk in [outer, *inner] for p in re.split(r"/|\bor\b", chunk)]
    found = _lookup(parts)
    if found is None:
        raise UnknownModelType(label)
    return found


def try_model_type(label: str | None) -> ModelType | None:
    try:
        return normalize_model_type(label or "")
    except UnknownModelType:
        return None


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

META_KEYS = {
    "policy_name": "Policy name",
    "policy_type": "Policy type",
    "country_region": "Country/Region",
    "observed_period": "Observed period",
    "implementation_time": "Implementation time",
    "aim": "Aim",
    "dataset_description": "Dataset",
}

DESIGN_KEYS = {
    "model_type": "Model type",
    "reasons": "Reasons for choosing this model",
    "core_independent_variable": "Core independent variable",
    "control_variables": "Control variables",
    "instrumental_variable": "Instrumental variable",
    "group": "Group",
    "model_significance": "Model Significance",
    "dependent_variable": "Dependent variable",
    "explanation": "Explanation",
}

REQUIRED_META = ("policy_name", "aim")
REQUIRED_DESIGN = ("model_type", "core_independent_variable", "dependent_variable", "group")

_ABSENT_MARKERS = {"", "null", "none", "n/a", "na", "not applicable", "not available", "-"}


@dataclass(frozen=True)
class PolicyMetadata:
    policy_name: str
    aim: str
    policy_type: str = ""
    country_region: str = ""
    observed_period: str = ""
    implementation_time: str = ""
    dataset_description: str = ""

    def __post_init__(self):
        if not self.policy_name.strip():
            raise ValueError("policy_name must be non-empty")
        if not self.aim.strip():
            raise ValueError("aim must be non-empty")

    def to_dict(self) -> dict[str, str]:
        return {key: getattr(self, attr) for attr, key in META_KEYS.items()}

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> PolicyMetadata:
        values = {}
        for attr, key in META_KEYS.items():
            if key in raw and raw[key] is not None:
                values[attr] = flatten_text(raw[key])
            elif attr in REQUIRED_META:
                raise MissingField(key)
        for attr in REQUIRED_META:
            if not values[attr].strip():
                raise MissingField(META_KEYS[attr])
        return cls(**values)


@dataclass(frozen=True)
class Group:
    treatment: str
    control: str

    def render(self) -> str:
        return f"Treatment: {self.treatment}; Control: {self.control}"

    def to_value(self) -> str | dict[str, str]:
        """Serialized form: one text when both sides coincide, else an object."""
        if self.treatment == self.control and parse_group(self.treatment) == self:
            return self.treatment
        return {"Treatment": self.treatment, "Control": self.control}


_GROUP_RE = re.compile(
    r"^\s*treatment(?:\s+group)?\s*:\s*(?P<t>.*?)\s*(?:;|\n|\s)\s*control(?:\s+group)?\s*:\s*(?P<c>.*?)\s*$",
    re.IGNORECASE | re.DOTALL,
)


def parse_group(raw: Any) -> Group:
    """Accept "Treatment: ...; Control: ..." text or an object with treatment/control keys.

    Descriptions that cannot be split (e.g. continuous-treatment designs with
    no binary groups) are kept whole on both sides.
    """
    if isinstance(raw, Group):
        return raw
    if isinstance(raw, Mapping):
        lowered = {str(k).lower().replace("_", " ").strip(): v for k, v in raw.items()}
        t = lowered.get("treatment", lowered.get("treatment group"))
        c = lowered.get("control", lowered.get("control group"))
        if t is not None and c is not None:
            return Group(flatten_text(t), flatten_text(c))
        text = flatten_text(raw)
        return Group(text, text)
    raw_text = flatten_text(raw)
    text = raw_text.strip()
    if text.startswith("Treatment: ") and "; Control: " in text:
        t, c = text[len("Treatment: "):].split("; Control: ", 1)
        return Group(t, c)
    m = _GROUP_RE.match(text)
    if m:
        return Group(m.group("t").strip(), m.group("c").strip())
    return Group(raw_text, raw_text)


@dataclass(frozen=True)
class CausalDesign:
    """A study design: method family, variables, groups, and interpretation.

    ``model_label`` keeps the surface form the design was written with;
    ``model_type`` is its family, or ``None`` when the label names something
    outside the five supported families.
    """

    model_type: ModelType | None
    core_independent_variable: str
    dependent_variable: str
    group: Group
    control_variables: tuple[str, ...] = ()
    instrumental_variable: str | None = None
    reasons: str | None = None
    model_significance: str | None = None
    explanation: str | None = None
    model_label: str = ""

    def __post_init__(self):
        if not self.model_label:
            object.__setattr__(self, "model_label", self.model_type.label if self.model_type else "")
        object.__setattr__(self, "control_variables", tuple(self.control_variables))

    def to_dict(self) -> dict[str, Any]:
        return {
            "Model type": self.model_label,
            "Reasons for choosing this model": self.reasons,
            "Core independent variable": self.core_independent_variable,
            "Control variables": list(self.control_variables),
            "Instrumental variable": self.instrumental_variable,
            "Group": self.group.to_value(),
            "Model Significance": self.model_significance,
            "Dependent variable": self.dependent_variable,
            "Explanation": self.explanation,
        }

    def replace(self, **changes) -> CausalDesign:
        from dataclasses import replace

        return replace(self, **changes)


def flatten_text(value: Any) -> str:
    """Render nested benchmark values (objects, lists) as plain text."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, Mapping):
        if set(value) <= {"name", "description"} and "name" in value:
            name = flatten_text(value.get("name")).strip()
            desc = flatten_text(value.get("description")).strip()
            return f"{name}: {desc}" if desc else name
        return "\n".join(f"{k}: {flatten_text(v)}" for k, v in value.items())
    if isinstance(value, (list, tuple)):
        return "\n".join(flatten_text(v) for v in value)
    return str(value)


def _optional_text(value: Any) -> str | None:
    text = flatten_text(value).strip() if value is not None else ""
    return None if text.lower() in _ABSENT_MARKERS else flatten_text(value)


def _split_top_level(text: str) -> list[str]:
    parts, depth, buf = [], 0, []
    for ch in text:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth = max(0, depth - 1)
        if depth == 0 and ch in ",;\n":
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    parts.append("".join(buf))
    return parts


_BULLET_RE = re.compile(r"^\s*(?:[-*•]+|\d+[.)])\s*")


def parse_controls(raw: Any) -> tuple[str, ...]:
    if raw is None:
        return ()
    if isinstance(raw, (list, tuple)):
        items = [flatten_text(v) for v in raw]
    else:
        items = _split_top_level(flatten_text(raw))
    out = []
    for item in items:
        item = _BULLET_RE.sub("", item).strip()
        if item and item.lower() not in _ABSENT_MARKERS:
            out.append(item)
    return tuple(out)


def design_from_dict(raw: Mapping[str, Any], strict: bool = True) -> CausalDesign:
    """Build a design from its serialized form.

    With ``strict`` an unrecognized model type raises UnknownModelType;
    otherwise the label is kept and ``model_type`` is ``None``.
    """
    for attr in REQUIRED_DESIGN:
        key = DESIGN_KEYS[attr]
        if key not in raw or raw[key] is None:
            raise MissingField(key)
    label = flatten_text(raw["Model type"]).strip()
    model_type = normalize_model_type(label) if strict else try_model_type(label)
    return CausalDesign(
        model_type=model_type,
        model_label=label,
        reasons=_optional_text(raw.get("Reasons for choosing this model")),
        core_independent_variable=flatten_text(raw["Core independent variable"]),
        control_variables=parse_controls(raw.get("Control variables")),
        instrumental_variable=_optional_text(raw.get("Instrumental variable")),
        group=parse_group(raw["Group"]),
        model_significance=_optional_text(raw.get("Model Significance")),
        dependent_variable=flatten_text(raw["Dependent variable"]),
        explanation=_optional_text(raw.get("Explanation")),
    )


def serialize_design(design: CausalDesign) -> str:
    return json.dumps(design.to_dict(), ensure_ascii=False)


def parse_design(raw: str, strict: bool = True) -> CausalDesign:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(exc.pos, exc.msg) from exc
    if not isinstance(obj, dict):
        raise MalformedRecord(0, "top-level value is not an object")
    return design_from_dict(obj, strict=strict)


@dataclass(frozen=True)
class Hypothesis:
    id: str
    statement: str
    mechanism: str
    expected_direction: str  # "Positive" | "Negative"

    def __post_init__(self):
        if self.expected_direction not in ("Positive", "Negative"):
            raise ValueError(f"expected_direction must be Positive or Negative, got {self.expected_direction!r}")

    @property
    def sign(self) -> int:
        return 1 if self.expected_direction == "Positive" else -1


@dataclass(frozen=True)
class HypothesisSet:
    theoretical_framework: str
    hypotheses: tuple[Hypothesis, ...]

    def __post_init__(self):
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        ids = [h.id for h in self.hypotheses]
        if len(set(ids)) != len(ids):
            raise ValueError(f"hypothesis ids must be unique: {ids}")
        if not self.hypotheses:
            raise ValueError("at least one hypothesis is required")

    def to_dict(self) -> dict[str, Any]:
        return {
            "theoretical_framework": self.theoretical_framework,
            "hypotheses": [
                {"id": h.id, "statement": h.statement, "mechanism": h.mechanism,
                 "expected_direction": h.expected_direction}
                for h in self.hypotheses
            ],
        }

    def warnings(self) -> list[str]:
        if len(self.hypotheses) > 2:
            return [f"expected 1-2 hypotheses, got {len(self.hypotheses)}"]
        return []


@dataclass(frozen=True)
class BenchInstance:
    instance_id: str
    metadata: PolicyMetadata
    ground_truth: CausalDesign
    split: str = "test"
    extras: Mapping[str, Any] = field(default_factory=dict, compare=True, hash=False)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"instance_id": self.instance_id, "split": self.split}
        out.update(self.metadata.to_dict())
        out.update(self.ground_truth.to_dict())
        out.update(self.extras)
        return out


_KNOWN_KEYS = {"instance_id", "split", *META_KEYS.values(), *DESIGN_KEYS.values()}


def instance_from_dict(raw: Mapping[str, Any], strict: bool = True) -> BenchInstance:
    metadata = PolicyMetadata.from_dict(raw)
    ground_truth = design_from_dict(raw, strict=strict)
    split = raw.get("split", "test")
    if split not in ("test", "legacy"):
        raise MalformedRecord(0, f"split must be 'test' or 'legacy', got {split!r}")
    extras = {k: v for k, v in raw.items() if k not in _KNOWN_KEYS}
    instance_id = raw.get("instance_id")
    if not instance_id:
        digest = hashlib.sha1(metadata.policy_name.encode("utf-8")).hexdigest()[:12]
        instance_id = f"inst-{digest}"
    return BenchInstance(str(instance_id), metadata, ground_truth, split, extras)


def parse_instance(raw: str) -> BenchInstance:
    """Parse one line of an instance file."""
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(exc.pos, exc.msg) from exc
    if not isinstance(obj, dict):
        raise MalformedRecord(0, "top-level value is not an object")
    return instance_from_dict(obj)


def serialize_instance(inst: BenchInstance) -> str:
    return json.dumps(inst.to_dict(), ensure_ascii=False)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _norm_control(name: str) -> str:
    return " ".join(name.split()).lower()


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __iter__(self):
        return iter(self.violations)

    def __len__(self):
        return len(self.violations)


def validate_design(design: CausalDesign) -> ValidationReport:
    violations = []
    if design.model_type is None:
        violations.append("unknown-model-type")
    if design.model_type is ModelType.IV and not design.instrumental_variable:
        violations.append("iv-required")
    if design.model_type not in (ModelType.IV, None) and design.instrumental_variable:
        violations.append("iv-unexpected")
    if not design.group.treatment.strip():
        violations.append("empty-treatment-group")
    if not design.group.control.strip():
        violations.append("empty-control-group")
    seen = set()
    for c in design.control_variables:
        key = _norm_control(c)
        if key in seen:
            violations.append("duplicate-control")
            break
        seen.add(key)
    if not design.dependent_variable.strip():
        violations.append("empty-dependent-variable")
    return ValidationReport(tuple(violations))
