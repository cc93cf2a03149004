"""Structured tool calls: which dataset column plays which role for an estimator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from ..errors import ColumnMiss, RoleMissing
from ..schema import ModelType, normalize_model_type

REQUIRED_ROLES = {
    ModelType.DiD: ("dependent", "treatment", "time", "unit"),
    ModelType.IV: ("dependent", "treatment", "instrument"),
    ModelType.RD: ("dependent", "running", "cutoff"),
    ModelType.SCM: ("dependent", "unit", "time", "treated_unit"),
    ModelType.PSM: ("dependent", "treatment", "covariates"),
}

OPTIONAL_ROLES = {
    ModelType.DiD: ("period", "covariates"),
    ModelType.IV: ("covariates",),
    ModelType.RD: (),
    ModelType.SCM: ("post",),
    ModelType.PSM: (),
}

# Roles whose value is a literal (a number or a unit id), not a column name.
LITERAL_ROLES = {"cutoff", "treated_unit"}
MULTI_ROLES = {"covariates"}


def _canon_role(role: str) -> str:
    return role.strip().lower().replace("-", "_").replace(" ", "_")


@dataclass(frozen=True)
class ToolCall:
    tool: ModelType
    column_map: Mapping[str, Any]
    options: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "tool", normalize_model_type(self.tool))
        object.__setattr__(self, "column_map", {_canon_role(k): v for k, v in self.column_map.items()})
        object.__setattr__(self, "options", dict(self.options))

    def __hash__(self):
        return hash((self.tool, tuple(sorted((k, str(v)) for k, v in self.column_map.items()))))

    def column(self, role: str) -> str:
        if role not in self.column_map or self.column_map[role] in (None, "", []):
            raise RoleMissing(role, self.tool.value)
        return str(self.column_map[role])

    def columns(self, role: str) -> list[str]:
        value = self.column_map.get(role)
        if value in (None, "", []):
            return []
        if isinstance(value, str):
            return [v.strip() for v in value.split(",") if v.strip()]
        return [str(v) for v in value]

    def referenced_columns(self) -> list[str]:
        names = []
        for role, value in self.column_map.items():
            if role in LITERAL_ROLES:
                continue
            names.extend(self.columns(role) if role in MULTI_ROLES else [str(value)])
        return names

    def to_dict(self) -> dict[str, Any]:
        return {"tool": self.tool.value, "column_map": dict(self.column_map), "options": dict(self.options)}


def check_call(call: ToolCall, columns) -> None:
    """Raise RoleMissing / ColumnMiss unless the call is runnable against ``columns``."""
    for role in REQUIRED_ROLES[call.tool]:
        if role in MULTI_ROLES:
            if not call.columns(role):
                raise RoleMissing(role, call.tool.value)
        else:
            call.column(role)
    available = set(columns)
    for name in call.referenced_columns():
        if name not in available:
            raise ColumnMiss(name)


def numeric(data, name: str) -> np.ndarray:
    if name not in data:
        raise ColumnMiss(name)
    return np.asarray(data[name], dtype=float)
