"""Mock datasets with a known injected treatment effect, one generator per method family.

All randomness comes from a Philox generator keyed by the caller's 64-bit seed,
so a dataset is a pure function of (family, params, seed).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from .errors import InvalidParams
from .schema import ModelType, normalize_model_type

MIN_ROWS, MAX_ROWS = 200, 500


@dataclass(frozen=True)
class SimParams:
    """Knobs for every family; fields irrelevant to a family are ignored.

    ``direction`` only matters when ``true_effect`` is zero; otherwise it is
    the sign of ``true_effect``.
    """

    true_effect: float = 2.0
    noise_sd: float = 1.0
    direction: str | None = None
    n_rows: int = 400
    # DiD
    n_units: int = 30
    n_periods: int = 10
    treat_start: int = 5
    treated_share: float = 0.5
    pre_trend_gap: float = 0.0
    # IV
    instrument_strength: float = 1.0
    endogeneity: float = 0.5
    # RD
    cutoff: float = 0.0
    running_halfwidth: float = 1.0
    rd_slope: float = 0.5
    # SCM
    n_donors: int = 20
    scm_periods: int = 12
    scm_treat_start: int = 8
    n_active_donors: int = 3
    # PSM
    n_covariates: int = 3
    propensity_strength: float = 1.0
    twins: bool = False

    def with_(self, **changes) -> SimParams:
        return replace(self, **changes)


@dataclass(frozen=True)
class DgpTruth:
    family: ModelType
    true_effect: float
    direction: str
    nuisance: Mapping[str, Any] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if self.direction not in ("Positive", "Negative"):
            raise ValueError(f"direction must be Positive or Negative, got {self.direction!r}")
        if self.true_effect != 0 and (self.true_effect > 0) != (self.direction == "Positive"):
            raise ValueError("sign of true_effect contradicts direction")

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": self.family.value,
            "true_effect": self.true_effect,
            "direction": self.direction,
            "nuisance": dict(self.nuisance),
        }


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    kind: str  # numeric | binary | categorical


@dataclass(frozen=True)
class ColumnSchema:
    columns: tuple[ColumnInfo, ...]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def kind(self, name: str) -> str:
        for c in self.columns:
            if c.name == name:
                return c.kind
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def to_dict(self) -> list[dict[str, str]]:
        return [asdict(c) for c in self.columns]


class MockDataset:
    """Column-oriented table with the generating truth attached."""

    def __init__(self, columns: Mapping[str, np.ndarray], seed: int, truth: DgpTruth):
        cols = {}
        lengths = set()
        for name, values in columns.items():
            arr = np.asarray(values)
            arr.setflags(write=False)
            cols[name] = arr
            lengths.add(len(arr))
        if len(lengths) != 1:
            raise InvalidParams(f"columns have unequal lengths {sorted(lengths)}")
        n = lengths.pop()
        if n == 0:
            raise InvalidParams("dataset has no rows")
        self._columns = cols
        self.n_rows = n
        self.seed = seed
        self.truth = truth

    @property
    def names(self) -> list[str]:
        return list(self._columns)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._columns[name]

    def __contains__(self, name: str) -> bool:
        return name in self._columns

    def items(self):
        return self._columns.items()

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(self.names)
        cols = list(self._columns.values())
        for i in range(self.n_rows):
            writer.writerow([_fmt(col[i]) for col in cols])
        return buf.getvalue()

    def truth_record(self) -> str:
        return json.dumps({"seed": self.seed, "n_rows": self.n_rows, **self.truth.to_dict()}, sort_keys=True)


def _fmt(value) -> str:
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    return str(value)


def describe_schema(data: MockDataset) -> ColumnSchema:
    infos = []
    for name, values in data.items():
        if values.dtype.kind in "iufb":
            uniq = np.unique(values)
            kind = "binary" if set(uniq.tolist()) <= {0, 1} else "numeric"
        else:
            kind = "categorical"
        infos.append(ColumnInfo(name, kind))
    return ColumnSchema(tuple(infos))


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def _direction(params: SimParams) -> str:
    if params.true_effect > 0:
        return "Positive"
    if params.true_effect < 0:
        return "Negative"
    return params.direction or "Positive"


def _check_common(params: SimParams) -> None:
    if params.noise_sd < 0:
        raise InvalidParams("noise_sd must be nonnegative")
    if params.direction not in (None, "Positive", "Negative"):
        raise InvalidParams(f"direction must be Positive or Negative, got {params.direction!r}")
    if params.true_effect != 0 and params.direction is not None and _direction(params) != params.direction:
        raise InvalidParams("sign of true_effect contradicts direction")


def _did(p: SimParams, rng: np.random.Generator) -> dict[str, np.ndarray]:
    n_treated = int(round(p.n_units * p.treated_share))
    if p.n_periods < 2:
        raise InvalidParams("DiD needs at least 2 periods")
    if n_treated < 2 or p.n_units - n_treated < 2:
        raise InvalidParams("DiD needs at least 2 units per arm")
    if not 1 <= p.treat_start <= p.n_periods - 1:
        raise InvalidParams("treat_start must leave at least one pre and one post period")
    treated = np.zeros(p.n_units, dtype=np.int64)
    treated[rng.permutation(p.n_units)[:n_treated]] = 1
    unit_fe = rng.normal(0.0, 1.0, p.n_units)
    period_fe = rng.normal(0.0, 1.0, p.n_periods) + 0.3 * np.arange(p.n_periods)
    eps = rng.normal(0.0, 1.0, (p.n_units, p.n_periods))

    t_idx = np.arange(p.n_periods)
    post = (t_idx >= p.treat_start).astype(np.int64)
    d = treated[:, None]
    y = (
        10.0
        + unit_fe[:, None]
        + period_fe[None, :]
        + p.true_effect * d * post[None, :]
        + p.pre_trend_gap * d * t_idx[None, :]
        + p.noise_sd * eps
    )
    return {
        "unit": np.repeat(np.arange(1, p.n_units + 1), p.n_periods),
        "year": np.tile(2011 + t_idx, p.n_units),
        "treatment_intensity": np.repeat(treated, p.n_periods),
        "post_policy": np.tile(post, p.n_units),
        "outcome": y.ravel(),
    }


def _iv(p: SimParams, rng: np.random.Generator) -> dict[str, np.ndarray]:
    if not -1.0 < p.endogeneity < 1.0:
        raise InvalidParams("endogeneity must be a correlation in (-1, 1)")
    n = p.n_rows
    z = rng.normal(0.0, 1.0, n)
    e1 = rng.normal(0.0, 1.0, n)
    e2 = rng.normal(0.0, 1.0, n)
    rho = p.endogeneity
    u = p.noise_sd * e1
    v = p.noise_sd * (rho * e1 + np.sqrt(1.0 - rho**2) * e2)
    x = 1.0 + p.instrument_strength * z + u
    y = 2.0 + p.true_effect * x + v
    return {"instrument": z, "treatment": x, "outcome": y}


def _rd(p: SimParams, rng: np.random.Generator) -> dict[str, np.ndarray]:
    if p.running_halfwidth <= 0:
        raise InvalidParams("running_halfwidth must be positive")
    n = p.n_rows
    x = rng.uniform(p.cutoff - p.running_halfwidth, p.cutoff + p.running_halfwidth, n)
    above = (x >= p.cutoff).astype(np.int64)
    if above.sum() == 0 or above.sum() == n:
        raise InvalidParams("RD needs observations on both sides of the cutoff")
    eps = rng.normal(0.0, 1.0, n)
    y = 1.0 + p.rd_slope * (x - p.cutoff) + p.true_effect * above + p.noise_sd * eps
    return {"running": x, "above_cutoff": above, "outcome": y}


def _scm(p: SimParams, rng: np.random.Generator) -> dict[str, np.ndarray]:
    if p.n_donors < 3:
        raise InvalidParams("SCM needs at least 3 donors")
    if p.scm_treat_start < 3 or p.scm_treat_start >= p.scm_periods:
        raise InvalidParams("SCM needs at least 3 pre-periods and one post-period")
    k = min(max(p.n_active_donors, 1), p.n_donors)
    T = p.scm_periods
    factors = np.cumsum(rng.normal(0.0, 1.0, (T, 2)), axis=0)
    trend = 0.5 * np.arange(T)
    loadings = rng.uniform(0.5, 1.5, (p.n_donors, 2))
    levels = rng.uniform(5.0, 15.0, p.n_donors)
    donors = levels[:, None] + trend[None, :] + loadings @ factors.T
    donors = donors + p.noise_sd * rng.normal(0.0, 1.0, donors.shape)
    active = rng.choice(p.n_donors, size=k, replace=False)
    weights = np.zeros(p.n_donors)
    weights[active] = rng.dirichlet(np.ones(k))
    post = (np.arange(T) >= p.scm_treat_start).astype(np.int64)
    treated = weights @ donors + p.true_effect * post + p.noise_sd * rng.normal(0.0, 1.0, T)
    panel = np.vstack([treated, donors])
    n_units = p.n_donors + 1
    return {
        "unit": np.repeat(np.arange(n_units), T),
        "period": np.tile(np.arange(1, T + 1), n_units),
        "treated": np.repeat((np.arange(n_units) == 0).astype(np.int64), T),
        "post_policy": np.tile(post, n_units),
        "outcome": panel.ravel(),
    }, {"donor_weights": [round(float(w), 12) for w in weights], "treated_unit": 0}


def _psm(p: SimParams, rng: np.random.Generator) -> dict[str, np.ndarray]:
    n, k = p.n_rows, p.n_covariates
    if k < 1:
        raise InvalidParams("PSM needs at least one covariate")
    gamma = np.array([0.8, -0.5, 0.3, 0.2, -0.2][:k] + [0.1] * max(0, k - 5))
    beta = np.array([1.0, 0.5, -0.5, 0.3, 0.3][:k] + [0.2] * max(0, k - 5))
    if p.twins:
        half = n // 2
        base = rng.normal(0.0, 1.0, (half, k))
        X = np.repeat(base, 2, axis=0)
        t = np.tile(np.array([1, 0], dtype=np.int64), half)
    else:
        X = rng.normal(0.0, 1.0, (n, k))
        logits = -0.2 + p.propensity_strength * (X @ gamma)
        t = (rng.uniform(0.0, 1.0, n) < 1.0 / (1.0 + np.exp(-logits))).astype(np.int64)
    if t.sum() == 0 or t.sum() == len(t):
        raise InvalidParams("PSM draw produced an empty arm")
    y = 1.0 + p.true_effect * t + X @ beta + p.noise_sd * rng.normal(0.0, 1.0, len(t))
    cols = {f"covariate_{j + 1}": X[:, j] for j in range(k)}
    cols["treatment"] = t
    cols["outcome"] = y
    return cols


_GENERATORS = {
    ModelType.DiD: _did,
    ModelType.IV: _iv,
    ModelType.RD: _rd,
    ModelType.SCM: _scm,
    ModelType.PSM: _psm,
}

# Parameters each family actually reads, recorded in the truth sidecar.
_NUISANCE = {
    ModelType.DiD: ("noise_sd", "n_units", "n_periods", "treat_start", "treated_share", "pre_trend_gap"),
    ModelType.IV: ("noise_sd", "n_rows", "instrument_strength", "endogeneity"),
    ModelType.RD: ("noise_sd", "n_rows", "cutoff", "running_halfwidth", "rd_slope"),
    ModelType.SCM: ("noise_sd", "n_donors", "scm_periods", "scm_treat_start", "n_active_donors"),
    ModelType.PSM: ("noise_sd", "n_rows", "n_covariates", "propensity_strength", "twins"),
}


def simulate(family: ModelType | str, params: SimParams | Mapping[str, Any] | None = None, seed: int = 0) -> MockDataset:
    family = normalize_model_type(family)
    if params is None:
        params = SimParams()
    elif isinstance(params, Mapping):
        try:
            params = SimParams(**params)
        except TypeError as exc:
            raise InvalidParams(str(exc)) from exc
    _check_common(params)
    if family in (ModelType.IV, ModelType.RD, ModelType.PSM) and params.n_rows < 4:
        raise InvalidParams("n_rows too small")
    out = _GENERATORS[family](params, _rng(seed))
    extra: dict[str, Any] = {}
    if isinstance(out, tuple):
        out, extra = out
    nuisance = {name: getattr(params, name) for name in _NUISANCE[family]}
    nuisance.update(extra)
    truth = DgpTruth(family, float(params.true_effect), _direction(params), nuisance)
    return MockDataset(out, seed, truth)
