import contextlib
import json
import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS))

from strides.schema import instance_from_dict  # noqa: E402

FIXTURES = TESTS / "fixtures"
GOLDENS = TESTS / "goldens"

_CRITERIA: dict[int, str] = {}


@contextlib.contextmanager
def _criterion(number: int, title: str):
    try:
        yield
    except BaseException as exc:
        _CRITERIA[number] = f"criterion {number:>2} FAIL  {title} ({type(exc).__name__}: {str(exc)[:120]})"
        raise
    _CRITERIA.setdefault(number, f"criterion {number:>2} PASS  {title}")


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])


@pytest.fixture(scope="session")
def human_capital_case():
    return json.loads((FIXTURES / "human_capital_case.json").read_text(encoding="utf-8"))


def make_instance(family_label="Difference-in-Differences (DiD)", instance_id="t1", **overrides):
    raw = {
        "instance_id": instance_id,
        "Policy name": "Pilot program",
        "Policy type": "Environment",
        "Aim": "Effect of the pilot on the outcome",
        "Model type": family_label,
        "Core independent variable": "policy exposure",
        "Control variables": ["gdp per capita", "urbanization rate"],
        "Instrumental variable": "distance to the nearest pilot city" if "IV" in family_label else None,
        "Group": {"Treatment": "regions covered by the policy", "Control": "regions not covered by the policy"},
        "Dependent variable": "outcome index",
        "Explanation": "The policy increases the outcome.",
    }
    raw.update(overrides)
    return instance_from_dict(raw)


@pytest.fixture
def instance():
    return make_instance()
