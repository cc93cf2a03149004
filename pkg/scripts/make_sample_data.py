"""Regenerate the bundled sample corpus and its replay transcript.

The transcript is recorded by running both modes against canned replies, so
it always matches the current prompts' role tags and call order.

    python3 scripts/make_sample_data.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import replies as R  # noqa: E402
from strides.orchestrator import PipelineConfig, run_direct_mode, run_pipeline  # noqa: E402
from strides.schema import instance_from_dict  # noqa: E402

DATA = ROOT / "src" / "strides" / "data"

INSTANCES = [
    {
        "instance_id": "sample-did",
        "Policy name": "Low-Carbon City Pilot",
        "Policy type": "Environment",
        "Country/Region": "China (prefecture-level cities)",
        "Observed period": "2005-2019",
        "Implementation time": "2010, 2012 and 2017 batches",
        "Aim": "Estimate the effect of the pilot on green patent output",
        "Dataset": "City panel from statistical yearbooks and patent records",
        "Model type": "DiD",
        "Reasons for choosing this model": "Staggered pilot designation gives treated and untreated cities before and after.",
        "Core independent variable": "Low-carbon pilot designation (treated city x post period)",
        "Control variables": ["GDP per capita", "Urbanization rate", "Financial development", "Industrial structure"],
        "Instrumental variable": None,
        "Group": {"Treatment": "Pilot cities", "Control": "Non-pilot cities"},
        "Model Significance": "Positive and significant at the one percent level.",
        "Dependent variable": "Green patent applications per 10,000 people",
        "Explanation": "The pilot increases green innovation in treated cities.",
    },
    {
        "instance_id": "sample-iv",
        "Policy name": "Broadband Expansion Program",
        "Policy type": "Digital economy",
        "Country/Region": "China (counties)",
        "Observed period": "2011-2020",
        "Implementation time": "2014",
        "Aim": "Estimate the effect of internet access on household entrepreneurship",
        "Dataset": "Household survey panel linked to county infrastructure data",
        "Model type": "IV",
        "Reasons for choosing this model": "Internet access is endogenous to local economic conditions.",
        "Core independent variable": "Household internet access",
        "Control variables": ["Household income", "Education of household head", "Household size"],
        "Instrumental variable": "Historical density of fixed telephone lines in 1984",
        "Group": {"Treatment": "Households with internet access", "Control": "Households without internet access"},
        "Model Significance": "Positive and significant at the five percent level.",
        "Dependent variable": "Household entrepreneurship",
        "Explanation": "Internet access raises the probability of starting a business.",
    },
    {
        "instance_id": "sample-rd",
        "Policy name": "Rural Pension Age Threshold",
        "Policy type": "Social security",
        "Country/Region": "China (rural households)",
        "Observed period": "2011-2018",
        "Implementation time": "Benefits start at age 60",
        "Aim": "Estimate the effect of pension receipt on labor supply of the elderly",
        "Dataset": "Longitudinal aging survey",
        "Model type": "RD",
        "Reasons for choosing this model": "Eligibility switches on sharply at the age threshold.",
        "Core independent variable": "Pension receipt",
        "Control variables": ["Gender", "Education", "Marital status"],
        "Instrumental variable": None,
        "Group": {"Treatment": "Individuals aged 60 and above", "Control": "Individuals just below 60"},
        "Model Significance": "Negative and significant at the five percent level.",
        "Dependent variable": "Agricultural labor supply hours",
        "Explanation": "Pension receipt reduces labor supply among rural elderly.",
    },
]

DIRECT = {
    # wrong family
    "sample-did": R.design("Propensity Score Matching (PSM)", treatment="pilot city status",
                           dependent="green innovation", controls=["GDP per capita"],
                           treatment_group="pilot cities", control_group="matched non-pilot cities",
                           direction_text="The pilot increases green innovation."),
    # off-menu family, graded as wrong
    "sample-iv": R.design("Fixed effects panel regression", treatment="internet access",
                          dependent="household entrepreneurship", controls=["income", "household size"],
                          treatment_group="connected households", control_group="unconnected households",
                          direction_text="Internet access raises entrepreneurship."),
    "sample-rd": R.design("Regression Discontinuity (RD)", treatment="pension eligibility at 60",
                          dependent="labor supply", controls=["gender"],
                          treatment_group="individuals aged 60 and above", control_group="individuals below 60",
                          direction_text="Pension receipt reduces labor supply."),
}


def strides_replies(inst: dict) -> dict[str, list[str]]:
    family = inst["Model type"]
    group = inst["Group"]
    rep = R.pipeline_replies(family)
    rep["summary"] = [R.design(
        R.FAMILY_LABELS[family], treatment=inst["Core independent variable"],
        dependent=inst["Dependent variable"], controls=inst["Control variables"][:3],
        instrument=inst["Instrumental variable"], treatment_group=group["Treatment"],
        control_group=group["Control"], direction_text=inst["Explanation"],
    )]
    if family == "DiD":
        # One falsification round: diverging pre-trends, then a clean draw.
        rep["simulation"] = [R.simulation("DiD", pre_trend_gap=1.0, noise_sd=0.1), R.simulation("DiD")]
    if family == "RD":
        rep["theory"] = [R.theory("Negative")]
    return {f"{inst['instance_id']}/{k}": v for k, v in rep.items()}


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    with open(DATA / "sample_instances.jsonl", "w", encoding="utf-8") as fh:
        for raw in INSTANCES:
            fh.write(json.dumps(raw, ensure_ascii=False) + "\n")

    instances = [instance_from_dict(raw) for raw in INSTANCES]
    replies: dict[str, list[str]] = {}
    for raw in INSTANCES:
        replies.update(strides_replies(raw))
        replies[f"{raw['instance_id']}/direct"] = [DIRECT[raw["instance_id"]]]

    cfg = PipelineConfig()

    def run(backend):
        for inst in instances:
            run_direct_mode(inst, cfg, backend)
        for inst in instances:
            record = run_pipeline(inst, cfg, backend)
            if record.status != "ok":
                raise SystemExit(f"{inst.instance_id}: {record.error}")

    transcript = R.record(replies, run)
    transcript.save(DATA / "sample_transcript.jsonl")
    print(f"wrote {len(instances)} instances and {len(transcript)} transcript entries to {DATA}")


if __name__ == "__main__":
    main()
