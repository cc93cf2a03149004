"""Staged agent pipeline for causal study design, with estimator-backed verification and rubric grading."""

from .schema import (
    BenchInstance,
    CausalDesign,
    Group,
    Hypothesis,
    HypothesisSet,
    ModelType,
    PolicyMetadata,
    normalize_model_type,
    parse_instance,
    serialize_instance,
    validate_design,
)

__version__ = "0.1.0"
