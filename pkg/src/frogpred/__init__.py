"""High-confidence single predictions on adversarial binary sequences."""

from .bitpred import (
    Automaton,
    automaton_predictor,
    evaluate,
    run_trace,
    strongly_accessible,
    subsequence,
    two_sided_predictor,
)
from .forecast import (
    exact_failure_probability,
    forecast_params,
    martingale_report,
    run_forecaster,
    score_forecast,
)
from .frog_composed import CompositionParams, composed_exact, default_K, sample_composed, schedule
from .frog_core import (
    RationalThreshold,
    chip_stack_distribution,
    lemma_bounds_check,
    outcome_probabilities,
    sample_finite,
    stack_heights,
)
from .harness import ExperimentConfig, run_experiment
from .streams import BitStream, from_finite, generate, negate, parse_stream_spec, prefix_density

__version__ = "0.1.0"

__all__ = [
    "Automaton", "automaton_predictor", "evaluate", "run_trace", "strongly_accessible", "subsequence",
    "two_sided_predictor", "exact_failure_probability", "forecast_params", "martingale_report",
    "run_forecaster", "score_forecast", "CompositionParams", "composed_exact", "default_K",
    "sample_composed", "schedule", "RationalThreshold", "chip_stack_distribution", "lemma_bounds_check",
    "outcome_probabilities", "sample_finite", "stack_heights", "ExperimentConfig", "run_experiment",
    "BitStream", "from_finite", "generate", "negate", "parse_stream_spec", "prefix_density",
]
