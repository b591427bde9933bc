"""Solver-verifier evaluation harness.

Generates guaranteed-solvable synthetic tasks (3SAT, Sudoku, matrix
multiplication), grades boxed answers, measures verifier quality with
confusion-based metrics including the asymptotic rejection-sampling gain,
runs bounded rejection-sampling experiments over solver-verifier pairs, and
validates the asymptotic theory with a seeded stochastic simulator -- no LLM
required for any of the statistical machinery.
"""

__version__ = "0.1.0"

from .answers import ExtractedAnswer, Verdict, extract_boxed, parse_verdict
from .engine import (
    Attempt,
    EvalRunner,
    RejectionTrace,
    empirical_gain,
    expected_final_accuracy,
    simulate_rejection_batch,
)
from .metrics import (
    ConfusionCounts,
    MetricsRecord,
    Setting,
    aggregate_setting,
    classify_setting,
    derive_metrics,
    gain_closed_form,
    similarity_score,
)
from .models import GenerationParams, ModelSpec, SimModelParams
from .taskgen import Problem, gen_3sat, gen_matmul, gen_sudoku

__all__ = [
    "Attempt",
    "ConfusionCounts",
    "EvalRunner",
    "ExtractedAnswer",
    "GenerationParams",
    "MetricsRecord",
    "ModelSpec",
    "Problem",
    "RejectionTrace",
    "Setting",
    "SimModelParams",
    "Verdict",
    "__version__",
    "aggregate_setting",
    "classify_setting",
    "derive_metrics",
    "empirical_gain",
    "expected_final_accuracy",
    "extract_boxed",
    "gain_closed_form",
    "gen_3sat",
    "gen_matmul",
    "gen_sudoku",
    "parse_verdict",
    "simulate_rejection_batch",
    "similarity_score",
]
