"""Confusion counting, verifier metrics, setting partitions, and averaging.

Derived ratios with zero denominators are represented as ``None`` -- never a
0-by-convention -- and aggregation skips absent values while reporting how
many were skipped. Cross-dataset aggregates are means of per-dataset means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Protocol, Sequence

from .answers import Verdict
from .models import ModelSpec

METRIC_FIELDS = (
    "solver_acc",
    "verifier_acc",
    "tpr",
    "fpr",
    "fnr",
    "precision",
    "recall",
    "f1",
    "gain",
)


class Setting(str, Enum):
    SELF = "self"
    INTRA = "intra_family"
    CROSS = "cross_family"


@dataclass(frozen=True)
class ConfusionCounts:
    """Verification events for one (solver, verifier, dataset) triple.

    ``solver_total``/``solver_correct`` count solver attempts that produced a
    boxed answer; boxless attempts land in ``discarded_solver`` and are
    excluded from both solver accuracy and verification. Verifier outputs
    without a parseable verdict land in ``unparseable_verdicts`` and stay out
    of the confusion cells.
    """

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    solver_correct: int = 0
    solver_total: int = 0
    discarded_solver: int = 0
    unparseable_verdicts: int = 0

    @property
    def verified(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def record_attempt(self, present: bool, correct: bool | None) -> "ConfusionCounts":
        """Fold one solver attempt into the solver-side tallies."""
        if not present:
            return replace(self, discarded_solver=self.discarded_solver + 1)
        return replace(
            self,
            solver_total=self.solver_total + 1,
            solver_correct=self.solver_correct + (1 if correct else 0),
        )

    def merged(self, other: "ConfusionCounts") -> "ConfusionCounts":
        """Field-wise addition; partial counts merge associatively."""
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
            solver_correct=self.solver_correct + other.solver_correct,
            solver_total=self.solver_total + other.solver_total,
            discarded_solver=self.discarded_solver + other.discarded_solver,
            unparseable_verdicts=self.unparseable_verdicts + other.unparseable_verdicts,
        )


def accumulate(counts: ConfusionCounts, is_correct: bool, verdict: Verdict) -> ConfusionCounts:
    """Fold one judgment into the confusion cells.

    Unparseable verdicts only bump their own tally; otherwise exactly one of
    tp/fp/tn/fn increments.
    """
    if not verdict.parse_ok:
        return replace(counts, unparseable_verdicts=counts.unparseable_verdicts + 1)
    if is_correct and verdict.accepted:
        return replace(counts, tp=counts.tp + 1)
    if not is_correct and verdict.accepted:
        return replace(counts, fp=counts.fp + 1)
    if not is_correct and not verdict.accepted:
        return replace(counts, tn=counts.tn + 1)
    return replace(counts, fn=counts.fn + 1)


@dataclass(frozen=True)
class MetricValues:
    solver_acc: float
    verifier_acc: float
    tpr: float | None
    fpr: float | None
    fnr: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    gain: float | None


@dataclass(frozen=True)
class MetricsRecord:
    solver: ModelSpec
    verifier: ModelSpec
    dataset: str
    solver_acc: float
    verifier_acc: float
    tpr: float | None
    fpr: float | None
    fnr: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    gain: float | None
    counts: ConfusionCounts

    @property
    def setting(self) -> Setting:
        return classify_setting(self.solver, self.verifier)


def derive_metrics(counts: ConfusionCounts) -> MetricValues:
    """All verifier metrics from one confusion table."""
    if counts.solver_total < 1:
        raise ValueError("no solver attempts recorded")
    if counts.verified == 0:
        raise ValueError("no verified samples")
    solver_acc = counts.solver_correct / counts.solver_total
    verifier_acc = (counts.tp + counts.tn) / counts.verified
    pos = counts.tp + counts.fn
    neg = counts.fp + counts.tn
    acc_total = counts.tp + counts.fp
    tpr = counts.tp / pos if pos else None
    fpr = counts.fp / neg if neg else None
    fnr = 1 - tpr if tpr is not None else None
    precision = counts.tp / acc_total if acc_total else None
    recall = tpr
    f1 = None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    gain = precision - solver_acc if precision is not None else None
    return MetricValues(
        solver_acc=solver_acc,
        verifier_acc=verifier_acc,
        tpr=tpr,
        fpr=fpr,
        fnr=fnr,
        precision=precision,
        recall=recall,
        f1=f1,
        gain=gain,
    )


def make_record(
    solver: ModelSpec, verifier: ModelSpec, dataset: str, counts: ConfusionCounts
) -> MetricsRecord:
    values = derive_metrics(counts)
    return MetricsRecord(
        solver=solver,
        verifier=verifier,
        dataset=dataset,
        counts=counts,
        **{field: getattr(values, field) for field in METRIC_FIELDS},
    )


def precision_closed_form(solver_acc: float, tpr: float, fpr: float) -> float:
    """Precision from solver accuracy and the verifier's TPR/FPR."""
    denominator = solver_acc * tpr + (1 - solver_acc) * fpr
    if denominator <= 0:
        raise ValueError("verifier accepts nothing")
    return solver_acc * tpr / denominator


def gain_closed_form(solver_acc: float, tpr: float, fpr: float) -> float:
    """Asymptotic improvement from verifier rejection sampling: the precision
    the accepted stream converges to, minus the solver's unassisted accuracy."""
    return precision_closed_form(solver_acc, tpr, fpr) - solver_acc


def classify_setting(solver: ModelSpec, verifier: ModelSpec) -> Setting:
    if solver.name == verifier.name:
        return Setting.SELF
    if solver.family == verifier.family:
        return Setting.INTRA
    return Setting.CROSS


@dataclass(frozen=True)
class Aggregate:
    value: float | None
    n_records: int
    n_skipped: int


def aggregate_setting(
    records: Iterable[MetricsRecord],
    verifier: ModelSpec,
    metric: str,
    setting: Setting,
) -> Aggregate:
    """Unweighted mean of one metric over a verifier's setting partition.

    Records are averaged per dataset first, then across datasets; absent
    metric values are skipped and counted. An empty partition yields an
    absent value, never a fabricated zero.
    """
    if metric not in METRIC_FIELDS:
        raise ValueError(f"unknown metric {metric!r}")
    by_dataset: dict[str, list[float]] = {}
    n_records = 0
    n_skipped = 0
    for record in records:
        if record.verifier.name != verifier.name:
            continue
        if classify_setting(record.solver, record.verifier) != setting:
            continue
        n_records += 1
        value = getattr(record, metric)
        if value is None:
            n_skipped += 1
            continue
        by_dataset.setdefault(record.dataset, []).append(value)
    if not by_dataset:
        return Aggregate(value=None, n_records=n_records, n_skipped=n_skipped)
    dataset_means = [sum(vals) / len(vals) for vals in by_dataset.values()]
    return Aggregate(
        value=sum(dataset_means) / len(dataset_means),
        n_records=n_records,
        n_skipped=n_skipped,
    )


# ---------------------------------------------------------------------------
# Solution-distribution similarity.
# ---------------------------------------------------------------------------


class Embedder(Protocol):
    def embed(self, text: str) -> Sequence[float]: ...


@dataclass(frozen=True)
class SimilarityScore:
    score: float | None
    used: int
    skipped: int


def _cosine(u: Sequence[float], v: Sequence[float]) -> float | None:
    dot = norm_u = norm_v = 0.0
    for a, b in zip(u, v):
        dot += a * b
        norm_u += a * a
        norm_v += b * b
    if norm_u == 0.0 or norm_v == 0.0:
        return None
    return dot / math.sqrt(norm_u * norm_v)


def similarity_score(
    solutions_a: Mapping[str, str],
    solutions_b: Mapping[str, str],
    embedder: Embedder,
) -> SimilarityScore:
    """Mean cosine similarity of two models' per-problem solution embeddings.

    Both mappings must cover the same problem ids. Problems where either
    embedding has zero norm are skipped and counted.
    """
    if set(solutions_a) != set(solutions_b):
        raise ValueError("solution sets cover different problem ids")
    if not solutions_a:
        raise ValueError("no solutions to compare")
    total = 0.0
    used = 0
    skipped = 0
    for problem_id in sorted(solutions_a):
        vec_a = embedder.embed(solutions_a[problem_id])
        vec_b = embedder.embed(solutions_b[problem_id])
        if len(vec_a) != len(vec_b):
            raise ValueError("embedding dimensions differ")
        cos = _cosine(vec_a, vec_b)
        if cos is None:
            skipped += 1
            continue
        total += cos
        used += 1
    if used == 0:
        return SimilarityScore(score=None, used=0, skipped=skipped)
    return SimilarityScore(score=total / used, used=used, skipped=skipped)
