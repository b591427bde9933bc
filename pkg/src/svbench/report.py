"""Figure-data emitters: stored records in, plain CSV rows out.

No plotting here by design -- every emitter returns a ``FigureData`` whose
rows serialize to CSV (absent values become empty fields, never sentinel
numbers) plus a JSON index, and any external tool renders the actual plots.
Emitters are pure and order-invariant over their input records.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .engine import ComparisonRow
from .metrics import (
    METRIC_FIELDS,
    MetricsRecord,
    Setting,
    aggregate_setting,
    classify_setting,
)
from .models import ModelSpec

logger = logging.getLogger(__name__)

SETTING_ORDER = (Setting.SELF, Setting.INTRA, Setting.CROSS)


@dataclass(frozen=True)
class FigureData:
    figure_id: str
    columns: tuple[str, ...]
    rows: list[dict]
    provenance: str


def least_squares(points: Sequence[tuple[float, float]]) -> tuple[float, float] | None:
    """Ordinary least-squares (slope, intercept); None when underdetermined."""
    n = len(points)
    if n < 2:
        return None
    mean_x = sum(x for x, _ in points) / n
    mean_y = sum(y for _, y in points) / n
    sxx = sum((x - mean_x) ** 2 for x, _ in points)
    if sxx == 0:
        return None
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in points)
    slope = sxy / sxx
    return slope, mean_y - slope * mean_x


def _verifier_specs(records: Iterable[MetricsRecord]) -> list[ModelSpec]:
    specs: dict[str, ModelSpec] = {}
    for record in records:
        specs.setdefault(record.verifier.name, record.verifier)
    return [specs[name] for name in sorted(specs)]


def emit_setting_tables(records: Sequence[MetricsRecord], provenance: str = "") -> FigureData:
    """Per verifier: own solver accuracy plus every metric per setting.

    Point rows feed both the accuracy-vs-metric scatters (figure 2) and the
    per-family size bars (figure 3); each (setting, metric) panel also gets
    one fit row with the ordinary-least-squares trend of metric against the
    verifier's own solver accuracy.
    """
    if not records:
        raise ValueError("no records")
    rows = []
    panels: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for verifier in _verifier_specs(records):
        own_acc = aggregate_setting(records, verifier, "solver_acc", Setting.SELF)
        for setting in SETTING_ORDER:
            for metric in METRIC_FIELDS:
                agg = aggregate_setting(records, verifier, metric, setting)
                rows.append(
                    {
                        "row_type": "point",
                        "verifier": verifier.name,
                        "family": verifier.family,
                        "size_b": verifier.size_b,
                        "kind": verifier.kind,
                        "setting": setting.value,
                        "metric": metric,
                        "value": agg.value,
                        "n_records": agg.n_records,
                        "n_skipped": agg.n_skipped,
                        "verifier_solver_acc": own_acc.value,
                        "slope": None,
                        "intercept": None,
                        "n_points": None,
                    }
                )
                if agg.value is not None and own_acc.value is not None:
                    panels.setdefault((setting.value, metric), []).append(
                        (own_acc.value, agg.value)
                    )
    for setting in SETTING_ORDER:
        for metric in METRIC_FIELDS:
            points = panels.get((setting.value, metric), [])
            fit = least_squares(points)
            rows.append(
                {
                    "row_type": "ols_fit",
                    "verifier": None,
                    "family": None,
                    "size_b": None,
                    "kind": None,
                    "setting": setting.value,
                    "metric": metric,
                    "value": None,
                    "n_records": None,
                    "n_skipped": None,
                    "verifier_solver_acc": None,
                    "slope": fit[0] if fit else None,
                    "intercept": fit[1] if fit else None,
                    "n_points": len(points),
                }
            )
    return FigureData(
        figure_id="setting_tables",
        columns=(
            "row_type",
            "verifier",
            "family",
            "size_b",
            "kind",
            "setting",
            "metric",
            "value",
            "n_records",
            "n_skipped",
            "verifier_solver_acc",
            "slope",
            "intercept",
            "n_points",
        ),
        rows=rows,
        provenance=provenance,
    )


def emit_theory_comparison(
    comparison: Sequence[ComparisonRow], provenance: str = ""
) -> FigureData:
    """Theoretical vs empirical rejection-sampling gains (figure 4)."""
    rows = [
        {
            "solver": row.solver,
            "verifier": row.verifier,
            "dataset": row.dataset,
            "setting": row.setting,
            "cap": row.cap,
            "theoretical_gain": row.theoretical_gain,
            "empirical_gain": row.empirical_gain,
            "gap": row.gap,
        }
        for row in sorted(
            comparison, key=lambda r: (r.solver, r.verifier, r.dataset, r.cap)
        )
    ]
    return FigureData(
        figure_id="theory_comparison",
        columns=(
            "solver",
            "verifier",
            "dataset",
            "setting",
            "cap",
            "theoretical_gain",
            "empirical_gain",
            "gap",
        ),
        rows=rows,
        provenance=provenance,
    )


def emit_similarity_correlation(
    pair_scores: Sequence[tuple[float, MetricsRecord]], provenance: str = ""
) -> FigureData:
    """Metric-vs-similarity scatter points plus a least-squares fit per
    (setting, metric) panel (figure 5). Self pairs are excluded; panels with
    fewer than two points get an absent slope."""
    points_rows = []
    panels: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for similarity, record in sorted(
        pair_scores, key=lambda item: (item[1].solver.name, item[1].verifier.name, item[1].dataset)
    ):
        setting = classify_setting(record.solver, record.verifier)
        if setting == Setting.SELF:
            continue
        for metric in METRIC_FIELDS:
            value = getattr(record, metric)
            if value is None:
                continue
            points_rows.append(
                {
                    "row_type": "point",
                    "setting": setting.value,
                    "metric": metric,
                    "similarity": similarity,
                    "value": value,
                    "solver": record.solver.name,
                    "verifier": record.verifier.name,
                    "slope": None,
                    "intercept": None,
                    "n_points": None,
                }
            )
            panels.setdefault((setting.value, metric), []).append((similarity, value))
    fit_rows = []
    for (setting_value, metric), points in sorted(panels.items()):
        fit = least_squares(points)
        fit_rows.append(
            {
                "row_type": "fit",
                "setting": setting_value,
                "metric": metric,
                "similarity": None,
                "value": None,
                "solver": None,
                "verifier": None,
                "slope": fit[0] if fit else None,
                "intercept": fit[1] if fit else None,
                "n_points": len(points),
            }
        )
    return FigureData(
        figure_id="similarity_correlation",
        columns=(
            "row_type",
            "setting",
            "metric",
            "similarity",
            "value",
            "solver",
            "verifier",
            "slope",
            "intercept",
            "n_points",
        ),
        rows=points_rows + fit_rows,
        provenance=provenance,
    )


def emit_posttraining_deltas(
    records: Sequence[MetricsRecord],
    pairing: Mapping[str, str],
    provenance: str = "",
) -> FigureData:
    """Per base family and setting: metric(post-trained) - metric(base),
    averaged within the family (figure 6), plus solver-accuracy deltas.

    ``pairing`` maps each base model name to its post-trained counterpart;
    base models without a pairing are skipped with a warning.
    """
    specs: dict[str, ModelSpec] = {}
    for record in records:
        specs.setdefault(record.verifier.name, record.verifier)
        specs.setdefault(record.solver.name, record.solver)
    base_models = sorted(
        name for name, spec in specs.items() if spec.kind == "base"
    )
    for name in base_models:
        if name not in pairing:
            logger.warning("base model %s has no post-trained pairing; skipped", name)

    deltas: dict[tuple[str, str, str], list[float]] = {}
    pair_counts: dict[tuple[str, str, str], int] = {}
    for base_name, post_name in sorted(pairing.items()):
        if base_name not in specs or post_name not in specs:
            logger.warning(
                "pairing %s -> %s references models absent from records; skipped",
                base_name,
                post_name,
            )
            continue
        base, post = specs[base_name], specs[post_name]
        for metric in METRIC_FIELDS:
            settings = (Setting.SELF,) if metric == "solver_acc" else SETTING_ORDER
            for setting in settings:
                base_agg = aggregate_setting(records, base, metric, setting)
                post_agg = aggregate_setting(records, post, metric, setting)
                key = (base.family, setting.value, metric)
                pair_counts[key] = pair_counts.get(key, 0) + 1
                if base_agg.value is None or post_agg.value is None:
                    continue
                deltas.setdefault(key, []).append(post_agg.value - base_agg.value)

    rows = []
    for key in sorted(pair_counts):
        family, setting_value, metric = key
        values = deltas.get(key, [])
        rows.append(
            {
                "family": family,
                "setting": setting_value,
                "metric": metric,
                "delta": sum(values) / len(values) if values else None,
                "n_pairs": pair_counts[key],
                "n_used": len(values),
            }
        )
    return FigureData(
        figure_id="posttraining_deltas",
        columns=("family", "setting", "metric", "delta", "n_pairs", "n_used"),
        rows=rows,
        provenance=provenance,
    )


def emit_dataset_verifiability(
    records: Sequence[MetricsRecord], provenance: str = ""
) -> FigureData:
    """Per dataset: mean solver accuracy vs mean verifier metric per setting
    (figure 7), for spotting clusters of inherently verifiable tasks."""
    datasets = sorted({record.dataset for record in records})
    if len(datasets) < 2:
        raise ValueError("need records spanning at least 2 datasets")
    rows = []
    for dataset in datasets:
        subset = [r for r in records if r.dataset == dataset]
        by_solver: dict[str, float] = {}
        for record in subset:
            by_solver.setdefault(record.solver.name, record.solver_acc)
        mean_solver_acc = sum(by_solver.values()) / len(by_solver)
        for setting in SETTING_ORDER:
            part = [r for r in subset if classify_setting(r.solver, r.verifier) == setting]
            for metric in METRIC_FIELDS:
                values = [
                    getattr(r, metric) for r in part if getattr(r, metric) is not None
                ]
                rows.append(
                    {
                        "dataset": dataset,
                        "setting": setting.value,
                        "metric": metric,
                        "mean_solver_acc": mean_solver_acc,
                        "value": sum(values) / len(values) if values else None,
                        "n_records": len(part),
                        "n_skipped": len(part) - len(values),
                    }
                )
    return FigureData(
        figure_id="dataset_verifiability",
        columns=(
            "dataset",
            "setting",
            "metric",
            "mean_solver_acc",
            "value",
            "n_records",
            "n_skipped",
        ),
        rows=rows,
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# Serialization.
# ---------------------------------------------------------------------------


def _cell(value: object) -> str:
    if value is None:
        return ""
    return str(value)


def write_figure_csv(
    figure: FigureData, out_dir: str | Path, filename: str | None = None
) -> Path:
    out_path = Path(out_dir) / (filename or f"{figure.figure_id}.csv")
    with open(out_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(figure.columns)
        for row in figure.rows:
            writer.writerow([_cell(row.get(col)) for col in figure.columns])
    return out_path


def write_figure_index(figures: Sequence[FigureData], out_dir: str | Path) -> Path:
    index = {
        figure.figure_id: {
            "csv": f"{figure.figure_id}.csv",
            "columns": list(figure.columns),
            "rows": len(figure.rows),
            "provenance": figure.provenance,
        }
        for figure in figures
    }
    out_path = Path(out_dir) / "figures.json"
    with open(out_path, "w", encoding="utf-8") as handle:
        json.dump(index, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return out_path
