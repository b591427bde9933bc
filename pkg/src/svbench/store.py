"""Line-delimited record store for run outputs.

One run directory holds problems' attempts, verdicts, traces, metrics, and a
manifest. Everything round-trips: records written here reload into the same
in-memory objects, which is what makes reports reproducible from the store
alone and lets the determinism checks compare raw bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .answers import ExtractedAnswer, Verdict
from .engine import Attempt, RejectionTrace
from .metrics import ConfusionCounts, METRIC_FIELDS, MetricsRecord
from .models import ModelSpec

ATTEMPTS_FILE = "attempts.jsonl"
VERDICTS_FILE = "verdicts.jsonl"
TRACES_FILE = "traces.jsonl"
METRICS_JSONL = "metrics.jsonl"
METRICS_CSV = "metrics.csv"
SIMILARITY_CSV = "similarity.csv"
MANIFEST_FILE = "manifest.json"
CHECKPOINTS_FILE = "checkpoints.json"
CACHE_FILE = "gencache.jsonl"


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True) + "\n")


def append_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "a", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                yield json.loads(line)


def config_fingerprint(raw_config: Mapping) -> str:
    canonical = json.dumps(raw_config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Model specs.
# ---------------------------------------------------------------------------


def spec_to_row(spec: ModelSpec) -> dict:
    return {
        "name": spec.name,
        "family": spec.family,
        "size_b": spec.size_b,
        "kind": spec.kind,
    }


def spec_from_row(row: dict) -> ModelSpec:
    return ModelSpec(
        name=row["name"], family=row["family"], size_b=row["size_b"], kind=row["kind"]
    )


# ---------------------------------------------------------------------------
# Attempts.
# ---------------------------------------------------------------------------


def attempt_to_row(attempt: Attempt, dataset: str) -> dict:
    return {
        "solver": attempt.solver.name,
        "dataset": dataset,
        "problem_id": attempt.problem_id,
        "index": attempt.index,
        "raw_text": attempt.raw_text,
        "answer_present": attempt.extracted.present,
        "answer": attempt.extracted.raw if attempt.extracted.present else None,
        "correct": attempt.correct,
    }


def attempt_from_row(row: dict, specs: Mapping[str, ModelSpec]) -> Attempt:
    present = row["answer_present"]
    return Attempt(
        solver=specs[row["solver"]],
        problem_id=row["problem_id"],
        index=row["index"],
        raw_text=row["raw_text"],
        extracted=ExtractedAnswer(raw=row["answer"] or "", present=present),
        correct=row["correct"],
    )


# ---------------------------------------------------------------------------
# Verdicts.
# ---------------------------------------------------------------------------


def verdict_to_row(
    verifier: ModelSpec, attempt: Attempt, dataset: str, raw_text: str, verdict: Verdict
) -> dict:
    return {
        "verifier": verifier.name,
        "solver": attempt.solver.name,
        "dataset": dataset,
        "problem_id": attempt.problem_id,
        "index": attempt.index,
        "raw_text": raw_text,
        "parse_ok": verdict.parse_ok,
        "accepted": verdict.accepted if verdict.parse_ok else None,
    }


def verdict_from_row(row: dict) -> Verdict:
    if not row["parse_ok"]:
        return Verdict(accepted=False, parse_ok=False)
    return Verdict(accepted=row["accepted"], parse_ok=True)


# ---------------------------------------------------------------------------
# Rejection traces.
# ---------------------------------------------------------------------------


def trace_to_row(trace: RejectionTrace, dataset: str) -> dict:
    return {
        "solver": trace.solver.name,
        "verifier": trace.verifier.name,
        "dataset": dataset,
        "problem_id": trace.problem_id,
        "accepted": trace.accepted,
        "final_index": trace.final.index,
        "attempts": [
            {
                "index": attempt.index,
                "raw_text": attempt.raw_text,
                "answer_present": attempt.extracted.present,
                "answer": attempt.extracted.raw if attempt.extracted.present else None,
                "correct": attempt.correct,
                "verdict": (
                    None
                    if verdict is None
                    else {
                        "parse_ok": verdict.parse_ok,
                        "accepted": verdict.accepted if verdict.parse_ok else None,
                    }
                ),
            }
            for attempt, verdict in trace.attempts
        ],
    }


def trace_from_row(row: dict, specs: Mapping[str, ModelSpec]) -> RejectionTrace:
    solver = specs[row["solver"]]
    attempts = []
    for item in row["attempts"]:
        attempt = Attempt(
            solver=solver,
            problem_id=row["problem_id"],
            index=item["index"],
            raw_text=item["raw_text"],
            extracted=ExtractedAnswer(
                raw=item["answer"] or "", present=item["answer_present"]
            ),
            correct=item["correct"],
        )
        verdict_row = item["verdict"]
        verdict = (
            None
            if verdict_row is None
            else Verdict(
                accepted=bool(verdict_row["accepted"]) if verdict_row["parse_ok"] else False,
                parse_ok=verdict_row["parse_ok"],
            )
        )
        attempts.append((attempt, verdict))
    final = next(a for a, _ in attempts if a.index == row["final_index"])
    return RejectionTrace(
        solver=solver,
        verifier=specs[row["verifier"]],
        problem_id=row["problem_id"],
        attempts=tuple(attempts),
        final=final,
        accepted=row["accepted"],
    )


# ---------------------------------------------------------------------------
# Metrics records.
# ---------------------------------------------------------------------------

_COUNT_FIELDS = (
    "tp",
    "fp",
    "tn",
    "fn",
    "solver_correct",
    "solver_total",
    "discarded_solver",
    "unparseable_verdicts",
)


def metrics_to_row(record: MetricsRecord) -> dict:
    row: dict = {
        "solver": spec_to_row(record.solver),
        "verifier": spec_to_row(record.verifier),
        "dataset": record.dataset,
        "setting": record.setting.value,
    }
    for field in _COUNT_FIELDS:
        row[field] = getattr(record.counts, field)
    for field in METRIC_FIELDS:
        row[field] = getattr(record, field)
    return row


def metrics_from_row(row: dict) -> MetricsRecord:
    counts = ConfusionCounts(**{field: row[field] for field in _COUNT_FIELDS})
    return MetricsRecord(
        solver=spec_from_row(row["solver"]),
        verifier=spec_from_row(row["verifier"]),
        dataset=row["dataset"],
        counts=counts,
        **{field: row[field] for field in METRIC_FIELDS},
    )


def write_metrics_csv(records: Iterable[MetricsRecord], path: str | Path) -> None:
    columns = (
        ["solver", "solver_family", "solver_size_b", "solver_kind"]
        + ["verifier", "verifier_family", "verifier_size_b", "verifier_kind"]
        + ["dataset", "setting"]
        + list(_COUNT_FIELDS)
        + list(METRIC_FIELDS)
    )
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for record in records:
            row = [
                record.solver.name,
                record.solver.family,
                record.solver.size_b,
                record.solver.kind,
                record.verifier.name,
                record.verifier.family,
                record.verifier.size_b,
                record.verifier.kind,
                record.dataset,
                record.setting.value,
            ]
            row += [getattr(record.counts, field) for field in _COUNT_FIELDS]
            row += [
                "" if getattr(record, field) is None else getattr(record, field)
                for field in METRIC_FIELDS
            ]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Manifest and checkpoints.
# ---------------------------------------------------------------------------


def update_manifest(store_dir: str | Path, updates: Mapping) -> dict:
    """Merge updates into the run manifest (created on first write)."""
    path = Path(store_dir) / MANIFEST_FILE
    manifest: dict = {}
    if path.exists():
        manifest = json.loads(path.read_text(encoding="utf-8"))
    for key, value in updates.items():
        if isinstance(value, Mapping) and isinstance(manifest.get(key), dict):
            manifest[key].update(value)
        else:
            manifest[key] = value if not isinstance(value, Mapping) else dict(value)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return manifest


def load_checkpoints(store_dir: str | Path) -> set[str]:
    path = Path(store_dir) / CHECKPOINTS_FILE
    if not path.exists():
        return set()
    return set(json.loads(path.read_text(encoding="utf-8")))


def add_checkpoint(store_dir: str | Path, name: str) -> None:
    done = load_checkpoints(store_dir)
    done.add(name)
    path = Path(store_dir) / CHECKPOINTS_FILE
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(sorted(done), handle, indent=2)
        handle.write("\n")
