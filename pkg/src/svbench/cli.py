"""Command-line entry points.

Subcommands share one JSON run config and one store directory:

    svbench generate --task 3sat --seed 0 --count 1000 --out data/3sat.jsonl
    svbench solve --config run.json --store runs/demo
    svbench verify --config run.json --store runs/demo
    svbench reject-sample --config run.json --store runs/demo
    svbench similarity --config run.json --store runs/demo
    svbench report --figures 2,3,4,5,6,7 --store runs/demo --out runs/demo/figures
    svbench simulate --acc 0.5 --tpr 0.9 --fpr 0.2 --problems 100000 --caps 1,5,9,50

Passes checkpoint per (model, dataset) and resume from the store, so an
aborted run can be re-invoked with the same arguments.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from collections import defaultdict
from pathlib import Path

from . import __version__
from .answers import Verdict
from .config import RunConfig, build_embedder, build_runner, load_config
from .engine import (
    compare_theory,
    expected_final_accuracy,
    simulate_rejection_batch,
)
from .metrics import (
    ConfusionCounts,
    accumulate,
    gain_closed_form,
    make_record,
    precision_closed_form,
    similarity_score,
)
from .models import EndpointError
from .report import (
    emit_dataset_verifiability,
    emit_posttraining_deltas,
    emit_setting_tables,
    emit_similarity_correlation,
    emit_theory_comparison,
    write_figure_csv,
    write_figure_index,
)
from .store import (
    ATTEMPTS_FILE,
    METRICS_CSV,
    METRICS_JSONL,
    SIMILARITY_CSV,
    TRACES_FILE,
    VERDICTS_FILE,
    add_checkpoint,
    append_jsonl,
    attempt_from_row,
    attempt_to_row,
    load_checkpoints,
    metrics_from_row,
    metrics_to_row,
    read_jsonl,
    trace_from_row,
    trace_to_row,
    update_manifest,
    verdict_to_row,
    write_jsonl,
    write_metrics_csv,
)
from .taskgen import GENERATORS, read_problems, write_problems

logger = logging.getLogger(__name__)


def _base_manifest(config: RunConfig) -> dict:
    return {
        "config_hash": config.fingerprint,
        "package_version": __version__,
        "python_version": platform.python_version(),
        "run_seed": config.run_seed,
        "datasets": {name: path for name, path in config.datasets},
    }


def _load_datasets(config: RunConfig) -> dict[str, list]:
    return {name: read_problems(path) for name, path in config.datasets}


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    generator = GENERATORS[args.task]
    problems = generator(args.seed, args.count)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_problems(problems, out)
    print(f"wrote {len(problems)} {args.task} problems to {out}")
    return 0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def cmd_solve(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    store = Path(args.store)
    store.mkdir(parents=True, exist_ok=True)
    runner = build_runner(config, store)
    datasets = _load_datasets(config)
    done = load_checkpoints(store)
    discard_rates: dict[str, float] = {}
    for solver_name in config.solvers:
        solver = config.spec(solver_name)
        for dataset_name, problems in datasets.items():
            checkpoint = f"solve:{solver_name}:{dataset_name}"
            if checkpoint in done:
                logger.info("skipping completed pass %s", checkpoint)
                continue
            attempts = runner.solve_pass(
                solver, problems, config.samples_per_problem, config.generation
            )
            append_jsonl(
                store / ATTEMPTS_FILE,
                (attempt_to_row(a, dataset_name) for a in attempts),
            )
            discarded = sum(1 for a in attempts if not a.extracted.present)
            discard_rates[f"{solver_name}/{dataset_name}"] = discarded / len(attempts)
            add_checkpoint(store, checkpoint)
            logger.info(
                "solved %s on %s: %d attempts, %d discarded",
                solver_name,
                dataset_name,
                len(attempts),
                discarded,
            )
    manifest = _base_manifest(config)
    manifest["discard_rates"] = discard_rates
    update_manifest(store, manifest)
    print(f"solve pass complete: attempts in {store / ATTEMPTS_FILE}")
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _attempts_by_group(store: Path, config: RunConfig) -> dict[tuple[str, str], list]:
    specs = config.specs()
    groups: dict[tuple[str, str], list] = defaultdict(list)
    for row in read_jsonl(store / ATTEMPTS_FILE):
        groups[(row["solver"], row["dataset"])].append(attempt_from_row(row, specs))
    return dict(groups)


def cmd_verify(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    store = Path(args.store)
    runner = build_runner(config, store)
    datasets = _load_datasets(config)
    problems_by_id = {
        problem.id: problem for problems in datasets.values() for problem in problems
    }
    groups = _attempts_by_group(store, config)
    done = load_checkpoints(store)

    for verifier_name in config.verifiers:
        verifier = config.spec(verifier_name)
        for (solver_name, dataset_name), attempts in sorted(groups.items()):
            checkpoint = f"verify:{verifier_name}:{solver_name}:{dataset_name}"
            if checkpoint in done:
                logger.info("skipping completed pass %s", checkpoint)
                continue
            present = [a for a in attempts if a.extracted.present]
            judged = runner.verify_pass_texts(
                verifier, problems_by_id, present, config.generation
            )
            append_jsonl(
                store / VERDICTS_FILE,
                (
                    verdict_to_row(verifier, attempt, dataset_name, text, verdict)
                    for attempt, text, verdict in judged
                ),
            )
            add_checkpoint(store, checkpoint)
            logger.info(
                "verified %s on %s/%s: %d judgments",
                verifier_name,
                solver_name,
                dataset_name,
                len(judged),
            )

    records, unparseable_rates = _metrics_from_store(store, config)
    write_jsonl(store / METRICS_JSONL, (metrics_to_row(r) for r in records))
    write_metrics_csv(records, store / METRICS_CSV)
    if records:
        aggregates = emit_setting_tables(records, provenance=config.fingerprint)
        write_figure_csv(aggregates, store, filename="aggregates.csv")
    manifest = _base_manifest(config)
    manifest["unparseable_rates"] = unparseable_rates
    update_manifest(store, manifest)
    print(f"verify pass complete: {len(records)} metrics rows in {store / METRICS_JSONL}")
    return 0


def _metrics_from_store(store: Path, config: RunConfig):
    """Rebuild all (solver, verifier, dataset) metrics from stored records."""
    solver_counts: dict[tuple[str, str], ConfusionCounts] = defaultdict(ConfusionCounts)
    attempt_correct: dict[tuple[str, str, str, int], bool] = {}
    for row in read_jsonl(store / ATTEMPTS_FILE):
        key = (row["solver"], row["dataset"])
        solver_counts[key] = solver_counts[key].record_attempt(
            row["answer_present"], row["correct"]
        )
        if row["answer_present"]:
            attempt_correct[
                (row["solver"], row["dataset"], row["problem_id"], row["index"])
            ] = bool(row["correct"])

    confusion: dict[tuple[str, str, str], ConfusionCounts] = {}
    for row in read_jsonl(store / VERDICTS_FILE):
        triple = (row["solver"], row["verifier"], row["dataset"])
        counts = confusion.get(triple)
        if counts is None:
            counts = solver_counts[(row["solver"], row["dataset"])]
        is_correct = attempt_correct[
            (row["solver"], row["dataset"], row["problem_id"], row["index"])
        ]
        verdict = Verdict(
            accepted=bool(row["accepted"]) if row["parse_ok"] else False,
            parse_ok=row["parse_ok"],
        )
        confusion[triple] = accumulate(counts, is_correct, verdict)

    specs = config.specs()
    records = []
    unparseable_rates: dict[str, float] = {}
    for triple in sorted(confusion):
        solver_name, verifier_name, dataset_name = triple
        counts = confusion[triple]
        if counts.verified == 0 or counts.solver_total == 0:
            logger.warning("no usable judgments for %s; skipped", triple)
            continue
        records.append(
            make_record(specs[solver_name], specs[verifier_name], dataset_name, counts)
        )
        judged = counts.verified + counts.unparseable_verdicts
        unparseable_rates[f"{verifier_name}/{solver_name}/{dataset_name}"] = (
            counts.unparseable_verdicts / judged if judged else 0.0
        )
    return records, unparseable_rates


# ---------------------------------------------------------------------------
# reject-sample
# ---------------------------------------------------------------------------


def cmd_reject_sample(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    store = Path(args.store)
    store.mkdir(parents=True, exist_ok=True)
    runner = build_runner(config, store)
    datasets = _load_datasets(config)
    done = load_checkpoints(store)
    incomplete: dict[str, int] = {}
    for solver_name in config.solvers:
        solver = config.spec(solver_name)
        for verifier_name in config.verifiers:
            verifier = config.spec(verifier_name)
            for dataset_name, problems in datasets.items():
                checkpoint = f"reject:{solver_name}:{verifier_name}:{dataset_name}"
                if checkpoint in done:
                    logger.info("skipping completed pass %s", checkpoint)
                    continue
                traces = []
                failures = 0
                for problem in problems:
                    try:
                        traces.append(
                            runner.rejection_sample(
                                solver,
                                verifier,
                                problem,
                                config.max_attempts,
                                config.generation,
                            )
                        )
                    except EndpointError as exc:
                        failures += 1
                        logger.warning(
                            "incomplete trace for %s (%s): %s", problem.id, checkpoint, exc
                        )
                append_jsonl(
                    store / TRACES_FILE,
                    (trace_to_row(t, dataset_name) for t in traces),
                )
                if failures:
                    incomplete[f"{solver_name}/{verifier_name}/{dataset_name}"] = failures
                add_checkpoint(store, checkpoint)
                logger.info(
                    "rejection sampling %s -> %s on %s: %d traces",
                    solver_name,
                    verifier_name,
                    dataset_name,
                    len(traces),
                )
    manifest = _base_manifest(config)
    manifest["incomplete_traces"] = incomplete
    update_manifest(store, manifest)
    print(f"rejection sampling complete: traces in {store / TRACES_FILE}")
    return 0


# ---------------------------------------------------------------------------
# similarity
# ---------------------------------------------------------------------------


def cmd_similarity(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    store = Path(args.store)
    embedder = build_embedder(config)
    solutions: dict[str, dict[str, str]] = defaultdict(dict)
    for row in read_jsonl(store / ATTEMPTS_FILE):
        if row["index"] == 1:
            solutions[row["solver"]][f"{row['dataset']}/{row['problem_id']}"] = row[
                "raw_text"
            ]
    names = sorted(solutions)
    rows = []
    for i, name_a in enumerate(names):
        for name_b in names[i + 1 :]:
            result = similarity_score(solutions[name_a], solutions[name_b], embedder)
            rows.append(
                {
                    "model_a": name_a,
                    "model_b": name_b,
                    "score": result.score,
                    "used": result.used,
                    "skipped": result.skipped,
                }
            )
    with open(store / SIMILARITY_CSV, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["model_a", "model_b", "score", "used", "skipped"])
        for row in rows:
            writer.writerow(
                [
                    row["model_a"],
                    row["model_b"],
                    "" if row["score"] is None else row["score"],
                    row["used"],
                    row["skipped"],
                ]
            )
    manifest = _base_manifest(config)
    manifest["embedding_provider"] = embedder.identity
    update_manifest(store, manifest)
    print(f"similarity scores for {len(rows)} pairs in {store / SIMILARITY_CSV}")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

_FIGURE_EMITTERS = {
    "2": "setting_tables",
    "3": "setting_tables",
    "4": "theory_comparison",
    "5": "similarity_correlation",
    "6": "posttraining_deltas",
    "7": "dataset_verifiability",
}


def _load_similarity(store: Path) -> dict[frozenset, float]:
    scores: dict[frozenset, float] = {}
    path = store / SIMILARITY_CSV
    if not path.exists():
        return scores
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            if row["score"]:
                scores[frozenset((row["model_a"], row["model_b"]))] = float(row["score"])
    return scores


def cmd_report(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else None
    store = Path(args.store)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    requested = [f.strip() for f in args.figures.split(",") if f.strip()]
    unknown = [f for f in requested if f not in _FIGURE_EMITTERS]
    if unknown:
        raise SystemExit(f"unknown figures: {unknown}; choose from 2,3,4,5,6,7")
    wanted = {_FIGURE_EMITTERS[f] for f in requested}

    records = [metrics_from_row(row) for row in read_jsonl(store / METRICS_JSONL)]
    provenance = ""
    manifest_path = store / "manifest.json"
    if manifest_path.exists():
        provenance = json.loads(manifest_path.read_text(encoding="utf-8")).get(
            "config_hash", ""
        )

    figures = []
    if "setting_tables" in wanted:
        figures.append(emit_setting_tables(records, provenance))
    if "theory_comparison" in wanted:
        specs = {}
        for record in records:
            specs[record.solver.name] = record.solver
            specs[record.verifier.name] = record.verifier
        traces_by_triple: dict[tuple[str, str, str], list] = defaultdict(list)
        for row in read_jsonl(store / TRACES_FILE):
            traces_by_triple[(row["solver"], row["verifier"], row["dataset"])].append(
                trace_from_row(row, specs)
            )
        caps = config.report_caps if config else [5, 9]
        figures.append(
            emit_theory_comparison(compare_theory(records, traces_by_triple, caps), provenance)
        )
    if "similarity_correlation" in wanted:
        scores = _load_similarity(store)
        pair_scores = [
            (scores[frozenset((r.solver.name, r.verifier.name))], r)
            for r in records
            if r.solver.name != r.verifier.name
            and frozenset((r.solver.name, r.verifier.name)) in scores
        ]
        figures.append(emit_similarity_correlation(pair_scores, provenance))
    if "posttraining_deltas" in wanted:
        pairing = config.posttrain_pairs if config else {}
        if not pairing:
            logger.warning("no posttrain_pairs in config; figure 6 will be empty")
        figures.append(emit_posttraining_deltas(records, pairing, provenance))
    if "dataset_verifiability" in wanted:
        figures.append(emit_dataset_verifiability(records, provenance))

    for figure in figures:
        path = write_figure_csv(figure, out)
        print(f"wrote {path} ({len(figure.rows)} rows)")
    write_figure_index(figures, out)
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    accs = [float(x) for x in args.acc.split(",")]
    tprs = [float(x) for x in args.tpr.split(",")]
    fprs = [float(x) for x in args.fpr.split(",")]
    caps = [int(x) for x in args.caps.split(",")]
    rows = []
    for acc in accs:
        for tpr in tprs:
            for fpr in fprs:
                for cap in caps:
                    batch = simulate_rejection_batch(
                        acc, tpr, fpr, args.problems, cap, args.seed
                    )
                    expected = expected_final_accuracy(acc, tpr, fpr, cap)
                    sigma = (expected * (1 - expected) / args.problems) ** 0.5
                    try:
                        precision = precision_closed_form(acc, tpr, fpr)
                        gain = gain_closed_form(acc, tpr, fpr)
                    except ValueError:
                        precision = None
                        gain = None
                    rows.append(
                        {
                            "acc": acc,
                            "tpr": tpr,
                            "fpr": fpr,
                            "cap": cap,
                            "n_problems": args.problems,
                            "final_accuracy": batch.final_accuracy,
                            "expected_final_accuracy": expected,
                            "abs_error": abs(batch.final_accuracy - expected),
                            "three_sigma": 3 * sigma,
                            "within_3sigma": abs(batch.final_accuracy - expected)
                            <= 3 * sigma,
                            "baseline_accuracy": batch.baseline_accuracy,
                            "empirical_gain": batch.empirical_gain,
                            "precision_limit": precision,
                            "theoretical_gain": gain,
                            "mean_attempts": batch.mean_attempts,
                        }
                    )
    columns = list(rows[0].keys())
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(columns)
            for row in rows:
                writer.writerow(["" if row[c] is None else row[c] for c in columns])
        print(f"wrote {len(rows)} simulation rows to {out}")
    ok = sum(1 for row in rows if row["within_3sigma"])
    print(f"{ok}/{len(rows)} cells within 3-sigma of the closed-form prediction")
    return 0 if ok == len(rows) else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svbench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"svbench {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate a synthetic task corpus")
    p_gen.add_argument("--task", choices=sorted(GENERATORS), required=True)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--count", type=int, default=1000)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_generate)

    for name, func, help_text in (
        ("solve", cmd_solve, "run solver passes over every dataset"),
        ("verify", cmd_verify, "judge stored attempts and compute metrics"),
        ("reject-sample", cmd_reject_sample, "bounded rejection-sampling experiment"),
        ("similarity", cmd_similarity, "pairwise solution-similarity scores"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--store", required=True)
        p.set_defaults(func=func)

    p_rep = sub.add_parser("report", help="emit figure data CSVs from a store")
    p_rep.add_argument("--figures", default="2,3,4,5,6,7")
    p_rep.add_argument("--store", required=True)
    p_rep.add_argument("--out", required=True)
    p_rep.add_argument("--config", default=None)
    p_rep.set_defaults(func=cmd_report)

    p_sim = sub.add_parser(
        "simulate", help="Monte Carlo rejection sampling vs the closed form"
    )
    p_sim.add_argument("--acc", default="0.3,0.5,0.7")
    p_sim.add_argument("--tpr", default="0.7,0.9")
    p_sim.add_argument("--fpr", default="0.1,0.3")
    p_sim.add_argument("--caps", default="1,5,9,50")
    p_sim.add_argument("--problems", type=int, default=100_000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
