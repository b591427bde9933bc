from __future__ import annotations

import csv
import json
import random

import pytest

import oracles
from svbench.metrics import ConfusionCounts, MetricsRecord, gain_closed_form
from svbench.models import ModelSpec
from svbench.report import (
    emit_dataset_verifiability,
    emit_posttraining_deltas,
    emit_setting_tables,
    emit_similarity_correlation,
    least_squares,
    write_figure_csv,
    write_figure_index,
)


def _spec(name, family, size=1.0, kind="post-trained"):
    return ModelSpec(name=name, family=family, size_b=size, kind=kind)


def _record(solver, verifier, dataset="d", **metric_overrides):
    metrics = {
        "solver_acc": 0.5,
        "verifier_acc": 0.6,
        "tpr": 0.7,
        "fpr": 0.2,
        "fnr": 0.3,
        "precision": 0.7,
        "recall": 0.7,
        "f1": 0.7,
        "gain": 0.2,
    }
    metrics.update(metric_overrides)
    counts = ConfusionCounts(
        tp=7, fp=2, tn=8, fn=3, solver_correct=10, solver_total=20
    )
    return MetricsRecord(
        solver=solver, verifier=verifier, dataset=dataset, counts=counts, **metrics
    )


def _pool(n_families=4, per_family=3):
    return [
        _spec(f"fam{f}-m{m}", family=f"fam{f}", size=float(m + 1))
        for f in range(n_families)
        for m in range(per_family)
    ]


def _full_records(pool, datasets=("d1", "d2")):
    records = []
    for dataset in datasets:
        for verifier in pool:
            for solver in pool:
                records.append(_record(solver, verifier, dataset))
    return records


# --- setting tables (figures 2 and 3) ---------------------------------------------


def test_setting_tables_pool_shape():
    pool = _pool()
    records = _full_records(pool)
    figure = emit_setting_tables(records)
    points = [row for row in figure.rows if row["row_type"] == "point"]
    fits = [row for row in figure.rows if row["row_type"] == "ols_fit"]
    verifiers = {row["verifier"] for row in points}
    assert len(verifiers) == 12
    # every verifier gets all three settings x all nine metrics, plus one
    # trend fit per (setting, metric) panel
    assert len(points) == 12 * 3 * 9
    assert len(fits) == 3 * 9
    by_setting = {}
    for row in points:
        by_setting.setdefault(row["setting"], set()).add(row["verifier"])
        if row["metric"] == "gain":
            assert row["value"] == pytest.approx(0.2)
    assert set(by_setting) == {"self", "intra_family", "cross_family"}
    for row in points:
        if row["setting"] == "intra_family":
            assert row["n_records"] == 4  # 2 intra solvers x 2 datasets
        if row["setting"] == "cross_family":
            assert row["n_records"] == 18  # 9 cross solvers x 2 datasets


def test_setting_tables_trend_fit_matches_oracle():
    pool = _pool(3, 2)
    rng = random.Random(13)
    records = []
    for verifier in pool:
        own_acc = rng.uniform(0.2, 0.9)
        for solver in pool:
            gain = 0.05 + 0.4 * own_acc  # planted linear relation
            records.append(
                _record(solver, verifier, solver_acc=own_acc, gain=gain)
            )
    figure = emit_setting_tables(records)
    fit = next(
        row
        for row in figure.rows
        if row["row_type"] == "ols_fit"
        and row["setting"] == "cross_family"
        and row["metric"] == "gain"
    )
    points = [
        (row["verifier_solver_acc"], row["value"])
        for row in figure.rows
        if row["row_type"] == "point"
        and row["setting"] == "cross_family"
        and row["metric"] == "gain"
    ]
    slope, intercept = oracles.ols_fit(points)
    assert fit["slope"] == pytest.approx(slope, abs=1e-9)
    assert fit["intercept"] == pytest.approx(intercept, abs=1e-9)
    assert fit["slope"] == pytest.approx(0.4, abs=1e-9)


def test_setting_tables_single_model_pool_absent_partitions():
    model = _spec("only", family="solo")
    figure = emit_setting_tables([_record(model, model)])
    for row in figure.rows:
        if row["row_type"] != "point":
            continue
        if row["setting"] in ("intra_family", "cross_family"):
            assert row["value"] is None
            assert row["n_records"] == 0


def test_setting_tables_permutation_invariant():
    pool = _pool(2, 2)
    records = _full_records(pool)
    shuffled = records[:]
    random.Random(5).shuffle(shuffled)
    assert emit_setting_tables(records) == emit_setting_tables(shuffled)


def test_setting_tables_requires_records():
    with pytest.raises(ValueError):
        emit_setting_tables([])


# --- post-training deltas (figure 6) -----------------------------------------------


def _posttrain_records(base_gain, post_gain, base_fpr=0.2, post_fpr=0.2):
    base_a = _spec("alpha-1b-base", "alpha-base", 1.0, "base")
    base_b = _spec("alpha-3b-base", "alpha-base", 3.0, "base")
    post_a = _spec("alpha-1b", "alpha", 1.0)
    post_b = _spec("alpha-3b", "alpha", 3.0)
    pool = [base_a, base_b, post_a, post_b]
    records = []
    for verifier in pool:
        for solver in pool:
            is_post = verifier.kind == "post-trained"
            records.append(
                _record(
                    solver,
                    verifier,
                    gain=post_gain if is_post else base_gain,
                    fpr=post_fpr if is_post else base_fpr,
                )
            )
    pairing = {"alpha-1b-base": "alpha-1b", "alpha-3b-base": "alpha-3b"}
    return records, pairing


def test_posttraining_identical_metrics_zero_delta():
    records, pairing = _posttrain_records(base_gain=0.3, post_gain=0.3)
    figure = emit_posttraining_deltas(records, pairing)
    for row in figure.rows:
        if row["metric"] == "gain":
            assert row["delta"] == pytest.approx(0.0)
            assert row["n_pairs"] == 2


def test_posttraining_delta_direction():
    records, pairing = _posttrain_records(
        base_gain=0.1, post_gain=0.3, base_fpr=0.1, post_fpr=0.4
    )
    figure = emit_posttraining_deltas(records, pairing)
    gains = {row["setting"]: row["delta"] for row in figure.rows if row["metric"] == "gain"}
    fprs = {row["setting"]: row["delta"] for row in figure.rows if row["metric"] == "fpr"}
    for setting in ("self", "intra_family", "cross_family"):
        assert gains[setting] == pytest.approx(0.2)
        assert fprs[setting] == pytest.approx(0.3)
    assert all(row["family"] == "alpha-base" for row in figure.rows)


def test_posttraining_solver_acc_delta_single_setting():
    records, pairing = _posttrain_records(base_gain=0.1, post_gain=0.3)
    figure = emit_posttraining_deltas(records, pairing)
    solver_rows = [row for row in figure.rows if row["metric"] == "solver_acc"]
    assert len(solver_rows) == 1
    assert solver_rows[0]["setting"] == "self"


def test_posttraining_unpaired_model_warns_and_skips(caplog):
    records, pairing = _posttrain_records(base_gain=0.1, post_gain=0.3)
    del pairing["alpha-3b-base"]
    with caplog.at_level("WARNING"):
        figure = emit_posttraining_deltas(records, pairing)
    assert any("alpha-3b-base" in message for message in caplog.messages)
    for row in figure.rows:
        if row["metric"] == "gain":
            assert row["n_pairs"] == 1


# --- similarity correlation (figure 5) ----------------------------------------------


def test_similarity_constant_metric_zero_slope():
    verifier = _spec("v", "f1")
    pair_scores = [
        (s, _record(_spec(f"s{i}", "f2"), verifier, gain=0.4))
        for i, s in enumerate([0.1, 0.5, 0.9])
    ]
    figure = emit_similarity_correlation(pair_scores)
    fits = [row for row in figure.rows if row["row_type"] == "fit" and row["metric"] == "gain"]
    assert fits[0]["slope"] == pytest.approx(0.0)


def test_similarity_two_point_fit():
    verifier = _spec("v", "f1")
    pair_scores = [
        (0.0, _record(_spec("s1", "f2"), verifier, gain=0.0)),
        (1.0, _record(_spec("s2", "f2"), verifier, gain=1.0)),
    ]
    figure = emit_similarity_correlation(pair_scores)
    fit = next(
        row for row in figure.rows if row["row_type"] == "fit" and row["metric"] == "gain"
    )
    assert fit["slope"] == pytest.approx(1.0)
    assert fit["intercept"] == pytest.approx(0.0)


def test_similarity_planted_linear_model_recovered():
    verifier = _spec("v", "f1")
    rng = random.Random(3)
    pair_scores = []
    for i in range(40):
        similarity = rng.uniform(0.0, 1.0)
        fpr = 0.1 + 0.5 * similarity
        pair_scores.append((similarity, _record(_spec(f"s{i}", "f2"), verifier, fpr=fpr)))
    figure = emit_similarity_correlation(pair_scores)
    fit = next(
        row for row in figure.rows if row["row_type"] == "fit" and row["metric"] == "fpr"
    )
    assert fit["slope"] == pytest.approx(0.5, rel=0.05)
    assert fit["intercept"] == pytest.approx(0.1, rel=0.05)
    # against the normal-equations oracle
    points = [
        (row["similarity"], row["value"])
        for row in figure.rows
        if row["row_type"] == "point" and row["metric"] == "fpr"
    ]
    slope, intercept = oracles.ols_fit(points)
    assert fit["slope"] == pytest.approx(slope, abs=1e-9)
    assert fit["intercept"] == pytest.approx(intercept, abs=1e-9)


def test_similarity_self_pairs_excluded_and_small_panels_absent():
    model = _spec("m", "f")
    other = _spec("s1", "g")
    pair_scores = [
        (1.0, _record(model, model)),
        (0.5, _record(other, model)),
    ]
    figure = emit_similarity_correlation(pair_scores)
    points = [row for row in figure.rows if row["row_type"] == "point"]
    assert all(row["solver"] != row["verifier"] for row in points)
    fit = next(row for row in figure.rows if row["row_type"] == "fit")
    assert fit["slope"] is None
    assert fit["n_points"] == 1


# --- dataset verifiability (figure 7) -------------------------------------------------


def test_dataset_verifiability_coincident_points():
    pool = _pool(2, 2)
    records = _full_records(pool, datasets=("d1", "d2"))
    figure = emit_dataset_verifiability(records)
    by_dataset = {}
    for row in figure.rows:
        if row["metric"] == "gain" and row["setting"] == "cross_family":
            by_dataset[row["dataset"]] = (row["mean_solver_acc"], row["value"])
    assert by_dataset["d1"] == by_dataset["d2"]


def test_dataset_verifiability_requires_two_datasets():
    pool = _pool(2, 2)
    with pytest.raises(ValueError):
        emit_dataset_verifiability(_full_records(pool, datasets=("only",)))


def test_dataset_verifiability_high_verifiability_dataset_gains_more():
    pool = _pool(2, 2)
    acc = 0.5
    easy_gain = gain_closed_form(acc, 0.9, 0.1)
    hard_gain = gain_closed_form(acc, 0.7, 0.3)
    assert easy_gain > hard_gain
    records = []
    for dataset, gain in (("easy", easy_gain), ("hard", hard_gain)):
        for verifier in pool:
            for solver in pool:
                records.append(_record(solver, verifier, dataset=dataset, gain=gain))
    figure = emit_dataset_verifiability(records)
    for setting in ("self", "intra_family", "cross_family"):
        values = {
            row["dataset"]: row["value"]
            for row in figure.rows
            if row["metric"] == "gain" and row["setting"] == setting
        }
        assert values["easy"] > values["hard"]


def test_dataset_verifiability_permutation_invariant():
    pool = _pool(2, 2)
    records = _full_records(pool)
    shuffled = records[:]
    random.Random(11).shuffle(shuffled)
    assert emit_dataset_verifiability(records) == emit_dataset_verifiability(shuffled)


# --- least squares ---------------------------------------------------------------------


def test_least_squares_against_oracle():
    rng = random.Random(7)
    points = [(rng.uniform(-3, 3), rng.uniform(-2, 2)) for _ in range(50)]
    slope, intercept = least_squares(points)
    expected_slope, expected_intercept = oracles.ols_fit(points)
    assert slope == pytest.approx(expected_slope, abs=1e-9)
    assert intercept == pytest.approx(expected_intercept, abs=1e-9)


def test_least_squares_degenerate_inputs():
    assert least_squares([(1.0, 2.0)]) is None
    assert least_squares([(1.0, 2.0), (1.0, 3.0)]) is None


# --- serialization -----------------------------------------------------------------------


def test_csv_serialization_absent_as_empty(tmp_path):
    model = _spec("only", family="solo")
    figure = emit_setting_tables([_record(model, model)])
    path = write_figure_csv(figure, tmp_path)
    with open(path, newline="") as handle:
        rows = list(csv.DictReader(handle))
    absent = [row for row in rows if row["setting"] == "cross_family"]
    assert absent and all(row["value"] == "" for row in absent)
    write_figure_index([figure], tmp_path)
    index = json.loads((tmp_path / "figures.json").read_text())
    assert index["setting_tables"]["rows"] == len(figure.rows)


def test_report_rerun_bit_identical(tmp_path):
    pool = _pool(2, 2)
    records = _full_records(pool)
    dir_a = tmp_path / "a"
    dir_b = tmp_path / "b"
    dir_a.mkdir()
    dir_b.mkdir()
    write_figure_csv(emit_setting_tables(records), dir_a)
    write_figure_csv(emit_setting_tables(records), dir_b)
    assert (dir_a / "setting_tables.csv").read_bytes() == (
        dir_b / "setting_tables.csv"
    ).read_bytes()
