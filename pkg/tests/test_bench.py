import json

import numpy as np
import pytest

from config.experiment import ExperimentConfig, load_experiment
from functions.bench_functions import (
    ERROR_STATUS,
    RUNS_SCHEMA,
    BenchService,
    build_domain,
    rank_matrix,
    rank_matrix_to_csv,
    runs_from_csv,
    runs_to_csv,
    summarize,
)
from functions.world_functions import ElevationMap, queries_to_csv, save_map
from models.schemas import EmittedPath, GoalSet, Query, RunRecord
from tests.conftest import open_grid
from utils.exceptions import ConfigError


def row(qid, rule, first=None, total=None, status=None, cost=10.0):
    emitted = [EmittedPath(cost=cost, expansions=first, iteration=0)] if first is not None else []
    return RunRecord(
        qid=qid,
        rule=rule,
        status=status or ("optimal-terminated" if first is not None else "failure"),
        emitted=emitted,
        first_expansions=first,
        best_expansions=first,
        total_expansions=total if total is not None else (first or 0),
        first_cost=cost if first is not None else None,
        best_cost=cost if first is not None else None,
    )


def pair(summary, a, b):
    return next(p for p in summary["pairs"] if p["a"] == a and p["b"] == b)


class TestSummarize:
    records = [
        row("q0", "A", 10), row("q0", "B", 20),
        row("q1", "A", 20), row("q1", "B", 20),
        row("q2", "A", 30), row("q2", "B", 15),
    ]

    def test_win_tie_and_loss_fractions_add_up(self):
        summary = summarize(self.records, resamples=200)
        ab, ba = pair(summary, "A", "B"), pair(summary, "B", "A")
        assert ab["win_ratio"] == pytest.approx(1 / 3)
        assert ab["tie_fraction"] == pytest.approx(1 / 3)
        assert ab["win_ratio"] + ab["tie_fraction"] + ba["win_ratio"] == pytest.approx(1.0)

    def test_speedup_is_conditional_on_wins(self):
        summary = summarize(self.records, resamples=200)
        ab = pair(summary, "A", "B")
        assert ab["speedup_mean"] == pytest.approx(2.0)
        assert ab["speedup_queries"] == 1
        assert ab["speedup_ci"] == pytest.approx([2.0, 2.0])

    def test_missing_path_loses_without_a_ratio(self):
        records = [row("q0", "A", None), row("q0", "B", 50)]
        summary = summarize(records, resamples=50)
        ba = pair(summary, "B", "A")
        assert ba["win_ratio"] == 1.0
        assert ba["speedup_queries"] == 0
        assert ba["speedup_mean"] is None

    def test_termination_against_iha(self):
        records = [
            row("q0", "iha", 100, total=400), row("q0", "H0", 50, total=100),
            row("q1", "iha", 100, total=300, status="budget"), row("q1", "H0", 50, total=100),
        ]
        summary = summarize(records, resamples=50)
        (entry,) = summary["termination"]
        assert entry["rule"] == "H0"
        assert entry["queries"] == 1
        assert entry["median"] == pytest.approx(4.0)

    def test_status_counts(self):
        summary = summarize([row("q0", "A", None), row("q1", "A", 5)], resamples=10)
        assert summary["status_counts"]["A"] == {"failure": 1, "optimal-terminated": 1}

    def test_summary_is_reproducible_from_the_csv(self):
        text = runs_to_csv(self.records)
        assert summarize(runs_from_csv(text), resamples=200) == summarize(self.records, resamples=200)


class TestRankMatrix:
    def test_rule_always_first(self):
        records = [row(f"q{i}", "A", 5) for i in range(4)] + [row(f"q{i}", "B", 9) for i in range(4)]
        rules, matrix, skipped = rank_matrix(records)
        assert rules == ["A", "B"]
        assert matrix == [[100.0, 0.0], [0.0, 100.0]]
        assert skipped == 0

    def test_ties_share_the_better_rank(self):
        records = [row("q0", "A", 5), row("q0", "B", 5)]
        _, matrix, _ = rank_matrix(records)
        assert matrix == [[100.0, 0.0], [100.0, 0.0]]

    def test_three_rules(self):
        records = [
            row("q0", "A", 1), row("q0", "B", 2), row("q0", "C", 3),
            row("q1", "A", 3), row("q1", "B", 1), row("q1", "C", 1),
        ]
        _, matrix, _ = rank_matrix(records, ["A", "B", "C"])
        assert matrix == [[50.0, 0.0, 50.0], [50.0, 50.0, 0.0], [50.0, 0.0, 50.0]]

    def test_queries_missing_a_rule_are_skipped(self):
        records = [row("q0", "A", 1), row("q0", "B", 2), row("q1", "A", 1)]
        _, matrix, skipped = rank_matrix(records, ["A", "B"])
        assert skipped == 1
        assert matrix[0] == [100.0, 0.0]

    def test_csv_layout(self):
        text = rank_matrix_to_csv(["A", "B"], [[100.0, 0.0], [0.0, 100.0]])
        assert text == "rule,rank_1,rank_2\nA,100.0,0.0\nB,0.0,100.0\n"


def test_runs_csv_keeps_every_column():
    records = [
        RunRecord(
            qid="q0", rule="H0", status="budget", total_expansions=7, world_digest="abc",
            emitted=[
                EmittedPath(cost=9.5, expansions=3, iteration=0),
                EmittedPath(cost=0.1 + 0.2, expansions=6, iteration=2),
            ],
            first_expansions=3, best_expansions=6, first_cost=9.5, best_cost=0.1 + 0.2,
        ),
        RunRecord(qid="q0", rule="ha", status=ERROR_STATUS, error="DomainFault: bad start, really"),
    ]
    text = runs_to_csv(records)
    assert text.startswith(RUNS_SCHEMA + "\n")
    assert runs_from_csv(text) == sorted(records, key=lambda r: (r.qid, r.rule))


def test_runs_csv_needs_the_schema_line():
    with pytest.raises(ConfigError):
        runs_from_csv("qid,rule\n")


def test_wrong_world_kind_for_the_domain():
    with pytest.raises(ConfigError):
        build_domain("kinodynamic", open_grid())
    with pytest.raises(ConfigError):
        build_domain("r2", ElevationMap(np.zeros((4, 4)), 1.0))


@pytest.fixture
def file_experiment(tmp_path):
    save_map(open_grid(), tmp_path / "open.occ")
    queries = [
        Query(qid="q0", start=(1.25, 1.25), goal=GoalSet(center=(4.25, 2.25), radius=0.3)),
        Query(qid="q1", start=(8.25, 8.25), goal=GoalSet(center=(6.25, 5.25), radius=0.3)),
    ]
    (tmp_path / "queries.csv").write_text(queries_to_csv(queries), encoding="utf-8")
    (tmp_path / "bench.toml").write_text(
        "\n".join(
            [
                'domain = "r2"',
                'rules = ["H0", "Hinf", "iha-rule", "iha", "ha"]',
                "budget = 300",
                f'out = "{tmp_path / "out"}"',
                "",
                "[world]",
                'generator = "file"',
                'map = "open.occ"',
                'queries = "queries.csv"',
                "",
                "[schedule]",
                "levels = 2",
                "base_cell = [0.5, 0.5]",
            ]
        ),
        encoding="utf-8",
    )
    return load_experiment(tmp_path / "bench.toml")


def test_sweep_writes_one_row_per_query_and_rule(file_experiment):
    service = BenchService(file_experiment)
    records = service.run()
    assert [(r.qid, r.rule) for r in records] == sorted(
        (q, rule) for q in ("q0", "q1") for rule in file_experiment.rules
    )
    assert all(r.status != ERROR_STATUS for r in records)
    summary = service.write(records)
    out = file_experiment.out
    assert runs_from_csv((out / "runs.csv").read_text(encoding="utf-8")) == [
        r.model_copy(update={"start": None, "goal": None}) for r in records
    ]
    assert json.loads((out / "summary.json").read_text(encoding="utf-8")) == json.loads(json.dumps(summary))


def test_sweep_is_deterministic_across_workers(file_experiment):
    serial = BenchService(file_experiment).run()
    parallel = BenchService(file_experiment.with_overrides(jobs=2)).run()
    assert runs_to_csv(serial) == runs_to_csv(parallel)


def test_budget_of_one_expansion(file_experiment):
    config = file_experiment.with_overrides(budget=1, rules=["H0"])
    records = BenchService(config).run()
    assert [r.status for r in records] == ["budget", "budget"]
    assert all(r.total_expansions == 1 for r in records)


def test_failed_run_becomes_an_error_row(file_experiment, tmp_path):
    bad = [Query(qid="bad", start=(-3.0, 1.0), goal=GoalSet(center=(4.25, 2.25), radius=0.3))]
    (tmp_path / "queries.csv").write_text(queries_to_csv(bad), encoding="utf-8")
    records = BenchService(file_experiment.with_overrides(rules=["H0", "iha"])).run()
    assert [r.status for r in records] == [ERROR_STATUS, ERROR_STATUS]
    assert records[0].error.startswith("DomainFault")


def test_snapshots_are_written_per_run(file_experiment):
    config = file_experiment.with_overrides(record_snapshots=True, rules=["H0"])
    service = BenchService(config)
    service.write(service.run())
    saved = RunRecord.model_validate_json((config.out / "records" / "q0__H0.json").read_text(encoding="utf-8"))
    assert saved.snapshot is not None and saved.path is not None
    assert saved.start == (1.25, 1.25)
    assert saved.domain_params == {}


def test_config_rejects_unknown_rules_and_mismatched_generators():
    with pytest.raises(ValueError):
        ExperimentConfig(rules=["H0", "best"])
    with pytest.raises(ValueError):
        ExperimentConfig(domain="se2")
    with pytest.raises(ConfigError):
        ExperimentConfig().with_overrides(rules=["H0", "H0"])
