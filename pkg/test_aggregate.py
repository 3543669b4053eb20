"""
Tests for the multi-run aggregate and the `aggregate` command.

Two synthetic run directories stand in for seeded training runs: their
metrics.csv and eval-test.json are written with the same RunReporter the
train and eval commands use.
"""

import json

import pytest

from app.schemas import EvalSummary
from backend.data.textdata import DataError
from backend.training.trainer import EpochMetrics
from main import main
from services.reporting import RunReporter, aggregate_runs
from services.reporting.aggregate import summarize_run


def epoch(number, valid_ppl, postselection_mean):
    return EpochMetrics(
        epoch=number,
        train_loss=5.0,
        valid_ppl=valid_ppl,
        postselection_mean=postselection_mean,
        postselection_min=postselection_mean / 2,
        postselection_max=min(1.0, 2 * postselection_mean),
        learning_rate=1e-3,
    )


def write_run(run_dir, rows, test_ppl=None):
    with RunReporter(str(run_dir)) as reporter:
        reporter.write_metrics(rows)
        if test_ppl is not None:
            reporter.write_eval_summary(EvalSummary(
                checkpoint=str(run_dir / "checkpoint.npz"),
                split="test",
                windows=100,
                perplexity=test_ppl,
                postselection_mean=0.5,
                postselection_min=0.1,
                postselection_max=0.9,
            ))
    return str(run_dir)


@pytest.fixture
def two_runs(tmp_path):
    first = write_run(
        tmp_path / "seed0",
        [epoch(1, 120.0, 0.4), epoch(2, 100.0, 0.5), epoch(3, 110.0, 0.6)],
        test_ppl=105.0,
    )
    second = write_run(tmp_path / "seed1", [epoch(1, 90.0, 0.3), epoch(2, 95.0, 0.7)], test_ppl=98.0)
    return first, second


def test_summarize_picks_best_epoch(two_runs):
    summary = summarize_run(two_runs[0])
    assert summary.best_epoch == 2
    assert summary.best_valid_ppl == 100.0
    assert summary.postselection_mean == 0.5
    assert summary.test_ppl == 105.0


def test_summarize_breaks_ties_by_earliest_epoch(tmp_path):
    run = write_run(tmp_path / "tie", [epoch(1, 80.0, 0.2), epoch(2, 80.0, 0.9)])
    summary = summarize_run(run)
    assert summary.best_epoch == 1
    assert summary.test_ppl is None


def test_aggregate_two_runs(two_runs):
    report = aggregate_runs(list(two_runs))
    assert report.num_runs == 2
    assert report.valid_ppl_mean == pytest.approx(95.0)
    assert report.valid_ppl_std == pytest.approx(50 ** 0.5)
    assert report.test_runs == 2
    assert report.test_ppl_mean == pytest.approx(101.5)
    assert report.test_ppl_std == pytest.approx(24.5 ** 0.5)
    assert report.postselection_mean == pytest.approx(0.4)
    assert report.postselection_min_of_means == pytest.approx(0.3)
    assert [run.best_epoch for run in report.runs] == [2, 1]


def test_single_run_has_zero_spread(two_runs):
    report = aggregate_runs([two_runs[1]])
    assert report.valid_ppl_std == 0.0
    assert report.test_ppl_std == 0.0


def test_test_perplexity_only_from_evaluated_runs(two_runs, tmp_path):
    untested = write_run(tmp_path / "seed2", [epoch(1, 101.0, 0.45)])
    report = aggregate_runs([*two_runs, untested])
    assert report.num_runs == 3
    assert report.test_runs == 2
    assert report.test_ppl_mean == pytest.approx(101.5)
    assert report.valid_ppl_mean == pytest.approx(97.0)


def test_no_test_perplexity_at_all(tmp_path):
    run = write_run(tmp_path / "only", [epoch(1, 50.0, 0.5)])
    report = aggregate_runs([run])
    assert report.test_runs == 0
    assert report.test_ppl_mean is None
    assert report.test_ppl_std is None


def test_bad_run_directories(tmp_path):
    with pytest.raises(DataError):
        aggregate_runs([])
    with pytest.raises(DataError, match="metrics file not found"):
        aggregate_runs([str(tmp_path / "absent")])
    with pytest.raises(DataError, match="no epochs recorded"):
        aggregate_runs([write_run(tmp_path / "empty", [])])

    broken = write_run(tmp_path / "broken", [epoch(1, 50.0, 0.5)])
    (tmp_path / "broken" / "eval-test.json").write_text("{not json")
    with pytest.raises(DataError, match="unreadable eval summary"):
        summarize_run(broken)


def test_aggregate_command(two_runs, tmp_path, capsys):
    output = tmp_path / "reports" / "aggregate.json"
    assert main(["aggregate", *two_runs, "--output", str(output)]) == 0
    out = capsys.readouterr().out
    assert "95.0000 +/- 7.0711" in out
    doc = json.loads(output.read_text())
    assert doc["format"] == "quixer-aggregate/1"
    assert doc["num_runs"] == 2
    assert json.loads(out[out.index("{"):]) == doc


def test_aggregate_command_missing_run(tmp_path, capsys):
    assert main(["aggregate", str(tmp_path / "nowhere")]) == 2
    assert "error: aggregate" in capsys.readouterr().err
