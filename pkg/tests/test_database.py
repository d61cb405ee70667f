import argparse
import datetime
import importlib.util
import json
import os

import pytest

from database.db_manager import DatabaseManager
from database.schema import CheckResult, ExperimentRun, RunStatus
from experiments.reporting import CheckRecord, RunReport, to_json

_CLI_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "cli-manager.py")
_spec = importlib.util.spec_from_file_location("cli_manager", _CLI_PATH)
cli_manager = importlib.util.module_from_spec(_spec)
_spec.loader.exec_module(cli_manager)


def _report(passed=True):
    checks = [
        CheckRecord.judged("oracle", "absorption probability", 0.6, passed, (0.58, 0.62), 0.6065),
        CheckRecord("unknown constant", "exit-event bound", float("nan"), note="fitted"),
    ]
    report = RunReport("simulate", {"n_paths": 10}, 42, checks)
    report.elapsed = 1.5
    return report


def _archived_run(archive, passed=True, command="simulate"):
    run_id = archive.start_run(command, {"n_paths": 10}, 2 ** 64 - 1, threads=2)
    report = _report(passed)
    assert archive.finish_run(run_id, report, to_json(report), "out.csv")
    return run_id


def _namespace(**kwargs):
    defaults = {"status": None, "run_command": None, "limit": 20, "force": True, "older_than": None,
                "report": False}
    defaults.update(kwargs)
    return argparse.Namespace(**defaults)


def test_start_run_records_running(archive):
    run_id = archive.start_run("verify", {"suite": "matrix", "scale": 1.0}, 12345, suite="matrix")
    session = archive.get_session()
    try:
        run = session.query(ExperimentRun).filter_by(id=run_id).one()
        assert run.status is RunStatus.RUNNING
        assert run.seed == "12345" and run.suite == "matrix"
        assert json.loads(run.config_json) == {"scale": 1.0, "suite": "matrix"}
        assert run.started_at is not None
    finally:
        session.close()


def test_finish_run_stores_checks(archive):
    run_id = _archived_run(archive)
    session = archive.get_session()
    try:
        run = session.query(ExperimentRun).filter_by(id=run_id).one()
        assert run.status is RunStatus.PASSED
        assert run.seed == str(2 ** 64 - 1)
        assert run.duration == pytest.approx(1.5)
        assert run.output_path == "out.csv"
        assert json.loads(run.report_json)["seed"] == 42
        checks = session.query(CheckResult).filter_by(run_id=run_id).order_by(CheckResult.id).all()
        assert [check.verdict for check in checks] == ["pass", "report-only"]
        assert (checks[0].interval_lo, checks[0].interval_hi) == (0.58, 0.62)
        assert checks[1].point is None and checks[1].interval_lo is None
    finally:
        session.close()


def test_failed_checks_mark_run_failed(archive):
    run_id = _archived_run(archive, passed=False)
    session = archive.get_session()
    try:
        assert session.query(ExperimentRun).filter_by(id=run_id).one().status is RunStatus.FAILED
    finally:
        session.close()


def test_fail_run_and_missing_ids(archive):
    run_id = archive.start_run("bounds", {}, 1)
    assert archive.fail_run(run_id, OSError("disk full"))
    session = archive.get_session()
    try:
        run = session.query(ExperimentRun).filter_by(id=run_id).one()
        assert run.status is RunStatus.ERROR
        assert run.last_error == "disk full"
        assert run.duration is not None and run.duration >= 0
    finally:
        session.close()
    assert not archive.fail_run(999, "nothing")
    assert not archive.finish_run(999, _report(), "{}")


def test_show_status_filters(archive, capsys):
    _archived_run(archive)
    _archived_run(archive, passed=False)
    _archived_run(archive, command="bounds")
    assert cli_manager.show_status(_namespace(), archive) == 3
    assert cli_manager.show_status(_namespace(status="failed"), archive) == 1
    assert cli_manager.show_status(_namespace(run_command="bounds"), archive) == 1
    assert cli_manager.show_status(_namespace(limit=2), archive) == 2
    assert "Total Runs: 3" in capsys.readouterr().out


def test_show_run_details(archive, capsys):
    run_id = _archived_run(archive)
    assert cli_manager.show_run_details(_namespace(run_id=run_id, report=True), archive)
    out = capsys.readouterr().out
    assert "oracle" in out and "=== Report ===" in out
    assert not cli_manager.show_run_details(_namespace(run_id=run_id + 10), archive)


def test_reset_marks_running_runs(archive):
    archive.start_run("verify", {}, 1)
    _archived_run(archive)
    assert cli_manager.reset_runs(_namespace(), archive) == 1
    assert cli_manager.reset_runs(_namespace(), archive) == 0
    session = archive.get_session()
    try:
        assert session.query(ExperimentRun).filter_by(status=RunStatus.ERROR).count() == 1
    finally:
        session.close()


def test_reset_respects_confirmation(archive, monkeypatch):
    archive.start_run("verify", {}, 1)
    monkeypatch.setattr("builtins.input", lambda prompt: "n")
    assert cli_manager.reset_runs(_namespace(force=False), archive) == 0


def test_cleanup_by_status_and_age(archive):
    _archived_run(archive)
    _archived_run(archive, passed=False)
    assert cli_manager.cleanup_database(_namespace(), archive) == 0
    assert cli_manager.cleanup_database(_namespace(status="failed"), archive) == 1
    assert cli_manager.cleanup_database(_namespace(older_than=1), archive) == 0
    session = archive.get_session()
    try:
        assert session.query(ExperimentRun).count() == 1
        # checks of the deleted run go with it
        assert session.query(CheckResult).count() == 2
    finally:
        session.close()


def test_cleanup_removes_old_runs(archive):
    run_id = _archived_run(archive)
    session = archive.get_session()
    try:
        run = session.query(ExperimentRun).filter_by(id=run_id).one()
        run.created_at = datetime.datetime.utcnow() - datetime.timedelta(days=10)
        session.commit()
    finally:
        session.close()
    assert cli_manager.cleanup_database(_namespace(older_than=5), archive) == 1


def test_init_database_resets_archive(tmp_path):
    db_manager = DatabaseManager(tmp_path / "fresh.db")
    db_manager.init_db()
    db_manager.start_run("bounds", {}, 1)
    assert cli_manager.init_database(_namespace(), db_manager)
    session = db_manager.get_session()
    try:
        assert session.query(ExperimentRun).count() == 0
    finally:
        session.close()


def test_format_time_ago():
    now = datetime.datetime.utcnow()
    assert cli_manager.format_time_ago(None) == "Never"
    assert cli_manager.format_time_ago(now) == "Just now"
    assert cli_manager.format_time_ago(now - datetime.timedelta(hours=3, minutes=5)) == "3 hours ago"
    assert cli_manager.format_time_ago(now - datetime.timedelta(days=4)) == "4 days ago"


def test_cli_main(archive):
    _archived_run(archive)
    assert cli_manager.main(["status"], archive) == 0
    assert cli_manager.main(["run", "1"], archive) == 0
    assert cli_manager.main([], archive) == 2
