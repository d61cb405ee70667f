import json
import logging
import math
from pathlib import Path

import pytest

from comparison.functions import RICCI_SLACK
from errors import ConfigError, CurvatureSignError
from experiments.config_schema import (BoundsConfig, CaratheodoryConfig, ProfileConfig, SimulateConfig,
                                       VerifyConfig, WilsonConfig, as_dict, load_config)
from experiments.reporting import (CheckRecord, RunReport, Verdict, format_float, render_checks, to_json,
                                   write_report)
from experiments.runner import (WILSON_COLUMNS, cmd_bounds, cmd_caratheodory, cmd_simulate, cmd_wilson,
                                run_command)
from experiments.suites import SUITE_RUNNERS
from main import (EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_INTERNAL, EXIT_INTERRUPTED, EXIT_IO, EXIT_OK, build_parser,
                  main)


def _write_json(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def _bound_values(report, quantity, r=None):
    return [row["value"] for row in report.rows if row["quantity"] == quantity and (r is None or row["r"] == r)]


def test_load_config_from_file_with_overrides(tmp_path):
    path = _write_json(tmp_path / "sim.json", {"space": "euclidean1", "x0": [1.0], "y0": [0.0], "n_paths": 50})
    cfg = load_config("simulate", path, {"n_paths": 10, "strategy": None})
    assert isinstance(cfg, SimulateConfig)
    assert cfg.space == "euclidean1" and cfg.n_paths == 10
    assert cfg.strategy == "mirror"
    assert cfg.step == pytest.approx(1e-3)


def test_load_config_defaults_and_profiles(tmp_path):
    assert load_config("wilson").n == 100
    path = _write_json(tmp_path / "bounds.json", {"profiles": [{"family": "quaternionic", "n": 2, "k1": -1.0,
                                                               "k2": -1.0}], "rhos": [0.5]})
    cfg = load_config("bounds", path)
    assert isinstance(cfg.profiles[0], ProfileConfig)
    assert cfg.profiles[0].family == "quaternionic"
    assert load_config("simulate", overrides={"space": "h2c"}).step == pytest.approx(2.5e-4)


@pytest.mark.parametrize("data", [
    {"spaec": "disk"},
    {"t_grid": [0.5, 0.2]},
    {"t_grid": [0.0, 3.0]},
    {"t_max": "two"},
    {"space": "sphere"},
    {"n_paths": 0},
])
def test_invalid_simulate_configs_rejected(tmp_path, data):
    with pytest.raises(ConfigError):
        load_config("simulate", _write_json(tmp_path / "bad.json", data))


def test_invalid_json_and_command_rejected(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config("bounds", path)
    with pytest.raises(ConfigError):
        load_config("plot")
    with pytest.raises(ConfigError):
        load_config("bounds", _write_json(tmp_path / "p.json", {"profiles": [{"family": "real"}]}))
    with pytest.raises(ConfigError):
        load_config("wilson", overrides={"k": 5, "n": 4})


def test_verify_path_scaling():
    cfg = VerifyConfig(scale=0.05)
    assert cfg.paths(100_000) == 5000
    assert VerifyConfig(scale=0.01).paths(10) == 2
    assert set(SUITE_RUNNERS) == {"disk_schwarz", "caratheodory", "h2c_prop72", "comparison_1d", "psd_probe",
                                  "martingale", "dominance", "integrator", "matrix"}


def test_format_float():
    assert format_float(float("nan")) == "NaN"
    assert format_float(math.inf) == "Infinity"
    assert format_float(-math.inf) == "-Infinity"
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1.0) == "1"


def test_json_report_is_byte_stable():
    cfg = WilsonConfig(k=30, n=100)
    first = run_command("wilson", cfg, 7)
    second = run_command("wilson", cfg, 7)
    assert to_json(first) == to_json(second)
    assert "elapsed_seconds" not in to_json(first)
    assert "elapsed_seconds" in to_json(first, timing=True)
    assert to_json(first).endswith("}\n")
    parsed = json.loads(to_json(first))
    assert parsed["columns"] == list(WILSON_COLUMNS)
    assert parsed["passed"] is True


def test_json_encodes_special_floats():
    check = CheckRecord("missing", "nowhere", float("nan"), bound=math.inf)
    text = to_json(RunReport("verify", {}, 1, [check]))
    assert '"point": NaN' in text
    assert '"bound": Infinity' in text
    assert json.loads(text)["checks"][0]["verdict"] == "report-only"


def test_report_verdicts():
    passing = CheckRecord.judged("a", "anchor", 1.0, True)
    failing = CheckRecord.judged("b", "anchor", 2.0, False, (1.5, 2.5), 1.0)
    report = RunReport("verify", {}, 1, [passing, failing, CheckRecord("c", "anchor", 0.5)])
    assert not report.passed
    assert report.counts == {"pass": 1, "fail": 1, "report-only": 1}
    assert failing.failed and not passing.failed
    assert failing.as_dict()["interval"] == [1.5, 2.5]
    assert "fail" in render_checks(report, color=False)


def test_write_report_formats(tmp_path):
    report = cmd_wilson(WilsonConfig(k=100, n=100), 1)
    assert write_report(report, None, "csv") is None
    csv_path = write_report(report, tmp_path / "out" / "wilson.csv", "csv")
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(WILSON_COLUMNS)
    cells = lines[1].split(",")
    assert cells[:2] == ["100", "100"] and cells[3] == "1" and cells[5] == "1"
    assert float(cells[4]) == pytest.approx(1.0 / (1.0 + 1.96 ** 2 / 100), rel=1e-14)

    json_path = write_report(report, tmp_path / "wilson.json", "json")
    assert json.loads(json_path.read_text(encoding="utf-8"))["rows"][0]["k"] == 100

    checks_only = RunReport("verify", {}, 1, [CheckRecord.judged("a", "anchor", 1.0, True)])
    lines = write_report(checks_only, tmp_path / "checks.csv", "csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("name,anchor,point")
    assert lines[1].endswith(",pass,")


def test_bounds_for_the_disk_profile():
    report = cmd_bounds(BoundsConfig(ricci_sweep=False), 1)
    assert report.checks == []
    # two profile rows plus seven per positive rho
    assert len(report.rows) == 2 + 7 * 2
    assert _bound_values(report, "comparison_drift_kahler") == [pytest.approx(2.0)]
    assert _bound_values(report, "coupling_failure", 1.0) == [pytest.approx(4.0)]
    assert _bound_values(report, "schwarz", 1.0) == [pytest.approx(8.0)]
    assert _bound_values(report, "gradient") == [pytest.approx(4.0)]
    assert _bound_values(report, "laplacian_kahler", 1.0) == [pytest.approx(1.0 / math.tanh(1.0))]
    assert _bound_values(report, "wang_survival(t=inf)", 1.0) == [pytest.approx(1.0 - math.exp(-2.0))]


def test_bounds_row_selection():
    cfg = BoundsConfig(profiles=[ProfileConfig("quaternionic", 2, -1.0, -1.0), ProfileConfig(m=0.5)],
                       rhos=[0.0], exit_constant=2.0, wang_times=[1.0], ricci_sweep=False)
    report = cmd_bounds(cfg, 1)
    quantities = [row["quantity"] for row in report.rows]
    assert quantities.count("schwarz") == 0
    assert "laplacian_quaternionic" not in quantities and "eta_drift" not in quantities
    assert quantities.count("exit_event(delta=0.5)") == 2
    assert _bound_values(report, "comparison_drift_quaternionic") == [pytest.approx(16.0)]


def test_bounds_ricci_sweep_is_report_only():
    report = cmd_bounds(BoundsConfig(rhos=[1.0]), 1)
    slack_rows = [row for row in report.rows if row["quantity"] == "ricci_reduction_slack"]
    assert len(slack_rows) == 1800
    assert all(row["value"] >= -RICCI_SLACK for row in slack_rows)
    assert [check.verdict for check in report.checks] == [Verdict.REPORT_ONLY]
    assert report.passed


def test_bounds_reject_nonnegative_profiles():
    with pytest.raises(CurvatureSignError):
        cmd_bounds(BoundsConfig(profiles=[ProfileConfig(k1=0.5)], ricci_sweep=False), 1)


def test_wilson_command_row():
    report = cmd_wilson(WilsonConfig(k=50, n=100), 3)
    row = report.rows[0]
    assert row["p_hat"] == 0.5
    assert row["wilson_lo"] + row["wilson_hi"] == pytest.approx(1.0)
    assert report.checks == [] and report.passed


def test_simulate_euclidean_reflection(seed):
    cfg = SimulateConfig(space="euclidean1", strategy="mirror", x0=[1.0], y0=[0.0], dt=1e-2, t_max=2.0,
                         n_paths=2000, t_grid=[0.0, 1.0, 2.0])
    report = cmd_simulate(cfg, seed)
    assert [row["t"] for row in report.rows] == [0.0, 1.0, 2.0]
    assert report.rows[0]["p_hat"] == 1.0
    oracle = [check for check in report.checks if check.name.startswith("reflection survival oracle")]
    assert len(oracle) == 2
    for check in oracle:
        se = math.sqrt(check.bound * (1.0 - check.bound) / cfg.n_paths)
        assert abs(check.point - check.bound) < 4 * se + 0.01
    assert report.passed


def test_simulate_absorption(seed):
    cfg = SimulateConfig(estimate="absorption", dt=1e-2, t_max=10.0, n_paths=2000, t_grid=[1.0, 5.0, 10.0])
    report = cmd_simulate(cfg, seed)
    assert len(report.rows) == 3
    oracle = report.checks[0]
    assert oracle.bound == pytest.approx(1.0 - math.exp(-0.5))
    assert report.checks[1].verdict is Verdict.PASS


def test_caratheodory_command(seed):
    cfg = CaratheodoryConfig(n_paths=500, t=0.5, dt=1e-2)
    report = cmd_caratheodory(cfg, seed)
    names = [check.name for check in report.checks]
    assert names == ["c <= 2 P(tau > t)", "sup over the test family", "Schwarz right-hand side"]
    assert report.checks[0].point == pytest.approx(0.5)
    assert report.config == as_dict(cfg)


def test_run_command_records_elapsed():
    report = run_command("bounds", BoundsConfig(ricci_sweep=False), 1)
    assert report.elapsed is not None and report.elapsed >= 0


def test_parser_rejects_unknown_suite():
    with pytest.raises(SystemExit) as excinfo:
        build_parser().parse_args(["verify", "everything"])
    assert excinfo.value.code == 2


def test_parser_accepts_documented_suite_names():
    parser = build_parser()
    for suite in ("disk_schwarz", "caratheodory", "h2c_prop72", "comparison_1d", "psd_probe", "martingale"):
        args = parser.parse_args(["verify", suite, "--no-archive"])
        assert args.suite == suite
        assert suite in SUITE_RUNNERS


def test_main_wilson(tmp_path):
    out = tmp_path / "wilson.json"
    assert main(["wilson", "100", "100", "--no-archive", "--format", "json", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text(encoding="utf-8"))["rows"][0]["wilson_hi"] == 1.0


def test_main_usage_errors(tmp_path):
    assert main(["wilson", "5", "4", "--no-archive"]) == EXIT_CONFIG
    assert main(["wilson", "1", "2", "--threads", "0", "--no-archive"]) == EXIT_CONFIG
    assert main(["wilson", "1", "2", "--seed=-1", "--no-archive"]) == EXIT_CONFIG
    bad = _write_json(tmp_path / "bad.json", {"rhos": [-1.0]})
    assert main(["bounds", "--config", str(bad), "--no-archive"]) == EXIT_CONFIG
    positive = _write_json(tmp_path / "positive.json", {"profiles": [{"k1": 1.0, "k2": -1.0}], "ricci_sweep": False})
    assert main(["bounds", "--config", str(positive), "--no-archive"]) == EXIT_CONFIG


def test_main_verify_psd_probe(tmp_path):
    out = tmp_path / "psd.csv"
    assert main(["verify", "psd_probe", "--no-archive", "--out", str(out)]) == EXIT_OK
    assert out.read_text(encoding="utf-8").splitlines()[0].startswith("name,anchor")


def test_main_archives_runs(tmp_path, monkeypatch, archive):
    monkeypatch.setattr("main.DatabaseManager", lambda: archive)
    assert main(["wilson", "3", "10"]) == EXIT_OK
    session = archive.get_session()
    try:
        from database.schema import ExperimentRun, RunStatus
        run = session.query(ExperimentRun).one()
        assert run.command == "wilson" and run.status is RunStatus.PASSED
        assert run.seed == str(build_parser().parse_args(["wilson", "3", "10"]).seed)
        assert json.loads(run.report_json)["rows"][0]["k"] == 3
    finally:
        session.close()


def test_main_maps_unexpected_errors(monkeypatch, archive, caplog):
    def crash(command, cfg, seed, threads):
        raise RuntimeError("solver diverged")

    monkeypatch.setattr("main.DatabaseManager", lambda: archive)
    monkeypatch.setattr("main.run_command", crash)
    caplog.set_level(logging.ERROR, logger="main")
    assert main(["wilson", "3", "10"]) == EXIT_INTERNAL
    assert EXIT_INTERNAL not in (EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_IO)
    records = [r for r in caplog.records if r.name == "main" and "solver diverged" in r.getMessage()]
    assert records and records[-1].getMessage() == "wilson: solver diverged"
    assert records[-1].exc_info is not None
    session = archive.get_session()
    try:
        from database.schema import ExperimentRun, RunStatus
        run = session.query(ExperimentRun).one()
        assert run.status is RunStatus.ERROR and run.last_error == "solver diverged"
    finally:
        session.close()


def test_main_interrupt_is_not_a_failed_check(monkeypatch):
    def interrupt(command, cfg, seed, threads):
        raise KeyboardInterrupt

    monkeypatch.setattr("main.run_command", interrupt)
    assert main(["wilson", "3", "10", "--no-archive"]) == EXIT_INTERRUPTED
    assert EXIT_INTERRUPTED != EXIT_CHECK_FAILED


class _LockedArchive:
    def init_db(self):
        pass

    def start_run(self, *args, **kwargs):
        raise RuntimeError("database is locked")


def test_main_logs_archive_start_failure(monkeypatch, caplog):
    monkeypatch.setattr("main.DatabaseManager", _LockedArchive)
    caplog.set_level(logging.ERROR, logger="main")
    assert main(["wilson", "3", "10"]) == EXIT_OK
    messages = [r.getMessage() for r in caplog.records if r.name == "main"]
    assert "Could not archive run: database is locked" in messages


@pytest.mark.slow
def test_verify_comparison_1d_reduced(seed):
    report = run_command("verify", VerifyConfig(suite="comparison_1d", scale=0.05), seed)
    checks = {check.name: check for check in report.checks}
    assert checks["exit ODE oracle"].verdict is Verdict.PASS
    assert checks["survival bound at t = inf"].verdict is Verdict.PASS
    assert checks["Ricci reduction sweep"].verdict is Verdict.REPORT_ONLY
    assert checks["survival P(tau > t_max)"].bound == pytest.approx(1.0 - math.exp(-0.5))


@pytest.mark.slow
def test_verify_matrix_structure(seed):
    report = run_command("verify", VerifyConfig(suite="matrix", scale=0.1), seed)
    checks = {check.name: check for check in report.checks}
    assert checks["A(x) symmetry"].verdict is Verdict.PASS
    assert checks["A(x) eigenvalues"].verdict is Verdict.PASS
    assert checks["synchronous: min eig a(x, y)"].verdict is Verdict.PASS


@pytest.mark.slow
def test_verify_martingale_checks_both_marginals(seed):
    report = run_command("verify", VerifyConfig(suite="martingale", scale=0.02), seed)
    marginal = [check for check in report.checks if "marginal law" in check.name]
    assert sorted(check.name for check in marginal) == sorted(
        f"{kind}: {label}_1 marginal law" for kind in ("synchronous", "mirror", "independent") for label in "XY")
    assert all(check.note.endswith("200 paths") for check in marginal)
    assert all(0.0 < check.point <= 1.0 for check in marginal)


BENCHMARK_CONFIG = Path(__file__).resolve().parent.parent / "configs" / "disk_benchmark.json"
GOLDEN_CSV = Path(__file__).resolve().parent / "golden" / "disk_benchmark.csv"
GOLDEN_SEED = 20240917


def _benchmark_csv(tmp_path, threads):
    cfg = load_config("simulate", BENCHMARK_CONFIG)
    out = write_report(cmd_simulate(cfg, GOLDEN_SEED, threads), tmp_path / f"bench_{threads}.csv", "csv")
    return out.read_bytes()


@pytest.mark.slow
def test_disk_benchmark_is_thread_independent(tmp_path):
    assert _benchmark_csv(tmp_path, 1) == _benchmark_csv(tmp_path, 3)


@pytest.mark.slow
def test_disk_benchmark_matches_golden_csv(tmp_path, update_golden):
    produced = _benchmark_csv(tmp_path, 1)
    if update_golden:
        GOLDEN_CSV.parent.mkdir(parents=True, exist_ok=True)
        GOLDEN_CSV.write_bytes(produced)
    if not GOLDEN_CSV.exists():
        pytest.skip(f"{GOLDEN_CSV} missing; create it with pytest --update-golden")
    assert produced == GOLDEN_CSV.read_bytes()
    header = produced.decode("utf-8").splitlines()[0]
    assert header == "t,n,k,p_hat,wilson_lo,wilson_hi"
