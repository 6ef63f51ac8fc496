import json
import logging

import pytest

from dnn_scaler import cli
from dnn_scaler.artifacts import METRICS_COLUMNS


@pytest.fixture(autouse=True)
def restore_root_logging():
    """main() reconfigures the root logger; put it back for the other tests."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def scenario_file(tmp_path):
    def _write(doc, name="scenario.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)
    return _write


SMALL = {
    "seed": 5,
    "controllers": ["dnnscaler", "clipper"],
    "jobs": [
        {"job_id": 1, "dnn_id": "inc-v1", "dataset_tag": "imagenet", "slo": 35, "duration": 10},
        {"job_id": 3, "dnn_id": "inc-v4", "dataset_tag": "imagenet", "slo": 419, "duration": 10},
    ],
}


def test_profile_prints_decision(tmp_path, capsys):
    code = cli.main(["profile", "--dnn", "inc-v1", "--dataset", "imagenet", "--sigma", "0", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "TI_MT 99.9" in out
    assert "multi_tenancy" in out
    doc = json.loads((tmp_path / "profile.json").read_text())
    assert doc["decision"] == "multi_tenancy"
    assert doc["report"]["ti_b"] == pytest.approx(5.91, abs=0.01)


def test_profile_unknown_dnn_is_usage_error(tmp_path, capsys):
    code = cli.main(["profile", "--dnn", "inc-v9", "--out", str(tmp_path)])
    assert code == 2
    err = capsys.readouterr().err
    assert "inc-v9" in err
    assert "| inc-v1 | imagenet |" in err


def test_profile_probe_batch_must_exceed_one(tmp_path, capsys):
    code = cli.main(["profile", "--dnn", "inc-v1", "--dataset", "imagenet", "-m", "1", "--out", str(tmp_path)])
    assert code == 2
    assert "'m'" in capsys.readouterr().err


def test_run_writes_artifacts(tmp_path, scenario_file, capsys):
    out = tmp_path / "out"
    code = cli.main(["run", "--config", scenario_file(SMALL), "--out", str(out), "--sigma", "0"])
    assert code == 0
    header = (out / "metrics.csv").read_text().splitlines()[0]
    assert header.split(",") == METRICS_COLUMNS
    summary = json.loads((out / "summary.json").read_text())
    assert [(j["job_id"], j["controller"]) for j in summary["jobs"]] == [
        (1, "dnnscaler"), (3, "dnnscaler"), (1, "clipper"), (3, "clipper")]
    assert summary["failures"] == []
    assert (out / "comparison.csv").exists()
    assert "average MT improvement" in capsys.readouterr().out


def test_run_is_deterministic(tmp_path, scenario_file):
    path = scenario_file(SMALL)
    for name in ("a", "b"):
        assert cli.main(["run", "--config", path, "--out", str(tmp_path / name), "--workers", "2"]) == 0
    for artifact in ("metrics.csv", "summary.json", "comparison.json", "comparison.csv"):
        assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()


def test_seed_flag_changes_noise(tmp_path, scenario_file):
    path = scenario_file(SMALL)
    cli.main(["run", "--config", path, "--out", str(tmp_path / "a"), "--controller", "clipper"])
    cli.main(["run", "--config", path, "--out", str(tmp_path / "b"), "--controller", "clipper", "--seed", "6"])
    assert (tmp_path / "a" / "metrics.csv").read_bytes() != (tmp_path / "b" / "metrics.csv").read_bytes()


def test_run_bad_json(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{\"jobs\": [")
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert str(path) in capsys.readouterr().err


def test_run_schema_violation_names_field(tmp_path, scenario_file, capsys):
    doc = {"jobs": [{"job_id": 1, "dnn_id": "inc-v4", "slo": -1, "duration": 10}]}
    assert cli.main(["run", "--config", scenario_file(doc), "--out", str(tmp_path)]) == 2
    assert "jobs.0.slo" in capsys.readouterr().err


def test_run_reports_failed_job(tmp_path, scenario_file, capsys):
    doc = {"jobs": [
        {"job_id": 3, "dnn_id": "inc-v4", "dataset_tag": "imagenet", "slo": 419, "duration": 20},
        {"job_id": 9, "dnn_id": "inc-v9", "slo": 50, "duration": 20},
    ]}
    code = cli.main(["run", "--config", scenario_file(doc), "--out", str(tmp_path)])
    assert code == 2
    assert "job 9 (dnnscaler) failed: [unknown_dnn]" in capsys.readouterr().err
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert [j["job_id"] for j in summary["jobs"]] == [3]
    assert summary["failures"][0]["job_id"] == 9


def test_run_static_needs_knob(tmp_path, scenario_file):
    assert cli.main(["run", "--config", scenario_file(SMALL), "--controller", "static", "--out", str(tmp_path)]) == 2


def test_compare_empty_scenario(tmp_path, scenario_file, capsys):
    assert cli.main(["compare", "--config", scenario_file({"jobs": []}), "--out", str(tmp_path)]) == 2
    assert "does not contain any jobs" in capsys.readouterr().err


def test_sensitivity_requires_schedule(tmp_path, scenario_file):
    assert cli.main(["sensitivity", "--config", scenario_file(SMALL), "--out", str(tmp_path)]) == 2


def test_sensitivity_runs_schedule(tmp_path, scenario_file, capsys):
    doc = {"jobs": [{"job_id": 101, "dnn_id": "inc-v1", "dataset_tag": "imagenet", "slo": 48, "duration": 30,
                     "slo_schedule": [{"time": 15, "slo": 25}]}]}
    assert cli.main(["sensitivity", "--config", scenario_file(doc), "--out", str(tmp_path), "--sigma", "0"]) == 0
    assert "job 101" in capsys.readouterr().out
    assert (tmp_path / "metrics.csv").exists()


def test_sweep_writes_grid(tmp_path):
    code = cli.main(["sweep", "--dnn", "inc-v1", "--dataset", "imagenet", "--bs", "1,4", "--mtl", "1,2",
                     "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "bs,mtl,throughput,p95_ms,mean_ms,power_w"
    assert len(lines) == 5


def test_sweep_rejects_non_integer_list(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep", "--dnn", "inc-v1", "--bs", "1,x", "--mtl", "1", "--out", str(tmp_path)])
    assert exc.value.code == 2
    assert "Invalid integer value 'x'" in capsys.readouterr().err


def test_log_flag_validated(tmp_path, capsys):
    assert cli.main(["--log", "chatty", "profile", "--dnn", "inc-v1", "--out", str(tmp_path)]) == 2
    assert "unknown log level" in capsys.readouterr().err


def test_env_seed_used_without_flag(monkeypatch):
    monkeypatch.setenv("DNNSCALER_SEED", "123")
    args = cli.build_parser().parse_args(["sweep", "--dnn", "inc-v1", "--bs", "1", "--mtl", "1"])
    assert cli._seed(args) == 123
