"""
End-to-end checks for the dnn-scaler command line, run as real subprocesses.

Usage:
  1. Install the project (e.g. `poetry install`).
  2. Run this script: python e2e/e2e_runner.py [--full]
  3. The script will exit 0 if all checks pass, nonzero otherwise.

By default the bundled workload is cut to a few short jobs; --full runs the
whole 30-job workload twice (slow).
"""
import filecmp
import json
import os
import subprocess
import sys
import tempfile

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, ROOT)
from dnn_scaler.catalog import bundled_scenario  # noqa: E402

ARTIFACTS = ["metrics.csv", "summary.json", "comparison.json", "comparison.csv"]
SHORT_JOBS = {1, 3, 4, 12, 26}
SHORT_DURATION = 20

failures = 0


def run_cli(*args):
    env = os.environ.copy()
    env["PYTHONPATH"] = ROOT
    return subprocess.run(
        [sys.executable, "-m", "dnn_scaler", *args],
        env=env,
        capture_output=True,
        text=True,
    )


def fail(message, proc=None):
    global failures
    failures += 1
    print("\033[91m**FAIL**\033[0m")
    print(f"  FAIL: {message}")
    if proc is not None:
        print(f"  exit code: {proc.returncode}")
        print(f"  stderr: {proc.stderr.strip()}")


def workload_config(workdir, full):
    if full:
        return str(bundled_scenario("workload"))
    with open(bundled_scenario("workload")) as f:
        doc = json.load(f)
    doc["jobs"] = [dict(job, duration=SHORT_DURATION) for job in doc["jobs"] if job["job_id"] in SHORT_JOBS]
    path = os.path.join(workdir, "workload_short.json")
    with open(path, "w") as f:
        json.dump(doc, f)
    return path


def test_run_is_deterministic(workdir, config):
    print("Test: two runs with the same seed produce identical artifacts...")
    out_a, out_b = os.path.join(workdir, "a"), os.path.join(workdir, "b")
    first = run_cli("run", "--config", config, "--out", out_a, "--seed", "11")
    second = run_cli("run", "--config", config, "--out", out_b, "--seed", "11", "--workers", "4")
    if first.returncode != 0 or second.returncode != 0:
        fail("run exited nonzero", first if first.returncode else second)
        return
    _, mismatch, errors = filecmp.cmpfiles(out_a, out_b, ARTIFACTS, shallow=False)
    if mismatch or errors:
        fail(f"artifacts differ: {mismatch + errors}")
        return
    print("  PASS")


def test_compare_prints_averages(workdir, config):
    print("Test: compare prints the improvement averages...")
    proc = run_cli("compare", "--config", config, "--out", os.path.join(workdir, "cmp"))
    if proc.returncode != 0:
        fail("compare exited nonzero", proc)
        return
    if "average improvement" not in proc.stdout:
        fail(f"no average in output: {proc.stdout!r}")
        return
    print("  PASS")


def test_profile_decides(workdir):
    print("Test: profile decides Multi-Tenancy for inc-v1 on imagenet...")
    proc = run_cli("profile", "--dnn", "inc-v1", "--dataset", "imagenet", "--out", os.path.join(workdir, "prof"))
    if proc.returncode != 0 or "multi_tenancy" not in proc.stdout:
        fail("unexpected profile result", proc)
        return
    print(f"  PASS ({proc.stdout.strip()})")


def test_unknown_dnn_is_usage_error(workdir):
    print("Test: unknown DNN exits 2 with the catalog choices...")
    proc = run_cli("profile", "--dnn", "inc-v9", "--out", os.path.join(workdir, "bad"))
    if proc.returncode != 2 or "| id | dataset_tag |" not in proc.stderr:
        fail("expected exit 2 with a choices table", proc)
        return
    print("  PASS")


def test_sensitivity_readapts(workdir):
    print("Test: sensitivity re-enters the band after an SLO step...")
    proc = run_cli("sensitivity", "--config", str(bundled_scenario("mt_slo_down")),
                   "--out", os.path.join(workdir, "sens"))
    if proc.returncode != 0 or "periods to re-enter the band" not in proc.stdout:
        fail("unexpected sensitivity result", proc)
        return
    print(f"  PASS ({proc.stdout.strip().splitlines()[-1]})")


def print_separator():
    print("\n" + "-" * 60 + "\n")


if __name__ == "__main__":
    full = "--full" in sys.argv[1:]
    with tempfile.TemporaryDirectory() as workdir:
        config = workload_config(workdir, full)
        test_run_is_deterministic(workdir, config)
        print_separator()
        test_compare_prints_averages(workdir, config)
        print_separator()
        test_profile_decides(workdir)
        print_separator()
        test_unknown_dnn_is_usage_error(workdir)
        print_separator()
        test_sensitivity_readapts(workdir)
        print_separator()
    if failures:
        print(f"\n{failures} check(s) failed.")
        sys.exit(1)
    print("\nAll E2E checks passed!")
    sys.exit(0)
