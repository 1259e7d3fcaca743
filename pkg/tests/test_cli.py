import json
import os
import subprocess
import sys

import pytest

from hitchin_lab import cli

SMALL = ["--n-r", "16", "--n-theta", "32"]


def _main(capsys, argv):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify(capsys):
    code, out, _ = _main(capsys, ["verify"])
    assert code == 0
    assert json.loads(out)["result"]["all_passed"]


def test_solve_hitchin_writes_artifacts(capsys, tmp_path):
    code, out, _ = _main(capsys, ["solve-hitchin", "--n", "2", "--q", '{"2": [0, 1]}', "--radius", "0.8",
                                  "--out", str(tmp_path), *SMALL])
    assert code == 0
    rep = json.loads(out)
    assert rep["result"]["dominated"] and rep["result"]["energy_ok"]
    assert rep["job"]["params"]["radius"] == 0.8
    assert (tmp_path / "solve-hitchin.json").exists() and (tmp_path / "metric.csv").exists()


def test_classify_and_gauge(capsys):
    code, out, _ = _main(capsys, ["classify-ab", "--f", "power:-1"])
    assert code == 0 and json.loads(out)["result"]["verdict"] == "in_Ab"
    code, out, _ = _main(capsys, ["gauge-normalize", "--theta", "[[0, 1], [1, 0]]"])
    assert code == 0


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["no-such-command"])
    assert e.value.code == cli.EXIT_USAGE
    assert cli.main([]) == cli.EXIT_USAGE
    code, _ = cli.run(cli.JobSpec("solve-hitchin", {"bogus": 1}))
    assert code == cli.EXIT_USAGE
    code, _, _ = _main(capsys, ["classify-ab", "--f", "nonsense:1"])
    assert code == cli.EXIT_USAGE


def test_hypothesis_violation(capsys):
    code, out, _ = _main(capsys, ["collier", "--mu", "[0]", "--solve-graded"])
    assert code == cli.EXIT_HYPOTHESIS


def test_deterministic_reports(tmp_path, capsys):
    args = ["solve-curvature", "--deterministic", *SMALL]
    _, a, _ = _main(capsys, args)
    _, b, _ = _main(capsys, args)
    assert a == b and "seconds" not in a


def test_sweep_and_report(tmp_path, capsys):
    spec = {"command": "solve-hitchin", "base": {"n": 2, "n_r": 8, "n_theta": 16},
            "grid": {"q": [{}, {"2": [0.3]}, {"2": [0, 0, 1]}], "radius": [0.5, 0.6, 0.7]}}
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    out = tmp_path / "sweep"
    code, text, _ = _main(capsys, ["sweep", "--spec", str(path), "--out", str(out)])
    assert code == 0 and json.loads(text) == {"jobs": 9, "failed": 0}
    rows = (out / "sweep.csv").read_text().strip().splitlines()
    assert len(rows) == 10
    code, text, _ = _main(capsys, ["report", "--dir", str(out)])
    assert code == 0 and "constants a_{k,n}" in text
    assert (out / "summary.txt").exists()
    assert any(f.endswith(".dat") for _, _, fs in os.walk(out) for f in fs)


def test_report_empty_dir(tmp_path, capsys):
    code, _, err = _main(capsys, ["report", "--dir", str(tmp_path)])
    assert code == cli.EXIT_USAGE and "no artifacts" in err


def test_sweep_rejects_bad_spec():
    with pytest.raises(cli.UsageError):
        cli.sweep({"command": "report"})
    with pytest.raises(cli.UsageError):
        cli.sweep({"command": "verify", "extra": 1})


def test_job_file(tmp_path, capsys):
    job = tmp_path / "job.json"
    job.write_text(json.dumps({"f": "power:-3"}))
    code, out, _ = _main(capsys, ["classify-ab", "--job", str(job)])
    assert json.loads(out)["result"]["verdict"] == "not_in_A"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hitchin_lab.cli", "classify-ab", "--f", "power:0"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["verdict"] == "in_Ab"
