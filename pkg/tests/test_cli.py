import csv
import io
import json
import shlex
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from twopoint import cli
from twopoint.optimizer import RunAborted, RunRecord

ROOT = Path(__file__).resolve().parents[1]
CHILDREN = Path(__file__).resolve().parent / "children"


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def _rows(text):
    return list(csv.DictReader(io.StringIO("".join(l for l in text.splitlines(True) if not l.startswith("#")))))


def _cmd(*parts):
    return " ".join(shlex.quote(str(p)) for p in (sys.executable, *parts))


BENCH = ["bench", "--d", "3", "--T", "200", "--replications", "3", "--seed", "7", "--n_mc", "2000"]


def test_bench_rows_and_summary(capsys):
    code, out, _ = run(BENCH, capsys)
    assert code == 0
    rows = _rows(out)
    assert [r["status"] for r in rows] == ["ok"] * 3 + ["summary"]
    assert rows[-1]["rep"] == "summary"
    assert float(rows[-1]["avg_regret"]) == pytest.approx(np.mean([float(r["avg_regret"]) for r in rows[:3]]))
    assert list(rows[0]) == cli.BENCH_COLUMNS
    assert "# config seed = 7" in out


def test_bench_grid_and_fit(capsys):
    code, out, _ = run(["bench", "--dims", "2,4", "--horizons", "100,400", "--replications", "2", "--seed", "1",
                        "--n_mc", "0"], capsys)
    assert code == 0
    assert sum(r["status"] == "summary" for r in _rows(out)) == 4
    assert "# fit = " in out


def test_bench_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(BENCH + ["--output", str(a)], capsys)[0] == 0
    assert run(BENCH + ["--output", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_bench_json(capsys):
    code, out, _ = run(BENCH + ["--format", "json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["meta"]["seed"] == 7 and len(doc["rows"]) == 4
    assert doc["rows"][0]["status"] == "ok"


@pytest.mark.parametrize("argv,key", [
    (["bench", "--T", "0"], "T"),
    (["bench", "--d", "-1"], "d"),
    (["bench", "--geometry", "torus"], "geometry"),
    (["bench", "--shrink", "1.5"], "shrink"),
    (["check", "--suites", "nope"], "suites"),
    (["optimize-external", "--d", "2", "--T", "5"], "command"),
])
def test_config_errors_exit_2_and_name_key(argv, key, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert f"{key}:" in err


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["bench", "--colour", "red"])
    assert info.value.code == 2


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("d = 3\nflavour = mint\n")
    code, _, err = run(["bench", "--config", str(cfg)], capsys)
    assert code == 2 and "flavour" in err


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# bench settings\nd = 3\nT = 100   # short\nreplications = 2\nseed = 4\nn_mc = 0\n")
    code, out, _ = run(["bench", "--config", str(cfg), "--T", "50"], capsys)
    rows = _rows(out)
    assert code == 0 and all(r["T"] == "50" and r["d"] == "3" for r in rows)


def test_missing_seed_is_generated_and_reported(capsys):
    code, out, err = run(["bench", "--d", "2", "--T", "20", "--replications", "2", "--n_mc", "0"], capsys)
    assert code == 0
    seed = int(err.split("seed = ")[1].split()[0])
    assert f"seed={seed}" in out


def test_aborted_bench_writes_partial_rows(monkeypatch, capsys):
    calls = {"n": 0}
    real = cli.run_replication

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 2:
            its = np.zeros((0, 2))
            raise RunAborted(RunRecord(its, its, np.zeros(2), [], None, 0.1, np.zeros(0), 0, 0, 0, False),
                             RuntimeError("oracle died"))
        return real(*args, **kwargs)

    monkeypatch.setattr(cli, "run_replication", flaky)
    code, out, err = run(["bench", "--d", "2", "--T", "50", "--replications", "3", "--seed", "1", "--n_mc", "0"], capsys)
    rows = _rows(out)
    assert code == 3
    assert [r["status"] for r in rows] == ["ok", "aborted"]
    assert "aborted" in err


def test_check_suites_pass(capsys):
    code, out, _ = run(["check", "--suites", "anchored_d2,md_inequality,inf_norm", "--seed", "3",
                        "--samples", "20000"], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines and all(l.startswith("PASS ") for l in lines)
    assert any(l.startswith("PASS anchored_d2/d=100") for l in lines)


def test_external_uses_exactly_budget(tmp_path, capsys):
    counter = tmp_path / "count.txt"
    code, out, _ = run(["optimize-external", "--command", _cmd(CHILDREN / "counting_child.py", counter),
                        "--d", "3", "--T", "400", "--budget", "301", "--seed", "2"], capsys)
    assert code == 0
    assert int(counter.read_text()) == 300  # T clipped to floor(301 / 2)
    assert out.startswith("average_iterate = ")


def test_external_default_budget_and_output(tmp_path, capsys):
    counter, dest = tmp_path / "count.txt", tmp_path / "traj.json"
    code, _, _ = run(["optimize-external", "--command", _cmd(CHILDREN / "counting_child.py", counter),
                      "--d", "2", "--T", "50", "--seed", "2", "--output", str(dest)], capsys)
    doc = json.loads(dest.read_text())
    assert code == 0 and int(counter.read_text()) == 100
    assert len(doc["rows"]) == 50 and doc["queries"] == 100 and len(doc["average_iterate"]) == 2


def test_external_nan_exits_4_and_logs_exchange(capsys):
    code, _, err = run(["optimize-external", "--command", _cmd(ROOT / "scripts" / "hidden_center_child.py", "0,0", "--nan"),
                        "--d", "2", "--T", "10", "--seed", "0"], capsys)
    assert code == 4
    assert "request: EVAL" in err and "response: VAL nan" in err


def test_external_bad_exit_status_is_protocol_error(capsys):
    code, _, _ = run(["optimize-external", "--command", _cmd(CHILDREN / "bad_exit_child.py"),
                      "--d", "2", "--T", "5", "--seed", "0"], capsys)
    assert code == 4


def test_external_missing_program(capsys):
    code, _, _ = run(["optimize-external", "--command", "/nonexistent/child", "--d", "2", "--T", "5", "--seed", "0"], capsys)
    assert code == 4


@pytest.mark.parametrize("level,expect_info,expect_debug", [("off", False, False), ("info", True, False), ("trace", True, True)])
def test_log_levels(level, expect_info, expect_debug, monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("ZO_LOG", level)
    code, _, err = run(["optimize-external", "--command", _cmd(CHILDREN / "counting_child.py", tmp_path / "c"),
                        "--d", "2", "--T", "5", "--seed", "0"], capsys)
    assert code == 0
    assert ("INFO" in err) == expect_info
    assert ("-> EVAL" in err) == expect_debug


def test_module_entry_point_subprocess():
    proc = subprocess.run([sys.executable, "-m", "twopoint", "bench", "--T", "0"], capture_output=True, text=True)
    assert proc.returncode == 2 and "T:" in proc.stderr
