import json
import subprocess
import sys

import pytest

from cuasutm.bench import builtin
from cuasutm.bench.cli import main


def cli(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def small_run(tmp_path, capsys):
    out = tmp_path / "out"
    code, stdout, _ = cli(capsys, "run", str(builtin("paper")), "--counts", "1,5", "--out", str(out))
    return code, stdout, out


def test_run_writes_all_outputs(small_run):
    code, stdout, out = small_run
    assert code == 0
    assert stdout.splitlines()[0] == "protocol,count,n,mean,min,q1,median,q3,max"
    assert "MISMATCH" not in stdout
    for name in ("results.csv", "samples.csv", "transcript.jsonl", "sessions.jsonl",
                 "audit.jsonl", "run.json"):
        assert (out / name).stat().st_size > 0, name
    assert json.loads((out / "run.json").read_text())["counts"] == [1, 5]


def test_replay_of_fresh_transcript(small_run, capsys):
    _, _, out = small_run
    code, stdout, _ = cli(capsys, "replay", str(out / "transcript.jsonl"))
    assert code == 0 and stdout.startswith("IDENTICAL")


def test_replay_detects_tampering(small_run, capsys):
    _, _, out = small_run
    path = out / "transcript.jsonl"
    lines = path.read_text().splitlines()
    lines[3] = lines[3].replace('"sent_at":', '"sent_at":1', 1)
    path.write_text("\n".join(lines) + "\n")
    code, stdout, _ = cli(capsys, "replay", str(path))
    assert code == 1 and "DIVERGED at line 4" in stdout


def test_run_with_missing_file_is_a_usage_error(tmp_path, capsys):
    code, _, err = cli(capsys, "run", str(tmp_path / "missing.json"))
    assert code == 2 and "not found" in err


def test_run_with_invalid_scenario(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "name": "x", "counts": [1], "groups": []}))
    code, _, err = cli(capsys, "run", str(bad))
    assert code == 2 and "invalid scenario" in err


def test_bad_flag_is_a_usage_error(capsys):
    code, _, _ = cli(capsys, "run", "--transport", "pigeon", "x.json")
    assert code == 2


def test_fsm_export(tmp_path, capsys):
    code, stdout, _ = cli(capsys, "fsm-export")
    assert code == 0 and stdout.splitlines()[0] == "state,event,next_state,color"
    cli(capsys, "fsm-export", "--out", str(tmp_path / "e.csv"))
    assert (tmp_path / "e.csv").read_text() == stdout


def test_cases_prints_29_passes(capsys):
    code, stdout, _ = cli(capsys, "cases")
    passes = [line for line in stdout.splitlines() if line.startswith("PASS")]
    assert code == 0 and len(passes) == 29
    assert not any(line.startswith(("FAIL", "PROBLEM")) for line in stdout.splitlines())


@pytest.mark.parametrize("argv,shown", [
    (["--detect", "1.16", "--clarify", "2.5"], "0.6831"),
    (["--detect", "1.16", "--clarify", "2.5", "--timeout", "25"], "0.0872"),
    (["--detect", "1.16", "--clarify", "2.5", "--tolerated"], "0.0000"),
])
def test_budget(capsys, argv, shown):
    code, stdout, _ = cli(capsys, "budget", *argv)
    assert code == 0 and stdout.startswith(shown)


def test_budget_domain_error(capsys):
    code, _, err = cli(capsys, "budget", "--detect", "0", "--clarify", "0")
    assert code == 2 and "zero" in err


def test_console_script_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cuasutm.bench.cli", "budget",
                           "--detect", "1", "--clarify", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("0.5000")
