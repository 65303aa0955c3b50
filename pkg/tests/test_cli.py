import csv
import json

import pytest

from cpscm import cli, sim
from cpscm.analysis import CSV_FIELDS

TINY = "N = 64\nL = 4\nM = 4\nK = 3\nL_h = 4\nes_n0 = 0, 10, 20\ntrials = 6\nseed = 11\n"


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "tiny.cfg"
    p.write_text(TINY)
    return p


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_presets_command(capsys):
    assert cli.main(["presets"]) == 0
    out = capsys.readouterr().out
    assert "fig2" in out and "example-16db" in out


def test_verify_command(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 8


def test_simulate_writes_csv_and_report(cfg_file, tmp_path):
    out = tmp_path / "run.csv"
    assert cli.main(["simulate", "--config", str(cfg_file), "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 3 and tuple(rows[0]) == CSV_FIELDS
    assert all(r["trials"] == "6" and r["mode"] == "scm-single" for r in rows)
    report = json.loads((tmp_path / "run.csv.report.json").read_text())
    assert report["seed"] == 11 and not report["interrupted"]
    assert report["configs"][0]["K"] == 3


def test_simulate_to_stdout(cfg_file, capsys):
    assert cli.main(["simulate", "--config", str(cfg_file), "--es-n0", "30"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == ",".join(CSV_FIELDS) and len(out) == 2


def test_thread_count_does_not_change_output(cfg_file, tmp_path):
    texts = []
    for threads in (1, 3):
        out = tmp_path / f"t{threads}.csv"
        assert cli.main(["simulate", "--config", str(cfg_file), "--threads", str(threads),
                         "--out", str(out)]) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_seed_changes_output(cfg_file, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["simulate", "--config", str(cfg_file), "--out", str(a)])
    cli.main(["simulate", "--config", str(cfg_file), "--out", str(b), "--seed", "12"])
    assert a.read_bytes() != b.read_bytes()


def test_multi_mode_override(cfg_file, tmp_path):
    out = tmp_path / "m.csv"
    assert cli.main(["simulate", "--config", str(cfg_file), "--mode", "scm-multi",
                     "--out", str(out)]) == 0
    assert read_rows(out)[0]["mode"] == "scm-multi"


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("N = 1000\nL = 16\n")
    assert cli.main(["simulate", "--config", str(p)]) == 2
    assert "N not divisible by L" in capsys.readouterr().err


def test_unknown_preset_exit_code(capsys):
    assert cli.main(["simulate", "--preset", "nope"]) == 2


def test_interrupt_flushes_partial_rows(cfg_file, tmp_path, monkeypatch):
    real = sim.run_trial

    def flaky(cfg, trial):
        if trial == 4:
            raise KeyboardInterrupt
        return real(cfg, trial)

    monkeypatch.setattr(sim, "run_trial", flaky)
    out = tmp_path / "partial.csv"
    assert cli.main(["simulate", "--config", str(cfg_file), "--out", str(out)]) == 130
    rows = read_rows(out)
    assert len(rows) == 3 and all(r["trials"] == "4" for r in rows)
    report = json.loads((tmp_path / "partial.csv.report.json").read_text())
    assert report["interrupted"]
