"""Command-line interface smoke tests."""

import os

from ndpsim.cli import main
from ndpsim.device import Machine
from ndpsim.scenarios import dump_scenario_toml, get_scenario


def test_sweep_copy(capsys, tmp_path):
    csv_path = str(tmp_path / "copy.csv")
    assert main(["sweep-copy", "--csv", csv_path]) == 0
    out = capsys.readouterr().out
    assert "monotone=True" in out
    assert os.path.exists(csv_path)


def test_oracle_correct_and_broken(capsys):
    assert main(["oracle", "undo-1dev-single"]) == 0
    assert main(["oracle", "broken-undo-premature"]) == 0  # expected broken
    out = capsys.readouterr().out
    assert "0 Inconsistent" in out and "violation" in out


def test_oracle_from_toml_file(tmp_path):
    sc = get_scenario("redo-1dev-single")
    path = tmp_path / "sc.toml"
    path.write_text(dump_scenario_toml(sc))
    assert main(["oracle", str(path)]) == 0


def test_check_trace_file(tmp_path):
    sc = get_scenario("undo-1dev-single")
    m = Machine(sc.program(), sc.config())
    m.run()
    path = str(tmp_path / "run.trace")
    m.trace.save(path)
    assert main(["check", path]) == 0

    broken = get_scenario("broken-redo-skip-sync")
    mb = Machine(broken.program(), broken.config())
    mb.run()
    bad = str(tmp_path / "bad.trace")
    mb.trace.save(bad)
    assert main(["check", bad]) == 1


def test_run_writes_artifacts(tmp_path, capsys):
    out = str(tmp_path / "results")
    assert main(["run", "--out", out, "--seeds", "1", "--txns", "6"]) == 0
    assert os.path.exists(os.path.join(out, "speedups.csv"))
    assert os.path.exists(os.path.join(out, "report.txt"))
    assert "ordering: ok" in capsys.readouterr().out
