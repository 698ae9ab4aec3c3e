import subprocess
import sys

import pytest

from dpgfem.cli import (
    CSV_COLUMNS,
    RunConfig,
    UsageError,
    main,
    parse_config,
    read_config_file,
    run_convergence,
)


@pytest.fixture(autouse=True)
def _cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def test_defaults():
    cfg = parse_config(["run"])
    assert cfg == RunConfig()
    assert (cfg.experiment, cfg.levels, cfg.kappa, cfg.coupling) == ("1", 5, 1.0, "weak")


@pytest.mark.parametrize("argv", [
    ["run", "--kappa", "0"],
    ["run", "--kappa", "-1"],
    ["run", "--levels", "0"],
    ["run", "--base-n", "0"],
    ["run", "--quad-degree", "11"],
    ["run", "--experiment", "3"],
    ["run", "--coupling", "mixed"],
    ["run", "--out", "/nonexistent/dir/x.csv"],
    [],
])
def test_usage_errors(argv):
    with pytest.raises(UsageError):
        parse_config(argv)
    assert main(argv) == 2


def test_file_and_flag_precedence(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# study\nexperiment = 2\nlevels=3  # short\nkappa=2.5\n")
    cfg = parse_config(["run", "--config", str(f), "--levels", "4"])
    assert (cfg.experiment, cfg.levels, cfg.kappa) == ("2", 4, 2.5)


@pytest.mark.parametrize("text", ["bogus = 1\n", "levels\n", "levels = many\n"])
def test_bad_config_file(tmp_path, text):
    f = tmp_path / "c.cfg"
    f.write_text(text)
    with pytest.raises(UsageError):
        read_config_file(f)


def test_run_writes_files(tmp_path):
    cfg = RunConfig(levels=5, base_n=1, out="r.csv", jump_out="j.dat")
    reports, samples = run_convergence(cfg)
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].split(",") == CSV_COLUMNS
    assert len(lines) == 6
    Ns = [int(l.split(",")[2]) for l in lines[1:]]
    assert Ns == sorted(set(Ns))
    col = CSV_COLUMNS.index("eoc_u1")
    assert lines[1].split(",")[col] == "" and lines[2].split(",")[col] != ""
    jump = (tmp_path / "j.dat").read_text().splitlines()
    assert jump[0] == "# s x y jump" and len(jump) == len(samples) + 1


def test_repeat_runs_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["run", "--levels", "3", "--out", f"{name}.csv", "--jump-out", f"{name}.dat"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.dat").read_bytes() == (tmp_path / "b.dat").read_bytes()


def test_main_prints_csv(capsys):
    assert main(["run", "--experiment", "2", "--levels", "2", "--coupling", "strong"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == ",".join(CSV_COLUMNS) and len(out) == 3


def test_run_failure_exit_code(monkeypatch):
    import dpgfem.cli as cli

    def boom(*a, **k):
        raise RuntimeError("no")

    monkeypatch.setattr(cli, "solve", boom)
    assert main(["run", "--levels", "1"]) == 1


def test_module_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "dpgfem", "run", "--levels", "1"], capture_output=True, text=True
    )
    assert out.returncode == 0 and out.stdout.startswith("level,h,N")
