import csv
import json
import subprocess
import sys

import pytest

from tlfea import cli, io, meshgen, validation


def _run(*argv):
    return cli.main(list(argv))


def test_mesh_info_ok(tmp_path, beam, capsys):
    p = tmp_path / "beam.tlmesh"
    io.save_mesh(beam, p)
    assert _run("mesh-info", str(p)) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "nodes      105" in out and "elements   36" in out and "dofs       315" in out


def test_mesh_info_missing_file_is_io_error(tmp_path, capsys):
    assert _run("mesh-info", str(tmp_path / "absent.tlmesh")) == cli.EXIT_IO
    assert "I/O error" in capsys.readouterr().err


def test_mesh_info_malformed_file_is_io_error(tmp_path):
    p = tmp_path / "bad.tlmesh"
    p.write_text("tlmesh 9\n")
    assert _run("mesh-info", str(p)) == cli.EXIT_IO


def test_argparse_usage_error():
    with pytest.raises(SystemExit) as info:
        _run("bench", "cantilever", "--res", "3")
    assert info.value.code == cli.EXIT_USAGE


def test_bad_override_is_usage_error(capsys):
    assert _run("run", "cantilever_svk", "--set", "solver.bogus=1") == cli.EXIT_USAGE
    assert _run("run", "cantilever_svk", "--set", "nodot") == cli.EXIT_USAGE


def test_unknown_scenario_is_io_error():
    assert _run("run", "no_such_scenario") == cli.EXIT_IO


def test_bad_thread_count_is_usage_error(monkeypatch):
    monkeypatch.setenv("TLFEA_THREADS", "zero")
    assert _run("presets") == cli.EXIT_USAGE


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    assert _run("run", "cantilever_svk", "--steps", "3", "--out", str(out)) == cli.EXIT_OK
    rows = io.read_metrics(out / "metrics.csv")
    assert [r["step"] for r in rows] == ["1", "2", "3"]
    report = json.loads((out / "report.json").read_text())
    assert report["steps"] == 3 and report["all_converged"]
    assert "clamp" in report["joint_reactions"]
    assert (out / "cantilever_svk_000000.vtk").exists()


def test_nonconvergence_exit_code(tmp_path):
    rc = _run("run", "cantilever_svk", "--steps", "1", "--out", str(tmp_path),
              "--set", "solver.max_inner=1", "--set", "solver.max_outer=1", "--set", "solver.eps_in=1e-30",
              "--set", "solver.eps_out=1e-30")
    assert rc == cli.EXIT_NONCONVERGED
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["nonconverged_steps"] == [1]


def test_validate_failure_exit_code(monkeypatch, capsys):
    def failing():
        res = validation.SuiteResult("always fails")
        res.add("impossible", False, 1.0, 0.0)
        return res

    monkeypatch.setitem(validation.SUITES, "sparse", (failing,))
    assert _run("validate", "sparse") == cli.EXIT_CHECK_FAILED
    out = capsys.readouterr().out
    assert "FAIL always fails" in out and "some checks FAILED" in out


def test_bench_appends_csv_row(tmp_path, capsys):
    p = tmp_path / "bench.csv"
    for _ in range(2):
        assert _run("bench", "cantilever", "--res", "0", "--solver", "newton", "--material", "svk",
                    "--steps", "2", "--csv", str(p)) == cli.EXIT_OK
    with open(p, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert tuple(rows[0]) == cli.BENCH_COLUMNS
    assert rows[0]["dofs"] == "315" and rows[0]["steps"] == "2"
    assert float(rows[0]["rtf"]) > 0


def test_presets_listing(capsys):
    assert _run("presets", "--keys") == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "brick" in out and "joint_pull_revolute" in out and "body.density" not in out
    assert "[body]:" in out


def test_console_entry_point_module():
    r = subprocess.run([sys.executable, "-m", "tlfea.cli", "presets"], capture_output=True, text=True)
    assert r.returncode == 0 and "cantilever_mr" in r.stdout


def test_mesh_generator_round_trip_via_cli(tmp_path, capsys):
    p = tmp_path / "ball.tlmesh"
    io.save_mesh(meshgen.sphere_mesh(0.1, 2), p)
    assert _run("mesh-info", str(p)) == cli.EXIT_OK
