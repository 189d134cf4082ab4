import json

import pytest

from ..app import main as cli
from ..app.schemas import Command
from ..app.services.errors import IntegrationFailure


def only_run_dir(out):
    dirs = [p for p in out.iterdir() if p.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


def test_verify_hermite_writes_artifacts(tmp_path):
    code = cli.main(["verify-hermite", "--N", "3", "--output-dir", str(tmp_path), "-q"])
    assert code == cli.EXIT_OK
    run_dir = only_run_dir(tmp_path)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["status"] == "PASSED"
    assert manifest["config"]["N"] == 3
    assert "hermite_checks.csv" in manifest["artifacts"]
    assert b"\r\n" in (run_dir / "hermite_checks.csv").read_bytes()
    assert (tmp_path / "runs.db").exists()


def test_scale_out_of_range_is_usage_error(tmp_path):
    assert cli.main(["verify-hermite", "--c", "1.5", "--output-dir", str(tmp_path), "-q"]) == cli.EXIT_USAGE


def test_config_file_merge(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text('N = 5\nseed = 7\n\n[sample]\nM = 300\nreal_mode = true\n', encoding="utf-8")
    args = cli.build_parser().parse_args(["sample", "--config", str(config), "--seed", "9"])
    loaded = cli.load_config(args)
    assert loaded.command is Command.SAMPLE
    assert loaded.N == 5
    assert loaded.M == 300
    assert loaded.real_mode is True
    assert loaded.seed == 9

    other = cli.load_config(cli.build_parser().parse_args(["moments", "--config", str(config)]))
    assert other.M == 1000


def test_missing_config_file(tmp_path):
    assert cli.main(["sample", "--config", str(tmp_path / "nope.toml"), "-q"]) == cli.EXIT_USAGE


def test_bad_toml(tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text("N = = 3", encoding="utf-8")
    assert cli.main(["sample", "--config", str(config), "-q"]) == cli.EXIT_USAGE


def test_unwritable_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["verify-hermite", "--N", "2", "--output-dir", str(blocker / "sub"), "-q"]) == cli.EXIT_USAGE


def test_list_runs(tmp_path, capsys):
    assert cli.main(["list-runs", "--output-dir", str(tmp_path)]) == 0
    assert "No run registry" in capsys.readouterr().out

    cli.main(["verify-hermite", "--N", "2", "--output-dir", str(tmp_path), "-q"])
    capsys.readouterr()
    assert cli.main(["list-runs", "--output-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "verify-hermite" in out and "PASSED" in out

    assert cli.main(["list-runs", "--output-dir", str(tmp_path), "--run-id", "zzzzzzzz"]) == 1


def test_sample_command(tmp_path):
    code = cli.main(["sample", "--N", "2", "--M", "200", "--seed", "3", "--output-dir", str(tmp_path), "-q"])
    assert code == cli.EXIT_OK
    run_dir = only_run_dir(tmp_path)
    assert (run_dir / "samples.csv").exists()
    assert (run_dir / "seed_path.json").exists()


def test_verify_coeffs_command(tmp_path):
    assert cli.main(["verify-coeffs", "--N", "2", "--output-dir", str(tmp_path), "-q"]) == cli.EXIT_OK


def test_evolve_command(tmp_path):
    code = cli.main(["evolve", "--N", "2", "--t", "0.05", "--output-dir", str(tmp_path), "-q"])
    assert code == cli.EXIT_OK
    run_dir = only_run_dir(tmp_path)
    assert (run_dir / "trajectory.csv").exists()
    assert (run_dir / "report.json").exists()


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "ou-euler" in capsys.readouterr().out


def test_failed_check_sets_exit_status(tmp_path, monkeypatch):
    def failing(run):
        run.check("always_fails", False, 1.0, 0.0)

    monkeypatch.setitem(cli.HANDLERS, Command.VERIFY_HERMITE, failing)
    code = cli.main(["verify-hermite", "--N", "2", "--output-dir", str(tmp_path), "-q"])
    assert code == cli.EXIT_FAILED
    manifest = json.loads((only_run_dir(tmp_path) / "manifest.json").read_text())
    assert manifest["status"] == "FAILED"
    assert manifest["checks"][0]["name"] == "always_fails"


def test_numerical_error_exits_one(tmp_path, monkeypatch):
    def broken(run):
        raise IntegrationFailure("step size underflow", 0.01)

    monkeypatch.setitem(cli.HANDLERS, Command.EVOLVE, broken)
    assert cli.main(["evolve", "--N", "2", "--output-dir", str(tmp_path), "-q"]) == cli.EXIT_FAILED


def run_command(out, *argv):
    code = cli.main([*argv, "--output-dir", str(out), "-q"])
    run_dir = only_run_dir(out)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert (code == cli.EXIT_OK) == (manifest["status"] == "PASSED")
    assert code in (cli.EXIT_OK, cli.EXIT_FAILED)
    assert manifest["checks"]
    return code, run_dir, manifest


def check_named(manifest, name):
    matches = [c for c in manifest["checks"] if c["name"] == name]
    assert len(matches) == 1, name
    return matches[0]


def test_verify_field_command(tmp_path):
    code, run_dir, manifest = run_command(tmp_path, "verify-field", "--N", "2", "--M", "50")
    assert code == cli.EXIT_OK
    assert (run_dir / "field_checks.csv").exists()
    ladder = json.loads((run_dir / "report.json").read_text())["moment_regularity"]
    assert set(ladder["per_N"]) == {"4", "6", "8"}
    assert check_named(manifest, "moment_regularity_ladder")["passed"]
    for n in (4, 6, 8):
        assert check_named(manifest, f"field_second_moment_finite_N{n}")["passed"]


def test_verify_coeffs_freezes_growth_constant(tmp_path):
    code, run_dir, manifest = run_command(tmp_path, "verify-coeffs", "--N", "3")
    assert code == cli.EXIT_OK
    check = check_named(manifest, "growth_bound_frozen_constant")
    assert check["measured"] <= 1.0
    assert "N=8" in check["detail"]
    table = json.loads((run_dir / "report.json").read_text())["table"]
    assert table["growth_constant_box"] == 8


def test_dispersive_command(tmp_path):
    code, run_dir, _ = run_command(tmp_path, "dispersive", "--max-index", "20")
    assert code == cli.EXIT_OK
    for name in ("dispersive.csv", "dispersive.svg", "dispersive_product.svg"):
        assert (run_dir / name).exists()


def test_moments_command(tmp_path):
    _, run_dir, manifest = run_command(tmp_path, "moments", "--N", "2", "--M", "400")
    assert (run_dir / "moments.csv").exists()
    assert "moments.csv" in manifest["artifacts"]
    assert any(c["name"].startswith("sobolev_moment") for c in manifest["checks"])


def test_quasi_invariance_command(tmp_path):
    _, run_dir, manifest = run_command(tmp_path, "quasi-invariance", "--N", "2", "--M", "200", "--t", "0.05")
    assert (run_dir / "quasi_invariance.json").exists()
    assert (run_dir / "densities.csv").exists()
    assert len(json.loads((run_dir / "quasi_invariance.json").read_text())) == 4
    liouville = check_named(manifest, "density_liouville")
    assert liouville["passed"]


def test_kernel_bounds_command(tmp_path):
    _, run_dir, manifest = run_command(tmp_path, "kernel-bounds", "--order", "1", "--M", "2000", "--pairs", "400")
    assert (run_dir / "kernel_terms.csv").exists()
    assert check_named(manifest, "osgood_divergence")["passed"]
    lip = check_named(manifest, "quasi_lipschitz")
    assert "probability 1/2" in lip["detail"]
    report = json.loads((run_dir / "report.json").read_text())
    assert report["quasi_lipschitz"]["safety"] == 1.5


def test_particle_command(tmp_path):
    _, run_dir, manifest = run_command(tmp_path, "particle", "--N", "2", "--order", "1", "--M", "128",
                                       "--steps", "5", "--t-reverse", "0.1", "--particle-tol", "0.5")
    assert manifest["config"]["t_final"] == 0.2
    assert (run_dir / "transport_invariant.csv").exists()
    if manifest["status"] != "ERROR":
        assert (run_dir / "particle_path.csv").exists()
        assert (run_dir / "weak_identity.csv").exists()
        assert check_named(manifest, "zero_vorticity_at_rest")["passed"]


def test_same_seed_gives_identical_csv(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        assert cli.main(["sample", "--N", "3", "--M", "150", "--seed", "11", "--output-dir", str(out), "-q"]) == 0
    assert (only_run_dir(first) / "samples.csv").read_bytes() == (only_run_dir(second) / "samples.csv").read_bytes()


def test_horizon_defaults_per_command():
    parse = cli.build_parser().parse_args
    assert cli.load_config(parse(["particle"])).t_final == 0.2
    assert cli.load_config(parse(["evolve"])).t_final == 0.1
    assert cli.load_config(parse(["particle", "--t", "0.3"])).t_final == 0.3


def test_evolve_checks_stationarity_on_unit_interval(tmp_path):
    code, _, manifest = run_command(tmp_path, "evolve", "--N", "2", "--t", "0.05")
    assert code == cli.EXIT_OK
    check = check_named(manifest, "single_mode_stationary_1_1")
    assert check["detail"] == "t in [0, 1]"
