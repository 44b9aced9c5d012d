import json

import pytest

from qrcsl.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_UNRELIABLE, main, render_csv, run
from qrcsl.config import DEFAULT_SEED, ConfigError, parse_config
from qrcsl.params import GRW_A, GRW_LAMBDA


def test_parse_lambda_with_unit():
    cfg = parse_config("[model]\nlambda = 1e-16 /s\n")
    assert cfg.params().lam == 1e-16


def test_unit_conversion():
    cfg = parse_config("[model]\na = 100 nm\n[nucleus]\ntau = 17.9 ps\nk = 3.2e12 /m\n")
    assert cfg.params().a == pytest.approx(1e-5, rel=1e-15)
    assert cfg.section("nucleus")["tau"] == pytest.approx(17.9e-12, rel=1e-15)
    assert cfg.section("nucleus")["k"] == pytest.approx(3.2e10, rel=1e-15)


def test_empty_config_gives_defaults():
    cfg = parse_config("")
    p = cfg.params()
    assert (p.lam, p.a, cfg.seed) == (GRW_LAMBDA, GRW_A, DEFAULT_SEED)


def test_all_errors_collected():
    text = "[model]\na = -1 cm\nlambda = 3\nfoo = 1\nmass = 2 furlongs\n[nowhere]\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    errs = info.value.errors
    assert len(errs) == 5
    assert any("model.a" in e and "positive" in e for e in errs)
    assert any("missing unit" in e for e in errs)
    assert any("unknown key 'foo'" in e for e in errs)
    assert any("furlongs" in e for e in errs)
    assert any("unknown section" in e for e in errs)


def test_mu_override_and_lists():
    cfg = parse_config("[model]\nmu = 50\n[kernels]\nmu_values = 1, 2.5\n")
    assert cfg.params().mu == pytest.approx(50.0, rel=1e-15)
    assert cfg.section("kernels")["mu_values"] == (1.0, 2.5)


def test_echo_round_trip():
    cfg = parse_config("[model]\na = 2 um\nlambda = 3 /day\n[run]\nseed = 99\n")
    again = parse_config(cfg.to_text())
    assert again.values == cfg.values


def _run_cli(tmp_path, args, config=""):
    path = tmp_path / "run.cfg"
    path.write_text(config)
    return main(["--config", str(path), "--quiet", *args])


def test_excitation_envelope(tmp_path):
    out = tmp_path / "e.json"
    assert _run_cli(tmp_path, ["excitation", "--out", str(out)]) == EXIT_OK
    env = json.loads(out.read_text())
    recs = {r["name"]: r["value"] for r in env["records"]}
    assert recs["flag_qrcsl"] == "consistent" and recs["flag_rcsl"] == "excluded"
    assert 1e-16 < recs["rate_qrcsl"] < 1e-15 and 1e10 < recs["rate_rcsl"] < 1e11
    assert env["seed"] == DEFAULT_SEED and env["exit_code"] == 0


def test_energy_rate_csv_columns(tmp_path):
    out = tmp_path / "g.csv"
    cfg = "[energy]\nmu_min = 10\nmu_max = 1e7\npoints_per_decade = 1\n"
    assert _run_cli(tmp_path, ["energy-rate", "--format", "csv", "--out", str(out)], cfg) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "mu,g_mu,asymptote,relative_deviation"
    assert len(lines) == 8
    mu, g, asym, dev = map(float, lines[1].split(","))
    assert mu == 10.0 and g / asym - 1 == pytest.approx(dev, rel=1e-12)


def test_malformed_config_leaves_no_output(tmp_path):
    out = tmp_path / "x.json"
    assert _run_cli(tmp_path, ["--out", str(out)], "[model]\na = -1 cm\n") == EXIT_CONFIG
    assert not out.exists()
    assert not list(tmp_path.glob(".qrcsl-*"))


def test_numerical_failure_exit_code(tmp_path):
    out = tmp_path / "k.json"
    cfg = "[kernels]\nmu_values = 10\ncompton_radii = 40\nprofile_samples = 1000\n"
    assert _run_cli(tmp_path, ["kernels", "--out", str(out)], cfg) == EXIT_NUMERICAL
    assert not out.exists()


def test_unreliable_statistics_exit_code(tmp_path):
    out = tmp_path / "k.json"
    cfg = ("[kernels]\nmu_values = 1\nmomenta = 0 /a\nprofile_samples = 20\n"
           "profile_separations = 10, 20 a\n")
    assert _run_cli(tmp_path, ["kernels", "--out", str(out)], cfg) == EXIT_UNRELIABLE
    env = json.loads(out.read_text())
    assert any(e["kind"] == "statistics" for e in env["errors"])


def test_seed_flag_and_validation(tmp_path):
    out = tmp_path / "s.json"
    assert _run_cli(tmp_path, ["excitation", "--seed", "7", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["seed"] == 7
    assert _run_cli(tmp_path, ["excitation", "--seed", "-1"]) == EXIT_CONFIG


@pytest.mark.parametrize("sub", ["excitation", "scan", "energy-rate", "collapse-rate"])
def test_deterministic_subcommands_byte_identical(tmp_path, sub):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    _run_cli(tmp_path, [sub, "--format", "csv", "--out", str(a)])
    _run_cli(tmp_path, [sub, "--format", "csv", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_echoed_config_reproduces_records():
    cfg = parse_config("[run]\nsubcommand = collapse-rate\n[collapse]\nmu_values = 10, 100\n")
    env, code = run(cfg)
    env2, _ = run(parse_config(env["config_text"]))
    assert code == EXIT_OK
    assert env2["records"] == env["records"] and env2["table"] == env["table"]


def test_scan_empty_range():
    cfg = parse_config("[run]\nsubcommand = scan\n[scan]\nlambda_points = 0\n")
    env, code = run(cfg)
    assert code == EXIT_OK and env["table"]["rows"] == []
    assert render_csv(env).count("\n") == 1


def test_simulate_runs(tmp_path):
    out = tmp_path / "sim.json"
    cfg = "[simulate]\nn_traj = 100\nt_final = 0.2 /lambda\n"
    assert _run_cli(tmp_path, ["simulate", "--out", str(out)], cfg) in (EXIT_OK, EXIT_UNRELIABLE)
    names = {r["name"] for r in json.loads(out.read_text())["records"]}
    assert {"left_fraction", "coherence_master", "residual_operator_norm"} <= names
