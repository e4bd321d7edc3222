import json
import subprocess
import sys

import numpy as np
import pytest

from qfluid import cli
from qfluid import discretization as disc
from qfluid.errors import ParseError, ValidationError

SINE = """
system = "navier_stokes"
[domain]
dim = 1
resolution = 64
[params]
lambda_bulk = 0.5
[solver]
dt = 1e-3
n_modes = 8
epsilon = 1e-2
[initial]
family = "sine-perturbation"
amplitude = 0.2
velocity_amplitude = 0.1
[run]
t_final = 0.04
snapshot_every = 10
"""

EQUILIBRIUM = """
[domain]
resolution = 64
[params]
lambda_bulk = 0.5
[solver]
dt = 1e-3
n_modes = 8
[initial]
family = "constant"
rho_bar = 1.2
[run]
t_final = 1.0
snapshot_every = 100
"""

UNDER_RESOLVED = """
[domain]
resolution = 8
[solver]
dt = 1e-3
n_modes = 4
[initial]
family = "gaussian-bump"
amplitude = 2.0
width = 0.1
[run]
t_final = 0.02
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_minimal_config_defaults(tmp_path):
    cfg = cli.parse_config(_write(tmp_path, "c.toml", "[initial]\nfamily = 'constant'\n"))
    assert cfg.system == "navier_stokes"
    assert cfg.domain.resolution == (64,)
    assert cfg.E0 == pytest.approx(1.0 * 2 * np.pi)  # a/(gamma-1) rho^gamma |Omega|


def test_json_config(tmp_path):
    path = _write(tmp_path, "c.json", json.dumps({"initial": {"family": "sine-perturbation"}}))
    assert cli.parse_config(path).initial["family"] == "sine-perturbation"


def test_gamma_below_one_rejected(tmp_path):
    with pytest.raises(ValidationError) as info:
        cli.parse_config(_write(tmp_path, "c.toml", "[params]\ngamma = 0.5\n"))
    assert any("gamma" in p for p in info.value.problems)


def test_euler_with_viscosity_rejected(tmp_path):
    with pytest.raises(ValidationError):
        cli.parse_config(_write(tmp_path, "c.toml", 'system = "euler"\n[params]\nmu = 1.0\n'))


def test_nonpositive_family_rejected(tmp_path):
    text = "[initial]\nfamily = 'sine-perturbation'\nrho_bar = 1.0\namplitude = 1.5\n"
    with pytest.raises(ValidationError):
        cli.parse_config(_write(tmp_path, "c.toml", text))


def test_E0_below_initial_energy_rejected(tmp_path):
    with pytest.raises(ValidationError):
        cli.parse_config(_write(tmp_path, "c.toml", "[initial]\nfamily = 'constant'\nE0 = 1.0\n"))


def test_parse_error_has_location(tmp_path):
    with pytest.raises(ParseError) as info:
        cli.parse_config(_write(tmp_path, "c.toml", "[solver]\ndt = \n"))
    assert "line 2" in str(info.value)
    with pytest.raises(ParseError):
        cli.parse_config(_write(tmp_path, "c.yaml", "a: 1"))


def test_simulate_equilibrium(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["simulate", "-c", _write(tmp_path, "c.toml", EQUILIBRIUM), "-o", str(out)])
    assert code == cli.EXIT_OK
    E = np.loadtxt(out / "energy.csv", delimiter=",", skiprows=1)[:, 1]
    assert np.ptp(E) <= 1e-12 * E[0]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == 1 and summary["config_hash"]


def test_simulate_under_resolved_is_never_silent(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["simulate", "-c", _write(tmp_path, "c.toml", UNDER_RESOLVED), "-o", str(out)])
    assert code in (cli.EXIT_AUDIT, cli.EXIT_SOLVER)
    assert json.loads((out / "summary.json").read_text())["exit_code"] == code


def test_simulate_solver_failure_keeps_partial_artifacts(tmp_path):
    text = SINE.replace("epsilon = 1e-2", "epsilon = 1e-2\nrho_floor = 0.9")
    out = tmp_path / "out"
    code = cli.main(["simulate", "-c", _write(tmp_path, "c.toml", text), "-o", str(out)])
    assert code == cli.EXIT_SOLVER
    summary = json.loads((out / "summary.json").read_text())
    assert summary["error"].startswith("PositivityLost")
    assert (out / "trajectory" / "trajectory.json").exists()


def test_simulate_is_reproducible(tmp_path):
    cfg = _write(tmp_path, "c.toml", SINE)
    for name in ("a", "b"):
        assert cli.main(["simulate", "-c", cfg, "-o", str(tmp_path / name)]) == cli.EXIT_OK
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


def test_simulate_unchecked_init(tmp_path):
    cfg = _write(tmp_path, "c.toml", SINE)
    d = disc.make_domain(1, [2 * np.pi], [64])
    disc.write_snapshot(tmp_path / "rho.snap", disc.scalar(d, lambda x: 1 + 0.1 * np.sin(x)))
    out = tmp_path / "out"
    assert cli.main(["simulate", "-c", cfg, "-o", str(out), "--unchecked-init", str(tmp_path)]) == 0


def test_compare_equilibrium(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["compare", "-c", _write(tmp_path, "c.toml", EQUILIBRIUM), "--ref", "constant",
                     "-o", str(out)])
    assert code == cli.EXIT_OK
    rel = np.loadtxt(out / "relative_energy.csv", delimiter=",", skiprows=1)[:, 1]
    assert rel.max() <= 1e-8


def test_verify_identities(tmp_path, capsys):
    assert cli.main(["verify", "--suite", "identities", "-o", str(tmp_path)]) == cli.EXIT_OK
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["passed"] and len(report["checks"]) == 5
    assert "FAIL" not in capsys.readouterr().out


def test_sweep_and_select(tmp_path):
    cfg = _write(tmp_path, "c.toml", SINE)
    sweep = tmp_path / "sweep"
    code = cli.main(["sweep", "-c", cfg, "--param", "epsilon", "--ladder", "1e-2,1e-3", "-o", str(sweep)])
    assert code == cli.EXIT_OK
    man = json.loads((sweep / "sweep.json").read_text())
    assert man["ladder"] == [1e-2, 1e-3]
    out = tmp_path / "sel"
    code = cli.main(["select", "--manifest", str(sweep), "--functionals", "energy,momentum-norm",
                     "--rate", "1.0", "-o", str(out)])
    assert code == cli.EXIT_OK
    sel = json.loads((out / "selection.json").read_text())
    assert sel["winner"] in sel["candidates"]


def test_select_singleton_manifest(tmp_path):
    cfg = _write(tmp_path, "c.toml", SINE)
    cli.main(["simulate", "-c", cfg, "-o", str(tmp_path / "run")])
    (tmp_path / "m").mkdir()
    (tmp_path / "run" / "trajectory").rename(tmp_path / "m" / "only")
    cli.main(["select", "--manifest", str(tmp_path / "m"), "-o", str(tmp_path / "sel")])
    sel = json.loads((tmp_path / "sel" / "selection.json").read_text())
    assert sel["candidates"] == [sel["winner"]]


def test_usage_errors(tmp_path):
    assert cli.main(["bogus"]) == cli.EXIT_USAGE
    assert cli.main(["simulate", "-c", "missing.toml", "-o", str(tmp_path)]) == cli.EXIT_USAGE
    assert cli.main(["select", "--manifest", str(tmp_path / "empty"), "-o", str(tmp_path)]) == cli.EXIT_USAGE


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "qfluid", "verify"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "korteweg-divergence" in res.stdout
