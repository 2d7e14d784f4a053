import json
import textwrap

import pytest

from qvdp import __version__, cli
from qvdp.config import parse_config
from qvdp.errors import ConfigError, SolverError

BASE = """
[params]
gamma2 = 0.1
F = 1.0
Delta = 0.5
[truncation]
n_max = 12
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def run(tmp_path, command, text, *extra):
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    return cli.main([command, "--config", str(cfg), "--out", str(out), *extra]), out


def test_gamma1_rescales_rates():
    cfg = parse_config("[params]\ngamma1 = 2\ngamma2 = 0.2\nF = 4\nDelta = 1\n")
    assert (cfg.params.gamma1, cfg.params.gamma2, cfg.params.F, cfg.params.Delta) == (1.0, 0.1, 2.0, 0.5)


@pytest.mark.parametrize(
    "text, key",
    [
        ("[params]\ngamma2 = 0\nF = 1\nDelta = 0\n", "params.gamma2"),
        ("[params]\ngamma2 = 0.1\nDelta = 0\n", "params.F"),
        ("[params]\ngamma2 = 0.1\nF = -1\nDelta = 0\n", "params.F"),
        ("[params]\ngamma2 = 0.1\nF = 1\nDelta = abc\n", "params.Delta"),
        ("[params]\ngamma2 = 0.1\nF = 1\nDelta = 0\ngamma3 = 1\n", "params.gamma3"),
        ("[params]\ngamma2 = 0.1\nF = 1\nDelta = 0\n[truncation]\nn_max = 1\n", "truncation.n_max"),
        ("[params]\ngamma2 = 0.1\nF = 1\nDelta = 0\n[truncation]\nframe = rotating\n", "truncation.frame"),
        ("[params]\ngamma2 = 0.1\nF = 1\nDelta = 0\n[run]\nworkers = 0\n", "run.workers"),
        ("gamma2 = 0.1\n", "config"),
        ("[truncation]\nn_max = 4\n", "params"),
    ],
)
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key
    assert key in str(info.value)


def test_malformed_config_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "steady", "[params]\ngamma2 = -1\nF = 1\nDelta = 0\n")
    assert code == cli.EXIT_CONFIG
    assert "gamma2" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["steady", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_resource_error_exit_code(tmp_path, capsys):
    code, out = run(tmp_path, "steady", BASE.replace("n_max = 12", "n_max = 400"))
    assert code == cli.EXIT_RESOURCE
    assert "n_max=400" in capsys.readouterr().err
    assert not any(out.glob("*.csv"))


def test_unrepresentable_initial_state_is_a_resource_error(tmp_path, capsys):
    text = BASE + "[evolve]\ninitial = coherent\ncenter_re = 40\nt_max = 1\n"
    code, _ = run(tmp_path, "evolve", text)
    assert code == cli.EXIT_RESOURCE
    assert "evolve.initial" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise SolverError("degenerate steady state: null-space dimension 2")

    monkeypatch.setattr(cli.lindblad, "steady_state", broken)
    code, _ = run(tmp_path, "steady", BASE)
    assert code == cli.EXIT_SOLVER


def test_steady_outputs(tmp_path):
    code, out = run(tmp_path, "steady", BASE)
    assert code == 0
    lines = (out / "phase_distribution.csv").read_text().splitlines()
    assert lines[0] == f"# qvdp {__version__}"
    assert lines[1].startswith("# config: ")
    assert json.loads(lines[1][len("# config: "):])["params"]["gamma2"] == 0.1
    assert lines[2] == "phi [rad],P [1/rad]"
    assert len(lines) == 3 + 256
    doc = json.loads((out / "steady.json").read_text())
    assert doc["version"] == __version__
    assert doc["config"]["truncation"]["n_max"] == 12
    assert doc["steady"]["residual"] < 1e-10
    assert doc["effective"]["regime"] in ("overdamped", "underdamped", "quantum-coherent",
                                          "no-stable-fixed-point")


def test_effective_sweep(tmp_path):
    text = """
    [params]
    gamma2 = 0.1
    F = 100
    Delta = 0
    [effective]
    sweep = Delta
    values_min = 10
    values_max = 40
    n_values = 4
    """
    code, out = run(tmp_path, "effective", text)
    assert code == 0
    doc = json.loads((out / "effective.json").read_text())
    pts = doc["sweep"]["points"]
    omegas = [p["Omega_eff"] for p in pts]
    assert omegas == sorted(omegas)
    header = (out / "effective_sweep.csv").read_text().splitlines()[2]
    assert header.startswith("Delta [gamma1],regime,Omega_eff [gamma1]")


def test_grid_needs_all_three_keys(tmp_path, capsys):
    code, _ = run(tmp_path, "scan", BASE + "[scan]\nparameter = F\nvalues_min = 0\nvalues_max = 1\n")
    assert code == cli.EXIT_CONFIG
    assert "scan.n_values" in capsys.readouterr().err


def test_outputs_are_byte_identical(tmp_path):
    text = BASE + "[scan]\nparameter = Delta\nvalues_values = 0 0.5 1.0\n"
    cfg = write(tmp_path, text)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["scan", "--config", str(cfg), "--out", str(a)]) == 0
    assert cli.main(["scan", "--config", str(cfg), "--out", str(b), "--workers", "2"]) == 0
    for name in ("scan.csv", "scan.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_worker_precedence(monkeypatch):
    cfg = parse_config(BASE)
    monkeypatch.delenv(cli.WORKERS_ENV, raising=False)
    assert cli.resolve_workers(None, cfg) == 1
    monkeypatch.setenv(cli.WORKERS_ENV, "3")
    assert cli.resolve_workers(None, cfg) == 3
    assert cli.resolve_workers(2, cfg) == 2
    cfg_run = parse_config(BASE + "[run]\nworkers = 4\n")
    assert cli.resolve_workers(None, cfg_run) == 4
    assert cli.resolve_workers(5, cfg_run) == 5
    monkeypatch.setenv(cli.WORKERS_ENV, "many")
    with pytest.raises(ConfigError):
        cli.resolve_workers(None, cfg)


def test_diagram_command(tmp_path):
    text = BASE + "[diagram]\nF_values = 0.2 4\nDelta_values = 0 1.8\ntransient = 30\nwindow = 30\n"
    code, out = run(tmp_path, "classical-diagram", text)
    assert code == 0
    rows = (out / "diagram.csv").read_text().splitlines()[3:]
    assert len(rows) == 4
    assert rows[-1].split(",")[2] == "sync-underdamped"


@pytest.mark.parametrize("command", ["evolve", "spectrum", "wigner"])
def test_other_commands_run(tmp_path, command):
    text = BASE + textwrap.dedent("""
    [evolve]
    initial = cat
    offset_re = 1
    t_max = 0.5
    n_times = 3
    wigner_n = 31
    [spectrum]
    omega_values = -2 0 2
    [wigner]
    n = 21
    """)
    code, out = run(tmp_path, command, text)
    assert code == 0
    assert any(out.glob("*.csv")) and any(out.glob("*.json"))


CONFIGS = __import__("pathlib").Path(__file__).resolve().parents[1] / "configs"


def test_shipped_effective_sweep_trends(tmp_path):
    out = tmp_path / "eff"
    assert cli.main(["effective", "--config", str(CONFIGS / "effective_sweep.ini"), "--out", str(out)]) == 0
    pts = json.loads((out / "effective.json").read_text())["sweep"]["points"]
    omega = [p["Omega_eff"] for p in pts]
    gamma = [p["Gamma"] for p in pts]
    deph = [p["Gamma_deph"] for p in pts]
    assert all(b > a for a, b in zip(omega, omega[1:]))
    assert all(b < a for a, b in zip(gamma, gamma[1:]))
    assert all(b < a for a, b in zip(deph, deph[1:]))
    assert pts[-1]["regime"] == "quantum-coherent"


def test_coarse_diagram_has_three_regions(tmp_path):
    text = (CONFIGS / "diagram.ini").read_text()
    text = text.replace("n_F = 30", "n_F = 6").replace("n_Delta = 30", "n_Delta = 6")
    code, out = run(tmp_path, "classical-diagram", text)
    assert code == 0
    labels = {row.split(",")[2] for row in (out / "diagram.csv").read_text().splitlines()[3:]}
    assert {"sync-overdamped", "sync-underdamped", "limit-cycle"} <= labels
