import numpy as np
import pytest

from leflab import cli, mesh
from leflab.errors import ConfigError
from leflab.potentials import PotentialSpec
from leflab.problem import read_diagram


def test_parse_config_defaults():
    cfg = cli.parse_config("")
    assert cfg.kind == "interval" and cfg.counts == (201,)
    assert cfg.q == 0.5 and cfg.p == 3.0 and cfg.variant == "plus"
    assert cfg.seed == 42


def test_parse_config_full():
    cfg = cli.parse_config(
        """
        # full set of knobs
        kind = rectangle
        counts = 33 49
        q = 0.25
        p = 2.5
        variant = minus
        k = gaussian-bump 1 2 0.5 0.5 0.1
        h = affine 1 0.5 0.25   # trailing comment
        tol_linear = 1e-11
        tol_fixed_point = 1e-9
        tol_lambda = 0.05
        tol_gradient = 1e-7
        nontrivial_floor = 5e-5
        energy_floor = 1e-12
        norm_cap = 1e5
        seed = 9
        """
    )
    assert cfg.kind == "rectangle" and cfg.counts == (33, 49)
    assert cfg.k == PotentialSpec("gaussian-bump", (1.0, 2.0, 0.5, 0.5, 0.1))
    assert cfg.h == PotentialSpec("affine", (1.0, 0.5, 0.25))
    assert cfg.variant == "minus" and cfg.seed == 9 and cfg.norm_cap == 1e5


def test_parse_config_file_potential():
    cfg = cli.parse_config("k = file /some/where.dat\n")
    assert cfg.k == PotentialSpec("file", path="/some/where.dat")


@pytest.mark.parametrize(
    "text,line",
    [
        ("q = 1.5", 1),
        ("p = 0.5", 1),
        ("kind = disk", 1),
        ("counts = 33 33 33", 1),
        ("counts = one", 1),
        ("\nwibble = 3", 2),
        ("tol_lambda = -0.1", 1),
        ("tol_lambda = soon", 1),
        ("seed = -3", 1),
        ("variant = both", 1),
        ("k = parabola 1 2", 1),
        ("k = file", 1),
        ("k =", 1),
        ("just some words", 1),
    ],
)
def test_parse_config_errors(text, line):
    with pytest.raises(ConfigError) as exc:
        cli.parse_config(text)
    assert exc.value.line == line


def test_load_config_missing(tmp_path):
    with pytest.raises(ConfigError):
        cli.load_config(tmp_path / "nope.cfg")


def _config(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


SMALL = "counts = 65\n"


def test_solve_roundtrip(tmp_path, capsys):
    out = tmp_path / "u.dat"
    rc = cli.run(["solve", "--lambda", "3", "--config", _config(tmp_path, SMALL), "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "converged = 1" in text and "variant = plus" in text
    field = mesh.read_field(out)
    assert field.grid.counts == (65,)
    assert 0.10 < np.max(field.values) < 0.12


def test_solve_is_deterministic(tmp_path, capsys):
    args = ["solve", "--lambda", "2", "--variant", "minus", "--config", _config(tmp_path, SMALL)]
    assert cli.run(args) == 0
    first = capsys.readouterr().out
    assert cli.run(args) == 0
    assert capsys.readouterr().out == first
    assert "classified_nontrivial = 1" in first


def test_solve_divergence_exit_code(tmp_path, capsys):
    rc = cli.run(["solve", "--lambda", "40", "--config", _config(tmp_path, SMALL)])
    assert rc == 1
    captured = capsys.readouterr()
    assert "diverged (nonexistence regime)" in captured.err
    assert "converged = 0" in captured.out


def test_solve_rejects_nonpositive_lambda(tmp_path, capsys):
    rc = cli.run(["solve", "--lambda", "-1", "--config", _config(tmp_path, SMALL)])
    assert rc == 2


def test_eig_output(tmp_path, capsys):
    rc = cli.run(["eig", "--config", _config(tmp_path, SMALL)])
    assert rc == 0
    text = capsys.readouterr().out
    lam1 = float(text.splitlines()[-1].split("=")[1])
    assert lam1 == pytest.approx(np.pi**2, rel=1e-3)


def test_lambda_star_output(tmp_path, capsys):
    rc = cli.run(["lambda-star", "--tol", "0.1", "--config", _config(tmp_path, SMALL)])
    assert rc == 0
    lines = dict(
        ln.split(" = ") for ln in capsys.readouterr().out.splitlines() if " = " in ln
    )
    assert float(lines["lambda0"]) <= float(lines["bracket_low"])
    assert float(lines["bracket_high"]) <= float(lines["lambda_prime"])


def test_sweep_writes_readable_diagram(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    rc = cli.run(
        ["sweep", "--from", "0.5", "--to", "2.5", "--steps", "3", "--out", str(out),
         "--config", _config(tmp_path, SMALL)]
    )
    assert rc == 0
    diagram = read_diagram(out)
    assert [r.lam for r in diagram.records] == [0.5, 1.5, 2.5]
    assert all(r.converged for r in diagram.records)


def test_sweep_jobs_match_serial(tmp_path):
    cfgp = _config(tmp_path, SMALL + "variant = minus\n")
    serial = tmp_path / "serial.csv"
    parallel = tmp_path / "parallel.csv"
    base = ["sweep", "--from", "0.05", "--to", "0.65", "--steps", "4", "--config", cfgp]
    assert cli.run(base + ["--out", str(serial)]) == 0
    assert cli.run(base + ["--out", str(parallel), "--jobs", "2"]) == 0
    assert serial.read_bytes() == parallel.read_bytes()


def test_sweep_range_validation(tmp_path, capsys):
    cfgp = _config(tmp_path, SMALL)
    assert cli.run(["sweep", "--from", "3", "--to", "1", "--steps", "3",
                    "--out", str(tmp_path / "x.csv"), "--config", cfgp]) == 2
    assert cli.run(["sweep", "--from", "1", "--to", "3", "--steps", "1",
                    "--out", str(tmp_path / "x.csv"), "--config", cfgp]) == 2


def test_oracle_bracket(capsys):
    rc = cli.run(["oracle", "--tol", "0.05"])
    assert rc == 0
    text = capsys.readouterr().out
    lines = dict(ln.split(" = ") for ln in text.splitlines() if " = " in ln)
    assert float(lines["bracket_low"]) == pytest.approx(9.04, abs=0.05)


def test_oracle_rejects_rectangle(tmp_path, capsys):
    rc = cli.run(["oracle", "--config", _config(tmp_path, "kind = rectangle\n")])
    assert rc == 2


def test_bad_config_exit_code(tmp_path, capsys):
    rc = cli.run(["eig", "--config", _config(tmp_path, "q = 2\n")])
    assert rc == 2
    assert "line 1" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    assert cli.run([]) == 2
    assert cli.run(["solve"]) == 2  # --lambda is required
    assert cli.run(["frobnicate"]) == 2
    assert cli.run(["--help"]) == 0
