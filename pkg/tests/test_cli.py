import subprocess
import sys

import numpy as np
import pytest

from lrfd import experiments as ex
from lrfd.cli import main
from lrfd.coherence import recovery_error
from lrfd.io import read_matrix, write_mask, write_matrix
from lrfd.linalg import normalize_columns
from lrfd.observation import UniformExactCount, sample_observations
from lrfd.solvers import SolverConfig, solve_cono, solve_lrfd
from lrfd.synth import SubspaceMixSpec, gen_subspace_mixture


@pytest.fixture
def instance(tmp_path):
    l0 = gen_subspace_mixture(SubspaceMixSpec(20, 30, 3, 1, 4))
    om = sample_observations(20, 30, UniformExactCount(420), 4)
    x = np.where(om.mask, l0, 0.0)
    write_matrix(tmp_path / "x.csv", x)
    write_mask(tmp_path / "m.csv", om)
    return tmp_path, l0, om


def test_complete_round_trip_bit_exact(instance, capsys):
    d, l0, om = instance
    code = main(["complete", "--matrix", str(d / "x.csv"), "--mask", str(d / "m.csv"),
                 "--lambda", "1e6", "--out", str(d / "l.csv"), "--report", str(d / "r.csv")])
    assert code == 0
    got = read_matrix(d / "l.csv")
    want = solve_cono(read_matrix(d / "x.csv"), om, SolverConfig(lam=1e6)).solution
    np.testing.assert_array_equal(got, want)
    assert recovery_error(got, l0) == recovery_error(want, l0)
    report = ex.read_csv(d / "r.csv")
    assert list(report[0]) == ex.COMPLETE_COLUMNS and report[0]["algorithm"] == "cono"


def test_complete_lrfd_with_dictionary_is_normalized(instance, rng):
    d, l0, om = instance
    a = 3.0 * rng.standard_normal((20, 8))
    write_matrix(d / "a.csv", a)
    code = main(["complete", "--matrix", str(d / "x.csv"), "--mask", str(d / "m.csv"),
                 "--algorithm", "lrfd", "--dictionary", str(d / "a.csv"), "--lambda", "10",
                 "--out", str(d / "l.csv"), "--report", str(d / "r.csv")])
    assert code == 0
    want = solve_lrfd(read_matrix(d / "x.csv"), normalize_columns(read_matrix(d / "a.csv")), om,
                      SolverConfig(lam=10.0)).reconstruction
    np.testing.assert_array_equal(read_matrix(d / "l.csv"), want)


def test_complete_lrfd_without_dictionary_runs_pipeline(instance, capsys):
    d, l0, om = instance
    code = main(["complete", "--matrix", str(d / "x.csv"), "--mask", str(d / "m.csv"),
                 "--algorithm", "lrfd", "--lambda", "1e6", "--out", str(d / "l.csv")])
    assert code == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == ",".join(ex.COMPLETE_COLUMNS)
    assert out[1].split(",")[5] == "3"  # rank estimate
    assert recovery_error(read_matrix(d / "l.csv"), l0) < 1e-3


def test_missing_mask_is_usage_error(instance, capsys):
    d, _, _ = instance
    with pytest.raises(SystemExit) as exc:
        main(["complete", "--matrix", str(d / "x.csv"), "--out", str(d / "l.csv")])
    assert exc.value.code != 0
    code = main(["complete", "--matrix", str(d / "x.csv"), "--mask", str(d / "nope.csv"),
                 "--out", str(d / "l.csv")])
    assert code != 0
    assert "nope.csv" in capsys.readouterr().err


def test_complete_errors(instance, tmp_path):
    d, _, _ = instance
    write_matrix(tmp_path / "small.csv", np.ones((3, 3)))
    assert main(["complete", "--matrix", str(tmp_path / "small.csv"), "--mask", str(d / "m.csv"),
                 "--out", str(d / "l.csv")]) != 0
    assert main(["complete", "--matrix", str(d / "x.csv"), "--mask", str(d / "m.csv"),
                 "--dictionary", str(d / "x.csv"), "--out", str(d / "l.csv")]) != 0
    write_matrix(tmp_path / "zero.csv", np.zeros((20, 2)))
    assert main(["complete", "--matrix", str(d / "x.csv"), "--mask", str(d / "m.csv"),
                 "--algorithm", "lrfd", "--dictionary", str(tmp_path / "zero.csv"),
                 "--out", str(d / "l.csv")]) != 0
    with pytest.raises(SystemExit):
        main(["complete", "--matrix", str(d / "x.csv"), "--mask", str(d / "m.csv")])


def test_sweep_writes_csv_and_is_reproducible(tmp_path):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text("size = 8\nranks = 2\nrhos = 0.5\ntrials = 2  # small\n")
    outs = []
    for name in ("a.csv", "b.csv"):
        code = main(["lemma-check", "--config", str(cfg), "--seed", "5",
                     "--out", str(tmp_path / name)])
        assert code == 0
        outs.append([{k: v for k, v in r.items() if k != "wall_time"}
                     for r in ex.read_csv(tmp_path / name)])
    assert outs[0] == outs[1]
    assert list(ex.read_csv(tmp_path / "a.csv")[0]) == ex.LEMMA_COLUMNS


def test_failed_cells_still_exit_zero(tmp_path):
    cfg = tmp_path / "grid.cfg"
    # far too few observations to recover anything
    cfg.write_text("rows = 10\ncols = 20\nnum_subspaces = 2\nranks = 8\nfractions = 0.2\n"
                   "trials = 1\nmax_iters = 50\nlrfd_max_iters = 20\n")
    assert main(["phase-diagram", "--config", str(cfg), "--out", str(tmp_path / "p.csv")]) == 0
    rows = ex.read_csv(tmp_path / "p.csv")
    assert rows[0]["success_count"] == "0"


@pytest.mark.parametrize("argv", [
    ["phase-diagram", "--config", "/nonexistent.cfg"],
    ["fig3-sweep", "--seed", "-1"],
    ["fig3-sweep", "--workers", "0"],
    ["lemma-check", "--out", "/nonexistent-dir/x.csv", "--config", "__CFG__"],
    ["bogus"],
])
def test_usage_and_io_errors(argv, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("size = 4\nranks = 1\nrhos = 1.0\ntrials = 1\n")
    argv = [str(cfg) if a == "__CFG__" else a for a in argv]
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code != 0


def test_bad_config_key_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["coherence-sweep", "--config", str(cfg)]) == 2
    assert "colour" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("size = 4\nranks = 1\nrhos = 1.0\ntrials = 1\n")
    out = subprocess.run([sys.executable, "-m", "lrfd.cli", "lemma-check", "--config", str(cfg)],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.splitlines()[0] == ",".join(ex.LEMMA_COLUMNS)
