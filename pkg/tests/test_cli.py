import csv
import time
import math

import pytest

from arblab import csvio
from arblab.cli import main


def write_cfg(tmp_path, text, name="run.cfg"):
    tmp_path.mkdir(parents=True, exist_ok=True)
    out = tmp_path / "out"
    p = tmp_path / name
    p.write_text(f"output.directory = {out}\n" + text)
    return p, out


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_simulate_row_count_and_echo(tmp_path):
    cfg, out = write_cfg(tmp_path, "model.M = 4\nsimulation.n = 100\n")
    assert main(["simulate", "--config", str(cfg)]) == 0
    assert len((out / "trajectory.csv").read_text().splitlines()) == 101
    echo = (out / "model.cfg").read_text()
    assert "model.M = 4" in echo and "derived.sigma_eps2" in echo


def test_simulate_deterministic(tmp_path):
    cfg, out = write_cfg(tmp_path, "simulation.n = 50\n")
    main(["simulate", "--config", str(cfg), "--seed", "7"])
    first = (out / "trajectory.csv").read_bytes()
    main(["simulate", "--config", str(cfg), "--seed", "7"])
    assert (out / "trajectory.csv").read_bytes() == first
    main(["simulate", "--config", str(cfg), "--seed", "8"])
    assert (out / "trajectory.csv").read_bytes() != first


def test_invalid_config_creates_nothing(tmp_path, capsys):
    cfg, out = write_cfg(tmp_path, "model.rho_max = 1.0\n")
    assert main(["simulate", "--config", str(cfg)]) != 0
    assert "stationarity" in capsys.readouterr().err
    assert not out.exists()


def test_estimate_outputs(tmp_path, caplog):
    cfg, out = write_cfg(tmp_path, "simulation.n = 4096\n")
    main(["simulate", "--config", str(cfg)])
    traj = out / "trajectory.csv"
    with caplog.at_level("INFO", logger="arblab"):
        assert main(["estimate", "--config", str(cfg), "--trajectory", str(traj)]) == 0
    for name in ("eigenvalues.csv", "eigenvectors.csv", "rho_estimate.csv", "prediction.csv"):
        assert (out / name).exists()
    k = math.floor(0.5 * math.log(4096))
    assert f"k_n = {k}" in (out / "estimate.cfg").read_text()
    assert f"k_n={k}" in caplog.text
    assert csvio.read_matrix(out / "rho_estimate.csv").shape == (8, 8)
    assert csvio.read_trajectory(out / "prediction.csv").shape == (1, 8)


def test_estimate_two_rows(tmp_path):
    cfg, out = write_cfg(tmp_path, "model.M = 3\n")
    traj = tmp_path / "t.csv"
    traj.write_text("i,f1,f2,f3\n0,1,0.5,0.2\n1,0.3,-0.1,0.4\n")
    assert main(["estimate", "--config", str(cfg), "--trajectory", str(traj)]) == 0
    assert "k_n = 1" in (out / "estimate.cfg").read_text()


def test_estimate_malformed_row(tmp_path, capsys):
    cfg, _ = write_cfg(tmp_path, "model.M = 2\n")
    traj = tmp_path / "t.csv"
    traj.write_text("i,f1,f2\n0,1,2\n1,3,4\n2,oops,4\n")
    assert main(["estimate", "--config", str(cfg), "--trajectory", str(traj)]) != 0
    assert "line 4" in capsys.readouterr().err


def test_estimate_dimension_mismatch(tmp_path, capsys):
    cfg, _ = write_cfg(tmp_path, "model.M = 4\n")
    traj = tmp_path / "t.csv"
    traj.write_text("i,f1,f2\n0,1,2\n1,3,4\n")
    assert main(["estimate", "--config", str(cfg), "--trajectory", str(traj)]) == 1
    assert "M=2" in capsys.readouterr().err


def test_experiment_summary_schema(tmp_path):
    cfg, out = write_cfg(tmp_path, (
        "experiment.n_grid = 128,256,512\nexperiment.replicates = 5\n"
        "experiment.tracked = cov_hs\nexperiment.tail = true\n"
    ))
    assert main(["experiment", "--config", str(cfg)]) == 0
    summary = rows(out / "summary_cov_hs.csv")
    assert summary[0] == ["n", "median_cov_hs"]
    assert [r[0] for r in summary[1:]] == ["128", "256", "512", "slope", "r2"]
    long = csvio.read_long(out / "experiment_long.csv")
    assert len(long) == 15
    assert rows(out / "tail.csv")[0] == ["n", "k", "eta", "frequency", "shape_proxy"]


def test_experiment_single_point(tmp_path):
    cfg, out = write_cfg(tmp_path, "experiment.n_grid = 128\nexperiment.replicates = 1\n")
    assert main(["experiment", "--config", str(cfg)]) == 0
    summary = rows(out / "summary_cov_hs.csv")
    assert summary[-1] == ["fit", "none"]
    long = {r[2]: r[3] for r in csvio.read_long(out / "experiment_long.csv")}
    assert float(summary[1][1]) == long["cov_hs"]


def test_experiment_parallel_identical(tmp_path):
    base = "experiment.n_grid = 64,128\nexperiment.replicates = 4\n"
    cfg1, out1 = write_cfg(tmp_path / "serial", base)
    cfg2, out2 = write_cfg(tmp_path / "pool", base + "experiment.workers = 2\n")
    main(["experiment", "--config", str(cfg1)])
    main(["experiment", "--config", str(cfg2)])
    assert (out1 / "experiment_long.csv").read_bytes() == (out2 / "experiment_long.csv").read_bytes()


def test_audit_reference(tmp_path):
    cfg, out = write_cfg(tmp_path, "audit.n = 4096\naudit.replicates = 2\n")
    assert main(["audit", "--config", str(cfg)]) == 0
    summary = {r[0]: r for r in rows(out / "audit_summary.csv")[1:]}
    assert summary["kernel_bound"][1:4] == ["checked", "2", "1"]


def test_audit_informational(tmp_path):
    cfg, out = write_cfg(tmp_path, "audit.n = 200\n")
    assert main(["audit", "--config", str(cfg)]) == 0
    summary = {r[0]: r for r in rows(out / "audit_summary.csv")[1:]}
    assert summary["kernel_perturbation"][1] == "informational"
    assert summary["kernel_bound"][1] == "checked"


def test_audit_perfect_moments(tmp_path):
    cfg, out = write_cfg(tmp_path, "audit.perfect_moments = true\n")
    assert main(["audit", "--config", str(cfg)]) == 0
    summary = rows(out / "audit_summary.csv")[1:]
    assert all(r[3] == "1" for r in summary)
    vals = {r[2]: r[3] for r in csvio.read_long(out / "audit_long.csv")}
    assert vals["eigvec_perturbation.lhs"] == 0.0 and vals["eigvec_perturbation.rhs"] == 0.0


def test_audit_reads_simulated_trajectory(tmp_path):
    cfg, out = write_cfg(tmp_path, "simulation.n = 1024\n")
    main(["simulate", "--config", str(cfg)])
    assert main(["audit", "--config", str(cfg), "--trajectory", str(out / "trajectory.csv")]) == 0


def test_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "none.cfg")]) == 2


def test_config_flag_required():
    with pytest.raises(SystemExit):
        main(["simulate"])


def test_full_reference_experiment_budget(tmp_path):
    cfg, out = write_cfg(tmp_path, "experiment.tail = true\n")
    start = time.perf_counter()
    assert main(["experiment", "--config", str(cfg)]) == 0
    assert time.perf_counter() - start < 180
    assert len(rows(out / "summary_crosscov_hs.csv")) == 7
