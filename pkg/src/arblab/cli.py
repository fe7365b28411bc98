"""Command line entry point: ``arblab {simulate,estimate,experiment,audit}``.

Output files (all in ``output.directory``):

simulate
    ``trajectory.csv`` (``i,f1..fM``) and ``model.cfg`` (config echo plus
    ``derived.*`` lines).
estimate
    ``eigenvalues.csv`` (``j,value``), ``eigenvectors.csv`` (row-major,
    ``row,v1..vM``, column j is the j-th eigenvector), ``rho_estimate.csv``
    (``row,c1..cM``), ``prediction.csv`` (``i,f1..fM``, one row, i = n) and
    ``estimate.cfg`` (provenance: n, k_n, rule, seed).
experiment
    ``experiment_long.csv`` (``n,replicate,metric,value``), one
    ``summary_<metric>.csv`` per tracked metric (``n,median_<metric>`` rows,
    then ``slope,value`` and ``r2,value``, or ``fit,none``), and with
    ``experiment.tail = true`` also ``tail.csv``.
audit
    ``audit_long.csv`` (``n,replicate,metric,value``) and
    ``audit_summary.csv`` (holds-rate per inequality).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import csvio
from .config import RunConfig, load_config, model_from_config
from .diagnostics import (
    audit_moments,
    fit_rate,
    run_replicates,
    tail_from_replicates,
)
from .estimator import (
    empirical_moments,
    predict,
    estimate_rho,
    select_truncation,
    spectral_decomposition,
)
from .exceptions import ArbError, ConfigError
from .process import derive_seed, simulate, theoretical_moments

log = logging.getLogger("arblab")


def _prepare_output(cfg: RunConfig) -> Path:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_sidecar(path: Path, cfg: RunConfig, derived: dict) -> None:
    lines = cfg.lines() + [f"derived.{k} = {v}" for k, v in derived.items()]
    path.write_text("\n".join(lines) + "\n")


def run_simulate(cfg: RunConfig) -> Path:
    model = model_from_config(cfg)
    burn = cfg["simulation.burn_in"]
    traj = simulate(model, cfg["simulation.n"], burn, cfg["simulation.master_seed"])
    out = _prepare_output(cfg)
    path = csvio.write_trajectory(out / "trajectory.csv", traj.samples, cfg.precision)
    _write_sidecar(out / "model.cfg", cfg, {
        "burn_in": traj.burn_in,
        "seed": traj.seed,
        "j0": model.j0,
        "sigma_eps2": repr(model.sigma_eps2),
        "eigenvalues": ",".join(repr(float(c)) for c in model.spectral.eigenvalues),
    })
    log.info("wrote %s (%d rows, M=%d)", path, traj.n, traj.M)
    return path


def run_estimate(cfg: RunConfig, trajectory: Path) -> Path:
    X = csvio.read_trajectory(trajectory)
    if X.shape[0] < 2:
        raise csvio.CSVFormatError(f"{trajectory}: need at least 2 observations")
    model = model_from_config(cfg)
    if X.shape[1] != model.M:
        raise csvio.CSVFormatError(
            f"{trajectory}: trajectory has M={X.shape[1]}, config has model.M={model.M}"
        )
    w = model.weights
    rule = cfg.rule()
    est = estimate_rho(X, w, rule)
    eigs = est.eigensystem
    forecast = predict(est, X[-1])
    out = _prepare_output(cfg)
    p = cfg.precision
    csvio.write_vector(out / "eigenvalues.csv", eigs.values, precision=p)
    csvio.write_matrix(out / "eigenvectors.csv", eigs.vectors, prefix="v", precision=p)
    csvio.write_matrix(out / "rho_estimate.csv", est.matrix, precision=p)
    csvio.write_trajectory(out / "prediction.csv", forecast[None, :], p)
    prov = out / "estimate.cfg"
    prov.write_text(
        f"estimate.trajectory = {trajectory}\n"
        f"estimate.n = {X.shape[0]}\n"
        f"estimate.k_n = {est.k}\n"
        f"estimate.rule = {rule.describe()}\n"
        f"estimate.rank = {eigs.rank}\n"
        f"estimate.seed = {cfg['simulation.master_seed']}\n"
    )
    log.info("n=%d rule=%s k_n=%d", X.shape[0], rule.describe(), est.k)
    return out


def run_experiment(cfg: RunConfig) -> Path:
    model = model_from_config(cfg)
    grid = np.array(cfg["experiment.n_grid"])
    R = cfg["experiment.replicates"]
    data = run_replicates(
        model, grid, R, cfg.rule(), cfg["simulation.master_seed"],
        cfg["simulation.burn_in"], cfg["experiment.workers"],
    )
    tracked = cfg["experiment.tracked"]
    out = _prepare_output(cfg)
    p = cfg.precision
    rows = [
        (int(n), r, m, data[m][i, r])
        for m in tracked for i, n in enumerate(grid) for r in range(R)
    ]
    csvio.write_long(out / "experiment_long.csv", rows, p)
    for m in tracked:
        rep = fit_rate(m, grid, data[m])
        summary = [(int(n), med) for n, med in zip(grid, rep.medians)]
        summary += [("slope", rep.slope), ("r2", rep.r2)] if rep.fitted else [("fit", "none")]
        csvio.write_rows(out / f"summary_{m}.csv", ["n", f"median_{m}"], summary, p)
        log.info("%s: medians %s slope %.4g r2 %.4g", m, np.round(rep.medians, 5), rep.slope, rep.r2)
    if cfg["experiment.tail"]:
        rep = tail_from_replicates(model, grid, data, cfg["experiment.eta"])
        tail = zip(rep.n_grid, rep.k, [rep.eta] * grid.size, rep.frequency, rep.shape_proxy)
        csvio.write_rows(out / "tail.csv", ["n", "k", "eta", "frequency", "shape_proxy"], tail, p)
    return out


def run_audit(cfg: RunConfig, trajectory: Path | None = None) -> Path:
    model = model_from_config(cfg)
    w = model.weights
    n = cfg["audit.n"] or cfg["simulation.n"]
    kwargs = dict(n_min=cfg["audit.n_min"], probes=cfg["audit.probes"])
    reports = []
    if trajectory is not None:
        X = csvio.read_trajectory(trajectory)
        if X.shape[1] != model.M:
            raise csvio.CSVFormatError(f"{trajectory}: trajectory has M={X.shape[1]}, config has M={model.M}")
        trajs = [X]
    elif cfg["audit.perfect_moments"]:
        trajs = []
        C, D = theoretical_moments(model)
        eigs = spectral_decomposition(C, w)
        k = cfg["audit.k"] or select_truncation(eigs, n, cfg.rule())
        seed = derive_seed(cfg["simulation.master_seed"], 0, 1)
        reports.append(audit_moments(model, C, D, n, k, 0, seed=seed, **kwargs))
    else:
        trajs = [
            simulate(model, n, cfg["simulation.burn_in"], derive_seed(cfg["simulation.master_seed"], r))
            for r in range(cfg["audit.replicates"])
        ]
    for r, traj in enumerate(trajs):
        samples = traj if isinstance(traj, np.ndarray) else traj.samples
        mom = empirical_moments(samples, w)
        k = cfg["audit.k"] or select_truncation(spectral_decomposition(mom, w), mom.n, cfg.rule())
        seed = derive_seed(cfg["simulation.master_seed"], r, 1)
        reports.append(audit_moments(model, mom.C, mom.D, mom.n, k, r, seed=seed, **kwargs))

    out = _prepare_output(cfg)
    p = cfg.precision
    csvio.write_long(out / "audit_long.csv", [row for rep in reports for row in rep.rows()], p)
    names = [rec.name for rec in reports[0].records]
    summary = []
    for name in names:
        recs = [rep.record(name) for rep in reports]
        status = "informational" if any(r.status == "informational" for r in recs) else "checked"
        summary.append((
            name, status, len(recs), float(np.mean([r.holds for r in recs])),
            max(r.shortfall for r in recs),
        ))
    csvio.write_rows(
        out / "audit_summary.csv",
        ["inequality", "status", "records", "holds_rate", "max_shortfall"], summary, p,
    )
    for row in summary:
        log.info("%s [%s]: holds-rate %.3f", row[0], row[1], row[3])
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arblab", description="ARB(1) simulation, estimation and consistency audits."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate", "simulate a trajectory"),
        ("estimate", "estimate rho from a trajectory CSV and forecast one step"),
        ("experiment", "Monte Carlo rate (and tail) experiment"),
        ("audit", "audit the bound inequalities"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path, help="flat section.key = value file")
        p.add_argument("--seed", type=int, help="override simulation.master_seed")
        if name == "estimate":
            p.add_argument("--trajectory", required=True, type=Path, help="trajectory CSV (i,f1..fM)")
        if name == "audit":
            p.add_argument("--trajectory", type=Path, help="audit this trajectory instead of simulating")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="arblab: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.override("simulation.master_seed", args.seed)
        if args.command == "simulate":
            run_simulate(cfg)
        elif args.command == "estimate":
            run_estimate(cfg, args.trajectory)
        elif args.command == "experiment":
            run_experiment(cfg)
        else:
            run_audit(cfg, args.trajectory)
    except ConfigError as exc:
        print(f"arblab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except ArbError as exc:
        print(f"arblab: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
