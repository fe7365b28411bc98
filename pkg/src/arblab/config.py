"""Flat ``section.key = value`` run configuration.

Every key has a type and a default; unknown keys, unparsable values and
inconsistent combinations are rejected by :func:`load_config` before any
computation or file output happens.  Lines starting with ``#`` are comments,
and keys in the ``derived`` section (written to sidecar echoes) are ignored
on input so a sidecar can be fed back as a config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import TRACKED
from .estimator import TruncationRule
from .exceptions import ArbError, ConfigError
from .gelfand import Weights, random_frame
from .process import ARBModel, build_model, geometric_profile, power_profile
from .wavelet import WaveletBasis, besov_weights, bessel_eigen_profile


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _auto(parse):
    def inner(text: str):
        return None if text.strip().lower() == "auto" else parse(text)

    return inner


def _join(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_join(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# key -> (parser, default)
SCHEMA = {
    "model.M": (int, 8),
    "model.profile": (str, "geometric"),
    "model.ratio": (float, 0.5),
    "model.scale": (float, 1.0),
    "model.exponent": (float, 2.0),
    "model.gamma": (float, 2.5),
    "model.c0": (_auto(float), None),
    "model.weights": (str, "uniform"),
    "model.wavelet_family": (str, "haar"),
    "model.wavelet_J": (int, 1),
    "model.beta": (float, 1.0),
    "model.frame": (str, "canonical"),
    "model.frame_seed": (int, 0),
    "model.rho": (_floats, (0.5,)),
    "model.rho_band": (float, 0.0),
    "model.rho_max": (float, 0.95),
    "simulation.n": (int, 4096),
    "simulation.burn_in": (_auto(int), None),
    "simulation.master_seed": (int, 0),
    "estimation.rule": (str, "log"),
    "estimation.c1": (float, 0.5),
    "estimation.c0": (float, 0.0),
    "estimation.theta": (float, 0.25),
    "experiment.n_grid": (_ints, (256, 1024, 4096, 16384)),
    "experiment.replicates": (int, 30),
    "experiment.tracked": (_names, ("cov_hs", "crosscov_hs")),
    "experiment.tail": (_bool, False),
    "experiment.eta": (_auto(float), None),
    "experiment.workers": (int, 1),
    "audit.n": (_auto(int), None),
    "audit.replicates": (int, 1),
    "audit.k": (_auto(int), None),
    "audit.n_min": (int, 512),
    "audit.probes": (int, 1000),
    "audit.perfect_moments": (_bool, False),
    "output.directory": (str, "out"),
    "output.precision": (int, 17),
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration values keyed by ``section.key``."""

    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    def override(self, key: str, value) -> "RunConfig":
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        cfg = RunConfig({**self.values, key: value})
        validate(cfg)
        return cfg

    @property
    def output_dir(self) -> Path:
        return Path(self["output.directory"])

    @property
    def precision(self) -> int:
        return self["output.precision"]

    def rule(self) -> TruncationRule:
        return TruncationRule(
            self["estimation.rule"], self["estimation.c1"], self["estimation.c0"],
            self["estimation.theta"],
        )

    def lines(self) -> list[str]:
        return [f"{key} = {_join(self.values[key])}" for key in SCHEMA]


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    values = {key: default for key, (_, default) in SCHEMA.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}, line {lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("derived."):
            continue
        if key not in SCHEMA:
            raise ConfigError(f"{source}, line {lineno}: unknown key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            values[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{source}, line {lineno}: bad value for {key}: {exc}") from None
    cfg = RunConfig(values)
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def validate(cfg: RunConfig) -> None:
    """Check every value and build the model once; raises ConfigError."""
    _require(cfg["model.M"] >= 2, "model.M must be at least 2")
    _require(cfg["model.profile"] in ("geometric", "power", "bessel"),
             "model.profile must be geometric, power or bessel")
    _require(cfg["model.weights"] in ("uniform", "besov"), "model.weights must be uniform or besov")
    _require(cfg["model.frame"] in ("canonical", "random"), "model.frame must be canonical or random")
    rho_max = cfg["model.rho_max"]
    _require(rho_max < 1.0,
             f"model.rho_max = {rho_max} violates the stationarity condition (needs ||rho|| < 1)")
    _require(len(cfg["model.rho"]) in (1, cfg["model.M"]), "model.rho needs 1 or M values")
    _require(cfg["simulation.n"] >= 2, "simulation.n must be at least 2")
    bi = cfg["simulation.burn_in"]
    _require(bi is None or bi >= 0, "simulation.burn_in must be non-negative")
    grid = cfg["experiment.n_grid"]
    _require(len(grid) >= 1 and all(n >= 2 for n in grid), "experiment.n_grid needs values >= 2")
    _require(all(a < b for a, b in zip(grid, grid[1:])), "experiment.n_grid must be strictly increasing")
    _require(cfg["experiment.replicates"] >= 1, "experiment.replicates must be at least 1")
    unknown = set(cfg["experiment.tracked"]) - set(TRACKED)
    _require(not unknown, f"experiment.tracked has unknown metrics {sorted(unknown)}")
    eta = cfg["experiment.eta"]
    _require(eta is None or eta > 0, "experiment.eta must be positive")
    _require(cfg["experiment.workers"] >= 1, "experiment.workers must be at least 1")
    _require(cfg["audit.replicates"] >= 1, "audit.replicates must be at least 1")
    _require(cfg["audit.probes"] >= 1, "audit.probes must be at least 1")
    an = cfg["audit.n"]
    _require(an is None or an >= 2, "audit.n must be at least 2")
    _require(1 <= cfg["output.precision"] <= 17, "output.precision must lie in 1..17")
    try:
        cfg.rule()
        model_from_config(cfg)
    except ConfigError:
        raise
    except ArbError as exc:
        raise ConfigError(str(exc)) from None


def _wavelet_basis(cfg: RunConfig) -> WaveletBasis:
    M = cfg["model.M"]
    J_max = int(round(math.log2(M))) - 1
    if 2 ** (J_max + 1) != M:
        raise ConfigError(f"wavelet coordinates need M to be a power of two, got {M}")
    return WaveletBasis(cfg["model.wavelet_family"], cfg["model.wavelet_J"], J_max)


def model_weights(cfg: RunConfig) -> Weights:
    if cfg["model.weights"] == "uniform":
        return Weights.uniform(cfg["model.M"])
    basis = _wavelet_basis(cfg)
    return besov_weights(basis.J, basis.J_max, cfg["model.beta"]).weights


def model_from_config(cfg: RunConfig) -> ARBModel:
    M = cfg["model.M"]
    profile = cfg["model.profile"]
    w = model_weights(cfg)
    if profile == "geometric":
        C = geometric_profile(M, cfg["model.ratio"], cfg["model.scale"])
    elif profile == "power":
        C = power_profile(M, cfg["model.exponent"], cfg["model.scale"])
    else:
        basis = _wavelet_basis(cfg)
        shape = bessel_eigen_profile(cfg["model.gamma"], basis, 1.0)
        c0 = cfg["model.c0"]
        if c0 is None:
            # largest scale keeping C_m <= t_m**2 on the canonical frame
            c0 = float(np.min(w.t**2 / shape))
        C = c0 * shape
    frame = None
    if cfg["model.frame"] == "random":
        frame = random_frame(w, np.random.default_rng(cfg["model.frame_seed"]))
    rho = cfg["model.rho"]
    rho = rho[0] if len(rho) == 1 else np.array(rho)
    band = cfg["model.rho_band"] or None
    return build_model(C, rho, w, frame, band, cfg["model.rho_max"])
