"""Line-oriented experiment configuration: `section.key = value` pairs.

The format is deliberately flat and diff-friendly.  Blank lines and `#`
comments are ignored; unknown keys are rejected with the offending line
number.  `resolve` applies CLI-style overrides and fills defaults, returning
an ExperimentConfig ready for the harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

__all__ = ["ExperimentConfig", "parse_config_text", "parse_config_file", "resolve", "render"]

ENV_KINDS = (
    "toy",
    "dirichlet",
    "elementary2",
    "hazard-constant",
    "hazard-increasing",
    "hazard-decreasing",
    "dist-binomial",
    "dist-poisson",
    "dist-geometric",
    "dist-uniform",
    "dist-lognormal",
)
ALGOS = ("qgi", "restart", "qwi", "dgn")
RATE_KINDS = ("paper", "constant", "mixed")


def _parse_seeds(text):
    return [int(tok) for tok in str(text).replace(",", " ").split()]


def _parse_floats(text):
    return [float(tok) for tok in str(text).replace(",", " ").split()]


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description."""

    env_kind: str = "toy"
    env_arms: int = 5
    env_states: int = 5
    env_gamma: float = 0.9
    env_seed: int = 0
    env_jobs: int = 9
    env_cap: int = 50
    env_rho1: str = "uniform"  # "uniform" or a float literal
    env_hazard_lambda: float = 0.8
    env_n: int = 10
    env_p: float = 0.5
    env_lam: float = 5.0
    env_q: float = 0.5
    env_lo: float = 0.0
    env_hi: float = 10.0
    env_delta: float = 0.1
    env_mu: float = math.log(30.0)
    env_sigma: float = 0.6
    env_max_size: float = 75.0

    algo: str = "qgi"

    rates_kind: str = "paper"
    rates_x: float = 0.2
    rates_y: float = 0.6
    rates_theta: int = 5000
    rates_kappa: int = 5000
    rates_phi: int = 10
    rates_log_base: float = math.e
    rates_alpha: float = 0.6
    rates_beta: float = 0.4

    eps_initial: float = 1.0
    eps_decay: float = 1.0
    eps_floor: float = 0.0

    run_steps: int = 20000
    run_episodes: int = 2500
    run_seeds: list = field(default_factory=lambda: [1])
    run_cadence: int = 1
    run_out: str = "results"
    run_oracle_trials: int = 1000

    dgn_batch: int = 32
    dgn_tau: float = 1e-3
    dgn_lr: float = 5e-3
    dgn_sync: int = 10
    dgn_beta: float = 1.0
    dgn_beta_phi: int = 5
    dgn_capacity: int = 10000
    dgn_encoding: str = "one-hot"

    grid_param_x: str = "x"
    grid_param_y: str = "y"
    grid_x_values: list = field(default_factory=lambda: [round(0.1 * i, 2) for i in range(1, 11)])
    grid_y_values: list = field(default_factory=lambda: [round(0.1 * i, 2) for i in range(1, 11)])
    grid_runs: int = 10
    grid_deltas: list = field(default_factory=lambda: [0.05])
    grid_steps: int = 20000
    grid_window: int = 200

    oracle_tol: float = 1e-6

    def validate(self):
        if self.env_kind not in ENV_KINDS:
            raise ValueError(f"unknown env.kind {self.env_kind!r}")
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algo.name {self.algo!r}")
        if self.rates_kind not in RATE_KINDS:
            raise ValueError(f"unknown rates.kind {self.rates_kind!r}")
        if not 0.0 < self.env_gamma < 1.0:
            raise ValueError("env.gamma must lie in (0, 1)")
        if self.run_cadence < 1:
            raise ValueError("run.cadence must be >= 1")
        if self.env_rho1 != "uniform":
            float(self.env_rho1)
        return self


# key -> (attribute, parser)
_KEYS = {
    "env.kind": ("env_kind", str),
    "env.arms": ("env_arms", int),
    "env.states": ("env_states", int),
    "env.gamma": ("env_gamma", float),
    "env.seed": ("env_seed", int),
    "env.jobs": ("env_jobs", int),
    "env.cap": ("env_cap", int),
    "env.rho1": ("env_rho1", str),
    "env.hazard_lambda": ("env_hazard_lambda", float),
    "env.n": ("env_n", int),
    "env.p": ("env_p", float),
    "env.lam": ("env_lam", float),
    "env.q": ("env_q", float),
    "env.lo": ("env_lo", float),
    "env.hi": ("env_hi", float),
    "env.delta": ("env_delta", float),
    "env.mu": ("env_mu", float),
    "env.sigma": ("env_sigma", float),
    "env.max_size": ("env_max_size", float),
    "algo.name": ("algo", str),
    "rates.kind": ("rates_kind", str),
    "rates.x": ("rates_x", float),
    "rates.y": ("rates_y", float),
    "rates.theta": ("rates_theta", int),
    "rates.kappa": ("rates_kappa", int),
    "rates.phi": ("rates_phi", int),
    "rates.log_base": ("rates_log_base", float),
    "rates.alpha": ("rates_alpha", float),
    "rates.beta": ("rates_beta", float),
    "epsilon.initial": ("eps_initial", float),
    "epsilon.decay": ("eps_decay", float),
    "epsilon.floor": ("eps_floor", float),
    "run.steps": ("run_steps", int),
    "run.episodes": ("run_episodes", int),
    "run.seeds": ("run_seeds", _parse_seeds),
    "run.cadence": ("run_cadence", int),
    "run.out": ("run_out", str),
    "run.oracle_trials": ("run_oracle_trials", int),
    "dgn.batch": ("dgn_batch", int),
    "dgn.tau": ("dgn_tau", float),
    "dgn.lr": ("dgn_lr", float),
    "dgn.sync": ("dgn_sync", int),
    "dgn.beta": ("dgn_beta", float),
    "dgn.beta_phi": ("dgn_beta_phi", int),
    "dgn.capacity": ("dgn_capacity", int),
    "dgn.encoding": ("dgn_encoding", str),
    "grid.param_x": ("grid_param_x", str),
    "grid.param_y": ("grid_param_y", str),
    "grid.x_values": ("grid_x_values", _parse_floats),
    "grid.y_values": ("grid_y_values", _parse_floats),
    "grid.runs": ("grid_runs", int),
    "grid.deltas": ("grid_deltas", _parse_floats),
    "grid.steps": ("grid_steps", int),
    "grid.window": ("grid_window", int),
    "oracle.tol": ("oracle_tol", float),
}


def parse_config_text(text):
    """Parse `section.key = value` lines into an override dict."""
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'section.key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        attr, parser = _KEYS[key]
        try:
            overrides[attr] = parser(value)
        except Exception as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {value!r} ({exc})") from exc
    return overrides


def parse_config_file(path):
    with open(path) as fh:
        return parse_config_text(fh.read())


def resolve(overrides=None, **extra):
    """Build a validated ExperimentConfig from override dicts."""
    cfg = ExperimentConfig()
    for source in (overrides or {}, extra):
        for attr, value in source.items():
            if value is None:
                continue
            if not hasattr(cfg, attr):
                raise ValueError(f"unknown configuration attribute {attr!r}")
            setattr(cfg, attr, value)
    return cfg.validate()


def render(cfg: ExperimentConfig):
    """Serialise a config back to the line format (the manifest body)."""
    attr_to_key = {attr: key for key, (attr, _) in _KEYS.items()}
    lines = []
    for f in fields(cfg):
        key = attr_to_key.get(f.name)
        if key is None:
            continue
        value = getattr(cfg, f.name)
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
