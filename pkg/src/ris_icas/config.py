"""Experiment configuration as sectioned ``key = value`` text.

Sections: ``[experiment]``, ``[env]``, ``[train]``, ``[sweep]`` and an
optional ``[correlation]`` whose keys hold JSON lists of ``[re, im]`` pairs.
Every key has a default; :func:`load_config` materializes all of them so a
loaded config carries no implicit state.
"""
from __future__ import annotations

import configparser
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .agents import TrainConfig
from .channel import ChannelDynamics
from .correlation import CorrelationModel
from .env import EnvConfig, make_env_config
from .game import GameConfig
from .rates import RateConfig


class ConfigError(ValueError):
    """Raised for unparsable or invalid configuration files."""


@dataclass(frozen=True)
class EnvSpec:
    """Scalar description of an environment; :meth:`build` makes the EnvConfig."""

    n_elements: int = 8
    resolution_bits: int = 1
    n_actions: int = 8
    action_seed: int = 0
    temporal_rho: float = 0.9
    eve_spatial_rho: float = 0.5
    attacker_mode: str = "markov"
    markov_matrix: tuple = ((0.9, 0.1), (0.2, 0.8))
    threshold_tau: float = 1.0
    w_d: float = 0.5
    w_k: float = 0.5
    eaves_cost_CE: float = 0.5
    bandwidth_B: float = 1.0
    probe_time_Ts: float = 1.0
    leak_formula: str = "mi_consistent"
    reward_mode: str = "analytic"
    episode_length_T: int = 20
    observation_mode: str = "full"
    state_encoding: str = "compact"

    def build(self, correlation: CorrelationModel | None = None, **overrides) -> EnvConfig:
        spec = replace(self, **overrides) if overrides else self
        game = GameConfig(
            w_d=spec.w_d, w_k=spec.w_k, eaves_cost_CE=spec.eaves_cost_CE,
            rate_config=RateConfig(spec.bandwidth_B, spec.probe_time_Ts, spec.leak_formula),
        )
        n_actions = None if spec.n_actions <= 0 else spec.n_actions
        # small grids (e.g. N=2, b=1 in the RIS sweep) are enumerated in full
        if n_actions is not None and spec.resolution_bits > 0 \
                and 2 ** (spec.resolution_bits * spec.n_elements) <= n_actions:
            n_actions = None
        return make_env_config(
            n_elements=spec.n_elements, resolution_bits=spec.resolution_bits,
            n_actions=n_actions, action_seed=spec.action_seed,
            dynamics=ChannelDynamics(spec.temporal_rho, spec.eve_spatial_rho),
            attacker_mode=spec.attacker_mode, markov_matrix=spec.markov_matrix,
            threshold_tau=spec.threshold_tau, game=game, reward_mode=spec.reward_mode,
            episode_length_T=spec.episode_length_T, observation_mode=spec.observation_mode,
            state_encoding=spec.state_encoding,
            correlation=correlation if correlation is not None
            and correlation.n_elements == spec.n_elements else None,
        )


@dataclass(frozen=True)
class SweepSpec:
    weights: tuple = tuple(np.round(np.linspace(0.0, 1.0, 21), 4).tolist()) + (0.91, 0.93, 0.97, 0.99)
    n_grid: tuple = (2, 4, 8, 16)
    b_grid: tuple = (1, 2)
    learning_rates: tuple = (0.1, 0.01, 0.001)
    weight_strategy: str = "exhaustive"
    ris_strategy: str = "exhaustive"
    eval_episodes: int = 100
    smoothing_window: int = 50
    static_n_elements: int = 4

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(sorted(set(float(w) for w in self.weights))))


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    out_dir: str = "results"
    replicates: int = 1
    env: EnvSpec = field(default_factory=EnvSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    correlation: CorrelationModel | None = None

    def env_config(self, **overrides) -> EnvConfig:
        return self.env.build(self.correlation, **overrides)

    def replicate_seed(self, index: int) -> int:
        return self.seed + index


_SECTIONS = {"env": EnvSpec, "train": TrainConfig, "sweep": SweepSpec}
_EXPERIMENT_KEYS = ("seed", "out_dir", "replicates")
_CORR_KEYS = ("R_A", "R_E", "R_AE", "Rd_A", "Rd_E", "Rd_AE", "noise_variance")


def _format(value) -> str:
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(", ".join(repr(x) for x in row) for row in value)
        return ", ".join(repr(x) for x in value)
    if value is None:
        return "none"
    return str(value) if isinstance(value, str) else repr(value)


def _parse(text: str, default, key: str):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float) or (default is None and key == "max_grad_norm"):
            return None if text.lower() == "none" else float(text)
        if isinstance(default, tuple):
            if default and isinstance(default[0], tuple):
                return tuple(tuple(float(x) for x in row.split(",")) for row in text.split(";"))
            cast = int if default and isinstance(default[0], int) else float
            return tuple(cast(x) for x in text.split(",") if x.strip())
        return text
    except ValueError:
        raise ConfigError(f"invalid value for {key!r}: {text!r}") from None


def _section_values(parser, name: str, cls) -> dict:
    if not parser.has_section(name):
        return {}
    defaults = asdict(cls())
    out = {}
    for key, text in parser.items(name):
        if key not in defaults:
            raise ConfigError(f"unknown key {key!r} in section [{name}]")
        out[key] = _parse(text, defaults[key], key)
    return out


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        errors = getattr(exc, "errors", None)
        if errors:
            line, content = errors[0]
            raise ConfigError(f"line {line}: cannot parse {content.strip()!r}") from None
        line = getattr(exc, "lineno", None)
        where = f"line {line}: " if line is not None else ""
        raise ConfigError(f"{where}{exc}") from None
    for section in parser.sections():
        if section not in (*_SECTIONS, "experiment", "correlation"):
            raise ConfigError(f"unknown section [{section}]")

    exp = {}
    if parser.has_section("experiment"):
        defaults = {"seed": 0, "out_dir": "", "replicates": 1}
        for key, text_value in parser.items("experiment"):
            if key not in _EXPERIMENT_KEYS:
                raise ConfigError(f"unknown key {key!r} in section [experiment]")
            exp[key] = _parse(text_value, defaults[key], key)
    if exp.get("replicates", 1) < 1:
        raise ConfigError("invalid value for 'replicates': must be >= 1")
    if exp.get("seed", 0) < 0:
        raise ConfigError("invalid value for 'seed': must be >= 0")

    blocks = {}
    for name, cls in _SECTIONS.items():
        values = _section_values(parser, name, cls)
        try:
            blocks[name] = cls(**values)
        except (ValueError, TypeError) as exc:
            keys = ", ".join(sorted(values)) or "defaults"
            raise ConfigError(f"invalid [{name}] ({keys}): {exc}") from None

    correlation = None
    if parser.has_section("correlation"):
        raw = dict(parser.items("correlation"))
        unknown = set(raw) - set(_CORR_KEYS)
        if unknown:
            raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in section [correlation]")
        try:
            data = {k: json.loads(v) for k, v in raw.items()}
            correlation = CorrelationModel.from_dict(data)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"invalid [correlation]: {exc}") from None
        if correlation.n_elements != blocks["env"].n_elements:
            raise ConfigError("invalid value for 'n_elements': disagrees with [correlation]")

    cfg = ExperimentConfig(env=blocks["env"], train=blocks["train"], sweep=blocks["sweep"],
                           correlation=correlation, **exp)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Cross-field checks; raises ConfigError naming the offending key."""
    try:
        env = cfg.env_config()
    except ValueError as exc:
        raise ConfigError(f"invalid [env]: {exc}") from None
    if cfg.train.max_episode_step != env.episode_length_T:
        raise ConfigError("invalid value for 'max_episode_step': must equal episode_length_T")
    s = cfg.sweep
    for key in ("weights", "n_grid", "b_grid", "learning_rates"):
        if len(getattr(s, key)) == 0:
            raise ConfigError(f"invalid value for {key!r}: grid is empty")
    if any(not 0.0 <= w <= 1.0 for w in s.weights):
        raise ConfigError("invalid value for 'weights': entries must lie in [0, 1]")
    if any(n < 1 for n in s.n_grid) or any(b < 0 for b in s.b_grid):
        raise ConfigError("invalid value for 'n_grid' or 'b_grid'")
    if any(lr < 0 for lr in s.learning_rates):
        raise ConfigError("invalid value for 'learning_rates': must be nonnegative")
    for key in ("weight_strategy", "ris_strategy"):
        if getattr(s, key) not in ("exhaustive", "drqn", "dqn", "greedy", "random"):
            raise ConfigError(f"invalid value for {key!r}")
    if s.eval_episodes < 1 or s.smoothing_window < 1 or s.static_n_elements < 1:
        raise ConfigError("invalid value for 'eval_episodes', 'smoothing_window' "
                          "or 'static_n_elements': must be >= 1")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text())


def dump_config(cfg: ExperimentConfig) -> str:
    lines = ["[experiment]"]
    lines += [f"{k} = {_format(getattr(cfg, k))}" for k in _EXPERIMENT_KEYS]
    for name in _SECTIONS:
        lines += ["", f"[{name}]"]
        block = getattr(cfg, name)
        lines += [f"{f.name} = {_format(getattr(block, f.name))}" for f in fields(block)]
    if cfg.correlation is not None:
        lines += ["", "[correlation]"]
        data = cfg.correlation.to_dict()
        lines += [f"{k} = {json.dumps(data[k])}" for k in _CORR_KEYS]
    return "\n".join(lines) + "\n"


def save_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(dump_config(cfg))
    return path
