"""Dynamic secure-transmission game as a sequential decision environment.

At step t Alice sees channels measured under her previous configuration,
picks a phase vector from a finite action set, and is rewarded with
``w_d * R_d + w_k * R_k^kappa``. Channels then evolve (Gauss-Markov) and Eve
picks her next behavior.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import (
    ChannelDynamics,
    ChannelSet,
    PhaseShiftVector,
    evolve_channel_set,
    phase_vector_from_indices,
    sample_channel_set,
)
from .correlation import CorrelationModel, analytic_correlation_model
from .game import GameConfig
from .rates import LinkStats, link_stats

MARKOV, THRESHOLD, BEST_RESPONSE = "markov", "threshold", "best_response"
ANALYTIC, INSTANTANEOUS = "analytic", "instantaneous"
FULL, PARTIAL = "full", "partial"
COMPACT = "compact"
MAX_ENUMERATED_ACTIONS = 4096


def make_action_set(n_elements: int, resolution_bits: int, n_actions: int | None,
                    rng: np.random.Generator) -> tuple[PhaseShiftVector, ...]:
    """Candidate phase vectors on the b-bit grid.

    ``n_actions=None`` enumerates the whole grid (at most 4096 vectors);
    otherwise distinct vectors are drawn uniformly. ``resolution_bits=0``
    draws continuous phases.
    """
    if resolution_bits == 0:
        if n_actions is None:
            raise ValueError("a continuous action set cannot be enumerated")
        return tuple(PhaseShiftVector(rng.uniform(0.0, 2 * np.pi, n_elements), 0)
                     for _ in range(n_actions))
    levels = 2**resolution_bits
    total = levels**n_elements
    if n_actions is None:
        if total > MAX_ENUMERATED_ACTIONS:
            raise ValueError(f"grid of {total} vectors is too large to enumerate")
        idx = np.indices((levels,) * n_elements).reshape(n_elements, -1).T
        return tuple(phase_vector_from_indices(row, resolution_bits) for row in idx)
    if n_actions > total:
        raise ValueError(f"only {total} distinct grid vectors exist")
    seen, out = set(), []
    while len(out) < n_actions:
        row = rng.integers(0, levels, n_elements)
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            out.append(phase_vector_from_indices(row, resolution_bits))
    return tuple(out)


@dataclass(frozen=True)
class EnvConfig:
    action_set: tuple
    n_elements: int = 8
    resolution_bits: int = 1
    dynamics: ChannelDynamics = field(default_factory=ChannelDynamics)
    attacker_mode: str = MARKOV
    markov_matrix: tuple = ((0.9, 0.1), (0.2, 0.8))
    threshold_tau: float = 1.0
    game: GameConfig = field(default_factory=GameConfig)
    reward_mode: str = ANALYTIC
    episode_length_T: int = 20
    observation_mode: str = FULL
    state_encoding: str = COMPACT
    correlation: CorrelationModel | None = None

    def __post_init__(self):
        actions = tuple(self.action_set)
        if not actions:
            raise ValueError("action set must be nonempty")
        for v in actions:
            if v.n_elements != self.n_elements:
                raise ValueError("action dimension disagrees with n_elements")
        object.__setattr__(self, "action_set", actions)
        P = np.asarray(self.markov_matrix, dtype=float)
        if P.shape != (2, 2) or np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0):
            raise ValueError("markov_matrix must be 2x2 row-stochastic")
        object.__setattr__(self, "markov_matrix", tuple(map(tuple, P.tolist())))
        if self.episode_length_T < 1:
            raise ValueError("episode_length_T must be >= 1")
        for name, value, allowed in (
            ("attacker_mode", self.attacker_mode, (MARKOV, THRESHOLD, BEST_RESPONSE)),
            ("reward_mode", self.reward_mode, (ANALYTIC, INSTANTANEOUS)),
            ("observation_mode", self.observation_mode, (FULL, PARTIAL)),
            ("state_encoding", self.state_encoding, (COMPACT, FULL)),
        ):
            if value not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {value!r}")
        if self.correlation is None:
            object.__setattr__(self, "correlation", analytic_correlation_model(
                self.n_elements, self.dynamics.eve_spatial_rho))
        elif self.correlation.n_elements != self.n_elements:
            raise ValueError("correlation model dimension disagrees with n_elements")

    @property
    def n_actions(self) -> int:
        return len(self.action_set)

    @property
    def coefficient_matrix(self) -> np.ndarray:
        return np.array([v.coefficients for v in self.action_set])

    def observation_size(self) -> int:
        if self.state_encoding == COMPACT:
            return 4 + self.n_actions
        return 2 * (3 * self.n_elements + 2) + 1 + self.n_actions


def make_env_config(n_elements: int = 8, resolution_bits: int = 1,
                    n_actions: int | None = 8, action_seed: int = 0,
                    **kwargs) -> EnvConfig:
    """EnvConfig with an action set drawn from ``action_seed``."""
    actions = make_action_set(n_elements, resolution_bits, n_actions,
                              np.random.default_rng(action_seed))
    return EnvConfig(action_set=actions, n_elements=n_elements,
                     resolution_bits=resolution_bits, **kwargs)


@dataclass(frozen=True)
class EnvState:
    channels: ChannelSet
    kappa: int
    prev_action_index: int
    step_index: int = 0


@dataclass(frozen=True)
class Observation:
    vector: np.ndarray
    mode: str

    def __len__(self):
        return self.vector.size


def stationary_distribution(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    a, b = P[0, 1], P[1, 0]
    if a + b == 0:
        return np.array([1.0, 0.0])
    return np.array([b, a]) / (a + b)


# --------------------------------------------------------------------------
# rewards


def _rates_vec(z_a, z_e, c_sq, kappa, game: GameConfig):
    """Vectorized w_d * R_d + w_k * R_k^kappa plus its two components."""
    rc = game.rate_config
    z_a = np.asarray(z_a, dtype=float)
    r_d = rc.bandwidth_B * np.log2(1.0 + z_a)
    if kappa == 0:
        bits = np.log2((z_a + 1.0) ** 2 / (2.0 * z_a + 1.0))
    else:
        z_e = np.asarray(z_e, dtype=float)
        d_ae = (z_a + 1.0) * (z_e + 1.0) - c_sq
        d_abe = (2.0 * z_a + 1.0) * (z_e + 1.0) - 2.0 * c_sq
        bits = np.maximum(2.0 * np.log2(d_ae) - np.log2(z_e + 1.0) - np.log2(d_abe), 0.0)
    r_k = bits / rc.probe_time_Ts
    return game.w_d * r_d + game.w_k * r_k, r_d, r_k


def _leak_vec(z_a, z_e, c_sq, game: GameConfig):
    joint = (np.asarray(z_a) + 1.0) * (np.asarray(z_e) + 1.0)
    return np.maximum(np.log2(joint / (joint - c_sq)), 0.0) / game.rate_config.probe_time_Ts


def _analytic_action_stats(cfg: EnvConfig):
    """(z_a, z_e, |c|^2) of every action under the configured correlation model."""
    cached = cfg.__dict__.get("_analytic_stats")
    if cached is None:
        stats = [link_stats(cfg.correlation, v) for v in cfg.action_set]
        cached = (np.array([s.z_a for s in stats]), np.array([s.z_e for s in stats]),
                  np.array([s.c_sq for s in stats]))
        object.__setattr__(cfg, "_analytic_stats", cached)
    return cached


def equivalent_channels(channels: ChannelSet, V: np.ndarray):
    """Bob->Alice and Bob->Eve equivalent gains for each row of ``V``."""
    h_a = V @ (channels.h_ra * channels.h_br) + channels.h_ba
    h_e = V @ (channels.h_re * channels.h_br) + channels.h_be
    return h_a, h_e


def action_rewards(state: EnvState, cfg: EnvConfig, kappa: int | None = None,
                   components: bool = False):
    """Reward of every action in ``state`` (the environment oracle)."""
    kappa = state.kappa if kappa is None else kappa
    if cfg.reward_mode == ANALYTIC:
        z_a, z_e, c_sq = _analytic_action_stats(cfg)
    else:
        h_a, h_e = equivalent_channels(state.channels, cfg.coefficient_matrix)
        z_a, z_e = np.abs(h_a) ** 2, np.abs(h_e) ** 2
        c_sq = z_a * z_e
    total, r_d, r_k = _rates_vec(z_a, z_e, c_sq, kappa, cfg.game)
    if components:
        return total, r_d, r_k
    return total


def instantaneous_stats(channels: ChannelSet, v) -> LinkStats:
    h_a = channels.equivalent_alice(v)
    h_e = channels.equivalent_eve(v)
    return LinkStats(float(abs(h_a) ** 2), float(abs(h_e) ** 2), complex(h_a * np.conj(h_e)))


def reward(state: EnvState, v, cfg: EnvConfig) -> float:
    """Weighted data/key rate for configuration ``v`` in ``state``."""
    if cfg.reward_mode == ANALYTIC:
        s = link_stats(cfg.correlation, v)
    else:
        s = instantaneous_stats(state.channels, v)
    total, _, _ = _rates_vec(s.z_a, s.z_e, s.c_sq, state.kappa, cfg.game)
    return float(total)


# --------------------------------------------------------------------------
# dynamics


def _initial_kappa(channels, cfg: EnvConfig, rng) -> int:
    if cfg.attacker_mode == MARKOV:
        pi = stationary_distribution(cfg.markov_matrix)
        return int(rng.random() < pi[1])
    probe = EnvState(channels, 0, 0, 0)
    return attacker_step(probe, cfg, rng)


def reset(cfg: EnvConfig, rng: np.random.Generator) -> EnvState:
    dyn = cfg.dynamics
    channels = sample_channel_set(cfg.n_elements, dyn.eve_spatial_rho, rng)
    kappa = _initial_kappa(channels, cfg, rng)
    return EnvState(channels, kappa, prev_action_index=0, step_index=0)


def attacker_step(state: EnvState, cfg: EnvConfig, rng: np.random.Generator) -> int:
    """Eve's behavior for the next step given the current state."""
    if cfg.attacker_mode == MARKOV:
        row = cfg.markov_matrix[state.kappa]
        return int(rng.random() < row[1])
    v = cfg.action_set[state.prev_action_index]
    if cfg.attacker_mode == THRESHOLD:
        return int(abs(state.channels.equivalent_eve(v)) ** 2 > cfg.threshold_tau)
    s = link_stats(cfg.correlation, v)
    leak = _leak_vec(s.z_a, s.z_e, s.c_sq, cfg.game)
    return int(leak > cfg.game.eaves_cost_CE)


def step(state: EnvState, action_index: int, cfg: EnvConfig,
         rng: np.random.Generator) -> tuple[EnvState, float]:
    if not 0 <= action_index < cfg.n_actions:
        raise IndexError(f"action {action_index} outside [0, {cfg.n_actions})")
    if state.step_index >= cfg.episode_length_T:
        raise RuntimeError("episode finished; call reset()")
    r = reward(state, cfg.action_set[action_index], cfg)
    channels = evolve_channel_set(state.channels, cfg.dynamics, rng)
    moved = EnvState(channels, state.kappa, action_index, state.step_index + 1)
    kappa = attacker_step(moved, cfg, rng)
    return replace(moved, kappa=kappa), r


def is_done(state: EnvState, cfg: EnvConfig) -> bool:
    return state.step_index >= cfg.episode_length_T


def encode_observation(state: EnvState, cfg: EnvConfig,
                       observation_mode: str | None = None) -> Observation:
    mode = cfg.observation_mode if observation_mode is None else observation_mode
    if mode not in (FULL, PARTIAL):
        raise ValueError(f"unknown observation mode {mode!r}")
    ch = state.channels
    one_hot = np.zeros(cfg.n_actions)
    one_hot[state.prev_action_index] = 1.0
    visible_eve = 0.0 if mode == PARTIAL else 1.0
    if cfg.state_encoding == COMPACT:
        v = cfg.action_set[state.prev_action_index]
        h_a = ch.equivalent_bob(v)
        h_e = ch.equivalent_eve(v) * state.kappa * visible_eve
        head = np.array([h_a.real, h_a.imag, h_e.real, h_e.imag])
    else:
        eve = visible_eve
        parts = [ch.h_br, ch.h_ra, ch.h_re * eve,
                 np.array([ch.h_ba]), np.array([ch.h_be * eve])]
        flat = np.concatenate(parts)
        head = np.concatenate([flat.real, flat.imag, [state.kappa * eve]])
    vec = np.concatenate([head, one_hot])
    return Observation(vec, mode)


TRAJECTORY_HEADER = ("step", "action", "kappa", "reward")


def write_trajectory(steps, path) -> Path:
    """Dump ``(step, action, kappa, reward)`` rows as CSV."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for t, a, k, r in steps:
            writer.writerow([int(t), int(a), int(k), repr(float(r))])
    return path


def rollout(cfg: EnvConfig, actions, rng: np.random.Generator) -> list[tuple]:
    """Play a fixed action sequence from a fresh reset."""
    state = reset(cfg, rng)
    out = []
    for t, a in enumerate(actions):
        kappa = state.kappa
        state, r = step(state, a, cfg, rng)
        out.append((t, int(a), kappa, r))
    return out


class STEnvironment:
    """Stateful wrapper owning a config, a random stream and the current state."""

    def __init__(self, cfg: EnvConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.state: EnvState | None = None

    @property
    def n_actions(self) -> int:
        return self.cfg.n_actions

    @property
    def observation_size(self) -> int:
        return self.cfg.observation_size()

    def reset(self) -> EnvState:
        self.state = reset(self.cfg, self.rng)
        return self.state

    def observe(self, observation_mode: str | None = None) -> np.ndarray:
        return encode_observation(self.state, self.cfg, observation_mode).vector

    def step(self, action_index: int) -> float:
        self.state, r = step(self.state, action_index, self.cfg, self.rng)
        return r

    @property
    def done(self) -> bool:
        return is_done(self.state, self.cfg)

    def action_rewards(self, kappa: int | None = None) -> np.ndarray:
        return action_rewards(self.state, self.cfg, kappa)
