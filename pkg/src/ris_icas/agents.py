"""DRQN training with bootstrapped random updates, plus baseline strategies."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .env import FULL, PARTIAL, STEnvironment
from .nn import QNetwork, backward, copy_parameters, forward, forward_sequence, sgd_update


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 1500
    max_episode_step: int = 20
    batch_size: int = 32
    hidden: int = 64
    learning_rate: float = 0.1
    gamma: float = 0.5
    eps_start: float = 1.0
    eps_end: float = 0.001
    eps_decay: float = 0.995
    target_sync: int = 10
    replay_capacity: int = 500
    trace_length: int = 8
    recurrent: bool = True
    observation_mode: str = FULL
    max_grad_norm: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.eps_end <= self.eps_start <= 1.0:
            raise ValueError("need 0 < eps_end <= eps_start <= 1")
        if not 0.0 < self.eps_decay <= 1.0:
            raise ValueError("eps_decay must lie in (0, 1]")
        for name in ("episodes", "max_episode_step", "batch_size", "hidden",
                     "target_sync", "replay_capacity", "trace_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.observation_mode not in (FULL, PARTIAL):
            raise ValueError("observation_mode must be 'full' or 'partial'")


class Experience(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray


class Episode:
    """Time-ordered transitions of one episode, stored as arrays."""

    def __init__(self, observations, actions, rewards):
        self.observations = np.asarray(observations, dtype=float)  # (T + 1, D)
        self.actions = np.asarray(actions, dtype=int)
        self.rewards = np.asarray(rewards, dtype=float)
        if len(self.observations) != len(self.actions) + 1 or len(self.actions) != len(self.rewards):
            raise ValueError("episode arrays are misaligned")
        if len(self.actions) == 0:
            raise ValueError("episode has no transitions")

    @classmethod
    def from_experiences(cls, experiences) -> "Episode":
        exps = list(experiences)
        if not exps:
            raise ValueError("episode has no transitions")
        obs = [e.state for e in exps] + [exps[-1].next_state]
        return cls(obs, [e.action for e in exps], [e.reward for e in exps])

    def __len__(self):
        return len(self.actions)

    @property
    def experiences(self) -> list[Experience]:
        o = self.observations
        return [Experience(o[t], int(self.actions[t]), float(self.rewards[t]), o[t + 1])
                for t in range(len(self))]


class ReplayMemory:
    """Episode-level FIFO replay buffer."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.episodes: deque[Episode] = deque(maxlen=capacity)
        self.cursor = 0  # total episodes ever pushed

    def push(self, episode: Episode):
        self.episodes.append(episode)
        self.cursor += 1

    def __len__(self):
        return len(self.episodes)


class Segment(NamedTuple):
    observations: np.ndarray  # (L + 1, D)
    actions: np.ndarray       # (L,)
    rewards: np.ndarray       # (L,)


def sample_minibatch(memory: ReplayMemory, batch_size: int, rng: np.random.Generator,
                     trace_length: int | None = None) -> list[Segment]:
    """Uniformly chosen episodes (with replacement), each cut to a random window."""
    if len(memory) == 0:
        raise ValueError("cannot sample from an empty replay memory")
    picks = rng.integers(0, len(memory), size=batch_size)
    out = []
    for i in picks:
        ep = memory.episodes[int(i)]
        L = len(ep) if trace_length is None else min(trace_length, len(ep))
        start = int(rng.integers(0, len(ep) - L + 1))
        out.append(Segment(ep.observations[start:start + L + 1],
                           ep.actions[start:start + L], ep.rewards[start:start + L]))
    return out


def _stack(segments):
    lengths = {len(s.actions) for s in segments}
    if len(lengths) != 1:
        raise ValueError("segments in one batch must share a length")
    obs = np.stack([s.observations for s in segments])
    acts = np.stack([s.actions for s in segments])
    rews = np.stack([s.rewards for s in segments])
    return obs, acts, rews


def compute_targets(target_net: QNetwork, segment, gamma: float) -> np.ndarray:
    """TD targets ``r + gamma * max_a' Q_target(s', a')``; the last step of each
    segment keeps only its reward.

    Accepts one :class:`Segment` (returns shape (L,)) or a list (shape (B, L)).
    """
    single = isinstance(segment, Segment)
    obs, _, rews = _stack([segment] if single else segment)
    if rews.shape[1] == 0:
        raise ValueError("empty segment")
    q_next, _, _ = forward_sequence(target_net, obs[:, 1:])
    y = rews + gamma * q_next.max(axis=2)
    y[:, -1] = rews[:, -1]
    return y[0] if single else y


def epsilon_schedule(cfg: TrainConfig, episode_index: int) -> float:
    if episode_index < 0:
        raise ValueError("episode_index must be >= 0")
    return max(cfg.eps_end, cfg.eps_start * cfg.eps_decay**episode_index)


def greedy_index(q: np.ndarray) -> int:
    """Argmax with ties broken toward the lowest index."""
    if not np.all(np.isfinite(q)):
        raise FloatingPointError("non-finite Q-values; training diverged")
    return int(np.flatnonzero(q == q.max())[0])


def select_action(net: QNetwork, observation, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy choice; the recurrent state advances either way."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    q, _ = forward(net, observation, carry_state=True)
    if rng.random() < epsilon:
        return int(rng.integers(0, net.n_actions))
    return greedy_index(q)


@dataclass
class TrainingLog:
    rewards: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    epsilons: list = field(default_factory=list)
    total_rewards: list = field(default_factory=list)


def train_step(net: QNetwork, target: QNetwork, memory: ReplayMemory,
               cfg: TrainConfig, rng: np.random.Generator) -> float:
    segments = sample_minibatch(memory, cfg.batch_size, rng, cfg.trace_length)
    obs, acts, _ = _stack(segments)
    y = compute_targets(target, segments, cfg.gamma)
    B, L = acts.shape
    mask = np.zeros((B, L, net.n_actions))
    np.put_along_axis(mask, acts[:, :, None], 1.0, axis=2)
    targets = mask * y[:, :, None]
    loss, grads = backward(net, obs[:, :-1], targets, mask)
    if cfg.max_grad_norm is not None:
        norm = np.sqrt(sum(np.sum(g * g) for g in grads.values()))
        if norm > cfg.max_grad_norm:
            grads = {k: g * (cfg.max_grad_norm / norm) for k, g in grads.items()}
    sgd_update(net, grads, cfg.learning_rate)
    return loss


def train(env: STEnvironment, cfg: TrainConfig, rng: np.random.Generator,
          net: QNetwork | None = None, epsilon_override: float | None = None):
    """Train a Q-network on ``env``; returns ``(net, TrainingLog)``.

    ``env`` owns its random stream; ``rng`` drives initialization, exploration
    and minibatch sampling.
    """
    if cfg.max_episode_step != env.cfg.episode_length_T:
        raise ValueError("max_episode_step must equal the environment episode length")
    if net is None:
        net = QNetwork(env.observation_size, env.n_actions, cfg.hidden, cfg.recurrent, rng)
    elif net.in_dim != env.observation_size or net.n_actions != env.n_actions:
        raise ValueError("network dimensions do not match the environment")
    target = net.copy()
    memory = ReplayMemory(cfg.replay_capacity)
    log = TrainingLog()
    updates = 0
    for ep in range(cfg.episodes):
        eps = epsilon_schedule(cfg, ep) if epsilon_override is None else epsilon_override
        env.reset()
        net.reset_state()
        obs = [env.observe(cfg.observation_mode)]
        acts, rews, losses = [], [], []
        while not env.done:
            a = select_action(net, obs[-1], eps, rng)
            r = env.step(a)
            obs.append(env.observe(cfg.observation_mode))
            acts.append(a)
            rews.append(r)
            if len(memory) > 0:
                losses.append(train_step(net, target, memory, cfg, rng))
                updates += 1
                if updates % cfg.target_sync == 0:
                    copy_parameters(net, target)
        memory.push(Episode(obs, acts, rews))
        log.rewards.append(float(np.mean(rews)))
        log.total_rewards.append(float(np.sum(rews)))
        log.losses.append(float(np.mean(losses)) if losses else float("nan"))
        log.epsilons.append(eps)
    net.reset_state()
    return net, log


# --------------------------------------------------------------------------
# strategies


class Strategy:
    name = "strategy"

    def reset(self):
        pass

    def act(self, env: STEnvironment, observation) -> int:
        raise NotImplementedError


class NetworkStrategy(Strategy):
    def __init__(self, net: QNetwork, name: str = "drqn"):
        self.net = net
        self.name = name

    def reset(self):
        self.net.reset_state()

    def act(self, env, observation):
        q, _ = forward(self.net, observation, carry_state=True)
        return greedy_index(q)


class RandomStrategy(Strategy):
    name = "random"

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def act(self, env, observation):
        return int(self.rng.integers(0, env.n_actions))


class ExhaustiveStrategy(Strategy):
    """Per-step argmax of the true reward over the whole action set."""

    name = "exhaustive"

    def act(self, env, observation):
        return greedy_index(env.action_rewards())


class GreedyStrategy(Strategy):
    """Myopic oracle that is one step behind.

    It plays the action that maximized the immediate reward at the previous
    step's state, i.e. it reacts to the last realized channel and behavior.
    """

    name = "greedy"

    def __init__(self):
        self._next = 0

    def reset(self):
        self._next = 0

    def act(self, env, observation):
        a = self._next
        self._next = greedy_index(env.action_rewards())
        return a


def make_strategy(kind: str, net: QNetwork | None = None,
                  rng: np.random.Generator | None = None) -> Strategy:
    if kind in ("drqn", "dqn"):
        if net is None:
            raise ValueError(f"strategy {kind!r} needs a trained network")
        return NetworkStrategy(net, kind)
    if kind == "random":
        return RandomStrategy(np.random.default_rng() if rng is None else rng)
    if kind == "exhaustive":
        return ExhaustiveStrategy()
    if kind == "greedy":
        return GreedyStrategy()
    raise ValueError(f"unknown strategy {kind!r}")


@dataclass(frozen=True)
class EvalResult:
    mean: float
    std: float
    episode_means: np.ndarray

    @property
    def stderr(self) -> float:
        n = len(self.episode_means)
        return self.std / np.sqrt(n) if n > 1 else 0.0


def evaluate_strategy(env: STEnvironment, strategy: Strategy, n_episodes: int,
                      observation_mode: str = FULL) -> EvalResult:
    """Greedy (epsilon = 0) rollouts; returns per-step reward statistics."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    means = np.empty(n_episodes)
    for i in range(n_episodes):
        env.reset()
        strategy.reset()
        rews = []
        while not env.done:
            a = strategy.act(env, env.observe(observation_mode))
            rews.append(env.step(a))
        means[i] = np.mean(rews)
    std = float(means.std(ddof=1)) if n_episodes > 1 else 0.0
    return EvalResult(float(means.mean()), std, means)


class RolloutStep(NamedTuple):
    step: int
    action: int
    kappa: int
    reward: float


def deploy(net: QNetwork, env: STEnvironment, observation_mode: str = PARTIAL,
           n_episodes: int = 1) -> list[RolloutStep]:
    """Epsilon-free rollouts carrying the recurrent state through each episode."""
    log = []
    for _ in range(n_episodes):
        env.reset()
        net.reset_state()
        t = 0
        while not env.done:
            kappa = env.state.kappa
            q, _ = forward(net, env.observe(observation_mode), carry_state=True)
            a = greedy_index(q)
            log.append(RolloutStep(t, a, kappa, env.step(a)))
            t += 1
    net.reset_state()
    return log
