"""Seeded experiment drivers that write tidy CSV files.

Every driver is a pure function of ``(ExperimentConfig, out_dir)``: random
streams are derived from ``cfg.seed`` plus a replicate index and a fixed
per-purpose tag, so re-running produces byte-identical files.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .agents import (
    FULL,
    PARTIAL,
    TrainConfig,
    evaluate_strategy,
    make_strategy,
    train,
)
from .config import ExperimentConfig
from .correlation import analytic_correlation_model
from .env import STEnvironment, action_rewards
from .game import static_ne_solve
from .rates import (
    LinkStats,
    data_rate,
    f_of_z,
    key_rate_eavesdrop,
    key_rate_sleep,
    leak_rate_eve,
)

STRATEGIES = ("drqn", "dqn", "greedy", "random", "exhaustive")

# stream tags keep purposes from sharing random numbers
_TRAIN_ENV, _TRAIN_AGENT, _EVAL_ENV, _EVAL_POLICY = 11, 12, 21, 22


def stream(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng([seed, *tags])


def moving_average(series, window: int = 50) -> np.ndarray:
    """Trailing mean over the last ``window`` points (fewer at the start)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be one-dimensional")
    c = np.concatenate([[0.0], np.cumsum(x)])
    n = np.arange(1, len(x) + 1)
    lo = np.maximum(n - window, 0)
    return (c[n] - c[lo]) / (n - lo)


@dataclass(frozen=True)
class FlopEstimate:
    per_sample: int
    training_total: float
    deployment_total: int


def estimate_flops(layer_widths, activation_counts: dict | None = None,
                   cfg: TrainConfig | None = None, state_size: int | None = None) -> FlopEstimate:
    """Operation counts of a fully connected stack.

    ``activation_counts`` holds node counts ``relu``, ``sigmoid`` and ``tanh``
    (weighted 1, 4 and 6). The state size defaults to the first width.
    Training multiplies the per-sample cost by episodes x steps x batch and adds
    the target-network share ``1 / target_sync``.
    """
    widths = [int(w) for w in layer_widths]
    if not widths or any(w < 1 for w in widths):
        raise ValueError("layer widths must be nonempty and positive")
    counts = {"relu": 0, "sigmoid": 0, "tanh": 0, **(activation_counts or {})}
    unknown = set(counts) - {"relu", "sigmoid", "tanh"}
    if unknown:
        raise ValueError(f"unknown activation kinds {sorted(unknown)}")
    cfg = TrainConfig() if cfg is None else cfg
    s = widths[0] if state_size is None else int(state_size)
    links = sum(a * b for a, b in zip(widths[:-1], widths[1:]))
    per_sample = s + counts["relu"] + 4 * counts["sigmoid"] + 6 * counts["tanh"] + 3 * links
    total = cfg.episodes * cfg.max_episode_step * cfg.batch_size * per_sample * (1.0 + 1.0 / cfg.target_sync)
    return FlopEstimate(per_sample, total, links + s)


def network_flops(obs_size: int, n_actions: int, cfg: TrainConfig) -> FlopEstimate:
    """Counts for the dense-LSTM-dense Q-network (LSTM as four gate layers)."""
    H = cfg.hidden
    if cfg.recurrent:
        widths = [obs_size, H, 4 * H, n_actions]
        acts = {"relu": H, "sigmoid": 3 * H, "tanh": 2 * H}
        # the LSTM gate layer reads [x, h], hence the extra H x 4H block
        est = estimate_flops(widths, acts, cfg)
        extra = H * 4 * H
        per = est.per_sample + 3 * extra
        scale = est.training_total / est.per_sample
        return FlopEstimate(per, per * scale, est.deployment_total + extra)
    return estimate_flops([obs_size, H, H, n_actions], {"relu": 2 * H}, cfg)


# --------------------------------------------------------------------------
# CSV output


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    return path


def _lr_tag(lr: float) -> str:
    return f"lr{lr:g}"


# --------------------------------------------------------------------------
# drivers


def train_agent(cfg: ExperimentConfig, replicate: int = 0, *, recurrent: bool | None = None,
                train_cfg: TrainConfig | None = None, env_overrides: dict | None = None):
    """Train one agent; returns ``(net, log, env_config)``."""
    tc = cfg.train if train_cfg is None else train_cfg
    if recurrent is not None:
        tc = replace(tc, recurrent=recurrent)
    env_cfg = cfg.env_config(**(env_overrides or {}))
    seed = cfg.replicate_seed(replicate)
    env = STEnvironment(env_cfg, stream(seed, _TRAIN_ENV))
    net, log = train(env, tc, stream(seed, _TRAIN_AGENT, int(tc.recurrent)))
    return net, log, env_cfg


def run_convergence(cfg: ExperimentConfig, out_dir=None) -> list[Path]:
    """One training log per learning rate in the sweep grid."""
    out = Path(cfg.out_dir if out_dir is None else out_dir)
    paths = []
    for lr in cfg.sweep.learning_rates:
        _, log, _ = train_agent(cfg, train_cfg=replace(cfg.train, learning_rate=lr))
        smooth = moving_average(log.rewards, cfg.sweep.smoothing_window)
        rows = [(i, r, s, l, e) for i, (r, s, l, e) in
                enumerate(zip(log.rewards, smooth, log.losses, log.epsilons))]
        paths.append(write_csv(out / f"train_{_lr_tag(lr)}.csv",
                               ("episode", "raw_reward", "smoothed_reward", "loss", "epsilon"), rows))
    return paths


@dataclass(frozen=True)
class ComparisonRow:
    replicate: int
    strategy: str
    observation: str
    mean: float
    std: float


def compare_strategies(cfg: ExperimentConfig, replicate: int = 0,
                       n_episodes: int | None = None) -> list[ComparisonRow]:
    """Train DRQN and DQN, then evaluate all five strategies on matched seeds."""
    n_episodes = cfg.sweep.eval_episodes if n_episodes is None else n_episodes
    seed = cfg.replicate_seed(replicate)
    nets = {}
    env_cfg = None
    for kind, rec in (("drqn", True), ("dqn", False)):
        nets[kind], _, env_cfg = train_agent(cfg, replicate, recurrent=rec)
    rows = []
    for mode in (FULL, PARTIAL):
        for kind in STRATEGIES:
            strat = make_strategy(kind, nets.get(kind), stream(seed, _EVAL_POLICY))
            env = STEnvironment(env_cfg, stream(seed, _EVAL_ENV))
            res = evaluate_strategy(env, strat, n_episodes, mode)
            rows.append(ComparisonRow(replicate, kind, mode, res.mean, res.std))
    return rows


def run_strategy_comparison(cfg: ExperimentConfig, out_dir=None) -> list[Path]:
    out = Path(cfg.out_dir if out_dir is None else out_dir)
    rows = []
    for rep in range(cfg.replicates):
        rows.extend(compare_strategies(cfg, rep))
    rows.sort(key=lambda r: (r.replicate, r.observation, STRATEGIES.index(r.strategy)))
    detail = write_csv(out / "compare_replicates.csv",
                       ("strategy", "observation_mode", "seed", "mean_reward", "std"),
                       [(r.strategy, r.observation, cfg.replicate_seed(r.replicate), r.mean, r.std)
                        for r in rows])
    summary = []
    for mode in (FULL, PARTIAL):
        for kind in STRATEGIES:
            vals = np.array([r.mean for r in rows if r.strategy == kind and r.observation == mode])
            sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
            summary.append((kind, mode, float(vals.mean()), sd, len(vals)))
    summ = write_csv(out / "compare_summary.csv",
                     ("strategy", "observation_mode", "mean_reward", "std_across_seeds", "seeds"),
                     summary)
    return [detail, summ]


@dataclass(frozen=True)
class OperatingPoint:
    w_k: float
    data_rate: float
    key_rate: float
    reward: float


def operating_point(env_cfg, strategy: str, n_episodes: int, seed: int,
                    net=None) -> OperatingPoint:
    """Mean per-step (R_d, R_k, reward) of ``strategy`` on ``env_cfg``."""
    env = STEnvironment(env_cfg, stream(seed, _EVAL_ENV))
    strat = make_strategy(strategy, net, stream(seed, _EVAL_POLICY))
    tot = np.zeros(3)
    steps = 0
    for _ in range(n_episodes):
        env.reset()
        strat.reset()
        while not env.done:
            a = strat.act(env, env.observe(FULL))
            total, r_d, r_k = action_rewards(env.state, env_cfg, components=True)
            tot += (r_d[a], r_k[a], total[a])
            env.step(a)
            steps += 1
    d, k, r = tot / steps
    return OperatingPoint(env_cfg.game.w_k, float(d), float(k), float(r))


def weight_sweep(cfg: ExperimentConfig, strategy: str | None = None,
                 n_episodes: int | None = None) -> list[OperatingPoint]:
    strategy = cfg.sweep.weight_strategy if strategy is None else strategy
    n_episodes = cfg.sweep.eval_episodes if n_episodes is None else n_episodes
    points = []
    for w_k in cfg.sweep.weights:
        w_d = 1.0 - w_k
        overrides = {"w_k": w_k, "w_d": w_d}
        net = None
        if strategy in ("drqn", "dqn"):
            net, _, env_cfg = train_agent(cfg, recurrent=strategy == "drqn",
                                          env_overrides=overrides)
        else:
            env_cfg = cfg.env_config(**overrides)
        points.append(operating_point(env_cfg, strategy, n_episodes, cfg.seed, net))
    return points


def find_crossing(points) -> float | None:
    """Smallest swept w_k whose key rate reaches its data rate."""
    for p in sorted(points, key=lambda p: p.w_k):
        if p.key_rate >= p.data_rate:
            return p.w_k
    return None


def run_weight_sweep(cfg: ExperimentConfig, out_dir=None) -> list[Path]:
    out = Path(cfg.out_dir if out_dir is None else out_dir)
    points = weight_sweep(cfg)
    crossing = find_crossing(points)
    rows = [(p.w_k, p.data_rate, p.key_rate, p.reward, int(p.w_k == crossing)) for p in points]
    return [write_csv(out / "sweep-weights_rates.csv",
                      ("w_k", "data_rate", "key_rate", "reward", "is_crossing"), rows)]


def ris_sweep(cfg: ExperimentConfig, strategy: str | None = None,
              n_episodes: int | None = None):
    """Mean reward over the (N, b) grid; returns ``(N, b, mean, std)`` rows."""
    strategy = cfg.sweep.ris_strategy if strategy is None else strategy
    n_episodes = cfg.sweep.eval_episodes if n_episodes is None else n_episodes
    rows = []
    for n in cfg.sweep.n_grid:
        for b in cfg.sweep.b_grid:
            overrides = {"n_elements": n, "resolution_bits": b}
            net = None
            if strategy in ("drqn", "dqn"):
                net, _, env_cfg = train_agent(cfg, recurrent=strategy == "drqn",
                                              env_overrides=overrides)
            else:
                env_cfg = cfg.env_config(**overrides)
            env = STEnvironment(env_cfg, stream(cfg.seed, _EVAL_ENV))
            res = evaluate_strategy(env, make_strategy(strategy, net, stream(cfg.seed, _EVAL_POLICY)),
                                    n_episodes, FULL)
            rows.append((n, b, res.mean, res.std))
    return rows


def run_ris_sweep(cfg: ExperimentConfig, out_dir=None) -> list[Path]:
    out = Path(cfg.out_dir if out_dir is None else out_dir)
    rows = ris_sweep(cfg)
    return [write_csv(out / "sweep-ris_reward.csv",
                      ("n_elements", "resolution_bits", "mean_reward", "std_reward"), rows)]


def run_rates(cfg: ExperimentConfig, out_dir=None) -> list[Path]:
    """Rate expressions over a grid of link SNRs and coupling strengths."""
    out = Path(cfg.out_dir if out_dir is None else out_dir)
    env = cfg.env
    rc = cfg.env_config().game.rate_config
    rows = []
    for z in np.logspace(-2, 2, 41):
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            s = LinkStats(float(z), float(z), complex(np.sqrt(frac) * z))
            rows.append((float(z), frac, data_rate(s, cfg=rc), key_rate_sleep(s, cfg=rc),
                         key_rate_eavesdrop(s, cfg=rc), leak_rate_eve(s, cfg=rc),
                         float(f_of_z(z, env.w_d, env.w_k, rc))))
    return [write_csv(out / "rates_grid.csv",
                      ("z", "coupling_fraction", "data_rate", "key_rate_sleep",
                       "key_rate_eavesdrop", "leak_rate", "f_of_z"), rows)]


def run_static_ne(cfg: ExperimentConfig, out_dir=None) -> list[Path]:
    """Relaxed, projected and quantized static solutions per resolution."""
    out = Path(cfg.out_dir if out_dir is None else out_dir)
    env = cfg.env
    n = cfg.sweep.static_n_elements
    model = cfg.correlation if cfg.correlation is not None and cfg.correlation.n_elements == n \
        else analytic_correlation_model(n, env.eve_spatial_rho)
    game = cfg.env_config().game
    rows = []
    for b in cfg.sweep.b_grid:
        sol = static_ne_solve(model, game, resolution_bits=b)
        rows.append((n, b, sol.relaxed_value, sol.projected_value, sol.quantized_value,
                     sol.leak_rate, game.eaves_cost_CE, int(sol.ne_certified),
                     " ".join(str(int(i)) for i in sol.quantized_v.grid_indices)))
    return [write_csv(out / "static-ne_solution.csv",
                      ("n_elements", "resolution_bits", "relaxed_value", "projected_value",
                       "quantized_value", "leak_rate", "eaves_cost", "ne_certified",
                       "phase_indices"), rows)]


def run_flops(cfg: ExperimentConfig, out_dir=None) -> list[Path]:
    out = Path(cfg.out_dir if out_dir is None else out_dir)
    env_cfg = cfg.env_config()
    rows = []
    for rec in (True, False):
        tc = replace(cfg.train, recurrent=rec)
        est = network_flops(env_cfg.observation_size(), env_cfg.n_actions, tc)
        rows.append(("drqn" if rec else "dqn", est.per_sample, est.training_total,
                     est.deployment_total))
    return [write_csv(out / "flops_network.csv",
                      ("network", "per_sample", "training_total", "deployment_total"), rows)]
