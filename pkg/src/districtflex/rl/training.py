"""Training loops, frozen-policy controllers, checkpoints, curves.

Training slices the month-long scenario into day episodes (24 steps)
sampled uniformly from the day pool, which gives the learners enough
episode boundaries at desk scale. Evaluation always runs frozen policies
(deterministic heads, no parameter updates).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..nn import Mlp, load_mlp, mlp_forward, save_mlp
from ..scenario import ReferenceSignal, Scenario, build_reference, compute_baseline, slice_scenario
from ..simulation import (
    Action,
    Controller,
    StepView,
    aggregate_load,
    initial_state,
    run_episode,
    step_building,
)
from .buffers import ReplayBuffer, RolloutBuffer
from .mappo import CentralCritic, MappoAgent, make_mappo_agent, gaussian_logp, ppo_update
from .observations import OBS_DIM, ObservationNormalizer, build_global_state, build_observation, global_state_dim
from .reward import RewardConfig, comfort_loss, default_reward_config, global_reward, huber
from .sac import SacAgent, make_sac_agent, sac_update, sample_squashed
from ..nn import AdamState, init_mlp

__all__ = [
    "RlConfig",
    "TrainResult",
    "train",
    "SacController",
    "MappoController",
    "RandomController",
    "map_to_env_action",
    "deterministic_action_matrix",
    "evaluate_episode_rewards",
    "save_policies",
    "load_policies",
    "write_curves_csv",
]


@dataclass(frozen=True)
class RlConfig:
    # shared
    gamma: float = 0.99
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    hidden: tuple[int, ...] = (64, 64)
    grad_clip: float = 10.0
    episode_steps: int = 24
    # reward shaping
    w_track: float = 1.0
    w_comfort: float = 10.0
    delta_frac: float = 0.1      # Huber threshold as a fraction of mean(r)
    reward_scale_target: float = 1.0   # typical |scaled reward| of a 100% miss
    # SAC
    alpha: float = 0.2
    tau: float = 0.005
    sac_batch: int = 256
    replay_capacity: int = 1_000_000
    sac_episodes: int = 120
    sac_warmup_steps: int = 480
    sac_update_every: int = 2
    # MAPPO
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    mappo_batch: int = 1024
    mappo_epochs: int = 10
    mappo_updates: int = 30
    mappo_episodes_per_update: int = 12
    entropy_coef: float = 0.0
    log_std_init: float = -0.5

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.gae_lambda <= 1.0):
            raise ValueError("gamma and gae_lambda must lie in [0, 1]")
        if self.clip_eps <= 0.0:
            raise ValueError("clip_eps must be > 0")


@dataclass
class TrainResult:
    algo: str
    actors: list[Mlp]
    normalizer: ObservationNormalizer
    reward_cfg: RewardConfig
    curves: list[dict]
    sac_agents: list[SacAgent] | None = None
    mappo_agents: list[MappoAgent] | None = None
    critic: CentralCritic | None = None
    log_stds: list[np.ndarray] | None = None


def map_to_env_action(a: np.ndarray, params) -> Action:
    """[-1, 1]^2 -> (HVAC fraction, battery power in [p_min, p_max])."""
    u = 0.5 * (float(a[0]) + 1.0)
    p = params.p_min_kw + 0.5 * (float(a[1]) + 1.0) * (params.p_max_kw - params.p_min_kw)
    return Action(u=u, p_batt_kw=p)


def _band_of(scenario: Scenario) -> tuple[float, float]:
    b0 = scenario.buildings[0]
    return b0.t_min_c, b0.t_max_c


def _normalized_obs_matrix(view: StepView, normalizer: ObservationNormalizer) -> np.ndarray:
    return np.stack([normalizer.transform(build_observation(view, i))
                     for i in range(len(view.states))])


def _make_view(scenario: Scenario, reference: ReferenceSignal, k: int, states,
               prev_loads: np.ndarray, prev_total: float) -> StepView:
    dists = scenario.disturbances_at(k)
    return StepView(
        k=k,
        hour=dists[0].hour_of_day,
        dt=scenario.dt,
        states=tuple(states),
        disturbances=dists,
        r_k=float(reference.r[k]),
        prev_building_loads=prev_loads,
        prev_district_load=prev_total,
    )


def _env_step(scenario: Scenario, states, actions, k: int):
    """Advance all buildings; returns (new_states, loads, total)."""
    dists = scenario.disturbances_at(k)
    new_states = []
    loads = np.empty(scenario.n_buildings)
    for i, params in enumerate(scenario.buildings):
        s, _ = step_building(states[i], params, actions[i], dists[i], scenario.dt)
        new_states.append(s)
        loads[i] = s.y_kwh
    return new_states, loads, aggregate_load(loads)


def _episode_starts(scenario: Scenario, episode_steps: int, rng: np.random.Generator) -> tuple[int, int]:
    ep_len = min(episode_steps, scenario.n_steps)
    pool = max(scenario.n_steps // ep_len, 1)
    start = int(rng.integers(0, pool)) * ep_len
    ep_len = min(ep_len, scenario.n_steps - start)
    return start, ep_len


def train(scenario: Scenario, algo: str, cfg: RlConfig, seed: int,
          reference: ReferenceSignal | None = None) -> TrainResult:
    """Train SAC or MAPPO on a (January-style) scenario; policies come back
    frozen, with per-episode reward curves."""
    if reference is None:
        reference = build_reference(compute_baseline(scenario))
    normalizer = ObservationNormalizer.fit(scenario, reference)
    t_min, t_max = _band_of(scenario)
    reward_cfg = default_reward_config(
        reference, w_track=cfg.w_track, w_comfort=cfg.w_comfort,
        delta_frac=cfg.delta_frac, t_min_c=t_min, t_max_c=t_max,
    )
    if algo == "sac":
        return _train_sac(scenario, reference, normalizer, reward_cfg, cfg, seed)
    if algo == "mappo":
        return _train_mappo(scenario, reference, normalizer, reward_cfg, cfg, seed)
    raise ValueError(f"unknown algorithm {algo!r} (expected 'sac' or 'mappo')")


def _reward_scale(reference, reward_cfg: RewardConfig, target: float) -> float:
    """Rescale stored rewards so a 100% tracking miss is about -target.

    A pure positive scaling: the optimal policy is unchanged. The target
    pins the ratio between per-action value differences and the fixed
    entropy temperature; too small and the entropy term freezes the
    policies at their initialization. Curves and evaluations always use
    the unscaled reward.
    """
    r_mean = float(np.mean(reference.r))
    unit = reward_cfg.w_track * huber(r_mean, reward_cfg.delta)
    if unit <= 0.0:
        unit = max(reward_cfg.w_comfort, 1.0)
    return target / unit


def _train_sac(scenario, reference, normalizer, reward_cfg, cfg, seed) -> TrainResult:
    n = scenario.n_buildings
    seq = np.random.SeedSequence(seed)
    seed_init, seed_env, seed_update = seq.spawn(3)
    rng_init = np.random.default_rng(seed_init)
    rng_env = np.random.default_rng(seed_env)
    rng_update = np.random.default_rng(seed_update)
    scale = _reward_scale(reference, reward_cfg, cfg.reward_scale_target)

    agents = [make_sac_agent(OBS_DIM, 2, cfg.hidden, rng_init, cfg.actor_lr, cfg.critic_lr)
              for _ in range(n)]
    buffer = ReplayBuffer(cfg.replay_capacity, n, OBS_DIM, 2)
    curves = []
    total_steps = 0

    for ep in range(cfg.sac_episodes):
        start, ep_len = _episode_starts(scenario, cfg.episode_steps, rng_env)
        states = [initial_state(p) for p in scenario.buildings]
        prev_loads = np.zeros(n)
        prev_total = 0.0
        view = _make_view(scenario, reference, start, states, prev_loads, prev_total)
        obs = _normalized_obs_matrix(view, normalizer)
        ep_reward = ep_track = ep_comfort = 0.0

        for t in range(ep_len):
            k = start + t
            if total_steps < cfg.sac_warmup_steps:
                a_sq = rng_env.uniform(-1.0, 1.0, size=(n, 2))
            else:
                a_sq = np.empty((n, 2))
                for i, ag in enumerate(agents):
                    sample, _ = sample_squashed(ag.actor, obs[i][None, :], rng_env)
                    a_sq[i] = sample[0]
            actions = [map_to_env_action(a_sq[i], scenario.buildings[i]) for i in range(n)]
            states, loads, total = _env_step(scenario, states, actions, k)
            temps = [s.t_in_c for s in states]
            r_k = float(reference.r[k])
            reward = global_reward(total, r_k, temps, reward_cfg)
            ep_reward += reward
            ep_track += reward_cfg.w_track * huber(total - r_k, reward_cfg.delta)
            ep_comfort += reward_cfg.w_comfort * comfort_loss(temps, reward_cfg.t_min_c, reward_cfg.t_max_c)

            next_k = min(k + 1, scenario.n_steps - 1)
            view = _make_view(scenario, reference, next_k, states, loads, total)
            next_obs = _normalized_obs_matrix(view, normalizer)
            buffer.push(obs, a_sq, reward * scale, next_obs, done=(t == ep_len - 1))
            obs = next_obs
            total_steps += 1
            if (
                total_steps >= cfg.sac_warmup_steps
                and len(buffer) >= cfg.sac_batch
                and total_steps % cfg.sac_update_every == 0
            ):
                sac_update(agents, buffer, cfg, rng_update)

        curves.append({
            "episode": ep,
            "mean_reward": ep_reward / ep_len,
            "tracking_term": ep_track / ep_len,
            "comfort_term": ep_comfort / ep_len,
        })

    return TrainResult(
        algo="sac",
        actors=[ag.actor for ag in agents],
        normalizer=normalizer,
        reward_cfg=reward_cfg,
        curves=curves,
        sac_agents=agents,
    )


def _train_mappo(scenario, reference, normalizer, reward_cfg, cfg, seed) -> TrainResult:
    n = scenario.n_buildings
    seq = np.random.SeedSequence(seed)
    seed_init, seed_env, seed_update = seq.spawn(3)
    rng_init = np.random.default_rng(seed_init)
    rng_env = np.random.default_rng(seed_env)
    rng_update = np.random.default_rng(seed_update)

    agents = [make_mappo_agent(OBS_DIM, 2, cfg.hidden, rng_init, cfg.actor_lr, cfg.log_std_init)
              for _ in range(n)]
    critic_net = init_mlp([global_state_dim(n), *cfg.hidden, 1], rng_init)
    critic = CentralCritic(net=critic_net, opt=AdamState.for_net(critic_net, cfg.critic_lr))
    scale = _reward_scale(reference, reward_cfg, cfg.reward_scale_target)
    curves = []
    episode_counter = 0

    for _ in range(cfg.mappo_updates):
        rollout = RolloutBuffer()
        for _ in range(cfg.mappo_episodes_per_update):
            start, ep_len = _episode_starts(scenario, cfg.episode_steps, rng_env)
            states = [initial_state(p) for p in scenario.buildings]
            prev_loads = np.zeros(n)
            prev_total = 0.0
            view = _make_view(scenario, reference, start, states, prev_loads, prev_total)
            obs = _normalized_obs_matrix(view, normalizer)
            gstate = build_global_state(view, normalizer)
            ep_reward = ep_track = ep_comfort = 0.0

            for t in range(ep_len):
                k = start + t
                a_raw = np.empty((n, 2))
                logps = np.empty(n)
                for i, ag in enumerate(agents):
                    mu = mlp_forward(ag.actor, obs[i])
                    a_raw[i] = mu + np.exp(ag.log_std) * rng_env.standard_normal(2)
                    logps[i] = gaussian_logp(a_raw[i], mu, ag.log_std)
                value = float(mlp_forward(critic.net, gstate)[0])
                a_env = np.clip(a_raw, -1.0, 1.0)
                actions = [map_to_env_action(a_env[i], scenario.buildings[i]) for i in range(n)]
                states, loads, total = _env_step(scenario, states, actions, k)
                temps = [s.t_in_c for s in states]
                r_k = float(reference.r[k])
                reward = global_reward(total, r_k, temps, reward_cfg)
                ep_reward += reward
                ep_track += reward_cfg.w_track * huber(total - r_k, reward_cfg.delta)
                ep_comfort += reward_cfg.w_comfort * comfort_loss(temps, reward_cfg.t_min_c, reward_cfg.t_max_c)

                rollout.add_step(obs, gstate, a_raw, logps, reward * scale, value)
                next_k = min(k + 1, scenario.n_steps - 1)
                view = _make_view(scenario, reference, next_k, states, loads, total)
                obs = _normalized_obs_matrix(view, normalizer)
                gstate = build_global_state(view, normalizer)

            rollout.end_episode(0.0)  # day episodes terminate; no bootstrap
            curves.append({
                "episode": episode_counter,
                "mean_reward": ep_reward / ep_len,
                "tracking_term": ep_track / ep_len,
                "comfort_term": ep_comfort / ep_len,
            })
            episode_counter += 1

        ppo_update(agents, critic, rollout, cfg, rng_update)

    return TrainResult(
        algo="mappo",
        actors=[ag.actor for ag in agents],
        normalizer=normalizer,
        reward_cfg=reward_cfg,
        curves=curves,
        mappo_agents=agents,
        critic=critic,
        log_stds=[ag.log_std.copy() for ag in agents],
    )


# ---------------------------------------------------------------------------
# Frozen-policy execution
# ---------------------------------------------------------------------------

def deterministic_action_matrix(actors: list[Mlp], normalizer: ObservationNormalizer,
                                view: StepView, squash: bool) -> np.ndarray:
    """(N, 2) deterministic actions in [-1, 1]; tanh of the mean for SAC
    heads (squash=True), clipped mean for MAPPO heads."""
    n = len(view.states)
    out = np.empty((n, 2))
    for i in range(n):
        obs = normalizer.transform(build_observation(view, i))
        head = mlp_forward(actors[i], obs)
        if squash:
            out[i] = np.tanh(head[:2])  # SAC actor output is [mu, log_std]
        else:
            out[i] = np.clip(head, -1.0, 1.0)
    return out


class SacController(Controller):
    """Frozen independent SAC policies, deterministic heads."""

    def __init__(self, actors: list[Mlp], normalizer: ObservationNormalizer):
        self.actors = actors
        self.normalizer = normalizer
        self._buildings = ()

    def reset(self, scenario, reference, seed: int) -> None:
        if len(scenario.buildings) != len(self.actors):
            raise ValueError("policy count does not match the roster")
        self._buildings = tuple(scenario.buildings)

    def act(self, view: StepView) -> list[Action]:
        mat = deterministic_action_matrix(self.actors, self.normalizer, view, squash=True)
        return [map_to_env_action(mat[i], p) for i, p in enumerate(self._buildings)]


class MappoController(Controller):
    """Frozen MAPPO policies; the execution path touches local observations
    only (the centralized critic plays no role here)."""

    def __init__(self, actors: list[Mlp], normalizer: ObservationNormalizer):
        self.actors = actors
        self.normalizer = normalizer
        self._buildings = ()

    def reset(self, scenario, reference, seed: int) -> None:
        if len(scenario.buildings) != len(self.actors):
            raise ValueError("policy count does not match the roster")
        self._buildings = tuple(scenario.buildings)

    def act(self, view: StepView) -> list[Action]:
        mat = deterministic_action_matrix(self.actors, self.normalizer, view, squash=False)
        return [map_to_env_action(mat[i], p) for i, p in enumerate(self._buildings)]


class RandomController(Controller):
    """Uniform actions over the joint action space; the comparison floor."""

    def __init__(self):
        self._rng = np.random.default_rng(0)
        self._buildings = ()

    def reset(self, scenario, reference, seed: int) -> None:
        self._rng = np.random.default_rng(seed)
        self._buildings = tuple(scenario.buildings)

    def act(self, view: StepView) -> list[Action]:
        a = self._rng.uniform(-1.0, 1.0, size=(len(self._buildings), 2))
        return [map_to_env_action(a[i], p) for i, p in enumerate(self._buildings)]


def evaluate_episode_rewards(scenario: Scenario, reference: ReferenceSignal,
                             controller: Controller, reward_cfg: RewardConfig,
                             n_episodes: int, seed: int,
                             episode_steps: int = 24) -> np.ndarray:
    """Mean per-step reward for each of n_episodes day episodes sampled
    from the scenario. No parameter updates happen here."""
    rng = np.random.default_rng(seed)
    out = np.empty(n_episodes)
    for e in range(n_episodes):
        start, ep_len = _episode_starts(scenario, episode_steps, rng)
        sub = slice_scenario(scenario, start, ep_len)
        ref = ReferenceSignal(r=np.asarray(reference.r[start:start + ep_len]))
        trace = run_episode(sub, controller, ref, seed=seed + e)
        rewards = [
            global_reward(float(trace.y_total[k]), float(ref.r[k]),
                          trace.t_in[k, :], reward_cfg)
            for k in range(ep_len)
        ]
        out[e] = float(np.mean(rewards))
    return out


# ---------------------------------------------------------------------------
# Checkpoints and curves
# ---------------------------------------------------------------------------

def save_policies(out_dir, result: TrainResult) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, actor in enumerate(result.actors):
        save_mlp(actor, out / f"actor_{i:02d}.bin")
    meta = {
        "algo": result.algo,
        "n_agents": len(result.actors),
        "obs_dim": OBS_DIM,
        "reward": {
            "w_track": result.reward_cfg.w_track,
            "w_comfort": result.reward_cfg.w_comfort,
            "delta": result.reward_cfg.delta,
            "t_min_c": result.reward_cfg.t_min_c,
            "t_max_c": result.reward_cfg.t_max_c,
        },
        "normalizer": result.normalizer.to_dict(),
    }
    if result.log_stds is not None:
        meta["log_stds"] = [ls.tolist() for ls in result.log_stds]
    with open(out / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)


def load_policies(in_dir) -> tuple[str, list[Mlp], ObservationNormalizer, RewardConfig]:
    src = Path(in_dir)
    with open(src / "meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    actors = [load_mlp(src / f"actor_{i:02d}.bin") for i in range(meta["n_agents"])]
    normalizer = ObservationNormalizer.from_dict(meta["normalizer"])
    reward_cfg = RewardConfig(**meta["reward"])
    return meta["algo"], actors, normalizer, reward_cfg


def write_curves_csv(path, curves: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("episode,mean_reward,tracking_term,comfort_term\n")
        for row in curves:
            fh.write(
                f"{row['episode']},{row['mean_reward']!r},{row['tracking_term']!r},{row['comfort_term']!r}\n"
            )
