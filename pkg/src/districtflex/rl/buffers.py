"""Experience containers: uniform replay ring for SAC, on-policy rollout
storage with GAE for MAPPO."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["ReplayBuffer", "RolloutBuffer", "BufferUnderflowError", "EmptyRolloutError"]


class BufferUnderflowError(RuntimeError):
    """Sampling requested more transitions than the buffer holds."""


class EmptyRolloutError(RuntimeError):
    """An update was requested on an empty rollout."""


class ReplayBuffer:
    """Ring buffer of joint transitions (all agents share time indices).

    Stored per step: per-agent observations and squashed actions, the
    shared scalar reward, next observations, done flag.
    """

    def __init__(self, capacity: int, n_agents: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.obs = np.empty((capacity, n_agents, obs_dim))
        self.actions = np.empty((capacity, n_agents, act_dim))
        self.rewards = np.empty(capacity)
        self.next_obs = np.empty((capacity, n_agents, obs_dim))
        self.dones = np.empty(capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, obs, actions, reward: float, next_obs, done: bool) -> None:
        i = self._next
        self.obs[i] = obs
        self.actions[i] = actions
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = float(done)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        if self._size < batch:
            raise BufferUnderflowError(f"buffer holds {self._size} < batch {batch}")
        return rng.integers(0, self._size, size=batch)


@dataclass
class RolloutBuffer:
    """Episode-structured on-policy storage.

    `end_episode(bootstrap)` closes the current segment with the critic's
    value at the truncation state; advantages are computed per segment by
    the backward GAE recursion once, before any update of the epoch.
    """

    obs: list = field(default_factory=list)          # (n_agents, obs_dim) per step
    global_state: list = field(default_factory=list)
    actions_raw: list = field(default_factory=list)  # pre-clip Gaussian samples
    log_probs: list = field(default_factory=list)    # (n_agents,) per step
    rewards: list = field(default_factory=list)
    values: list = field(default_factory=list)
    _segments: list = field(default_factory=list)    # (start, stop, bootstrap)
    _open: int = 0

    def __len__(self) -> int:
        return len(self.rewards)

    def add_step(self, obs, global_state, actions_raw, log_probs, reward, value) -> None:
        self.obs.append(np.asarray(obs, dtype=float))
        self.global_state.append(np.asarray(global_state, dtype=float))
        self.actions_raw.append(np.asarray(actions_raw, dtype=float))
        self.log_probs.append(np.asarray(log_probs, dtype=float))
        self.rewards.append(float(reward))
        self.values.append(float(value))

    def end_episode(self, bootstrap_value: float) -> None:
        stop = len(self.rewards)
        if stop > self._open:
            self._segments.append((self._open, stop, float(bootstrap_value)))
            self._open = stop

    def compute_advantages(self, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
        """(advantages, returns) over all stored steps."""
        from .mappo import gae

        if not self.rewards:
            raise EmptyRolloutError("rollout is empty")
        if self._open != len(self.rewards):
            raise EmptyRolloutError("open episode: call end_episode before updating")
        values = np.asarray(self.values)
        rewards = np.asarray(self.rewards)
        advantages = np.empty(len(rewards))
        for start, stop, bootstrap in self._segments:
            seg_values = np.concatenate([values[start:stop], [bootstrap]])
            adv, _ = gae(rewards[start:stop], seg_values, gamma, lam)
            advantages[start:stop] = adv
        returns = advantages + values
        return advantages, returns

    def stacked(self) -> dict:
        if not self.rewards:
            raise EmptyRolloutError("rollout is empty")
        return {
            "obs": np.stack(self.obs),                 # (T, n_agents, obs_dim)
            "global_state": np.stack(self.global_state),
            "actions_raw": np.stack(self.actions_raw),
            "log_probs": np.stack(self.log_probs),
        }
