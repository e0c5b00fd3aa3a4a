"""Shared district reward: Huber tracking penalty + mean comfort violation.

Every agent receives the same scalar each step, so cooperative behavior is
shaped purely by the reward, not by communication.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..simulation import EmptyDistrictError, comfort_violation

__all__ = ["RewardConfig", "huber", "comfort_loss", "global_reward", "default_reward_config"]


@dataclass(frozen=True)
class RewardConfig:
    w_track: float = 1.0
    w_comfort: float = 10.0
    delta: float = 1.0          # Huber threshold, kWh
    t_min_c: float = 20.0
    t_max_c: float = 24.0

    def __post_init__(self):
        if self.w_track < 0.0 or self.w_comfort < 0.0:
            raise ValueError("reward weights must be >= 0")
        if self.delta <= 0.0:
            raise ValueError("huber delta must be > 0")


def default_reward_config(reference, w_track: float = 1.0, w_comfort: float = 10.0,
                          delta_frac: float = 0.1, t_min_c: float = 20.0,
                          t_max_c: float = 24.0) -> RewardConfig:
    """Scale the Huber threshold to the reference magnitude (delta_frac of
    the mean reference)."""
    r = np.asarray(reference.r if hasattr(reference, "r") else reference, dtype=float)
    delta = max(delta_frac * float(np.mean(r)), 1e-6)
    return RewardConfig(w_track=w_track, w_comfort=w_comfort, delta=delta,
                        t_min_c=t_min_c, t_max_c=t_max_c)


def huber(e: float, delta: float) -> float:
    """Quadratic inside |e| <= delta, linear beyond."""
    if delta <= 0.0:
        raise ValueError("huber delta must be > 0")
    a = abs(e)
    if a <= delta:
        return 0.5 * e * e
    return delta * (a - 0.5 * delta)


def comfort_loss(temps, t_min_c: float, t_max_c: float) -> float:
    """Mean instantaneous band violation across buildings (Kelvin)."""
    temps = list(temps)
    if not temps:
        raise EmptyDistrictError("comfort_loss over an empty district")
    return sum(comfort_violation(t, t_min_c, t_max_c) for t in temps) / len(temps)


def global_reward(y: float, r: float, temps, cfg: RewardConfig) -> float:
    """Nonpositive scalar broadcast to all agents."""
    track = huber(y - r, cfg.delta)
    comfort = comfort_loss(temps, cfg.t_min_c, cfg.t_max_c)
    return -(cfg.w_track * track + cfg.w_comfort * comfort)
