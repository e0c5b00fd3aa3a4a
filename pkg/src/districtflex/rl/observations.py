"""Observation construction and normalization.

Local observation per building: [sin hour, cos hour, T_out, T_in, SOC,
r_k, previous own net load]. Normalization statistics come from the
training scenario/reference only, so evaluation never leaks test data.

The global state (training-time critic input only) concatenates the
normalized building states with the broadcast signals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..simulation import StepView

__all__ = [
    "OBS_DIM",
    "ObservationNormalizer",
    "build_observation",
    "build_global_state",
    "global_state_dim",
]

OBS_DIM = 7


@dataclass
class ObservationNormalizer:
    mean: np.ndarray  # (OBS_DIM,)
    std: np.ndarray   # (OBS_DIM,)

    @classmethod
    def fit(cls, scenario, reference) -> "ObservationNormalizer":
        """Feature statistics from the training scenario and reference."""
        r = np.asarray(reference.r, dtype=float)
        r_mean = float(np.mean(r)) if r.size else 0.0
        r_std = max(float(np.std(r)), 0.1 * abs(r_mean), 1e-6)
        t_out_mean = float(np.mean(scenario.t_out))
        t_out_std = max(float(np.std(scenario.t_out)), 1e-6)
        mids = [0.5 * (b.t_min_c + b.t_max_c) for b in scenario.buildings]
        half = [0.5 * (b.t_max_c - b.t_min_c) for b in scenario.buildings]
        soc_mid = [0.5 * (b.soc_min + b.soc_max) for b in scenario.buildings]
        soc_half = [0.5 * (b.soc_max - b.soc_min) for b in scenario.buildings]
        per_building = max(r_mean / scenario.n_buildings, 1e-6)
        mean = np.array([
            0.0, 0.0,
            t_out_mean,
            float(np.mean(mids)),
            float(np.mean(soc_mid)),
            r_mean,
            per_building,
        ])
        std = np.array([
            1.0, 1.0,
            t_out_std,
            max(float(np.mean(half)), 1e-6),
            max(float(np.mean(soc_half)), 1e-6),
            r_std,
            per_building,
        ])
        return cls(mean=mean, std=std)

    def transform(self, raw: np.ndarray) -> np.ndarray:
        return (np.asarray(raw, dtype=float) - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "ObservationNormalizer":
        return cls(mean=np.asarray(doc["mean"], dtype=float),
                   std=np.asarray(doc["std"], dtype=float))


def build_observation(view: StepView, i: int) -> np.ndarray:
    """Raw local features for building i; reads only local fields plus the
    broadcast reference (never district aggregates)."""
    angle = 2.0 * math.pi * view.hour / 24.0
    state = view.states[i]
    dist = view.disturbances[i]
    return np.array([
        math.sin(angle),
        math.cos(angle),
        dist.t_out_c,
        state.t_in_c,
        state.soc,
        view.r_k,
        float(view.prev_building_loads[i]),
    ])


def global_state_dim(n_buildings: int) -> int:
    return 4 + 3 * n_buildings


def build_global_state(view: StepView, normalizer: ObservationNormalizer) -> np.ndarray:
    """Centralized critic input: broadcast signals + every building's
    normalized (T, SOC, previous load)."""
    angle = 2.0 * math.pi * view.hour / 24.0
    n = len(view.states)
    mean, std = normalizer.mean, normalizer.std
    out = np.empty(global_state_dim(n))
    out[0] = math.sin(angle)
    out[1] = math.cos(angle)
    out[2] = (view.disturbances[0].t_out_c - mean[2]) / std[2]
    out[3] = (view.r_k - mean[5]) / std[5]
    for i, state in enumerate(view.states):
        out[4 + 3 * i] = (state.t_in_c - mean[3]) / std[3]
        out[5 + 3 * i] = (state.soc - mean[4]) / std[4]
        out[6 + 3 * i] = (float(view.prev_building_loads[i]) - mean[6]) / std[6]
    return out
