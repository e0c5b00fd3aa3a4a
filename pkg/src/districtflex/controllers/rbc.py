"""Rule-based baseline: time-of-use battery schedule + hysteresis thermostat.

The battery charges off-peak (22:00-08:00) and discharges on-peak
(14:00-21:00); heating is a latch that turns on below `hysteresis_low` and
off above `hysteresis_high`. No models, no training, current measurements
only.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..simulation import Action, BuildingParams, BuildingState, Controller, Disturbance, StepView

__all__ = ["RbcConfig", "RbcController", "rbc_act", "in_charge_window", "in_discharge_window"]


@dataclass(frozen=True)
class RbcConfig:
    """TOU windows and thermostat thresholds.

    `charge_rate`/`discharge_rate` are fractions of p_max / |p_min| applied
    while the window is active; None sizes them per building so a full
    charge (discharge) completes within the 10 h (8 h) window.
    """

    charge_start: int = 22   # [22:00, 08:00)
    charge_end: int = 8
    discharge_start: int = 14  # [14:00, 21:00]
    discharge_end: int = 21
    charge_rate: float | None = None
    discharge_rate: float | None = None
    hysteresis_low: float = 20.5
    hysteresis_high: float = 22.0

    def __post_init__(self):
        if not self.hysteresis_low < self.hysteresis_high:
            raise ValueError(
                f"hysteresis thresholds must satisfy low < high, got [{self.hysteresis_low}, {self.hysteresis_high}]"
            )
        charge = {(self.charge_start + h) % 24 for h in range(_hours_between(self.charge_start, self.charge_end))}
        discharge = set(range(self.discharge_start, self.discharge_end + 1))
        overlap = charge & discharge
        if overlap:
            raise ValueError(f"charge and discharge windows overlap at hours {sorted(overlap)}")


def _hours_between(start: int, end: int) -> int:
    return (end - start) % 24 or 24


def in_charge_window(hour: int, cfg: RbcConfig) -> bool:
    # window wraps midnight, end exclusive
    if cfg.charge_start <= cfg.charge_end:
        return cfg.charge_start <= hour < cfg.charge_end
    return hour >= cfg.charge_start or hour < cfg.charge_end


def in_discharge_window(hour: int, cfg: RbcConfig) -> bool:
    return cfg.discharge_start <= hour <= cfg.discharge_end


def _charge_window_hours(cfg: RbcConfig) -> int:
    return _hours_between(cfg.charge_start, cfg.charge_end)


def _discharge_window_hours(cfg: RbcConfig) -> int:
    return (cfg.discharge_end - cfg.discharge_start) % 24 + 1


def default_charge_rate(params: BuildingParams, cfg: RbcConfig, dt: float) -> float:
    hours = _charge_window_hours(cfg)
    return min(1.0, params.e_cap_kwh / (hours * params.p_max_kw * dt))


def default_discharge_rate(params: BuildingParams, cfg: RbcConfig, dt: float) -> float:
    hours = _discharge_window_hours(cfg)
    return min(1.0, params.e_cap_kwh / (hours * abs(params.p_min_kw) * dt))


def rbc_act(
    state: BuildingState,
    dist: Disturbance,
    cfg: RbcConfig,
    params: BuildingParams,
    heating_on: bool,
    dt: float = 1.0,
) -> tuple[Action, bool]:
    """One building's rule evaluation. Total function; returns the action
    and the updated thermostat latch."""
    hour = dist.hour_of_day
    if in_charge_window(hour, cfg) and state.soc < params.soc_max:
        rate = cfg.charge_rate if cfg.charge_rate is not None else default_charge_rate(params, cfg, dt)
        p_batt = rate * params.p_max_kw
    elif in_discharge_window(hour, cfg) and state.soc > params.soc_min:
        rate = cfg.discharge_rate if cfg.discharge_rate is not None else default_discharge_rate(params, cfg, dt)
        p_batt = -rate * abs(params.p_min_kw)
    else:
        p_batt = 0.0

    if state.t_in_c < cfg.hysteresis_low:
        heating_on = True
    elif state.t_in_c > cfg.hysteresis_high:
        heating_on = False
    u = 1.0 if heating_on else 0.0
    return Action(u=u, p_batt_kw=p_batt), heating_on


class RbcController(Controller):
    """Per-building thermostat latches; otherwise stateless."""

    def __init__(self, cfg: RbcConfig | None = None):
        self.cfg = cfg if cfg is not None else RbcConfig()
        self._latches: list[bool] = []
        self._buildings: tuple[BuildingParams, ...] = ()

    def reset(self, scenario, reference, seed: int) -> None:
        for b in scenario.buildings:
            if not (b.t_min_c <= self.cfg.hysteresis_low and self.cfg.hysteresis_high <= b.t_max_c):
                raise ValueError(
                    f"building {b.id}: hysteresis band [{self.cfg.hysteresis_low}, "
                    f"{self.cfg.hysteresis_high}] not inside comfort band [{b.t_min_c}, {b.t_max_c}]"
                )
        self._buildings = tuple(scenario.buildings)
        self._latches = [False] * len(self._buildings)

    def act(self, view: StepView) -> list[Action]:
        actions = []
        for i, params in enumerate(self._buildings):
            action, latch = rbc_act(
                view.states[i], view.disturbances[i], self.cfg, params, self._latches[i], view.dt
            )
            self._latches[i] = latch
            actions.append(action)
        return actions
