"""Discrete-time simulation of a district of buildings.

Each building is a first-order linear thermal zone heated by a heat pump,
with a battery (BESS) and rooftop PV. One simulation step advances every
building and aggregates net electricity consumption at the district level.

Units throughout: temperatures degC, power kW, energy kWh, time step dt in
hours, SOC as a fraction of battery capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BuildingParams",
    "BuildingState",
    "Action",
    "AppliedAction",
    "Disturbance",
    "StepView",
    "Controller",
    "DistrictTrace",
    "step_building",
    "aggregate_load",
    "comfort_violation",
    "run_episode",
    "initial_state",
    "NonFiniteInputError",
    "InvalidParamsError",
    "InvalidBandError",
    "EmptyDistrictError",
    "LengthMismatchError",
    "EmptyTraceError",
    "ControllerStepError",
]


class NonFiniteInputError(ValueError):
    """A state, action or disturbance field is NaN or infinite."""


class InvalidParamsError(ValueError):
    """Building parameters violate their invariants."""


class InvalidBandError(ValueError):
    """Comfort band with T_min >= T_max."""


class EmptyDistrictError(ValueError):
    """An operation over buildings received an empty collection."""


class LengthMismatchError(ValueError):
    """Time series that must share a length do not."""


class EmptyTraceError(ValueError):
    """An operation requires a nonempty trace."""


class ControllerStepError(RuntimeError):
    """A controller failed at a specific step of an episode."""

    def __init__(self, step: int, message: str):
        super().__init__(f"controller failed at step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class BuildingParams:
    """Static per-building physics and asset limits.

    Thermal model: T' = a*T + b*T_out + c*P_hvac*u + d, with u in [0, 1]
    the heat-pump actuation fraction. Stability requires 0 < a < 1.
    """

    id: int
    a: float                      # thermal inertia (dimensionless)
    b: float                      # outdoor coupling (K per K)
    c: float                      # heating gain (K per kW)
    d: float                      # internal gains offset (K)
    p_hvac_kw: float              # nominal heat-pump electrical power
    e_cap_kwh: float              # battery energy capacity
    p_min_kw: float               # battery power lower bound (discharge, < 0)
    p_max_kw: float               # battery power upper bound (charge, > 0)
    soc_min: float = 0.1
    soc_max: float = 0.9
    t_min_c: float = 20.0         # comfort band lower edge
    t_max_c: float = 24.0         # comfort band upper edge
    floor_area_m2: float = 150.0  # metadata only
    batt_roundtrip_eff: float = 1.0  # charge-side derating; 1.0 = lossless

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not (0.0 < self.a < 1.0):
            raise InvalidParamsError(f"building {self.id}: a={self.a} not in (0, 1)")
        if self.e_cap_kwh <= 0.0:
            raise InvalidParamsError(f"building {self.id}: e_cap_kwh={self.e_cap_kwh} must be > 0")
        if not (self.p_min_kw < 0.0 < self.p_max_kw):
            raise InvalidParamsError(
                f"building {self.id}: need p_min_kw < 0 < p_max_kw, got [{self.p_min_kw}, {self.p_max_kw}]"
            )
        if not (0.0 <= self.soc_min < self.soc_max <= 1.0):
            raise InvalidParamsError(
                f"building {self.id}: need 0 <= soc_min < soc_max <= 1, got [{self.soc_min}, {self.soc_max}]"
            )
        if not self.t_min_c < self.t_max_c:
            raise InvalidParamsError(
                f"building {self.id}: comfort band [{self.t_min_c}, {self.t_max_c}] is empty"
            )
        if self.p_hvac_kw <= 0.0:
            raise InvalidParamsError(f"building {self.id}: p_hvac_kw={self.p_hvac_kw} must be > 0")
        if not (0.0 < self.batt_roundtrip_eff <= 1.0):
            raise InvalidParamsError(
                f"building {self.id}: batt_roundtrip_eff={self.batt_roundtrip_eff} not in (0, 1]"
            )


@dataclass(frozen=True)
class BuildingState:
    """Evolving per-building state after a step."""

    t_in_c: float    # indoor temperature
    soc: float       # battery state of charge (fraction)
    y_kwh: float     # net electricity consumption over the last step


@dataclass(frozen=True)
class Action:
    """Per-building control command for one step."""

    u: float           # HVAC actuation fraction, expected in [0, 1]
    p_batt_kw: float   # battery power command (signed; < 0 discharges)


@dataclass(frozen=True)
class AppliedAction:
    """Action as actually applied, after clamping to limits."""

    u: float
    p_batt_kw: float


@dataclass(frozen=True)
class Disturbance:
    """Exogenous inputs for one building and one step."""

    t_out_c: float       # outdoor temperature
    base_load_kwh: float  # non-HVAC electric load this step (>= 0)
    pv_kwh: float         # PV generation this step (>= 0)
    hour_of_day: int      # 0-23


@dataclass(frozen=True)
class StepView:
    """What a controller may observe at one step.

    `prev_district_load` is global information; decentralized controllers
    must not read it (enforced by the CTDE separation test).
    """

    k: int
    hour: int
    dt: float
    states: tuple[BuildingState, ...]
    disturbances: tuple[Disturbance, ...]
    r_k: float
    prev_building_loads: np.ndarray   # y_{k-1}^i, zeros at k=0
    prev_district_load: float         # y_{k-1}, 0.0 at k=0


class Controller:
    """Base controller: reset once per episode, act once per step."""

    def reset(self, scenario, reference, seed: int) -> None:
        """Prepare for a fresh episode. Centralized controllers may keep
        the scenario handle for read-ahead (perfect foresight)."""

    def act(self, view: StepView) -> list[Action]:
        raise NotImplementedError


@dataclass
class DistrictTrace:
    """Per-step record of an episode; the substrate for every metric.

    All (K, N) arrays are indexed [step, building]. States are post-step:
    row k holds the temperature/SOC resulting from the action applied at
    step k, and the energy consumed during step k.
    """

    building_ids: list[int]
    dt: float
    hour: np.ndarray         # (K,)
    t_in: np.ndarray         # (K, N) degC
    soc: np.ndarray          # (K, N)
    u: np.ndarray            # (K, N) applied HVAC fraction
    p_batt: np.ndarray       # (K, N) applied battery power, kW
    y: np.ndarray            # (K, N) net consumption, kWh
    t_out: np.ndarray        # (K, N) degC
    base_load: np.ndarray    # (K, N) kWh
    pv: np.ndarray           # (K, N) kWh
    y_total: np.ndarray      # (K,) aggregate district load, kWh
    r: np.ndarray            # (K,) reference signal, kWh

    @property
    def n_steps(self) -> int:
        return self.y_total.shape[0]

    @property
    def n_buildings(self) -> int:
        return len(self.building_ids)

    @property
    def p_batt_district(self) -> np.ndarray:
        """Aggregated BESS power per step (derived column)."""
        return self.p_batt.sum(axis=1)

    def check_decomposition(self, rel_tol: float = 1e-9) -> None:
        """Stored aggregate must equal the recomputed per-building sum."""
        recomputed = np.array([math.fsum(row) for row in self.y])
        scale = np.maximum(np.abs(self.y_total), 1.0)
        worst = np.max(np.abs(recomputed - self.y_total) / scale) if self.n_steps else 0.0
        if worst > rel_tol:
            raise AssertionError(f"load decomposition violated: rel err {worst:.3e}")


def initial_state(params: BuildingParams) -> BuildingState:
    """Deterministic episode start: mid-band temperature, mid-range SOC."""
    return BuildingState(
        t_in_c=0.5 * (params.t_min_c + params.t_max_c),
        soc=0.5 * (params.soc_min + params.soc_max),
        y_kwh=0.0,
    )


def _require_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise NonFiniteInputError(f"{name}={v!r} is not finite")


def step_building(
    state: BuildingState,
    params: BuildingParams,
    action: Action,
    dist: Disturbance,
    dt: float,
) -> tuple[BuildingState, AppliedAction]:
    """Advance one building by one step of length dt hours.

    The battery command is clamped to power bounds first, then to SOC
    headroom so the post-step SOC stays inside [soc_min, soc_max]; the
    clamped value is returned so controllers can observe saturation.
    Net consumption decomposes as base_load - pv + hvac + battery energy.
    """
    if dt <= 0.0:
        raise ValueError(f"dt={dt} must be > 0")
    params.validate()
    _require_finite(
        t_in_c=state.t_in_c,
        soc=state.soc,
        u=action.u,
        p_batt_kw=action.p_batt_kw,
        t_out_c=dist.t_out_c,
        base_load_kwh=dist.base_load_kwh,
        pv_kwh=dist.pv_kwh,
    )

    u = min(max(action.u, 0.0), 1.0)
    t_next = params.a * state.t_in_c + params.b * dist.t_out_c + params.c * params.p_hvac_kw * u + params.d

    p_cmd = min(max(action.p_batt_kw, params.p_min_kw), params.p_max_kw)
    eta = params.batt_roundtrip_eff
    # charge-side derating: only a fraction eta of charging energy reaches the cells
    soc_gain = eta * p_cmd if p_cmd > 0.0 else p_cmd
    soc_raw = state.soc + soc_gain * dt / params.e_cap_kwh
    soc_next = min(max(soc_raw, params.soc_min), params.soc_max)
    realized = (soc_next - state.soc) * params.e_cap_kwh / dt
    p_applied = realized / eta if realized > 0.0 else realized

    hvac_kwh = params.p_hvac_kw * u * dt
    batt_kwh = p_applied * dt
    y = dist.base_load_kwh - dist.pv_kwh + hvac_kwh + batt_kwh

    return BuildingState(t_in_c=t_next, soc=soc_next, y_kwh=y), AppliedAction(u=u, p_batt_kw=p_applied)


def aggregate_load(building_loads) -> float:
    """District load y_k as the exact sum of per-building net loads."""
    loads = list(building_loads)
    if not loads:
        raise EmptyDistrictError("aggregate_load over an empty district")
    for v in loads:
        if not math.isfinite(v):
            raise NonFiniteInputError(f"building load {v!r} is not finite")
    return math.fsum(loads)


def comfort_violation(t_in_c: float, t_min_c: float, t_max_c: float) -> float:
    """Instantaneous band violation in Kelvin (0 when inside the band)."""
    if t_min_c >= t_max_c:
        raise InvalidBandError(f"comfort band [{t_min_c}, {t_max_c}] is empty")
    return max(0.0, t_in_c - t_max_c) + max(0.0, t_min_c - t_in_c)


def run_episode(scenario, controller: Controller, reference, seed: int) -> DistrictTrace:
    """Run one closed-loop episode and record the full trace.

    Strictly sequential; deterministic given the seed (which is handed to
    the controller's reset). Controller exceptions are re-raised with the
    failing step index attached.
    """
    k_steps = scenario.n_steps
    if reference.n_steps != k_steps:
        raise LengthMismatchError(
            f"scenario has {k_steps} steps but reference has {reference.n_steps}"
        )
    n = scenario.n_buildings
    dt = scenario.dt

    controller.reset(scenario, reference, seed)
    states = [initial_state(p) for p in scenario.buildings]

    t_in = np.empty((k_steps, n))
    soc = np.empty((k_steps, n))
    u_arr = np.empty((k_steps, n))
    p_arr = np.empty((k_steps, n))
    y_arr = np.empty((k_steps, n))
    t_out = np.empty((k_steps, n))
    base = np.empty((k_steps, n))
    pv = np.empty((k_steps, n))
    hour = np.empty(k_steps, dtype=np.int64)
    y_total = np.empty(k_steps)

    prev_loads = np.zeros(n)
    prev_total = 0.0
    for k in range(k_steps):
        dists = scenario.disturbances_at(k)
        view = StepView(
            k=k,
            hour=dists[0].hour_of_day,
            dt=dt,
            states=tuple(states),
            disturbances=dists,
            r_k=float(reference.r[k]),
            prev_building_loads=prev_loads.copy(),
            prev_district_load=prev_total,
        )
        try:
            actions = controller.act(view)
        except Exception as exc:
            raise ControllerStepError(k, str(exc)) from exc
        if len(actions) != n:
            raise ControllerStepError(k, f"controller returned {len(actions)} actions for {n} buildings")

        for i, params in enumerate(scenario.buildings):
            new_state, applied = step_building(states[i], params, actions[i], dists[i], dt)
            states[i] = new_state
            t_in[k, i] = new_state.t_in_c
            soc[k, i] = new_state.soc
            u_arr[k, i] = applied.u
            p_arr[k, i] = applied.p_batt_kw
            y_arr[k, i] = new_state.y_kwh
            t_out[k, i] = dists[i].t_out_c
            base[k, i] = dists[i].base_load_kwh
            pv[k, i] = dists[i].pv_kwh
        hour[k] = dists[0].hour_of_day
        y_total[k] = aggregate_load(y_arr[k])
        prev_loads = y_arr[k]
        prev_total = y_total[k]

    return DistrictTrace(
        building_ids=[p.id for p in scenario.buildings],
        dt=dt,
        hour=hour,
        t_in=t_in,
        soc=soc,
        u=u_arr,
        p_batt=p_arr,
        y=y_arr,
        t_out=t_out,
        base_load=base,
        pv=pv,
        y_total=y_total,
        r=np.asarray(reference.r, dtype=float).copy(),
    )
