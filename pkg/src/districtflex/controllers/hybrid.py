"""Hierarchical controller: frozen SAC policies set HVAC, a centralized
battery-only MPC tracks the district reference.

Each step the HVAC layer acts first from local observations; the battery
layer then solves an H-step QP over every building's battery power with
the current HVAC actions held constant over the horizon (persistence
forecast) and applies the first battery powers. The battery layer can
never perturb the HVAC decision taken at the same step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..nn import Mlp
from ..qp import QuadraticProgram, SolveStatus, SolverSettings, solve_qp
from ..rl.observations import ObservationNormalizer
from ..rl.training import deterministic_action_matrix
from ..simulation import Action, BuildingParams, BuildingState, Controller, StepView

__all__ = ["HybridConfig", "BatteryMpcProblem", "HybridController"]


@dataclass(frozen=True)
class HybridConfig:
    horizon: int = 12
    w_track: float = 0.5
    w_ctrl: float = 0.01   # quadratic battery-power penalty

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.w_track < 0.0 or self.w_ctrl < 0.0:
            raise ValueError("weights must be >= 0")


class BatteryMpcProblem:
    """Static structure of the battery-only tracking QP.

    Decision vector, step-major: [p_{0,k}..p_{N-1,k}, y_k] per step.
    Constraints: battery power boxes, SOC running-sum bounds, and the
    demand-coupling equality tying y_k to the uncontrollable forecast
    plus battery energy. Always feasible (p = 0 qualifies).
    """

    def __init__(self, buildings: list[BuildingParams], cfg: HybridConfig, dt: float):
        self.buildings = list(buildings)
        self.cfg = cfg
        self.dt = dt
        n, h = len(buildings), cfg.horizon
        self.n, self.h = n, h
        self.block = n + 1
        self.n_vars = h * self.block
        self.rows_box = 0
        self.rows_soc = h * n
        self.rows_demand = 2 * h * n
        self.n_rows = 2 * h * n + h

        rows, cols, vals = [], [], []
        for k in range(h):
            for i, bp in enumerate(buildings):
                rows.append(self.rows_box + k * n + i)
                cols.append(self.p_idx(i, k))
                vals.append(1.0)
                for j in range(k + 1):
                    rows.append(self.rows_soc + k * n + i)
                    cols.append(self.p_idx(i, j))
                    vals.append(dt / bp.e_cap_kwh)
                rows.append(self.rows_demand + k)
                cols.append(self.p_idx(i, k))
                vals.append(-dt)
            rows.append(self.rows_demand + k)
            cols.append(self.y_idx(k))
            vals.append(1.0)
        self.a_mat = sp.csc_matrix((vals, (rows, cols)), shape=(self.n_rows, self.n_vars))

        diag = np.zeros(self.n_vars)
        for k in range(h):
            for i in range(n):
                diag[self.p_idx(i, k)] = 2.0 * cfg.w_ctrl
            diag[self.y_idx(k)] = 2.0 * cfg.w_track
        self.p_mat = sp.diags(diag, format="csc")

        self.l_static = np.full(self.n_rows, -np.inf)
        self.u_static = np.full(self.n_rows, np.inf)
        for k in range(h):
            for i, bp in enumerate(buildings):
                r = self.rows_box + k * n + i
                self.l_static[r], self.u_static[r] = bp.p_min_kw, bp.p_max_kw

    def p_idx(self, i: int, k: int) -> int:
        return k * self.block + i

    def y_idx(self, k: int) -> int:
        return k * self.block + self.n

    def build(self, states: list[BuildingState], fixed_demand: np.ndarray,
              reference: np.ndarray) -> QuadraticProgram:
        """`fixed_demand[k]` is the non-battery district load forecast:
        uncontrollable load plus the persisted HVAC energy."""
        h, n = self.h, self.n
        if fixed_demand.shape[0] < h or reference.shape[0] < h:
            raise ValueError("forecast windows shorter than the horizon")
        l = self.l_static.copy()
        u = self.u_static.copy()
        q = np.zeros(self.n_vars)
        for k in range(h):
            for i, bp in enumerate(self.buildings):
                r = self.rows_soc + k * n + i
                l[r] = bp.soc_min - states[i].soc
                u[r] = bp.soc_max - states[i].soc
            r = self.rows_demand + k
            l[r] = fixed_demand[k]
            u[r] = fixed_demand[k]
            q[self.y_idx(k)] = -2.0 * self.cfg.w_track * reference[k]
        return QuadraticProgram(p_mat=self.p_mat, q=q, a_mat=self.a_mat, l=l, u=u)

    def shift_warm_start(self, x: np.ndarray, y_dual: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x2 = np.empty_like(x)
        x2[: -self.block] = x[self.block:]
        x2[-self.block:] = x[-self.block:]
        y2 = np.empty_like(y_dual)
        n, h = self.n, self.h
        for start, per_step, count in ((self.rows_box, n, h), (self.rows_soc, n, h),
                                       (self.rows_demand, 1, h)):
            seg = y_dual[start:start + per_step * count]
            y2[start:start + per_step * (count - 1)] = seg[per_step:]
            y2[start + per_step * (count - 1):start + per_step * count] = seg[-per_step:]
        return x2, y2


class HybridController(Controller):
    """HVAC by frozen SAC agents, batteries by centralized tracking MPC."""

    def __init__(self, actors: list[Mlp], normalizer: ObservationNormalizer,
                 cfg: HybridConfig | None = None,
                 solver_settings: SolverSettings | None = None):
        self.actors = actors
        self.normalizer = normalizer
        self.cfg = cfg if cfg is not None else HybridConfig()
        self.solver_settings = solver_settings if solver_settings is not None else SolverSettings()
        self._problem: BatteryMpcProblem | None = None
        self._scenario = None
        self._reference = None
        self._warm = None
        self._factor_cache: dict = {}
        self.fallback_steps: list[int] = []

    def reset(self, scenario, reference, seed: int) -> None:
        if len(scenario.buildings) != len(self.actors):
            raise ValueError("policy count does not match the roster")
        self._scenario = scenario
        self._reference = reference
        self._problem = BatteryMpcProblem(list(scenario.buildings), self.cfg, scenario.dt)
        self._warm = None
        self._factor_cache = {}
        self.fallback_steps = []

    def act(self, view: StepView) -> list[Action]:
        sc = self._scenario
        n = sc.n_buildings
        h = self.cfg.horizon

        # layer 1: HVAC from local observations (same code path as the
        # standalone SAC controller, so the decisions are bit-identical)
        mat = deterministic_action_matrix(self.actors, self.normalizer, view, squash=True)
        u = 0.5 * (mat[:, 0] + 1.0)

        # layer 2: battery QP with HVAC persisted over the horizon
        idx = np.minimum(np.arange(view.k, view.k + h), sc.n_steps - 1)
        unc = sc.uncontrollable_load()[idx].sum(axis=1)
        hvac_kwh = float(np.sum([sc.buildings[i].p_hvac_kw * u[i] * sc.dt for i in range(n)]))
        fixed_demand = unc + hvac_kwh
        r_window = np.asarray(self._reference.r, dtype=float)[idx]
        qp = self._problem.build(list(view.states), fixed_demand, r_window)
        sol = solve_qp(qp, self.solver_settings, warm_start=self._warm,
                       factor_cache=self._factor_cache)
        if sol.status is not SolveStatus.SOLVED:
            self.fallback_steps.append(view.k)
            self._warm = None
            p_first = np.zeros(n)
        else:
            self._warm = self._problem.shift_warm_start(sol.x, sol.z_dual)
            p_first = np.array([sol.x[self._problem.p_idx(i, 0)] for i in range(n)])
            p_first = np.clip(p_first, [b.p_min_kw for b in sc.buildings],
                              [b.p_max_kw for b in sc.buildings])

        return [Action(u=float(u[i]), p_batt_kw=float(p_first[i])) for i in range(n)]
