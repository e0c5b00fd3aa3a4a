"""Centralized receding-horizon controller.

Identifies per-building first-order thermal models from training data,
then at every step stacks an H-step quadratic program over all buildings:
HVAC fractions, battery powers, comfort slack pairs and an auxiliary
district-load variable per step. Temperatures and SOC are eliminated by
affine expansion, so the decision vector has exactly H*(4N+1) entries.
Perfect foresight of disturbances and the reference is assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..qp import QpSolution, QuadraticProgram, SolveStatus, SolverSettings, solve_qp
from ..simulation import Action, BuildingParams, BuildingState, Controller, StepView
from .rbc import RbcConfig, RbcController

__all__ = [
    "MpcConfig",
    "ThermalFit",
    "MpcForecast",
    "MpcProblem",
    "MpcDecision",
    "MpcController",
    "identify_thermal_model",
    "fit_scenario_models",
    "assemble_mpc_qp",
    "TooFewSamplesError",
    "RankDeficientError",
    "ForecastTooShortError",
    "SolverFailedError",
]

MIN_FIT_SAMPLES = 8


class TooFewSamplesError(ValueError):
    """Not enough transitions to identify a thermal model."""


class RankDeficientError(ValueError):
    """Identification data lacks excitation (rank-deficient regressors)."""


class ForecastTooShortError(ValueError):
    """Forecast window does not cover the horizon."""


class SolverFailedError(RuntimeError):
    """QP solve did not reach Solved status."""


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 12
    w_track: float = 0.5
    w_comfort: float = 300.0   # linear slack penalty
    w_slack: float = 50.0      # quadratic slack penalty
    w_ctrl: float = 0.01       # quadratic HVAC effort penalty
    w_batt: float = 1e-3       # small battery ridge; keeps the split unique

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        for name in ("w_track", "w_comfort", "w_slack", "w_ctrl", "w_batt"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class ThermalFit:
    """Least-squares fit of T' = a T + b T_out + c P_hvac u + d."""

    a: float
    b: float
    c: float
    d: float
    rmse: float
    n_samples: int
    projected: bool = False   # True if a had to be pulled into (0, 1)


def identify_thermal_model(t_in: np.ndarray, t_out: np.ndarray, u: np.ndarray,
                           p_hvac_kw: float) -> ThermalFit:
    """Fit the four thermal coefficients from an observed trajectory.

    `t_in` has one more entry than the input series: transition j maps
    t_in[j] with inputs (t_out[j], u[j]) to t_in[j+1].
    """
    t_in = np.asarray(t_in, dtype=float)
    t_out = np.asarray(t_out, dtype=float)
    u = np.asarray(u, dtype=float)
    if t_in.shape[0] != t_out.shape[0] + 1 or t_out.shape[0] != u.shape[0]:
        raise ValueError(
            f"need len(t_in) == len(t_out)+1 == len(u)+1, got {t_in.shape[0]}/{t_out.shape[0]}/{u.shape[0]}"
        )
    n = t_out.shape[0]
    if n < MIN_FIT_SAMPLES:
        raise TooFewSamplesError(f"{n} transitions < {MIN_FIT_SAMPLES}")

    design = np.column_stack([t_in[:-1], t_out, p_hvac_kw * u, np.ones(n)])
    target = t_in[1:]
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < 4:
        raise RankDeficientError(f"regressor rank {rank} < 4; vary u and T_out")

    a, b, c, d = (float(v) for v in coef)
    projected = False
    if not (0.0 < a < 1.0):
        a = min(max(a, 1e-6), 1.0 - 1e-6)
        projected = True
    resid = target - design @ np.array([a, b, c, d])
    rmse = float(np.sqrt(np.mean(resid ** 2)))
    return ThermalFit(a=a, b=b, c=c, d=d, rmse=rmse, n_samples=n, projected=projected)


def fit_scenario_models(trace, scenario, noise_std_k: float = 0.0,
                        rng: np.random.Generator | None = None) -> list[ThermalFit]:
    """Identify every building's model from a recorded (training) trace.

    `noise_std_k` adds Gaussian sensor noise to the temperature series
    before fitting, mimicking identification from real measurements.
    """
    fits = []
    for i, params in enumerate(scenario.buildings):
        t_in = trace.t_in[:, i]
        if noise_std_k > 0.0:
            if rng is None:
                raise ValueError("noise_std_k > 0 requires an rng")
            t_in = t_in + rng.normal(0.0, noise_std_k, t_in.shape)
        fits.append(identify_thermal_model(
            t_in, trace.t_out[1:, i], trace.u[1:, i], params.p_hvac_kw,
        ))
    return fits


@dataclass(frozen=True)
class MpcForecast:
    """Perfect-foresight window of length H."""

    t_out: np.ndarray           # (H, N) degC
    uncontrollable: np.ndarray  # (H,) district base_load - pv, kWh

    def __post_init__(self):
        if self.t_out.shape[0] != self.uncontrollable.shape[0]:
            raise ForecastTooShortError("forecast pieces disagree on horizon length")


class _Layout:
    """Index bookkeeping for the stacked decision vector and row groups."""

    def __init__(self, n_buildings: int, horizon: int):
        self.n = n_buildings
        self.h = horizon
        self.block = 4 * n_buildings + 1
        self.n_vars = horizon * self.block
        # row groups, each ordered step-major: (name, rows_per_step)
        self.groups = [
            ("box_u", n_buildings),
            ("box_p", n_buildings),
            ("box_slo", n_buildings),
            ("box_shi", n_buildings),
            ("comf_lo", n_buildings),
            ("comf_hi", n_buildings),
            ("soc", n_buildings),
            ("demand", 1),
        ]
        self.group_start = {}
        row = 0
        for name, per_step in self.groups:
            self.group_start[name] = row
            row += per_step * horizon
        self.n_rows = row

    def u(self, i: int, k: int) -> int:
        return k * self.block + i

    def p(self, i: int, k: int) -> int:
        return k * self.block + self.n + i

    def s_lo(self, i: int, k: int) -> int:
        return k * self.block + 2 * self.n + i

    def s_hi(self, i: int, k: int) -> int:
        return k * self.block + 3 * self.n + i

    def y(self, k: int) -> int:
        return k * self.block + 4 * self.n

    def row(self, group: str, i: int, k: int) -> int:
        per_step = dict(self.groups)[group]
        return self.group_start[group] + k * per_step + i


class MpcProblem:
    """Static QP structure for a fixed roster/fits/horizon.

    The constraint matrix, cost curvature and box bounds never change
    between steps; only the comfort/SOC/demand bound values and the
    tracking gradient do, so rebuilding a QP per step is cheap and the
    KKT factorization can be cached across the whole episode.
    """

    def __init__(self, buildings: list[BuildingParams], fits: list[ThermalFit],
                 cfg: MpcConfig, dt: float):
        if len(buildings) != len(fits):
            raise ValueError("one fit per building required")
        self.buildings = list(buildings)
        self.fits = list(fits)
        self.cfg = cfg
        self.dt = dt
        self.layout = _Layout(len(buildings), cfg.horizon)
        self._build_static()

    def _build_static(self) -> None:
        lo = self.layout
        n, h, dt = lo.n, lo.h, self.dt
        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        for k in range(h):
            for i, (bp, fit) in enumerate(zip(self.buildings, self.fits)):
                add(lo.row("box_u", i, k), lo.u(i, k), 1.0)
                add(lo.row("box_p", i, k), lo.p(i, k), 1.0)
                add(lo.row("box_slo", i, k), lo.s_lo(i, k), 1.0)
                add(lo.row("box_shi", i, k), lo.s_hi(i, k), 1.0)
                # affine temperature response: T_{k+1} depends on u_{0..k}
                for j in range(k + 1):
                    coef = (fit.a ** (k - j)) * fit.c * bp.p_hvac_kw
                    add(lo.row("comf_lo", i, k), lo.u(i, j), coef)
                    add(lo.row("comf_hi", i, k), lo.u(i, j), coef)
                add(lo.row("comf_lo", i, k), lo.s_lo(i, k), 1.0)
                add(lo.row("comf_hi", i, k), lo.s_hi(i, k), -1.0)
                # SOC after step k is the running battery-energy sum
                for j in range(k + 1):
                    add(lo.row("soc", i, k), lo.p(i, j), dt / bp.e_cap_kwh)
                add(lo.row("demand", 0, k), lo.u(i, k), -bp.p_hvac_kw * dt)
                add(lo.row("demand", 0, k), lo.p(i, k), -dt)
            add(lo.row("demand", 0, k), lo.y(k), 1.0)

        self.a_mat = sp.csc_matrix(
            (vals, (rows, cols)), shape=(lo.n_rows, lo.n_vars)
        )

        diag = np.zeros(lo.n_vars)
        for k in range(h):
            for i in range(n):
                diag[lo.u(i, k)] = 2.0 * self.cfg.w_ctrl
                diag[lo.p(i, k)] = 2.0 * self.cfg.w_batt
                diag[lo.s_lo(i, k)] = 2.0 * self.cfg.w_slack
                diag[lo.s_hi(i, k)] = 2.0 * self.cfg.w_slack
            diag[lo.y(k)] = 2.0 * self.cfg.w_track
        self.p_mat = sp.diags(diag, format="csc")

        # static bound pieces
        self.l_static = np.full(lo.n_rows, -np.inf)
        self.u_static = np.full(lo.n_rows, np.inf)
        for k in range(h):
            for i, bp in enumerate(self.buildings):
                r = lo.row("box_u", i, k)
                self.l_static[r], self.u_static[r] = 0.0, 1.0
                r = lo.row("box_p", i, k)
                self.l_static[r], self.u_static[r] = bp.p_min_kw, bp.p_max_kw
                self.l_static[lo.row("box_slo", i, k)] = 0.0
                self.l_static[lo.row("box_shi", i, k)] = 0.0

    def build(self, states: list[BuildingState], forecast: MpcForecast,
              reference: np.ndarray) -> QuadraticProgram:
        """Fill state- and forecast-dependent bounds and gradient."""
        lo = self.layout
        n, h = lo.n, lo.h
        if forecast.t_out.shape != (h, n):
            raise ForecastTooShortError(
                f"t_out forecast shape {forecast.t_out.shape}, expected {(h, n)}"
            )
        reference = np.asarray(reference, dtype=float)
        if reference.shape[0] < h:
            raise ForecastTooShortError(f"reference covers {reference.shape[0]} < {h} steps")
        if len(states) != n:
            raise ValueError(f"{len(states)} states for {n} buildings")

        l = self.l_static.copy()
        u = self.u_static.copy()
        q = np.zeros(lo.n_vars)

        for i, (bp, fit) in enumerate(zip(self.buildings, self.fits)):
            # free thermal response (u = 0) accumulated over the horizon
            free = states[i].t_in_c
            for k in range(h):
                free = fit.a * free + fit.b * forecast.t_out[k, i] + fit.d
                r_lo = lo.row("comf_lo", i, k)
                r_hi = lo.row("comf_hi", i, k)
                l[r_lo] = bp.t_min_c - free
                u[r_hi] = bp.t_max_c - free
                r_soc = lo.row("soc", i, k)
                l[r_soc] = bp.soc_min - states[i].soc
                u[r_soc] = bp.soc_max - states[i].soc

        for k in range(h):
            r_d = lo.row("demand", 0, k)
            l[r_d] = forecast.uncontrollable[k]
            u[r_d] = forecast.uncontrollable[k]
            q[lo.y(k)] = -2.0 * self.cfg.w_track * reference[k]
            for i in range(n):
                q[lo.s_lo(i, k)] = self.cfg.w_comfort
                q[lo.s_hi(i, k)] = self.cfg.w_comfort

        return QuadraticProgram(p_mat=self.p_mat, q=q, a_mat=self.a_mat, l=l, u=u)

    def shift_warm_start(self, x: np.ndarray, y_dual: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Advance a solution by one step (receding horizon), repeating the
        final block so shapes are preserved."""
        lo = self.layout
        x2 = np.empty_like(x)
        x2[: -lo.block] = x[lo.block:]
        x2[-lo.block:] = x[-lo.block:]
        y2 = np.empty_like(y_dual)
        for name, per_step in lo.groups:
            start = lo.group_start[name]
            stop = start + per_step * lo.h
            seg = y_dual[start:stop]
            y2[start:stop - per_step] = seg[per_step:]
            y2[stop - per_step:stop] = seg[-per_step:]
        return x2, y2


def assemble_mpc_qp(states, fits, forecast: MpcForecast, reference, cfg: MpcConfig,
                    buildings, dt: float = 1.0) -> QuadraticProgram:
    """One-shot QP assembly (tests and one-off solves; the controller keeps
    an MpcProblem alive instead)."""
    problem = MpcProblem(list(buildings), list(fits), cfg, dt)
    return problem.build(list(states), forecast, np.asarray(reference, dtype=float))


@dataclass
class MpcDecision:
    """Solved horizon plan (first step is applied)."""

    u: np.ndarray        # (H, N)
    p_batt: np.ndarray   # (H, N)
    s_lo: np.ndarray     # (H, N)
    s_hi: np.ndarray     # (H, N)
    y: np.ndarray        # (H,)
    tracking_residual: np.ndarray  # (H,) y_k - r_k
    status: SolveStatus
    iterations: int

    @property
    def first_actions(self) -> list[Action]:
        return [Action(u=float(self.u[0, i]), p_batt_kw=float(self.p_batt[0, i]))
                for i in range(self.u.shape[1])]


def _decision_from_solution(problem: MpcProblem, sol: QpSolution,
                            reference: np.ndarray) -> MpcDecision:
    lo = problem.layout
    h, n = lo.h, lo.n
    u = np.empty((h, n))
    p = np.empty((h, n))
    s_lo = np.empty((h, n))
    s_hi = np.empty((h, n))
    y = np.empty(h)
    for k in range(h):
        y[k] = sol.x[lo.y(k)]
        for i in range(n):
            bp = problem.buildings[i]
            # iterates satisfy bounds only to solver tolerance; clamp exactly
            u[k, i] = min(max(sol.x[lo.u(i, k)], 0.0), 1.0)
            p[k, i] = min(max(sol.x[lo.p(i, k)], bp.p_min_kw), bp.p_max_kw)
            s_lo[k, i] = max(sol.x[lo.s_lo(i, k)], 0.0)
            s_hi[k, i] = max(sol.x[lo.s_hi(i, k)], 0.0)
    return MpcDecision(
        u=u, p_batt=p, s_lo=s_lo, s_hi=s_hi, y=y,
        tracking_residual=y - reference[:h],
        status=sol.status, iterations=sol.iterations,
    )


class MpcController(Controller):
    """Receding-horizon control with warm starting and an RBC fallback.

    The fallback's thermostat latches are advanced every step so a solver
    failure can be covered seamlessly mid-episode.
    """

    def __init__(self, fits: list[ThermalFit], cfg: MpcConfig | None = None,
                 solver_settings: SolverSettings | None = None,
                 fallback_cfg: RbcConfig | None = None):
        self.fits = list(fits)
        self.cfg = cfg if cfg is not None else MpcConfig()
        self.solver_settings = solver_settings if solver_settings is not None else SolverSettings()
        self._fallback = RbcController(fallback_cfg)
        self._problem: MpcProblem | None = None
        self._scenario = None
        self._reference = None
        self._warm: tuple[np.ndarray, np.ndarray] | None = None
        self._factor_cache: dict = {}
        self.fallback_steps: list[int] = []
        self.last_decision: MpcDecision | None = None

    def reset(self, scenario, reference, seed: int) -> None:
        if len(scenario.buildings) != len(self.fits):
            raise ValueError("fit count does not match the scenario roster")
        self._scenario = scenario
        self._reference = reference
        self._problem = MpcProblem(list(scenario.buildings), self.fits, self.cfg, scenario.dt)
        self._warm = None
        self._factor_cache = {}
        self.fallback_steps = []
        self.last_decision = None
        self._fallback.reset(scenario, reference, seed)

    def _forecast_window(self, k: int) -> tuple[MpcForecast, np.ndarray]:
        sc = self._scenario
        h = self.cfg.horizon
        idx = np.minimum(np.arange(k, k + h), sc.n_steps - 1)  # hold last value past the end
        t_out = sc.t_out[idx]
        unc = sc.uncontrollable_load()[idx].sum(axis=1)
        r = np.asarray(self._reference.r, dtype=float)[idx]
        return MpcForecast(t_out=t_out, uncontrollable=unc), r

    def act(self, view: StepView) -> list[Action]:
        fallback_actions = self._fallback.act(view)  # keeps latches warm
        forecast, r_window = self._forecast_window(view.k)
        qp = self._problem.build(list(view.states), forecast, r_window)
        sol = solve_qp(qp, self.solver_settings, warm_start=self._warm,
                       factor_cache=self._factor_cache)
        if sol.status is not SolveStatus.SOLVED:
            self.fallback_steps.append(view.k)
            self._warm = None
            return fallback_actions
        self._warm = self._problem.shift_warm_start(sol.x, sol.z_dual)
        self.last_decision = _decision_from_solution(self._problem, sol, r_window)
        return self.last_decision.first_actions
