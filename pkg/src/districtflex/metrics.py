"""Evaluation metrics: load tracking, thermal comfort, spatial variability.

Tracking is scored against the reference signal (NMBE for bias, CVRMSE
for fluctuation magnitude), comfort by exceedance counts and Kelvin-hours
per building, and spatial variability by the across-building population
standard deviation of load deviations from the RBC trace, summarized by
its median over time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .simulation import DistrictTrace, EmptyTraceError, LengthMismatchError, comfort_violation

__all__ = [
    "nmbe",
    "cvrmse",
    "comfort_metrics",
    "spatial_variability",
    "ComfortReport",
    "MetricReport",
    "metric_report",
    "ZeroReferenceMeanError",
    "RosterMismatchError",
]

SUMMARY_COLUMNS = [
    "controller", "seed",
    "nmbe_train_pct", "cvrmse_train_pct",
    "nmbe_test_pct", "cvrmse_test_pct",
    "exceedance_test_pct", "kelvin_hours_test", "sv_med_test_kwh",
]


class ZeroReferenceMeanError(ValueError):
    """Normalized tracking metrics are undefined for a zero-mean reference."""


class RosterMismatchError(ValueError):
    """Two traces cover different building rosters."""


def _tracking_inputs(y, r) -> tuple[np.ndarray, np.ndarray, float]:
    y = np.asarray(y, dtype=float).ravel()
    r = np.asarray(r, dtype=float).ravel()
    if y.shape != r.shape:
        raise LengthMismatchError(f"y has {y.shape[0]} steps, r has {r.shape[0]}")
    if y.size == 0:
        raise EmptyTraceError("tracking metrics need at least one step")
    r_mean = float(np.mean(r))
    if r_mean == 0.0:
        raise ZeroReferenceMeanError("mean reference is zero")
    return y, r, r_mean


def nmbe(y, r) -> float:
    """Signed mean tracking error as a percentage of the mean reference."""
    y, r, r_mean = _tracking_inputs(y, r)
    return 100.0 * float(np.mean(y - r)) / r_mean


def cvrmse(y, r) -> float:
    """Root-mean-square tracking error as a percentage of the mean reference."""
    y, r, r_mean = _tracking_inputs(y, r)
    return 100.0 * float(np.sqrt(np.mean((y - r) ** 2))) / r_mean


@dataclass
class ComfortReport:
    exceedance_hours: np.ndarray    # H_i, count of violated steps per building
    exceedance_pct: np.ndarray      # P_i = 100 H_i / K
    mean_exceedance_pct: float      # P-bar
    kelvin_hours: np.ndarray        # K_i = sum v * dt
    mean_kelvin_hours: float        # K-bar


def comfort_metrics(trace: DistrictTrace, bands) -> ComfortReport:
    """Per-building exceedance counts/percentages and Kelvin-hours.

    `bands` is one (t_min_c, t_max_c) pair per building. A step counts as
    exceeded when the instantaneous violation is strictly positive.
    """
    if trace.n_steps == 0:
        raise EmptyTraceError("comfort metrics need at least one step")
    bands = list(bands)
    if len(bands) != trace.n_buildings:
        raise RosterMismatchError(f"{len(bands)} bands for {trace.n_buildings} buildings")

    k_steps = trace.n_steps
    hours = np.zeros(trace.n_buildings)
    kelvin = np.zeros(trace.n_buildings)
    for i, (t_min, t_max) in enumerate(bands):
        v = np.array([comfort_violation(t, t_min, t_max) for t in trace.t_in[:, i]])
        hours[i] = int(np.count_nonzero(v > 0.0))
        kelvin[i] = float(np.sum(v) * trace.dt)
    pct = 100.0 * hours / k_steps
    return ComfortReport(
        exceedance_hours=hours,
        exceedance_pct=pct,
        mean_exceedance_pct=float(np.mean(pct)),
        kelvin_hours=kelvin,
        mean_kelvin_hours=float(np.mean(kelvin)),
    )


def spatial_variability(trace_ctrl: DistrictTrace, trace_rbc: DistrictTrace) -> tuple[np.ndarray, float]:
    """Hourly across-building dispersion of load deviations from RBC.

    Returns the sigma series (population standard deviation of
    y_i^ctrl - y_i^RBC across buildings, per step) and its median.
    """
    if trace_ctrl.building_ids != trace_rbc.building_ids:
        raise RosterMismatchError("traces cover different building rosters")
    if trace_ctrl.n_steps != trace_rbc.n_steps:
        raise LengthMismatchError(
            f"controller trace has {trace_ctrl.n_steps} steps, RBC trace {trace_rbc.n_steps}"
        )
    if trace_ctrl.n_steps == 0:
        raise EmptyTraceError("spatial variability needs at least one step")
    delta = trace_ctrl.y - trace_rbc.y
    sigma = np.std(delta, axis=1)  # population (1/N) by default
    return sigma, float(np.median(sigma))


@dataclass
class MetricReport:
    """Everything the results table needs for one controller run."""

    controller: str
    nmbe_pct: float
    cvrmse_pct: float
    comfort: ComfortReport
    sv_series: np.ndarray | None = None
    sv_med_kwh: float | None = None
    nmbe_train_pct: float | None = None
    cvrmse_train_pct: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        doc = {
            "controller": self.controller,
            "nmbe_pct": self.nmbe_pct,
            "cvrmse_pct": self.cvrmse_pct,
            "nmbe_train_pct": self.nmbe_train_pct,
            "cvrmse_train_pct": self.cvrmse_train_pct,
            "exceedance_hours": self.comfort.exceedance_hours.tolist(),
            "exceedance_pct": self.comfort.exceedance_pct.tolist(),
            "mean_exceedance_pct": self.comfort.mean_exceedance_pct,
            "kelvin_hours": self.comfort.kelvin_hours.tolist(),
            "mean_kelvin_hours": self.comfort.mean_kelvin_hours,
            "sv_series": None if self.sv_series is None else self.sv_series.tolist(),
            "sv_med_kwh": self.sv_med_kwh,
        }
        doc.update(self.extra)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=1, sort_keys=True)

    def summary_row(self, seed: int) -> list[str]:
        def fmt(v):
            return "" if v is None else repr(float(v))

        return [
            self.controller, str(seed),
            fmt(self.nmbe_train_pct), fmt(self.cvrmse_train_pct),
            fmt(self.nmbe_pct), fmt(self.cvrmse_pct),
            fmt(self.comfort.mean_exceedance_pct), fmt(self.comfort.mean_kelvin_hours),
            fmt(self.sv_med_kwh),
        ]


def metric_report(
    controller: str,
    trace: DistrictTrace,
    reference,
    bands,
    rbc_trace: DistrictTrace | None = None,
    train_trace: DistrictTrace | None = None,
    train_reference=None,
) -> MetricReport:
    """Assemble the full report for one controller on one scenario."""
    r = np.asarray(reference.r if hasattr(reference, "r") else reference, dtype=float)
    report = MetricReport(
        controller=controller,
        nmbe_pct=nmbe(trace.y_total, r),
        cvrmse_pct=cvrmse(trace.y_total, r),
        comfort=comfort_metrics(trace, bands),
    )
    if rbc_trace is not None:
        report.sv_series, report.sv_med_kwh = spatial_variability(trace, rbc_trace)
    if train_trace is not None and train_reference is not None:
        r_train = np.asarray(
            train_reference.r if hasattr(train_reference, "r") else train_reference, dtype=float
        )
        report.nmbe_train_pct = nmbe(train_trace.y_total, r_train)
        report.cvrmse_train_pct = cvrmse(train_trace.y_total, r_train)
    return report
