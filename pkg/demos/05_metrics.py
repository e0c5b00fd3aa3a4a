"""The evaluation metrics on a worked example.

Tracking (NMBE, CVRMSE), comfort (exceedance hours/percent, Kelvin-hours)
and spatial variability against the RBC anchor, plus the assembled report
document.
"""

import numpy as np

from districtflex import (
    build_reference,
    comfort_metrics,
    compute_baseline,
    cvrmse,
    generate_synthetic_scenario,
    metric_report,
    nmbe,
    run_episode,
    spatial_variability,
)
from districtflex.controllers.mpc import MpcController, fit_scenario_models
from districtflex.controllers.rbc import RbcController

scenario = generate_synthetic_scenario(n_buildings=6, days=4, seed=8)
baseline = compute_baseline(scenario)
reference = build_reference(baseline)
bands = [(b.t_min_c, b.t_max_c) for b in scenario.buildings]

trace_rbc = run_episode(scenario, RbcController(), reference, seed=0)
mpc = MpcController(fit_scenario_models(baseline, scenario))
trace_mpc = run_episode(scenario, mpc, reference, seed=0)

print(f"NMBE   rbc {nmbe(trace_rbc.y_total, reference.r):+7.2f}%   "
      f"mpc {nmbe(trace_mpc.y_total, reference.r):+7.2f}%")
print(f"CVRMSE rbc {cvrmse(trace_rbc.y_total, reference.r):7.2f}%   "
      f"mpc {cvrmse(trace_mpc.y_total, reference.r):7.2f}%")

comfort = comfort_metrics(trace_mpc, bands)
print(f"\nMPC comfort: mean exceedance {comfort.mean_exceedance_pct:.2f}%, "
      f"mean {comfort.mean_kelvin_hours:.2f} K.h")
print(f"per-building exceedance hours: {comfort.exceedance_hours.astype(int)}")

sigma, sv_med = spatial_variability(trace_mpc, trace_rbc)
print(f"\nspatial variability vs RBC: median {sv_med:.2f} kWh "
      f"(hourly sigma spans {sigma.min():.2f} .. {sigma.max():.2f})")

report = metric_report("mpc", trace_mpc, reference, bands, rbc_trace=trace_rbc)
print("\nflat JSON document keys:", sorted(report.to_json_dict()))
