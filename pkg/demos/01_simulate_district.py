"""Simulate a synthetic winter district under the rule-based controller.

Walks through the basic objects: generate a scenario, compute the
uncontrolled baseline, build the constant reference, run a closed-loop
episode, and poke at the recorded trace.
"""

import numpy as np

from districtflex import build_reference, compute_baseline, generate_synthetic_scenario, run_episode
from districtflex.controllers.rbc import RbcController

# a 10-building district over one synthetic January week
scenario = generate_synthetic_scenario(n_buildings=10, days=7, seed=42)
print(f"scenario: N={scenario.n_buildings} buildings, K={scenario.n_steps} hourly steps")
print(f"outdoor temperature: {scenario.t_out.min():.1f} .. {scenario.t_out.max():.1f} degC")
caps = [b.e_cap_kwh for b in scenario.buildings]
print(f"battery capacities: {min(caps):.1f} .. {max(caps):.1f} kWh")

# the uncontrolled baseline still heats (thermostat), batteries idle
baseline = compute_baseline(scenario)
reference = build_reference(baseline)
print(f"\nbaseline mean district load -> reference level: {reference.r[0]:.1f} kWh/h")

# closed loop under the TOU + hysteresis rules
trace = run_episode(scenario, RbcController(), reference, seed=0)
trace.check_decomposition()

print("\nRBC episode:")
print(f"  district load: mean {trace.y_total.mean():.1f}, "
      f"min {trace.y_total.min():.1f}, max {trace.y_total.max():.1f} kWh/h")
print(f"  indoor temperatures: {trace.t_in.min():.2f} .. {trace.t_in.max():.2f} degC")
by_hour = [trace.p_batt_district[trace.hour == h].mean() for h in range(24)]
print("  mean battery power by hour (kW):")
print("  " + " ".join(f"{v:+5.1f}" for v in by_hour[:12]))
print("  " + " ".join(f"{v:+5.1f}" for v in by_hour[12:]))
print("\ncharging shows up 22:00-08:00, discharging 14:00-21:00.")
