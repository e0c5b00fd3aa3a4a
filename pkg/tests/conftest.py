import numpy as np
import pytest

from districtflex.simulation import BuildingParams
from districtflex.scenario import Scenario, generate_synthetic_scenario


def make_params(**overrides) -> BuildingParams:
    base = dict(
        id=0, a=0.95, b=0.045, c=0.2, d=0.1,
        p_hvac_kw=8.0, e_cap_kwh=16.0, p_min_kw=-4.0, p_max_kw=4.0,
        soc_min=0.1, soc_max=0.9, t_min_c=20.0, t_max_c=24.0,
        floor_area_m2=180.0,
    )
    base.update(overrides)
    return BuildingParams(**base)


def make_scenario(n_buildings=2, k_steps=48, t_out=-5.0, base_load=2.0, pv=0.0,
                  buildings=None, label="test") -> Scenario:
    """Constant-disturbance scenario for targeted unit tests."""
    if buildings is None:
        buildings = tuple(make_params(id=i) for i in range(n_buildings))
    n = len(buildings)
    return Scenario(
        buildings=buildings,
        t_out=np.full((k_steps, n), float(t_out)),
        base_load=np.full((k_steps, n), float(base_load)),
        pv=np.full((k_steps, n), float(pv)),
        hour=np.arange(k_steps, dtype=np.int64) % 24,
        start_iso="2021-01-01T00:00:00",
        dt=1.0,
        label=label,
    )


@pytest.fixture
def params():
    return make_params()


@pytest.fixture
def small_scenario():
    return generate_synthetic_scenario(3, 3, seed=11)
