import numpy as np
import pytest

from districtflex.scenario import (
    InvariantViolationError,
    MissingColumnError,
    RaggedSeriesError,
    ReferenceSignal,
    build_reference,
    compute_baseline,
    generate_synthetic_scenario,
    load_scenario,
    slice_scenario,
    write_scenario,
)
from districtflex.simulation import EmptyTraceError

from conftest import make_params, make_scenario


class TestGenerator:
    def test_shapes(self):
        sc = generate_synthetic_scenario(25, 28, seed=3)
        assert sc.n_buildings == 25
        assert sc.n_steps == 28 * 24

    def test_deterministic(self):
        a = generate_synthetic_scenario(4, 2, seed=9)
        b = generate_synthetic_scenario(4, 2, seed=9)
        assert np.array_equal(a.t_out, b.t_out)
        assert np.array_equal(a.base_load, b.base_load)
        assert np.array_equal(a.pv, b.pv)
        assert a.buildings == b.buildings

    def test_single_building_single_day(self):
        sc = generate_synthetic_scenario(1, 1, seed=5)
        assert sc.n_buildings == 1 and sc.n_steps == 24

    def test_capacities_in_reported_range(self):
        sc = generate_synthetic_scenario(25, 1, seed=2)
        caps = [b.e_cap_kwh for b in sc.buildings]
        assert min(caps) >= 8.0 and max(caps) <= 24.5

    def test_disturbance_invariants(self):
        sc = generate_synthetic_scenario(10, 5, seed=4)
        assert np.all(sc.base_load >= 0.0)
        assert np.all(sc.pv >= 0.0)
        assert np.all(np.isfinite(sc.t_out))

    def test_roster_reuse_and_shift(self):
        train = generate_synthetic_scenario(5, 2, seed=1)
        test = generate_synthetic_scenario(5, 2, seed=2, buildings=train.buildings,
                                           t_out_shift_c=-2.5)
        assert test.buildings == train.buildings
        assert test.t_out.mean() < train.t_out.mean()

    def test_bad_args(self):
        with pytest.raises(ValueError):
            generate_synthetic_scenario(0, 1, seed=1)
        with pytest.raises(ValueError):
            generate_synthetic_scenario(1, 0, seed=1)


class TestCsvRoundTrip:
    def test_bit_exact_round_trip(self, tmp_path, small_scenario):
        write_scenario(small_scenario, tmp_path)
        loaded = load_scenario(tmp_path / "meta.csv", tmp_path, label=small_scenario.label)
        assert loaded.buildings == small_scenario.buildings
        assert np.array_equal(loaded.t_out, small_scenario.t_out)
        assert np.array_equal(loaded.base_load, small_scenario.base_load)
        assert np.array_equal(loaded.pv, small_scenario.pv)
        assert np.array_equal(loaded.hour, small_scenario.hour)
        assert loaded.dt == small_scenario.dt
        assert loaded.start_iso == small_scenario.start_iso

    def test_missing_column(self, tmp_path, small_scenario):
        write_scenario(small_scenario, tmp_path)
        meta = (tmp_path / "meta.csv").read_text().splitlines()
        header = meta[0].replace("bess_kwh", "capacity")
        (tmp_path / "meta.csv").write_text("\n".join([header] + meta[1:]) + "\n")
        with pytest.raises(MissingColumnError, match="bess_kwh"):
            load_scenario(tmp_path / "meta.csv", tmp_path)

    def test_ragged_series(self, tmp_path, small_scenario):
        write_scenario(small_scenario, tmp_path)
        series = (tmp_path / "b1.csv").read_text().splitlines()
        (tmp_path / "b1.csv").write_text("\n".join(series[:-10]) + "\n")
        with pytest.raises(RaggedSeriesError):
            load_scenario(tmp_path / "meta.csv", tmp_path)

    def test_invariant_violation_names_row(self, tmp_path, small_scenario):
        write_scenario(small_scenario, tmp_path)
        meta = (tmp_path / "meta.csv").read_text().splitlines()
        cols = meta[1].split(",")
        cols[2] = "0.0"  # bess_kwh
        meta[1] = ",".join(cols)
        (tmp_path / "meta.csv").write_text("\n".join(meta) + "\n")
        with pytest.raises(InvariantViolationError, match="row 2"):
            load_scenario(tmp_path / "meta.csv", tmp_path)

    def test_negative_load_rejected(self, tmp_path, small_scenario):
        write_scenario(small_scenario, tmp_path)
        series = (tmp_path / "b0.csv").read_text().splitlines()
        cols = series[1].split(",")
        cols[2] = "-1.0"
        series[1] = ",".join(cols)
        (tmp_path / "b0.csv").write_text("\n".join(series) + "\n")
        with pytest.raises(InvariantViolationError, match="base_load"):
            load_scenario(tmp_path / "meta.csv", tmp_path)


class TestBaseline:
    def test_warm_outdoors_no_heating(self):
        scenario = make_scenario(n_buildings=2, k_steps=24, t_out=30.0, base_load=1.0, pv=0.25)
        trace = compute_baseline(scenario)
        assert np.all(trace.u == 0.0)
        np.testing.assert_allclose(trace.y, scenario.base_load - scenario.pv)

    def test_zero_world(self):
        scenario = make_scenario(n_buildings=1, k_steps=12, t_out=30.0, base_load=0.0, pv=0.0)
        trace = compute_baseline(scenario)
        np.testing.assert_allclose(trace.y_total, 0.0)

    def test_battery_idle(self, small_scenario):
        trace = compute_baseline(small_scenario)
        assert np.all(trace.p_batt == 0.0)

    def test_winter_nights_heat(self):
        scenario = generate_synthetic_scenario(5, 7, seed=21)
        trace = compute_baseline(scenario)
        night = trace.y_total[np.isin(trace.hour, [0, 1, 2, 3, 4])]
        assert np.all(night > 0.0)


class TestReference:
    def test_constant_mean(self):
        scenario = make_scenario(n_buildings=1, k_steps=8, t_out=30.0, base_load=100.0)
        trace = compute_baseline(scenario)
        ref = build_reference(trace)
        np.testing.assert_allclose(ref.r, 100.0)

    def test_two_value_mean(self):
        scenario = make_scenario(n_buildings=1, k_steps=2, t_out=30.0, base_load=1.0)
        trace = compute_baseline(scenario)
        trace.y_total = np.array([80.0, 120.0])
        ref = build_reference(trace)
        np.testing.assert_allclose(ref.r, 100.0)
        assert ref.n_steps == 2

    def test_flatness_exact(self, small_scenario):
        ref = build_reference(compute_baseline(small_scenario))
        assert float(np.max(ref.r) - np.min(ref.r)) == 0.0

    def test_permutation_invariance(self, small_scenario):
        trace = compute_baseline(small_scenario)
        ref1 = build_reference(trace)
        rng = np.random.default_rng(0)
        trace.y_total = rng.permutation(trace.y_total)
        ref2 = build_reference(trace)
        assert ref1.r[0] == ref2.r[0]

    def test_empty_trace(self):
        scenario = make_scenario(k_steps=0)
        trace = compute_baseline(scenario)
        with pytest.raises(EmptyTraceError):
            build_reference(trace)

    def test_reference_invariants(self):
        with pytest.raises(InvariantViolationError):
            ReferenceSignal(r=np.array([1.0, -2.0]))
        with pytest.raises(InvariantViolationError):
            ReferenceSignal(r=np.array([np.nan]))


class TestSlice:
    def test_slice_fields(self, small_scenario):
        sub = slice_scenario(small_scenario, 24, 24)
        assert sub.n_steps == 24
        assert np.array_equal(sub.t_out, small_scenario.t_out[24:48])
        assert sub.start_iso == "2021-01-02T00:00:00"
        assert sub.buildings == small_scenario.buildings

    def test_slice_bounds(self, small_scenario):
        with pytest.raises(ValueError):
            slice_scenario(small_scenario, 60, 24 * 3)
