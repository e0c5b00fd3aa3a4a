import json

import numpy as np
import pytest

from districtflex.cli import EXIT_CONFIG, EXIT_OK, main
from districtflex.experiment import (
    ConfigParseError,
    MissingArtifactError,
    MissingDependencyError,
    UnknownControllerError,
    load_config,
    parse_config,
    read_trace_csv,
    report,
    run_experiment,
    write_trace_csv,
)
from districtflex.metrics import comfort_metrics, cvrmse, nmbe
from districtflex.scenario import generate_synthetic_scenario, load_scenario


TINY_SCENARIO = {
    "source": "synthetic", "n_buildings": 2, "train_days": 2,
    "test_days": 1, "seed": 5,
}


def tiny_config(**overrides):
    doc = {
        "name": "tiny",
        "scenario": dict(TINY_SCENARIO),
        "controllers": ["rbc"],
        "seeds": [0],
        "evaluate_train": False,
    }
    doc.update(overrides)
    return doc


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


class TestConfigParsing:
    def test_unknown_top_key(self, tmp_path):
        path = write_config(tmp_path, tiny_config(tpyo=1))
        with pytest.raises(ConfigParseError, match="tpyo"):
            load_config(path)

    def test_unknown_controller(self, tmp_path):
        path = write_config(tmp_path, tiny_config(controllers=["rbc", "dqn"]))
        with pytest.raises(UnknownControllerError, match="dqn"):
            load_config(path)

    def test_hybrid_without_sac(self, tmp_path):
        path = write_config(tmp_path, tiny_config(controllers=["hybrid"]))
        with pytest.raises(MissingDependencyError):
            load_config(path)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ConfigParseError, match="bad.json"):
            load_config(path)

    def test_missing_scenario(self):
        with pytest.raises(ConfigParseError, match="scenario"):
            parse_config({"controllers": ["rbc"]})

    def test_bad_section_value(self, tmp_path):
        path = write_config(tmp_path, tiny_config(mpc={"horizon": 0}))
        with pytest.raises(ConfigParseError, match="mpc"):
            load_config(path)

    def test_unknown_rl_key(self, tmp_path):
        path = write_config(tmp_path, tiny_config(rl={"learning": 1}))
        with pytest.raises(ConfigParseError, match="rl"):
            load_config(path)


class TestTraceCsv:
    def test_round_trip_preserves_metrics(self, tmp_path, small_scenario):
        from districtflex.controllers.rbc import RbcController
        from districtflex.scenario import ReferenceSignal, build_reference, compute_baseline
        from districtflex.simulation import run_episode

        ref = build_reference(compute_baseline(small_scenario))
        trace = run_episode(small_scenario, RbcController(), ref, seed=0)
        write_trace_csv(trace, tmp_path / "b.csv", tmp_path / "d.csv")
        loaded = read_trace_csv(tmp_path / "b.csv", tmp_path / "d.csv")

        assert nmbe(loaded.y_total, loaded.r) == nmbe(trace.y_total, trace.r)
        assert cvrmse(loaded.y_total, loaded.r) == cvrmse(trace.y_total, trace.r)
        bands = [(b.t_min_c, b.t_max_c) for b in small_scenario.buildings]
        a = comfort_metrics(trace, bands)
        b = comfort_metrics(loaded, bands)
        np.testing.assert_array_equal(a.kelvin_hours, b.kelvin_hours)
        loaded.check_decomposition()


class TestRunExperiment:
    def test_tiny_rbc_run(self, tmp_path):
        path = write_config(tmp_path, tiny_config())
        out = run_experiment(path, artifact_root=tmp_path / "artifacts")
        assert (out / "summary.csv").exists()
        assert (out / "summary.md").exists()
        assert (out / "seed_0" / "metrics" / "rbc.json").exists()
        buildings_csv = out / "seed_0" / "traces" / "rbc_buildings.csv"
        # 24 steps x 2 buildings + header
        assert len(buildings_csv.read_text().splitlines()) == 24 * 2 + 1
        summary = (out / "summary.csv").read_text().splitlines()
        assert len(summary) == 2  # header + one (controller, seed) row

    def test_mpc_run_with_train_metrics(self, tmp_path):
        doc = tiny_config(controllers=["rbc", "mpc"], evaluate_train=True)
        doc["mpc"] = {"horizon": 4}
        path = write_config(tmp_path, doc)
        out = run_experiment(path, artifact_root=tmp_path / "artifacts")
        metrics = json.loads((out / "seed_0" / "metrics" / "mpc.json").read_text())
        assert metrics["nmbe_train_pct"] is not None
        assert metrics["sv_med_kwh"] is not None  # vs RBC
        plot = out / "plotdata"
        for name in ("district_comparison.csv", "exceedance_distribution.csv",
                     "per_building_diagnostics.csv", "delta_y_heatmap.csv",
                     "hourly_sv_heatmap.csv"):
            assert (plot / name).exists()

    def test_deterministic_metric_bytes(self, tmp_path):
        doc = tiny_config(controllers=["rbc", "mpc"])
        doc["mpc"] = {"horizon": 3}
        path = write_config(tmp_path, doc)
        out1 = run_experiment(path, artifact_root=tmp_path / "a1")
        out2 = run_experiment(path, artifact_root=tmp_path / "a2")
        for rel in ("summary.csv", "summary.md", "seed_0/metrics/rbc.json",
                    "seed_0/metrics/mpc.json", "seed_0/traces/mpc_district.csv"):
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel


class TestReport:
    def test_report_renders_columns(self, tmp_path):
        path = write_config(tmp_path, tiny_config())
        out = run_experiment(path, artifact_root=tmp_path / "artifacts")
        table = report(out)
        header = table.splitlines()[0]
        for column in ("NMBE", "CVRMSE", "Exceed.", "K.h", "SV_med"):
            assert column in header
        assert "| rbc |" in table.replace("  ", " ")

    def test_missing_dir(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            report(tmp_path / "nothing")

    def test_corrupted_metrics_named(self, tmp_path):
        path = write_config(tmp_path, tiny_config())
        out = run_experiment(path, artifact_root=tmp_path / "artifacts")
        target = out / "seed_0" / "metrics" / "rbc.json"
        target.write_text("{broken")
        with pytest.raises(MissingArtifactError, match="rbc.json"):
            report(out)


class TestCli:
    def test_gen_scenario_round_trip(self, tmp_path):
        out_dir = tmp_path / "scenario"
        code = main(["gen-scenario", "--out", str(out_dir), "--buildings", "3",
                     "--days", "2", "--seed", "9"])
        assert code == EXIT_OK
        loaded = load_scenario(out_dir / "meta.csv", out_dir)
        direct = generate_synthetic_scenario(3, 2, seed=9)
        np.testing.assert_array_equal(loaded.t_out, direct.t_out)

    def test_run_and_report(self, tmp_path, capsys):
        path = write_config(tmp_path, tiny_config())
        code = main(["run", str(path), "--artifacts", str(tmp_path / "arts")])
        assert code == EXIT_OK
        assert "rbc" in capsys.readouterr().out
        code = main(["report", str(tmp_path / "arts" / "tiny")])
        assert code == EXIT_OK

    def test_bad_config_exit_code(self, tmp_path):
        path = write_config(tmp_path, tiny_config(controllers=["nope"]))
        assert main(["run", str(path)]) == EXIT_CONFIG

    def test_missing_report_dir_exit_code(self, tmp_path):
        assert main(["report", str(tmp_path / "missing")]) == EXIT_CONFIG
