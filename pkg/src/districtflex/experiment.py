"""Experiment runner: scenario prep, training, evaluation, reports.

Config files are strict JSON (unknown keys are rejected so typos fail
loudly). The pipeline builds train/test scenarios, computes the baseline
and the reference level from the TRAIN month, trains the learners on
train, evaluates every requested controller frozen on test, and emits
traces, per-controller metric documents, a combined summary and tidy
plot-data CSVs. Everything except the run-metadata timestamp is a pure
function of (config, seeds).

Config schema (all sections optional unless marked):

    name                  str, artifact subdirectory name
    scenario (required)   {"source": "synthetic", "n_buildings": int,
                           "train_days": int, "test_days": int, "seed": int,
                           "t_out_mean_c": float, "test_t_out_shift_c": float}
                          or {"source": "csv", "train_dir": str, "test_dir": str}
    controllers (required) subset of ["rbc", "mpc", "sac", "mappo", "hybrid"]
    seeds                 list of ints, default [0]
    evaluate_train        bool, default true (adds train tracking columns)
    rbc / mpc / hybrid / rl / solver
                          keyword overrides for the matching config dataclass
    sac_checkpoint        str, policies dir for hybrid without training sac
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .controllers.hybrid import HybridConfig, HybridController
from .controllers.mpc import MpcConfig, MpcController, fit_scenario_models
from .controllers.rbc import RbcConfig, RbcController
from .metrics import SUMMARY_COLUMNS, MetricReport, metric_report
from .qp import SolverSettings
from .rl.training import (
    RlConfig,
    SacController,
    MappoController,
    load_policies,
    save_policies,
    train,
    write_curves_csv,
)
from .scenario import (
    ReferenceSignal,
    Scenario,
    build_reference,
    compute_baseline,
    generate_synthetic_scenario,
    load_scenario,
)
from .simulation import DistrictTrace, run_episode

__all__ = [
    "run_experiment",
    "report",
    "load_config",
    "write_trace_csv",
    "read_trace_csv",
    "ConfigParseError",
    "UnknownControllerError",
    "MissingDependencyError",
    "MissingArtifactError",
]

KNOWN_CONTROLLERS = ["rbc", "mpc", "sac", "mappo", "hybrid"]
ARTIFACT_ENV_VAR = "DISTRICTFLEX_ARTIFACTS"

_TOP_KEYS = {"name", "scenario", "controllers", "seeds", "evaluate_train",
             "rbc", "mpc", "hybrid", "rl", "solver", "sac_checkpoint",
             "identify_noise_std_k"}
_SYNTH_KEYS = {"source", "n_buildings", "train_days", "test_days", "seed",
               "t_out_mean_c", "test_t_out_shift_c"}
_CSV_KEYS = {"source", "train_dir", "test_dir"}


class ConfigParseError(ValueError):
    """Bad config file; message carries the path and offending key."""


class UnknownControllerError(ValueError):
    """Controller name outside the supported set."""


class MissingDependencyError(ValueError):
    """A requested controller needs an artifact that is not available."""


class MissingArtifactError(FileNotFoundError):
    """The report phase could not find or parse an expected artifact."""


def _check_keys(doc: dict, allowed: set, where: str, path: str) -> None:
    for key in doc:
        if key not in allowed:
            raise ConfigParseError(f"{path}: unknown key '{key}' in {where}")


@dataclass
class ExperimentConfig:
    name: str
    scenario: dict
    controllers: list[str]
    seeds: list[int]
    evaluate_train: bool
    rbc: RbcConfig
    mpc: MpcConfig
    hybrid: HybridConfig
    rl: RlConfig
    solver: SolverSettings
    sac_checkpoint: str | None
    identify_noise_std_k: float
    raw: dict


def load_config(config_path) -> ExperimentConfig:
    path = str(config_path)
    try:
        with open(config_path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigParseError(f"{path}: cannot read config ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(doc, path)


def parse_config(doc: dict, path: str = "<config>") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigParseError(f"{path}: top level must be an object")
    _check_keys(doc, _TOP_KEYS, "top level", path)

    if "scenario" not in doc:
        raise ConfigParseError(f"{path}: missing key 'scenario'")
    scenario = doc["scenario"]
    source = scenario.get("source")
    if source == "synthetic":
        _check_keys(scenario, _SYNTH_KEYS, "scenario", path)
    elif source == "csv":
        _check_keys(scenario, _CSV_KEYS, "scenario", path)
        for key in ("train_dir", "test_dir"):
            if key not in scenario:
                raise ConfigParseError(f"{path}: missing key 'scenario.{key}'")
    else:
        raise ConfigParseError(f"{path}: scenario.source must be 'synthetic' or 'csv'")

    if "controllers" not in doc or not doc["controllers"]:
        raise ConfigParseError(f"{path}: missing key 'controllers'")
    controllers = list(doc["controllers"])
    for c in controllers:
        if c not in KNOWN_CONTROLLERS:
            raise UnknownControllerError(f"unknown controller '{c}' (known: {KNOWN_CONTROLLERS})")

    def build(cls, key):
        sub = doc.get(key, {})
        try:
            return cls(**sub)
        except TypeError as exc:
            raise ConfigParseError(f"{path}: bad key in '{key}' section ({exc})") from exc
        except ValueError as exc:
            raise ConfigParseError(f"{path}: bad value in '{key}' section ({exc})") from exc

    rl_doc = dict(doc.get("rl", {}))
    if "hidden" in rl_doc:
        rl_doc["hidden"] = tuple(rl_doc["hidden"])
    try:
        rl_cfg = RlConfig(**rl_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(f"{path}: bad 'rl' section ({exc})") from exc

    if "hybrid" in controllers and "sac" not in controllers and not doc.get("sac_checkpoint"):
        raise MissingDependencyError(
            "hybrid needs SAC policies: request 'sac' too or set 'sac_checkpoint'"
        )

    return ExperimentConfig(
        name=str(doc.get("name", "experiment")),
        scenario=scenario,
        controllers=controllers,
        seeds=[int(s) for s in doc.get("seeds", [0])],
        evaluate_train=bool(doc.get("evaluate_train", True)),
        rbc=build(RbcConfig, "rbc"),
        mpc=build(MpcConfig, "mpc"),
        hybrid=build(HybridConfig, "hybrid"),
        rl=rl_cfg,
        solver=build(SolverSettings, "solver"),
        sac_checkpoint=doc.get("sac_checkpoint"),
        identify_noise_std_k=float(doc.get("identify_noise_std_k", 0.05)),
        raw=doc,
    )


def _build_scenarios(cfg: ExperimentConfig) -> tuple[Scenario, Scenario]:
    sc = cfg.scenario
    if sc["source"] == "csv":
        train_dir = Path(sc["train_dir"])
        test_dir = Path(sc["test_dir"])
        train = load_scenario(train_dir / "meta.csv", train_dir, label="train")
        test = load_scenario(test_dir / "meta.csv", test_dir, label="test")
        return train, test
    n = int(sc.get("n_buildings", 25))
    seed = int(sc.get("seed", 1))
    train = generate_synthetic_scenario(
        n, int(sc.get("train_days", 30)), seed,
        t_out_mean_c=float(sc.get("t_out_mean_c", -5.0)),
        label="train", start_iso="2021-01-01T00:00:00",
    )
    test = generate_synthetic_scenario(
        n, int(sc.get("test_days", 28)), seed + 10_007,
        t_out_mean_c=float(sc.get("t_out_mean_c", -5.0)),
        t_out_shift_c=float(sc.get("test_t_out_shift_c", -3.5)),
        buildings=train.buildings,
        label="test", start_iso="2021-02-01T00:00:00",
    )
    return train, test


def write_trace_csv(trace: DistrictTrace, buildings_path, district_path) -> None:
    """Two tidy files: a per-(step, building) table and a district table.
    Floats use repr() so re-ingestion is lossless."""
    def f(v) -> str:
        return repr(float(v))

    with open(buildings_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,building_id,hour,t_in_c,soc,u,p_batt_kw,y_kwh,t_out_c,base_load_kwh,pv_kwh\n")
        for k in range(trace.n_steps):
            for i, bid in enumerate(trace.building_ids):
                fh.write(
                    f"{k},{bid},{int(trace.hour[k])},{f(trace.t_in[k, i])},{f(trace.soc[k, i])},"
                    f"{f(trace.u[k, i])},{f(trace.p_batt[k, i])},{f(trace.y[k, i])},"
                    f"{f(trace.t_out[k, i])},{f(trace.base_load[k, i])},{f(trace.pv[k, i])}\n"
                )
    district_battery = trace.p_batt_district
    with open(district_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,hour,dt_h,y_total_kwh,r_kwh,p_batt_district_kw\n")
        for k in range(trace.n_steps):
            fh.write(
                f"{k},{int(trace.hour[k])},{f(trace.dt)},{f(trace.y_total[k])},{f(trace.r[k])},"
                f"{f(district_battery[k])}\n"
            )


def read_trace_csv(buildings_path, district_path) -> DistrictTrace:
    """Inverse of write_trace_csv (bit-exact for repr-written floats)."""
    import csv

    with open(district_path, newline="", encoding="utf-8") as fh:
        drows = list(csv.DictReader(fh))
    k_steps = len(drows)
    with open(buildings_path, newline="", encoding="utf-8") as fh:
        brows = list(csv.DictReader(fh))
    ids = sorted({int(r["building_id"]) for r in brows})
    index = {bid: i for i, bid in enumerate(ids)}
    n = len(ids)

    arrays = {name: np.empty((k_steps, n)) for name in
              ("t_in", "soc", "u", "p_batt", "y", "t_out", "base_load", "pv")}
    col = {"t_in": "t_in_c", "soc": "soc", "u": "u", "p_batt": "p_batt_kw", "y": "y_kwh",
           "t_out": "t_out_c", "base_load": "base_load_kwh", "pv": "pv_kwh"}
    for r in brows:
        k, i = int(r["step"]), index[int(r["building_id"])]
        for name, c in col.items():
            arrays[name][k, i] = float(r[c])
    return DistrictTrace(
        building_ids=ids,
        dt=float(drows[0]["dt_h"]) if drows else 1.0,
        hour=np.array([int(r["hour"]) for r in drows], dtype=np.int64),
        y_total=np.array([float(r["y_total_kwh"]) for r in drows]),
        r=np.array([float(r["r_kwh"]) for r in drows]),
        **arrays,
    )


class _ControllerFactory:
    """Builds controllers per seed, training/fitting lazily and caching what
    is shared (thermal fits are deterministic, SAC is reused by hybrid)."""

    def __init__(self, cfg: ExperimentConfig, train_sc: Scenario, test_sc: Scenario,
                 baseline_train: DistrictTrace, ref_train: ReferenceSignal, out: Path):
        self.cfg = cfg
        self.train_sc = train_sc
        self.test_sc = test_sc
        self.baseline_train = baseline_train
        self.ref_train = ref_train
        self.out = out
        self._fits: dict[int, list] = {}
        self._sac_results: dict[int, object] = {}
        self._mappo_results: dict[int, object] = {}

    def _thermal_fits(self, seed: int):
        # per-seed sensor noise on the identification data, like the paper's
        # per-seed training stochasticity
        if seed not in self._fits:
            rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB17D]))
            self._fits[seed] = fit_scenario_models(
                self.baseline_train, self.train_sc,
                noise_std_k=self.cfg.identify_noise_std_k, rng=rng,
            )
        return self._fits[seed]

    def _train_and_save(self, algo: str, seed: int, cache: dict):
        if seed not in cache:
            result = train(self.train_sc, algo, self.cfg.rl, seed, reference=self.ref_train)
            seed_dir = self.out / f"seed_{seed}"
            save_policies(seed_dir / "checkpoints" / algo, result)
            (seed_dir / "curves").mkdir(parents=True, exist_ok=True)
            write_curves_csv(seed_dir / "curves" / f"{algo}.csv", result.curves)
            cache[seed] = result
        return cache[seed]

    def sac_result(self, seed: int):
        return self._train_and_save("sac", seed, self._sac_results)

    def mappo_result(self, seed: int):
        return self._train_and_save("mappo", seed, self._mappo_results)

    def build(self, name: str, seed: int):
        if name == "rbc":
            return RbcController(self.cfg.rbc)
        if name == "mpc":
            return MpcController(self._thermal_fits(seed), self.cfg.mpc, self.cfg.solver,
                                 fallback_cfg=self.cfg.rbc)
        if name == "sac":
            result = self.sac_result(seed)
            return SacController(result.actors, result.normalizer)
        if name == "mappo":
            result = self.mappo_result(seed)
            return MappoController(result.actors, result.normalizer)
        if name == "hybrid":
            if "sac" in self.cfg.controllers:
                result = self.sac_result(seed)
                actors, normalizer = result.actors, result.normalizer
            elif self.cfg.sac_checkpoint:
                algo, actors, normalizer, _ = load_policies(self.cfg.sac_checkpoint)
                if algo != "sac":
                    raise MissingDependencyError(
                        f"checkpoint {self.cfg.sac_checkpoint} holds '{algo}', expected 'sac'"
                    )
            else:
                raise MissingDependencyError("hybrid requested without SAC policies")
            return HybridController(actors, normalizer, self.cfg.hybrid, self.cfg.solver)
        raise UnknownControllerError(f"unknown controller '{name}'")


def run_experiment(config_path, artifact_root=None) -> Path:
    """Execute the full pipeline; returns the artifact directory."""
    cfg = load_config(config_path) if not isinstance(config_path, ExperimentConfig) else config_path

    root = Path(
        artifact_root
        if artifact_root is not None
        else os.environ.get(ARTIFACT_ENV_VAR, "artifacts")
    )
    out = root / cfg.name
    out.mkdir(parents=True, exist_ok=True)

    train_sc, test_sc = _build_scenarios(cfg)
    baseline_train = compute_baseline(
        train_sc, hysteresis_low=cfg.rbc.hysteresis_low, hysteresis_high=cfg.rbc.hysteresis_high
    )
    ref_train = build_reference(baseline_train)
    level = float(ref_train.r[0])
    ref_test = ReferenceSignal(r=np.full(test_sc.n_steps, level))
    bands = [(b.t_min_c, b.t_max_c) for b in test_sc.buildings]

    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg.raw, fh, indent=1, sort_keys=True)
    with open(out / "run_meta.json", "w", encoding="utf-8") as fh:
        json.dump({"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
                   "reference_level_kwh": level}, fh, indent=1, sort_keys=True)

    factory = _ControllerFactory(cfg, train_sc, test_sc, baseline_train, ref_train, out)
    reports: dict[tuple[str, int], MetricReport] = {}
    test_traces: dict[tuple[str, int], DistrictTrace] = {}
    rbc_traces: dict[int, DistrictTrace] = {}

    for seed in cfg.seeds:
        seed_dir = out / f"seed_{seed}"
        (seed_dir / "traces").mkdir(parents=True, exist_ok=True)
        (seed_dir / "metrics").mkdir(parents=True, exist_ok=True)

        # RBC is always evaluated: it anchors spatial variability
        rbc_ctrl = factory.build("rbc", seed)
        rbc_traces[seed] = run_episode(test_sc, rbc_ctrl, ref_test, seed)

        for name in cfg.controllers:
            controller = factory.build(name, seed)
            trace = rbc_traces[seed] if name == "rbc" else run_episode(test_sc, controller, ref_test, seed)
            trace.check_decomposition()
            test_traces[(name, seed)] = trace

            train_trace = None
            if cfg.evaluate_train:
                train_ctrl = factory.build(name, seed)
                train_trace = run_episode(train_sc, train_ctrl, ref_train, seed)

            rep = metric_report(
                name, trace, ref_test, bands,
                rbc_trace=None if name == "rbc" else rbc_traces[seed],
                train_trace=train_trace, train_reference=ref_train,
            )
            reports[(name, seed)] = rep

            write_trace_csv(trace, seed_dir / "traces" / f"{name}_buildings.csv",
                            seed_dir / "traces" / f"{name}_district.csv")
            with open(seed_dir / "metrics" / f"{name}.json", "w", encoding="utf-8") as fh:
                fh.write(rep.to_json())

    _write_summary(out, cfg, reports)
    _write_plotdata(out, cfg, test_traces, rbc_traces, reports)
    return out


def _write_summary(out: Path, cfg: ExperimentConfig, reports: dict) -> None:
    with open(out / "summary.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for name in cfg.controllers:
            for seed in cfg.seeds:
                fh.write(",".join(reports[(name, seed)].summary_row(seed)) + "\n")
    with open(out / "summary.md", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_summary_table(cfg.controllers, cfg.seeds, reports))


def _fmt(v, width=9):
    return f"{v:{width}.2f}" if v is not None else " " * (width - 2) + "--"


def render_summary_table(controllers, seeds, reports) -> str:
    """Markdown table with the paper-style column set; per-seed means,
    best value per column flagged with *."""
    rows = []
    for name in controllers:
        per = [reports[(name, s)] for s in seeds]
        def mean_of(get):
            vals = [get(r) for r in per]
            return None if any(v is None for v in vals) else float(np.mean(vals))
        rows.append({
            "controller": name,
            "nmbe_train": mean_of(lambda r: r.nmbe_train_pct),
            "cvrmse_train": mean_of(lambda r: r.cvrmse_train_pct),
            "nmbe_test": mean_of(lambda r: r.nmbe_pct),
            "cvrmse_test": mean_of(lambda r: r.cvrmse_pct),
            "exceed": mean_of(lambda r: r.comfort.mean_exceedance_pct),
            "kelvin_hours": mean_of(lambda r: r.comfort.mean_kelvin_hours),
            "sv_med": mean_of(lambda r: r.sv_med_kwh),
        })

    def best(key, absolute=False):
        vals = [(abs(r[key]) if absolute else r[key]) for r in rows if r[key] is not None]
        return min(vals) if vals else None

    best_marks = {
        "nmbe_train": best("nmbe_train", absolute=True),
        "cvrmse_train": best("cvrmse_train"),
        "nmbe_test": best("nmbe_test", absolute=True),
        "cvrmse_test": best("cvrmse_test"),
        "exceed": best("exceed"),
        "kelvin_hours": best("kelvin_hours"),
        "sv_med": best("sv_med"),
    }

    lines = [
        "| Controller | NMBE tr [%] | CVRMSE tr [%] | NMBE te [%] | CVRMSE te [%] | Exceed. [%] | K.h | SV_med [kWh] |",
        "|---|---|---|---|---|---|---|---|",
    ]
    for r in rows:
        cells = [r["controller"]]
        for key, absolute in (("nmbe_train", True), ("cvrmse_train", False),
                              ("nmbe_test", True), ("cvrmse_test", False),
                              ("exceed", False), ("kelvin_hours", False), ("sv_med", False)):
            v = r[key]
            if v is None:
                cells.append("--")
            else:
                shown = f"{v:.2f}"
                probe = abs(v) if absolute else v
                if best_marks[key] is not None and abs(probe - best_marks[key]) < 1e-12:
                    shown += "*"
                cells.append(shown)
        lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
    lines.append("`*` = best per column (|NMBE| for bias columns). Seeds averaged: "
                 + ", ".join(str(s) for s in seeds))
    return "\n".join(lines) + "\n"


def _write_plotdata(out: Path, cfg: ExperimentConfig, test_traces, rbc_traces, reports) -> None:
    plot = out / "plotdata"
    plot.mkdir(exist_ok=True)
    seed0 = cfg.seeds[0]

    with open(plot / "district_comparison.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("seed,controller,step,y_total_kwh,r_kwh\n")
        for name in cfg.controllers:
            for seed in cfg.seeds:
                tr = test_traces[(name, seed)]
                for k in range(tr.n_steps):
                    fh.write(f"{seed},{name},{k},{float(tr.y_total[k])!r},{float(tr.r[k])!r}\n")

    with open(plot / "exceedance_distribution.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("seed,controller,building_id,exceedance_pct,kelvin_hours\n")
        for name in cfg.controllers:
            for seed in cfg.seeds:
                rep = reports[(name, seed)]
                tr = test_traces[(name, seed)]
                for i, bid in enumerate(tr.building_ids):
                    fh.write(f"{seed},{name},{bid},{float(rep.comfort.exceedance_pct[i])!r},"
                             f"{float(rep.comfort.kelvin_hours[i])!r}\n")

    with open(plot / "per_building_diagnostics.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("controller,building_id,step,y_kwh,t_in_c\n")
        for name in cfg.controllers:
            tr = test_traces[(name, seed0)]
            for i, bid in enumerate(tr.building_ids):
                for k in range(tr.n_steps):
                    fh.write(f"{name},{bid},{k},{float(tr.y[k, i])!r},{float(tr.t_in[k, i])!r}\n")

    with open(plot / "delta_y_heatmap.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("controller,building_id,step,delta_y_kwh\n")
        for name in cfg.controllers:
            if name == "rbc":
                continue
            tr = test_traces[(name, seed0)]
            delta = tr.y - rbc_traces[seed0].y
            for i, bid in enumerate(tr.building_ids):
                for k in range(tr.n_steps):
                    fh.write(f"{name},{bid},{k},{float(delta[k, i])!r}\n")

    with open(plot / "hourly_sv_heatmap.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("seed,controller,step,sigma_kwh\n")
        for name in cfg.controllers:
            if name == "rbc":
                continue
            for seed in cfg.seeds:
                rep = reports[(name, seed)]
                if rep.sv_series is None:
                    continue
                for k, v in enumerate(rep.sv_series):
                    fh.write(f"{seed},{name},{k},{float(v)!r}\n")


def report(artifact_dir) -> str:
    """Re-render the summary tables from stored metric documents."""
    out = Path(artifact_dir)
    if not out.is_dir():
        raise MissingArtifactError(f"no artifact directory at {out}")
    config_path = out / "config.json"
    if not config_path.exists():
        raise MissingArtifactError(f"missing {config_path}")
    with open(config_path, encoding="utf-8") as fh:
        cfg_doc = json.load(fh)
    controllers = cfg_doc.get("controllers", [])
    seeds = [int(s) for s in cfg_doc.get("seeds", [0])]

    reports = {}
    for name in controllers:
        for seed in seeds:
            path = out / f"seed_{seed}" / "metrics" / f"{name}.json"
            if not path.exists():
                raise MissingArtifactError(f"missing {path}")
            try:
                with open(path, encoding="utf-8") as fh:
                    doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise MissingArtifactError(f"corrupted metrics file {path}: {exc}") from exc
            reports[(name, seed)] = _report_from_json(doc)

    table = render_summary_table(controllers, seeds, reports)
    with open(out / "summary.md", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table)
    return table


def _report_from_json(doc: dict) -> MetricReport:
    from .metrics import ComfortReport

    comfort = ComfortReport(
        exceedance_hours=np.asarray(doc["exceedance_hours"], dtype=float),
        exceedance_pct=np.asarray(doc["exceedance_pct"], dtype=float),
        mean_exceedance_pct=float(doc["mean_exceedance_pct"]),
        kelvin_hours=np.asarray(doc["kelvin_hours"], dtype=float),
        mean_kelvin_hours=float(doc["mean_kelvin_hours"]),
    )
    return MetricReport(
        controller=doc["controller"],
        nmbe_pct=float(doc["nmbe_pct"]),
        cvrmse_pct=float(doc["cvrmse_pct"]),
        comfort=comfort,
        sv_series=None if doc.get("sv_series") is None else np.asarray(doc["sv_series"]),
        sv_med_kwh=None if doc.get("sv_med_kwh") is None else float(doc["sv_med_kwh"]),
        nmbe_train_pct=None if doc.get("nmbe_train_pct") is None else float(doc["nmbe_train_pct"]),
        cvrmse_train_pct=None if doc.get("cvrmse_train_pct") is None else float(doc["cvrmse_train_pct"]),
    )
