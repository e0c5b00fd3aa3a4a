"""End-to-end experiment through the pipeline used by the CLI.

Writes a config, runs scenario prep -> baseline -> reference -> training
-> frozen evaluation -> metrics -> summary for a reduced district, then
re-renders the report. Expect a few minutes of CPU for the RL training.

The equivalent CLI invocation:
    districtflex run demo_config.json --artifacts ./artifacts
    districtflex report ./artifacts/demo
"""

import json
import tempfile
from pathlib import Path

from districtflex.experiment import report, run_experiment

config = {
    "name": "demo",
    "scenario": {
        "source": "synthetic",
        "n_buildings": 8,
        "train_days": 10,
        "test_days": 7,
        "seed": 1,
    },
    "controllers": ["rbc", "mpc", "sac", "hybrid"],
    "seeds": [0],
    "evaluate_train": False,
    "mpc": {"horizon": 12},
    "rl": {"sac_episodes": 40, "sac_warmup_steps": 240},
}

workdir = Path(tempfile.mkdtemp(prefix="districtflex_demo_"))
config_path = workdir / "demo_config.json"
config_path.write_text(json.dumps(config, indent=1))
print(f"config written to {config_path}")

artifact_dir = run_experiment(config_path, artifact_root=workdir / "artifacts")
print(f"artifacts in {artifact_dir}:")
for path in sorted(artifact_dir.rglob("*")):
    if path.is_file():
        print(f"  {path.relative_to(artifact_dir)}")

print("\n" + report(artifact_dir))
