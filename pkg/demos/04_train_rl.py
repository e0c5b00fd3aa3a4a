"""Train small SAC and MAPPO fleets on a synthetic district.

Desk-scale budgets: a few dozen day-long episodes. Prints the learning
curves' endpoints and compares frozen policies against the random policy
on held-out evaluation episodes.
"""

import numpy as np

from districtflex import build_reference, compute_baseline, generate_synthetic_scenario
from districtflex.rl.training import (
    MappoController,
    RandomController,
    RlConfig,
    SacController,
    evaluate_episode_rewards,
    train,
)

scenario = generate_synthetic_scenario(n_buildings=5, days=10, seed=3)
reference = build_reference(compute_baseline(scenario))

cfg = RlConfig(sac_episodes=40, sac_warmup_steps=240,
               mappo_updates=10, mappo_episodes_per_update=8)

print("training SAC (40 day-episodes)...")
sac = train(scenario, "sac", cfg, seed=0, reference=reference)
print(f"  reward: first 5 eps {np.mean([c['mean_reward'] for c in sac.curves[:5]]):.1f}"
      f" -> last 5 eps {np.mean([c['mean_reward'] for c in sac.curves[-5:]]):.1f}")

print("training MAPPO (80 day-episodes)...")
mappo = train(scenario, "mappo", cfg, seed=0, reference=reference)
print(f"  reward: first 10 eps {np.mean([c['mean_reward'] for c in mappo.curves[:10]]):.1f}"
      f" -> last 10 eps {np.mean([c['mean_reward'] for c in mappo.curves[-10:]]):.1f}")

print("\nfrozen evaluation on 5 held-out day episodes (mean step reward):")
for name, controller in (
    ("random", RandomController()),
    ("sac", SacController(sac.actors, sac.normalizer)),
    ("mappo", MappoController(mappo.actors, mappo.normalizer)),
):
    rewards = evaluate_episode_rewards(scenario, reference, controller,
                                       sac.reward_cfg, n_episodes=5, seed=1234)
    print(f"  {name:7s} {rewards.mean():8.1f}   per episode {np.round(rewards, 1)}")
