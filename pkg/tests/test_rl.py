import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from districtflex.rl.buffers import BufferUnderflowError, EmptyRolloutError, ReplayBuffer, RolloutBuffer
from districtflex.rl.mappo import CentralCritic, clipped_surrogate, gae, gaussian_logp, make_mappo_agent, ppo_update
from districtflex.rl.observations import OBS_DIM, ObservationNormalizer, build_global_state, build_observation
from districtflex.rl.reward import RewardConfig, comfort_loss, default_reward_config, global_reward, huber
from districtflex.rl.sac import NonFiniteObservationError, make_sac_agent, sac_act, sac_update
from districtflex.rl.training import (
    MappoController,
    RandomController,
    RlConfig,
    SacController,
    map_to_env_action,
    train,
)
from districtflex.scenario import ReferenceSignal, build_reference, compute_baseline
from districtflex.simulation import EmptyDistrictError, LengthMismatchError, run_episode

from conftest import make_params, make_scenario
from oracles import gae_double_sum


class TestHuber:
    def test_zero(self):
        assert huber(0.0, 1.0) == 0.0

    def test_quadratic_region(self):
        assert huber(0.5, 1.0) == pytest.approx(0.125)

    def test_linear_region(self):
        assert huber(3.0, 1.0) == pytest.approx(2.5)

    def test_continuity_and_derivative_at_threshold(self):
        delta = 0.7
        h = 1e-7
        assert huber(delta - h, delta) == pytest.approx(huber(delta + h, delta), abs=1e-6)
        left = (huber(delta, delta) - huber(delta - h, delta)) / h
        right = (huber(delta + h, delta) - huber(delta, delta)) / h
        assert left == pytest.approx(delta, abs=1e-5)
        assert right == pytest.approx(delta, abs=1e-5)

    @given(e=st.floats(-100.0, 100.0), delta=st.floats(0.01, 10.0))
    @settings(max_examples=100, deadline=None)
    def test_nonnegative_and_symmetric(self, e, delta):
        assert huber(e, delta) >= 0.0
        assert huber(e, delta) == pytest.approx(huber(-e, delta), rel=1e-12)

    def test_bad_delta(self):
        with pytest.raises(ValueError):
            huber(1.0, 0.0)


class TestComfortLoss:
    def test_all_in_band(self):
        assert comfort_loss([21.0, 22.0, 23.0], 20.0, 24.0) == 0.0

    def test_hand_case(self):
        assert comfort_loss([25.0, 22.0], 20.0, 24.0) == pytest.approx(0.5)

    def test_matches_mean_of_pointwise_violations(self):
        from districtflex.simulation import comfort_violation

        temps = [18.0, 21.0, 26.5, 23.9]
        expected = np.mean([comfort_violation(t, 20.0, 24.0) for t in temps])
        assert comfort_loss(temps, 20.0, 24.0) == pytest.approx(expected, rel=1e-12)

    def test_empty(self):
        with pytest.raises(EmptyDistrictError):
            comfort_loss([], 20.0, 24.0)


class TestGlobalReward:
    def test_perfect_step(self):
        cfg = RewardConfig(w_track=1.0, w_comfort=10.0, delta=1.0)
        assert global_reward(100.0, 100.0, [22.0, 21.0], cfg) == 0.0

    def test_hand_case(self):
        cfg = RewardConfig(w_track=1.0, w_comfort=0.0, delta=1.0)
        assert global_reward(102.0, 100.0, [22.0], cfg) == pytest.approx(-1.5)

    @given(
        err=st.floats(-50.0, 50.0),
        temp=st.floats(0.0, 40.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_never_positive(self, err, temp):
        cfg = RewardConfig(w_track=1.0, w_comfort=10.0, delta=2.0)
        assert global_reward(100.0 + err, 100.0, [temp], cfg) <= 0.0

    def test_monotone_in_each_term(self):
        cfg = RewardConfig(w_track=1.0, w_comfort=10.0, delta=1.0)
        base = global_reward(101.0, 100.0, [22.0], cfg)
        assert global_reward(103.0, 100.0, [22.0], cfg) <= base
        assert global_reward(101.0, 100.0, [25.0], cfg) <= base

    def test_delta_scaled_from_reference(self):
        ref = ReferenceSignal(r=np.full(10, 200.0))
        cfg = default_reward_config(ref)
        assert cfg.delta == pytest.approx(20.0)


class TestSacAct:
    def test_deterministic_bounds(self):
        rng = np.random.default_rng(0)
        agent = make_sac_agent(OBS_DIM, 2, (16,), rng)
        a, logp = sac_act(agent.actor, np.zeros(OBS_DIM), "deterministic")
        assert np.all(a >= -1.0) and np.all(a <= 1.0)
        assert math.isfinite(logp)

    def test_same_seed_same_sample(self):
        rng = np.random.default_rng(0)
        agent = make_sac_agent(OBS_DIM, 2, (16,), rng)
        a1, _ = sac_act(agent.actor, np.zeros(OBS_DIM), "stochastic", np.random.default_rng(5))
        a2, _ = sac_act(agent.actor, np.zeros(OBS_DIM), "stochastic", np.random.default_rng(5))
        np.testing.assert_array_equal(a1, a2)

    def test_non_finite_observation(self):
        rng = np.random.default_rng(0)
        agent = make_sac_agent(3, 1, (8,), rng)
        with pytest.raises(NonFiniteObservationError):
            sac_act(agent.actor, np.array([1.0, np.nan, 0.0]), "deterministic")

    def test_empirical_density_matches_logp(self):
        # histogram of 10^4 draws vs the analytic squashed-Gaussian density
        rng = np.random.default_rng(1)
        agent = make_sac_agent(2, 1, (8,), rng)
        obs = np.array([0.3, -0.2])
        draws = np.array([
            sac_act(agent.actor, obs, "stochastic", rng)[0][0] for _ in range(10_000)
        ])

        from districtflex.nn import mlp_forward
        from districtflex.rl.sac import LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS

        out = mlp_forward(agent.actor, obs)
        mu, log_std = out[0], float(np.clip(out[1], LOG_STD_MIN, LOG_STD_MAX))
        sigma = math.exp(log_std)

        def analytic_density(a):
            xi = np.arctanh(np.clip(a, -1 + 1e-12, 1 - 1e-12))
            normal = np.exp(-0.5 * ((xi - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
            return normal / (1.0 - a ** 2 + SQUASH_EPS)

        lo, hi = np.percentile(draws, [2, 98])
        edges = np.linspace(lo, hi, 13)
        counts, _ = np.histogram(draws, bins=edges)
        centers = 0.5 * (edges[:-1] + edges[1:])
        widths = np.diff(edges)
        expected = analytic_density(centers) * widths * len(draws)
        mask = expected > 200
        rel_err = np.abs(counts[mask] - expected[mask]) / expected[mask]
        assert np.max(rel_err) < 0.2


class TestSacUpdate:
    def _cfg(self, **kw):
        return RlConfig(**kw)

    def _filled_agent_and_buffer(self, rng, n=64):
        agent = make_sac_agent(3, 1, (8,), rng)
        buf = ReplayBuffer(256, 1, 3, 1)
        for _ in range(n):
            o = rng.standard_normal((1, 3))
            a = rng.uniform(-1, 1, (1, 1))
            buf.push(o, a, float(rng.standard_normal()), o, done=True)
        return agent, buf

    def test_critic_fixed_point_zero_loss(self):
        rng = np.random.default_rng(0)
        agent, _ = self._filled_agent_and_buffer(rng)
        agent.q2 = agent.q1.copy()
        agent.q1_target = agent.q1.copy()
        agent.q2_target = agent.q1.copy()
        buf = ReplayBuffer(256, 1, 3, 1)
        from districtflex.nn import mlp_forward

        for _ in range(64):
            o = rng.standard_normal((1, 3))
            a = rng.uniform(-1, 1, (1, 1))
            q = float(mlp_forward(agent.q1, np.concatenate([o, a], axis=1))[0, 0])
            buf.push(o, a, q, o, done=True)  # gamma*(1-done)=0 so target == reward == Q
        report = sac_update([agent], buf, self._cfg(sac_batch=32), np.random.default_rng(1))
        assert report["critic_loss"] == pytest.approx(0.0, abs=1e-20)

    def test_alpha_zero_actor_loss_is_pure_q(self):
        rng = np.random.default_rng(3)
        agent, buf = self._filled_agent_and_buffer(rng)
        report = sac_update([agent], buf, self._cfg(alpha=0.0, sac_batch=32), np.random.default_rng(2))
        assert report["actor_loss"] == pytest.approx(-report["mean_q"], rel=1e-12)

    def test_buffer_underflow(self):
        rng = np.random.default_rng(4)
        agent, buf = self._filled_agent_and_buffer(rng, n=8)
        with pytest.raises(BufferUnderflowError):
            sac_update([agent], buf, self._cfg(sac_batch=64), rng)

    def test_updates_move_parameters(self):
        rng = np.random.default_rng(5)
        agent, buf = self._filled_agent_and_buffer(rng)
        before = agent.actor.weights[0].copy()
        sac_update([agent], buf, self._cfg(sac_batch=32), rng)
        assert not np.array_equal(agent.actor.weights[0], before)


class TestReplayBuffer:
    def test_ring_overwrite(self):
        buf = ReplayBuffer(4, 1, 2, 1)
        for i in range(10):
            buf.push(np.full((1, 2), i), np.zeros((1, 1)), float(i), np.zeros((1, 2)), False)
        assert len(buf) == 4
        assert sorted(buf.rewards.tolist()) == [6.0, 7.0, 8.0, 9.0]

    def test_sampling_uniform_over_occupancy(self):
        buf = ReplayBuffer(100, 1, 1, 1)
        for i in range(10):
            buf.push(np.zeros((1, 1)), np.zeros((1, 1)), 0.0, np.zeros((1, 1)), False)
        rng = np.random.default_rng(0)
        seen = np.concatenate([buf.sample_indices(8, rng) for _ in range(200)])
        assert seen.max() < 10  # never points at unoccupied slots
        assert len(np.unique(seen)) == 10  # and covers the occupancy


class TestGae:
    def test_lambda_zero_equals_td(self):
        rng = np.random.default_rng(0)
        rewards = rng.standard_normal(16)
        values = rng.standard_normal(17)
        adv, deltas = gae(rewards, values, 0.99, 0.0)
        np.testing.assert_array_equal(adv, deltas)

    def test_single_step_hand_case(self):
        adv, _ = gae([1.0], [0.5, 0.0], 0.99, 0.95)
        assert adv[0] == pytest.approx(0.5)

    def test_lambda_one_two_steps(self):
        rewards = [1.0, 2.0]
        values = [0.3, 0.6, 0.9]
        gamma = 0.9
        adv, deltas = gae(rewards, values, gamma, 1.0)
        assert adv[0] == pytest.approx(deltas[0] + gamma * deltas[1])

    def test_double_sum_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            k = int(rng.integers(1, 65))
            rewards = rng.standard_normal(k)
            values = rng.standard_normal(k + 1)
            gamma, lam = rng.uniform(0.8, 1.0), rng.uniform(0.0, 1.0)
            adv, _ = gae(rewards, values, gamma, lam)
            np.testing.assert_allclose(adv, gae_double_sum(rewards, values, gamma, lam), atol=1e-10)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            gae([1.0, 2.0], [0.0, 0.0], 0.99, 0.95)


class TestPpo:
    def test_clip_examples(self):
        contrib, _ = clipped_surrogate(np.array([1.5]), np.array([1.0]), 0.2)
        assert contrib[0] == pytest.approx(1.2)
        contrib, _ = clipped_surrogate(np.array([0.5]), np.array([-1.0]), 0.2)
        assert contrib[0] == pytest.approx(-0.8)

    def test_ratio_one_identity(self):
        adv = np.array([0.5, -1.5, 2.0])
        contrib, grad = clipped_surrogate(np.ones(3), adv, 0.2)
        np.testing.assert_allclose(contrib, adv)
        np.testing.assert_allclose(grad, adv)

    @given(
        rho=st.floats(0.01, 5.0),
        adv=st.floats(-3.0, 3.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_clip_bound_property(self, rho, adv):
        eps = 0.2
        contrib, _ = clipped_surrogate(np.array([rho]), np.array([adv]), eps)
        candidates = {rho * adv, (1 - eps) * adv, (1 + eps) * adv}
        assert any(contrib[0] == pytest.approx(c, rel=1e-12, abs=1e-12) for c in candidates)
        assert contrib[0] <= max(candidates) + 1e-12

    def _tiny_rollout(self, rng, n_agents=2, steps=12):
        agents = [make_mappo_agent(3, 1, (8,), rng) for _ in range(n_agents)]
        from districtflex.nn import AdamState, init_mlp, mlp_forward

        critic_net = init_mlp([4, 8, 1], rng)
        critic = CentralCritic(net=critic_net, opt=AdamState.for_net(critic_net, 3e-4))
        rollout = RolloutBuffer()
        for t in range(steps):
            obs = rng.standard_normal((n_agents, 3))
            gstate = rng.standard_normal(4)
            mus = np.stack([mlp_forward(agents[i].actor, obs[i]) for i in range(n_agents)])
            a_raw = mus + rng.standard_normal((n_agents, 1))
            logps = np.array([
                gaussian_logp(a_raw[i], mus[i], agents[i].log_std) for i in range(n_agents)
            ])
            value = float(mlp_forward(critic.net, gstate)[0])
            rollout.add_step(obs, gstate, a_raw, logps, float(rng.standard_normal()), value)
        rollout.end_episode(0.0)
        return agents, critic, rollout

    def test_first_minibatch_surrogate_equals_mean_advantage(self):
        rng = np.random.default_rng(0)
        agents, critic, rollout = self._tiny_rollout(rng)
        cfg = RlConfig(mappo_epochs=1, mappo_batch=1024)
        adv, _ = rollout.compute_advantages(cfg.gamma, cfg.gae_lambda)
        adv_norm = (adv - adv.mean()) / (adv.std() + 1e-8)
        report = ppo_update(agents, critic, rollout, cfg, np.random.default_rng(1))
        # with one epoch and one full-batch minibatch, the FIRST agent update
        # happens at ratio 1, so its surrogate is exactly the mean advantage
        assert report["surrogate"] == pytest.approx(float(adv_norm.mean()), abs=1e-9)

    def test_empty_rollout(self):
        rng = np.random.default_rng(2)
        agents, critic, _ = self._tiny_rollout(rng)
        with pytest.raises(EmptyRolloutError):
            ppo_update(agents, critic, RolloutBuffer(), RlConfig(), rng)

    def test_open_episode_rejected(self):
        rollout = RolloutBuffer()
        rollout.add_step(np.zeros((1, 3)), np.zeros(4), np.zeros((1, 1)), np.zeros(1), 0.0, 0.0)
        with pytest.raises(EmptyRolloutError, match="open episode"):
            rollout.compute_advantages(0.99, 0.95)


class TestObservations:
    def test_local_fields_only(self, small_scenario):
        ref = build_reference(compute_baseline(small_scenario))
        normalizer = ObservationNormalizer.fit(small_scenario, ref)
        from districtflex.rl.training import _make_view
        from districtflex.simulation import initial_state

        states = [initial_state(p) for p in small_scenario.buildings]
        view = _make_view(small_scenario, ref, 5, states, np.arange(3.0), 99.0)
        poisoned = _make_view(small_scenario, ref, 5, states, np.arange(3.0), float("nan"))
        for i in range(small_scenario.n_buildings):
            np.testing.assert_array_equal(build_observation(view, i), build_observation(poisoned, i))
        obs = normalizer.transform(build_observation(view, 0))
        assert obs.shape == (OBS_DIM,)
        assert np.all(np.isfinite(obs))

    def test_global_state_reads_globals(self, small_scenario):
        ref = build_reference(compute_baseline(small_scenario))
        normalizer = ObservationNormalizer.fit(small_scenario, ref)
        from districtflex.rl.training import _make_view
        from districtflex.simulation import initial_state

        states = [initial_state(p) for p in small_scenario.buildings]
        view = _make_view(small_scenario, ref, 5, states, np.arange(3.0), 99.0)
        state_vec = build_global_state(view, normalizer)
        assert state_vec.shape == (4 + 3 * small_scenario.n_buildings,)

    def test_normalizer_round_trip(self, small_scenario):
        ref = build_reference(compute_baseline(small_scenario))
        normalizer = ObservationNormalizer.fit(small_scenario, ref)
        again = ObservationNormalizer.from_dict(normalizer.to_dict())
        np.testing.assert_array_equal(normalizer.mean, again.mean)
        np.testing.assert_array_equal(normalizer.std, again.std)


class TestCtdeSeparation:
    def test_poisoned_global_state_does_not_change_execution(self, small_scenario):
        ref = build_reference(compute_baseline(small_scenario))
        rng = np.random.default_rng(0)
        agents = [make_mappo_agent(OBS_DIM, 2, (16,), rng) for _ in range(small_scenario.n_buildings)]
        normalizer = ObservationNormalizer.fit(small_scenario, ref)
        controller = MappoController([a.actor for a in agents], normalizer)

        from districtflex.simulation import StepView

        class PoisoningController(MappoController):
            """Zeroes out every global field before the policies see the view."""

            def act(self, view):
                poisoned = StepView(
                    k=view.k, hour=view.hour, dt=view.dt, states=view.states,
                    disturbances=view.disturbances, r_k=view.r_k,
                    prev_building_loads=view.prev_building_loads,
                    prev_district_load=float("nan"),
                )
                return super().act(poisoned)

        clean = run_episode(small_scenario, controller, ref, seed=0)
        poisoned = run_episode(
            small_scenario,
            PoisoningController([a.actor for a in agents], normalizer),
            ref, seed=0,
        )
        np.testing.assert_array_equal(clean.u, poisoned.u)
        np.testing.assert_array_equal(clean.p_batt, poisoned.p_batt)


class TestTraining:
    def test_curve_length_and_freeze(self):
        scenario = make_scenario(n_buildings=2, k_steps=48, t_out=-5.0, base_load=2.0)
        ref = ReferenceSignal(r=np.full(48, 10.0))
        cfg = RlConfig(sac_episodes=3, sac_warmup_steps=12, sac_batch=16,
                       replay_capacity=500, hidden=(8,))
        result = train(scenario, "sac", cfg, seed=0, reference=ref)
        assert len(result.curves) == 3
        assert set(result.curves[0]) == {"episode", "mean_reward", "tracking_term", "comfort_term"}

        controller = SacController(result.actors, result.normalizer)
        t1 = run_episode(scenario, controller, ref, seed=1)
        t2 = run_episode(scenario, controller, ref, seed=1)
        np.testing.assert_array_equal(t1.u, t2.u)

    def test_mappo_curves(self):
        scenario = make_scenario(n_buildings=2, k_steps=48, t_out=-5.0, base_load=2.0)
        ref = ReferenceSignal(r=np.full(48, 10.0))
        cfg = RlConfig(mappo_updates=2, mappo_episodes_per_update=2, mappo_epochs=2,
                       mappo_batch=64, hidden=(8,))
        result = train(scenario, "mappo", cfg, seed=0, reference=ref)
        assert len(result.curves) == 4

    def test_unknown_algo(self, small_scenario):
        with pytest.raises(ValueError, match="unknown algorithm"):
            train(small_scenario, "dqn", RlConfig(), seed=0,
                  reference=ReferenceSignal(r=np.ones(small_scenario.n_steps)))

    def test_checkpoint_round_trip(self, tmp_path):
        scenario = make_scenario(n_buildings=2, k_steps=24, t_out=-5.0)
        ref = ReferenceSignal(r=np.full(24, 10.0))
        cfg = RlConfig(sac_episodes=1, sac_warmup_steps=6, sac_batch=8,
                       replay_capacity=100, hidden=(8,))
        result = train(scenario, "sac", cfg, seed=0, reference=ref)
        from districtflex.rl.training import load_policies, save_policies

        save_policies(tmp_path / "sac", result)
        algo, actors, normalizer, reward_cfg = load_policies(tmp_path / "sac")
        assert algo == "sac"
        c1 = SacController(result.actors, result.normalizer)
        c2 = SacController(actors, normalizer)
        t1 = run_episode(scenario, c1, ref, seed=0)
        t2 = run_episode(scenario, c2, ref, seed=0)
        np.testing.assert_array_equal(t1.u, t2.u)

    def test_random_controller_mapping_bounds(self, small_scenario):
        ref = ReferenceSignal(r=np.ones(small_scenario.n_steps))
        trace = run_episode(small_scenario, RandomController(), ref, seed=3)
        for i, p in enumerate(small_scenario.buildings):
            assert trace.u[:, i].min() >= 0.0 and trace.u[:, i].max() <= 1.0
            assert trace.p_batt[:, i].min() >= p.p_min_kw - 1e-12
            assert trace.p_batt[:, i].max() <= p.p_max_kw + 1e-12

    def test_action_mapping(self):
        p = make_params()
        a = map_to_env_action(np.array([-1.0, -1.0]), p)
        assert a.u == 0.0 and a.p_batt_kw == p.p_min_kw
        a = map_to_env_action(np.array([1.0, 1.0]), p)
        assert a.u == 1.0 and a.p_batt_kw == p.p_max_kw
        a = map_to_env_action(np.array([0.0, 0.0]), p)
        assert a.u == 0.5 and a.p_batt_kw == pytest.approx(0.5 * (p.p_min_kw + p.p_max_kw))
