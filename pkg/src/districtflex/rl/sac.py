"""Independent soft actor-critic on the manual-gradient MLP substrate.

Per agent: a squashed-Gaussian actor, twin critics with slow-moving target
copies, fixed entropy temperature. The actor gradient is the standard
reparameterized one, assembled by hand: critic input-gradients flow back
through the sampled action, plus the entropy term's direct path through
the policy's mean and log-std heads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..nn import AdamState, Mlp, adam_step, clip_grad_norm, init_mlp, mlp_backward, mlp_forward, mlp_forward_cache

__all__ = ["SacAgent", "make_sac_agent", "sac_act", "sample_squashed", "sac_update", "NonFiniteObservationError"]

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class NonFiniteObservationError(ValueError):
    """Observation fed to a policy contains NaN/Inf."""


@dataclass
class SacAgent:
    actor: Mlp        # obs -> [mu, log_std]
    q1: Mlp           # [obs, action] -> scalar
    q2: Mlp
    q1_target: Mlp
    q2_target: Mlp
    opt_actor: AdamState
    opt_q1: AdamState
    opt_q2: AdamState
    act_dim: int


def make_sac_agent(obs_dim: int, act_dim: int, hidden, rng: np.random.Generator,
                   actor_lr: float = 3e-4, critic_lr: float = 3e-4) -> SacAgent:
    actor = init_mlp([obs_dim, *hidden, 2 * act_dim], rng)
    q1 = init_mlp([obs_dim + act_dim, *hidden, 1], rng)
    q2 = init_mlp([obs_dim + act_dim, *hidden, 1], rng)
    return SacAgent(
        actor=actor, q1=q1, q2=q2,
        q1_target=q1.copy(), q2_target=q2.copy(),
        opt_actor=AdamState.for_net(actor, actor_lr),
        opt_q1=AdamState.for_net(q1, critic_lr),
        opt_q2=AdamState.for_net(q2, critic_lr),
        act_dim=act_dim,
    )


def _split_heads(out: np.ndarray, act_dim: int):
    mu = out[..., :act_dim]
    log_std_raw = out[..., act_dim:]
    log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
    return mu, log_std, log_std_raw


def _squash_logp(eps: np.ndarray, log_std: np.ndarray, a: np.ndarray) -> np.ndarray:
    per_dim = -0.5 * eps ** 2 - log_std - _LOG_SQRT_2PI - np.log(1.0 - a ** 2 + SQUASH_EPS)
    return per_dim.sum(axis=-1)


def sample_squashed(actor: Mlp, obs: np.ndarray, rng: np.random.Generator):
    """Batched tanh-Gaussian sample with its log-density."""
    out = mlp_forward(actor, obs)
    act_dim = out.shape[-1] // 2
    mu, log_std, _ = _split_heads(out, act_dim)
    eps = rng.standard_normal(mu.shape)
    a = np.tanh(mu + np.exp(log_std) * eps)
    return a, _squash_logp(eps, log_std, a)


def sac_act(actor: Mlp, obs: np.ndarray, mode: str = "stochastic",
            rng: np.random.Generator | None = None) -> tuple[np.ndarray, float]:
    """One observation in, one action in [-1, 1]^act_dim and its log-prob.

    Deterministic mode returns tanh of the policy mean (density evaluated
    at the mean).
    """
    obs = np.asarray(obs, dtype=float)
    if not np.all(np.isfinite(obs)):
        raise NonFiniteObservationError("observation contains NaN/Inf")
    out = mlp_forward(actor, obs)
    act_dim = out.shape[-1] // 2
    mu, log_std, _ = _split_heads(out, act_dim)
    if mode == "deterministic":
        eps = np.zeros_like(mu)
    elif mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic mode needs an rng")
        eps = rng.standard_normal(mu.shape)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    a = np.tanh(mu + np.exp(log_std) * eps)
    return a, float(_squash_logp(eps, log_std, a))


def _polyak(target: Mlp, online: Mlp, tau: float) -> None:
    for tw, w in zip(target.weights, online.weights):
        tw *= 1.0 - tau
        tw += tau * w
    for tb, b in zip(target.biases, online.biases):
        tb *= 1.0 - tau
        tb += tau * b


def sac_update(agents: list[SacAgent], buffer, cfg, rng: np.random.Generator) -> dict:
    """One gradient step for every agent from independently sampled
    minibatches; all agents share the stored global reward.

    cfg needs: gamma, alpha, tau, sac_batch, grad_clip.
    """
    critic_losses, actor_losses, q_means = [], [], []
    obs_dim = buffer.obs.shape[-1]

    for i, ag in enumerate(agents):
        idx = buffer.sample_indices(cfg.sac_batch, rng)
        o = buffer.obs[idx, i]
        a = buffer.actions[idx, i]
        r = buffer.rewards[idx]
        o2 = buffer.next_obs[idx, i]
        done = buffer.dones[idx]
        batch = len(idx)

        # twin-Q target with entropy bonus under the current policy
        a2, logp2 = sample_squashed(ag.actor, o2, rng)
        x2 = np.concatenate([o2, a2], axis=1)
        q_next = np.minimum(mlp_forward(ag.q1_target, x2).ravel(),
                            mlp_forward(ag.q2_target, x2).ravel())
        target = r + cfg.gamma * (1.0 - done) * (q_next - cfg.alpha * logp2)

        x = np.concatenate([o, a], axis=1)
        pair_loss = 0.0
        for q_net, opt in ((ag.q1, ag.opt_q1), (ag.q2, ag.opt_q2)):
            pred, cache = mlp_forward_cache(q_net, x)
            err = pred.ravel() - target
            grads, _ = mlp_backward(q_net, cache, (2.0 * err / batch)[:, None])
            clip_grad_norm(grads, cfg.grad_clip)
            adam_step(opt, q_net, grads)
            pair_loss += float(np.mean(err ** 2))
        critic_losses.append(0.5 * pair_loss)

        # actor: minimize mean(alpha*logp - min Q) via the sampled action
        out, cache_a = mlp_forward_cache(ag.actor, o)
        mu, log_std, log_std_raw = _split_heads(out, ag.act_dim)
        sigma = np.exp(log_std)
        eps = rng.standard_normal(mu.shape)
        a_new = np.tanh(mu + sigma * eps)
        one_minus_a2 = 1.0 - a_new ** 2
        logp = _squash_logp(eps, log_std, a_new)

        x_new = np.concatenate([o, a_new], axis=1)
        q1v, c1 = mlp_forward_cache(ag.q1, x_new)
        q2v, c2 = mlp_forward_cache(ag.q2, x_new)
        q1v, q2v = q1v.ravel(), q2v.ravel()
        sel1 = q1v <= q2v
        up1 = np.where(sel1, -1.0 / batch, 0.0)[:, None]
        up2 = np.where(~sel1, -1.0 / batch, 0.0)[:, None]
        _, ig1 = mlp_backward(ag.q1, c1, up1)
        _, ig2 = mlp_backward(ag.q2, c2, up2)
        g_action = (ig1 + ig2)[:, obs_dim:]
        g_action = g_action + cfg.alpha * (2.0 * a_new / (one_minus_a2 + SQUASH_EPS)) / batch
        g_pre = g_action * one_minus_a2          # through tanh
        g_mu = g_pre
        g_log_std = g_pre * (sigma * eps) - cfg.alpha / batch
        live = (log_std_raw > LOG_STD_MIN) & (log_std_raw < LOG_STD_MAX)
        g_log_std = np.where(live, g_log_std, 0.0)
        grads_a, _ = mlp_backward(ag.actor, cache_a, np.concatenate([g_mu, g_log_std], axis=1))
        clip_grad_norm(grads_a, cfg.grad_clip)
        adam_step(ag.opt_actor, ag.actor, grads_a)

        actor_losses.append(float(np.mean(cfg.alpha * logp - np.minimum(q1v, q2v))))
        q_means.append(float(np.mean(np.minimum(q1v, q2v))))

        _polyak(ag.q1_target, ag.q1, cfg.tau)
        _polyak(ag.q2_target, ag.q2, cfg.tau)

    return {
        "critic_loss": float(np.mean(critic_losses)),
        "actor_loss": float(np.mean(actor_losses)),
        "mean_q": float(np.mean(q_means)),
    }
