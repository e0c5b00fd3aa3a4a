"""MAPPO: per-building Gaussian policies, one centralized value network.

Training sees the global state through the critic; execution uses local
observations only. Advantages come from generalized advantage estimation
over day-long episode segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..nn import AdamState, Mlp, adam_step, clip_grad_norm, init_mlp, mlp_backward, mlp_forward, mlp_forward_cache
from ..simulation import LengthMismatchError

__all__ = ["MappoAgent", "CentralCritic", "make_mappo_agent", "gaussian_logp",
           "clipped_surrogate", "gae", "ppo_update"]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def gae(rewards, values, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation by backward recursion.

    `values` must include the bootstrap entry (length K+1). Returns the
    advantages and the TD residuals.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    k = rewards.shape[0]
    if values.shape[0] != k + 1:
        raise LengthMismatchError(f"values must have length K+1={k + 1}, got {values.shape[0]}")
    deltas = rewards + gamma * values[1:] - values[:-1]
    advantages = np.empty(k)
    acc = 0.0
    for j in range(k - 1, -1, -1):
        acc = deltas[j] + gamma * lam * acc
        advantages[j] = acc
    return advantages, deltas


@dataclass
class MappoAgent:
    actor: Mlp                  # obs -> action mean
    log_std: np.ndarray         # (act_dim,) state-independent
    opt_actor: AdamState
    m_log_std: np.ndarray       # Adam moments for log_std
    v_log_std: np.ndarray
    t_log_std: int = 0


@dataclass
class CentralCritic:
    net: Mlp                    # global state -> value
    opt: AdamState


def make_mappo_agent(obs_dim: int, act_dim: int, hidden, rng: np.random.Generator,
                     lr: float = 3e-4, log_std_init: float = -0.5) -> MappoAgent:
    actor = init_mlp([obs_dim, *hidden, act_dim], rng)
    return MappoAgent(
        actor=actor,
        log_std=np.full(act_dim, log_std_init),
        opt_actor=AdamState.for_net(actor, lr),
        m_log_std=np.zeros(act_dim),
        v_log_std=np.zeros(act_dim),
    )


def gaussian_logp(a_raw: np.ndarray, mu: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    z = (a_raw - mu) / np.exp(log_std)
    return (-0.5 * z ** 2 - log_std - _LOG_SQRT_2PI).sum(axis=-1)


def clipped_surrogate(rho: np.ndarray, adv: np.ndarray, eps: float):
    """Per-sample clipped-surrogate contributions and the gradient factor
    d(contribution)/d(log pi), which is rho*adv where the unclipped branch
    is active and zero where the clip saturates."""
    unclipped = rho * adv
    clipped = np.clip(rho, 1.0 - eps, 1.0 + eps) * adv
    contributions = np.minimum(unclipped, clipped)
    grad_factor = np.where(unclipped <= clipped, rho * adv, 0.0)
    return contributions, grad_factor


def _adam_vector(param, grad, m, v, t, lr, beta1=0.9, beta2=0.999, eps=1e-8) -> int:
    t += 1
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    param -= lr * (m / (1.0 - beta1 ** t)) / (np.sqrt(v / (1.0 - beta2 ** t)) + eps)
    return t


def ppo_update(agents: list[MappoAgent], critic: CentralCritic, rollout, cfg,
               rng: np.random.Generator) -> dict:
    """Clipped-surrogate epochs over shuffled minibatches.

    Advantages are computed once (before any parameter change) and
    normalized to zero mean / unit variance across the whole rollout;
    the critic regresses values onto GAE returns.

    cfg needs: gamma, gae_lambda, clip_eps, mappo_epochs, mappo_batch,
    entropy_coef, grad_clip.
    """
    advantages, returns = rollout.compute_advantages(cfg.gamma, cfg.gae_lambda)
    data = rollout.stacked()
    adv_norm = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    t_total = len(advantages)
    n_agents = len(agents)

    surrogates, value_losses = [], []
    for _ in range(cfg.mappo_epochs):
        perm = rng.permutation(t_total)
        for lo in range(0, t_total, cfg.mappo_batch):
            mb = perm[lo:lo + cfg.mappo_batch]
            batch = len(mb)

            v_pred, cache_v = mlp_forward_cache(critic.net, data["global_state"][mb])
            v_err = v_pred.ravel() - returns[mb]
            grads_v, _ = mlp_backward(critic.net, cache_v, (2.0 * v_err / batch)[:, None])
            clip_grad_norm(grads_v, cfg.grad_clip)
            adam_step(critic.opt, critic.net, grads_v)
            value_losses.append(float(np.mean(v_err ** 2)))

            adv = adv_norm[mb]
            for i, ag in enumerate(agents):
                o = data["obs"][mb, i]
                a_raw = data["actions_raw"][mb, i]
                logp_old = data["log_probs"][mb, i]

                mu, cache_a = mlp_forward_cache(ag.actor, o)
                sigma = np.exp(ag.log_std)
                z = (a_raw - mu) / sigma
                logp_new = (-0.5 * z ** 2 - ag.log_std - _LOG_SQRT_2PI).sum(axis=1)
                rho = np.exp(logp_new - logp_old)
                contributions, g_logp = clipped_surrogate(rho, adv, cfg.clip_eps)
                surrogates.append(float(np.mean(contributions)))
                gl = -g_logp / batch  # minimize -surrogate
                g_mu = gl[:, None] * (z / sigma)
                g_log_std = (gl[:, None] * (z ** 2 - 1.0)).sum(axis=0)
                g_log_std -= cfg.entropy_coef  # d entropy / d log_std = 1 per dim

                grads_a, _ = mlp_backward(ag.actor, cache_a, g_mu)
                clip_grad_norm(grads_a, cfg.grad_clip)
                adam_step(ag.opt_actor, ag.actor, grads_a)
                ag.t_log_std = _adam_vector(
                    ag.log_std, g_log_std, ag.m_log_std, ag.v_log_std,
                    ag.t_log_std, ag.opt_actor.lr,
                )

    return {
        "surrogate": float(np.mean(surrogates)) if surrogates else 0.0,
        "value_loss": float(np.mean(value_losses)) if value_losses else 0.0,
        "n_steps": t_total,
        "n_agents": n_agents,
    }
