"""Clipped PPO on a shared policy/value trunk, with GAE and staleness
bookkeeping for asynchronous collection.

The network is one MLP whose linear head emits action logits plus a value
(last column). The update gradient is assembled analytically (clipped
surrogate, entropy bonus, clipped value loss) and pushed through the
network's explicit backward pass; the assembly is finite-difference checked
in the tests.

Rollouts are tagged with the policy version that produced them; batches
older than the staleness bound are discarded, not trained on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import Adam, Mlp, make_mlp


@dataclass
class PpoConfig:
    lr: float = 1e-4
    clip: float = 0.1
    value_clip: float = 1.0
    epochs: int = 1
    batch_size: int = 4096
    minibatch_size: int = 512
    value_coef: float = 0.5
    entropy_coef: float = 0.001
    gamma: float = 0.999
    gae_lambda: float = 0.95
    max_grad_norm: float = 4.0
    staleness_max: int = 4
    rollout_len: int = 32
    hidden: tuple[int, ...] = (256, 256)


def make_policy(input_dim: int, n_actions: int, cfg: PpoConfig, seed: int = 0,
                dtype=np.float32) -> Mlp:
    return make_mlp((input_dim, *cfg.hidden, n_actions + 1), head="linear",
                    seed=seed, dtype=dtype)


def policy_heads(out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split network output into (action logits, value)."""
    return out[:, :-1], out[:, -1]


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                bootstrap: np.ndarray, gamma: float, lam: float
                ) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation over (num_envs, T) arrays.

    ``dones[:, t]`` marks transitions into a terminal state; the value of the
    post-reset observation never leaks across the boundary. ``bootstrap`` is
    the value of the observation after the last step of each row.
    """
    n, t_len = rewards.shape
    adv = np.zeros((n, t_len), dtype=np.float64)
    last = np.zeros(n, dtype=np.float64)
    for t in range(t_len - 1, -1, -1):
        nonterminal = 1.0 - dones[:, t].astype(np.float64)
        next_value = bootstrap if t == t_len - 1 else values[:, t + 1]
        delta = rewards[:, t] + gamma * next_value * nonterminal - values[:, t]
        last = delta + gamma * lam * nonterminal * last
        adv[:, t] = last
    returns = adv + values
    return adv, returns


def enforce_staleness(batch_version: int, learner_version: int,
                      max_staleness: int) -> bool:
    """True if a rollout batch is fresh enough to train on."""
    age = learner_version - batch_version
    if age < 0:
        raise ValueError("rollout batch from the future: "
                         f"batch v{batch_version} > learner v{learner_version}")
    return age <= max_staleness


@dataclass
class UpdateStats:
    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    approx_kl: float = 0.0
    clip_fraction: float = 0.0
    grad_norm: float = 0.0
    minibatches: int = 0

    def merge(self, other: "UpdateStats") -> None:
        k = self.minibatches + other.minibatches
        if k == 0:
            return
        w0 = self.minibatches / k
        w1 = other.minibatches / k
        self.policy_loss = w0 * self.policy_loss + w1 * other.policy_loss
        self.value_loss = w0 * self.value_loss + w1 * other.value_loss
        self.entropy = w0 * self.entropy + w1 * other.entropy
        self.approx_kl = w0 * self.approx_kl + w1 * other.approx_kl
        self.clip_fraction = w0 * self.clip_fraction + w1 * other.clip_fraction
        self.grad_norm = w0 * self.grad_norm + w1 * other.grad_norm
        self.minibatches = k


def ppo_loss_grad(out: np.ndarray, actions: np.ndarray, logp_old: np.ndarray,
                  advantages: np.ndarray, returns: np.ndarray,
                  values_old: np.ndarray, cfg: PpoConfig
                  ) -> tuple[np.ndarray, UpdateStats]:
    """Loss gradient w.r.t. the network output for one minibatch.

    Returns (d_out, stats) where d_out has the same shape as ``out``.
    """
    m = out.shape[0]
    logits, value = policy_heads(out)
    lp = log_softmax(logits)
    probs = np.exp(lp)
    logp_new = lp[np.arange(m), actions]
    ratio = np.exp(logp_new - logp_old)

    surr1 = ratio * advantages
    clipped = np.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip)
    surr2 = clipped * advantages
    policy_loss = -float(np.mean(np.minimum(surr1, surr2)))
    # Gradient flows only through the unclipped branch of the min.
    g_lp = np.where(surr1 <= surr2, -advantages * ratio, 0.0) / m

    entropy_per = -(probs * lp).sum(axis=1)
    entropy = float(entropy_per.mean())

    d_logits = g_lp[:, None] * (-probs)
    d_logits[np.arange(m), actions] += g_lp
    # d(-coef * H)/d logits
    d_logits += cfg.entropy_coef * probs * (lp + entropy_per[:, None]) / m

    v_clipped = values_old + np.clip(value - values_old,
                                     -cfg.value_clip, cfg.value_clip)
    l_plain = np.square(value - returns)
    l_clip = np.square(v_clipped - returns)
    value_loss = 0.5 * float(np.mean(np.maximum(l_plain, l_clip)))
    inside = np.abs(value - values_old) < cfg.value_clip
    d_value = np.where(l_plain >= l_clip, value - returns,
                       np.where(inside, v_clipped - returns, 0.0))
    d_value = cfg.value_coef * d_value / m

    d_out = np.concatenate([d_logits, d_value[:, None]], axis=1)
    stats = UpdateStats(
        policy_loss=policy_loss,
        value_loss=value_loss,
        entropy=entropy,
        approx_kl=float(np.mean(logp_old - logp_new)),
        clip_fraction=float(np.mean(np.abs(ratio - 1.0) > cfg.clip)),
        minibatches=1,
    )
    return d_out, stats


@dataclass
class TransitionBatch:
    """Flattened training batch (B rows)."""

    features: np.ndarray  # (B, D) float32
    actions: np.ndarray  # (B,) int64
    logp: np.ndarray  # (B,) float64
    values: np.ndarray  # (B,) float64
    advantages: np.ndarray  # (B,) float64
    returns: np.ndarray  # (B,) float64
    version: int = 0


def ppo_update(model: Mlp, opt: Adam, batch: TransitionBatch,
               cfg: PpoConfig, rng: np.random.Generator) -> UpdateStats:
    """One epoch pass (cfg.epochs) over shuffled minibatches. Advantages are
    normalized once per update batch."""
    b = batch.features.shape[0]
    adv = batch.advantages
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    total = UpdateStats()
    for _ in range(cfg.epochs):
        order = rng.permutation(b)
        for start in range(0, b, cfg.minibatch_size):
            sel = order[start:start + cfg.minibatch_size]
            out, cache = model.forward(batch.features[sel])
            d_out, stats = ppo_loss_grad(
                out, batch.actions[sel], batch.logp[sel], adv[sel],
                batch.returns[sel], batch.values[sel], cfg)
            grads = model.backward(cache, d_out.astype(model.dtype))
            stats.grad_norm = opt.step(model, grads, cfg.max_grad_norm)
            total.merge(stats)
    return total
