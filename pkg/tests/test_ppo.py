"""PPO math tests: GAE against a brute-force double loop, the clipped
surrogate's closed-form cases, clip equivalence with vanilla policy gradient
at ratio 1, staleness gating, and end-to-end learning on a small corridor
task."""

import numpy as np
import pytest

from cavernrl.nn import Adam
from cavernrl.ppo import (PpoConfig, TransitionBatch, UpdateStats, compute_gae,
                          enforce_staleness, log_softmax, make_policy,
                          policy_heads, ppo_loss_grad, ppo_update)


def _brute_gae(rewards, values, dones, bootstrap, gamma, lam):
    """Independent double-loop GAE: for each t, sum (γλ)^{k-t} δ_k forward
    until the episode boundary."""
    n, t_len = rewards.shape
    adv = np.zeros((n, t_len))
    for i in range(n):
        for t in range(t_len):
            acc, coef = 0.0, 1.0
            for k in range(t, t_len):
                next_v = bootstrap[i] if k == t_len - 1 else values[i, k + 1]
                nonterm = 0.0 if dones[i, k] else 1.0
                acc += coef * (rewards[i, k] + gamma * next_v * nonterm
                               - values[i, k])
                if dones[i, k]:
                    break
                coef *= gamma * lam
            adv[i, t] = acc
    return adv


# -- GAE ---------------------------------------------------------------------

def test_gae_matches_brute_force_on_random_episodes():
    rng = np.random.default_rng(0xA6E)
    for _ in range(50):
        n, t_len = int(rng.integers(1, 4)), int(rng.integers(1, 17))
        rewards = rng.normal(size=(n, t_len))
        values = rng.normal(size=(n, t_len))
        dones = rng.random((n, t_len)) < 0.15
        bootstrap = rng.normal(size=n)
        gamma = float(rng.uniform(0.9, 1.0))
        lam = float(rng.uniform(0.8, 1.0))
        adv, ret = compute_gae(rewards, values, dones, bootstrap, gamma, lam)
        expect = _brute_gae(rewards, values, dones, bootstrap, gamma, lam)
        np.testing.assert_allclose(adv, expect, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(ret, adv + values, rtol=1e-12)


def test_gae_gamma1_lambda1_zero_values_is_future_reward_sum():
    rng = np.random.default_rng(5)
    rewards = rng.normal(size=(2, 12))
    values = np.zeros((2, 12))
    dones = np.zeros((2, 12), dtype=bool)
    dones[0, 5] = True  # first row: episodes [0..5] and [6..11]
    adv, _ = compute_gae(rewards, values, dones, np.zeros(2), 1.0, 1.0)
    for t in range(6):
        assert adv[0, t] == pytest.approx(rewards[0, t:6].sum(), rel=1e-12)
    for t in range(6, 12):
        assert adv[0, t] == pytest.approx(rewards[0, t:].sum(), rel=1e-12)
    for t in range(12):
        assert adv[1, t] == pytest.approx(rewards[1, t:].sum(), rel=1e-12)


def test_gae_all_zero_inputs_give_zero_advantages():
    adv, ret = compute_gae(np.zeros((3, 8)), np.zeros((3, 8)),
                           np.zeros((3, 8), dtype=bool), np.zeros(3),
                           0.999, 0.95)
    assert not adv.any() and not ret.any()


def test_gae_single_step_delta():
    adv, ret = compute_gae(np.array([[1.0]]), np.array([[0.0]]),
                           np.array([[False]]), np.array([0.0]), 0.99, 0.95)
    assert adv[0, 0] == 1.0
    assert ret[0, 0] == 1.0


def test_gae_done_step_ignores_bootstrap_and_next_value():
    rewards = np.array([[2.0, 7.0]])
    values = np.array([[0.5, 100.0]])
    dones = np.array([[True, True]])
    adv, _ = compute_gae(rewards, values, dones, np.array([1000.0]), 0.99, 0.95)
    np.testing.assert_allclose(adv, rewards - values, rtol=1e-12)


# -- staleness ---------------------------------------------------------------

def test_enforce_staleness_boundaries():
    assert enforce_staleness(10, 10, 4)
    assert enforce_staleness(6, 10, 4)
    assert not enforce_staleness(5, 10, 4)
    assert enforce_staleness(0, 0, 0)


def test_enforce_staleness_rejects_future_batches():
    with pytest.raises(ValueError, match="future"):
        enforce_staleness(11, 10, 4)


# -- loss pieces -------------------------------------------------------------

def _single_sample_out(n_actions=4):
    """One-row network output with uniform logits and zero value."""
    return np.zeros((1, n_actions + 1), dtype=np.float64)


def test_clip_inactive_matches_unclipped_objective():
    rng = np.random.default_rng(2)
    cfg = PpoConfig(entropy_coef=0.0, value_coef=0.0)
    m, n_act = 64, 5
    out = rng.normal(size=(m, n_act + 1))
    actions = rng.integers(0, n_act, size=m)
    lp = log_softmax(out[:, :-1])
    logp_new = lp[np.arange(m), actions]
    # Behavior log-probs chosen so every ratio lands strictly inside the band.
    ratio = rng.uniform(0.92, 1.08, size=m)
    logp_old = logp_new - np.log(ratio)
    adv = rng.normal(size=m)
    _, stats = ppo_loss_grad(out, actions, logp_old, adv,
                             np.zeros(m), out[:, -1], cfg)
    assert stats.clip_fraction == 0.0
    assert stats.policy_loss == pytest.approx(-np.mean(ratio * adv), rel=1e-9)


def test_clip_active_positive_advantage_forces_loss():
    cfg = PpoConfig()
    out = _single_sample_out()
    lp = log_softmax(out[:, :-1])
    logp_old = lp[0, 2] - np.log(1.5)  # ratio = 1.5
    for a in (0.7, 2.0):
        _, stats = ppo_loss_grad(out, np.array([2]), np.array([logp_old]),
                                 np.array([a]), np.zeros(1), np.zeros(1), cfg)
        assert stats.policy_loss == pytest.approx(-1.1 * a, rel=1e-9)
        assert stats.clip_fraction == 1.0


def test_clip_active_negative_advantage_uses_lower_band():
    cfg = PpoConfig()
    out = _single_sample_out()
    lp = log_softmax(out[:, :-1])
    logp_old = lp[0, 1] - np.log(0.5)  # ratio = 0.5
    a = -1.3
    _, stats = ppo_loss_grad(out, np.array([1]), np.array([logp_old]),
                             np.array([a]), np.zeros(1), np.zeros(1), cfg)
    # surr1 = 0.5a, surr2 = 0.9a; min picks 0.9a for a < 0.
    assert stats.policy_loss == pytest.approx(-0.9 * a, rel=1e-9)


def test_entropy_stat_is_ln_n_for_uniform_logits():
    cfg = PpoConfig()
    out = np.zeros((8, 13), dtype=np.float64)  # 12 actions + value
    _, stats = ppo_loss_grad(out, np.zeros(8, dtype=int), np.full(8, -np.log(12.0)),
                             np.zeros(8), np.zeros(8), np.zeros(8), cfg)
    assert stats.entropy == pytest.approx(np.log(12.0), rel=1e-12)


def test_approx_kl_zero_when_behavior_equals_current():
    rng = np.random.default_rng(3)
    cfg = PpoConfig()
    out = rng.normal(size=(32, 6))
    actions = rng.integers(0, 5, size=32)
    lp = log_softmax(out[:, :-1])
    logp_old = lp[np.arange(32), actions]
    _, stats = ppo_loss_grad(out, actions, logp_old, rng.normal(size=32),
                             np.zeros(32), out[:, -1], cfg)
    assert stats.approx_kl == pytest.approx(0.0, abs=1e-12)
    assert stats.clip_fraction == 0.0


def test_update_stats_merge_is_minibatch_weighted():
    a = UpdateStats(policy_loss=1.0, entropy=2.0, minibatches=1)
    b = UpdateStats(policy_loss=4.0, entropy=0.0, minibatches=3)
    a.merge(b)
    assert a.minibatches == 4
    assert a.policy_loss == pytest.approx(0.25 * 1.0 + 0.75 * 4.0)
    assert a.entropy == pytest.approx(0.5)
    c = UpdateStats()
    c.merge(UpdateStats())
    assert c.minibatches == 0


# -- clip equivalence with vanilla policy gradient ---------------------------

def test_ratio_one_gradient_equals_vanilla_policy_gradient():
    """Behavior policy == current policy => ratio = 1, and the PPO surrogate
    gradient must equal the gradient of -mean(A * log pi(a|s)), checked by
    central finite differences on a small two-action model."""
    rng = np.random.default_rng(0x5EED)
    cfg = PpoConfig(entropy_coef=0.0, value_coef=0.0)
    model = make_policy(4, 2, PpoConfig(hidden=(8,)), seed=1, dtype=np.float64)
    m = 16
    x = rng.normal(size=(m, 4))
    actions = rng.integers(0, 2, size=m)
    adv = rng.normal(size=m)

    out, cache = model.forward(x)
    lp = log_softmax(out[:, :-1])
    logp_old = lp[np.arange(m), actions]
    d_out, _ = ppo_loss_grad(out, actions, logp_old, adv,
                             np.zeros(m), out[:, -1], cfg)
    grads = model.backward(cache, d_out)

    def vanilla_loss():
        o, _ = model.forward(x)
        l = log_softmax(o[:, :-1])
        return -float(np.mean(adv * l[np.arange(m), actions]))

    probe = 1e-5
    for param, grad in zip(model.params(), grads.flat()):
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = param[ix]
            param[ix] = orig + probe
            hi = vanilla_loss()
            param[ix] = orig - probe
            lo = vanilla_loss()
            param[ix] = orig
            fd = (hi - lo) / (2 * probe)
            np.testing.assert_allclose(grad[ix], fd, rtol=1e-4, atol=1e-8)


# -- ppo_update plumbing -----------------------------------------------------

def _toy_batch(rng, b=64, d=6, n_act=3):
    model = make_policy(d, n_act, PpoConfig(hidden=(8,)), seed=0)
    feats = rng.normal(size=(b, d)).astype(np.float32)
    out, _ = model.forward(feats)
    lp = log_softmax(out[:, :-1].astype(np.float64))
    actions = rng.integers(0, n_act, size=b)
    return model, TransitionBatch(
        features=feats, actions=actions,
        logp=lp[np.arange(b), actions],
        values=out[:, -1].astype(np.float64),
        advantages=rng.normal(size=b),
        returns=rng.normal(size=b))


def test_ppo_update_minibatch_count_and_finite_stats():
    rng = np.random.default_rng(0)
    model, batch = _toy_batch(rng, b=64)
    cfg = PpoConfig(lr=1e-3, minibatch_size=16, epochs=1, hidden=(8,))
    stats = ppo_update(model, Adam(lr=cfg.lr), batch, cfg,
                       np.random.default_rng(1))
    assert stats.minibatches == 4
    for v in (stats.policy_loss, stats.value_loss, stats.entropy,
              stats.approx_kl, stats.grad_norm):
        assert np.isfinite(v)


def test_ppo_update_constant_advantages_normalize_to_zero_policy_loss():
    rng = np.random.default_rng(0)
    model, batch = _toy_batch(rng, b=32)
    batch.advantages = np.full(32, 7.3)
    cfg = PpoConfig(lr=0.0, minibatch_size=32, entropy_coef=0.0, hidden=(8,))
    stats = ppo_update(model, Adam(lr=0.0), batch, cfg,
                       np.random.default_rng(2))
    assert stats.policy_loss == pytest.approx(0.0, abs=1e-9)


def test_ppo_update_deterministic_under_seed():
    def run():
        rng = np.random.default_rng(4)
        model, batch = _toy_batch(rng, b=64)
        cfg = PpoConfig(lr=1e-3, minibatch_size=16, hidden=(8,))
        ppo_update(model, Adam(lr=cfg.lr), batch, cfg, np.random.default_rng(9))
        return [p.copy() for p in model.params()]

    for a, b in zip(run(), run()):
        np.testing.assert_array_equal(a, b)


def test_ppo_config_defaults_match_contract():
    cfg = PpoConfig()
    assert cfg.clip == 0.1
    assert cfg.value_clip == 1.0
    assert cfg.epochs == 1
    assert cfg.batch_size == 4096
    assert cfg.max_grad_norm == 4.0
    assert cfg.value_coef == 0.5
    assert cfg.staleness_max == 4
    assert cfg.batch_size % cfg.rollout_len == 0


# -- learning sanity ---------------------------------------------------------

class _Corridor:
    """5x5 grid, start (0,0), goal (4,4); 4 moves; -0.01 per step, +1.0 on
    reaching the goal; cap 50 steps. Optimal return = 0.92 in 8 steps."""

    SIZE = 5
    CAP = 50
    MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
    OPTIMAL = 1.0 - 0.01 * 8

    def __init__(self):
        self.reset()

    def reset(self):
        self.pos = (0, 0)
        self.t = 0
        return self._obs()

    def _obs(self):
        v = np.zeros(25, dtype=np.float32)
        v[self.pos[0] * 5 + self.pos[1]] = 1.0
        return v

    def step(self, action):
        self.t += 1
        dr, dc = self.MOVES[action]
        r = min(max(self.pos[0] + dr, 0), 4)
        c = min(max(self.pos[1] + dc, 0), 4)
        self.pos = (r, c)
        if self.pos == (4, 4):
            return self._obs(), 0.99, True
        return self._obs(), -0.01, self.t >= self.CAP


@pytest.mark.slow
def test_corridor_reaches_90_percent_of_optimal_3_seeds():
    cfg = PpoConfig(lr=3e-3, batch_size=2048, minibatch_size=256,
                    entropy_coef=0.003, gamma=0.99, gae_lambda=0.95,
                    hidden=(32, 32), rollout_len=128)
    num_envs, t_len = 16, 128

    for seed in (0, 1, 2):
        rng = np.random.default_rng(seed)
        model = make_policy(25, 4, cfg, seed=seed)
        opt = Adam(lr=cfg.lr)
        envs = [_Corridor() for _ in range(num_envs)]
        obs = np.stack([e.reset() for e in envs])
        returns_hist = []
        ep_ret = np.zeros(num_envs)

        steps = 0
        while steps < 200_000:
            feats = np.empty((num_envs, t_len, 25), dtype=np.float32)
            acts = np.empty((num_envs, t_len), dtype=np.int64)
            logp = np.empty((num_envs, t_len))
            vals = np.empty((num_envs, t_len))
            rews = np.empty((num_envs, t_len))
            dones = np.empty((num_envs, t_len), dtype=bool)
            for t in range(t_len):
                feats[:, t] = obs
                out, _ = model.forward(obs)
                lp = log_softmax(out[:, :-1].astype(np.float64))
                probs = np.exp(lp)
                u = rng.random((num_envs, 1))
                a = (probs.cumsum(axis=1) < u).sum(axis=1)
                np.clip(a, 0, 3, out=a)
                acts[:, t] = a
                logp[:, t] = lp[np.arange(num_envs), a]
                vals[:, t] = out[:, -1]
                for i, env in enumerate(envs):
                    o, r, d = env.step(int(a[i]))
                    rews[i, t] = r
                    dones[i, t] = d
                    ep_ret[i] += r
                    if d:
                        returns_hist.append(ep_ret[i])
                        ep_ret[i] = 0.0
                        o = env.reset()
                    obs[i] = o
            steps += num_envs * t_len
            out, _ = model.forward(obs)
            adv, ret = compute_gae(rews, vals, dones, out[:, -1].astype(np.float64),
                                   cfg.gamma, cfg.gae_lambda)
            batch = TransitionBatch(
                features=feats.reshape(-1, 25), actions=acts.ravel(),
                logp=logp.ravel(), values=vals.ravel(),
                advantages=adv.ravel(), returns=ret.ravel())
            ppo_update(model, opt, batch, cfg, rng)

        tail = returns_hist[-200:]
        mean_return = float(np.mean(tail))
        assert mean_return >= 0.9 * _Corridor.OPTIMAL, \
            f"seed {seed}: mean return {mean_return:.3f} of optimal {_Corridor.OPTIMAL}"
