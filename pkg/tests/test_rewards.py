"""Reward-math oracle suite.

Every reward formula is checked against an independent brute-force
implementation written in this file (naive formulas, numpy prefix statistics,
a from-scratch hashed embedding) on large random input sets, plus exact
algebraic identities for the pairwise-preference probability.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavernrl.rewards import (DEFAULT_Z, SIGMA_FLOOR, EpisodicCounter,
                              IntrinsicRewardConfig, RunningStats, bow_embed,
                              bt_probability, classification_reward,
                              composite_reward, cosine, default_beta,
                              ellm_bow_reward, episodic_normalize,
                              preference_nll, ranking_reward, retrieval_reward)
from cavernrl.nn import make_mlp

RNG = np.random.default_rng(0xAB5)
N_RANDOM = 10_000


# -- Bradley-Terry pairwise probability ------------------------------------

def test_bt_matches_naive_formula_on_random_inputs():
    r1 = RNG.uniform(-30, 30, size=N_RANDOM)
    r2 = RNG.uniform(-30, 30, size=N_RANDOM)
    ours = np.array([bt_probability(a, b) for a, b in zip(r1, r2)])
    naive = np.exp(r1) / (np.exp(r1) + np.exp(r2))
    np.testing.assert_allclose(ours, naive, rtol=1e-9)


def test_bt_sum_to_one_identity():
    r1 = RNG.uniform(-200, 200, size=N_RANDOM)
    r2 = RNG.uniform(-200, 200, size=N_RANDOM)
    for a, b in zip(r1, r2):
        assert abs(bt_probability(a, b) + bt_probability(b, a) - 1.0) < 1e-12


def test_bt_shift_invariance_identity():
    r1 = RNG.uniform(-50, 50, size=N_RANDOM)
    r2 = RNG.uniform(-50, 50, size=N_RANDOM)
    shift = RNG.uniform(-500, 500, size=N_RANDOM)
    for a, b, c in zip(r1, r2, shift):
        assert abs(bt_probability(a + c, b + c) - bt_probability(a, b)) < 1e-12


def test_bt_stable_at_extreme_scores():
    assert bt_probability(1000.0, -1000.0) == pytest.approx(1.0)
    assert bt_probability(-1000.0, 1000.0) == pytest.approx(0.0, abs=1e-300)
    assert math.isfinite(bt_probability(750.0, 749.0))


@given(st.floats(-100, 100), st.floats(-100, 100))
@settings(max_examples=200, deadline=None)
def test_bt_bounds_property(a, b):
    p = bt_probability(a, b)
    assert 0.0 <= p <= 1.0


# -- preference negative log-likelihood ------------------------------------

def _naive_nll(r1, r2, label):
    # Computed symmetrically (not p2 = 1 - p1, which cancels catastrophically
    # when one score dominates).
    denom = math.exp(r1) + math.exp(r2)
    p1 = math.exp(r1) / denom
    p2 = math.exp(r2) / denom
    if label == 1:
        return -math.log(p1)
    if label == 2:
        return -math.log(p2)
    return -0.5 * math.log(p1) - 0.5 * math.log(p2)


def test_preference_nll_matches_naive_formula():
    r1 = RNG.uniform(-20, 20, size=N_RANDOM)
    r2 = RNG.uniform(-20, 20, size=N_RANDOM)
    labels = RNG.choice([1, 2, None], size=N_RANDOM)
    for a, b, lab in zip(r1, r2, labels):
        lab = None if lab is None else int(lab)
        assert preference_nll(a, b, lab) == pytest.approx(
            _naive_nll(a, b, lab), rel=1e-9)


def test_preference_nll_tie_label_is_ln2_at_equal_scores():
    # Uniform target [1/2, 1/2] at equal scores: -1/2 log(1/2) - 1/2 log(1/2).
    for r in (-3.0, 0.0, 17.5):
        assert preference_nll(r, r, None) == pytest.approx(math.log(2), rel=1e-12)


def test_preference_nll_rejects_bad_label():
    with pytest.raises(ValueError):
        preference_nll(0.0, 0.0, 3)


def test_preference_nll_gradient_signs_on_grid():
    """The loss in the score gap d = r1 - r2 must always decrease toward the
    labeled optimum: d -> +inf for label 1, -inf for label 2, 0 for no
    preference."""
    h = 1e-6
    for d in np.linspace(-6, 6, 25):
        g1 = (preference_nll(d + h, 0, 1) - preference_nll(d - h, 0, 1)) / (2 * h)
        g2 = (preference_nll(d + h, 0, 2) - preference_nll(d - h, 0, 2)) / (2 * h)
        gn = (preference_nll(d + h, 0, None) - preference_nll(d - h, 0, None)) / (2 * h)
        assert g1 < 0
        assert g2 > 0
        if abs(d) > 1e-3:
            assert np.sign(gn) == np.sign(d)


def test_episodic_bonus_total_is_bounded_by_zeta():
    """Total reward from one caption repeated k times is r * sum n^-z,
    bounded by r * zeta(z) for z > 1."""
    from scipy.special import zeta

    r, z = 0.8, DEFAULT_Z
    for k in (1, 5, 50, 500):
        total = sum(episodic_normalize(r, n, z) for n in range(1, k + 1))
        direct = r * np.sum(1.0 / np.arange(1, k + 1, dtype=np.float64) ** z)
        assert total == pytest.approx(direct, rel=1e-12)
        assert total < r * zeta(z)


def test_classification_threshold_monotone_in_eta():
    # For a fixed model, raising eta can only turn rewards off, never on.
    model = make_mlp((6, 8, 1), head="sigmoid", seed=21, dtype=np.float64)
    x = RNG.normal(size=(256, 6))
    lo = classification_reward(x, model, eta=0.3)
    hi = classification_reward(x, model, eta=0.7)
    assert np.all(hi <= lo)


# -- episodic normalization -------------------------------------------------

def test_episodic_normalization_matches_brute_force():
    values = RNG.uniform(-5, 5, size=N_RANDOM)
    counts = RNG.integers(1, 50, size=N_RANDOM)
    for v, n in zip(values, counts):
        assert episodic_normalize(float(v), int(n)) == pytest.approx(
            v / n ** DEFAULT_Z, rel=1e-9)
        assert episodic_normalize(float(v), int(n), z=1.7) == pytest.approx(
            v / n ** 1.7, rel=1e-9)


def test_episodic_normalization_first_occurrence_is_identity():
    assert episodic_normalize(0.73, 1) == 0.73


def test_episodic_normalization_rejects_nonpositive_count():
    with pytest.raises(ValueError):
        episodic_normalize(1.0, 0)


def test_episodic_counter_counts_per_caption_and_resets():
    c = EpisodicCounter()
    assert c.observe("a") == 1
    assert c.observe("a") == 2
    assert c.observe("b") == 1
    assert c.observe("a") == 3
    c.reset()
    assert c.observe("a") == 1


# -- running statistics and ranking reward ----------------------------------

def test_running_stats_match_numpy_on_prefixes():
    stream = RNG.normal(2.0, 3.0, size=2_000)
    stats = RunningStats()
    for i, x in enumerate(stream):
        stats.update(float(x))
        prefix = stream[: i + 1]
        assert stats.mean == pytest.approx(prefix.mean(), rel=1e-9, abs=1e-12)
        if i >= 1:
            assert stats.variance() == pytest.approx(
                prefix.var(), rel=1e-8, abs=1e-12)


def test_ranking_reward_matches_prefix_zscore_oracle():
    """The running z-score reward over a long stream must equal a brute-force
    recomputation from prefix mean/std at every position."""
    stream = RNG.normal(0.0, 1.5, size=N_RANDOM)
    stats = RunningStats()
    ours = np.array([ranking_reward(float(x), stats) for x in stream])
    oracle = np.zeros_like(stream)
    for i, x in enumerate(stream):
        if i >= 2:  # fewer than two prior samples -> 0
            prefix = stream[:i]
            sigma = max(prefix.std(), SIGMA_FLOOR)
            zscore = (x - prefix.mean()) / sigma
            oracle[i] = zscore if zscore > 0.0 else 0.0
    np.testing.assert_allclose(ours, oracle, rtol=1e-9, atol=1e-12)


def test_ranking_reward_thresholds_at_nu_and_keeps_zscore_value():
    stats = RunningStats()
    for x in (0.0, 2.0):
        stats.update(x)
    # mean 1, sigma 1; raw 3 -> z-score exactly 2, and the reward IS the
    # z-score, not an indicator.
    assert ranking_reward(3.0, stats, nu=0.0, update_stats=False) == pytest.approx(2.0)
    assert ranking_reward(3.0, stats, nu=2.5, update_stats=False) == 0.0
    assert ranking_reward(-1.0, stats, nu=0.0, update_stats=False) == 0.0


def test_ranking_reward_needs_two_samples():
    stats = RunningStats()
    assert ranking_reward(5.0, stats) == 0.0  # count 0 -> 0, then updates
    assert ranking_reward(5.0, stats) == 0.0  # count 1 -> 0
    assert stats.count == 2


def test_ranking_reward_updates_stats_after_computing():
    stats = RunningStats()
    stats.update(0.0)
    stats.update(2.0)
    before = (stats.mean, stats.count)
    out = ranking_reward(10.0, stats)
    # Reward used mean 1 / sigma 1 (the pre-update stats), giving z = 9.
    assert out == pytest.approx(9.0)
    assert before == (1.0, 2)
    assert stats.count == 3


def test_ranking_reward_sigma_floor():
    stats = RunningStats()
    for _ in range(5):
        stats.update(1.0)
    out = ranking_reward(1.0 + 1e-6, stats, update_stats=False)
    assert out == pytest.approx(1e-6 / SIGMA_FLOOR)


# -- classification and retrieval -------------------------------------------

def test_classification_reward_thresholds_strictly():
    # Zero-initialized net outputs exactly sigmoid(0) = 0.5.
    model = make_mlp((4, 3, 1), head="sigmoid", seed=0, dtype=np.float64)
    for w in model.weights:
        w[...] = 0.0
    x = np.ones((5, 4))
    p, _ = model.forward(x)
    assert np.all(p == 0.5)
    assert np.all(classification_reward(x, model, eta=0.5) == 0.0)  # strict >
    assert np.all(classification_reward(x, model, eta=0.4999) == 1.0)


def test_classification_reward_real_valued_returns_probability():
    model = make_mlp((4, 3, 1), head="sigmoid", seed=3, dtype=np.float64)
    x = RNG.normal(size=(64, 4))
    p, _ = model.forward(x)
    out = classification_reward(x, model, eta=0.5, real_valued=True)
    np.testing.assert_allclose(out, p[:, 0], rtol=1e-12)


def test_classification_reward_validates_eta():
    model = make_mlp((4, 3, 1), head="sigmoid")
    for bad in (0.0, 1.0, 1.5, -0.1):
        with pytest.raises(ValueError, match=r"eta must be in \(0, 1\)"):
            classification_reward(np.zeros(4), model, eta=bad)


def test_retrieval_reward_is_stored_label_or_zero():
    table = {"good": 1, "bad": 0}
    missed = []
    assert retrieval_reward("good", table.get) == 1.0
    assert retrieval_reward("bad", table.get) == 0.0
    assert retrieval_reward("unknown", table.get, on_miss=missed.append) == 0.0
    assert missed == ["unknown"]


def test_composite_reward_matches_formula():
    ext = RNG.uniform(-10, 10, size=N_RANDOM)
    intr = RNG.uniform(-10, 10, size=N_RANDOM)
    beta = RNG.uniform(0, 1, size=N_RANDOM)
    for e, i, b in zip(ext, intr, beta):
        assert composite_reward(e, i, b) == pytest.approx(e + b * i, rel=1e-12)


# -- hashed bag-of-words baseline -------------------------------------------

def _oracle_embed(text: str, dim: int) -> np.ndarray:
    """From-scratch reimplementation of the documented embedding contract:
    blake2b-hashed signed bag of lowercase alphanumeric tokens."""
    import hashlib
    import re

    vec = np.zeros(dim, dtype=np.float64)
    for tok in re.findall(r"[a-z0-9]+", text.lower()):
        digest = hashlib.blake2b(f"{0xB07}:{tok}".encode(), digest_size=8).digest()
        h = int.from_bytes(digest, "little")
        vec[h % dim] += 1.0 if (h >> 62) & 1 else -1.0
    return vec


def test_ellm_bow_reward_matches_brute_force():
    goal = "fight monsters and collect gold"
    captions = ["You kill the newt!", "5 gold pieces.", "", "gold gold gold",
                "You find a hidden passage."]
    for cap in captions:
        for count in (1, 2, 7):
            a, g = _oracle_embed(cap, 64), _oracle_embed(goal, 64)
            na, ng = np.linalg.norm(a), np.linalg.norm(g)
            expect = 0.0 if na == 0 or ng == 0 else float(a @ g / (na * ng))
            expect /= count ** DEFAULT_Z
            assert ellm_bow_reward(cap, goal, count) == pytest.approx(
                expect, rel=1e-6, abs=1e-12)


def test_bow_embedding_is_order_invariant():
    a = bow_embed("collect the gold and kill the monster")
    b = bow_embed("kill the monster and collect the gold")
    np.testing.assert_array_equal(a, b)
    assert cosine(a, b) == pytest.approx(1.0)


def test_cosine_zero_vector_is_zero():
    assert cosine(np.zeros(8), np.ones(8)) == 0.0
    assert bow_embed("").sum() == 0.0


def test_cosine_matches_numpy():
    for _ in range(200):
        a = RNG.normal(size=16)
        b = RNG.normal(size=16)
        expect = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
        assert cosine(a, b) == pytest.approx(expect, rel=1e-12)


# -- configuration defaults -------------------------------------------------

def test_default_beta_table():
    assert default_beta("retrieval", "score") == 0.1
    assert default_beta("retrieval", "staircase") == 0.5
    assert default_beta("classification", "score") == 0.1
    assert default_beta("classification", "staircase") == 0.4
    assert default_beta("ranking", "score") == 0.05
    assert default_beta("ranking", "staircase") == 0.05
    assert default_beta("ellm_bow", "score") == 0.1
    assert default_beta("ellm_bow", "reward_free") == 0.5


def test_reward_config_validation():
    with pytest.raises(ValueError, match="unknown mechanism"):
        IntrinsicRewardConfig(mechanism="nope")
    with pytest.raises(ValueError, match=r"eta must be in \(0, 1\)"):
        IntrinsicRewardConfig(eta=1.5)
    with pytest.raises(ValueError, match="z must be positive"):
        IntrinsicRewardConfig(z=0.0)
    cfg = IntrinsicRewardConfig(mechanism="classification", beta=None)
    assert cfg.resolved_beta("staircase") == 0.4
    assert IntrinsicRewardConfig(beta=0.7).resolved_beta("score") == 0.7
