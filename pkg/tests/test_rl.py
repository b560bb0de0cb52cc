"""RL agent: divergence-regularised rewards, replay buffer, TD3 learner."""

import copy

import numpy as np
import pytest

from helpers import random_simplex
from portagents import nn
from portagents.errors import DimensionMismatch, InsufficientBuffer, NonPositiveGrowth
from portagents.rl import (
    LN2,
    ReplayBuffer,
    RewardConfig,
    Td3Agent,
    Td3Config,
    Transition,
    episode_reward,
    jensen_shannon,
    load_agent,
    per_step_reward,
    save_agent,
)

SMALL = Td3Config(hidden=(8, 8), warmup=0, batch_size=8, buffer_capacity=64)


def fill_buffer(n, obs_dim=5, n_assets=3, seed=0):
    rng = np.random.default_rng(seed)
    buf = ReplayBuffer(256, seed=seed + 1)
    for _ in range(n):
        a = rng.dirichlet(np.ones(n_assets))
        buf.push(
            Transition(
                o_prev=rng.normal(size=obs_dim),
                a_final=a,
                a_rl=a,
                o_next=rng.normal(size=obs_dim),
                reward=float(rng.normal(scale=0.01)),
            )
        )
    return buf


# -- Jensen-Shannon ------------------------------------------------------------


def test_jsd_identical_distributions():
    p = np.array([0.2, 0.3, 0.5])
    assert jensen_shannon(p, p) == 0.0


def test_jsd_disjoint_supports():
    assert jensen_shannon([1.0, 0.0], [0.0, 1.0]) == pytest.approx(LN2, abs=1e-15)


def test_jsd_matches_two_kl_oracle():
    rng = np.random.default_rng(0)
    for _ in range(30):
        p = random_simplex(rng, 5)
        q = random_simplex(rng, 5)
        m = 0.5 * (p + q)
        want = 0.5 * np.sum(p * np.log(p / m)) + 0.5 * np.sum(q * np.log(q / m))
        assert jensen_shannon(p, q) == pytest.approx(want, abs=1e-12)
        assert jensen_shannon(p, q) == pytest.approx(jensen_shannon(q, p), abs=1e-15)


def test_jsd_bounded_and_definite():
    rng = np.random.default_rng(1)
    for _ in range(100):
        p = random_simplex(rng, 4)
        q = random_simplex(rng, 4)
        d = jensen_shannon(p, q)
        assert 0.0 <= d <= LN2
        if np.allclose(p, q, atol=1e-12):
            assert d < 1e-12


def test_jsd_rejects_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        jensen_shannon([0.5, 0.5], [1.0, 0.0, 0.0])


# -- rewards ---------------------------------------------------------------------


def test_per_step_reward_flat_growth_identical_actions():
    w = np.array([0.5, 0.5])
    assert per_step_reward(1.0, w, w, RewardConfig()) == 0.0


def test_per_step_reward_divergence_penalty():
    got = per_step_reward(1.0, [1.0, 0.0], [0.0, 1.0], RewardConfig(1.0, 1.0))
    assert got == pytest.approx(-LN2, abs=1e-15)


def test_per_step_reward_rejects_non_positive_growth():
    w = np.array([1.0, 0.0])
    with pytest.raises(NonPositiveGrowth):
        per_step_reward(0.0, w, w, RewardConfig())


def test_episode_reward_flat():
    w = 0.0
    summary = episode_reward([1.0, 1.0, 1.0], [w, w, w], 1.0, RewardConfig())
    assert summary.j == 0.0


def test_episode_reward_lambda2_zero_isolates_return_term():
    summary = episode_reward([1.02, 0.99], [0.3, 0.1], 1.0, RewardConfig(1.0, 0.0))
    assert summary.j == pytest.approx(summary.j_return)


def test_episode_reward_hand_case():
    # T=2, C0=1, identical actions: J = (ln 1.1 + ln 0.9) / 2
    summary = episode_reward([1.1, 0.9], [0.0, 0.0], 1.0, RewardConfig(1.0, 0.1))
    assert summary.j == pytest.approx(-0.005025167926750707, abs=1e-15)
    assert summary.j == pytest.approx(-0.005034, abs=1e-5)


def test_episode_reward_matches_per_step_aggregation():
    # J = lambda1 * log(C0)/T + mean of per-step rewards
    rng = np.random.default_rng(2)
    config = RewardConfig(1.3, 0.25)
    for _ in range(100):
        t = int(rng.integers(2, 40))
        growths = rng.uniform(0.95, 1.06, size=t)
        c0 = float(rng.uniform(0.5, 3.0))
        actions = [(random_simplex(rng, 4), random_simplex(rng, 4)) for _ in range(t)]
        jsds = [jensen_shannon(a, b) for a, b in actions]
        steps = [
            per_step_reward(g, a, b, config) for g, (a, b) in zip(growths, actions)
        ]
        want = config.lambda1 * np.log(c0) / t + np.mean(steps)
        got = episode_reward(growths, jsds, c0, config).j
        assert got == pytest.approx(want, abs=1e-10)


def test_episode_reward_validates_inputs():
    with pytest.raises(DimensionMismatch):
        episode_reward([1.0], [0.0, 0.0], 1.0, RewardConfig())
    with pytest.raises(DimensionMismatch):
        episode_reward([], [], 1.0, RewardConfig())
    with pytest.raises(NonPositiveGrowth):
        episode_reward([1.0, -0.2], [0.0, 0.0], 1.0, RewardConfig())
    with pytest.raises(NonPositiveGrowth):
        episode_reward([1.0], [0.0], 0.0, RewardConfig())


# -- replay buffer ----------------------------------------------------------------


def test_buffer_ring_overwrites_oldest():
    buf = ReplayBuffer(4, seed=0)
    for i in range(6):
        w = np.ones(2) / 2
        buf.push(Transition(np.array([float(i)]), w, w, np.array([float(i)]), float(i)))
    assert len(buf) == 4
    stored = sorted(t.reward for t in buf.items())
    assert stored == [2.0, 3.0, 4.0, 5.0]


def test_buffer_sample_without_replacement():
    buf = fill_buffer(20)
    batch = buf.sample(20)
    ids = {id(t) for t in batch}
    assert len(ids) == 20


def test_buffer_sample_insufficient():
    buf = fill_buffer(3)
    with pytest.raises(InsufficientBuffer):
        buf.sample(4)


def test_buffer_sampling_deterministic():
    a = fill_buffer(30, seed=7)
    b = fill_buffer(30, seed=7)
    ra = [t.reward for t in a.sample(8)]
    rb = [t.reward for t in b.sample(8)]
    assert ra == rb


# -- TD3 agent ----------------------------------------------------------------------


def test_actor_zero_weights_gives_uniform():
    agent = Td3Agent(obs_dim=5, n_assets=4, config=SMALL, seed=0)
    for p in agent.actor.params():
        p[:] = 0.0
    action = agent.select_action(np.ones(5))
    np.testing.assert_allclose(action, np.full(4, 0.25), atol=1e-12)


def test_select_action_deterministic_without_noise():
    agent = Td3Agent(obs_dim=5, n_assets=3, config=SMALL, seed=1)
    obs = np.linspace(-1, 1, 5)
    np.testing.assert_array_equal(agent.select_action(obs), agent.select_action(obs))


def test_select_action_reproducible_with_seed():
    obs = np.linspace(-1, 1, 5)
    a = Td3Agent(5, 3, SMALL, seed=3).select_action(obs, explore=True)
    b = Td3Agent(5, 3, SMALL, seed=3).select_action(obs, explore=True)
    np.testing.assert_array_equal(a, b)


def test_select_action_always_on_simplex():
    agent = Td3Agent(obs_dim=6, n_assets=5, config=SMALL, seed=4)
    rng = np.random.default_rng(5)
    for _ in range(50):
        w = agent.select_action(rng.normal(scale=3, size=6), explore=True)
        assert w.min() >= 0.0
        assert w.sum() == pytest.approx(1.0, abs=1e-9)


def test_td_targets_discount_free():
    config = Td3Config(hidden=(8, 8), gamma=0.0, warmup=0, batch_size=4, buffer_capacity=32)
    agent = Td3Agent(obs_dim=5, n_assets=3, config=config, seed=6)
    rewards = np.ones((4, 1))
    obs_next = np.random.default_rng(7).normal(size=(4, 5))
    targets = agent._td_targets(rewards, obs_next)
    np.testing.assert_allclose(targets, np.ones((4, 1)), atol=1e-12)


def test_td_targets_use_elementwise_min_of_twin_critics():
    agent = Td3Agent(obs_dim=5, n_assets=3, config=SMALL, seed=8)
    clone = copy.deepcopy(agent)  # clones the noise stream too
    rewards = np.zeros((6, 1))
    obs_next = np.random.default_rng(9).normal(size=(6, 5))
    targets = agent._td_targets(rewards, obs_next)

    logits, _ = nn.forward(clone.actor_target, obs_next)
    noise = clone.config.sigma_smooth * clone.noise_rng.standard_normal(logits.shape)
    noise = np.clip(noise, -clone.config.noise_clip, clone.config.noise_clip)
    q_in = np.concatenate([obs_next, nn.softmax(logits + noise)], axis=1)
    q1, _ = nn.forward(clone.critic1_target, q_in)
    q2, _ = nn.forward(clone.critic2_target, q_in)
    min_q = np.minimum(q1, q2)
    np.testing.assert_allclose(targets, rewards + clone.config.gamma * min_q, atol=1e-12)
    assert np.all(min_q <= q1 + 1e-15) and np.all(min_q <= q2 + 1e-15)


def test_policy_delay_gates_actor_updates():
    agent = Td3Agent(obs_dim=5, n_assets=3, config=SMALL, seed=10)
    buf = fill_buffer(32)
    flags = [agent.update(buf)["did_policy_update"] for _ in range(4)]
    assert flags == [False, True, False, True]
    out = agent.update(buf)
    assert "critic_loss" in out and "critic1_loss" in out and "critic2_loss" in out
    assert "actor_loss" not in out  # fifth call is a critic-only step


def test_full_polyak_copy_with_tau_one():
    config = Td3Config(hidden=(8, 8), tau=1.0, policy_delay=1, warmup=0, batch_size=8, buffer_capacity=64)
    agent = Td3Agent(obs_dim=5, n_assets=3, config=config, seed=11)
    agent.update(fill_buffer(16))
    for live, target in (
        (agent.actor, agent.actor_target),
        (agent.critic1, agent.critic1_target),
        (agent.critic2, agent.critic2_target),
    ):
        for p, tp in zip(live.params(), target.params()):
            np.testing.assert_array_equal(p, tp)


def test_update_bit_deterministic():
    def run():
        agent = Td3Agent(obs_dim=5, n_assets=3, config=SMALL, seed=12)
        buf = fill_buffer(32, seed=13)
        for _ in range(6):
            agent.update(buf)
        return [p.copy() for p in agent.actor.params()]

    for a, b in zip(run(), run()):
        np.testing.assert_array_equal(a, b)


def test_critic_learns_constant_reward():
    # gamma=0, constant reward: critics regress toward 1
    config = Td3Config(hidden=(16,), gamma=0.0, warmup=0, batch_size=16,
                       buffer_capacity=128, lr=3e-3, policy_delay=10_000)
    agent = Td3Agent(obs_dim=4, n_assets=2, config=config, seed=14)
    rng = np.random.default_rng(15)
    buf = ReplayBuffer(128, seed=16)
    for _ in range(64):
        w = rng.dirichlet(np.ones(2))
        buf.push(Transition(rng.normal(size=4), w, w, rng.normal(size=4), 1.0))
    first = agent.update(buf)["critic_loss"]
    for _ in range(400):
        last = agent.update(buf)["critic_loss"]
    assert last < first * 0.05


def test_agent_save_load_roundtrip(tmp_path):
    agent = Td3Agent(obs_dim=6, n_assets=3, config=SMALL, seed=17)
    for _ in range(3):
        agent.update(fill_buffer(32, obs_dim=6, seed=18))
    path = tmp_path / "agent.bin"
    save_agent(agent, path, extra={"note": "roundtrip"})
    back, extra = load_agent(path)
    assert extra["note"] == "roundtrip"
    assert back.update_count == agent.update_count
    assert back.config == agent.config
    obs = np.linspace(0, 1, 6)
    np.testing.assert_array_equal(back.select_action(obs), agent.select_action(obs))
    for name in ("actor", "critic1", "critic2", "actor_target"):
        for p, q in zip(getattr(agent, name).params(), getattr(back, name).params()):
            np.testing.assert_array_equal(p, q)
    save_agent(back, tmp_path / "agent2.bin", extra={"note": "roundtrip"})
    assert (tmp_path / "agent.bin").read_bytes() == (tmp_path / "agent2.bin").read_bytes()
