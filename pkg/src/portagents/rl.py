"""Return-maximising RL agent: divergence-regularised rewards, replay
buffer, and a TD3 learner (twin critics, delayed policy updates, target
policy smoothing) built on the dense-net engine.

The actor outputs logits mapped to portfolio weights by softmax; exploration
and smoothing noise are injected on the logits before the softmax.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn
from .errors import (
    DimensionMismatch,
    InsufficientBuffer,
    IoFailure,
    NonPositiveGrowth,
)

LN2 = float(np.log(2.0))

_MAGIC_AGENT = b"TD3A1\n"
_NET_ORDER = ("actor", "actor_target", "critic1", "critic1_target", "critic2", "critic2_target")


def jensen_shannon(p, q) -> float:
    """Jensen-Shannon divergence (natural log, 0*log 0 = 0); range [0, ln 2]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes {p.shape} vs {q.shape}")
    m = 0.5 * (p + q)

    def kl(a):
        mask = a > 0.0
        return float(np.sum(a[mask] * np.log(a[mask] / m[mask])))

    d = 0.5 * kl(p) + 0.5 * kl(q)
    return float(min(max(d, 0.0), LN2))


@dataclass(frozen=True)
class RewardConfig:
    """Weights of the return term and the action-divergence term."""

    lambda1: float = 1.0
    lambda2: float = 0.1

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("reward weights must be non-negative")


@dataclass(frozen=True)
class RewardSummary:
    j: float
    j_return: float
    j_divergence: float


def per_step_reward(growth: float, a_rl, a_final, config: RewardConfig) -> float:
    """lambda1 * log(growth) - lambda2 * JSD(a_rl || a_final).

    ``growth`` is the per-step capital ratio C_t / C_{t-1}.
    """
    if not growth > 0.0:
        raise NonPositiveGrowth(f"growth {growth} must be positive")
    return config.lambda1 * float(np.log(growth)) - config.lambda2 * jensen_shannon(
        a_rl, a_final
    )


def episode_reward(growth_rates, jsd_terms, c0: float, config: RewardConfig) -> RewardSummary:
    """Episode objective: lambda1/T * (log c0 + sum log r_t)
    - lambda2/T * sum JSD_t."""
    r = np.asarray(growth_rates, dtype=np.float64)
    d = np.asarray(jsd_terms, dtype=np.float64)
    if r.ndim != 1 or r.shape != d.shape:
        raise DimensionMismatch(f"growth {r.shape} vs divergence {d.shape}")
    if r.size == 0:
        raise DimensionMismatch("need at least one step")
    if not c0 > 0.0:
        raise NonPositiveGrowth(f"initial capital {c0} must be positive")
    if np.any(r <= 0.0):
        raise NonPositiveGrowth("growth rates must be positive")
    t = r.size
    j_return = (np.log(c0) + np.log(r).sum()) / t
    j_divergence = -d.mean()
    return RewardSummary(
        j=config.lambda1 * j_return + config.lambda2 * j_divergence,
        j_return=float(j_return),
        j_divergence=float(j_divergence),
    )


@dataclass
class Transition:
    """One stored step: (o_prev, a_final, a_rl, o_next, reward)."""

    o_prev: object
    a_final: np.ndarray
    a_rl: np.ndarray
    o_next: object
    reward: float


def _vec(obs) -> np.ndarray:
    return obs.vector if hasattr(obs, "vector") else np.asarray(obs, dtype=np.float64)


class ReplayBuffer:
    """Ring buffer with a seeded uniform sampler (no replacement per batch)."""

    def __init__(self, capacity: int, seed=0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self._items: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, transition: Transition):
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int) -> list[Transition]:
        if batch_size > len(self._items):
            raise InsufficientBuffer(
                f"batch {batch_size} > buffer size {len(self._items)}"
            )
        idx = self.rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[i] for i in idx]

    def items(self) -> list[Transition]:
        return list(self._items)


@dataclass
class Td3Config:
    hidden: tuple = (64, 64)
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    sigma_explore: float = 0.1
    sigma_smooth: float = 0.2
    noise_clip: float = 0.5
    lr: float = 3e-4
    batch_size: int = 64
    buffer_capacity: int = 100_000
    warmup: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma {self.gamma} outside [0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau {self.tau} outside (0, 1]")
        if self.policy_delay < 1:
            raise ValueError("policy_delay must be >= 1")


class Td3Agent:
    """TD3 with softmax-on-logits actions over portfolio weights."""

    def __init__(self, obs_dim: int, n_assets: int, config: Td3Config | None = None, seed=0):
        self.obs_dim = obs_dim
        self.n_assets = n_assets
        self.config = config or Td3Config()
        self.seed = seed
        ss = np.random.SeedSequence(seed)
        init_rng, self.noise_rng = [np.random.default_rng(c) for c in ss.spawn(2)]
        h = list(self.config.hidden)
        acts = ["relu"] * len(h) + ["linear"]
        self.actor = nn.DenseNet.create([obs_dim, *h, n_assets], acts, init_rng)
        self.critic1 = nn.DenseNet.create([obs_dim + n_assets, *h, 1], acts, init_rng)
        self.critic2 = nn.DenseNet.create([obs_dim + n_assets, *h, 1], acts, init_rng)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        lr = self.config.lr
        self.actor_opt = nn.AdamState.for_params(self.actor.params(), lr=lr)
        self.critic1_opt = nn.AdamState.for_params(self.critic1.params(), lr=lr)
        self.critic2_opt = nn.AdamState.for_params(self.critic2.params(), lr=lr)
        self.update_count = 0

    # -- acting ---------------------------------------------------------

    def select_action(self, obs, explore: bool = False) -> np.ndarray:
        """Portfolio weights softmax(actor logits [+ exploration noise])."""
        x = _vec(obs)
        logits, _ = nn.forward(self.actor, x)
        if explore:
            logits = logits + self.config.sigma_explore * self.noise_rng.standard_normal(
                self.n_assets
            )
        return nn.softmax(logits)

    # -- learning ---------------------------------------------------------

    def _td_targets(self, rewards: np.ndarray, obs_next: np.ndarray) -> np.ndarray:
        """r + gamma * min(Q1', Q2') with smoothed target actions."""
        logits, _ = nn.forward(self.actor_target, obs_next)
        noise = self.config.sigma_smooth * self.noise_rng.standard_normal(logits.shape)
        noise = np.clip(noise, -self.config.noise_clip, self.config.noise_clip)
        actions = nn.softmax(logits + noise)
        q_in = np.concatenate([obs_next, actions], axis=1)
        q1, _ = nn.forward(self.critic1_target, q_in)
        q2, _ = nn.forward(self.critic2_target, q_in)
        return rewards + self.config.gamma * np.minimum(q1, q2)

    def _polyak(self):
        tau = self.config.tau
        for live, target in (
            (self.actor, self.actor_target),
            (self.critic1, self.critic1_target),
            (self.critic2, self.critic2_target),
        ):
            for p, tp in zip(live.params(), target.params()):
                tp *= 1.0 - tau
                tp += tau * p

    def update(self, buffer: ReplayBuffer, batch_size: int | None = None) -> dict:
        """One TD3 step: both critics every call, actor + target nets every
        ``policy_delay``-th call."""
        bs = batch_size or self.config.batch_size
        batch = buffer.sample(bs)
        obs = np.stack([_vec(t.o_prev) for t in batch])
        obs_next = np.stack([_vec(t.o_next) for t in batch])
        actions = np.stack([np.asarray(t.a_final, dtype=np.float64) for t in batch])
        rewards = np.asarray([t.reward for t in batch], dtype=np.float64).reshape(-1, 1)

        targets = self._td_targets(rewards, obs_next)
        q_in = np.concatenate([obs, actions], axis=1)
        losses = {}
        for name, critic, opt in (
            ("critic1", self.critic1, self.critic1_opt),
            ("critic2", self.critic2, self.critic2_opt),
        ):
            q, tape = nn.forward(critic, q_in)
            err = q - targets
            losses[f"{name}_loss"] = float(np.mean(err * err))
            grads, _ = nn.backward(critic, tape, 2.0 * err / bs)
            nn.adam_step(opt, critic.params(), grads)

        self.update_count += 1
        out = {
            "critic_loss": 0.5 * (losses["critic1_loss"] + losses["critic2_loss"]),
            **losses,
            "did_policy_update": False,
        }
        if self.update_count % self.config.policy_delay == 0:
            logits, actor_tape = nn.forward(self.actor, obs)
            acts = nn.softmax(logits)
            q_in_pi = np.concatenate([obs, acts], axis=1)
            q, critic_tape = nn.forward(self.critic1, q_in_pi)
            # ascend Q: minimise -mean(Q)
            _, d_in = nn.backward(self.critic1, critic_tape, np.full_like(q, -1.0 / bs))
            d_logits = nn.softmax_input_grad(acts, d_in[:, self.obs_dim :])
            grads, _ = nn.backward(self.actor, actor_tape, d_logits)
            nn.adam_step(self.actor_opt, self.actor.params(), grads)
            self._polyak()
            out["actor_loss"] = float(-np.mean(q))
            out["did_policy_update"] = True
        return out

    # -- persistence --------------------------------------------------------

    def _nets(self) -> dict:
        return {
            "actor": self.actor,
            "actor_target": self.actor_target,
            "critic1": self.critic1,
            "critic1_target": self.critic1_target,
            "critic2": self.critic2,
            "critic2_target": self.critic2_target,
        }

    def snapshot(self) -> "Td3Agent":
        """Deep copy used for best-checkpoint selection."""
        return copy.deepcopy(self)


def select_action(agent: Td3Agent, obs, explore: bool = False) -> np.ndarray:
    return agent.select_action(obs, explore=explore)


def td3_update(agent: Td3Agent, buffer: ReplayBuffer, batch_size: int | None = None) -> dict:
    return agent.update(buffer, batch_size=batch_size)


def save_agent(agent: Td3Agent, path, extra: dict | None = None):
    """Single versioned binary archive of all six nets plus counters/config."""
    header = {
        "format": "td3-agent",
        "version": 1,
        "obs_dim": agent.obs_dim,
        "n_assets": agent.n_assets,
        "seed": agent.seed,
        "update_count": agent.update_count,
        "config": asdict(agent.config),
        "extra": extra or {},
        "nets": {name: nn.net_header(net) for name, net in agent._nets().items()},
    }
    body = b"".join(nn.net_param_bytes(agent._nets()[name]) for name in _NET_ORDER)
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC_AGENT)
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            fh.write(body)
    except OSError as exc:
        raise IoFailure(f"cannot write agent checkpoint {path}: {exc}") from exc


def load_agent(path) -> tuple[Td3Agent, dict]:
    """Rebuild an agent from :func:`save_agent`; returns (agent, extra)."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read agent checkpoint {path}: {exc}") from exc
    if not blob.startswith(_MAGIC_AGENT):
        raise IoFailure(f"{path} is not an agent checkpoint")
    rest = blob[len(_MAGIC_AGENT) :]
    header_line, _, raw = rest.partition(b"\n")
    header = json.loads(header_line)
    if header.get("version") != 1 or header.get("format") != "td3-agent":
        raise IoFailure(f"unsupported agent checkpoint header in {path}")
    cfg_dict = dict(header["config"])
    cfg_dict["hidden"] = tuple(cfg_dict["hidden"])
    agent = Td3Agent(
        obs_dim=int(header["obs_dim"]),
        n_assets=int(header["n_assets"]),
        config=Td3Config(**cfg_dict),
        seed=header.get("seed", 0),
    )
    offset = 0
    for name in _NET_ORDER:
        net, offset = nn.net_from_header(header["nets"][name], raw, offset)
        setattr(agent, name, net)
    agent.update_count = int(header["update_count"])
    agent.actor_opt = nn.AdamState.for_params(agent.actor.params(), lr=agent.config.lr)
    agent.critic1_opt = nn.AdamState.for_params(agent.critic1.params(), lr=agent.config.lr)
    agent.critic2_opt = nn.AdamState.for_params(agent.critic2.params(), lr=agent.config.lr)
    return agent, header.get("extra", {})
