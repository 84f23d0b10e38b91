"""Exact references for small discrete MDPs.

A tabular MDP with stochastic rewards supports three ground truths the
learned critics are checked against: exact Q values from a direct
linear solve, brute-force return samples from truncated rollouts, and
the 1-Wasserstein distance between empirical samples.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np


@dataclass(frozen=True)
class TabularMDP:
    """Finite MDP with categorical rewards.

    transitions: (S, A, S) next-state probabilities.
    reward_values / reward_probs: (S, A, R) support points and masses
    of the reward distribution at each state-action pair.
    """

    transitions: np.ndarray
    reward_values: np.ndarray
    reward_probs: np.ndarray
    gamma: float

    def __post_init__(self):
        t = np.asarray(self.transitions, dtype=np.float64)
        rv = np.asarray(self.reward_values, dtype=np.float64)
        rp = np.asarray(self.reward_probs, dtype=np.float64)
        object.__setattr__(self, "transitions", t)
        object.__setattr__(self, "reward_values", rv)
        object.__setattr__(self, "reward_probs", rp)
        if t.ndim != 3 or t.shape[0] != t.shape[2]:
            raise ValueError("transitions must have shape (S, A, S)")
        if rv.shape != rp.shape or rv.shape[:2] != t.shape[:2]:
            raise ValueError("reward tables must have shape (S, A, R)")
        if np.any(t < 0) or np.any(np.abs(t.sum(axis=-1) - 1.0) > 1e-12):
            raise ValueError("transition rows must be probability vectors")
        if np.any(rp < 0) or np.any(np.abs(rp.sum(axis=-1) - 1.0) > 1e-12):
            raise ValueError("reward masses must be probability vectors")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[1]

    @property
    def mean_rewards(self) -> np.ndarray:
        return np.sum(self.reward_values * self.reward_probs, axis=-1)


@dataclass(frozen=True)
class TabularPolicy:
    """Stochastic policy: (S, A) action probabilities."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2 or np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-12):
            raise ValueError("policy rows must be probability vectors")


def uniform_policy(mdp: TabularMDP) -> TabularPolicy:
    s, a = mdp.num_states, mdp.num_actions
    return TabularPolicy(np.full((s, a), 1.0 / a))


def exact_q(mdp: TabularMDP, policy: TabularPolicy) -> np.ndarray:
    """Q values of the policy by solving the linear Bellman system.

    Treats each state-action pair as a node of a Markov chain with
    transition matrix P[(s,a),(s',a')] = P(s'|s,a) pi(a'|s') and solves
    (I - gamma P) q = rbar directly.
    """
    s, a = mdp.num_states, mdp.num_actions
    p_sa = mdp.transitions.reshape(s * a, s)  # (SA, S')
    chain = p_sa[:, :, None] * policy.probs[None, :, :]  # (SA, S', A')
    chain = chain.reshape(s * a, s * a)
    rbar = mdp.mean_rewards.reshape(s * a)
    q = np.linalg.solve(np.eye(s * a) - mdp.gamma * chain, rbar)
    return q.reshape(s, a)


def exact_v(mdp: TabularMDP, policy: TabularPolicy) -> np.ndarray:
    return np.sum(policy.probs * exact_q(mdp, policy), axis=-1)


def bellman_backup(mdp: TabularMDP, policy: TabularPolicy, q: np.ndarray) -> np.ndarray:
    """One application of the policy's Bellman operator to a Q table."""
    v = np.sum(policy.probs * q, axis=-1)
    return mdp.mean_rewards + mdp.gamma * mdp.transitions @ v


def _rollout_horizon(mdp: TabularMDP, tol: float) -> int:
    """Steps until the discounted tail of any reward stream is below tol."""
    r_max = float(np.max(np.abs(mdp.reward_values)))
    if r_max == 0.0 or mdp.gamma == 0.0:
        return 1
    if mdp.gamma**0 * r_max < tol:
        return 1
    return int(np.ceil(np.log(tol / r_max) / np.log(mdp.gamma)))


def _sample_rows(cum: np.ndarray, rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row index, using precomputed cumsums."""
    u = rng.random(rows.shape[0])
    return np.sum(u[:, None] > cum[rows], axis=-1)


def return_samples(
    mdp: TabularMDP,
    policy: TabularPolicy,
    state: int,
    action: int,
    n: int,
    rng: np.random.Generator,
    tol: float = 1e-6,
) -> np.ndarray:
    """n Monte-Carlo discounted returns from (state, action).

    Rollouts are truncated once gamma^t * max |reward| < tol, so each
    sample is within tol / (1 - gamma) of an infinite-horizon draw.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    horizon = _rollout_horizon(mdp, tol)
    s_count, a_count = mdp.num_states, mdp.num_actions

    cum_next = np.cumsum(mdp.transitions.reshape(s_count * a_count, s_count), axis=-1)
    cum_reward = np.cumsum(mdp.reward_probs.reshape(s_count * a_count, -1), axis=-1)
    cum_policy = np.cumsum(policy.probs, axis=-1)
    flat_values = mdp.reward_values.reshape(s_count * a_count, -1)

    states = np.full(n, state, dtype=np.int64)
    actions = np.full(n, action, dtype=np.int64)
    totals = np.zeros(n)
    discount = 1.0
    for _ in range(horizon):
        sa = states * a_count + actions
        r_idx = _sample_rows(cum_reward, sa, rng)
        totals += discount * flat_values[sa, r_idx]
        states = _sample_rows(cum_next, sa, rng)
        actions = _sample_rows(cum_policy, states, rng)
        discount *= mdp.gamma
    return totals


def w1_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1-Wasserstein distance between two equal-size empirical samples.

    For equal sample counts this is the mean absolute difference of the
    sorted values.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("need two 1-d samples of equal size")
    return float(np.mean(np.abs(a - b)))


# ---------------------------------------------------------------------------
# fixtures


def save_mdp(path, mdp: TabularMDP) -> None:
    payload = {
        "format": "tabular-mdp",
        "version": 1,
        "gamma": mdp.gamma,
        "transitions": mdp.transitions.tolist(),
        "reward_values": mdp.reward_values.tolist(),
        "reward_probs": mdp.reward_probs.tolist(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=1)
        f.write("\n")


def load_mdp(path) -> TabularMDP:
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("format") != "tabular-mdp":
        raise ValueError("not a tabular MDP fixture")
    return TabularMDP(
        np.asarray(payload["transitions"], dtype=np.float64),
        np.asarray(payload["reward_values"], dtype=np.float64),
        np.asarray(payload["reward_probs"], dtype=np.float64),
        float(payload["gamma"]),
    )


def chain5() -> TabularMDP:
    """The packaged five-state chain with a bimodal payout.

    States 0..3 walk right (action 1) or fall back (action 0) toward
    state 4, which pays 0 or 2 with equal probability and restarts the
    chain at state 0.  Returns from states near the payout are sharply
    bimodal, which is what the mixture critics are meant to capture.
    """
    with resources.as_file(resources.files("mogrl") / "fixtures" / "chain5.json") as p:
        return load_mdp(p)
