"""Actors and the two policy-improvement updates.

A deterministic actor maps states to bounded actions and improves by
ascending the critic's value through the action (the deterministic
policy gradient).  A Gaussian actor additionally emits per-dimension
standard deviations and improves by weighted maximum likelihood: sample
a few candidate actions, weight them by a softmax over their critic
values, and regress the policy onto the weighted samples.

Both updates take any critic object exposing the query interface
(`q_values`, `q_and_action_grad`); tests exercise them against analytic
stand-ins as well as real critics.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .distributions import softmax

ACTION_HEAD = "action"
MEAN_HEAD = "mean"
STD_HEAD = "std"

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class DeterministicPolicy:
    """tanh-bounded deterministic actor."""

    net: nn.Network
    bound: float

    def mode(self, states: np.ndarray) -> np.ndarray:
        out, _ = self.net.forward(states)
        return out[ACTION_HEAD]

    def sample(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # A deterministic policy's samples are its mode.
        return self.mode(states)

    def with_params(self, params: nn.ParameterVector) -> "DeterministicPolicy":
        return DeterministicPolicy(self.net.with_params(params), self.bound)


@dataclass
class GaussianPolicy:
    """Diagonal-Gaussian actor with a bounded mean.

    Samples are clipped to the action bounds so every emitted action is
    feasible; the density used for the likelihood update is evaluated
    at the clipped points.
    """

    net: nn.Network
    bound: float

    def _dist(self, states):
        out, trace = self.net.forward(states)
        return out[MEAN_HEAD], out[STD_HEAD], trace

    def mode(self, states: np.ndarray) -> np.ndarray:
        mean, _, _ = self._dist(states)
        return mean

    def sample(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        mean, std, _ = self._dist(states)
        raw = mean + std * rng.standard_normal(mean.shape)
        return np.clip(raw, -self.bound, self.bound)

    def with_params(self, params: nn.ParameterVector) -> "GaussianPolicy":
        return GaussianPolicy(self.net.with_params(params), self.bound)


def make_deterministic_policy(
    state_dim: int,
    action_dim: int,
    bound: float,
    rng: np.random.Generator,
    torso: tuple[int, ...] = (256, 256),
    activation: str = "elu",
) -> DeterministicPolicy:
    spec = nn.NetworkSpec(
        state_dim, tuple(torso), (nn.BoundedVectorHead(ACTION_HEAD, action_dim, bound),), activation
    )
    return DeterministicPolicy(nn.make_network(spec, rng), bound)


def make_gaussian_policy(
    state_dim: int,
    action_dim: int,
    bound: float,
    rng: np.random.Generator,
    torso: tuple[int, ...] = (256, 256),
    activation: str = "elu",
    initial_std: float = 0.3,
    std_floor: float = 1e-3,
) -> GaussianPolicy:
    heads = (
        nn.BoundedVectorHead(MEAN_HEAD, action_dim, bound),
        nn.PositiveVectorHead(STD_HEAD, action_dim, std_floor, initial_std),
    )
    spec = nn.NetworkSpec(state_dim, tuple(torso), heads, activation)
    return GaussianPolicy(nn.make_network(spec, rng), bound)


def policy_mode(policy, states: np.ndarray) -> np.ndarray:
    return policy.mode(states)


def explore(policy, states: np.ndarray, rng: np.random.Generator, sigma: float) -> np.ndarray:
    """Behaviour actions: mode plus scaled Gaussian noise, or a sample.

    For deterministic policies the noise standard deviation is
    sigma * bound per dimension, clipped back into bounds.  Gaussian
    policies use their own samples and ignore sigma.
    """
    if isinstance(policy, GaussianPolicy):
        return policy.sample(states, rng)
    a = policy.mode(states)
    noisy = a + sigma * policy.bound * rng.standard_normal(a.shape)
    return np.clip(noisy, -policy.bound, policy.bound)


# ---------------------------------------------------------------------------
# deterministic policy gradient


def dpg_objective_and_grad(actor: DeterministicPolicy, critic, states: np.ndarray):
    """Mean critic value at the actor's actions and its parameter gradient.

    Returns (objective, gradient of the objective); callers ascend, so
    an optimizer minimising should negate the gradient.
    """
    out, trace = actor.net.forward(states)
    actions = out[ACTION_HEAD]
    q, dq_da = critic.q_and_action_grad(states, actions)
    b = states.shape[0] if states.ndim == 2 else 1
    grad, _ = nn.backward(trace, {ACTION_HEAD: dq_da / b})
    return float(np.mean(q)), grad


# Actions within this fraction of the bound count as railed; ascent
# components that push them further out are dropped.
RAIL_FRACTION = 0.995


def dpg_update(
    actor: DeterministicPolicy,
    critic,
    states: np.ndarray,
    lr: float,
    opt_state: nn.AdamState,
    grad_clip: float | None = None,
) -> tuple[DeterministicPolicy, nn.AdamState, float]:
    """One projected ascent step on the mean critic value.

    Ascent components that push an action already sitting at its bound
    further out are dropped.  Without the projection a bounded tanh
    head keeps growing its pre-activations whenever the critic favours
    saturated actions, until the gradient through tanh underflows and
    the actor can never steer back.  The critic is untouched.
    """
    out, trace = actor.net.forward(states)
    actions = out[ACTION_HEAD]
    q, dq_da = critic.q_and_action_grad(states, actions)
    rail = RAIL_FRACTION * actor.bound
    outward = ((actions >= rail) & (dq_da > 0.0)) | ((actions <= -rail) & (dq_da < 0.0))
    dq_da = np.where(outward, 0.0, dq_da)
    b = states.shape[0] if states.ndim == 2 else 1
    descent, _ = nn.backward(trace, {ACTION_HEAD: -dq_da / b})
    if grad_clip is not None:
        descent, _ = nn.clip_by_global_norm(descent, grad_clip)
    params, opt_state = nn.adam_step(actor.net.params, descent, opt_state, lr)
    return actor.with_params(params), opt_state, float(np.mean(q))


# ---------------------------------------------------------------------------
# weighted maximum-likelihood update


def mpo_lite_weights(q: np.ndarray, temperature: float) -> np.ndarray:
    """Per-state softmax of Q over candidate actions; rows sum to one.

    Invariant under adding a constant to all of a state's values.  As
    temperature drops to zero the weights approach one-hot on the
    argmax (exact ties share mass equally).
    """
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")
    return softmax(q / temperature, axis=-1)


def mpo_lite_objective_and_grad(
    actor: GaussianPolicy,
    target_actor: GaussianPolicy,
    critic,
    states: np.ndarray,
    k_actions: int,
    temperature: float,
    rng: np.random.Generator,
):
    """Weighted negative log-likelihood of critic-preferred actions.

    Candidates come from the target actor at each state; weights are a
    softmax over their critic values.  Returns (loss, gradient,
    weights).
    """
    b, _ = states.shape
    candidates = np.stack(
        [target_actor.sample(states, rng) for _ in range(k_actions)], axis=1
    )  # (B, K, da)
    da = candidates.shape[-1]
    flat_states = np.repeat(states[:, None, :], k_actions, axis=1).reshape(b * k_actions, -1)
    q = critic.q_values(flat_states, candidates.reshape(b * k_actions, da)).reshape(b, k_actions)
    weights = mpo_lite_weights(q, temperature)

    out, trace = actor.net.forward(states)
    mean, std = out[MEAN_HEAD], out[STD_HEAD]
    diff = candidates - mean[:, None, :]  # (B, K, da)
    var = std[:, None, :] ** 2
    log_prob = -0.5 * (diff**2 / var + _LOG_2PI) - np.log(std[:, None, :])
    loss = float(-(weights[:, :, None] * log_prob).sum(axis=(1, 2)).mean())

    wk = weights[:, :, None] / b
    dmean = -(wk * diff / var).sum(axis=1)
    dstd = -(wk * (diff**2 / var - 1.0)).sum(axis=1) / std
    grad, _ = nn.backward(trace, {MEAN_HEAD: dmean, STD_HEAD: dstd})
    return loss, grad, weights


def mpo_lite_update(
    actor: GaussianPolicy,
    target_actor: GaussianPolicy,
    critic,
    states: np.ndarray,
    k_actions: int,
    temperature: float,
    lr: float,
    opt_state: nn.AdamState,
    rng: np.random.Generator,
    grad_clip: float | None = None,
) -> tuple[GaussianPolicy, nn.AdamState, float]:
    """One weighted maximum-likelihood step toward high-value actions."""
    loss, grad, _ = mpo_lite_objective_and_grad(
        actor, target_actor, critic, states, k_actions, temperature, rng
    )
    if grad_clip is not None:
        grad, _ = nn.clip_by_global_norm(grad, grad_clip)
    params, opt_state = nn.adam_step(actor.net.params, grad, opt_state, lr)
    return actor.with_params(params), opt_state, loss
