"""Critic losses and the critic bundle used by the training loop.

Four interchangeable critics share one interface: a mixture-of-Gaussians
distributional critic trained by sample-based cross-entropy, a
single-Gaussian critic trained by the closed-form Gaussian
cross-entropy, a categorical critic on a fixed atom grid trained by
projected cross-entropy, and a plain scalar critic trained by squared
Bellman error.  Three ablation architectures (h1, h2, h3) decompose the
single-Gaussian loss to isolate where its benefits come from.

All losses are means over the batch (and over any inner sample axes),
return `(loss, gradient)` pairs, and treat bootstrap targets as
constants: nothing differentiates through target networks, sampled
returns, or bootstrap actions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from . import nn
from .distributions import (
    SCALE_FLOOR,
    GaussianStats,
    analytic_gaussian_ce,
    c51_project,
    c51_support,
    gaussian_affine,
    log_softmax,
    softmax,
)

_LOG_2PI = float(np.log(2.0 * np.pi))

DIST_HEAD = "dist"
Q_HEAD = "q"

VARIANTS = ("mog", "gauss1", "c51", "scalar")
ARCHITECTURES = ("joint", "h1", "h2", "h3")


class NonFiniteLossError(RuntimeError):
    """A loss evaluated to NaN or infinity."""

    def __init__(self, message: str, transition_index: int | None = None):
        super().__init__(message)
        self.transition_index = transition_index


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    continues: bool


@dataclass
class TransitionBatch:
    states: np.ndarray  # (B, ds)
    actions: np.ndarray  # (B, da)
    rewards: np.ndarray  # (B,)
    next_states: np.ndarray  # (B, ds)
    continues: np.ndarray  # (B,) float 0/1 mask

    def __post_init__(self):
        b = self.states.shape[0]
        if not (
            self.actions.shape[0] == self.rewards.shape[0]
            == self.next_states.shape[0] == self.continues.shape[0] == b
        ):
            raise ValueError("batch fields disagree on batch size")

    @property
    def size(self) -> int:
        return self.states.shape[0]


class Policy(Protocol):
    def mode(self, states: np.ndarray) -> np.ndarray: ...

    def sample(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray: ...


@dataclass(frozen=True)
class LossConfig:
    """Shared knobs for all Bellman losses.

    num_return_samples is the per-transition count of return draws from
    the bootstrap distribution; num_action_samples the count of next
    actions.  With greedy_bootstrap the policy mode is the single next
    action and num_action_samples is ignored.
    """

    gamma: float
    num_return_samples: int = 20
    num_action_samples: int = 1
    greedy_bootstrap: bool = True

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.num_return_samples < 1 or self.num_action_samples < 1:
            raise ValueError("sample counts must be >= 1")


def _effective_gamma(cfg: LossConfig, batch: TransitionBatch) -> np.ndarray:
    # Termination zeroes the bootstrap term.
    return cfg.gamma * np.asarray(batch.continues, dtype=np.float64)


def _bootstrap_actions(policy: Policy, next_states: np.ndarray, cfg: LossConfig, rng) -> np.ndarray:
    """Next actions, shape (B, M, da)."""
    if cfg.greedy_bootstrap:
        a = np.asarray(policy.mode(next_states), dtype=np.float64)
        return a[:, None, :]
    draws = [np.asarray(policy.sample(next_states, rng), dtype=np.float64)
             for _ in range(cfg.num_action_samples)]
    return np.stack(draws, axis=1)


def _dist_params(out) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """View a distributional head output as mixture parameters (B, K)."""
    if isinstance(out, nn.MoGOutput):
        return out.logits, out.locations, out.scales
    if isinstance(out, nn.GaussianOutput):
        return np.zeros(out.mean.shape + (1,)), out.mean[..., None], out.scale[..., None]
    raise TypeError("head does not produce a return distribution")


def _dist_cotangent(out, dlogits, dlocs, dscales):
    if isinstance(out, nn.MoGOutput):
        return nn.MoGOutput(dlogits, dlocs, dscales)
    return nn.GaussianOutput(dlocs[..., 0], dscales[..., 0])


def _mixture_sample(logits, locs, scales, n, rng) -> np.ndarray:
    """n ancestral draws per row; (B, K) params -> (B, n)."""
    w = softmax(logits)
    cum = np.cumsum(w, axis=-1)
    u = rng.random((w.shape[0], n))
    idx = np.minimum(np.sum(u[..., None] > cum[:, None, :], axis=-1), w.shape[-1] - 1)
    loc = np.take_along_axis(locs, idx, axis=-1)
    scale = np.take_along_axis(scales, idx, axis=-1)
    return loc + scale * rng.standard_normal(idx.shape)


def _check_finite(per_transition: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(per_transition)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise NonFiniteLossError(f"{what} is not finite at transition {idx}", idx)


# ---------------------------------------------------------------------------
# sample-based mixture cross-entropy


def sample_based_loss(
    online: nn.Network,
    target: nn.Network,
    policy: Policy,
    batch: TransitionBatch,
    cfg: LossConfig,
    rng: np.random.Generator,
    head: str = DIST_HEAD,
) -> tuple[float, nn.ParameterVector]:
    """Monte-Carlo cross-entropy against the bootstrapped distribution.

    For each transition, draw next actions from the policy (or its
    mode), draw return samples z' from the target network's
    distribution at (s', a'), map them through r + gamma_eff * z', and
    score the online distribution at the mapped points:

        loss = -(1/B) sum_b (1/(N M)) sum_{i,j} log p_theta(y_bij | s_b, a_b)

    Targets are constants; the gradient flows only through the online
    log density.
    """
    b = batch.size
    m = 1 if cfg.greedy_bootstrap else cfg.num_action_samples
    n = cfg.num_return_samples

    next_actions = _bootstrap_actions(policy, batch.next_states, cfg, rng)
    tiled_next = np.repeat(batch.next_states[:, None, :], m, axis=1)
    target_in = np.concatenate([tiled_next, next_actions], axis=-1).reshape(b * m, -1)
    target_out, _ = target.forward(target_in)
    t_logits, t_locs, t_scales = _dist_params(target_out[head])
    z = _mixture_sample(t_logits, t_locs, t_scales, n, rng).reshape(b, m * n)

    gamma_eff = _effective_gamma(cfg, batch)
    y = batch.rewards[:, None] + gamma_eff[:, None] * z  # (B, MN)

    online_in = np.concatenate([batch.states, batch.actions], axis=-1)
    out, trace = online.forward(online_in)
    logits, locs, scales = _dist_params(out[head])
    k = logits.shape[-1]

    lw = log_softmax(logits)  # (B, K)
    diff = y[:, :, None] - locs[:, None, :]  # (B, MN, K)
    inv_var = 1.0 / (scales[:, None, :] ** 2)
    comp = -0.5 * diff**2 * inv_var - np.log(scales[:, None, :]) - 0.5 * _LOG_2PI
    joint = lw[:, None, :] + comp
    peak = joint.max(axis=-1, keepdims=True)
    lse = peak[:, :, 0] + np.log(np.exp(joint - peak).sum(axis=-1))  # (B, MN)

    per_transition = -lse.mean(axis=1)
    _check_finite(per_transition, "sample-based loss")
    loss = float(per_transition.mean())

    resp = np.exp(joint - lse[:, :, None])  # responsibilities (B, MN, K)
    w = softmax(logits)
    scale_inner = cfg.num_return_samples * m * b
    dlogits = -(resp - w[:, None, :]).sum(axis=1) / scale_inner
    dlocs = -(resp * diff * inv_var).sum(axis=1) / scale_inner
    dscales = -(resp * (diff**2 * inv_var - 1.0)).sum(axis=1) / (scales * scale_inner)

    ct = _dist_cotangent(out[head], dlogits, dlocs, dscales)
    grad, _ = nn.backward(trace, {head: ct})
    return loss, grad


# ---------------------------------------------------------------------------
# closed-form single-Gaussian cross-entropy


def _target_gaussian(
    target: nn.Network, policy: Policy, batch: TransitionBatch, cfg: LossConfig, head: str
) -> GaussianStats:
    """Bootstrap Gaussian at (s', policy mode), pushed through r + gamma z."""
    a_next = np.asarray(policy.mode(batch.next_states), dtype=np.float64)
    tin = np.concatenate([batch.next_states, a_next], axis=-1)
    tout, _ = target.forward(tin)
    g = tout[head]
    if not isinstance(g, nn.GaussianOutput):
        raise TypeError("analytic loss needs a single-Gaussian head")
    stats = GaussianStats(g.mean, g.scale**2)
    return gaussian_affine(stats, batch.rewards, _effective_gamma(cfg, batch))


def analytic_gaussian_loss(
    online: nn.Network,
    target: nn.Network,
    policy: Policy,
    batch: TransitionBatch,
    cfg: LossConfig,
    head: str = DIST_HEAD,
) -> tuple[float, nn.ParameterVector]:
    """Mean closed-form cross-entropy to the affine-mapped target Gaussian.

    Always bootstraps at the policy mode.  Target statistics are
    constants; gradients reach only the online mean and scale.
    """
    tgt = _target_gaussian(target, policy, batch, cfg, head)
    online_in = np.concatenate([batch.states, batch.actions], axis=-1)
    out, trace = online.forward(online_in)
    g = out[head]
    if not isinstance(g, nn.GaussianOutput):
        raise TypeError("analytic loss needs a single-Gaussian head")

    per_transition = analytic_gaussian_ce(tgt, GaussianStats(g.mean, g.scale**2))
    _check_finite(per_transition, "analytic Gaussian loss")
    b = batch.size
    loss = float(per_transition.mean())

    var = g.scale**2
    dmean = (g.mean - tgt.mean) / var / b
    # dH/dsigma = 1/sigma - (tvar + (tmean - mean)^2) / sigma^3
    dscale = (1.0 / g.scale - (tgt.variance + (tgt.mean - g.mean) ** 2) / g.scale**3) / b
    grad, _ = nn.backward(trace, {head: nn.GaussianOutput(dmean, dscale)})
    return loss, grad


# ---------------------------------------------------------------------------
# squared Bellman error


def sbe_loss(
    online: nn.Network,
    target: nn.Network,
    policy: Policy,
    batch: TransitionBatch,
    cfg: LossConfig,
    head: str = Q_HEAD,
) -> tuple[float, nn.ParameterVector]:
    """Mean squared Bellman error with a greedy bootstrap.

    qbar = r + gamma_eff * Q_target(s', mode); loss = mean (Q - qbar)^2.
    """
    a_next = np.asarray(policy.mode(batch.next_states), dtype=np.float64)
    tin = np.concatenate([batch.next_states, a_next], axis=-1)
    tout, _ = target.forward(tin)
    qbar = batch.rewards + _effective_gamma(cfg, batch) * tout[head]

    out, trace = online.forward(np.concatenate([batch.states, batch.actions], axis=-1))
    q = out[head]
    per_transition = (q - qbar) ** 2
    _check_finite(per_transition, "squared Bellman error")
    loss = float(per_transition.mean())
    grad, _ = nn.backward(trace, {head: 2.0 * (q - qbar) / batch.size})
    return loss, grad


# ---------------------------------------------------------------------------
# categorical critic on a fixed grid


def c51_loss(
    online: nn.Network,
    target: nn.Network,
    policy: Policy,
    batch: TransitionBatch,
    cfg: LossConfig,
    head: str = DIST_HEAD,
) -> tuple[float, nn.ParameterVector]:
    """Projected categorical cross-entropy with a greedy bootstrap.

    Target masses at (s', mode) ride their atoms through
    z -> r + gamma_eff * z, are projected back onto the fixed grid, and
    the online categorical head is trained by cross-entropy.
    """
    spec_head = online.spec.head(head)
    if not isinstance(spec_head, nn.CategoricalHead):
        raise TypeError("categorical loss needs a categorical head")
    atoms = c51_support(spec_head.vmin, spec_head.vmax, spec_head.atoms)

    a_next = np.asarray(policy.mode(batch.next_states), dtype=np.float64)
    tin = np.concatenate([batch.next_states, a_next], axis=-1)
    tout, _ = target.forward(tin)
    t_probs = tout[head].probs
    gamma_eff = _effective_gamma(cfg, batch)
    mapped = batch.rewards[:, None] + gamma_eff[:, None] * atoms[None, :]
    projected = c51_project(atoms, mapped, t_probs)

    out, trace = online.forward(np.concatenate([batch.states, batch.actions], axis=-1))
    log_probs = out[head].log_probs
    per_transition = -(projected * log_probs).sum(axis=-1)
    _check_finite(per_transition, "categorical loss")
    loss = float(per_transition.mean())
    grad, _ = nn.backward(trace, {head: nn.CategoricalOutput(-projected / batch.size, None)})
    return loss, grad


# ---------------------------------------------------------------------------
# hypothesis architectures


@dataclass
class HypothesisLoss:
    loss: float
    grads: list[nn.ParameterVector]
    # Named loss terms with their own gradient lists, for inspection.
    parts: dict[str, tuple[float, list[nn.ParameterVector]]]


def _h1_loss(online, target, policy, batch, cfg) -> HypothesisLoss:
    """Mean and scale from disjoint parameter sets, closed-form loss."""
    mean_net, scale_net = online
    t_mean_net, t_scale_net = target
    a_next = np.asarray(policy.mode(batch.next_states), dtype=np.float64)
    tin = np.concatenate([batch.next_states, a_next], axis=-1)
    t_mean = t_mean_net.forward(tin)[0][DIST_HEAD].mean
    t_scale = t_scale_net.forward(tin)[0][DIST_HEAD].scale
    tgt = gaussian_affine(
        GaussianStats(t_mean, t_scale**2), batch.rewards, _effective_gamma(cfg, batch)
    )

    online_in = np.concatenate([batch.states, batch.actions], axis=-1)
    mean_out, mean_trace = mean_net.forward(online_in)
    scale_out, scale_trace = scale_net.forward(online_in)
    mean = mean_out[DIST_HEAD].mean
    scale = scale_out[DIST_HEAD].scale

    per_transition = analytic_gaussian_ce(tgt, GaussianStats(mean, scale**2))
    _check_finite(per_transition, "split-network Gaussian loss")
    b = batch.size
    loss = float(per_transition.mean())

    dmean = (mean - tgt.mean) / scale**2 / b
    dscale = (1.0 / scale - (tgt.variance + (tgt.mean - mean) ** 2) / scale**3) / b
    zeros = np.zeros_like(mean)
    g_mean, _ = nn.backward(mean_trace, {DIST_HEAD: nn.GaussianOutput(dmean, zeros)})
    g_scale, _ = nn.backward(scale_trace, {DIST_HEAD: nn.GaussianOutput(zeros, dscale)})
    return HypothesisLoss(loss, [g_mean, g_scale], {"distributional": (loss, [g_mean, g_scale])})


def _h2_h3_loss(arch, online, target, policy, batch, cfg) -> HypothesisLoss:
    """Shared torso, Gaussian head plus a detached scalar Q head.

    The Gaussian term is the closed-form cross-entropy and is the only
    source of torso gradients.  The Q head trains on squared Bellman
    error against its own target head; under h3 that error is divided
    by the online predictive variance, taken as a constant.
    """
    (net,) = online
    (t_net,) = target
    a_next = np.asarray(policy.mode(batch.next_states), dtype=np.float64)
    tin = np.concatenate([batch.next_states, a_next], axis=-1)
    t_out, _ = t_net.forward(tin)
    gamma_eff = _effective_gamma(cfg, batch)
    tgt = gaussian_affine(
        GaussianStats(t_out[DIST_HEAD].mean, t_out[DIST_HEAD].scale ** 2),
        batch.rewards,
        gamma_eff,
    )
    qbar = batch.rewards + gamma_eff * t_out[Q_HEAD]

    online_in = np.concatenate([batch.states, batch.actions], axis=-1)
    out, trace = net.forward(online_in)
    mean, scale = out[DIST_HEAD].mean, out[DIST_HEAD].scale
    q = out[Q_HEAD]
    b = batch.size

    dist_per = analytic_gaussian_ce(tgt, GaussianStats(mean, scale**2))
    dmean = (mean - tgt.mean) / scale**2 / b
    dscale = (1.0 / scale - (tgt.variance + (tgt.mean - mean) ** 2) / scale**3) / b
    dist_loss = float(dist_per.mean())
    g_dist, _ = nn.backward(trace, {DIST_HEAD: nn.GaussianOutput(dmean, dscale)})

    if arch == "h3":
        weight = 1.0 / scale**2  # constant: no gradient through scale here
    else:
        weight = np.ones_like(q)
    q_per = weight * (q - qbar) ** 2
    q_loss = float(q_per.mean())
    g_q, _ = nn.backward(trace, {Q_HEAD: 2.0 * weight * (q - qbar) / b})

    per_transition = dist_per + q_per
    _check_finite(per_transition, "hypothesis loss")
    total = nn.ParameterVector(g_dist.data + g_q.data, g_dist.layout)
    return HypothesisLoss(
        dist_loss + q_loss,
        [total],
        {"distributional": (dist_loss, [g_dist]), "q": (q_loss, [g_q])},
    )


def hypothesis_loss(
    arch: str,
    online: Sequence[nn.Network],
    target: Sequence[nn.Network],
    policy: Policy,
    batch: TransitionBatch,
    cfg: LossConfig,
) -> HypothesisLoss:
    """Dispatch to one of the single-Gaussian ablation architectures."""
    if arch == "h1":
        if len(online) != 2:
            raise ValueError("h1 uses two networks: mean and scale")
        return _h1_loss(tuple(online), tuple(target), policy, batch, cfg)
    if arch in ("h2", "h3"):
        if len(online) != 1:
            raise ValueError(f"{arch} uses a single shared-torso network")
        return _h2_h3_loss(arch, tuple(online), tuple(target), policy, batch, cfg)
    raise ValueError(f"unknown hypothesis architecture {arch!r}")


# ---------------------------------------------------------------------------
# the bundle the training loop talks to


class Critic:
    """Online/target networks for one critic variant plus common queries.

    q_values and q_and_action_grad expose the scalar used for policy
    improvement: the predictive mean for distributional critics, the
    dedicated Q head for the scalar critic and for the h2/h3
    architectures.  Action gradients deliberately ignore stop-gradient
    flags, which only constrain training-loss parameter gradients.
    """

    def __init__(
        self,
        variant: str,
        arch: str,
        online: list[nn.Network],
        target: list[nn.Network],
        loss_cfg: LossConfig,
    ):
        if variant not in VARIANTS:
            raise ValueError(f"unknown critic variant {variant!r}")
        if arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {arch!r}")
        if arch != "joint" and variant != "gauss1":
            raise ValueError("hypothesis architectures apply to the single-Gaussian critic")
        self.variant = variant
        self.arch = arch
        self.online = online
        self.target = target
        self.loss_cfg = loss_cfg

    # -- training ----------------------------------------------------------

    def loss_and_grads(self, batch: TransitionBatch, policy: Policy, rng) -> tuple[float, list[nn.ParameterVector]]:
        if self.arch != "joint":
            res = hypothesis_loss(self.arch, self.online, self.target, policy, batch, self.loss_cfg)
            return res.loss, res.grads
        net, tgt = self.online[0], self.target[0]
        if self.variant == "mog":
            loss, g = sample_based_loss(net, tgt, policy, batch, self.loss_cfg, rng)
        elif self.variant == "gauss1":
            loss, g = analytic_gaussian_loss(net, tgt, policy, batch, self.loss_cfg)
        elif self.variant == "c51":
            loss, g = c51_loss(net, tgt, policy, batch, self.loss_cfg)
        else:
            loss, g = sbe_loss(net, tgt, policy, batch, self.loss_cfg)
        return loss, [g]

    def sync_targets(self, step: int, period: int) -> None:
        for i, (o, t) in enumerate(zip(self.online, self.target)):
            self.target[i] = t.with_params(nn.target_sync(o.params, t.params, period, step))

    # -- queries -----------------------------------------------------------

    def _forward_main(self, states, actions):
        x = np.concatenate([states, actions], axis=-1)
        return self.online[0].forward(x)

    def q_values(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        out, _ = self._forward_main(states, actions)
        return self._q_from_outputs(out)

    def _q_from_outputs(self, out) -> np.ndarray:
        if self.arch in ("h2", "h3") or self.variant == "scalar":
            return out[Q_HEAD]
        if self.variant == "mog":
            o = out[DIST_HEAD]
            return np.sum(softmax(o.logits) * o.locations, axis=-1)
        if self.variant == "c51":
            head = self.online[0].spec.head(DIST_HEAD)
            atoms = c51_support(head.vmin, head.vmax, head.atoms)
            return np.sum(out[DIST_HEAD].probs * atoms, axis=-1)
        return out[DIST_HEAD].mean  # gauss1 joint and h1 use the mean net

    def q_and_action_grad(self, states: np.ndarray, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-sample Q and dQ/da at fixed parameters."""
        action_dim = actions.shape[-1]
        x = np.concatenate([states, actions], axis=-1)
        out, trace = self.online[0].forward(x)
        q = self._q_from_outputs(out)
        ones = np.ones_like(q)
        if self.arch in ("h2", "h3") or self.variant == "scalar":
            ct = {Q_HEAD: ones}
        elif self.variant == "mog":
            o = out[DIST_HEAD]
            w = softmax(o.logits)
            ct = {DIST_HEAD: nn.MoGOutput(w * (o.locations - q[..., None]), w, np.zeros_like(w))}
        elif self.variant == "c51":
            head = self.online[0].spec.head(DIST_HEAD)
            atoms = c51_support(head.vmin, head.vmax, head.atoms)
            ct = {DIST_HEAD: nn.CategoricalOutput(out[DIST_HEAD].probs * atoms, None)}
        else:
            ct = {DIST_HEAD: nn.GaussianOutput(ones, np.zeros_like(ones))}
        _, dx = nn.backward(trace, ct, respect_stop_gradients=False)
        return q, dx[..., -action_dim:]

    def dist_params(self, states: np.ndarray, actions: np.ndarray):
        """Mixture parameters (logits, locations, scales) of the online critic."""
        x = np.concatenate([states, actions], axis=-1)
        if self.arch == "h1":
            mean = self.online[0].forward(x)[0][DIST_HEAD]
            scale = self.online[1].forward(x)[0][DIST_HEAD]
            return _dist_params(nn.GaussianOutput(mean.mean, scale.scale))
        out, _ = self.online[0].forward(x)
        if self.variant in ("mog", "gauss1"):
            return _dist_params(out[DIST_HEAD])
        raise TypeError(f"critic variant {self.variant!r} has no mixture form")

    def sample_returns(self, states, actions, n: int, rng) -> np.ndarray:
        logits, locs, scales = self.dist_params(states, actions)
        return _mixture_sample(logits, locs, scales, n, rng)

    def predictive_std(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Standard deviation of the critic's return distribution (0 if scalar)."""
        x = np.concatenate([states, actions], axis=-1)
        if self.arch == "h1":
            return self.online[1].forward(x)[0][DIST_HEAD].scale
        out, _ = self.online[0].forward(x)
        if self.variant == "scalar":
            return np.zeros_like(out[Q_HEAD])
        if self.variant == "c51":
            head = self.online[0].spec.head(DIST_HEAD)
            atoms = c51_support(head.vmin, head.vmax, head.atoms)
            p = out[DIST_HEAD].probs
            mean = np.sum(p * atoms, axis=-1)
            second = np.sum(p * atoms**2, axis=-1)
            return np.sqrt(np.maximum(second - mean**2, 0.0))
        o = out[DIST_HEAD]
        if isinstance(o, nn.GaussianOutput):
            return o.scale
        w = softmax(o.logits)
        mean = np.sum(w * o.locations, axis=-1)
        second = np.sum(w * (o.scales**2 + o.locations**2), axis=-1)
        return np.sqrt(np.maximum(second - mean**2, 0.0))


def make_critic(
    variant: str,
    arch: str,
    state_dim: int,
    action_dim: int,
    rng: np.random.Generator,
    *,
    torso: tuple[int, ...] = (256, 256),
    activation: str = "elu",
    num_components: int = 5,
    initial_scale: float = 0.5,
    atoms: int = 51,
    vmin: float = -150.0,
    vmax: float = 150.0,
    scalar_hidden: int | None = 51,
    loss_cfg: LossConfig,
) -> Critic:
    """Build the online/target networks for one critic configuration.

    The scalar critic gets one extra hidden layer (default 51 units) so
    its parameter count keeps pace with the distributional heads it is
    compared against.
    """
    input_dim = state_dim + action_dim

    def net(heads) -> nn.Network:
        spec = nn.NetworkSpec(input_dim, tuple(torso), tuple(heads), activation)
        return nn.make_network(spec, rng)

    if arch == "h1":
        online = [
            net([nn.GaussianHead(DIST_HEAD, initial_scale)]),
            net([nn.GaussianHead(DIST_HEAD, initial_scale)]),
        ]
    elif arch in ("h2", "h3"):
        online = [
            net([
                nn.GaussianHead(DIST_HEAD, initial_scale),
                nn.ScalarHead(Q_HEAD, hidden=None, stop_gradient_to_torso=True),
            ])
        ]
    elif variant == "mog":
        online = [net([nn.MoGHead(DIST_HEAD, num_components, initial_scale)])]
    elif variant == "gauss1":
        online = [net([nn.GaussianHead(DIST_HEAD, initial_scale)])]
    elif variant == "c51":
        online = [net([nn.CategoricalHead(DIST_HEAD, atoms, vmin, vmax)])]
    else:
        online = [net([nn.ScalarHead(Q_HEAD, hidden=scalar_hidden)])]

    target = [nn.Network(o.spec, o.params.copy()) for o in online]
    return Critic(variant, arch, online, target, loss_cfg)
