import numpy as np
import pytest

from mogrl import nn
from mogrl.critic import LossConfig, make_critic
from mogrl.policy import (
    ACTION_HEAD,
    MEAN_HEAD,
    STD_HEAD,
    dpg_objective_and_grad,
    dpg_update,
    explore,
    make_deterministic_policy,
    make_gaussian_policy,
    mpo_lite_objective_and_grad,
    mpo_lite_update,
    mpo_lite_weights,
    policy_mode,
)

DS, DA = 3, 2


class BowlCritic:
    """Analytic stand-in with Q(s, a) = -|a - target|^2."""

    def __init__(self, target):
        self.target = np.asarray(target, dtype=np.float64)

    def q_values(self, states, actions):
        return -np.sum((actions - self.target) ** 2, axis=-1)

    def q_and_action_grad(self, states, actions):
        return self.q_values(states, actions), -2.0 * (actions - self.target)


def det_actor(seed=0, torso=(8, 6), bound=1.0):
    return make_deterministic_policy(DS, DA, bound, np.random.default_rng(seed), torso=torso)


def gauss_actor(seed=0, torso=(8, 6), bound=1.0, **kw):
    return make_gaussian_policy(DS, DA, bound, np.random.default_rng(seed), torso=torso, **kw)


def real_critic(seed=0):
    critic = make_critic(
        "mog", "joint", DS, DA, np.random.default_rng(seed),
        torso=(6, 5), num_components=3,
        loss_cfg=LossConfig(0.9, num_return_samples=4),
    )
    rng = np.random.default_rng(seed + 1)
    for net in critic.online:
        net.params.data[:] += 0.05 * rng.normal(size=net.params.size)
    return critic


# ---------------------------------------------------------------------------
# modes, samples, exploration


def test_gaussian_mode_is_mean_and_zero_at_zero_params():
    actor = gauss_actor()
    actor.net.params.data[:] = 0.0
    s = np.random.default_rng(0).normal(size=(4, DS))
    assert np.all(policy_mode(actor, s) == 0.0)


def test_deterministic_mode_is_forward_output():
    actor = det_actor(1)
    s = np.random.default_rng(2).normal(size=(5, DS))
    out, _ = actor.net.forward(s)
    assert np.array_equal(actor.mode(s), out[ACTION_HEAD])
    assert np.array_equal(actor.sample(s, np.random.default_rng(3)), actor.mode(s))


def test_gaussian_mode_ignores_std_head_parameters():
    actor = gauss_actor(4)
    s = np.random.default_rng(5).normal(size=(4, DS))
    before = actor.mode(s).copy()
    for name in actor.net.params.names():
        if name.startswith(f"head.{STD_HEAD}."):
            actor.net.params.view(name)[...] += 1.3
    assert np.array_equal(actor.mode(s), before)
    assert not np.array_equal(
        actor.sample(s, np.random.default_rng(6)),
        np.clip(before, -1, 1),
    )


def test_gaussian_std_respects_floor_and_samples_respect_bounds():
    actor = gauss_actor(7, std_floor=5e-2, initial_std=0.4)
    rng = np.random.default_rng(8)
    s = rng.normal(size=(50, DS))
    out, _ = actor.net.forward(s)
    assert np.all(out[STD_HEAD] >= 5e-2)
    # inflate the stds so clipping actually binds
    for name in actor.net.params.names():
        if name.startswith(f"head.{STD_HEAD}.") and name.endswith(".b"):
            actor.net.params.view(name)[...] = 10.0
    a = actor.sample(s, rng)
    assert np.all(np.abs(a) <= 1.0)
    assert np.any(np.abs(a) == 1.0)


def test_explore_with_zero_sigma_is_the_mode():
    actor = det_actor(9)
    s = np.random.default_rng(10).normal(size=(4, DS))
    assert np.array_equal(explore(actor, s, np.random.default_rng(11), 0.0), actor.mode(s))


def test_explore_clips_huge_noise_to_bounds():
    actor = det_actor(12, bound=0.7)
    s = np.random.default_rng(13).normal(size=(200, DS))
    a = explore(actor, s, np.random.default_rng(14), 50.0)
    assert np.all(np.abs(a) <= 0.7)
    assert np.any(np.abs(a) == 0.7)


def test_explore_is_reproducible_per_seed():
    actor = det_actor(15)
    s = np.random.default_rng(16).normal(size=(6, DS))
    a = explore(actor, s, np.random.default_rng(17), 0.3)
    b = explore(actor, s, np.random.default_rng(17), 0.3)
    assert np.array_equal(a, b)


def test_explore_uses_gaussian_policy_own_sampling():
    actor = gauss_actor(18)
    s = np.random.default_rng(19).normal(size=(6, DS))
    a = explore(actor, s, np.random.default_rng(20), 0.0)
    b = actor.sample(s, np.random.default_rng(20))
    assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# deterministic policy gradient


def test_dpg_gradient_matches_finite_differences_through_critic():
    actor = det_actor(21)
    critic = real_critic(22)
    states = np.random.default_rng(23).normal(size=(4, DS))
    objective, grad = dpg_objective_and_grad(actor, critic, states)

    def j(params):
        a = actor.with_params(params)
        return float(np.mean(critic.q_values(states, a.mode(states))))

    assert objective == pytest.approx(j(actor.net.params), abs=1e-12)
    fd = np.zeros(actor.net.params.size)
    for i in range(fd.size):
        up, dn = actor.net.params.copy(), actor.net.params.copy()
        up.data[i] += 1e-6
        dn.data[i] -= 1e-6
        fd[i] = (j(up) - j(dn)) / 2e-6
    assert np.linalg.norm(grad.data - fd) / max(np.linalg.norm(fd), 1e-12) < 1e-4


def test_dpg_zero_critic_gives_exactly_zero_gradient():
    actor = det_actor(24)
    critic = real_critic(25)
    for net in critic.online + critic.target:
        net.params.data[:] = 0.0
    states = np.random.default_rng(26).normal(size=(4, DS))
    _, grad = dpg_objective_and_grad(actor, critic, states)
    assert np.all(grad.data == 0.0)

    opt = nn.adam_init(actor.net.params)
    updated, _, _ = dpg_update(actor, critic, states, 1e-3, opt)
    assert np.allclose(updated.net.params.data, actor.net.params.data, atol=1e-9)


def test_dpg_drives_actor_into_quadratic_bowl():
    actor = det_actor(27)
    critic = BowlCritic([0.4, -0.3])
    states = np.random.default_rng(28).normal(size=(16, DS))
    opt = nn.adam_init(actor.net.params)
    for _ in range(400):
        actor, opt, _ = dpg_update(actor, critic, states, 5e-2, opt)
    assert np.max(np.abs(actor.mode(states) - critic.target)) < 1e-2


def test_dpg_update_leaves_critic_untouched():
    actor = det_actor(29)
    critic = real_critic(30)
    snapshot = [net.params.data.copy() for net in critic.online + critic.target]
    states = np.random.default_rng(31).normal(size=(4, DS))
    opt = nn.adam_init(actor.net.params)
    for _ in range(3):
        actor, opt, _ = dpg_update(actor, critic, states, 1e-3, opt)
    for net, before in zip(critic.online + critic.target, snapshot):
        assert np.array_equal(net.params.data, before)


def railed_actor(seed):
    """Actor whose tanh head is pinned hard against the upper bound."""
    actor = det_actor(seed, bound=1.0)
    actor.net.params.view(f"head.{ACTION_HEAD}.out.b")[...] = 8.0
    return actor


def test_dpg_update_drops_outward_push_at_the_rail():
    actor = railed_actor(33)
    critic = BowlCritic([9.0, 9.0])  # optimum far outside the action box
    states = np.random.default_rng(34).normal(size=(6, DS))
    assert np.all(actor.mode(states) > 0.999)
    before = actor.net.params.data.copy()
    opt = nn.adam_init(actor.net.params)
    updated, _, _ = dpg_update(actor, critic, states, 1e-2, opt)
    assert np.array_equal(updated.net.params.data, before)


def test_dpg_update_still_pulls_railed_actions_inward():
    actor = railed_actor(35)
    critic = BowlCritic([0.0, 0.0])
    states = np.random.default_rng(36).normal(size=(6, DS))
    assert np.all(actor.mode(states) > 0.999)
    opt = nn.adam_init(actor.net.params)
    for _ in range(500):
        actor, opt, _ = dpg_update(actor, critic, states, 5e-2, opt)
    assert np.abs(actor.mode(states)).max() < 0.9


# ---------------------------------------------------------------------------
# weighted maximum likelihood


def test_mpo_weights_uniform_for_equal_values():
    w = mpo_lite_weights(np.full((3, 5), 1.7), 0.1)
    assert np.allclose(w, 0.2, atol=1e-15)


def test_mpo_weights_shift_invariant():
    rng = np.random.default_rng(32)
    q = rng.normal(size=(4, 6))
    w = mpo_lite_weights(q, 0.3)
    assert np.allclose(w, mpo_lite_weights(q + 11.0, 0.3), atol=1e-12)
    assert np.allclose(w.sum(axis=-1), 1.0, atol=1e-12)


def test_mpo_weights_approach_argmax_as_temperature_vanishes():
    q = np.array([[0.1, 0.9, 0.3]])
    w = mpo_lite_weights(q, 1e-6)
    assert w[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_mpo_weights_reject_nonpositive_temperature():
    with pytest.raises(ValueError):
        mpo_lite_weights(np.zeros((1, 2)), 0.0)


def test_mpo_gradient_matches_finite_differences():
    actor = gauss_actor(33)
    target_actor = gauss_actor(34)
    critic = real_critic(35)
    states = np.random.default_rng(36).normal(size=(3, DS))

    def loss_at(params):
        a = actor.with_params(params)
        val, _, _ = mpo_lite_objective_and_grad(
            a, target_actor, critic, states, 5, 0.1, np.random.default_rng(37)
        )
        return val

    loss, grad, weights = mpo_lite_objective_and_grad(
        actor, target_actor, critic, states, 5, 0.1, np.random.default_rng(37)
    )
    assert np.allclose(weights.sum(axis=-1), 1.0, atol=1e-12)
    fd = np.zeros(actor.net.params.size)
    for i in range(fd.size):
        up, dn = actor.net.params.copy(), actor.net.params.copy()
        up.data[i] += 1e-6
        dn.data[i] -= 1e-6
        fd[i] = (loss_at(up) - loss_at(dn)) / 2e-6
    assert np.linalg.norm(grad.data - fd) / np.linalg.norm(fd) < 1e-4


def test_mpo_drives_mean_into_quadratic_bowl():
    actor = gauss_actor(38, initial_std=0.4)
    critic = BowlCritic([0.2, -0.6])
    states = np.random.default_rng(39).normal(size=(16, DS))
    opt = nn.adam_init(actor.net.params)
    rng = np.random.default_rng(40)
    target_actor = actor
    for step in range(600):
        actor, opt, _ = mpo_lite_update(
            actor, target_actor, critic, states, 20, 0.1, 2e-2, opt, rng
        )
        if step % 50 == 0:
            target_actor = actor
    assert np.max(np.abs(actor.mode(states) - critic.target)) < 5e-2


def test_mpo_update_leaves_critic_untouched():
    actor = gauss_actor(41)
    critic = real_critic(42)
    snapshot = [net.params.data.copy() for net in critic.online + critic.target]
    states = np.random.default_rng(43).normal(size=(4, DS))
    opt = nn.adam_init(actor.net.params)
    actor, opt, _ = mpo_lite_update(
        actor, actor, critic, states, 8, 0.1, 1e-3, opt, np.random.default_rng(44)
    )
    for net, before in zip(critic.online + critic.target, snapshot):
        assert np.array_equal(net.params.data, before)
