import math

import numpy as np
import pytest

from mogrl.distributions import SCALE_FLOOR, softplus
from mogrl.nn import (
    HEAD_INIT_SCALE,
    BoundedVectorHead,
    CategoricalHead,
    CategoricalOutput,
    GaussianHead,
    GaussianOutput,
    MoGHead,
    MoGOutput,
    NetworkSpec,
    ParameterVector,
    PositiveVectorHead,
    ScalarHead,
    adam_init,
    adam_step,
    backward,
    clip_by_global_norm,
    forward,
    init_params,
    layout_for,
    load_params,
    make_network,
    save_params,
    target_sync,
)

ALL_HEADS = (
    MoGHead("mog", components=3, initial_scale=0.5),
    GaussianHead("gauss", initial_scale=0.7),
    CategoricalHead("cat", atoms=5, vmin=-1.0, vmax=1.0),
    ScalarHead("q"),
    ScalarHead("deepq", hidden=6),
    BoundedVectorHead("act", size=2, bound=1.5),
    PositiveVectorHead("std", size=2, floor=1e-3, initial_value=0.3),
)


def tiny_spec(**kw):
    defaults = dict(input_dim=3, torso=(8, 7), heads=ALL_HEADS, activation="elu")
    defaults.update(kw)
    return NetworkSpec(**defaults)


# ---------------------------------------------------------------------------
# parameter vector plumbing


def test_views_alias_flat_storage():
    spec = tiny_spec()
    pv = ParameterVector.zeros(layout_for(spec))
    pv.view("torso.0.W")[0, 0] = 3.5
    assert pv.data[0] == 3.5
    flat_before = pv.data.copy()
    pv.data[:] += 1.0
    assert pv.view("torso.0.W")[0, 0] == 4.5
    assert not np.array_equal(flat_before, pv.data)


def test_copy_is_independent():
    pv = ParameterVector.zeros(layout_for(tiny_spec()))
    clone = pv.copy()
    clone.data[:] = 9.0
    assert np.all(pv.data == 0.0)


def test_layout_size_matches_views():
    pv = ParameterVector.zeros(layout_for(tiny_spec()))
    total = sum(pv.view(n).size for n in pv.names())
    assert total == pv.size == pv.data.size


def test_duplicate_head_names_rejected():
    with pytest.raises(ValueError):
        NetworkSpec(input_dim=2, torso=(4,), heads=(ScalarHead("q"), ScalarHead("q")))


# ---------------------------------------------------------------------------
# initialization


def test_init_torso_weights_truncated_and_biases_zero():
    spec = tiny_spec()
    pv = init_params(spec, np.random.default_rng(0))
    w0 = pv.view("torso.0.W")
    assert np.all(np.abs(w0) <= 2.0 / math.sqrt(3) + 1e-12)
    assert np.any(w0 != 0.0)
    assert np.all(pv.view("torso.0.b") == 0.0)
    assert np.all(pv.view("torso.1.b") == 0.0)


def test_init_head_weights_are_tiny_but_nonzero():
    spec = tiny_spec()
    pv = init_params(spec, np.random.default_rng(1))
    w = pv.view("head.mog.loc.W")
    bound = 2.0 * HEAD_INIT_SCALE / math.sqrt(7)
    assert np.all(np.abs(w) <= bound + 1e-15)
    assert np.any(w != 0.0)


def test_init_scale_layers_emit_configured_scale_exactly():
    spec = tiny_spec()
    net = make_network(spec, np.random.default_rng(2))
    assert np.all(net.params.view("head.mog.scale.W") == 0.0)
    x = np.random.default_rng(3).normal(size=(4, 3))
    out, _ = net.forward(x)
    assert np.allclose(out["mog"].scales, 0.5, atol=1e-12)
    assert np.allclose(out["gauss"].scale, 0.7, atol=1e-12)
    assert np.allclose(out["std"], 0.3, atol=1e-12)


def test_zero_parameters_give_uniform_mixture_with_softplus_zero_scale():
    spec = NetworkSpec(input_dim=2, torso=(4,), heads=(MoGHead("z", components=4),))
    pv = ParameterVector.zeros(layout_for(spec))
    out, _ = forward(pv, spec, np.array([0.3, -0.4]))
    assert np.allclose(out["z"].logits, 0.0)
    assert np.allclose(out["z"].locations, 0.0)
    assert np.allclose(out["z"].scales, math.log(2.0) + SCALE_FLOOR, atol=1e-12)


def test_init_deterministic_per_seed():
    spec = tiny_spec()
    a = init_params(spec, np.random.default_rng(5))
    b = init_params(spec, np.random.default_rng(5))
    c = init_params(spec, np.random.default_rng(6))
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


# ---------------------------------------------------------------------------
# forward shapes and ranges


def test_forward_shapes_batched():
    net = make_network(tiny_spec(), np.random.default_rng(7))
    out, _ = net.forward(np.zeros((5, 3)))
    assert out["mog"].logits.shape == (5, 3)
    assert out["mog"].locations.shape == (5, 3)
    assert out["cat"].probs.shape == (5, 5)
    assert out["q"].shape == (5,)
    assert out["deepq"].shape == (5,)
    assert out["act"].shape == (5, 2)
    assert out["std"].shape == (5, 2)


def test_single_input_matches_batch_of_one():
    net = make_network(tiny_spec(), np.random.default_rng(8))
    x = np.array([0.1, -0.2, 0.3])
    single, _ = net.forward(x)
    batched, _ = net.forward(x[None, :])
    assert np.allclose(single["mog"].locations, batched["mog"].locations[0])
    assert np.allclose(single["q"], batched["q"][0])
    assert single["act"].shape == (2,)


def test_categorical_head_outputs_normalized_log_probs():
    net = make_network(tiny_spec(), np.random.default_rng(9))
    out, _ = net.forward(np.random.default_rng(10).normal(size=(6, 3)))
    p = out["cat"].probs
    assert np.allclose(p.sum(axis=-1), 1.0, atol=1e-12)
    assert np.allclose(np.log(p), out["cat"].log_probs, atol=1e-12)


def test_bounded_head_respects_bound():
    net = make_network(tiny_spec(), np.random.default_rng(11))
    big = 50.0 * np.random.default_rng(12).normal(size=(100, 3))
    out, _ = net.forward(big)
    assert np.all(np.abs(out["act"]) <= 1.5)


def test_positive_head_respects_floor():
    net = make_network(tiny_spec(), np.random.default_rng(13))
    out, _ = net.forward(np.random.default_rng(14).normal(size=(50, 3)))
    assert np.all(out["std"] >= 1e-3)


def test_forward_rejects_wrong_width():
    net = make_network(tiny_spec(), np.random.default_rng(15))
    with pytest.raises(ValueError):
        net.forward(np.zeros((4, 5)))


# ---------------------------------------------------------------------------
# backward: finite differences


def scalar_functional(params, spec, x, cots):
    out, _ = forward(params, spec, x)
    total = 0.0
    for name, ct in cots.items():
        o = out[name]
        if isinstance(ct, MoGOutput):
            total += np.sum(ct.logits * o.logits) + np.sum(ct.locations * o.locations)
            total += np.sum(ct.scales * o.scales)
        elif isinstance(ct, GaussianOutput):
            total += np.sum(ct.mean * o.mean) + np.sum(ct.scale * o.scale)
        elif isinstance(ct, CategoricalOutput):
            total += np.sum(ct.log_probs * o.log_probs)
        else:
            total += np.sum(ct * o)
    return total


def fd_param_grad(params, spec, x, cots, eps=1e-6):
    g = np.zeros(params.size)
    for i in range(params.size):
        up, dn = params.copy(), params.copy()
        up.data[i] += eps
        dn.data[i] -= eps
        g[i] = (
            scalar_functional(up, spec, x, cots) - scalar_functional(dn, spec, x, cots)
        ) / (2 * eps)
    return g


def random_cotangents(rng, out):
    cots = {}
    for name, o in out.items():
        if isinstance(o, MoGOutput):
            cots[name] = MoGOutput(
                rng.normal(size=o.logits.shape),
                rng.normal(size=o.locations.shape),
                rng.normal(size=o.scales.shape),
            )
        elif isinstance(o, GaussianOutput):
            cots[name] = GaussianOutput(rng.normal(size=o.mean.shape), rng.normal(size=o.scale.shape))
        elif isinstance(o, CategoricalOutput):
            cots[name] = CategoricalOutput(rng.normal(size=o.log_probs.shape), None)
        else:
            cots[name] = rng.normal(size=o.shape)
    return cots


@pytest.mark.parametrize("activation", ["elu", "relu", "tanh"])
def test_backward_matches_finite_differences(activation):
    spec = NetworkSpec(
        input_dim=3,
        torso=(6, 5),
        heads=(
            MoGHead("mog", components=2),
            CategoricalHead("cat", atoms=4, vmin=0.0, vmax=3.0),
            ScalarHead("deepq", hidden=4),
            BoundedVectorHead("act", size=2, bound=2.0),
            PositiveVectorHead("std", size=2),
        ),
        activation=activation,
    )
    rng = np.random.default_rng(20)
    params = init_params(spec, rng)
    params.data[:] += 0.05 * rng.normal(size=params.size)  # get off special points
    x = rng.normal(size=(4, 3))
    out, trace = forward(params, spec, x)
    cots = random_cotangents(rng, out)
    grad, dx = backward(trace, cots)
    fd = fd_param_grad(params, spec, x, cots)
    denom = max(np.linalg.norm(fd), 1e-12)
    assert np.linalg.norm(grad.data - fd) / denom < 1e-6

    fd_x = np.zeros_like(x)
    for i in np.ndindex(*x.shape):
        up, dn = x.copy(), x.copy()
        up[i] += 1e-6
        dn[i] -= 1e-6
        fd_x[i] = (
            scalar_functional(params, spec, up, cots) - scalar_functional(params, spec, dn, cots)
        ) / 2e-6
    assert np.allclose(dx, fd_x, atol=1e-7)


def test_backward_gaussian_head_finite_differences():
    spec = NetworkSpec(input_dim=2, torso=(5,), heads=(GaussianHead("g"),))
    rng = np.random.default_rng(21)
    params = init_params(spec, rng)
    params.data[:] += 0.05 * rng.normal(size=params.size)
    x = rng.normal(size=(3, 2))
    out, trace = forward(params, spec, x)
    cots = {"g": GaussianOutput(rng.normal(size=3), rng.normal(size=3))}
    grad, _ = backward(trace, cots)
    fd = fd_param_grad(params, spec, x, cots)
    assert np.linalg.norm(grad.data - fd) / np.linalg.norm(fd) < 1e-6


def test_backward_omitted_heads_contribute_nothing():
    spec = tiny_spec()
    rng = np.random.default_rng(22)
    params = init_params(spec, rng)
    x = rng.normal(size=(2, 3))
    _, trace = forward(params, spec, x)
    grad, dx = backward(trace, {})
    assert np.all(grad.data == 0.0) and np.all(dx == 0.0)


def test_backward_rejects_unknown_head():
    spec = tiny_spec()
    params = init_params(spec, np.random.default_rng(23))
    _, trace = forward(params, spec, np.zeros((1, 3)))
    with pytest.raises(KeyError):
        backward(trace, {"nope": np.zeros(1)})


def test_stop_gradient_blocks_torso_but_not_head():
    spec = NetworkSpec(
        input_dim=3,
        torso=(6,),
        heads=(GaussianHead("dist"), ScalarHead("q", hidden=4, stop_gradient_to_torso=True)),
    )
    rng = np.random.default_rng(24)
    params = init_params(spec, rng)
    params.data[:] += 0.05 * rng.normal(size=params.size)
    x = rng.normal(size=(3, 3))
    _, trace = forward(params, spec, x)
    cots = {"q": rng.normal(size=3)}

    respected, dx_respected = backward(trace, cots, respect_stop_gradients=True)
    for name in respected.names():
        block = respected.view(name)
        if name.startswith("head.q."):
            continue
        assert np.all(block == 0.0), name
    assert np.all(dx_respected == 0.0)
    assert np.any(respected.view("head.q.out.W") != 0.0)

    # the head-local gradient matches finite differences either way
    fd = fd_param_grad(params, spec, x, cots)
    fd_pv = ParameterVector(fd, params.layout)
    for name in ("head.q.out.W", "head.q.out.b", "head.q.hidden.W", "head.q.hidden.b"):
        assert np.allclose(respected.view(name), fd_pv.view(name), atol=1e-6)

    # ignoring the stop gradient recovers the full chain rule
    ignored, _ = backward(trace, cots, respect_stop_gradients=False)
    assert np.linalg.norm(ignored.data - fd) / np.linalg.norm(fd) < 1e-6
    assert np.any(ignored.view("torso.0.W") != 0.0)


# ---------------------------------------------------------------------------
# optimization helpers


def test_adam_first_step_is_signlike():
    spec = NetworkSpec(input_dim=2, torso=(3,), heads=(ScalarHead("q"),))
    params = init_params(spec, np.random.default_rng(25))
    grad = ParameterVector.zeros(params.layout)
    grad.data[:] = np.random.default_rng(26).normal(size=params.size)
    grad.data[np.abs(grad.data) < 1e-3] = 1e-3  # keep |g| well above eps
    state = adam_init(params)
    lr = 0.01
    new, state = adam_step(params, grad, state, lr=lr)
    step = new.data - params.data
    assert np.allclose(step, -lr * np.sign(grad.data), atol=1e-4)
    assert state.step == 1


def test_adam_is_deterministic_and_pure():
    spec = NetworkSpec(input_dim=2, torso=(3,), heads=(ScalarHead("q"),))
    params = init_params(spec, np.random.default_rng(27))
    before = params.data.copy()
    grad = ParameterVector(np.random.default_rng(28).normal(size=params.size), params.layout)
    s1 = adam_init(params)
    a, _ = adam_step(params, grad, s1, lr=1e-3)
    b, _ = adam_step(params, grad, adam_init(params), lr=1e-3)
    assert np.array_equal(a.data, b.data)
    assert np.array_equal(params.data, before)  # input untouched


def test_clip_by_global_norm():
    layout = layout_for(NetworkSpec(input_dim=2, torso=(3,), heads=(ScalarHead("q"),)))
    g = ParameterVector.zeros(layout)
    g.data[:] = 3.0
    true_norm = math.sqrt(g.size * 9.0)
    clipped, norm = clip_by_global_norm(g, 1.0)
    assert norm == pytest.approx(true_norm, rel=1e-12)
    assert np.linalg.norm(clipped.data) == pytest.approx(1.0, rel=1e-12)

    small = ParameterVector.zeros(layout)
    small.data[0] = 0.5
    same, norm2 = clip_by_global_norm(small, 1.0)
    assert norm2 == pytest.approx(0.5)
    assert np.array_equal(same.data, small.data)


def test_target_sync_period():
    layout = layout_for(NetworkSpec(input_dim=2, torso=(3,), heads=(ScalarHead("q"),)))
    online = ParameterVector.zeros(layout)
    online.data[:] = 1.0
    target = ParameterVector.zeros(layout)

    synced = target_sync(online, target, period=10, step=0)
    assert np.all(synced.data == 1.0)
    online.data[:] = 2.0
    assert np.all(synced.data == 1.0)  # copy, not alias

    held = target_sync(online, synced, period=10, step=3)
    assert held is synced
    resynced = target_sync(online, synced, period=10, step=10)
    assert np.all(resynced.data == 2.0)


# ---------------------------------------------------------------------------
# checkpointing


def test_save_load_roundtrip_bitwise(tmp_path):
    net = make_network(tiny_spec(), np.random.default_rng(29))
    path = tmp_path / "params.bin"
    save_params(path, net.params)
    loaded = load_params(path)
    assert np.array_equal(loaded.data, net.params.data)
    assert list(loaded.names()) == list(net.params.names())
    assert loaded.view("torso.0.W").shape == net.params.view("torso.0.W").shape


def test_load_rejects_wrong_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ValueError):
        load_params(path)


def test_load_rejects_truncated_payload(tmp_path):
    net = make_network(tiny_spec(), np.random.default_rng(30))
    path = tmp_path / "params.bin"
    save_params(path, net.params)
    blob = path.read_bytes()
    path.write_bytes(blob[:-16])
    with pytest.raises(ValueError):
        load_params(path)
