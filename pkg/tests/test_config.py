"""Config parsing, validation, overrides, and the fair-comparison view."""
import dataclasses

import pytest

from mogrl.config import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    config_items,
    load_config,
    protocol_fields,
)


def test_defaults_are_valid_and_pinned():
    cfg = ExperimentConfig().validate()
    assert cfg.num_components == 5
    assert cfg.num_atoms == 51
    assert cfg.initial_scale == 0.5
    assert cfg.num_return_samples == 20
    assert cfg.num_action_samples == 1
    assert cfg.greedy_bootstrap is True
    assert cfg.batch_size == 256
    assert cfg.gamma == 0.99
    assert cfg.target_period == 100
    assert cfg.eval_every == 5_000
    assert cfg.eval_episodes == 10
    assert cfg.replay_capacity == 1_000_000
    assert cfg.min_replay_size == 10_000
    assert cfg.warmup_action_hold == 20
    assert cfg.total_steps == 200_000


def test_torso_parsing():
    assert ExperimentConfig(torso="256,256").torso_widths() == (256, 256)
    assert ExperimentConfig(torso="64").torso_widths() == (64,)
    assert ExperimentConfig(torso="10, 20 ,30").torso_widths() == (10, 20, 30)
    with pytest.raises(ConfigError):
        ExperimentConfig(torso="").torso_widths()
    with pytest.raises(ConfigError):
        ExperimentConfig(torso="a,b").torso_widths()
    with pytest.raises(ConfigError):
        ExperimentConfig(torso="0,4").torso_widths()


@pytest.mark.parametrize(
    "patch",
    [
        {"critic_variant": "dqn"},
        {"critic_arch": "h4"},
        {"critic_arch": "h2", "critic_variant": "mog"},
        {"policy_improvement": "ppo"},
        {"gamma": 1.0},
        {"gamma": -0.01},
        {"num_components": 0},
        {"batch_size": 0},
        {"total_steps": -1},
        {"vmin": 10.0, "vmax": 10.0},
        {"initial_scale": 0.0},
        {"policy_initial_std": -1.0},
        {"warmup_action_hold": 0},
    ],
)
def test_validation_rejects_bad_fields(patch):
    cfg = dataclasses.replace(ExperimentConfig(), **patch)
    with pytest.raises(ConfigError):
        cfg.validate()


def test_h_architectures_require_gauss1():
    for arch in ("h1", "h2", "h3"):
        cfg = ExperimentConfig(critic_variant="gauss1", critic_arch=arch)
        assert cfg.validate() is cfg
        with pytest.raises(ConfigError):
            ExperimentConfig(critic_variant="c51", critic_arch=arch).validate()


def test_load_config_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(
        "# comment line\n"
        "\n"
        "env = pendulum\n"
        "critic_variant = c51\n"
        "seed = 3\n"
        "critic_lr = 1e-3\n"
        "greedy_bootstrap = false\n"
        "seed = 7\n"  # later lines win
    )
    cfg = load_config(path)
    assert cfg.critic_variant == "c51"
    assert cfg.seed == 7
    assert cfg.critic_lr == 1e-3
    assert cfg.greedy_bootstrap is False


def test_load_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("not_a_key = 1\n")
    with pytest.raises(ConfigError, match="unknown config key"):
        load_config(path)


def test_load_config_rejects_missing_equals(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("seed 3\n")
    with pytest.raises(ConfigError, match="expected key = value"):
        load_config(path)


@pytest.mark.parametrize("raw,expected", [("true", True), ("1", True), ("YES", True),
                                          ("on", True), ("false", False), ("0", False),
                                          ("No", False), ("off", False)])
def test_bool_coercion(tmp_path, raw, expected):
    path = tmp_path / "exp.cfg"
    path.write_text(f"save_checkpoints = {raw}\n")
    assert load_config(path).save_checkpoints is expected


def test_bad_typed_values_raise(tmp_path):
    for line, msg in [
        ("seed = 3.5", "integer"),
        ("critic_lr = fast", "number"),
        ("save_checkpoints = maybe", "boolean"),
    ]:
        path = tmp_path / "exp.cfg"
        path.write_text(line + "\n")
        with pytest.raises(ConfigError, match=msg):
            load_config(path)


def test_overrides_apply_and_win():
    cfg = ExperimentConfig()
    out = apply_overrides(cfg, ["--seed", "9", "--critic-lr", "0.01", "--env", "cartpole_swingup"])
    assert out.seed == 9
    assert out.critic_lr == 0.01
    assert out.env == "cartpole_swingup"
    assert cfg.seed == 0  # original untouched


def test_overrides_must_be_flag_value_pairs():
    with pytest.raises(ConfigError, match="pairs"):
        apply_overrides(ExperimentConfig(), ["--seed"])
    with pytest.raises(ConfigError, match="override flag"):
        apply_overrides(ExperimentConfig(), ["seed", "3"])
    with pytest.raises(ConfigError, match="unknown config key"):
        apply_overrides(ExperimentConfig(), ["--sneed", "3"])


def test_protocol_fields_ignore_the_critic_under_test():
    base = ExperimentConfig()
    variants = [
        dataclasses.replace(base, critic_variant="mog", num_components=5),
        dataclasses.replace(base, critic_variant="c51", num_atoms=51),
        dataclasses.replace(base, critic_variant="scalar", scalar_hidden=51),
        dataclasses.replace(base, critic_variant="gauss1", critic_arch="h3"),
    ]
    views = [protocol_fields(v) for v in variants]
    assert all(v == views[0] for v in views[1:])


def test_protocol_fields_detect_unfair_comparisons():
    a = protocol_fields(ExperimentConfig(critic_variant="mog"))
    b = protocol_fields(ExperimentConfig(critic_variant="c51", batch_size=128))
    assert a != b
    c = protocol_fields(ExperimentConfig(critic_variant="c51", torso="128,128"))
    assert a != c


def test_protocol_fields_exclude_bookkeeping():
    a = protocol_fields(ExperimentConfig(out_dir="x", run_name="a"))
    b = protocol_fields(ExperimentConfig(out_dir="y", run_name="b", save_checkpoints=False))
    assert a == b


def test_config_items_cover_every_field_sorted():
    cfg = ExperimentConfig()
    items = config_items(cfg)
    names = [k for k, _ in items]
    assert names == sorted(f.name for f in dataclasses.fields(ExperimentConfig))
    rendered = dict(items)
    assert rendered["greedy_bootstrap"] == "true"
    assert rendered["num_components"] == "5"
