"""Flat experiment configuration with file and command-line parsing.

Config files are plain `key = value` lines (# comments allowed); the
command line overrides them with `--key value` pairs.  Every field is
scalar so the whole configuration can be echoed verbatim into result
files and reconstructed from them.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass
class ExperimentConfig:
    # task
    env: str = "pendulum"
    episode_length: int = 1000
    seed: int = 0
    # critic family
    critic_variant: str = "mog"  # mog | gauss1 | c51 | scalar
    critic_arch: str = "joint"  # joint | h1 | h2 | h3
    num_components: int = 5
    initial_scale: float = 0.5
    num_atoms: int = 51
    vmin: float = -150.0
    vmax: float = 150.0
    scalar_hidden: int = 51
    # networks
    torso: str = "256,256"
    activation: str = "elu"
    # Bellman loss
    gamma: float = 0.99
    num_return_samples: int = 20
    num_action_samples: int = 1
    greedy_bootstrap: bool = True
    bootstrap_on_timeout: bool = True
    # optimization
    batch_size: int = 256
    critic_lr: float = 1e-3
    actor_lr: float = 3e-4
    grad_clip: float = 40.0
    target_period: int = 100
    # policy improvement
    policy_improvement: str = "dpg"  # dpg | mpo_lite
    sigma_explore: float = 0.2
    mpo_temperature: float = 0.1
    mpo_action_samples: int = 20
    policy_initial_std: float = 0.3
    policy_std_floor: float = 1e-3
    # data collection
    replay_capacity: int = 1_000_000
    min_replay_size: int = 10_000
    warmup_uniform_actions: bool = True
    # Each uniform warmup action is held for this many environment steps.
    # Per-step resampling at a 50 Hz control rate averages out to almost
    # no torque, so the warmup data never leaves the low-energy region;
    # held actions sweep the whole energy range.
    warmup_action_hold: int = 20
    # schedule
    total_steps: int = 200_000
    eval_every: int = 5_000
    eval_episodes: int = 10
    # bookkeeping
    out_dir: str = "runs"
    run_name: str = ""
    save_checkpoints: bool = True
    # tabular policy-evaluation harness
    tabular_updates: int = 50_000
    tabular_batch: int = 128
    tabular_lr: float = 1e-3
    tabular_torso: str = "64,64"
    tabular_eval_samples: int = 10_000

    def torso_widths(self) -> tuple[int, ...]:
        return _parse_widths(self.torso)

    def tabular_torso_widths(self) -> tuple[int, ...]:
        return _parse_widths(self.tabular_torso)

    def validate(self) -> "ExperimentConfig":
        if self.critic_variant not in ("mog", "gauss1", "c51", "scalar"):
            raise ConfigError(f"unknown critic_variant {self.critic_variant!r}")
        if self.critic_arch not in ("joint", "h1", "h2", "h3"):
            raise ConfigError(f"unknown critic_arch {self.critic_arch!r}")
        if self.critic_arch != "joint" and self.critic_variant != "gauss1":
            raise ConfigError("critic_arch h1/h2/h3 requires critic_variant = gauss1")
        if self.policy_improvement not in ("dpg", "mpo_lite"):
            raise ConfigError(f"unknown policy_improvement {self.policy_improvement!r}")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        for name in ("num_components", "num_atoms", "batch_size", "target_period",
                     "eval_every", "eval_episodes", "episode_length",
                     "num_return_samples", "num_action_samples", "mpo_action_samples",
                     "warmup_action_hold"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.total_steps < 0:
            raise ConfigError("total_steps must be >= 0")
        if self.vmin >= self.vmax:
            raise ConfigError("vmin must be strictly below vmax")
        if self.initial_scale <= 0 or self.policy_initial_std <= 0:
            raise ConfigError("initial scales must be positive")
        return self


class ConfigError(ValueError):
    pass


def _parse_widths(text: str) -> tuple[int, ...]:
    try:
        widths = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError as e:
        raise ConfigError(f"bad layer widths {text!r}") from e
    if not widths or any(w < 1 for w in widths):
        raise ConfigError(f"bad layer widths {text!r}")
    return widths


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}

# Fields that define the critic under test rather than the conditions it
# is tested under.  Everything else must match across variants for a
# comparison to be fair.
VARIANT_FIELDS = frozenset({
    "critic_variant", "critic_arch", "num_components", "initial_scale",
    "num_atoms", "vmin", "vmax", "scalar_hidden",
    "num_return_samples", "num_action_samples", "greedy_bootstrap",
})
BOOKKEEPING_FIELDS = frozenset({"out_dir", "run_name", "save_checkpoints"})


def protocol_fields(cfg: ExperimentConfig) -> dict:
    """The comparison-protocol subset: everything that must be identical
    across critic variants in a fair study."""
    out = {}
    for name in sorted(_FIELDS):
        if name in VARIANT_FIELDS or name in BOOKKEEPING_FIELDS:
            continue
        out[name] = getattr(cfg, name)
    return out


def _coerce(name: str, raw: str):
    if name not in _FIELDS:
        raise ConfigError(f"unknown config key {name!r}; valid keys: {', '.join(sorted(_FIELDS))}")
    target = _FIELDS[name].type
    raw = raw.strip()
    if target in ("bool", bool):
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{name!r} expects a boolean, got {raw!r}")
    if target in ("int", int):
        try:
            return int(raw)
        except ValueError as e:
            raise ConfigError(f"{name!r} expects an integer, got {raw!r}") from e
    if target in ("float", float):
        try:
            return float(raw)
        except ValueError as e:
            raise ConfigError(f"{name!r} expects a number, got {raw!r}") from e
    return raw


def load_config(path) -> ExperimentConfig:
    """Read `key = value` lines into a config; later lines win."""
    values = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            values[key] = _coerce(key, raw)
    return dataclasses.replace(ExperimentConfig(), **values).validate()


def apply_overrides(cfg: ExperimentConfig, pairs: list[str]) -> ExperimentConfig:
    """Apply `--key value` pairs from the command line."""
    if len(pairs) % 2 != 0:
        raise ConfigError("overrides must come in --key value pairs")
    values = {}
    for flag, raw in zip(pairs[::2], pairs[1::2]):
        if not flag.startswith("--"):
            raise ConfigError(f"expected an override flag, got {flag!r}")
        key = flag[2:].replace("-", "_")
        values[key] = _coerce(key, raw)
    return dataclasses.replace(cfg, **values).validate()


def config_items(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """Sorted (key, rendered value) pairs for echoing into result files."""
    out = []
    for name in sorted(_FIELDS):
        v = getattr(cfg, name)
        out.append((name, str(v) if not isinstance(v, bool) else str(v).lower()))
    return out
