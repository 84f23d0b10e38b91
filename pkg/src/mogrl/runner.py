"""Experiment runner: off-policy training loop, evaluation, sweeps,
and the exact-oracle policy-evaluation harness for tabular MDPs.

One `run` trains a single (critic variant, architecture, policy
improvement) combination under a fixed data-collection protocol and
writes a metrics CSV whose header echoes the full configuration, so
every result file is self-describing and reproducible from its own
contents.  Identical configurations and seeds produce identical
metrics; wall-clock timing is the one column that depends on the host
(inject a `clock` to pin it).
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np

from . import nn, policy as policy_mod
from .config import ExperimentConfig, config_items
from .critic import (
    Critic,
    LossConfig,
    NonFiniteLossError,
    Transition,
    TransitionBatch,
    make_critic,
    sample_based_loss,
)
from .envs import make_env, max_return
from .oracle import TabularMDP, TabularPolicy, exact_q, return_samples, w1_distance
from .replay import ReplayBuffer

CSV_SCHEMA = "mogrl-metrics v1"
CSV_COLUMNS = (
    "step",
    "episode_return",
    "eval_return_mean",
    "eval_return_std",
    "critic_loss",
    "actor_loss",
    "q_mean",
    "mean_sigma",
    "wallclock_s",
)

_STREAMS = ("critic_init", "actor_init", "env", "explore", "replay", "critic_loss", "actor_loss", "eval")


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent named generators derived from one root seed."""
    root = np.random.SeedSequence(seed)
    children = root.spawn(len(_STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(_STREAMS, children)}


def _format_value(v) -> str:
    if isinstance(v, float):
        if np.isnan(v):
            return ""
        return repr(v)
    return str(v)


class MetricsWriter:
    """CSV with `#` comment lines carrying the schema and configuration.

    The last line is a `# status = ...` footer: "ok" for a completed
    run, or the failure reason.
    """

    def __init__(self, path: str, cfg: ExperimentConfig):
        self.path = path
        self._f = open(path, "w", encoding="utf-8", newline="\n")
        self._f.write(f"# {CSV_SCHEMA}\n")
        for key, value in config_items(cfg):
            self._f.write(f"# {key} = {value}\n")
        self._f.write(",".join(CSV_COLUMNS) + "\n")

    def write_row(self, values: dict) -> None:
        self._f.write(",".join(_format_value(values[c]) for c in CSV_COLUMNS) + "\n")
        self._f.flush()

    def finish(self, status: str) -> None:
        self._f.write(f"# status = {status}\n")
        self._f.close()


def read_metrics(path: str) -> tuple[dict[str, str], np.ndarray]:
    """Parse a metrics CSV back into (config dict, structured rows)."""
    cfg: dict[str, str] = {}
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        header = None
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, _, v = body.partition("=")
                    cfg[k.strip()] = v.strip()
                continue
            if header is None:
                header = line.split(",")
                continue
            parts = line.split(",")
            rows.append(tuple(float(p) if p else np.nan for p in parts))
    if header is None:
        raise ValueError(f"{path} has no header row")
    dtype = [(name, np.float64) for name in header]
    return cfg, np.array(rows, dtype=dtype)


@dataclass
class RunResult:
    run_dir: str
    csv_path: str
    status: str  # "ok" or "failed: ..."
    steps_completed: int
    final_eval_mean: float
    best_eval_mean: float


def _make_actor(cfg: ExperimentConfig, obs_dim: int, action_dim: int, bound: float, rng):
    torso = cfg.torso_widths()
    if cfg.policy_improvement == "dpg":
        return policy_mod.make_deterministic_policy(obs_dim, action_dim, bound, rng, torso, cfg.activation)
    return policy_mod.make_gaussian_policy(
        obs_dim, action_dim, bound, rng, torso, cfg.activation,
        cfg.policy_initial_std, cfg.policy_std_floor,
    )


def _build_critic(cfg: ExperimentConfig, obs_dim: int, action_dim: int, rng) -> Critic:
    loss_cfg = LossConfig(
        cfg.gamma, cfg.num_return_samples, cfg.num_action_samples, cfg.greedy_bootstrap
    )
    return make_critic(
        cfg.critic_variant,
        cfg.critic_arch,
        obs_dim,
        action_dim,
        rng,
        torso=cfg.torso_widths(),
        activation=cfg.activation,
        num_components=cfg.num_components,
        initial_scale=cfg.initial_scale,
        atoms=cfg.num_atoms,
        vmin=cfg.vmin,
        vmax=cfg.vmax,
        scalar_hidden=cfg.scalar_hidden if cfg.scalar_hidden > 0 else None,
        loss_cfg=loss_cfg,
    )


def evaluate_policy(cfg: ExperimentConfig, actor, rng: np.random.Generator) -> tuple[float, float]:
    """Mean and std of undiscounted returns over eval episodes at the mode."""
    envs = [make_env(cfg.env, cfg.episode_length) for _ in range(cfg.eval_episodes)]
    obs = np.stack([env.reset(rng) for env in envs])
    totals = np.zeros(len(envs))
    for _ in range(cfg.episode_length):
        actions = actor.mode(obs)
        for i, env in enumerate(envs):
            o, r, _ = env.step(actions[i])
            obs[i] = o
            totals[i] += r
    return float(totals.mean()), float(totals.std())


def default_run_name(cfg: ExperimentConfig) -> str:
    return f"{cfg.env}-{cfg.critic_variant}-{cfg.critic_arch}-{cfg.policy_improvement}-seed{cfg.seed}"


def run(cfg: ExperimentConfig, clock=None) -> RunResult:
    """Train one configuration end to end and write its metrics CSV."""
    cfg.validate()
    streams = seed_streams(cfg.seed)
    env = make_env(cfg.env, cfg.episode_length)
    obs_dim, action_dim = env.spec.observation_dim, env.spec.action_dim
    bound = env.spec.action_bound

    critic = _build_critic(cfg, obs_dim, action_dim, streams["critic_init"])
    actor = _make_actor(cfg, obs_dim, action_dim, bound, streams["actor_init"])
    target_actor = actor.with_params(actor.net.params.copy())
    replay = ReplayBuffer(cfg.replay_capacity, obs_dim, action_dim)

    critic_opts = [nn.adam_init(net.params) for net in critic.online]
    actor_opt = nn.adam_init(actor.net.params)

    run_name = cfg.run_name or default_run_name(cfg)
    run_dir = os.path.join(cfg.out_dir, run_name)
    os.makedirs(run_dir, exist_ok=True)
    csv_path = os.path.join(run_dir, "metrics.csv")
    writer = MetricsWriter(csv_path, cfg)

    if clock is None:
        clock = time.monotonic
    t0 = clock()

    obs = env.reset(streams["env"])
    episode_return = 0.0
    warmup_action = np.zeros(action_dim)
    warmup_hold_left = 0
    last_episode_return = float("nan")
    loss_sum = actor_loss_sum = 0.0
    loss_count = 0
    last_batch = None
    status = "ok"
    final_eval = best_eval = float("nan")
    updates = 0
    step = 0

    try:
        for step in range(1, cfg.total_steps + 1):
            warming_up = len(replay) < cfg.min_replay_size
            if warming_up and cfg.warmup_uniform_actions:
                if warmup_hold_left == 0:
                    warmup_action = streams["explore"].uniform(-bound, bound, size=action_dim)
                    warmup_hold_left = cfg.warmup_action_hold
                action = warmup_action
                warmup_hold_left -= 1
            else:
                action = policy_mod.explore(actor, obs[None, :], streams["explore"], cfg.sigma_explore)[0]
            next_obs, reward, continues = env.step(action)
            # Time-limit truncation is not a real terminal state, so by
            # default the stored transition still bootstraps.
            stored = continues or cfg.bootstrap_on_timeout
            replay.push(Transition(obs, action, reward, next_obs, stored))
            episode_return += reward
            if continues:
                obs = next_obs
            else:
                last_episode_return = episode_return
                episode_return = 0.0
                obs = env.reset(streams["env"])

            if len(replay) >= cfg.min_replay_size:
                batch = replay.sample(cfg.batch_size, streams["replay"])
                last_batch = batch
                loss, grads = critic.loss_and_grads(batch, target_actor, streams["critic_loss"])
                for i, g in enumerate(grads):
                    g, _ = nn.clip_by_global_norm(g, cfg.grad_clip)
                    new_params, critic_opts[i] = nn.adam_step(
                        critic.online[i].params, g, critic_opts[i], cfg.critic_lr
                    )
                    critic.online[i] = critic.online[i].with_params(new_params)
                if cfg.policy_improvement == "dpg":
                    actor, actor_opt, objective = policy_mod.dpg_update(
                        actor, critic, batch.states, cfg.actor_lr, actor_opt, cfg.grad_clip
                    )
                    actor_metric = -objective  # report as a loss-like number
                else:
                    actor, actor_opt, actor_metric = policy_mod.mpo_lite_update(
                        actor, target_actor, critic, batch.states,
                        cfg.mpo_action_samples, cfg.mpo_temperature,
                        cfg.actor_lr, actor_opt, streams["actor_loss"], cfg.grad_clip,
                    )
                updates += 1
                critic.sync_targets(updates, cfg.target_period)
                target_actor = target_actor.with_params(
                    nn.target_sync(actor.net.params, target_actor.net.params, cfg.target_period, updates)
                )
                loss_sum += loss
                actor_loss_sum += actor_metric
                loss_count += 1

            if step % cfg.eval_every == 0:
                eval_mean, eval_std = evaluate_policy(cfg, actor, streams["eval"])
                final_eval = eval_mean
                best_eval = eval_mean if np.isnan(best_eval) else max(best_eval, eval_mean)
                if last_batch is not None:
                    q_mean = float(np.mean(critic.q_values(last_batch.states, last_batch.actions)))
                    std_mean = float(np.mean(critic.predictive_std(last_batch.states, last_batch.actions)))
                else:
                    q_mean = std_mean = float("nan")
                writer.write_row({
                    "step": step,
                    "episode_return": last_episode_return,
                    "eval_return_mean": eval_mean,
                    "eval_return_std": eval_std,
                    "critic_loss": loss_sum / loss_count if loss_count else float("nan"),
                    "actor_loss": actor_loss_sum / loss_count if loss_count else float("nan"),
                    "q_mean": q_mean,
                    "mean_sigma": std_mean,
                    "wallclock_s": float(clock() - t0),
                })
                loss_sum = actor_loss_sum = 0.0
                loss_count = 0
    except NonFiniteLossError as e:
        status = f"failed: {e}"
    except BaseException:
        status = "failed: aborted"
        raise
    finally:
        writer.finish(status)

    if cfg.save_checkpoints:
        for i, net in enumerate(critic.online):
            nn.save_params(os.path.join(run_dir, f"critic_{i}.params"), net.params)
        nn.save_params(os.path.join(run_dir, "actor.params"), actor.net.params)

    return RunResult(run_dir, csv_path, status, step, final_eval, best_eval)


# ---------------------------------------------------------------------------
# sweeps


def sweep(
    base: ExperimentConfig,
    axis: str,
    values: list,
    seeds: int,
    clock=None,
) -> str:
    """Grid over one config axis crossed with seeds; returns summary path.

    Each cell runs to completion independently and keeps its own
    metrics CSV; a cell that fails is recorded and the sweep moves on.
    Writes cells.csv (one row per run) and summary.csv (one row per
    axis value, aggregated over seeds).
    """
    import dataclasses

    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    if not values:
        raise ValueError("need at least one axis value")
    os.makedirs(base.out_dir, exist_ok=True)
    cells_path = os.path.join(base.out_dir, "cells.csv")
    summary_path = os.path.join(base.out_dir, "summary.csv")
    results: dict = {v: [] for v in values}
    with open(cells_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# {CSV_SCHEMA} sweep axis={axis}\n")
        f.write("axis,value,seed,status,steps,final_eval_mean,best_eval_mean,csv_path\n")
        for value in values:
            for seed in range(seeds):
                cfg = dataclasses.replace(base, seed=seed, **{axis: value})
                cfg = dataclasses.replace(cfg, run_name=f"{axis}{value}-seed{seed}")
                result = run(cfg, clock=clock)
                results[value].append(result)
                f.write(
                    f"{axis},{value},{seed},{result.status.split(':')[0]},"
                    f"{result.steps_completed},{_format_value(result.final_eval_mean)},"
                    f"{_format_value(result.best_eval_mean)},{result.csv_path}\n"
                )
                f.flush()
    with open(summary_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# {CSV_SCHEMA} sweep axis={axis} seeds={seeds}\n")
        f.write("axis,value,runs,failures,final_eval_mean,final_eval_std\n")
        for value in values:
            finals = np.array([r.final_eval_mean for r in results[value] if r.status == "ok"])
            failures = sum(1 for r in results[value] if r.status != "ok")
            mean = float(finals.mean()) if finals.size else float("nan")
            std = float(finals.std()) if finals.size else float("nan")
            f.write(
                f"{axis},{value},{len(results[value])},{failures},"
                f"{_format_value(mean)},{_format_value(std)}\n"
            )
    return summary_path


# ---------------------------------------------------------------------------
# exact-oracle policy evaluation on tabular MDPs


class OneHotTabularPolicy:
    """Adapter: a fixed tabular policy acting on one-hot encoded states."""

    def __init__(self, policy: TabularPolicy, rng_unused=None):
        self.probs = policy.probs

    def _decode(self, states: np.ndarray) -> np.ndarray:
        return np.argmax(states, axis=-1)

    def mode(self, states: np.ndarray) -> np.ndarray:
        idx = np.argmax(self.probs[self._decode(states)], axis=-1)
        return _one_hot(idx, self.probs.shape[1])

    def sample(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        rows = self.probs[self._decode(states)]
        cum = np.cumsum(rows, axis=-1)
        u = rng.random(rows.shape[0])
        idx = np.minimum(np.sum(u[:, None] > cum, axis=-1), self.probs.shape[1] - 1)
        return _one_hot(idx, self.probs.shape[1])


def _one_hot(idx: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((idx.shape[0], width))
    out[np.arange(idx.shape[0]), idx] = 1.0
    return out


@dataclass
class PolicyEvalReport:
    q_exact: np.ndarray  # (S, A)
    q_model: np.ndarray  # (S, A)
    w1: np.ndarray  # (S, A)
    oracle_std: np.ndarray  # (S, A)
    final_loss: float

    @property
    def q_range(self) -> float:
        return float(self.q_exact.max() - self.q_exact.min())

    @property
    def max_abs_q_error(self) -> float:
        return float(np.max(np.abs(self.q_model - self.q_exact)))

    @property
    def mean_w1(self) -> float:
        return float(self.w1.mean())

    @property
    def mean_oracle_std(self) -> float:
        return float(self.oracle_std.mean())


def eval_policy_evaluation(
    mdp: TabularMDP,
    policy: TabularPolicy,
    cfg: ExperimentConfig,
    seed: int | None = None,
) -> PolicyEvalReport:
    """Train a distributional critic to evaluate a fixed policy, then
    compare it with the exact oracle.

    Transitions are generated synthetically with uniform (s, a)
    coverage so every pair is trained on; bootstrap actions are drawn
    from the policy itself.  Supports the mixture and single-Gaussian
    variants (the ones with a samplable return head).
    """
    if cfg.critic_variant not in ("mog", "gauss1"):
        raise ValueError("policy evaluation harness needs a samplable critic (mog or gauss1)")
    s_count, a_count = mdp.num_states, mdp.num_actions
    streams = seed_streams(cfg.seed if seed is None else seed)

    loss_cfg = LossConfig(mdp.gamma, cfg.num_return_samples, cfg.num_action_samples, greedy_bootstrap=False)
    critic = make_critic(
        cfg.critic_variant,
        "joint",
        s_count,
        a_count,
        streams["critic_init"],
        torso=cfg.tabular_torso_widths(),
        activation=cfg.activation,
        num_components=cfg.num_components,
        initial_scale=cfg.initial_scale,
        loss_cfg=loss_cfg,
    )
    opts = [nn.adam_init(net.params) for net in critic.online]
    boot_policy = OneHotTabularPolicy(policy)

    cum_next = np.cumsum(mdp.transitions.reshape(s_count * a_count, s_count), axis=-1)
    cum_reward = np.cumsum(mdp.reward_probs.reshape(s_count * a_count, -1), axis=-1)
    flat_values = mdp.reward_values.reshape(s_count * a_count, -1)
    data_rng = streams["replay"]

    def synthetic_batch(b: int):
        s = data_rng.integers(0, s_count, size=b)
        a = data_rng.integers(0, a_count, size=b)
        sa = s * a_count + a
        u = data_rng.random((b, 2))
        r_idx = np.minimum(np.sum(u[:, :1] > cum_reward[sa], axis=-1), flat_values.shape[1] - 1)
        s_next = np.minimum(np.sum(u[:, 1:] > cum_next[sa], axis=-1), s_count - 1)
        return TransitionBatch(
            _one_hot(s, s_count),
            _one_hot(a, a_count),
            flat_values[sa, r_idx],
            _one_hot(s_next, s_count),
            np.ones(b),
        )

    loss = float("nan")
    loss_rng = streams["critic_loss"]
    for update in range(1, cfg.tabular_updates + 1):
        batch = synthetic_batch(cfg.tabular_batch)
        # Both variants train on the sampled-target loss here so the
        # component-count comparison changes nothing but the head.
        loss, grad = sample_based_loss(
            critic.online[0], critic.target[0], boot_policy, batch, critic.loss_cfg, loss_rng
        )
        grad, _ = nn.clip_by_global_norm(grad, cfg.grad_clip)
        new_params, opts[0] = nn.adam_step(critic.online[0].params, grad, opts[0], cfg.tabular_lr)
        critic.online[0] = critic.online[0].with_params(new_params)
        critic.sync_targets(update, cfg.target_period)

    q_exact = exact_q(mdp, policy)
    q_model = np.zeros_like(q_exact)
    w1 = np.zeros_like(q_exact)
    oracle_std = np.zeros_like(q_exact)
    n = cfg.tabular_eval_samples
    eval_rng = streams["eval"]
    for s in range(s_count):
        for a in range(a_count):
            s_in = _one_hot(np.array([s]), s_count)
            a_in = _one_hot(np.array([a]), a_count)
            q_model[s, a] = float(critic.q_values(s_in, a_in)[0])
            model_draws = critic.sample_returns(s_in, a_in, n, eval_rng)[0]
            oracle_draws = return_samples(mdp, policy, s, a, n, eval_rng)
            w1[s, a] = w1_distance(model_draws, oracle_draws)
            oracle_std[s, a] = float(oracle_draws.std())
    return PolicyEvalReport(q_exact, q_model, w1, oracle_std, loss)
