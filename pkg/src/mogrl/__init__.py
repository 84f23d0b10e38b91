"""Distributional actor-critic on numpy: mixture-of-Gaussians critics,
baseline critics, desk-scale control tasks, and exact tabular oracles."""

from .config import ExperimentConfig, apply_overrides, load_config, protocol_fields
from .critic import (
    Critic,
    LossConfig,
    NonFiniteLossError,
    Transition,
    TransitionBatch,
    analytic_gaussian_loss,
    c51_loss,
    hypothesis_loss,
    make_critic,
    sample_based_loss,
    sbe_loss,
)
from .distributions import (
    SCALE_FLOOR,
    CategoricalReturn,
    GaussianStats,
    MixtureOfGaussians,
    analytic_gaussian_ce,
    c51_project,
    c51_support,
    gaussian_affine,
    mog_log_prob,
    mog_mean,
    mog_sample,
    mog_stddev,
    mog_variance,
)
from .envs import CartPoleSwingUpEnv, EnvSpec, PendulumEnv, make_env, max_return
from .oracle import (
    TabularMDP,
    TabularPolicy,
    chain5,
    exact_q,
    exact_v,
    load_mdp,
    return_samples,
    save_mdp,
    uniform_policy,
    w1_distance,
)
from .policy import (
    DeterministicPolicy,
    GaussianPolicy,
    dpg_update,
    explore,
    make_deterministic_policy,
    make_gaussian_policy,
    mpo_lite_update,
    mpo_lite_weights,
    policy_mode,
)
from .replay import ReplayBuffer
from .runner import (
    PolicyEvalReport,
    RunResult,
    eval_policy_evaluation,
    evaluate_policy,
    read_metrics,
    run,
    seed_streams,
    sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
