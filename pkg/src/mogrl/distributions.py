"""Scalar return distributions.

Three families cover everything the critics need: mixtures of Gaussians
(the main parameterisation), single-Gaussian summaries with an affine
Bellman map and a closed-form cross-entropy, and categorical
distributions on a fixed evenly spaced value grid with the
mass-preserving projection used by categorical critics.

All arithmetic is float64.  Functions accept either single
distributions (1-d parameter arrays) or batches (leading axes), and
broadcast in the usual numpy way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Minimum component standard deviation, in return units.  Scale heads
# add this floor after the softplus, so densities never degenerate.
SCALE_FLOOR = 1e-6

_LOG_2PI = math.log(2.0 * math.pi)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shift-invariant softmax."""
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - np.max(logits, axis=axis, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))


def logsumexp(a: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    out = m.squeeze(axis) + np.log(np.sum(np.exp(a - m), axis=axis))
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(x, 0.0)


def softplus_inverse(y):
    """Solve softplus(x) = y for y > 0.  Stable for small y."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0.0):
        raise ValueError("softplus_inverse requires positive input")
    # log(e^y - 1) = y + log(1 - e^-y)
    return y + np.log(-np.expm1(-y))


def _as_f64(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite values in distribution parameters")
    return a


@dataclass(frozen=True)
class MixtureOfGaussians:
    """Mixture of K Gaussians over scalar returns.

    Parameters may carry leading batch axes; the component axis is
    always last.  Weights are softmax(logits), so any real logits are
    valid.  Scales must respect SCALE_FLOOR.
    """

    logits: np.ndarray
    locations: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "logits", _as_f64(self.logits))
        object.__setattr__(self, "locations", _as_f64(self.locations))
        object.__setattr__(self, "scales", _as_f64(self.scales))
        if not (self.logits.shape == self.locations.shape == self.scales.shape):
            raise ValueError("logits, locations, scales must share a shape")
        if self.logits.ndim < 1 or self.logits.shape[-1] < 1:
            raise ValueError("a mixture needs at least one component")
        if np.any(self.scales < SCALE_FLOOR):
            raise ValueError(f"scales must be >= {SCALE_FLOOR}")

    @property
    def num_components(self) -> int:
        return self.logits.shape[-1]

    @property
    def weights(self) -> np.ndarray:
        return softmax(self.logits)


def mog_log_prob(d: MixtureOfGaussians, z) -> np.ndarray:
    """Log density of the mixture at z.

    z broadcasts against the batch shape of d; a trailing sample axis
    on z is fine.  Returns an array shaped like the broadcast of z with
    the component axis reduced away.
    """
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite evaluation point for log_prob")
    lw = log_softmax(d.logits)
    zz = z[..., None]
    lp = (
        -0.5 * ((zz - d.locations) / d.scales) ** 2
        - np.log(d.scales)
        - 0.5 * _LOG_2PI
    )
    return logsumexp(lw + lp, axis=-1)


def mog_sample(d: MixtureOfGaussians, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n ancestral samples: pick components, then Gaussian noise.

    Returns shape batch_shape + (n,).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    w = d.weights
    cum = np.cumsum(w, axis=-1)
    u = rng.random(w.shape[:-1] + (n,))
    # Component index = number of cumulative weights strictly below u.
    idx = np.sum(u[..., None] > cum[..., None, :], axis=-1)
    idx = np.minimum(idx, d.num_components - 1)
    loc = np.take_along_axis(d.locations, idx, axis=-1)
    scale = np.take_along_axis(d.scales, idx, axis=-1)
    eps = rng.standard_normal(idx.shape)
    return loc + scale * eps


def mog_mean(d: MixtureOfGaussians) -> np.ndarray:
    return np.sum(d.weights * d.locations, axis=-1)


def mog_variance(d: MixtureOfGaussians) -> np.ndarray:
    m = mog_mean(d)
    second = np.sum(d.weights * (d.scales**2 + d.locations**2), axis=-1)
    return second - m**2


def mog_stddev(d: MixtureOfGaussians) -> np.ndarray:
    return np.sqrt(np.maximum(mog_variance(d), 0.0))


@dataclass(frozen=True)
class GaussianStats:
    """Mean and variance of a single Gaussian (arrays broadcast)."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _as_f64(self.mean))
        object.__setattr__(self, "variance", _as_f64(self.variance))
        if np.any(self.variance < 0.0):
            raise ValueError("variance must be non-negative")


def gaussian_affine(stats: GaussianStats, r, gamma) -> GaussianStats:
    """Push a Gaussian through z -> r + gamma * z."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if np.any(gamma < 0.0) or np.any(gamma > 1.0):
        raise ValueError("gamma must lie in [0, 1]")
    r = _as_f64(r)
    return GaussianStats(r + gamma * stats.mean, gamma**2 * stats.variance)


def analytic_gaussian_ce(target: GaussianStats, model: GaussianStats) -> np.ndarray:
    """Cross-entropy H(target, model) between scalar Gaussians.

    H = 1/2 log(2 pi sigma^2) + (tvar + (tmean - mean)^2) / (2 sigma^2),
    with sigma^2 the model variance.  Equivalently, up to constants and
    a factor of two, (tmean - mean)^2 / sigma^2 + tvar / sigma^2
    + log sigma^2.  The model variance must respect the scale floor.
    """
    v = model.variance
    if np.any(v < SCALE_FLOOR**2):
        raise ValueError("model variance below the representable floor")
    return 0.5 * (np.log(2.0 * np.pi * v) + (target.variance + (target.mean - model.mean) ** 2) / v)


@dataclass(frozen=True)
class CategoricalReturn:
    """Probability masses on an evenly spaced value grid [vmin, vmax]."""

    vmin: float
    vmax: float
    probabilities: np.ndarray

    def __post_init__(self):
        p = _as_f64(self.probabilities)
        object.__setattr__(self, "probabilities", p)
        if not self.vmin < self.vmax:
            raise ValueError("vmin must be strictly below vmax")
        if p.ndim < 1 or p.shape[-1] < 2:
            raise ValueError("need at least two atoms")
        if np.any(p < 0.0):
            raise ValueError("probabilities must be non-negative")
        total = p.sum(axis=-1)
        if np.any(np.abs(total - 1.0) > 1e-9):
            raise ValueError("probabilities must sum to one")

    @property
    def num_atoms(self) -> int:
        return self.probabilities.shape[-1]

    @property
    def atoms(self) -> np.ndarray:
        return c51_support(self.vmin, self.vmax, self.num_atoms)


def c51_support(vmin: float, vmax: float, num_atoms: int) -> np.ndarray:
    if num_atoms < 2:
        raise ValueError("need at least two atoms")
    return np.linspace(float(vmin), float(vmax), num_atoms)


def categorical_mean(d: CategoricalReturn) -> np.ndarray:
    return np.sum(d.probabilities * d.atoms, axis=-1)


def c51_project(support: np.ndarray, target_atoms: np.ndarray, target_probs: np.ndarray) -> np.ndarray:
    """Project masses at arbitrary atom positions onto a fixed grid.

    Each target atom is clamped to [support[0], support[-1]] and its
    mass split linearly between the two nearest grid points.  Total
    mass is preserved exactly; the mean is preserved whenever the
    clamp is inactive.

    support: (A,) evenly spaced grid.
    target_atoms, target_probs: (..., T) matching shapes.
    Returns (..., A).
    """
    support = np.asarray(support, dtype=np.float64)
    atoms = np.asarray(target_atoms, dtype=np.float64)
    probs = np.asarray(target_probs, dtype=np.float64)
    if atoms.shape != probs.shape:
        raise ValueError("target atoms and probabilities must share a shape")
    total = probs.sum(axis=-1)
    if np.any(np.abs(total - 1.0) > 1e-9):
        raise ValueError("target probabilities must sum to one")
    a = support.shape[0]
    delta = (support[-1] - support[0]) / (a - 1)
    pos = np.clip((atoms - support[0]) / delta, 0.0, a - 1.0)
    lower = np.floor(pos).astype(np.int64)
    upper = np.minimum(lower + 1, a - 1)
    w_upper = pos - lower
    w_lower = 1.0 - w_upper

    batch_shape = atoms.shape[:-1]
    out = np.zeros(batch_shape + (a,), dtype=np.float64)
    flat_out = out.reshape(-1, a)
    flat_lower = lower.reshape(-1, lower.shape[-1])
    flat_upper = upper.reshape(-1, upper.shape[-1])
    flat_wl = (w_lower * probs).reshape(-1, probs.shape[-1])
    flat_wu = (w_upper * probs).reshape(-1, probs.shape[-1])
    rows = np.arange(flat_out.shape[0])[:, None]
    np.add.at(flat_out, (rows, flat_lower), flat_wl)
    np.add.at(flat_out, (rows, flat_upper), flat_wu)
    return out.reshape(batch_shape + (a,))
