"""Desk-scale continuous-control tasks: pendulum and cart-pole swing-up.

Angles are measured from the upright position (0 is up, pi is hanging).
Dynamics integrate with semi-implicit Euler at a fixed control
timestep, internally subdivided so the integrator stays accurate at
the 20 ms control rate.  Rewards live in [0, 1] per step, episodes end
only on the time limit, and velocities are clipped to keep states
bounded.

Environments are deterministic given their state; randomness enters
only through the generator passed to `reset`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    name: str
    observation_dim: int
    action_dim: int
    action_bound: float
    episode_length: int
    dt: float
    max_step_reward: float = 1.0


def max_return(spec: EnvSpec) -> float:
    """Upper bound on an episode's undiscounted return."""
    return spec.episode_length * spec.max_step_reward


def _wrap_angle(theta: float) -> float:
    """Map to (-pi, pi]."""
    wrapped = (theta + np.pi) % (2.0 * np.pi) - np.pi
    return np.pi if wrapped == -np.pi else wrapped


class PendulumEnv:
    """Torque-limited pendulum swing-up.

    The pole is a uniform rod pivoted at one end (moment of inertia
    m l^2 / 3, centre of mass at l / 2).  Observation
    (sin theta, cos theta, omega); action is one torque in [-2, 2] N m.
    The torque limit is well below the peak gravity torque, so the pole
    must be swung back and forth to reach the top.  Reward is
    (1 + cos theta) / 2: zero hanging, one upright.
    """

    def __init__(
        self,
        mass: float = 1.0,
        length: float = 1.0,
        gravity: float = 9.81,
        damping: float = 0.05,
        torque_bound: float = 2.0,
        dt: float = 0.02,
        substeps: int = 4,
        episode_length: int = 1000,
        max_speed: float = 8.0,
        reset_angle_noise: float = 0.1,
        reset_speed_noise: float = 0.05,
    ):
        if substeps < 1:
            raise ValueError("substeps must be >= 1")
        self.mass = mass
        self.length = length
        self.gravity = gravity
        self.damping = damping
        self.dt = dt
        self.substeps = substeps
        self.max_speed = max_speed
        self.reset_angle_noise = reset_angle_noise
        self.reset_speed_noise = reset_speed_noise
        self.spec = EnvSpec("pendulum", 3, 1, torque_bound, episode_length, dt)
        self._theta = np.pi
        self._omega = 0.0
        self._t = 0

    @property
    def state(self) -> np.ndarray:
        return np.array([self._theta, self._omega])

    def set_state(self, theta: float, omega: float, t: int = 0) -> np.ndarray:
        self._theta = _wrap_angle(float(theta))
        self._omega = float(np.clip(omega, -self.max_speed, self.max_speed))
        self._t = t
        return self._observe()

    def _observe(self) -> np.ndarray:
        return np.array([np.sin(self._theta), np.cos(self._theta), self._omega])

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        theta = np.pi + self.reset_angle_noise * rng.uniform(-1.0, 1.0)
        omega = self.reset_speed_noise * rng.uniform(-1.0, 1.0)
        return self.set_state(theta, omega, 0)

    def step(self, action) -> tuple[np.ndarray, float, bool]:
        raw = float(np.asarray(action).reshape(-1)[0])
        if not np.isfinite(raw):
            raise ValueError("action must be finite")
        torque = float(np.clip(raw, -self.spec.action_bound, self.spec.action_bound))
        h = self.dt / self.substeps
        inertia = self.mass * self.length**2 / 3.0
        lever = self.length / 2.0
        for _ in range(self.substeps):
            accel = (self.mass * self.gravity * lever * np.sin(self._theta)
                     + torque - self.damping * self._omega) / inertia
            self._omega = float(np.clip(self._omega + h * accel, -self.max_speed, self.max_speed))
            self._theta = _wrap_angle(self._theta + h * self._omega)
        self._t += 1
        reward = 0.5 * (1.0 + np.cos(self._theta))
        continues = self._t < self.spec.episode_length
        return self._observe(), float(reward), continues


class CartPoleSwingUpEnv:
    """Cart-pole swing-up on a bounded rail.

    Observation (x, xdot, sin theta, cos theta, omega); action is one
    horizontal force in [-10, 10] N.  The pole starts hanging; reward
    is (1 + cos theta) / 2 scaled by a centred-cart bonus
    exp(-(x / 2)^2), so holding the pole up in the middle of the rail
    scores one per step.  Hitting a rail end stops the cart.
    """

    def __init__(
        self,
        cart_mass: float = 1.0,
        pole_mass: float = 0.1,
        pole_length: float = 0.5,
        gravity: float = 9.81,
        cart_damping: float = 0.1,
        pole_damping: float = 0.01,
        force_bound: float = 10.0,
        rail_limit: float = 3.0,
        dt: float = 0.02,
        substeps: int = 4,
        episode_length: int = 1000,
        max_cart_speed: float = 10.0,
        max_pole_speed: float = 15.0,
    ):
        if substeps < 1:
            raise ValueError("substeps must be >= 1")
        self.cart_mass = cart_mass
        self.pole_mass = pole_mass
        self.pole_length = pole_length  # pivot to pole centre of mass
        self.gravity = gravity
        self.cart_damping = cart_damping
        self.pole_damping = pole_damping
        self.rail_limit = rail_limit
        self.dt = dt
        self.substeps = substeps
        self.max_cart_speed = max_cart_speed
        self.max_pole_speed = max_pole_speed
        self.spec = EnvSpec("cartpole", 5, 1, force_bound, episode_length, dt)
        self._x = 0.0
        self._xdot = 0.0
        self._theta = np.pi
        self._omega = 0.0
        self._t = 0

    @property
    def state(self) -> np.ndarray:
        return np.array([self._x, self._xdot, self._theta, self._omega])

    def set_state(self, x: float, xdot: float, theta: float, omega: float, t: int = 0) -> np.ndarray:
        self._x = float(np.clip(x, -self.rail_limit, self.rail_limit))
        self._xdot = float(np.clip(xdot, -self.max_cart_speed, self.max_cart_speed))
        self._theta = _wrap_angle(float(theta))
        self._omega = float(np.clip(omega, -self.max_pole_speed, self.max_pole_speed))
        self._t = t
        return self._observe()

    def _observe(self) -> np.ndarray:
        return np.array([self._x, self._xdot, np.sin(self._theta), np.cos(self._theta), self._omega])

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        x = 0.05 * rng.uniform(-1.0, 1.0)
        theta = np.pi + 0.1 * rng.uniform(-1.0, 1.0)
        omega = 0.05 * rng.uniform(-1.0, 1.0)
        return self.set_state(x, 0.0, theta, omega, 0)

    def step(self, action) -> tuple[np.ndarray, float, bool]:
        raw = float(np.asarray(action).reshape(-1)[0])
        if not np.isfinite(raw):
            raise ValueError("action must be finite")
        force = float(np.clip(raw, -self.spec.action_bound, self.spec.action_bound))
        h = self.dt / self.substeps
        m_total = self.cart_mass + self.pole_mass
        ml = self.pole_mass * self.pole_length
        for _ in range(self.substeps):
            sin_t, cos_t = np.sin(self._theta), np.cos(self._theta)
            f_eff = force - self.cart_damping * self._xdot
            temp = (f_eff + ml * self._omega**2 * sin_t) / m_total
            denom = self.pole_length * (4.0 / 3.0 - self.pole_mass * cos_t**2 / m_total)
            theta_acc = (self.gravity * sin_t - cos_t * temp) / denom
            theta_acc -= self.pole_damping * self._omega / (ml * self.pole_length)
            x_acc = temp - ml * theta_acc * cos_t / m_total

            self._xdot = float(np.clip(self._xdot + h * x_acc, -self.max_cart_speed, self.max_cart_speed))
            self._omega = float(np.clip(self._omega + h * theta_acc, -self.max_pole_speed, self.max_pole_speed))
            self._x += h * self._xdot
            if abs(self._x) > self.rail_limit:
                self._x = float(np.clip(self._x, -self.rail_limit, self.rail_limit))
                self._xdot = 0.0
            self._theta = _wrap_angle(self._theta + h * self._omega)
        self._t += 1
        upright = 0.5 * (1.0 + np.cos(self._theta))
        centred = np.exp(-((self._x / 2.0) ** 2))
        continues = self._t < self.spec.episode_length
        return self._observe(), float(upright * centred), continues


def make_env(name: str, episode_length: int | None = None):
    kwargs = {} if episode_length is None else {"episode_length": episode_length}
    if name == "pendulum":
        return PendulumEnv(**kwargs)
    if name == "cartpole":
        return CartPoleSwingUpEnv(**kwargs)
    raise ValueError(f"unknown environment {name!r}")
