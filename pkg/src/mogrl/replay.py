"""Uniform-replay transition store on preallocated arrays."""
from __future__ import annotations

import numpy as np

from .critic import Transition, TransitionBatch


class ReplayBuffer:
    """Fixed-capacity circular buffer with uniform sampling.

    Sampling is with replacement and returns stacked float64 arrays
    ready for the losses.
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._states = np.zeros((capacity, state_dim))
        self._actions = np.zeros((capacity, action_dim))
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, state_dim))
        self._continues = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, transition: Transition) -> None:
        i = self._next
        self._states[i] = transition.state
        self._actions[i] = transition.action
        self._rewards[i] = transition.reward
        self._next_states[i] = transition.next_state
        self._continues[i] = 1.0 if transition.continues else 0.0
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        # A buffer that is still filling must hold at least batch_size
        # entries; once full it may be resampled with replacement freely.
        if self._size < min(batch_size, self.capacity):
            raise ValueError(
                f"insufficient data: buffer holds {self._size} transitions, "
                f"batch of {batch_size} requested"
            )
        idx = rng.integers(0, self._size, size=batch_size)
        return TransitionBatch(
            self._states[idx].copy(),
            self._actions[idx].copy(),
            self._rewards[idx].copy(),
            self._next_states[idx].copy(),
            self._continues[idx].copy(),
        )
