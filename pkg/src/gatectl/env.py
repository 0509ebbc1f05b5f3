"""Episodic gate-control environment.

The state is the cumulative propagator; observations flatten it into a
real vector laid out as [all real parts row-major, all imaginary parts
row-major].  Reward is sparse: zero until the final step, then minus the
logarithmic infidelity of the achieved gate, so higher fidelity means a
larger positive terminal reward.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .quantum import ControlTask, fidelity, log_infidelity


class StepResult(NamedTuple):
    observation: np.ndarray
    reward: float
    done: bool


def encode_unitary(u: np.ndarray) -> np.ndarray:
    """Flatten a complex matrix to [Re row-major..., Im row-major...]."""
    u = np.asarray(u, dtype=np.complex128)
    return np.concatenate([u.real.ravel(), u.imag.ravel()])


def decode_observation(values: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of ``encode_unitary`` for a dim x dim matrix."""
    values = np.asarray(values, dtype=np.float64)
    if values.size != 2 * dim * dim:
        raise ValueError(f"observation has {values.size} entries, expected {2 * dim * dim}")
    half = dim * dim
    return (values[:half] + 1j * values[half:]).reshape(dim, dim)


class GateEnv:
    """Deterministic N-step MDP around an immutable ControlTask.

    One instance is single-threaded; run one env per worker when
    evaluating populations concurrently.
    """

    def __init__(self, task: ControlTask):
        self.task = task
        self.observation_size = 2 * task.dim * task.dim
        self.n_actions = task.n_actions
        self.reset()

    def reset(self) -> np.ndarray:
        """Start a new episode at U = I, t = 0."""
        self._u = np.eye(self.task.dim, dtype=np.complex128)
        self._t = 0
        return encode_unitary(self._u)

    def encode(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        if u.shape != (self.task.dim, self.task.dim):
            raise ValueError(f"matrix shape {u.shape} does not match task dimension {self.task.dim}")
        return encode_unitary(u)

    @property
    def t(self) -> int:
        return self._t

    @property
    def done(self) -> bool:
        return self._t >= self.task.steps

    @property
    def unitary(self) -> np.ndarray:
        """Copy of the current cumulative propagator, for audits."""
        return self._u.copy()

    def step(self, action_index: int) -> StepResult:
        if self.done:
            raise RuntimeError("episode is finished; call reset() before stepping again")
        if not 0 <= action_index < self.n_actions:
            raise IndexError(
                f"action index {action_index} out of range [0, {self.n_actions})"
            )
        self._u = self.task.step_unitaries[action_index] @ self._u
        self._t += 1
        done = self._t == self.task.steps
        if done:
            reward = -log_infidelity(fidelity(self._u, self.task.target))
        else:
            reward = 0.0
        return StepResult(encode_unitary(self._u), reward, done)
