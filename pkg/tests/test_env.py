import numpy as np
import pytest

from fixtures import (
    ALL_ZEROS_N28_F,
    HADAMARD_N12_BEST_L,
    HADAMARD_N12_BEST_PROTOCOL,
)
from gatectl.env import GateEnv, decode_observation, encode_unitary
from gatectl.quantum import cnot_task, fidelity, hadamard_task, log_infidelity


class TestEncoding:
    def test_identity(self):
        assert np.array_equal(encode_unitary(np.eye(2)),
                              [1, 0, 0, 1, 0, 0, 0, 0])

    def test_pure_imaginary(self):
        assert np.array_equal(encode_unitary(1j * np.eye(2)),
                              [0, 0, 0, 0, 1, 0, 0, 1])

    def test_hadamard_entries(self):
        s = 1.0 / np.sqrt(2.0)
        h = np.array([[1, 1], [1, -1]]) / np.sqrt(2.0)
        assert np.array_equal(encode_unitary(h), [s, s, s, -s, 0, 0, 0, 0])

    def test_decode_round_trip(self):
        rng = np.random.default_rng(0)
        u = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        assert np.array_equal(decode_observation(encode_unitary(u), 4), u)

    def test_decode_rejects_bad_length(self):
        with pytest.raises(ValueError, match="expected 8"):
            decode_observation(np.zeros(7), 2)

    def test_env_encode_rejects_wrong_dimension(self):
        env = GateEnv(hadamard_task(1.0, 4))
        with pytest.raises(ValueError, match="dimension"):
            env.encode(np.eye(4))


class TestReset:
    def test_hadamard_reset_observation(self):
        env = GateEnv(hadamard_task(1.0, 28))
        assert np.array_equal(env.reset(), [1, 0, 0, 1, 0, 0, 0, 0])

    def test_cnot_reset_observation(self):
        env = GateEnv(cnot_task(1.0, 38))
        obs = env.reset()
        expected = np.zeros(32)
        expected[[0, 5, 10, 15]] = 1.0
        assert np.array_equal(obs, expected)

    def test_reset_is_idempotent(self):
        env = GateEnv(hadamard_task(1.0, 6))
        first = env.reset()
        env.step(0)
        assert np.array_equal(env.reset(), first)
        assert env.t == 0 and not env.done


class TestStep:
    def test_zero_reward_until_terminal(self):
        task = hadamard_task(1.0, 5)
        env = GateEnv(task)
        env.reset()
        for t in range(4):
            result = env.step(0)
            assert result.reward == 0.0
            assert not result.done
        result = env.step(0)
        assert result.done
        f = fidelity(env.unitary, task.target)
        assert result.reward == -log_infidelity(f)

    def test_terminal_reward_matches_offline_oracle(self):
        env = GateEnv(hadamard_task(1.0, 12))
        env.reset()
        for a in HADAMARD_N12_BEST_PROTOCOL:
            result = env.step(a)
        assert result.done
        assert abs(result.reward - (-HADAMARD_N12_BEST_L)) < 1e-10

    def test_all_plus_protocol_fidelity_fixture(self):
        task = hadamard_task(1.0, 28)
        env = GateEnv(task)
        env.reset()
        for _ in range(28):
            env.step(0)
        assert abs(fidelity(env.unitary, task.target) - ALL_ZEROS_N28_F) < 1e-12

    def test_stepping_finished_episode_rejected(self):
        env = GateEnv(hadamard_task(1.0, 2))
        env.reset()
        env.step(0)
        env.step(1)
        with pytest.raises(RuntimeError, match="finished"):
            env.step(0)

    def test_invalid_action_rejected(self):
        env = GateEnv(hadamard_task(1.0, 2))
        env.reset()
        with pytest.raises(IndexError):
            env.step(2)
        with pytest.raises(IndexError):
            env.step(-1)

    def test_episode_length_is_exactly_n(self):
        task = cnot_task(0.8, 7)
        env = GateEnv(task)
        env.reset()
        rng = np.random.default_rng(1)
        for t in range(7):
            assert not env.done
            env.step(int(rng.integers(16)))
        assert env.done and env.t == 7


class TestInvariants:
    def test_determinism_bit_identical(self):
        task = hadamard_task(1.0, 10)
        actions = np.random.default_rng(2).integers(2, size=10)
        runs = []
        for _ in range(2):
            env = GateEnv(task)
            env.reset()
            trace = [env.step(int(a)) for a in actions]
            runs.append(trace)
        for r1, r2 in zip(*runs):
            assert np.array_equal(r1.observation, r2.observation)
            assert r1.reward == r2.reward

    def test_reward_sparsity(self):
        task = cnot_task(1.0, 6)
        env = GateEnv(task)
        env.reset()
        rewards = [env.step(int(a)).reward
                   for a in np.random.default_rng(3).integers(16, size=6)]
        assert sum(rewards[:-1]) == 0.0
        assert sum(rewards) == rewards[-1]

    def test_final_observation_consistent_with_reward(self):
        task = hadamard_task(1.0, 9)
        env = GateEnv(task)
        env.reset()
        for a in np.random.default_rng(4).integers(2, size=9):
            result = env.step(int(a))
        u = decode_observation(result.observation, task.dim)
        assert abs(result.reward - (-log_infidelity(fidelity(u, task.target)))) < 1e-12

    def test_unitary_property_returns_copy(self):
        env = GateEnv(hadamard_task(1.0, 3))
        env.reset()
        u = env.unitary
        u[0, 0] = 99.0
        assert env.unitary[0, 0] == 1.0
