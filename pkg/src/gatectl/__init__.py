"""Bang-bang quantum gate synthesis workbench.

Finds piecewise-constant control sequences implementing target
unitaries, either with a dueling double deep Q-network trained from
scratch or with comparison optimizers (GRAPE, differential evolution,
genetic algorithm, exhaustive search), and renders sweep reports.
"""
from .agent import TrainConfig, TrainingDiverged, TrainReport, train
from .baselines import (
    brute_force,
    de_optimize,
    fidelity_gradient,
    ga_optimize,
    grape_best_of,
    grape_optimize,
    propagate_pulse,
    pulse_fidelity,
)
from .env import GateEnv, StepResult, decode_observation, encode_unitary
from .harness import ExperimentSpec, ablation, run, verify_protocol
from .net import DuelingNet
from .quantum import (
    ControlTask,
    DEFAULT_STEPS,
    bang_bang_action_set,
    cnot_task,
    fidelity,
    hadamard_task,
    hermitian_expm,
    log_infidelity,
    make_task,
    propagate,
)
from .replay import Experience, PrioritizedReplay

__version__ = "0.1.0"

__all__ = [
    "ControlTask", "DEFAULT_STEPS", "DuelingNet", "Experience",
    "ExperimentSpec", "GateEnv", "PrioritizedReplay", "StepResult",
    "TrainConfig", "TrainReport", "TrainingDiverged", "ablation",
    "bang_bang_action_set", "brute_force", "cnot_task", "de_optimize",
    "decode_observation", "encode_unitary", "fidelity",
    "fidelity_gradient", "ga_optimize", "grape_best_of", "grape_optimize",
    "hadamard_task", "hermitian_expm", "log_infidelity", "make_task",
    "propagate", "propagate_pulse", "pulse_fidelity", "run", "train",
    "verify_protocol",
]
