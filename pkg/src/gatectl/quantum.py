"""Dense complex linear algebra for bang-bang gate synthesis.

Conventions:
  * Operators are complex128 ndarrays; 1-qubit operators are 2x2,
    2-qubit operators 4x4 with qubit 1 as the left Kronecker factor.
  * hbar = 1 throughout, so generators are dimensionless energies and
    H * t is an angle.
  * A protocol is a sequence of integer indices into a task's action
    set; propagators compose left to right, U = U_N ... U_2 U_1.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
INFIDELITY_FLOOR = 1e-16
_FIDELITY_BAND = 1e-9


def _const(rows) -> np.ndarray:
    m = np.array(rows, dtype=np.complex128)
    m.setflags(write=False)
    return m


I2 = _const([[1, 0], [0, 1]])
SIGMA_X = _const([[0, 1], [1, 0]])
SIGMA_Y = _const([[0, -1j], [1j, 0]])
SIGMA_Z = _const([[1, 0], [0, -1]])

HADAMARD = _const(np.array([[1, 1], [1, -1]]) / np.sqrt(2.0))
CNOT = _const([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])


def hermiticity_defect(m: np.ndarray) -> float:
    """Frobenius norm of M - M^dagger."""
    return float(np.linalg.norm(m - m.conj().T))


def unitarity_defect(m: np.ndarray) -> float:
    """Frobenius norm of M^dagger M - I."""
    return float(np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0])))


def require_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL, name: str = "matrix") -> None:
    defect = hermiticity_defect(m)
    if not defect < tol:
        raise ValueError(
            f"{name} is not Hermitian: ||M - M^dag||_F = {defect:.3e} exceeds {tol:.1e}"
        )


def require_unitary(m: np.ndarray, tol: float = UNITARY_TOL, name: str = "matrix") -> None:
    defect = unitarity_defect(m)
    if not defect < tol:
        raise ValueError(
            f"{name} is not unitary: ||M^dag M - I||_F = {defect:.3e} exceeds {tol:.1e}"
        )


def hermitian_expm(h: np.ndarray, dt: float) -> np.ndarray:
    """Unitary propagator exp(-i * h * dt) of a Hermitian generator.

    Uses the eigendecomposition of h, which is exact to rounding for the
    small dense matrices used here (no series truncation).
    """
    h = np.asarray(h, dtype=np.complex128)
    require_hermitian(h, name="generator")
    if dt == 0.0:
        return np.eye(h.shape[0], dtype=np.complex128)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * dt * w)) @ v.conj().T


def bang_bang_action_set(n_controls: int, amplitude: float = 4.0) -> np.ndarray:
    """All sign patterns (+/- amplitude)^n_controls, lexicographic with + first.

    The resulting row order fixes the action index <-> amplitude-vector
    mapping used everywhere (serialization, decoding, reports).
    """
    rows = list(itertools.product((+amplitude, -amplitude), repeat=n_controls))
    return np.array(rows, dtype=np.float64)


def action_index_from_signs(negative: np.ndarray) -> int:
    """Index into ``bang_bang_action_set`` from a per-control negativity mask."""
    idx = 0
    for bit in np.asarray(negative, dtype=bool):
        idx = (idx << 1) | int(bit)
    return idx


@dataclass(frozen=True, eq=False)
class ControlTask:
    """Immutable problem statement for one gate synthesis task.

    ``dt`` is always derived as total_time / steps.  The d per-step
    propagators are precomputed at construction (the step operators do
    not depend on time), so environment steps and protocol evaluation
    reduce to matrix multiplies.  Instances and their arrays are
    read-only and safe to share across workers.
    """

    drift: np.ndarray
    controls: tuple[np.ndarray, ...]
    action_set: np.ndarray
    target: np.ndarray
    total_time: float
    steps: int
    name: str = "custom"
    step_unitaries: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.total_time > 0:
            raise ValueError(f"total_time must be positive, got {self.total_time}")
        if not (isinstance(self.steps, (int, np.integer)) and self.steps >= 1):
            raise ValueError(f"steps must be a positive integer, got {self.steps}")

        drift = np.array(self.drift, dtype=np.complex128)
        require_hermitian(drift, name="drift")
        controls = tuple(np.array(c, dtype=np.complex128) for c in self.controls)
        for k, c in enumerate(controls):
            require_hermitian(c, name=f"control[{k}]")
            if c.shape != drift.shape:
                raise ValueError(f"control[{k}] shape {c.shape} != drift shape {drift.shape}")
        target = np.array(self.target, dtype=np.complex128)
        require_unitary(target, name="target")
        if target.shape != drift.shape:
            raise ValueError(f"target shape {target.shape} != drift shape {drift.shape}")

        action_set = np.atleast_2d(np.array(self.action_set, dtype=np.float64))
        if action_set.shape[1] != len(controls):
            raise ValueError(
                f"action vectors have {action_set.shape[1]} entries for {len(controls)} controls"
            )
        if len({tuple(row) for row in action_set}) != len(action_set):
            raise ValueError("action_set entries must be distinct")

        for arr in (drift, target, action_set, *controls):
            arr.setflags(write=False)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "action_set", action_set)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "total_time", float(self.total_time))

        steps = np.stack(
            [hermitian_expm(self.hamiltonian(eps), self.dt) for eps in action_set]
        )
        steps.setflags(write=False)
        object.__setattr__(self, "step_unitaries", steps)

    def hamiltonian(self, eps) -> np.ndarray:
        """drift + sum_k eps_k * control_k for an arbitrary amplitude vector."""
        eps = np.asarray(eps, dtype=np.float64).ravel()
        if eps.size != len(self.controls):
            raise ValueError(f"expected {len(self.controls)} amplitudes, got {eps.size}")
        h = self.drift.copy()
        for amp, ctrl in zip(eps, self.controls):
            h = h + amp * ctrl
        return h

    @property
    def dt(self) -> float:
        return self.total_time / self.steps

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    @property
    def n_actions(self) -> int:
        return self.action_set.shape[0]

    @property
    def n_controls(self) -> int:
        return len(self.controls)


def build_hamiltonian(task: ControlTask, action_index: int) -> np.ndarray:
    """drift + sum_k eps_k * control_k for one entry of the action set."""
    if not 0 <= action_index < task.n_actions:
        raise IndexError(
            f"action index {action_index} out of range [0, {task.n_actions})"
        )
    return task.hamiltonian(task.action_set[action_index])


def step_unitary(task: ControlTask, action_index: int) -> np.ndarray:
    """Precomputed single-step propagator for one action."""
    if not 0 <= action_index < task.n_actions:
        raise IndexError(
            f"action index {action_index} out of range [0, {task.n_actions})"
        )
    return task.step_unitaries[action_index]


def propagate(task: ControlTask, protocol) -> np.ndarray:
    """Cumulative propagator U_L ... U_2 U_1 of a protocol; empty -> identity."""
    protocol = np.asarray(protocol, dtype=np.int64).ravel()
    if len(protocol) > task.steps:
        raise ValueError(f"protocol length {len(protocol)} exceeds horizon N={task.steps}")
    u = np.eye(task.dim, dtype=np.complex128)
    for pos, a in enumerate(protocol):
        if not 0 <= a < task.n_actions:
            raise IndexError(
                f"invalid action index {a} at protocol position {pos} "
                f"(valid range [0, {task.n_actions}))"
            )
        u = task.step_unitaries[a] @ u
    return u


def fidelity(u: np.ndarray, target: np.ndarray) -> float:
    """Phase-invariant gate fidelity |Tr(target^dag u) / D|^2."""
    u = np.asarray(u)
    target = np.asarray(target)
    if u.shape != target.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {target.shape}")
    d = u.shape[0]
    tr = np.trace(target.conj().T @ u)
    return float(abs(tr / d) ** 2)


def log_infidelity(f: float) -> float:
    """log10 of the infidelity, floored at 1e-16 so F = 1 stays finite."""
    if not (-_FIDELITY_BAND <= f <= 1.0 + _FIDELITY_BAND):
        raise ValueError(f"fidelity {f} outside the numerical band [0, 1]")
    f = min(max(f, 0.0), 1.0)
    return float(np.log10(max(1.0 - f, INFIDELITY_FLOOR)))


def hadamard_task(total_time: float, steps: int) -> ControlTask:
    """Single-qubit Hadamard synthesis: H(eps) = sigma_z + eps * sigma_x, eps in {+4, -4}."""
    return ControlTask(
        drift=SIGMA_Z,
        controls=(SIGMA_X,),
        action_set=bang_bang_action_set(1),
        target=HADAMARD,
        total_time=total_time,
        steps=steps,
        name="hadamard",
    )


def cnot_task(total_time: float, steps: int) -> ControlTask:
    """Two-qubit CNOT synthesis: drift sigma_z x sigma_z, local X/Y drives on both qubits."""
    controls = (
        np.kron(SIGMA_X, I2),
        np.kron(I2, SIGMA_X),
        np.kron(SIGMA_Y, I2),
        np.kron(I2, SIGMA_Y),
    )
    return ControlTask(
        drift=np.kron(SIGMA_Z, SIGMA_Z),
        controls=controls,
        action_set=bang_bang_action_set(4),
        target=CNOT,
        total_time=total_time,
        steps=steps,
        name="cnot",
    )


TASK_BUILDERS = {"hadamard": hadamard_task, "cnot": cnot_task}
DEFAULT_STEPS = {"hadamard": 28, "cnot": 38}


def make_task(gate: str, total_time: float, steps: int | None = None) -> ControlTask:
    """Task builder dispatch by gate name; steps defaults to 28 / 38."""
    if gate not in TASK_BUILDERS:
        raise ValueError(f"unknown gate {gate!r}; expected one of {sorted(TASK_BUILDERS)}")
    if steps is None:
        steps = DEFAULT_STEPS[gate]
    return TASK_BUILDERS[gate](total_time, steps)
