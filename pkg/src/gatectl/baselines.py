"""Comparison optimizers: GRAPE, differential evolution, genetic
algorithm, and an exhaustive brute-force search.

GRAPE relaxes the control to any amplitude in [-4, 4] per step and
ascends the exact fidelity gradient (matrix-exponential derivative via
the eigendecomposition, no first-order approximation) with a
backtracking line search, so fidelity never decreases.  DE and GA
search the discrete bang-bang space by sign-decoding their genomes; DE
also has a continuous mode operating on the same relaxed space as
GRAPE.
"""
from __future__ import annotations

import numpy as np

from .quantum import (
    ControlTask,
    action_index_from_signs,
    fidelity,
    hermitian_expm,
    propagate,
)

CONTROL_BOUND = 4.0


# -- continuous pulses (GRAPE space) ------------------------------------

def propagate_pulse(task: ControlTask, pulse: np.ndarray) -> np.ndarray:
    """Propagator of an N x m piecewise-constant pulse (amplitudes unrestricted)."""
    pulse = np.atleast_2d(np.asarray(pulse, dtype=np.float64))
    if pulse.shape != (task.steps, task.n_controls):
        raise ValueError(
            f"pulse shape {pulse.shape} != (N, m) = ({task.steps}, {task.n_controls})"
        )
    u = np.eye(task.dim, dtype=np.complex128)
    for amps in pulse:
        u = hermitian_expm(task.hamiltonian(amps), task.dt) @ u
    return u


def pulse_fidelity(task: ControlTask, pulse: np.ndarray) -> float:
    return fidelity(propagate_pulse(task, pulse), task.target)


def fidelity_gradient(task: ControlTask, pulse: np.ndarray):
    """Exact (F, dF/du) for an N x m pulse.

    Per step the generator is diagonalized once; the derivative of
    exp(-i dt H) along each control follows from the eigenbasis divided
    differences, written with a sinc so degenerate eigenvalues need no
    special case.
    """
    pulse = np.atleast_2d(np.asarray(pulse, dtype=np.float64))
    n, m = pulse.shape
    if (n, m) != (task.steps, task.n_controls):
        raise ValueError(
            f"pulse shape {pulse.shape} != (N, m) = ({task.steps}, {task.n_controls})"
        )
    dt = task.dt
    dim = task.dim

    step_u = np.empty((n, dim, dim), dtype=np.complex128)
    step_du = np.empty((n, m, dim, dim), dtype=np.complex128)
    for k in range(n):
        h = task.hamiltonian(pulse[k])
        w, v = np.linalg.eigh(h)
        phases = np.exp(-1j * dt * w)
        step_u[k] = (v * phases) @ v.conj().T
        diff = w[:, None] - w[None, :]
        mid = np.exp(-1j * dt * (w[:, None] + w[None, :]) / 2.0)
        gamma = mid * (-1j * dt) * np.sinc(dt * diff / (2.0 * np.pi))
        for j in range(m):
            cj = v.conj().T @ task.controls[j] @ v
            step_du[k, j] = v @ (gamma * cj) @ v.conj().T

    # Forward partials P_k = U_k ... U_1 and backward partials B_k = U_N ... U_{k+1}.
    fwd = np.empty((n + 1, dim, dim), dtype=np.complex128)
    fwd[0] = np.eye(dim)
    for k in range(n):
        fwd[k + 1] = step_u[k] @ fwd[k]
    bwd = np.empty((n + 1, dim, dim), dtype=np.complex128)
    bwd[n] = np.eye(dim)
    for k in range(n - 1, -1, -1):
        bwd[k] = bwd[k + 1] @ step_u[k]

    overlap = np.trace(task.target.conj().T @ fwd[n]) / dim
    grad = np.empty((n, m))
    for k in range(n):
        # Tr(U_f^dag B dU P) = Tr((P U_f^dag B) dU), cycled for one matmul less.
        w_k = fwd[k] @ task.target.conj().T @ bwd[k + 1]
        for j in range(m):
            d_overlap = np.sum(w_k.T * step_du[k, j]) / dim
            grad[k, j] = 2.0 * np.real(np.conj(overlap) * d_overlap)
    return float(abs(overlap) ** 2), grad


def grape_optimize(task: ControlTask, init: np.ndarray, iterations: int = 400,
                   step_init: float = 0.5, step_shrink: float = 0.5,
                   step_grow: float = 1.3, step_min: float = 1e-12):
    """Projected gradient ascent on pulse fidelity; returns (pulse, F).

    Each iteration backtracks the step length until the projected update
    strictly improves fidelity, so F is non-decreasing across iterations;
    stalls below ``step_min`` terminate early.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if task.n_controls == 0:
        raise ValueError("task has no controls to optimize")
    u = np.clip(np.atleast_2d(np.asarray(init, dtype=np.float64)),
                -CONTROL_BOUND, CONTROL_BOUND)
    f, grad = fidelity_gradient(task, u)
    step = step_init
    for _ in range(iterations):
        accepted = False
        while step >= step_min:
            trial = np.clip(u + step * grad, -CONTROL_BOUND, CONTROL_BOUND)
            f_trial = pulse_fidelity(task, trial)
            if f_trial > f:
                accepted = True
                break
            step *= step_shrink
        if not accepted:
            break
        u, f = trial, f_trial
        f, grad = fidelity_gradient(task, u)
        step *= step_grow
    return u, f


def grape_best_of(task: ControlTask, restarts: int = 20, iterations: int = 400,
                  seed: int | None = None, callback=None):
    """Best of several random-start GRAPE runs; returns (pulse, F)."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = np.random.default_rng(seed)
    best_pulse, best_f = None, -1.0
    for restart in range(restarts):
        init = rng.uniform(-CONTROL_BOUND, CONTROL_BOUND,
                           size=(task.steps, task.n_controls))
        pulse, f = grape_optimize(task, init, iterations)
        if f > best_f:
            best_pulse, best_f = pulse, f
        if callback is not None:
            callback({"restart": restart, "F": f, "best_F": best_f})
    return best_pulse, best_f


# -- sign decoding for the discrete searchers ---------------------------

def _require_sign_complete(task: ControlTask) -> float:
    """DE/GA decode genomes by sign, which needs the full +/-amp action set."""
    amps = np.abs(task.action_set)
    amp = amps.flat[0]
    expected = 2 ** task.n_controls
    if task.n_actions != expected or not np.allclose(amps, amp):
        raise ValueError(
            "sign decoding requires an action set of all +/-amplitude patterns "
            f"({expected} actions), got {task.n_actions}"
        )
    return float(amp)


def decode_signs(task: ControlTask, negative: np.ndarray) -> np.ndarray:
    """Per-step action indices from an N x m negativity mask."""
    negative = np.asarray(negative, dtype=bool).reshape(task.steps, task.n_controls)
    return np.array([action_index_from_signs(row) for row in negative], dtype=np.int64)


# -- differential evolution ---------------------------------------------

def de_optimize(task: ControlTask, population_size: int = 40, iterations: int = 200,
                f_scale: float = 0.7, crossover_rate: float = 0.9,
                seed: int | None = None, mode: str = "discrete", callback=None):
    """DE/rand/1/bin; returns (protocol, F) in discrete mode, (pulse, F)
    in continuous mode.

    Discrete mode evolves genes in [-1, 1]^(N*m) and decodes them by
    sign to the bang-bang amplitudes; continuous mode evolves the pulse
    amplitudes directly in [-4, 4] (GRAPE's relaxed space).
    """
    if population_size < 4:
        raise ValueError("population_size must be >= 4")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not 0.0 < f_scale <= 2.0:
        raise ValueError(f"f_scale must be in (0, 2], got {f_scale}")
    if not 0.0 <= crossover_rate <= 1.0:
        raise ValueError(f"crossover_rate must be in [0, 1], got {crossover_rate}")
    if mode not in ("discrete", "continuous"):
        raise ValueError(f"mode must be 'discrete' or 'continuous', got {mode!r}")

    if mode == "discrete":
        _require_sign_complete(task)
        bound = 1.0

        def evaluate(genome):
            return fidelity(propagate(task, decode_signs(task, genome < 0)),
                            task.target)
    else:
        bound = CONTROL_BOUND

        def evaluate(genome):
            return pulse_fidelity(task, genome.reshape(task.steps, task.n_controls))

    rng = np.random.default_rng(seed)
    dim = task.steps * task.n_controls
    pop = rng.uniform(-bound, bound, size=(population_size, dim))
    fit = np.array([evaluate(g) for g in pop])

    for iteration in range(iterations):
        for i in range(population_size):
            r1, r2, r3 = _distinct_indices(rng, population_size, i)
            mutant = np.clip(pop[r1] + f_scale * (pop[r2] - pop[r3]), -bound, bound)
            cross = rng.random(dim) < crossover_rate
            cross[rng.integers(dim)] = True
            trial = np.where(cross, mutant, pop[i])
            f_trial = evaluate(trial)
            if f_trial >= fit[i]:
                pop[i] = trial
                fit[i] = f_trial
        if callback is not None:
            callback({"iteration": iteration, "best_F": float(fit.max())})

    best = int(np.argmax(fit))
    if mode == "discrete":
        return decode_signs(task, pop[best] < 0), float(fit[best])
    return pop[best].reshape(task.steps, task.n_controls), float(fit[best])


def _distinct_indices(rng, n, exclude):
    picks = []
    while len(picks) < 3:
        c = int(rng.integers(n))
        if c != exclude and c not in picks:
            picks.append(c)
    return picks


# -- genetic algorithm ---------------------------------------------------

def ga_optimize(task: ControlTask, population_size: int = 50, generations: int = 300,
                mutation_rate: float | None = None, seed: int | None = None,
                callback=None):
    """Bit-string GA (bit = sign of one control at one step); returns (protocol, F).

    Tournament selection of size 2, uniform crossover, per-bit mutation,
    single elitism.
    """
    if population_size < 2 or population_size % 2 != 0:
        raise ValueError("population_size must be even and >= 2")
    if generations < 1:
        raise ValueError("generations must be >= 1")
    _require_sign_complete(task)
    dim = task.steps * task.n_controls
    if mutation_rate is None:
        mutation_rate = 1.0 / dim
    if not 0.0 <= mutation_rate <= 1.0:
        raise ValueError(f"mutation_rate must be in [0, 1], got {mutation_rate}")

    rng = np.random.default_rng(seed)

    def evaluate(bits):
        return fidelity(propagate(task, decode_signs(task, bits)), task.target)

    pop = rng.random((population_size, dim)) < 0.5
    fit = np.array([evaluate(g) for g in pop])

    def tournament():
        a, b = rng.integers(population_size, size=2)
        return a if fit[a] >= fit[b] else b

    for generation in range(generations):
        elite = int(np.argmax(fit))
        new_pop = np.empty_like(pop)
        new_pop[0] = pop[elite]
        for i in range(1, population_size):
            pa, pb = pop[tournament()], pop[tournament()]
            child = np.where(rng.random(dim) < 0.5, pa, pb)
            flip = rng.random(dim) < mutation_rate
            new_pop[i] = child ^ flip
        pop = new_pop
        fit = np.array([evaluate(g) for g in pop])
        if callback is not None:
            callback({"generation": generation, "best_F": float(fit.max())})

    best = int(np.argmax(fit))
    return decode_signs(task, pop[best]), float(fit[best])


# -- exhaustive search ----------------------------------------------------

def brute_force(task: ControlTask, budget: int = 2 ** 24):
    """Exact maximizer over all d^N protocols; returns (protocol, F).

    Ties resolve to the lexicographically smallest protocol.  Searches
    by depth-first partial products with the last step vectorized.
    """
    total = task.n_actions ** task.steps
    if total > budget:
        raise ValueError(
            f"exhaustive search needs {total} evaluations, over the budget of {budget}"
        )
    d = task.n_actions
    dim = task.dim
    # Fold the target into the last step so leaves reduce to one trace each.
    last = np.stack([task.target.conj().T @ task.step_unitaries[a] for a in range(d)])

    best_f = -1.0
    best_protocol = np.zeros(task.steps, dtype=np.int64)
    prefix = np.zeros(task.steps, dtype=np.int64)

    def descend(depth: int, u: np.ndarray) -> None:
        nonlocal best_f
        if depth == task.steps - 1:
            traces = np.einsum("aij,ji->a", last, u)
            fids = np.abs(traces / dim) ** 2
            a = int(np.argmax(fids))
            if fids[a] > best_f:
                best_f = float(fids[a])
                prefix[depth] = a
                best_protocol[:] = prefix
            return
        for a in range(d):
            prefix[depth] = a
            descend(depth + 1, task.step_unitaries[a] @ u)

    descend(0, np.eye(dim, dtype=np.complex128))
    return best_protocol, best_f
