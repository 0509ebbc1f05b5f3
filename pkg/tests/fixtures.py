"""Frozen reference values and small oracles shared across the tests.

Every frozen constant was computed by an independent implementation
(scipy expm + plain loops, no package code) before being written here;
the generating snippet is quoted above each constant so it can be rerun.
"""
import numpy as np

SX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SY = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SZ = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def pauli_unitary(vec, dt: float) -> np.ndarray:
    """Closed form exp(-i dt (a0 I + v . sigma)).

    For h = a0 I + v.sigma with theta = |v| dt:
      exp(-i dt h) = e^{-i a0 dt} (cos(theta) I - i sin(theta) vhat.sigma)
    """
    a0, vx, vy, vz = vec
    norm = np.sqrt(vx * vx + vy * vy + vz * vz)
    theta = norm * dt
    if norm == 0.0:
        body = np.cos(theta) * np.eye(2)
    else:
        n_sigma = (vx * SX + vy * SY + vz * SZ) / norm
        body = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * n_sigma
    return np.exp(-1j * a0 * dt) * body


def random_unitary(rng, dim: int) -> np.ndarray:
    """Haar-ish unitary via QR of a complex Gaussian matrix."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# Exhaustive search over all 2^12 bang-bang protocols of the Hadamard
# task at T=1.0, N=12 (drift sigma_z, control +/-4 sigma_x, index 0 = +4):
#   python3 - <<'EOF'
#   import itertools, numpy as np
#   from scipy.linalg import expm
#   sz = np.array([[1,0],[0,-1]], dtype=complex)
#   sx = np.array([[0,1],[1,0]], dtype=complex)
#   tgt = np.array([[1,1],[1,-1]], dtype=complex)/np.sqrt(2)
#   dt = 1.0/12
#   U = [expm(-1j*dt*(sz + s*sx)) for s in (4.0, -4.0)]
#   best = max(itertools.product(range(2), repeat=12),
#              key=lambda p: abs(np.trace(tgt.conj().T @
#                  np.linalg.multi_dot([U[a] for a in reversed(p)]))/2)**2)
#   EOF
HADAMARD_N12_BEST_F = 0.99779109007539168
HADAMARD_N12_BEST_L = -2.6558219935188592
HADAMARD_N12_BEST_PROTOCOL = (0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0, 0)

# Same enumeration at N=10 (1024 protocols).  This optimum is doubly
# degenerate: the protocol and its reversal give the same fidelity, and
# float evaluation order decides which one an argmax returns.
HADAMARD_N10_BEST_F = 0.97501758682509199
HADAMARD_N10_BEST_L = -1.6023656132826336
HADAMARD_N10_BEST_PROTOCOL = (0, 0, 0, 1, 0, 1, 1, 0, 0, 0)

# Direct simulation of the all-zeros (all eps = +4) protocol on the
# Hadamard task at T=1.0, N=28 with scipy's expm:
ALL_ZEROS_N28_F = 0.50818002265606821
ALL_ZEROS_N28_L = -0.30819383453584764

# Regression pin: first recorded output of
#   grape_best_of(hadamard_task(0.5, 28), restarts=2, iterations=60, seed=11)
GRAPE_T05_PIN = {"restarts": 2, "iterations": 60, "seed": 11,
                 "F": 0.84548983789785981, "L": -0.81104295183948028}
