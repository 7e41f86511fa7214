"""Composite qubit-field Hilbert space: indexing, operators, states.

Basis ordering contract
-----------------------
The composite index is k = 2*n + s with Fock level n in [0, n_max] and
qubit level s (0 = g, 1 = e). The qubit index varies fastest, so a
product operator F (field) x Q (qubit) is ``np.kron(F, Q)``. States and
operators are plain numpy arrays; the helpers below validate shapes and
physical properties instead of wrapping them in classes.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from .errors import DimensionError, DomainError, TruncationError

QUBIT_G = 0
QUBIT_E = 1


@dataclass(frozen=True)
class SpaceSpec:
    """Truncated composite space with Fock levels 0..n_max and one qubit.

    Parameters
    ----------
    n_max : int
        Highest retained Fock level, at least 1.
    """

    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise DomainError(f"n_max must be an integer >= 1, got {self.n_max}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def dim_field(self):
        return self.n_max + 1

    @property
    def dim_total(self):
        return 2 * (self.n_max + 1)

    def index(self, n, s):
        """Composite basis index of |n, s>, with s = 0 (g) or 1 (e)."""
        if not 0 <= n <= self.n_max:
            raise DimensionError(f"Fock level {n} outside [0, {self.n_max}]")
        if s not in (QUBIT_G, QUBIT_E):
            raise DimensionError(f"qubit level must be 0 (g) or 1 (e), got {s}")
        return 2 * n + s

    def levels(self, k):
        """Inverse of index: composite index k -> (n, s)."""
        if not 0 <= k < self.dim_total:
            raise DimensionError(f"index {k} outside [0, {self.dim_total})")
        return k // 2, k % 2

    def excitations(self):
        """Total excitation number n + s per basis index, as an int array."""
        ks = np.arange(self.dim_total)
        return ks // 2 + ks % 2


def check_operator_shape(op, spec):
    op = np.asarray(op)
    d = spec.dim_total
    if op.shape != (d, d):
        raise DimensionError(f"operator shape {op.shape} != ({d}, {d})")
    return op


def check_state_shape(psi, spec):
    psi = np.asarray(psi)
    if psi.shape != (spec.dim_total,):
        raise DimensionError(f"state shape {psi.shape} != ({spec.dim_total},)")
    return psi


def build_annihilation(spec):
    """Field annihilation operator a (x) 1 on the composite space.

    Satisfies [a, a^dag] = 1 on every Fock level below n_max; the top
    level row is truncated.
    """
    n = np.arange(1, spec.dim_field)
    a_field = np.diag(np.sqrt(n).astype(complex), k=1)
    return np.kron(a_field, np.eye(2, dtype=complex))


def build_number_operator(spec):
    """Field number operator a^dag a on the composite space."""
    nvals = np.arange(spec.dim_field, dtype=float)
    return np.kron(np.diag(nvals).astype(complex), np.eye(2, dtype=complex))


def build_qubit_ops(spec):
    """Qubit operators on the composite space.

    Returns
    -------
    dict with keys "sigma_z", "sigma_plus", "sigma_minus". Conventions:
    sigma_z|e> = +|e>, sigma_minus|e> = |g>, so [sigma_plus, sigma_minus]
    equals sigma_z.
    """
    eye_f = np.eye(spec.dim_field, dtype=complex)
    sz = np.diag([-1.0 + 0j, 1.0 + 0j])
    sminus = np.zeros((2, 2), dtype=complex)
    sminus[QUBIT_G, QUBIT_E] = 1.0
    return {
        "sigma_z": np.kron(eye_f, sz),
        "sigma_plus": np.kron(eye_f, sminus.conj().T),
        "sigma_minus": np.kron(eye_f, sminus),
    }


def total_excitation_operator(spec):
    """N = a^dag a + (1 + sigma_z)/2; commutes with the coupled Hamiltonian."""
    return np.diag(spec.excitations().astype(complex))


def fock_state(n, qubit_level, spec):
    """Product state |n> (x) |s| as a composite state vector."""
    psi = np.zeros(spec.dim_total, dtype=complex)
    psi[spec.index(n, qubit_level)] = 1.0
    return psi


def coherent_tail(alpha, n_max):
    """Exact Poisson tail weight above n_max for |alpha|^2 mean photons."""
    lam = abs(alpha) ** 2
    if lam == 0.0:
        return 0.0
    # P(X > n_max) for X ~ Poisson(lam), via the regularized lower gamma
    return float(gammainc(n_max + 1, lam))


def default_coherent_n_max(alpha):
    """Truncation level keeping the Poisson tail far below the run guards.

    Mean plus six standard deviations plus a flat margin; for the photon
    numbers treated here the discarded weight is < 1e-10.
    """
    lam = abs(alpha) ** 2
    return int(np.ceil(lam + 6.0 * np.sqrt(lam) + 10.0))


def coherent_state(alpha, qubit_level, spec, tail_tol=1e-10):
    """Truncated, renormalized coherent state |alpha> (x) |s|.

    Raises TruncationError when the discarded Poisson tail above n_max
    is not below tail_tol (checked analytically, not by summation).
    """
    tail = coherent_tail(alpha, spec.n_max)
    if tail >= tail_tol:
        raise TruncationError(
            f"coherent state |alpha|^2 = {abs(alpha)**2:.6g} has tail weight "
            f"{tail:.3e} above n_max = {spec.n_max} (tolerance {tail_tol:.1e})"
        )
    amps = np.zeros(spec.dim_field, dtype=complex)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2.0)
    for n in range(1, spec.dim_field):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    amps /= np.linalg.norm(amps)
    qubit = np.zeros(2, dtype=complex)
    qubit[qubit_level] = 1.0
    return np.kron(amps, qubit)


def single_excitation_state(alpha, beta, spec, tol=1e-12):
    """alpha |0,e> + beta |1,g>; coefficients must be normalized."""
    norm2 = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(norm2 - 1.0) > tol:
        raise DomainError(f"|alpha|^2 + |beta|^2 = {norm2} is not 1 within {tol}")
    psi = np.zeros(spec.dim_total, dtype=complex)
    psi[spec.index(0, QUBIT_E)] = alpha
    psi[spec.index(1, QUBIT_G)] = beta
    return psi


def density_matrix(psi):
    """Outer product |psi><psi| for a state vector."""
    psi = np.asarray(psi)
    return np.outer(psi, psi.conj())


def partial_trace_qubit(rho, spec):
    """Trace out the qubit; returns the reduced field matrix (dim_field)."""
    rho = check_operator_shape(rho, spec)
    f = spec.dim_field
    return np.einsum("msns->mn", rho.reshape(f, 2, f, 2))


def partial_trace_field(rho, spec):
    """Trace out the field; returns the reduced qubit matrix (2 x 2)."""
    rho = check_operator_shape(rho, spec)
    f = spec.dim_field
    return np.einsum("nsnt->st", rho.reshape(f, 2, f, 2))


def hermiticity_defect(rho):
    """Largest absolute entry of rho - rho^dag."""
    rho = np.asarray(rho)
    return float(np.abs(rho - rho.conj().T).max())


def assert_density_matrix(rho, tol_herm=1e-12, tol_trace=1e-9, tol_pos=1e-8):
    """Validate Hermiticity, unit trace and positivity within tolerances."""
    rho = np.asarray(rho)
    herm = hermiticity_defect(rho)
    if herm > tol_herm:
        raise DomainError(f"Hermiticity defect {herm:.3e} > {tol_herm:.1e}")
    tr = rho.trace().real
    if abs(tr - 1.0) > tol_trace:
        raise DomainError(f"trace {tr} deviates from 1 by more than {tol_trace:.1e}")
    w = np.linalg.eigvalsh((rho + rho.conj().T) / 2.0)
    if w.min() < -tol_pos:
        raise DomainError(f"negative eigenvalue {w.min():.3e} below -{tol_pos:.1e}")
    return rho
