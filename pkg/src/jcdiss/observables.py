"""Scalar observables and phase-space functions of composite states.

Quadratures follow q = (a + a^dag)/2, p = (a - a^dag)/(2i), so a coherent
state |alpha> sits at (Re alpha, Im alpha), the vacuum has variance 1/4 in
each quadrature, and the uncertainty bound is var(q) var(p) >= 1/16.
Entropies use the natural logarithm.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SubspaceLeakError
from .hilbert import (
    build_annihilation,
    check_operator_shape,
    partial_trace_qubit,
)

_ENTROPY_FLOOR = 1e-14


def _diag_real(rho):
    return np.diagonal(rho).real


def inversion(rho, spec):
    """<sigma_z>: +1 for the excited qubit level, -1 for the ground level."""
    check_operator_shape(rho, spec)
    signs = np.where(np.arange(spec.dim_total) % 2 == 1, 1.0, -1.0)
    return float(signs @ _diag_real(rho))


def mean_photon(rho, spec):
    """<a^dag a>."""
    check_operator_shape(rho, spec)
    levels = np.arange(spec.dim_total) // 2
    return float(levels @ _diag_real(rho))


def purity(rho, spec):
    """Tr rho^2 (Frobenius norm squared for Hermitian states)."""
    check_operator_shape(rho, spec)
    return float(np.vdot(rho, rho).real)


def ground_population(rho, spec):
    """Population of the joint ground state |0,g>."""
    check_operator_shape(rho, spec)
    return float(rho[0, 0].real)


def field_entropy(rho, spec):
    """Von Neumann entropy of the reduced field state."""
    check_operator_shape(rho, spec)
    rf = partial_trace_qubit(rho, spec)
    evals = np.linalg.eigvalsh(0.5 * (rf + rf.conj().T))
    evals = evals[evals > _ENTROPY_FLOOR]
    return float(-np.sum(evals * np.log(evals)))


_SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_YY = np.kron(_SIGMA_Y, _SIGMA_Y)


def concurrence(rho, spec, leak_tol=1e-6):
    """Qubit-field concurrence on the two-level field subspace {0, 1}.

    The state is projected onto span{|0,g>, |0,e>, |1,g>, |1,e>} and
    renormalized; SubspaceLeakError is raised if more than leak_tol of
    the population lies outside (the measure is only meaningful for
    states confined to at most one photon). The projected 4x4 problem is
    the standard two-qubit concurrence.
    """
    check_operator_shape(rho, spec)
    sub = np.array(rho[:4, :4])
    leak = 1.0 - float(np.trace(sub).real)
    if leak >= leak_tol:
        raise SubspaceLeakError(
            f"{leak:.3e} of the population lies outside the one-photon subspace "
            f"(tolerance {leak_tol:.1e})"
        )
    sub = 0.5 * (sub + sub.conj().T)
    sub /= np.trace(sub).real
    flipped = _YY @ sub.conj() @ _YY
    evals = np.linalg.eigvals(sub @ flipped).real
    evals = np.sqrt(np.clip(evals, 0.0, None))
    evals[::-1].sort()
    return float(max(0.0, evals[0] - evals[1] - evals[2] - evals[3]))


# rebuilt ladder operators dominate streamed evaluation; memoize per space
_LADDER_CACHE = {}


def _ladder_pair(spec):
    ops = _LADDER_CACHE.get(spec)
    if ops is None:
        a = build_annihilation(spec)
        ops = (a, a @ a)
        _LADDER_CACHE[spec] = ops
    return ops


def _field_moments(rho, spec):
    a, a2 = _ladder_pair(spec)
    ea = complex(np.einsum("ij,ji->", a, rho))
    ea2 = complex(np.einsum("ij,ji->", a2, rho))
    en = mean_photon(rho, spec)
    return ea, ea2, en


def q_mean(rho, spec):
    check_operator_shape(rho, spec)
    a, _ = _ladder_pair(spec)
    return float(np.einsum("ij,ji->", a, rho).real)


def p_mean(rho, spec):
    check_operator_shape(rho, spec)
    a, _ = _ladder_pair(spec)
    return float(np.einsum("ij,ji->", a, rho).imag)


def q_var(rho, spec):
    check_operator_shape(rho, spec)
    ea, ea2, en = _field_moments(rho, spec)
    q2 = 0.25 * (2.0 * ea2.real + 2.0 * en + 1.0)
    return float(q2 - ea.real ** 2)


def p_var(rho, spec):
    check_operator_shape(rho, spec)
    ea, ea2, en = _field_moments(rho, spec)
    p2 = 0.25 * (-2.0 * ea2.real + 2.0 * en + 1.0)
    return float(p2 - ea.imag ** 2)


def revival_time_estimate(alpha):
    """Coherent-state revival time 2 pi |alpha| (in units of 1/g)."""
    return 2.0 * np.pi * abs(alpha)


@dataclass(frozen=True)
class HusimiGridSpec:
    """Square phase-space grid: n_points per axis over [-extent, extent]."""

    extent: float
    n_points: int = 121

    def __post_init__(self):
        if self.extent <= 0:
            raise DomainError("grid extent must be positive")
        if self.n_points < 2:
            raise DomainError("grid needs at least 2 points per axis")

    def axes(self):
        x = np.linspace(-self.extent, self.extent, self.n_points)
        return x, x.copy()


@dataclass(frozen=True)
class PhaseGrid:
    """Husimi function samples: values[i, j] = Q(x[j] + i y[i])."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    mass: float


def husimi_q(rho, spec, grid, coverage_tol=0.98):
    """Husimi function Q(alpha) = <alpha| rho_f |alpha> / pi of the reduced
    field state on a square grid.

    Coherent-state amplitudes are evaluated exactly on the truncated
    space (no renormalization), which keeps the integral of Q equal to
    the trace of the truncated state. A warning is emitted when the grid
    captures less than coverage_tol of the total mass.
    """
    check_operator_shape(rho, spec)
    rf = partial_trace_qubit(rho, spec)
    x, y = grid.axes()
    ax, ay = np.meshgrid(x, y)
    alpha = (ax + 1j * ay).ravel()

    nf = spec.dim_field
    v = np.empty((alpha.size, nf), dtype=complex)
    v[:, 0] = np.exp(-0.5 * np.abs(alpha) ** 2)
    for n in range(1, nf):
        v[:, n] = v[:, n - 1] * alpha / np.sqrt(n)

    w = v.conj() @ rf
    q = np.einsum("kn,kn->k", w, v).real / np.pi
    q = np.clip(q, 0.0, 1.0 / np.pi + 1e-12)
    values = q.reshape(grid.n_points, grid.n_points)

    dx = x[1] - x[0]
    mass = float(values.sum() * dx * dx)
    if mass < coverage_tol:
        warnings.warn(
            f"phase-space grid captures only {mass:.4f} of the state; "
            "increase the extent",
            stacklevel=2,
        )
    return PhaseGrid(x=x, y=y, values=values, mass=mass)


OBSERVABLES = {
    "inversion": inversion,
    "mean_photon": mean_photon,
    "purity": purity,
    "field_entropy": field_entropy,
    "concurrence": concurrence,
    "ground_population": ground_population,
    "q_mean": q_mean,
    "p_mean": p_mean,
    "q_var": q_var,
    "p_var": p_var,
}
