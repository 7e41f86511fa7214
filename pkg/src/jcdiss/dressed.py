"""System parameters, coupled Hamiltonian and its dressed eigenstructure.

Units: the coupling g is the frequency unit (g = 1 by default) and hbar = 1,
so times are in units of 1/g and all frequencies in units of g.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .hilbert import QUBIT_E, QUBIT_G, build_annihilation, build_qubit_ops

RWA_WARNING_RATIO = 50.0


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the damped qubit-cavity system.

    Parameters
    ----------
    omega0 : float
        Qubit transition frequency.
    omega : float
        Cavity mode frequency.
    gamma : float
        Cavity damping rate.
    g : float, optional
        Qubit-cavity coupling; the frequency unit, 1 by default. g = 0 is
        accepted as the decoupled limit (phenomenological model only).
    nbar_at_omega : float, optional
        Mean thermal occupation of the bath at the cavity frequency; fixes
        the bath temperature. 0 means zero temperature.
    """

    omega0: float
    omega: float
    gamma: float = 0.0
    g: float = 1.0
    nbar_at_omega: float = 0.0

    def __post_init__(self):
        if self.omega0 <= 0 or self.omega <= 0:
            raise ParameterError("omega0 and omega must be positive")
        if self.gamma < 0:
            raise ParameterError("gamma must be nonnegative")
        if self.g < 0:
            raise ParameterError("g must be nonnegative")
        if self.nbar_at_omega < 0:
            raise ParameterError("nbar_at_omega must be nonnegative")
        if self.g > 0 and self.gamma > 0 and 2.0 * self.g <= self.gamma:
            raise ParameterError(
                f"underdamped regime requires 2*g > gamma, got g = {self.g}, "
                f"gamma = {self.gamma}"
            )
        if self.gamma > 0 and self.omega <= RWA_WARNING_RATIO * self.gamma:
            warnings.warn(
                f"omega = {self.omega} is not large against gamma = {self.gamma} "
                f"(expected omega > {RWA_WARNING_RATIO}*gamma); weak-damping "
                "assumptions are marginal",
                stacklevel=2,
            )

    @property
    def delta(self):
        """Detuning omega0 - omega."""
        return self.omega0 - self.omega

    @property
    def kT(self):
        """Bath temperature from nbar_at_omega; 0 means zero temperature."""
        if self.nbar_at_omega == 0.0:
            return 0.0
        return self.omega / np.log(1.0 + 1.0 / self.nbar_at_omega)


def build_jc_hamiltonian(params, spec):
    """H = (omega0/2) sigma_z + omega a^dag a + g (a sigma_+ + a^dag sigma_-)."""
    a = build_annihilation(spec)
    q = build_qubit_ops(spec)
    h = (
        0.5 * params.omega0 * q["sigma_z"]
        + params.omega * (a.conj().T @ a)
        + params.g * (a @ q["sigma_plus"] + a.conj().T @ q["sigma_minus"])
    )
    return h


@dataclass(frozen=True)
class DressedSpectrum:
    """Eigenstructure of the coupled Hamiltonian on complete manifolds.

    Manifold n (0 <= n <= n_max - 1) spans {|n,e>, |n+1,g>} and carries the
    pair |e_{n,+}>, |e_{n,-}>. The leftover bare state |n_max,e> closes the
    truncated space and is kept unmixed.

    Attributes
    ----------
    eps0 : float
        Energy of the factorized ground state |e_0> = |0,g>.
    theta, c, s : ndarray
        Mixing angle theta_n = atan2(2 g sqrt(n+1), delta) in (0, pi) and
        c_n = cos(theta_n/2), s_n = sin(theta_n/2), both positive.
    Omega : ndarray
        Splittings Omega_n = sqrt(delta^2 + 4 g^2 (n+1)), strictly increasing.
    eps_plus, eps_minus : ndarray
        Dressed energies (n + 1/2) omega +- Omega_n / 2.
    eps_top : float
        Energy of the bare remainder state |n_max,e>.
    """

    params: SystemParams
    n_manifolds: int
    eps0: float
    theta: np.ndarray
    c: np.ndarray
    s: np.ndarray
    Omega: np.ndarray
    eps_plus: np.ndarray
    eps_minus: np.ndarray
    eps_top: float


def dressed_spectrum(params, spec):
    """Closed-form dressed spectrum for all complete manifolds.

    Requires g > 0; at g = 0 the manifolds are degenerate at zero detuning
    and the dressed construction is ill-defined.
    """
    if params.g == 0:
        raise DomainError("dressed spectrum requires g > 0")
    n = np.arange(spec.n_max, dtype=float)
    delta = params.delta
    omega = params.omega
    theta = np.arctan2(2.0 * params.g * np.sqrt(n + 1.0), delta)
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    big_omega = np.sqrt(delta**2 + 4.0 * params.g**2 * (n + 1.0))
    eps_plus = (n + 0.5) * omega + big_omega / 2.0
    eps_minus = (n + 0.5) * omega - big_omega / 2.0
    eps_top = spec.n_max * omega + 0.5 * params.omega0
    return DressedSpectrum(
        params=params,
        n_manifolds=spec.n_max,
        eps0=-0.5 * params.omega0,
        theta=theta,
        c=c,
        s=s,
        Omega=big_omega,
        eps_plus=eps_plus,
        eps_minus=eps_minus,
        eps_top=eps_top,
    )


def dressed_vector(spectrum, spec, n, sign):
    """Composite-space vector of |e_{n,+}> (sign=+1) or |e_{n,-}> (sign=-1)."""
    if not 0 <= n < spectrum.n_manifolds:
        raise DomainError(f"manifold {n} outside [0, {spectrum.n_manifolds})")
    v = np.zeros(spec.dim_total, dtype=complex)
    if sign > 0:
        v[spec.index(n, QUBIT_E)] = spectrum.c[n]
        v[spec.index(n + 1, QUBIT_G)] = spectrum.s[n]
    else:
        v[spec.index(n, QUBIT_E)] = -spectrum.s[n]
        v[spec.index(n + 1, QUBIT_G)] = spectrum.c[n]
    return v


def ground_vector(spec):
    """Composite-space vector of the factorized ground state |0,g>."""
    v = np.zeros(spec.dim_total, dtype=complex)
    v[spec.index(0, QUBIT_G)] = 1.0
    return v


def dressed_basis_matrix(spectrum, spec):
    """Unitary with dressed states as columns.

    Column order: |e_0>, then |e_{n,+}>, |e_{n,-}> for n = 0..n_max-1, and
    finally the bare remainder |n_max,e>. U^dag H U is diagonal and matches
    the closed-form energies.
    """
    d = spec.dim_total
    u = np.zeros((d, d), dtype=complex)
    u[:, 0] = ground_vector(spec)
    col = 1
    for n in range(spectrum.n_manifolds):
        u[:, col] = dressed_vector(spectrum, spec, n, +1)
        u[:, col + 1] = dressed_vector(spectrum, spec, n, -1)
        col += 2
    u[spec.index(spec.n_max, QUBIT_E), col] = 1.0
    return u


def dressed_energies(spectrum, spec):
    """Energies aligned with the columns of dressed_basis_matrix."""
    e = np.empty(spec.dim_total)
    e[0] = spectrum.eps0
    e[1 : 2 * spectrum.n_manifolds + 1 : 2] = spectrum.eps_plus
    e[2 : 2 * spectrum.n_manifolds + 2 : 2] = spectrum.eps_minus
    e[-1] = spectrum.eps_top
    return e
