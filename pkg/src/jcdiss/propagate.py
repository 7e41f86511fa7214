"""Time evolution, steady states, and closed-form single-excitation solutions.

Two propagation routes are provided and kept deliberately independent so
they can cross-check each other:

* spectral: eigendecompose the vectorized generator once (block by block,
  exploiting conservation of the excitation-number difference between bra
  and ket indices) and evaluate rho(t) = V exp(w t) V^-1 vec(rho0) at any
  set of times, and
* rk4: classical fixed-step fourth-order integration of the structured
  generator, by default in the frame rotating at the cavity frequency
  where the step-size requirement is set by the coupling and detuning
  scales instead of the optical frequency.

The closed-form solutions cover the single-excitation sector at zero
temperature for both generators and serve as first-principles oracles.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse.csgraph as csgraph

from .errors import (
    DefectiveLiouvillianError,
    DegenerateKernelError,
    DimensionError,
    DomainError,
    DriftError,
    ParameterError,
    TruncationError,
)
from .hilbert import QUBIT_E, QUBIT_G, hermiticity_defect
from .dressed import dressed_spectrum, dressed_vector, ground_vector
from .lindblad import unvec, vec
from . import _kernels


def _as_density(state, dim):
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        if state.shape[0] != dim:
            raise DimensionError(f"state length {state.shape[0]}, expected {dim}")
        return np.outer(state, state.conj())
    if state.shape != (dim, dim):
        raise DimensionError(f"state shape {state.shape}, expected ({dim}, {dim})")
    rho = np.array(state, dtype=complex)
    if hermiticity_defect(rho) > 1e-10:
        raise DomainError("initial state is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-9 or abs(np.trace(rho).imag) > 1e-9:
        raise DomainError("initial state does not have unit trace")
    return rho


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ParameterError("times must be a non-empty 1d array")
    if times[0] < 0 or np.any(np.diff(times) < 0):
        raise ParameterError("times must be nonnegative and nondecreasing")
    return times


@dataclass
class EvolutionResult:
    """Output of evolve: sampled times, optional states, and diagnostics.

    states has shape (n_times, dim, dim) when stored. diagnostics records
    raw (pre-correction) trace drift and hermiticity defect maxima, the
    largest combined population seen in the top two Fock levels, and
    method details.
    """

    times: np.ndarray
    states: Optional[np.ndarray]
    method: str
    diagnostics: dict = field(default_factory=dict)


AMPLIFICATION_LIMIT = 1e10


@dataclass
class SpectralDecomposition:
    """Blockwise eigendecomposition of a vectorized Lindblad generator.

    blocks is a list of (indices, eigenvalues, V, lu) with lu the LU
    factorization of V for solving mode amplitudes. cond records the
    largest raw eigenvector-matrix condition number across blocks; it is
    diagnostic only, since the quantity that actually bounds propagation
    error is the per-state mode amplification checked in propagate_vec.
    """

    dim: int
    blocks: list
    cond: float

    def eigenvalues(self):
        return np.concatenate([w for (_, w, _, _) in self.blocks])

    def propagate_vec(self, v0, times, amplification_limit=AMPLIFICATION_LIMIT):
        """Matrix of vec(rho(t)) columns, shape (dim^2, len(times)).

        The expansion of v0 over each block's eigenvectors is required to
        be numerically benign: if sum_k |V||c| exceeds amplification_limit
        times the state norm, cancellation would eat the accuracy budget
        and DefectiveLiouvillianError asks the caller to integrate
        instead. This is the operative form of the "numerically
        diagonalizable" precondition: a near-Jordan structure shows up as
        a divergent coefficient vector for generic states.
        """
        times = np.asarray(times, dtype=float)
        out = np.zeros((self.dim * self.dim, times.size), dtype=complex)
        norm0 = np.linalg.norm(v0)
        for idx, w, vmat, lu in self.blocks:
            vb = v0[idx]
            if not np.any(vb):
                continue
            coef = sla.lu_solve(lu, vb)
            amp = np.linalg.norm(np.abs(vmat) @ np.abs(coef)) / max(norm0, 1e-300)
            if not np.isfinite(amp) or amp > amplification_limit:
                raise DefectiveLiouvillianError(
                    f"eigenvector expansion amplifies the state by {amp:.3e} "
                    f"(limit {amplification_limit:.1e}) in a block of size "
                    f"{idx.size}: near-degenerate Jordan structure; "
                    "fall back to the rk4 integrator"
                )
            modes = coef[:, None] * np.exp(np.multiply.outer(w, times))
            out[idx, :] = vmat @ modes
        return out


def spectral_decomposition(liouvillian):
    """Block-diagonalize the generator; cached on the Liouvillian.

    Blocks are the connected components of the symmetrized sparsity
    pattern of the superoperator; for the generators built here they
    coincide with sectors of fixed bra-ket excitation difference, so the
    split is exact.
    """
    cached = getattr(liouvillian, "_decomp", None)
    if cached is not None:
        return cached
    lmat = liouvillian.matrix.tocsr()
    pattern = (abs(lmat) + abs(lmat.T)).astype(bool)
    n_comp, labels = csgraph.connected_components(pattern, directed=False)
    blocks = []
    cond_max = 1.0
    for comp in range(n_comp):
        idx = np.nonzero(labels == comp)[0]
        sub = lmat[np.ix_(idx, idx)].toarray()
        w, vmat = sla.eig(sub)
        cond_max = max(cond_max, float(np.linalg.cond(vmat)))
        lu = sla.lu_factor(vmat)
        blocks.append((idx, w, vmat, lu))
    decomp = SpectralDecomposition(dim=liouvillian.dim, blocks=blocks, cond=cond_max)
    liouvillian._decomp = decomp
    return decomp


def _top_population(rho, spec):
    n = spec.n_max
    pop = 0.0
    for level in (n, n - 1):
        if level < 0:
            continue
        for s in (QUBIT_G, QUBIT_E):
            k = spec.index(level, s)
            pop += rho[k, k].real
    return pop


def evolve(
    liouvillian,
    state,
    times,
    method="spectral",
    dt=None,
    frame="rotating",
    observer: Optional[Callable] = None,
    store_states: Optional[bool] = None,
    truncation_guard=True,
    truncation_tol=1e-6,
    chunk=512,
    backend=None,
):
    """Propagate a state through the generator and sample it at times.

    observer(i, t, rho) is called at each requested time in order; states
    are additionally stored unless an observer is given and store_states
    is not forced. method is "spectral" or "rk4"; dt and frame apply to
    rk4 only. The truncation guard aborts the run if the top two Fock
    levels ever hold more than truncation_tol of the population.
    """
    times = _check_times(times)
    rho0 = _as_density(state, liouvillian.dim)
    if store_states is None:
        store_states = observer is None
    if method == "spectral":
        return evolve_spectral(
            liouvillian, rho0, times, observer, store_states,
            truncation_guard, truncation_tol, chunk,
        )
    if method == "rk4":
        return evolve_rk4(
            liouvillian, rho0, times, dt, frame, observer, store_states,
            truncation_guard, truncation_tol, backend,
        )
    raise ParameterError(f"unknown method {method!r}")


def evolve_spectral(
    liouvillian, rho0, times, observer=None, store_states=True,
    truncation_guard=True, truncation_tol=1e-6, chunk=512,
):
    """Spectral propagation at arbitrary times; states are exact up to the
    conditioning of the eigenbasis (reported in diagnostics)."""
    decomp = spectral_decomposition(liouvillian)
    dim = liouvillian.dim
    spec = liouvillian.spec
    v0 = vec(rho0)
    states = np.empty((times.size, dim, dim), dtype=complex) if store_states else None
    drift_max = 0.0
    herm_max = 0.0
    top_max = 0.0
    for start in range(0, times.size, chunk):
        tc = times[start : start + chunk]
        cols = decomp.propagate_vec(v0, tc)
        for k in range(tc.size):
            rho = unvec(cols[:, k], dim)
            drift_max = max(drift_max, abs(np.trace(rho).real - 1.0) + abs(np.trace(rho).imag))
            herm_max = max(herm_max, hermiticity_defect(rho))
            top = _top_population(rho, spec)
            top_max = max(top_max, top)
            if truncation_guard and top > truncation_tol:
                raise TruncationError(
                    f"top two Fock levels hold {top:.3e} population at t={tc[k]:.6g}; "
                    f"raise n_max (tolerance {truncation_tol:.1e})"
                )
            i = start + k
            if states is not None:
                states[i] = rho
            if observer is not None:
                observer(i, tc[k], rho)
    return EvolutionResult(
        times=times,
        states=states,
        method="spectral",
        diagnostics={
            "trace_drift_max": drift_max,
            "herm_defect_max": herm_max,
            "top_population_max": top_max,
            "cond": decomp.cond,
            "dt": None,
            "frame": "lab",
            "backend": "eig",
        },
    )


def default_time_step(liouvillian, frame="rotating", kdata=None):
    """Step size rule: resolve the fastest retained frequency scale.

    Lab frame: 0.005 / omega, capped at 0.01 / max(omega, omega0).
    Rotating frame: the same rule applied to the in-frame spectral width
    (detuning, coupling, decay), which is what the integrator actually
    has to resolve there.
    """
    params = liouvillian.params
    if frame == "lab":
        cap = 0.01 / max(params.omega, params.omega0)
        return min(0.005 / params.omega, cap), cap
    if frame == "rotating":
        if kdata is None:
            kdata = _kernels.prepare_kernel(liouvillian, rotating=True)
        f_ref = max(kdata.f_scale, 1e-9)
        return 0.005 / f_ref, 0.01 / f_ref
    raise ParameterError(f"unknown frame {frame!r}")


def evolve_rk4(
    liouvillian, rho0, times, dt=None, frame="rotating", observer=None,
    store_states=True, truncation_guard=True, truncation_tol=1e-6, backend=None,
):
    """Fixed-step RK4 propagation with exact landing on each output time.

    Between consecutive outputs the interval is split into equal steps no
    longer than dt. At each output the raw trace and hermiticity drifts
    are checked against 1e-7 (DriftError beyond that) and recorded, then
    the state is resymmetrized and renormalized before being handed out.
    """
    if frame not in ("rotating", "lab"):
        raise ParameterError(f"unknown frame {frame!r}")
    kdata = _kernels.prepare_kernel(liouvillian, rotating=(frame == "rotating"))
    dt_default, dt_cap = default_time_step(liouvillian, frame, kdata)
    if dt is None:
        dt = dt_default
    else:
        dt = float(dt)
        if dt <= 0:
            raise ParameterError("dt must be positive")
        if dt > dt_cap:
            raise ParameterError(
                f"dt = {dt:.3e} exceeds the stability cap {dt_cap:.3e} for this frame"
            )
    dim = liouvillian.dim
    spec = liouvillian.spec
    states = np.empty((times.size, dim, dim), dtype=complex) if store_states else None
    drift_max = 0.0
    herm_max = 0.0
    top_max = 0.0
    steps_total = 0

    # integrate in the chosen frame; outputs are unwound to the lab frame
    ph0 = _kernels.frame_phases(kdata, times[0])
    rho = (ph0.conj()[:, None] * rho0) * ph0[None, :]
    t_prev = times[0]

    for i, t in enumerate(times):
        if t > t_prev:
            span = t - t_prev
            n = max(1, math.ceil(span / dt - 1e-12))
            h = span / n
            rho = _kernels.rk4_advance(kdata, rho, h, n, backend=backend)
            steps_total += n
            t_prev = t

        tr = np.trace(rho)
        drift = abs(tr.real - 1.0) + abs(tr.imag)
        herm = hermiticity_defect(rho)
        if drift > 1e-7:
            raise DriftError(
                f"trace drifted by {drift:.3e} at t={t:.6g}; reduce dt"
            )
        if herm > 1e-7:
            raise DriftError(
                f"hermiticity defect {herm:.3e} at t={t:.6g}; reduce dt"
            )
        drift_max = max(drift_max, drift)
        herm_max = max(herm_max, herm)
        rho = 0.5 * (rho + rho.conj().T)
        rho /= np.trace(rho).real

        ph = _kernels.frame_phases(kdata, t)
        rho_lab = (ph[:, None] * rho) * ph.conj()[None, :]
        top = _top_population(rho_lab, spec)
        top_max = max(top_max, top)
        if truncation_guard and top > truncation_tol:
            raise TruncationError(
                f"top two Fock levels hold {top:.3e} population at t={t:.6g}; "
                f"raise n_max (tolerance {truncation_tol:.1e})"
            )
        if states is not None:
            states[i] = rho_lab
        if observer is not None:
            observer(i, t, rho_lab)

    return EvolutionResult(
        times=times,
        states=states,
        method="rk4",
        diagnostics={
            "trace_drift_max": drift_max,
            "herm_defect_max": herm_max,
            "top_population_max": top_max,
            "cond": None,
            "dt": dt,
            "frame": frame,
            "steps_total": steps_total,
            "backend": backend or _kernels.backend_name(),
        },
    )


def steady_state(liouvillian, residual_tol=1e-9, degeneracy_ratio=1e-8):
    """Unique stationary state of the generator.

    The kernel is located in the spectral decomposition; the second
    smallest eigenvalue magnitude must clear degeneracy_ratio * gamma or
    DegenerateKernelError is raised (a degenerate kernel means the
    stationary state is not unique, e.g. at g = 0 where the qubit
    decouples). The returned state is Hermitized, normalized, and checked
    to satisfy ||L[rho]||_F < residual_tol.
    """
    decomp = spectral_decomposition(liouvillian)
    mags = []
    for bi, (idx, w, vmat, lu) in enumerate(decomp.blocks):
        for j in range(w.size):
            mags.append((abs(w[j]), bi, j))
    mags.sort(key=lambda trip: trip[0])
    (m0, b0, j0), (m1, _, _) = mags[0], mags[1]
    gamma = getattr(liouvillian.params, "gamma", 0.0)
    scale = gamma if gamma > 0 else max(m for m, _, _ in mags[-1:]) or 1.0
    thresh = degeneracy_ratio * scale
    if m1 <= thresh:
        raise DegenerateKernelError(
            f"two eigenvalues within {thresh:.3e} of zero "
            f"(|w0|={m0:.3e}, |w1|={m1:.3e}): stationary state is not unique"
        )
    if m0 > thresh:
        raise DegenerateKernelError(
            f"no eigenvalue near zero (smallest |w| = {m0:.3e}); "
            "the generator has no stationary state in this representation"
        )
    idx, w, vmat, _ = decomp.blocks[b0]
    v = np.zeros(decomp.dim * decomp.dim, dtype=complex)
    v[idx] = vmat[:, j0]
    rho = unvec(v, decomp.dim)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise DegenerateKernelError("kernel vector is traceless; no physical stationary state")
    rho /= tr
    resid = np.linalg.norm(unvec(liouvillian.matrix @ vec(rho), decomp.dim))
    if resid > residual_tol:
        raise DefectiveLiouvillianError(
            f"stationary-state residual ||L[rho]||_F = {resid:.3e} exceeds {residual_tol:.1e}"
        )
    return rho


@dataclass(frozen=True)
class SingleExcitationAmplitudes:
    """Initial amplitudes alpha on |0,e> and beta on |1,g> (unit norm)."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise DomainError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")


def analytic_microscopic(params, amps, times, spec):
    """Closed-form dressed-generator evolution in the single-excitation
    sector at zero temperature.

    The initial state alpha|0,e> + beta|1,g> decomposes onto the n = 0
    dressed doublet with amplitudes A+ = c0 alpha + s0 beta and
    A- = -s0 alpha + c0 beta. Each dressed population decays at the rate
    of its own emission channel (gamma s0^2 for the upper, gamma c0^2 for
    the lower state), the doublet coherence decays at their mean gamma/2
    while precessing at the splitting, and the lost population lands in
    the ground state without generating coherences to it.
    """
    if params.nbar_at_omega != 0:
        raise DomainError("closed-form solution requires zero temperature")
    times = _check_times(times)
    spectrum = dressed_spectrum(params, spec)
    c0, s0 = spectrum.c[0], spectrum.s[0]
    om0 = spectrum.Omega[0]
    gamma = params.gamma
    ap = c0 * amps.alpha + s0 * amps.beta
    am = -s0 * amps.alpha + c0 * amps.beta

    e0 = ground_vector(spec)
    ep = dressed_vector(spectrum, spec, 0, +1)
    em = dressed_vector(spectrum, spec, 0, -1)
    p00 = np.outer(e0, e0.conj())
    ppp = np.outer(ep, ep.conj())
    pmm = np.outer(em, em.conj())
    ppm = np.outer(ep, em.conj())

    states = np.empty((times.size, spec.dim_total, spec.dim_total), dtype=complex)
    for i, t in enumerate(times):
        pp = abs(ap) ** 2 * np.exp(-gamma * s0 ** 2 * t)
        pm = abs(am) ** 2 * np.exp(-gamma * c0 ** 2 * t)
        coh = ap * np.conj(am) * np.exp((-1j * om0 - 0.5 * gamma) * t)
        rho = (1.0 - pp - pm) * p00 + pp * ppp + pm * pmm
        rho += coh * ppm + np.conj(coh) * ppm.conj().T
        states[i] = rho
    return states


def analytic_phenomenological(params, amps, times, spec):
    """Closed-form bare-damping evolution in the single-excitation sector
    at zero temperature.

    The sector amplitudes follow a 2x2 non-Hermitian Hamiltonian whose
    traceless part has complex Rabi frequency nu = sqrt(mu^2 + g^2) with
    mu = delta/2 + i gamma/4; the population lost from the sector
    accumulates in |0,g>.
    """
    if params.nbar_at_omega != 0:
        raise DomainError("closed-form solution requires zero temperature")
    times = _check_times(times)
    lam = 0.5 * params.omega - 0.25j * params.gamma
    mu = 0.5 * params.delta + 0.25j * params.gamma
    nu = np.sqrt(mu * mu + params.g * params.g + 0j)

    alpha, beta = complex(amps.alpha), complex(amps.beta)
    ke = np.zeros(spec.dim_total, dtype=complex)
    ke[spec.index(0, QUBIT_E)] = 1.0
    kg1 = np.zeros(spec.dim_total, dtype=complex)
    kg1[spec.index(1, QUBIT_G)] = 1.0
    vac = ground_vector(spec)
    pvac = np.outer(vac, vac.conj())

    states = np.empty((times.size, spec.dim_total, spec.dim_total), dtype=complex)
    for i, t in enumerate(times):
        cosnt = np.cos(nu * t)
        if abs(nu) * abs(t) < 1e-8 or abs(nu) < 1e-14:
            sincnt = t * (1.0 - (nu * t) ** 2 / 6.0)
        else:
            sincnt = np.sin(nu * t) / nu
        phase = np.exp(-1j * lam * t)
        a_t = phase * (cosnt * alpha - 1j * sincnt * (mu * alpha + params.g * beta))
        b_t = phase * (cosnt * beta - 1j * sincnt * (params.g * alpha - mu * beta))
        psi = a_t * ke + b_t * kg1
        rho = np.outer(psi, psi.conj())
        rho += (1.0 - abs(a_t) ** 2 - abs(b_t) ** 2) * pvac
        states[i] = rho
    return states


def trace_distance(rho, sigma):
    """T(rho, sigma) = (1/2) ||rho - sigma||_1 for Hermitian arguments."""
    diff = np.asarray(rho) - np.asarray(sigma)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))
