"""Benchmark the fixed-step integrator backends against each other.

Runs the same rotating-frame RK4 advance through the compiled (numba)
backend and the pure-numpy fallback, checks they agree to near machine
precision, and reports wall time per step and the speedup.

Usage:
    python3 benchmarks/bench_rk4.py [--nmax 8 16 24] [--steps 400] [--repeats 3]
"""

import argparse
import time

import numpy as np

from jcdiss._kernels import HAVE_NUMBA, prepare_kernel, rk4_advance
from jcdiss.dressed import SystemParams
from jcdiss.hilbert import QUBIT_E, SpaceSpec, fock_state
from jcdiss.lindblad import build_liouvillian
from jcdiss.propagate import default_time_step


def _best_of(repeats, fn):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_one(n_max, n_steps, repeats):
    params = SystemParams(
        omega0=100.0, omega=98.0, gamma=0.2, nbar_at_omega=0.2, g=1.0
    )
    spec = SpaceSpec(n_max)
    liouvillian = build_liouvillian("microscopic", params, spec)
    kdata = prepare_kernel(liouvillian, rotating=True)
    psi0 = fock_state(min(2, n_max - 2), QUBIT_E, spec)
    rho0 = np.outer(psi0, psi0.conj())
    dt, _cap = default_time_step(liouvillian, frame="rotating", kdata=kdata)

    results = {}
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    for backend in backends:
        # warm up (for numba this triggers JIT compilation)
        rk4_advance(kdata, rho0, dt, 2, backend=backend)
        results[backend] = {
            "time": _best_of(
                repeats,
                lambda b=backend: rk4_advance(kdata, rho0, dt, n_steps, backend=b),
            ),
            "state": rk4_advance(kdata, rho0, dt, n_steps, backend=backend),
        }

    agreement = None
    if "numba" in results:
        agreement = float(
            np.max(np.abs(results["numba"]["state"] - results["numpy"]["state"]))
        )
    return results, agreement


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--nmax", type=int, nargs="+", default=[8, 16, 24],
        help="field truncation levels to benchmark",
    )
    parser.add_argument(
        "--steps", type=int, default=400, help="RK4 steps per timed run"
    )
    parser.add_argument(
        "--repeats", type=int, default=3, help="repeats (best-of reported)"
    )
    args = parser.parse_args()

    if not HAVE_NUMBA:
        print(
            "compiled backend disabled (numba missing or JCDISS_PURE_NUMPY=1): "
            "benchmarking the numpy backend only."
        )
    print(
        f"{'n_max':>6} {'dim':>5} {'numpy us/step':>14} {'numba us/step':>14} "
        f"{'speedup':>8} {'max |diff|':>11}"
    )
    for n_max in args.nmax:
        results, agreement = bench_one(n_max, args.steps, args.repeats)
        dim = 2 * (n_max + 1)
        t_np = results["numpy"]["time"] / args.steps * 1e6
        if "numba" in results:
            t_nb = results["numba"]["time"] / args.steps * 1e6
            if agreement > 1e-10:
                raise SystemExit(
                    f"backend disagreement {agreement:.3e} at n_max={n_max}"
                )
            print(
                f"{n_max:>6} {dim:>5} {t_np:>14.1f} {t_nb:>14.1f} "
                f"{t_np / t_nb:>7.1f}x {agreement:>11.2e}"
            )
        else:
            print(f"{n_max:>6} {dim:>5} {t_np:>14.1f} {'-':>14} {'-':>8} {'-':>11}")


if __name__ == "__main__":
    main()
