"""Compiled (numba) against numpy kernels on the same inputs.

    python benchmarks/bench_kernels.py --level 2 --repeat 5

Both implementations are always importable, so one process times both;
``DODECAWAVE_JIT`` only changes which one the library picks by default.
Compilation happens in a warm-up call that is not timed.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from dodecawave import kernels, spectral
from dodecawave.evolution import init_bump, init_preset
from dodecawave.fem import assemble, element_matrices
from dodecawave.mesh import build_mesh
from dodecawave.models import inflating


def best_of(func, repeat: int) -> float:
    func()
    return min(timeit.repeat(func, number=1, repeat=repeat))


def cases(level: int, steps: int):
    mesh = build_mesh(level)
    mats = assemble(mesh)
    M, A = mats.M.tocsr(), mats.A.tocsr()
    abs_A = abs(A)
    inv_diag = 1.0 / M.diagonal()
    n = mats.n
    rng = np.random.default_rng(0)
    x = rng.standard_normal(n)
    b = M @ rng.standard_normal(n)
    work = [np.empty(n) for _ in range(4)]
    model = inflating()

    def matvec_nb():
        kernels.csr_matvec_nb(M.indptr, M.indices, M.data, x, work[0])

    def matvec_np():
        kernels.csr_matvec_np(M, x)

    def pcg_nb():
        kernels.pcg_nb(M.indptr, M.indices, M.data, inv_diag, b, np.zeros(n), 1e-12, 500, *work)

    def pcg_np():
        kernels.pcg_np(M, inv_diag, b, np.zeros(n), 1e-12, 500)

    U0 = init_bump(mesh, init_preset("init1"))

    def advance_nb():
        U, D, Z = U0.copy(), np.zeros(n), np.zeros((kernels.HISTORY, n))
        kernels.advance_nb(M.indptr, M.indices, M.data, A.indptr, A.indices, A.data, inv_diag,
                           U, D, Z, 0, 0, steps, 1.5, 1.5e-4, model.code, model.H, 1e-12, 500)

    def advance_np():
        U, D, Z = U0.copy(), np.zeros(n), np.zeros((kernels.HISTORY, n))
        kernels.advance_np(M, A, abs_A, inv_diag, U, D, Z, 0, 0, steps, 1.5, 1.5e-4, model, 1e-12, 500)

    q2 = np.array([lab.q2 for lab in spectral.eigen_betas(201)], dtype=float)
    u0 = rng.standard_normal(len(q2))

    def rk4_nb():
        spectral._rk4_nb(model.code, model.H, q2, u0, u0, 0.0, 1e-3, 2000, 100)

    def rk4_np():
        spectral._rk4_np(model, q2, u0, u0, 0.0, 1e-3, 2000, 100)

    return [
        ("csr matvec", matvec_nb, matvec_np),
        ("pcg solve (cold start)", pcg_nb, pcg_np),
        (f"advance {steps} steps", advance_nb, advance_np),
        ("element matrices", lambda: element_matrices(mesh, use_jit=True),
         lambda: element_matrices(mesh, use_jit=False)),
        (f"mode RK4 ({len(q2)} labels)", rk4_nb, rk4_np),
    ], n


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--level", type=int, default=2)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--steps", type=int, default=200)
    args = parser.parse_args(argv)
    rows, n = cases(args.level, args.steps)
    print(f"level {args.level}, {n} unknowns, best of {args.repeat}")
    print(f"{'kernel':<24}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, fast, slow in rows:
        t_nb = best_of(fast, args.repeat)
        t_np = best_of(slow, args.repeat)
        print(f"{name:<24}{1e3 * t_nb:>12.3f}{1e3 * t_np:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
