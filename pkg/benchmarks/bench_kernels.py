"""Numba vs pure-numpy timings for the hot kernels.

    python benchmarks/bench_kernels.py [--n 51] [--repeat 5]

Both variants are called in the same process; the first numba call is a
warm-up and is excluded from the timings.
"""

import argparse
import timeit

import numpy as np

from subrad import kernels
from subrad.couplings import assemble
from subrad.geometry import build_chain, build_ring


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=51)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.assemble_vg_numba is None:
        raise SystemExit("numba is not importable; nothing to compare")

    geo = build_ring(args.n, 0.08)
    e1, e2, e3 = geo.frame
    pos = np.ascontiguousarray(geo.positions)
    rows = []

    kernels.assemble_vg_numba(pos, e1, e2, e3)
    t_nb = best_of(lambda: kernels.assemble_vg_numba(pos, e1, e2, e3), args.repeat)
    t_np = best_of(lambda: kernels.assemble_vg_numpy(pos, e1, e2, e3), args.repeat)
    err = max(np.abs(a - b).max() for a, b in zip(kernels.assemble_vg_numba(pos, e1, e2, e3),
                                                  kernels.assemble_vg_numpy(pos, e1, e2, e3)))
    rows.append((f"assemble V,Gamma (N={args.n})", t_nb, t_np, err))

    h = assemble(geo).h_eff
    c0 = np.zeros(h.shape[0], complex)
    c0[1] = 1.0
    times = np.linspace(0.0, 0.5, 11)
    h_max = 0.05 / np.abs(h).sum(axis=1).max()
    kernels.rk4_sampled_numba(h, c0, times, h_max)
    t_nb = best_of(lambda: kernels.rk4_sampled_numba(h, c0, times, h_max), args.repeat)
    t_np = best_of(lambda: kernels.rk4_sampled_numpy(h, c0, times, h_max), args.repeat)
    err = np.abs(kernels.rk4_sampled_numba(h, c0, times, h_max) - kernels.rk4_sampled_numpy(h, c0, times, h_max)).max()
    rows.append((f"RK4 amplitudes (3N={h.shape[0]})", t_nb, t_np, err))

    small = assemble(build_chain(5, 0.08))
    m = small.v.shape[0]
    rho = np.zeros((m, m), complex)
    rho[1, 1] = 1.0
    z = np.zeros(m, complex)
    dz = small.zeeman[:3, :3]
    times = np.linspace(0.0, 1.0, 11)
    args_d = (small.v, small.gamma, dz, 0j, z, z, rho, times, 1e-3)
    kernels.density_rk4_numba(*args_d)
    t_nb = best_of(lambda: kernels.density_rk4_numba(*args_d), args.repeat)
    t_np = best_of(lambda: kernels.density_rk4_numpy(*args_d), args.repeat)
    err = np.abs(kernels.density_rk4_numba(*args_d)[3] - kernels.density_rk4_numpy(*args_d)[3]).max()
    rows.append((f"density RK4 (3N={m})", t_nb, t_np, err))

    print(f"{'kernel':<30s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, a, b, e in rows:
        print(f"{name:<30s} {a:10.4f} {b:10.4f} {b / a:8.1f} {e:10.1e}")


if __name__ == "__main__":
    main()
