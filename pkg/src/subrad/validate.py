"""Small-N self-checks: operator identities, spectra, and the density-matrix oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .couplings import ZeemanField, assemble
from .dynamics import ExcitationState, TruncatedDensityMatrix, evolve_const, evolve_density_oracle
from .geometry import Geometry, Topology, build_chain, build_ring, realization_rng
from .spectral import plane_waves, ring_spectrum_m0


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<44s} {self.value:.3e} (limit {self.limit:.0e})"


def _random_geometry(rng, n: int) -> Geometry:
    while True:
        pos = rng.uniform(-0.3, 0.3, size=(n, 3))
        d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
        if n == 1 or d[np.triu_indices(n, 1)].min() > 0.02:
            break
    axis = rng.normal(size=3)
    return Geometry(pos, Topology.CHAIN, 0.1, axis / np.linalg.norm(axis))


def _random_state(rng, m: int) -> ExcitationState:
    c = rng.normal(size=m) + 1j * rng.normal(size=m)
    return ExcitationState(c / np.linalg.norm(c))


def check_operator_identities(count: int = 50, seed: int = 7, corrupt_gamma: bool = False) -> list[Check]:
    herm = psd = 0.0
    diag_g = diag_v = 0.0
    for i in range(count):
        rng = realization_rng(seed, i)
        geo = _random_geometry(rng, int(rng.integers(1, 9)))
        ops = assemble(geo, ZeemanField(rng.normal(size=3)))
        g = -ops.gamma if corrupt_gamma else ops.gamma
        for mat in (ops.v, g, ops.zeeman):
            herm = max(herm, float(np.abs(mat - mat.conj().T).max()))
        ev = np.linalg.eigvalsh(g)
        psd = max(psd, float(-ev.min() / max(np.abs(ev).max(), 1e-300)))
        for a in range(geo.n):
            blk = slice(3 * a, 3 * a + 3)
            diag_g = max(diag_g, float(np.abs(g[blk, blk] - np.eye(3)).max()))
            diag_v = max(diag_v, float(np.abs(ops.v[blk, blk]).max()))
    return [
        Check("hermiticity of V, Gamma, Delta", herm <= 1e-12, herm, 1e-12),
        Check("Gamma positive semidefinite", psd <= 1e-10, psd, 1e-10),
        Check("Gamma on-site blocks equal identity", diag_g == 0.0, diag_g, 0.0),
        Check("V on-site blocks vanish", diag_v == 0.0, diag_v, 0.0),
    ]


def check_density_oracle(sizes=(1, 2, 3, 5), seed: int = 11, t_final: float = 2.0) -> list[Check]:
    times = np.linspace(0.0, t_final, 21)
    frob = trace = 0.0
    for n in sizes:
        rng = realization_rng(seed, n)
        geo = _random_geometry(rng, n)
        ops = assemble(geo, ZeemanField(rng.normal(size=3)))
        psi = _random_state(rng, 3 * n)
        pure = evolve_const(psi, ops.h_eff, times)
        rho = evolve_density_oracle(TruncatedDensityMatrix.from_pure(psi), ops, times)
        for c, r in zip(pure.amplitudes, rho.rho_ee):
            frob = max(frob, float(np.linalg.norm(r - np.outer(c, c.conj()))))
        trace = max(trace, float(np.abs(rho.trace - 1.0).max()))
    return [
        Check("density oracle vs H_eff (Frobenius)", frob <= 1e-8, frob, 1e-8),
        Check("density oracle trace conservation", trace <= 1e-8, trace, 1e-8),
    ]


def check_ring_spectra(sizes=(2, 3, 4, 5, 7, 8, 12), a_over_lambda: float = 0.08) -> list[Check]:
    eig_err = resid = trace = 0.0
    for n in sizes:
        geo = build_ring(n, a_over_lambda)
        spec = ring_spectrum_m0(geo)
        v, g = assemble(geo).m0_sector()
        eig_err = max(eig_err, float(np.abs(np.sort(spec.energies) - np.linalg.eigvalsh(v)).max()),
                      float(np.abs(np.sort(spec.decay_rates) - np.linalg.eigvalsh(g)).max()))
        u = plane_waves(n)
        resid = max(resid, float(np.abs(v @ u - u * spec.energies).max()),
                    float(np.abs(g @ u - u * spec.decay_rates).max()))
        trace = max(trace, abs(float(spec.decay_rates.sum()) - n))
    return [
        Check("ring DFT spectrum vs dense eigenvalues", eig_err <= 1e-10, eig_err, 1e-10),
        Check("plane-wave eigen-residual", resid <= 1e-10, resid, 1e-10),
        Check("sum of ring decay rates equals N", trace <= 1e-10, trace, 1e-10),
    ]


def check_single_atom(t_final: float = 10.0) -> list[Check]:
    geo = build_chain(1, 0.1)
    ops = assemble(geo)
    times = np.linspace(0.0, t_final, 1001)
    worst = 0.0
    for level in range(3):
        c = np.zeros(3, complex)
        c[level] = 1.0
        res = evolve_const(ExcitationState(c), ops.h_eff, times)
        worst = max(worst, float(np.abs(res.survival / np.exp(-times) - 1.0).max()))
    return [Check("single atom P_sur = exp(-t) (relative)", worst <= 1e-6, worst, 1e-6)]


def run_all(corrupt_gamma: bool = False) -> list[Check]:
    return (check_operator_identities(corrupt_gamma=corrupt_gamma) + check_density_oracle()
            + check_ring_spectra() + check_single_atom())
