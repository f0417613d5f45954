"""Ring spectra, subradiant fraction, group velocity, and the magic / sign-flip angles.

Plane-wave convention on an N-site ring (sites 0..N-1):

    |k> = N^{-1/2} sum_a exp(2 pi i a k / N) |a>,   k = -floor(N/2) .. floor((N-1)/2),

with lattice momentum p(k) a = 2 pi k / N. Superradiant modes sit at small |p|.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .couplings import M0, assemble, v00
from .geometry import Geometry, Topology


class NoRootError(ValueError):
    pass


@dataclass(frozen=True)
class ModeSpectrum:
    k: np.ndarray
    energies: np.ndarray
    decay_rates: np.ndarray
    a_over_lambda: float

    @property
    def n(self) -> int:
        return self.k.size

    @property
    def momenta(self) -> np.ndarray:
        """p(k) in units of 1/a."""
        return 2.0 * np.pi * self.k / self.n

    @property
    def subradiant_mask(self) -> np.ndarray:
        return self.decay_rates < 1.0

    def index_of(self, k: int) -> int:
        hits = np.flatnonzero(self.k == k)
        if hits.size == 0:
            raise ValueError(f"k={k} is not a mode of this ring")
        return int(hits[0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "p_a_over_pi", "V_k", "Gamma_k", "subradiant"])
            for k, p, e, g, s in zip(self.k, self.momenta / np.pi, self.energies, self.decay_rates, self.subradiant_mask):
                w.writerow([int(k), f"{p:.17g}", f"{e:.17g}", f"{g:.17g}", int(s)])


def mode_indices(n: int) -> np.ndarray:
    return np.arange(-(n // 2), (n - 1) // 2 + 1)


def plane_waves(n: int) -> np.ndarray:
    """Unitary N x N matrix whose columns are the ring modes, ordered as ``mode_indices``."""
    sites = np.arange(n)
    return np.exp(2j * np.pi * np.outer(sites, mode_indices(n)) / n) / math.sqrt(n)


def k_for_momentum(n: int, p_over_pi: float) -> int:
    """Mode index closest to lattice momentum p = p_over_pi * pi / a."""
    return int(round(p_over_pi * n / 2.0))


def ring_spectrum_m0(geometry: Geometry) -> ModeSpectrum:
    """V_k and Gamma_k of the m = 0 sector from the first row of its circulant matrices."""
    if geometry.topology is not Topology.RING:
        raise ValueError("ring_spectrum_m0 needs a ring geometry")
    ops = assemble(geometry)
    v, g = ops.m0_sector()
    n = geometry.n
    ks = mode_indices(n)
    j = np.arange(n)
    # circulant C[a, b] = c[(b - a) mod N]  =>  eigenvalue sum_j c_j exp(2 pi i j k / N)
    phase = np.exp(2j * np.pi * np.outer(ks, j) / n)
    vk = phase @ v[0]
    gk = phase @ g[0]
    return ModeSpectrum(k=ks, energies=vk.real.copy(), decay_rates=gk.real.copy(), a_over_lambda=geometry.a_over_lambda)


def subradiant_fraction(spectrum: ModeSpectrum) -> float:
    return float(np.count_nonzero(spectrum.subradiant_mask)) / spectrum.n


def group_velocity(spectrum: ModeSpectrum, k_center: int) -> float:
    """dV/dp by central difference, in lattice sites per unit 1/gamma."""
    i = spectrum.index_of(k_center)
    if i == 0 or i == spectrum.n - 1:
        raise ValueError("group velocity is undefined at the zone edge")
    dp = spectrum.momenta[i + 1] - spectrum.momenta[i - 1]
    return float((spectrum.energies[i + 1] - spectrum.energies[i - 1]) / dp)


def _bisect(f, lo, hi):
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise NoRootError("no sign change in bracket")
    # run until the bracket cannot shrink any further
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return lo if abs(flo) <= abs(fhi) else hi


def magic_angle(kappa_nn: float) -> float:
    """Angle in (0, pi/2] at which the nearest-neighbour V00 vanishes."""
    if not kappa_nn > 0:
        raise ValueError("kappa_nn must be positive")
    return _bisect(lambda th: float(v00(kappa_nn, th)), 0.0, 0.5 * np.pi)


@dataclass(frozen=True)
class SignFlip:
    theta: float
    v00: float
    target: float
    exact: bool


def sign_flip_angle(kappa_nn: float) -> SignFlip:
    """Angle below the magic angle where V00 equals -V00(pi/2), or the closest attainable one."""
    target = -float(v00(kappa_nn, 0.5 * np.pi))
    theta_f = magic_angle(kappa_nn)

    def f(th):
        return float(v00(kappa_nn, th)) - target

    try:
        th = _bisect(f, 0.0, theta_f)
        exact = True
    except NoRootError:
        grid = np.linspace(0.0, theta_f, 2001)
        th = float(grid[np.argmin(np.abs([f(x) for x in grid]))])
        exact = False
    return SignFlip(theta=th, v00=float(v00(kappa_nn, th)), target=target, exact=exact)
