"""Atom positions for rings and open chains, pair frames, and positional disorder.

All lengths are in units of the transition wavelength. The quantization axis
belongs to the geometry; positions never rotate, the axis does.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

Z_AXIS = np.array([0.0, 0.0, 1.0])


class Topology(str, enum.Enum):
    RING = "ring"
    CHAIN = "chain"


@dataclass(frozen=True)
class PairFrame:
    """Reduced distance and orientation of r_alpha - r_beta relative to the quantization axis."""

    kappa: float
    theta: float
    phi: float


def rotation_taking_z_to(axis: np.ndarray) -> np.ndarray:
    """Smallest rotation mapping +z onto ``axis`` (Rodrigues).

    Rotating the lab x and y axes with it gives the transverse reference frame
    in which azimuths are measured. For an axis in the yz-plane this is a pure
    rotation about x.
    """
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    c = float(n @ Z_AXIS)
    s2 = n[0] * n[0] + n[1] * n[1]
    if s2 == 0.0 and c < 0:
        return np.diag([1.0, -1.0, -1.0])
    # 1 + c written without cancellation for near-antiparallel axes
    one_plus_c = 1.0 + c if c >= 0 else s2 / (1.0 - c)
    k = np.cross(Z_AXIS, n)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + kx + kx @ kx / one_plus_c


def axis_in_yz(chi: float) -> np.ndarray:
    """Quantization axis tilted from +z by ``chi`` through a rotation about +x."""
    return np.array([0.0, -math.sin(chi), math.cos(chi)])


@dataclass(frozen=True)
class Geometry:
    positions: np.ndarray
    topology: Topology
    a_over_lambda: float
    axis: np.ndarray = field(default_factory=lambda: Z_AXIS.copy())

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 3)
        if pos.shape[0] < 1:
            raise ValueError("geometry needs at least one atom")
        if not np.all(np.isfinite(pos)):
            raise ValueError("atom positions must be finite")
        if not self.a_over_lambda > 0:
            raise ValueError("a/lambda must be positive")
        ax = np.array(self.axis, dtype=float).reshape(3)
        norm = np.linalg.norm(ax)
        if not norm > 0:
            raise ValueError("quantization axis must be non-zero")
        ax = ax / norm
        pos.setflags(write=False)
        ax.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "axis", ax)
        object.__setattr__(self, "topology", Topology(self.topology))

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def frame(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Orthonormal (e_x', e_y', axis) triad used to measure pair angles."""
        rot = rotation_taking_z_to(self.axis)
        return rot[:, 0], rot[:, 1], rot[:, 2]

    def with_axis(self, axis) -> "Geometry":
        return replace(self, axis=np.asarray(axis, dtype=float))

    def with_positions(self, positions) -> "Geometry":
        return replace(self, positions=np.asarray(positions, dtype=float))

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "topology": self.topology.value,
            "n": self.n,
            "a_over_lambda": self.a_over_lambda,
            "positions": self.positions.tolist(),
            "axis": self.axis.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Geometry":
        geo = cls(
            positions=np.asarray(doc["positions"], dtype=float),
            topology=Topology(doc["topology"]),
            a_over_lambda=float(doc["a_over_lambda"]),
            axis=np.asarray(doc.get("axis", [0.0, 0.0, 1.0]), dtype=float),
        )
        if "n" in doc and int(doc["n"]) != geo.n:
            raise ValueError(f"n={doc['n']} does not match {geo.n} positions")
        return geo

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load_json(cls, path) -> "Geometry":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _check(n, a_over_lambda, n_min):
    if int(n) != n or n < n_min:
        raise ValueError(f"N must be an integer >= {n_min}, got {n}")
    if not a_over_lambda > 0:
        raise ValueError(f"a/lambda must be positive, got {a_over_lambda}")


def ring_radius(n: int, a_over_lambda: float) -> float:
    """Circumradius giving nearest-neighbour chord length a."""
    return a_over_lambda / (2.0 * math.sin(math.pi / n))


def build_ring(n: int, a_over_lambda: float) -> Geometry:
    """N atoms on a circle in the xy-plane; site 0 sits on the +x axis."""
    _check(n, a_over_lambda, 2)
    radius = ring_radius(n, a_over_lambda)
    ang = 2.0 * np.pi * np.arange(n) / n
    pos = np.stack([radius * np.cos(ang), radius * np.sin(ang), np.zeros(n)], axis=1)
    return Geometry(pos, Topology.RING, float(a_over_lambda))


def build_chain(n: int, a_over_lambda: float) -> Geometry:
    """Open chain along +y starting at the origin."""
    _check(n, a_over_lambda, 1)
    y = a_over_lambda * np.arange(n)
    pos = np.stack([np.zeros(n), y, np.zeros(n)], axis=1)
    return Geometry(pos, Topology.CHAIN, float(a_over_lambda))


def pair_frame(geometry: Geometry, alpha: int, beta: int) -> PairFrame:
    n = geometry.n
    if not (0 <= alpha < n and 0 <= beta < n):
        raise IndexError(f"site index out of range for N={n}")
    if alpha == beta:
        raise ValueError("pair frame is undefined for alpha == beta")
    r = geometry.positions[alpha] - geometry.positions[beta]
    dist = float(np.linalg.norm(r))
    if dist == 0.0:
        raise ValueError(f"atoms {alpha} and {beta} coincide")
    e1, e2, e3 = geometry.frame
    theta = math.acos(max(-1.0, min(1.0, float(r @ e3) / dist)))
    phi = math.atan2(float(r @ e2), float(r @ e1)) % (2.0 * math.pi)
    return PairFrame(2.0 * math.pi * dist, theta, phi)


def realization_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent Philox stream for realization ``index`` of base ``seed``.

    Philox4x64-10 is counter based; the key comes from SeedSequence(seed,
    spawn_key=(index,)), so streams are reproducible on every platform.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def sample_disordered(geometry: Geometry, sigma_over_a: float, seed: int, index: int = 0) -> Geometry:
    """Displace every atom by an isotropic 3D Gaussian of per-component width sigma."""
    if not sigma_over_a >= 0:
        raise ValueError("sigma/a must be non-negative")
    if sigma_over_a == 0:
        return geometry
    rng = realization_rng(seed, index)
    sigma = sigma_over_a * geometry.a_over_lambda
    shift = rng.normal(0.0, sigma, size=geometry.positions.shape)
    return geometry.with_positions(geometry.positions + shift)
