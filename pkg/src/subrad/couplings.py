"""Coherent, dissipative and Zeeman coupling blocks and the assembled 3N x 3N operators.

Units: gamma = hbar = 1. Every 3x3 block is written in the ordered internal
basis (+1, 0, -1); the flat index of (site a, level slot s) is 3a + s.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .geometry import Geometry, PairFrame

LEVELS = (+1, 0, -1)
M0 = 1  # slot of the m = 0 level inside a site block

_S = 1.0 / math.sqrt(2.0)
# spin-1 matrices in the (+1, 0, -1) basis
JX = np.array([[0, _S, 0], [_S, 0, _S], [0, _S, 0]], dtype=complex)
JY = np.array([[0, -1j * _S, 0], [1j * _S, 0, -1j * _S], [0, 1j * _S, 0]], dtype=complex)
JZ = np.diag([1.0, 0.0, -1.0]).astype(complex)

BINARY_MAGIC = b"SUBRADOP"


class SingularGeometryError(ValueError):
    """Two distinct atoms share a position."""


class OperatorKind(str, enum.Enum):
    COHERENT = "V"
    DISSIPATIVE = "Gamma"
    ZEEMAN = "Delta"
    EFFECTIVE = "H_eff"


def level_index(site: int, m: int) -> int:
    return 3 * site + LEVELS.index(m)


def coefficients(kappa: float, theta: float, phi: float) -> dict:
    """The eight complex coefficients at one pair frame, keyed by name."""
    if not kappa > 0:
        raise ValueError("coefficients need kappa > 0")
    names = ("V11", "V10", "V00", "V+-", "G11", "G10", "G00", "G+-")
    return dict(zip(names, kernels.pair_coefficients(kappa, theta, phi)))


def v00(kappa, theta):
    """V00 coefficient (no 3/8 prefactor) for real arrays; phi does not enter."""
    kappa = np.asarray(kappa, dtype=float)
    theta = np.asarray(theta, dtype=float)
    a_term = np.sin(kappa) / kappa**2 + np.cos(kappa) / kappa**3
    return 2.0 * ((1.0 - 3.0 * np.cos(theta) ** 2) * a_term - np.sin(theta) ** 2 * np.cos(kappa) / kappa)


def coherent_block(frame: PairFrame) -> np.ndarray:
    if not frame.kappa > 0:
        raise ValueError("coherent self-coupling is excluded (kappa must be > 0)")
    c = kernels.pair_coefficients(frame.kappa, frame.theta, frame.phi)
    return 0.375 * kernels.block_from_coefficients(*c[:4])


def dissipative_block(frame: PairFrame | None) -> np.ndarray:
    """Dissipative block; ``None`` (or kappa == 0) is the self pair, whose limit is the identity."""
    if frame is None or frame.kappa == 0:
        return np.eye(3, dtype=complex)
    c = kernels.pair_coefficients(frame.kappa, frame.theta, frame.phi)
    return 0.75 * kernels.block_from_coefficients(*c[4:])


@dataclass(frozen=True)
class ZeemanField:
    """Uniform field with mu_B g already folded in, so components are energies in units of gamma.

    Components are taken in the geometry's quantization frame (e_x', e_y', axis).
    """

    b: tuple = (0.0, 0.0, 0.0)

    @classmethod
    def along_axis(cls, delta: float) -> "ZeemanField":
        return cls((0.0, 0.0, float(delta)))

    @property
    def delta(self) -> float:
        return float(np.linalg.norm(self.b))


def zeeman_block(field: ZeemanField) -> np.ndarray:
    bx, by, bz = (float(x) for x in field.b)
    return bx * JX + by * JY + bz * JZ


@dataclass(frozen=True)
class CouplingOperator:
    kind: OperatorKind
    matrix: np.ndarray

    def to_csv(self, path) -> None:
        write_operator_csv(self.matrix, path)

    def to_binary(self, path) -> None:
        write_operator_binary(self.matrix, path)


@dataclass(frozen=True)
class OperatorSet:
    v: np.ndarray
    gamma: np.ndarray
    zeeman: np.ndarray
    h_eff: np.ndarray

    @property
    def n(self) -> int:
        return self.v.shape[0] // 3

    def operator(self, kind: OperatorKind | str) -> CouplingOperator:
        kind = OperatorKind(kind)
        mat = {
            OperatorKind.COHERENT: self.v,
            OperatorKind.DISSIPATIVE: self.gamma,
            OperatorKind.ZEEMAN: self.zeeman,
            OperatorKind.EFFECTIVE: self.h_eff,
        }[kind]
        return CouplingOperator(kind, mat)

    def m0_sector(self):
        """(V, Gamma) restricted to the m = 0 levels."""
        sl = slice(M0, None, 3)
        return self.v[sl, sl], self.gamma[sl, sl]


def _check_distinct(positions: np.ndarray) -> None:
    n = positions.shape[0]
    if n < 2:
        return
    diff = positions[:, None, :] - positions[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    d2[np.arange(n), np.arange(n)] = 1.0
    if np.any(d2 == 0.0):
        i, j = np.argwhere(d2 == 0.0)[0]
        raise SingularGeometryError(f"atoms {i} and {j} coincide")


def assemble_vg(geometry: Geometry) -> tuple[np.ndarray, np.ndarray]:
    _check_distinct(geometry.positions)
    return kernels.assemble_vg(geometry.positions, *geometry.frame)


def assemble(geometry: Geometry, field: ZeemanField | None = None) -> OperatorSet:
    """Dense V, Gamma, Delta and H_eff = V - i Gamma / 2 + Delta."""
    v, g = assemble_vg(geometry)
    field = field or ZeemanField()
    dz = np.kron(np.eye(geometry.n), zeeman_block(field))
    return OperatorSet(v=v, gamma=g, zeeman=dz, h_eff=v - 0.5j * g + dz)


def noninteracting(geometry: Geometry, field: ZeemanField | None = None) -> OperatorSet:
    """Control operators with every inter-site block switched off."""
    n = geometry.n
    field = field or ZeemanField()
    dz = np.kron(np.eye(n), zeeman_block(field))
    v = np.zeros((3 * n, 3 * n), dtype=complex)
    g = np.eye(3 * n, dtype=complex)
    return OperatorSet(v=v, gamma=g, zeeman=dz, h_eff=v - 0.5j * g + dz)


# -- export -------------------------------------------------------------------

def write_operator_csv(matrix: np.ndarray, path) -> None:
    """One line per entry: row,col,re,im with 17 significant digits."""
    matrix = np.asarray(matrix, dtype=complex)
    rows, cols = np.indices(matrix.shape)
    with open(path, "w") as fh:
        fh.write("row,col,re,im\n")
        for r, c, z in zip(rows.ravel(), cols.ravel(), matrix.ravel()):
            fh.write(f"{r},{c},{z.real:.17g},{z.imag:.17g}\n")


def read_operator_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    dim = int(data[:, 0].max()) + 1
    out = np.zeros((dim, dim), dtype=complex)
    out[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2] + 1j * data[:, 3]
    return out


def write_operator_binary(matrix: np.ndarray, path) -> None:
    """Little-endian layout: 8-byte magic ``SUBRADOP``, uint64 dimension, then row-major complex128."""
    matrix = np.ascontiguousarray(matrix, dtype="<c16")
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("binary dump expects a square matrix")
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<Q", matrix.shape[0]))
        fh.write(matrix.tobytes(order="C"))


def read_operator_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != BINARY_MAGIC:
        raise ValueError("not a subrad operator dump")
    (dim,) = struct.unpack("<Q", raw[8:16])
    return np.frombuffer(raw[16:], dtype="<c16", count=dim * dim).reshape(dim, dim).copy()
