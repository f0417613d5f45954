"""Single-excitation states and their evolution under H_eff.

Two engines solve dc/dt = -i H_eff c: ``"spectral"`` (eigendecomposition of the
frozen operator, the reference for time-independent pieces) and ``"rk4"``
(fixed-step fourth-order Runge-Kutta with step halving). The truncated
density-matrix integrator is an independent oracle for both.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .couplings import JX, JY, JZ, LEVELS, OperatorSet, ZeemanField, assemble
from .geometry import Geometry, Topology
from .schedule import FieldSchedule, axis_for_theta
from .spectral import mode_indices, plane_waves

log = logging.getLogger(__name__)

ENGINES = ("spectral", "rk4")
# RK4 starts from h * ||H||_inf = STEP_SAFETY and halves until the end state settles.
STEP_SAFETY = 0.05
STEP_TOL = 1e-10
MAX_HALVINGS = 10


class IntegratorDivergence(RuntimeError):
    pass


class InvalidConfig(ValueError):
    pass


@dataclass
class ExcitationState:
    amplitudes: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size % 3:
            raise ValueError("amplitude vector length must be 3N")

    @property
    def n(self) -> int:
        return self.amplitudes.size // 3

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def level(self, m: int) -> np.ndarray:
        return self.amplitudes[LEVELS.index(m)::3]


@dataclass
class EvolutionResult:
    times: np.ndarray
    amplitudes: np.ndarray  # (T, 3N)
    activity: np.ndarray  # c^dag Gamma(t) c with the operator in force at each sample
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def survival(self) -> np.ndarray:
        return np.einsum("ti,ti->t", self.amplitudes.conj(), self.amplitudes).real

    @property
    def level_populations(self) -> np.ndarray:
        """(T, N, 3) populations |c_a^m|^2 in (+1, 0, -1) order."""
        t = self.times.size
        return (np.abs(self.amplitudes) ** 2).reshape(t, -1, 3)

    @property
    def populations(self) -> np.ndarray:
        return self.level_populations.sum(axis=2)

    def state(self, i: int) -> ExcitationState:
        return ExcitationState(self.amplitudes[i].copy(), float(self.times[i]))

    @property
    def final(self) -> ExcitationState:
        return self.state(-1)


# -- initial states -----------------------------------------------------------------

def init_localized(geometry: Geometry, site: int, level: int = 0) -> ExcitationState:
    if not 0 <= site < geometry.n:
        raise IndexError(f"site {site} out of range for N={geometry.n}")
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    c = np.zeros(3 * geometry.n, dtype=complex)
    c[3 * site + LEVELS.index(level)] = 1.0
    return ExcitationState(c)


def gaussian_momentum_amplitudes(n: int, k_center: int, sigma_k: float) -> np.ndarray:
    """Unnormalised weights exp(-(p - p_s)^2 / (4 sigma_k^2)) over the ring modes; p, sigma in 1/a."""
    p = 2.0 * np.pi * mode_indices(n) / n
    ps = 2.0 * np.pi * k_center / n
    return np.exp(-((p - ps) ** 2) / (4.0 * sigma_k**2))


def init_gaussian_packet(geometry: Geometry, k_center: int, sigma_k: float, level: int = 0) -> ExcitationState:
    """Gaussian packet over the ring modes, normalised to exactly one on the finite zone."""
    if geometry.topology is not Topology.RING:
        raise ValueError("Gaussian packets are defined on a ring")
    if not sigma_k > 0:
        raise ValueError("sigma_k must be positive")
    n = geometry.n
    if k_center not in mode_indices(n):
        raise ValueError(f"k_center={k_center} outside the zone")
    ck = gaussian_momentum_amplitudes(n, k_center, sigma_k)
    # weight the zone would lose against an unbounded momentum line
    p_ext = 2.0 * np.pi * np.arange(-20 * n, 20 * n + 1) / n
    ps = 2.0 * np.pi * k_center / n
    w_ext = np.exp(-((p_ext - ps) ** 2) / (2.0 * sigma_k**2)).sum()
    lost = 1.0 - float(np.sum(ck**2)) / w_ext
    if lost > 0.01:
        warnings.warn(f"zone edges truncate {lost:.1%} of the packet weight", RuntimeWarning, stacklevel=2)
    site_amp = plane_waves(n) @ ck
    site_amp /= np.linalg.norm(site_amp)
    c = np.zeros(3 * n, dtype=complex)
    c[LEVELS.index(level)::3] = site_amp
    return ExcitationState(c)


# -- propagation of a frozen operator ---------------------------------------------------

class _Spectral:
    """exp(-i H t) via eigendecomposition, falling back to expm for ill-conditioned bases."""

    def __init__(self, h: np.ndarray):
        self.h = h
        w, r = np.linalg.eig(h)
        cond = np.linalg.cond(r)
        self.ok = np.isfinite(cond) and cond < 1e8
        if self.ok:
            self.w = w
            self.r = r
            self.r_inv = np.linalg.inv(r)
        self.cond = float(cond)

    def apply(self, c: np.ndarray, dts: np.ndarray) -> np.ndarray:
        dts = np.atleast_1d(dts)
        if self.ok:
            b = self.r_inv @ c
            return (self.r @ (np.exp(-1j * np.outer(dts, self.w)) * b).T).T
        out = np.empty((dts.size, c.size), dtype=complex)
        prev, cur = 0.0, c
        for i, dt in enumerate(dts):
            cur = scipy.linalg.expm(-1j * self.h * (dt - prev)) @ cur
            out[i] = cur
            prev = dt
        return out


def _rk4_controlled(h: np.ndarray, c0: np.ndarray, times: np.ndarray, tol: float = STEP_TOL):
    """Fixed-step RK4 on the sample grid; halve the step until the end state moves by < tol."""
    hnorm = float(np.abs(h).sum(axis=1).max())
    if not math.isfinite(hnorm):
        raise IntegratorDivergence("non-finite generator")
    if hnorm == 0.0:
        return np.repeat(c0[None, :], times.size, axis=0), {"step": math.inf, "halvings": 0, "change": 0.0}
    step = STEP_SAFETY / hnorm
    prev = kernels.rk4_sampled(h, c0, times, step)
    for halving in range(1, MAX_HALVINGS + 1):
        step *= 0.5
        cur = kernels.rk4_sampled(h, c0, times, step)
        if not np.all(np.isfinite(cur)):
            raise IntegratorDivergence("non-finite amplitudes in RK4")
        change = float(np.linalg.norm(cur[-1] - prev[-1]))
        if change < tol:
            return cur, {"step": step, "halvings": halving, "change": change}
        prev = cur
    raise IntegratorDivergence(f"RK4 did not settle after {MAX_HALVINGS} halvings (last change {change:.2e})")


def _propagate(h: np.ndarray, c0: np.ndarray, dts: np.ndarray, engine: str, diag: dict) -> np.ndarray:
    """States at offsets ``dts`` (> 0, increasing) from ``c0`` under the frozen ``h``."""
    if engine == "spectral":
        prop = _Spectral(h)
        diag.setdefault("eig_condition", []).append(prop.cond)
        out = prop.apply(c0, dts)
    elif engine == "rk4":
        grid = np.concatenate([[0.0], dts])
        states, info = _rk4_controlled(h, c0, grid)
        diag.setdefault("rk4_steps", []).append(info["step"])
        diag.setdefault("rk4_change", []).append(info["change"])
        out = states[1:]
    else:
        raise InvalidConfig(f"unknown engine {engine!r}; pick one of {ENGINES}")
    if not np.all(np.isfinite(out)):
        raise IntegratorDivergence("non-finite amplitudes")
    return out


def _sample_grid(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("need a 1-d array of sample times")
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    return times


def evolve_const(state: ExcitationState, h_eff: np.ndarray, times, gamma: np.ndarray | None = None,
                 engine: str = "spectral") -> EvolutionResult:
    """Evolve under a time-independent H_eff, sampling at ``times`` (all >= state.t)."""
    times = _sample_grid(times)
    if times[0] < state.t:
        raise ValueError("sample times must not precede the state time")
    h_eff = np.asarray(h_eff, dtype=complex)
    if gamma is None:
        gamma = 1j * (h_eff - h_eff.conj().T)
    diag = {"engine": engine}
    dts = times - state.t
    out = np.empty((times.size, state.amplitudes.size), dtype=complex)
    start = 0
    if dts[0] == 0.0:
        out[0] = state.amplitudes
        start = 1
    if start < times.size:
        out[start:] = _propagate(h_eff, state.amplitudes, dts[start:], engine, diag)
    act = np.einsum("ti,ij,tj->t", out.conj(), gamma, out).real
    return EvolutionResult(times, out, act, diag)


# -- scheduled fields ------------------------------------------------------------------------

class OperatorCache:
    """Operators rebuilt from (theta, Delta) for a fixed set of positions."""

    def __init__(self, geometry: Geometry, operator_fn=None):
        self.geometry = geometry
        self._fn = operator_fn or (lambda geo, field: assemble(geo, field))
        self._cache: dict = {}

    def __call__(self, theta: float, delta: float) -> OperatorSet:
        key = (float(theta), float(delta))
        ops = self._cache.get(key)
        if ops is None:
            geo = self.geometry.with_axis(axis_for_theta(theta))
            ops = self._fn(geo, ZeemanField.along_axis(delta))
            if len(self._cache) < 4096:
                self._cache[key] = ops
        return ops


def evolve_scheduled(state: ExcitationState, geometry: Geometry, schedule: FieldSchedule, times,
                     engine: str = "spectral", dt_rebuild: float | None = None,
                     frame_rotation: bool = True, operator_fn=None) -> EvolutionResult:
    """Evolve with H_eff(t) rebuilt from the scheduled axis angle and Zeeman splitting.

    Amplitudes are expressed in the basis that co-rotates with the quantization
    axis. With ``frame_rotation`` the generator of that rotation, dtheta/dt * J_x
    on every site, is added during ramps; without it the state is assumed to
    follow the axis perfectly.
    """
    times = _sample_grid(times)
    if times[0] < state.t or times[-1] > schedule.t_end + 1e-12 or state.t < schedule.t_start - 1e-12:
        raise ValueError("sample times must lie inside the schedule")
    if engine == "rk4" and dt_rebuild is not None:
        hmax = 0.0
        for ramp in schedule.ramps():
            ops = OperatorCache(geometry, operator_fn)(ramp.theta_start, ramp.delta)
            hmax = max(hmax, float(np.abs(ops.h_eff).sum(axis=1).max()))
        if hmax and dt_rebuild < STEP_SAFETY / hmax:
            raise InvalidConfig("rebuild interval is shorter than the integrator step")
    ops_at = OperatorCache(geometry, operator_fn)
    jx = np.kron(np.eye(geometry.n), JX)
    diag = {"engine": engine, "pieces": 0, "frame_rotation": frame_rotation}
    m = state.amplitudes.size
    out = np.empty((times.size, m), dtype=complex)
    act = np.empty(times.size)
    c, t = state.amplitudes.copy(), state.t
    idx = 0
    for t0, t1, theta, rate, delta in schedule.pieces(dt_rebuild):
        if t1 <= t:
            continue
        ops = ops_at(theta, delta)
        h = ops.h_eff + rate * jx if (frame_rotation and rate) else ops.h_eff
        while idx < times.size and times[idx] == t:
            out[idx] = c
            act[idx] = np.vdot(c, ops.gamma @ c).real
            idx += 1
        last_piece = t1 >= schedule.t_end - 1e-12
        j = idx
        while j < times.size and (times[j] < t1 or (last_piece and times[j] <= t1 + 1e-12)):
            j += 1
        offsets = np.concatenate([times[idx:j] - t, [t1 - t]])
        if offsets[-1] <= 0:
            offsets = offsets[:-1]
        states = _propagate(h, c, offsets, engine, diag) if offsets.size else np.empty((0, m))
        n_samp = j - idx
        for s in range(n_samp):
            out[idx + s] = states[s]
            act[idx + s] = np.vdot(states[s], ops.gamma @ states[s]).real
        idx = j
        if states.shape[0] > n_samp:
            c = states[-1]
        elif n_samp:
            c = states[n_samp - 1]
        t = t1
        diag["pieces"] += 1
        if idx >= times.size:
            break
    if idx < times.size:
        raise ValueError("schedule ended before the last sample time")
    diag["theta"] = np.array([schedule.theta(x) for x in times])
    return EvolutionResult(times, out, act, diag)


def evolve_lab_frame(state: ExcitationState, geometry: Geometry, schedule: FieldSchedule, times,
                     dt_rebuild: float | None = None) -> EvolutionResult:
    """Reference evolution with fixed positions and axis and a physically rotating B field.

    Returned amplitudes are mapped back into the co-rotating basis so they are
    directly comparable with :func:`evolve_scheduled`.
    """
    base = assemble(geometry.with_axis(axis_for_theta(0.5 * math.pi)))
    n = geometry.n

    def lab_ops(geo, field):
        # geo.axis is the field direction in lab coordinates
        b = field.delta * geo.axis
        dz = np.kron(np.eye(n), b[0] * JX + b[1] * JY + b[2] * JZ)
        return OperatorSet(v=base.v, gamma=base.gamma, zeeman=dz, h_eff=base.v - 0.5j * base.gamma + dz)

    res = evolve_scheduled(to_lab(state, schedule.theta(state.t)), geometry, schedule, times,
                           dt_rebuild=dt_rebuild, frame_rotation=False, operator_fn=lab_ops)
    rot = np.array([to_rotating(a, schedule.theta(t)) for a, t in zip(res.amplitudes, res.times)])
    return EvolutionResult(res.times, rot, res.activity, res.diagnostics)


def _site_rotation(n: int, theta: float) -> np.ndarray:
    chi = 0.5 * math.pi - theta
    return np.kron(np.eye(n), scipy.linalg.expm(-1j * chi * JX))


def to_lab(state: ExcitationState, theta: float) -> ExcitationState:
    """Co-rotating amplitudes at axis angle theta -> lab (axis +z) amplitudes."""
    return ExcitationState(_site_rotation(state.n, theta) @ state.amplitudes, state.t)


def to_rotating(amplitudes: np.ndarray, theta: float) -> np.ndarray:
    n = amplitudes.size // 3
    return _site_rotation(n, theta).conj().T @ amplitudes


# -- truncated density matrix oracle ---------------------------------------------------------

@dataclass
class TruncatedDensityMatrix:
    rho_gg: complex
    rho_ge: np.ndarray
    rho_eg: np.ndarray
    rho_ee: np.ndarray

    @classmethod
    def from_pure(cls, state: ExcitationState) -> "TruncatedDensityMatrix":
        c = state.amplitudes
        m = c.size
        return cls(0.0 + 0j, np.zeros(m, complex), np.zeros(m, complex), np.outer(c, c.conj()))

    @property
    def trace(self) -> float:
        return float((self.rho_gg + np.trace(self.rho_ee)).real)


@dataclass
class DensityEvolution:
    times: np.ndarray
    rho_gg: np.ndarray
    rho_ge: np.ndarray
    rho_eg: np.ndarray
    rho_ee: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def trace(self) -> np.ndarray:
        return (self.rho_gg + np.einsum("tii->t", self.rho_ee)).real


def evolve_density_oracle(initial: TruncatedDensityMatrix, operators: OperatorSet, times,
                          tol: float = 1e-11) -> DensityEvolution:
    """Integrate all four blocks of the truncated density matrix, written component by component.

    Uses V, Gamma and the on-site Zeeman block directly (never H_eff). RK4 with
    step halving until the final excited block moves by less than ``tol``.
    """
    times = _sample_grid(times)
    dz = operators.zeeman[:3, :3]
    n = operators.n
    if not np.allclose(operators.zeeman, np.kron(np.eye(n), dz), atol=0):
        raise ValueError("the oracle expects a uniform on-site Zeeman block")
    hnorm = float(np.abs(operators.v - 0.5j * operators.gamma + operators.zeeman).sum(axis=1).max())
    if not math.isfinite(hnorm):
        raise IntegratorDivergence("non-finite generator")
    step = STEP_SAFETY / max(hnorm, 1e-300)
    args = (operators.v, operators.gamma, dz, initial.rho_gg, initial.rho_ge, initial.rho_eg, initial.rho_ee, times)
    prev = kernels.density_rk4(*args, step)
    for halving in range(1, MAX_HALVINGS + 1):
        step *= 0.5
        cur = kernels.density_rk4(*args, step)
        change = float(np.linalg.norm(cur[3][-1] - prev[3][-1]))
        if not all(np.all(np.isfinite(x)) for x in cur):
            raise IntegratorDivergence("non-finite density matrix")
        if change < tol:
            return DensityEvolution(times, *cur, diagnostics={"step": step, "halvings": halving, "change": change})
        prev = cur
    raise IntegratorDivergence("density-matrix RK4 did not settle")
