"""Piecewise-linear field schedules: quantization-axis angle theta(t) and Zeeman splitting Delta(t).

``theta`` is the angle between the quantization axis and the bond vector
r_a - r_{a+1} of a chain laid along +y. The axis tilts inside the yz-plane,
``axis = (0, -sin(chi), cos(chi))`` with ``chi = pi/2 - theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import axis_in_yz


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    theta_start: float
    theta_end: float
    delta: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def is_constant(self) -> bool:
        return self.theta_start == self.theta_end

    @property
    def rate(self) -> float:
        return (self.theta_end - self.theta_start) / self.duration

    def theta(self, t: float) -> float:
        s = (t - self.t_start) / self.duration
        return self.theta_start + s * (self.theta_end - self.theta_start)


@dataclass(frozen=True)
class FieldSchedule:
    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("schedule needs at least one segment")
        for s in segs:
            if not s.t_end > s.t_start:
                raise ValueError(f"segment times must increase: {s}")
            if s.delta < 0:
                raise ValueError("Zeeman splitting must be non-negative")
        for a, b in zip(segs, segs[1:]):
            if not math.isclose(a.t_end, b.t_start, rel_tol=0, abs_tol=1e-12):
                raise ValueError("segments must be contiguous")
            if not math.isclose(a.theta_end, b.theta_start, rel_tol=0, abs_tol=1e-12):
                raise ValueError("theta must be continuous across segments")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, theta: float, delta: float, t_end: float, t_start: float = 0.0) -> "FieldSchedule":
        return cls((Segment(t_start, t_end, theta, theta, delta),))

    @classmethod
    def switches(cls, theta0, delta, t_end, switches, t_start=0.0) -> "FieldSchedule":
        """Hold ``theta0``, then for each ``(t_on, tau, theta_target)`` ramp linearly and hold."""
        segs = []
        t, th = t_start, theta0
        for t_on, tau, target in switches:
            if t_on > t:
                segs.append(Segment(t, t_on, th, th, delta))
            elif t_on < t:
                raise ValueError("switch times must be increasing and non-overlapping")
            segs.append(Segment(t_on, t_on + tau, th, target, delta))
            t, th = t_on + tau, target
        if t_end > t:
            segs.append(Segment(t, t_end, th, th, delta))
        return cls(tuple(segs))

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    def segment_at(self, t: float) -> Segment:
        for s in self.segments:
            if t < s.t_end:
                return s
        return self.segments[-1]

    def theta(self, t: float) -> float:
        return self.segment_at(t).theta(t)

    def delta(self, t: float) -> float:
        return self.segment_at(t).delta

    def ramps(self):
        return [s for s in self.segments if not s.is_constant]

    def pieces(self, dt_rebuild: float | None = None):
        """Split into frozen-operator pieces ``(t0, t1, theta_mid, dtheta_dt, delta)``.

        Constant segments stay whole. Ramps are cut into sub-intervals no longer
        than ``dt_rebuild`` (default: duration / 200) evaluated at their midpoint.
        """
        out = []
        for s in self.segments:
            if s.is_constant:
                out.append((s.t_start, s.t_end, s.theta_start, 0.0, s.delta))
                continue
            step = dt_rebuild if dt_rebuild is not None else s.duration / 200.0
            nsub = max(1, int(math.ceil(s.duration / step - 1e-9)))
            edges = np.linspace(s.t_start, s.t_end, nsub + 1)
            for t0, t1 in zip(edges[:-1], edges[1:]):
                out.append((float(t0), float(t1), s.theta(0.5 * (t0 + t1)), s.rate, s.delta))
        return out


def axis_for_theta(theta: float) -> np.ndarray:
    return axis_in_yz(0.5 * math.pi - theta)
