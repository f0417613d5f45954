"""Survival probability, activity, packet moments, decay-rate fits and plateau detection."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .couplings import v00
from .dynamics import EvolutionResult, ExcitationState
from .geometry import Geometry, Topology

# Plateau: the log-derivative of P_sur has fallen below this rate (units of gamma).
PLATEAU_RATE = 1e-2
PLATEAU_MIN_DURATION = 0.5


class UndefinedMoments(ValueError):
    pass


def survival(state: ExcitationState) -> float:
    return state.norm2


def activity(state: ExcitationState, gamma: np.ndarray) -> float:
    c = state.amplitudes
    if gamma.shape != (c.size, c.size):
        raise ValueError(f"Gamma has shape {gamma.shape}, state needs {(c.size, c.size)}")
    return float(np.vdot(c, gamma @ c).real)


def packet_moments(populations: np.ndarray, geometry: Geometry) -> tuple[float, float]:
    """Population-weighted centre and RMS width in site units (sites counted from 0).

    Rings use circular statistics, so the centre lives in [0, N).
    """
    pop = np.asarray(populations, dtype=float)
    total = pop.sum()
    if not total > 0:
        raise UndefinedMoments("zero population")
    w = pop / total
    sites = np.arange(pop.size)
    if geometry.topology is Topology.RING:
        n = pop.size
        z = np.sum(w * np.exp(2j * np.pi * sites / n))
        if abs(z) < 1e-14:
            raise UndefinedMoments("circular mean undefined for a uniform ring population")
        center = (np.angle(z) * n / (2.0 * np.pi)) % n
        d = (sites - center + 0.5 * n) % n - 0.5 * n
        return float(center), float(math.sqrt(np.sum(w * d * d)))
    center = float(np.sum(w * sites))
    return center, float(math.sqrt(np.sum(w * (sites - center) ** 2)))


def ipr(populations: np.ndarray) -> float:
    p = np.asarray(populations, dtype=float)
    p = p / p.sum()
    return float(np.sum(p * p))


@dataclass
class TimeSeries:
    times: np.ndarray
    survival: np.ndarray
    activity: np.ndarray
    level_populations: np.ndarray  # (T, N, 3)
    center: np.ndarray  # unwrapped on rings
    width: np.ndarray
    topology: Topology = Topology.CHAIN
    meta: dict = field(default_factory=dict)

    @property
    def populations(self) -> np.ndarray:
        return self.level_populations.sum(axis=2)

    @property
    def n(self) -> int:
        return self.level_populations.shape[1]

    def index_at(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def window(self, t_a: float, t_b: float) -> slice:
        i = int(np.searchsorted(self.times, t_a, side="left"))
        j = int(np.searchsorted(self.times, t_b, side="right"))
        return slice(i, j)

    def to_csv(self, path) -> None:
        t = self.times.size
        n = self.n
        cols = ["t", "P_sur", "K"] + [f"pop_{a}_{m:+d}" for a in range(n) for m in (1, 0, -1)]
        data = np.column_stack([self.times, self.survival, self.activity, self.level_populations.reshape(t, 3 * n)])
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


def series_from(result: EvolutionResult, geometry: Geometry, meta: dict | None = None) -> TimeSeries:
    lp = result.level_populations
    pops = lp.sum(axis=2)
    centers = np.empty(result.times.size)
    widths = np.empty(result.times.size)
    for i, p in enumerate(pops):
        try:
            centers[i], widths[i] = packet_moments(p, geometry)
        except UndefinedMoments:
            centers[i], widths[i] = np.nan, np.nan
    if geometry.topology is Topology.RING:
        ok = np.isfinite(centers)
        phase = np.unwrap(centers[ok] * 2.0 * np.pi / geometry.n)
        centers[ok] = phase * geometry.n / (2.0 * np.pi)
    return TimeSeries(
        times=result.times.copy(),
        survival=result.survival,
        activity=result.activity.copy(),
        level_populations=lp,
        center=centers,
        width=widths,
        topology=geometry.topology,
        meta=dict(meta or {}),
    )


def activity_balance(times: np.ndarray, survival: np.ndarray, activity: np.ndarray) -> tuple[float, float]:
    """(max |dP/dt + K|, max K) using central differences at interior samples."""
    times = np.asarray(times)
    dp = np.gradient(survival, times)[1:-1]
    resid = np.abs(dp + activity[1:-1])
    return float(resid.max()), float(np.max(activity))


def effective_decay_rate(times: np.ndarray, survival: np.ndarray, window: tuple[float, float]) -> float:
    """Least-squares slope of -ln P_sur over ``window``."""
    t_a, t_b = window
    if not t_b > t_a:
        raise ValueError("window must have t_b > t_a")
    times = np.asarray(times)
    if t_a < times[0] - 1e-12 or t_b > times[-1] + 1e-12:
        raise ValueError("window lies outside the series")
    sel = (times >= t_a) & (times <= t_b)
    if np.count_nonzero(sel) < 2:
        raise ValueError("window holds fewer than two samples")
    p = np.asarray(survival)[sel]
    if np.any(p <= 0):
        raise ValueError("P_sur must be positive on the window")
    slope = np.polyfit(times[sel], -np.log(p), 1)[0]
    return float(slope)


def first_local_minimum(values: np.ndarray, start: int = 1) -> int | None:
    """Index of the first three-point discrete minimum at or after ``start``."""
    v = np.asarray(values)
    for i in range(max(1, start), v.size - 1):
        if v[i] < v[i - 1] and v[i] <= v[i + 1]:
            return i
    return None


def first_local_maximum(values: np.ndarray, start: int = 1) -> int | None:
    v = np.asarray(values)
    for i in range(max(1, start), v.size - 1):
        if v[i] > v[i - 1] and v[i] >= v[i + 1]:
            return i
    return None


def activity_minimum_time(series: TimeSeries) -> float | None:
    """Time of the first local minimum of the activity after the superradiant transient."""
    i = first_local_minimum(series.activity)
    return None if i is None else float(series.times[i])


@dataclass
class PlateauStats:
    present: bool
    value: float | None = None
    t_onset: float | None = None
    t_end: float | None = None
    median: float | None = None
    t_pl: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def plateau_stats(series: TimeSeries, geometry: Geometry | None = None, rate: float = PLATEAU_RATE,
                  min_duration: float = PLATEAU_MIN_DURATION) -> PlateauStats:
    """Find the first flat stretch of P_sur after the fast initial decay.

    The plateau starts where |d ln P_sur / dt| first falls below ``rate`` and
    lasts while it stays there. Its value is P_sur at onset, i.e. the height
    the fast decay leaves behind.
    """
    t = series.times
    p = series.survival
    t_pl = plateau_time(series, geometry) if geometry is not None else None
    if np.any(p <= 0):
        return PlateauStats(False, t_pl=t_pl)
    slope = np.abs(np.gradient(np.log(p), t))
    flat = slope < rate
    if not flat.any():
        return PlateauStats(False, t_pl=t_pl)
    i0 = int(np.argmax(flat))
    stop = np.flatnonzero(~flat[i0:])
    i1 = i0 + (int(stop[0]) if stop.size else flat.size - i0)
    if t[i1 - 1] - t[i0] < min_duration:
        return PlateauStats(False, t_pl=t_pl)
    return PlateauStats(
        present=True,
        value=float(p[i0]),
        t_onset=float(t[i0]),
        t_end=float(t[i1 - 1]),
        median=float(np.median(p[i0:i1])),
        t_pl=t_pl,
    )


def plateau_time(series: TimeSeries, geometry: Geometry) -> float:
    """First time the centre of mass crosses the middle site; falls back to (N/2)/|V00_nn|."""
    n = geometry.n
    mid = 0.5 * (n - 1)
    if geometry.topology is Topology.CHAIN:
        hit = np.flatnonzero(series.center >= mid)
        if hit.size:
            return float(series.times[hit[0]])
    kappa = 2.0 * math.pi * geometry.a_over_lambda
    return float((0.5 * n) / abs(0.375 * v00(kappa, 0.5 * math.pi)))


def time_averaged_ipr(series: TimeSeries, t_a: float | None = None, t_b: float | None = None) -> float:
    """IPR of the time average of the normalised site populations."""
    sl = series.window(t_a if t_a is not None else series.times[0], t_b if t_b is not None else series.times[-1])
    pops = series.populations[sl] / series.survival[sl, None]
    return ipr(pops.mean(axis=0))


def default_fit_window(series: TimeSeries, geometry: Geometry | None = None) -> tuple[float, float] | None:
    """t_a at the first activity minimum, t_b at the trajectory end or, on chains, the edge arrival."""
    i = first_local_minimum(series.activity)
    if i is None:
        return None
    t_a = float(series.times[i])
    t_b = float(series.times[-1])
    if geometry is not None and geometry.topology is Topology.CHAIN:
        j = first_local_maximum(series.center, start=i)
        if j is not None:
            t_b = float(series.times[j])
    return (t_a, t_b) if t_b > t_a else None


def summary(series: TimeSeries, geometry: Geometry, fit_window=None, extra: dict | None = None) -> dict:
    plateau = plateau_stats(series, geometry)
    out = {"plateau": plateau.to_dict(), "t_pl": plateau.t_pl, "gamma_eff": None, "fit_window": None}
    if fit_window is not None:
        out["gamma_eff"] = effective_decay_rate(series.times, series.survival, fit_window)
        out["fit_window"] = [float(fit_window[0]), float(fit_window[1])]
    if extra:
        out.update(extra)
    return out


def write_summary(path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x)}")
