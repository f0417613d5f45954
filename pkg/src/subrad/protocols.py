"""Turn-key experiment presets, field-switching schedules and disorder ensembles.

Every preset returns an :class:`~subrad.observables.TimeSeries` whose ``meta``
dict carries the derived quantities (plateau, fitted decay rate, switch times).
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import observables as obs
from .couplings import assemble, noninteracting
from .dynamics import evolve_const, evolve_scheduled, init_gaussian_packet, init_localized
from .geometry import Geometry, build_chain, build_ring, sample_disordered
from .schedule import FieldSchedule, Segment
from .spectral import group_velocity, k_for_momentum, magic_angle, ring_spectrum_m0, sign_flip_angle, subradiant_fraction

log = logging.getLogger(__name__)

__all__ = [
    "FieldSchedule",
    "Segment",
    "EnsembleSpec",
    "EnsembleResult",
    "time_grid",
    "preset_ring_single_site",
    "preset_ring_packet",
    "preset_chain_edge",
    "preset_freeze",
    "preset_direction_switch",
    "run_ensemble",
]

FIG3_P_CENTER = -0.43  # p(k_s) a / pi
FIG3_SIGMA_K = math.pi / 16.0  # sigma_k a
FIG5_T_MIN = 1.79
FIG5_DELTA = 1e3
# toggles every 0.6/gamma keep the edge-launched packet between sites ~10 and ~15 of a 25-site chain
SWITCH_TIMES = tuple(FIG5_T_MIN + 0.6 * i for i in range(5))


def time_grid(t_final: float, dt: float = 0.01, fine_dt: float = 1e-3, fine_until: float = 2.0,
              t_start: float = 0.0) -> np.ndarray:
    """Sample grid with a fine stretch over the initial transient and a coarser tail."""
    if not t_final > t_start:
        raise ValueError("t_final must exceed t_start")
    edge = min(max(fine_until, t_start), t_final)
    head = np.arange(t_start, edge, fine_dt) if edge > t_start and fine_dt < dt else np.empty(0)
    start = head[-1] + fine_dt if head.size else t_start
    tail = np.arange(start, t_final + 0.5 * dt, dt)
    grid = np.concatenate([head, tail])
    grid = grid[grid <= t_final + 1e-12]
    if grid[-1] < t_final - 1e-12:
        grid = np.append(grid, t_final)
    return grid


def _with_marks(grid: np.ndarray, marks) -> np.ndarray:
    """Insert ``marks`` into a sample grid, dropping grid points that nearly coincide with one."""
    marks = np.asarray(marks, dtype=float)
    if marks.size == 0:
        return grid
    keep = np.min(np.abs(grid[:, None] - marks[None, :]), axis=1) > 1e-9
    return np.union1d(grid[keep], marks)


def _run_const(geometry, state, times, engine, control=False, meta=None):
    ops = noninteracting(geometry) if control else assemble(geometry)
    res = evolve_const(state, ops.h_eff, times, gamma=ops.gamma, engine=engine)
    return obs.series_from(res, geometry, meta)


# -- ring presets --------------------------------------------------------------------

def preset_ring_single_site(n: int = 51, a_over_lambda: float = 0.08, t_final: float = 10.0, *,
                            geometry: Geometry | None = None, site: int = 0, sample_dt: float = 0.01,
                            fine_dt: float = 1e-3, engine: str = "spectral") -> obs.TimeSeries:
    """Single excitation in |0> on one ring site."""
    clean = build_ring(n, a_over_lambda)
    geo = geometry or clean
    times = time_grid(t_final, sample_dt, fine_dt)
    meta = {"preset": "ring_single_site", "n": n, "a_over_lambda": a_over_lambda, "site": site}
    if geometry is None:
        meta["subradiant_fraction"] = subradiant_fraction(ring_spectrum_m0(clean))
    series = _run_const(geo, init_localized(geo, site, 0), times, engine, meta=meta)
    series.meta["plateau"] = obs.plateau_stats(series, geo).to_dict()
    return series


def preset_ring_packet(n: int = 51, a_over_lambda: float = 0.08, k_s: int | None = None,
                       sigma_k: float = FIG3_SIGMA_K, t_final: float = 200.0, *,
                       geometry: Geometry | None = None, sample_dt: float = 0.05, fine_dt: float = 1e-3,
                       engine: str = "spectral", fit_start: float | None = None) -> obs.TimeSeries:
    """Gaussian wave packet in the linear-dispersion part of the subradiant band."""
    clean = build_ring(n, a_over_lambda)
    geo = geometry or clean
    if k_s is None:
        k_s = k_for_momentum(n, FIG3_P_CENTER)
    spec = ring_spectrum_m0(clean)
    v_g = group_velocity(spec, k_s)
    times = time_grid(t_final, sample_dt, fine_dt)
    meta = {
        "preset": "ring_packet", "n": n, "a_over_lambda": a_over_lambda, "k_s": int(k_s),
        "p_s_a_over_pi": 2.0 * k_s / n, "sigma_k_a": sigma_k, "group_velocity": v_g,
        "revolution_time": n / abs(v_g),
    }
    series = _run_const(geo, init_gaussian_packet(geo, k_s, sigma_k), times, engine, meta=meta)
    if fit_start is None:
        # skip the short-lived decay of the packet's small superradiant tail
        fit_start = min(max(1.0, meta["revolution_time"]), 0.5 * t_final)
    window = (fit_start, float(times[-1]))
    series.meta["gamma_eff"] = obs.effective_decay_rate(series.times, series.survival, window)
    series.meta["fit_window"] = list(window)
    return series


# -- chain presets --------------------------------------------------------------------

def preset_chain_edge(n: int = 25, a_over_lambda: float = 0.08, t_final: float = 10.0, *,
                      geometry: Geometry | None = None, interacting: bool = True, sample_dt: float = 0.01,
                      fine_dt: float = 1e-3, engine: str = "spectral") -> obs.TimeSeries:
    """Excitation in |0> on the first site of an open chain, quantization axis perpendicular to it."""
    geo = geometry or build_chain(n, a_over_lambda)
    times = time_grid(t_final, sample_dt, fine_dt)
    meta = {"preset": "chain_edge", "n": n, "a_over_lambda": a_over_lambda, "interacting": interacting}
    series = _run_const(geo, init_localized(geo, 0, 0), times, engine, control=not interacting, meta=meta)
    series.meta["plateau"] = obs.plateau_stats(series, geo).to_dict()
    series.meta["t_min"] = obs.activity_minimum_time(series)
    i_arr = obs.first_local_maximum(series.center)
    series.meta["arrival_time"] = None if i_arr is None else float(series.times[i_arr])
    return series


def _scheduled_series(geo, schedule, times, engine, dt_rebuild, meta):
    res = evolve_scheduled(init_localized(geo, 0, 0), geo, schedule, times, engine=engine, dt_rebuild=dt_rebuild)
    series = obs.series_from(res, geo, meta)
    series.meta["theta"] = res.diagnostics["theta"]
    return series


def preset_freeze(n: int = 25, a_over_lambda: float = 0.08, delta: float = FIG5_DELTA,
                  t_min: float | None = FIG5_T_MIN, tau_switch: float | None = None, t_final: float = 12.0, *,
                  geometry: Geometry | None = None, sample_dt: float = 0.01, fine_dt: float = 1e-3,
                  engine: str = "spectral", rebuild_per_ramp: int = 200) -> obs.TimeSeries:
    """Chain-edge start; at t_min rotate the axis adiabatically to the magic angle and hold it."""
    if delta < 100.0:
        log.warning("Delta = %g gamma is not large against gamma; adiabatic following may fail", delta)
    geo = geometry or build_chain(n, a_over_lambda)
    tau = tau_switch if tau_switch is not None else 50.0 / delta
    detected = None
    if t_min is None:
        probe = preset_chain_edge(n, a_over_lambda, t_final=min(t_final, 5.0), geometry=geo,
                                  sample_dt=sample_dt, fine_dt=fine_dt, engine=engine)
        detected = probe.meta["t_min"]
        if detected is None:
            raise RuntimeError("no activity minimum found to trigger the switch")
        t_min = detected
    theta_f = magic_angle(2.0 * math.pi * a_over_lambda)
    schedule = FieldSchedule.switches(0.5 * math.pi, delta, t_final, [(t_min, tau, theta_f)])
    times = _with_marks(time_grid(t_final, sample_dt, fine_dt), [t_min, t_min + tau])
    meta = {
        "preset": "freeze", "n": n, "a_over_lambda": a_over_lambda, "delta": delta,
        "t_min": t_min, "t_min_detected": detected, "tau_switch": tau, "theta_f": theta_f,
        "ramp": [t_min, t_min + tau],
    }
    return _scheduled_series(geo, schedule, times, engine, tau / rebuild_per_ramp, meta)


def preset_direction_switch(n: int = 25, a_over_lambda: float = 0.08, delta: float = FIG5_DELTA,
                            switch_times=SWITCH_TIMES, tau_switch: float | None = None,
                            t_final: float = 4.6, *, geometry: Geometry | None = None,
                            sample_dt: float = 0.01, fine_dt: float = 1e-3, engine: str = "spectral",
                            rebuild_per_ramp: int = 200) -> obs.TimeSeries:
    """Toggle the axis between pi/2 and the sign-flip angle at each switch time."""
    geo = geometry or build_chain(n, a_over_lambda)
    tau = tau_switch if tau_switch is not None else 50.0 / delta
    flip = sign_flip_angle(2.0 * math.pi * a_over_lambda)
    targets = [flip.theta if i % 2 == 0 else 0.5 * math.pi for i in range(len(switch_times))]
    switches = [(float(t), tau, th) for t, th in zip(switch_times, targets)]
    if switches:
        schedule = FieldSchedule.switches(0.5 * math.pi, delta, t_final, switches)
    else:
        schedule = FieldSchedule.constant(0.5 * math.pi, delta, t_final)
    marks = [x for t, _, _ in switches for x in (t, t + tau)]
    times = _with_marks(time_grid(t_final, sample_dt, fine_dt), marks)
    meta = {
        "preset": "direction_switch", "n": n, "a_over_lambda": a_over_lambda, "delta": delta,
        "tau_switch": tau, "theta_r": flip.theta, "theta_r_exact": flip.exact,
        "switches": [[t, t + tau, th] for t, _, th in switches],
    }
    return _scheduled_series(geo, schedule, times, engine, tau / rebuild_per_ramp, meta)


# -- ensembles ------------------------------------------------------------------------

@dataclass
class EnsembleSpec:
    geometry: Geometry
    sigma_over_a: float
    realizations: int = 100
    seed: int = 0
    protocol: Callable[[Geometry], obs.TimeSeries] | None = None

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        if self.sigma_over_a < 0:
            raise ValueError("sigma/a must be non-negative")


@dataclass
class EnsembleResult:
    times: np.ndarray
    survival: np.ndarray
    activity: np.ndarray
    populations: np.ndarray
    realizations: list = field(default_factory=list)  # per-realization dicts: survival, activity, populations

    def mean_series(self, topology) -> obs.TimeSeries:
        lp = np.zeros(self.populations.shape + (3,))
        lp[..., 1] = self.populations
        center = np.full(self.times.size, np.nan)
        return obs.TimeSeries(self.times, self.survival, self.activity, lp, center, center.copy(), topology)


def _order_free_mean(stack: np.ndarray) -> np.ndarray:
    # sorting along the realization axis makes the float sum independent of input order;
    # summing offsets from the pointwise minimum keeps identical realizations exact
    base = stack.min(axis=0)
    return base + np.sort(stack - base, axis=0).sum(axis=0) / stack.shape[0]


def run_ensemble(spec: EnsembleSpec, threads: int | None = None) -> EnsembleResult:
    """Run ``spec.protocol`` on each disordered realization and average pointwise."""
    protocol = spec.protocol or (lambda geo: preset_ring_single_site(geo.n, geo.a_over_lambda, geometry=geo))

    def one(i):
        geo = sample_disordered(spec.geometry, spec.sigma_over_a, spec.seed, i)
        s = protocol(geo)
        return i, {"survival": s.survival, "activity": s.activity, "populations": s.populations, "times": s.times}

    workers = threads or int(os.environ.get("SUBRAD_THREADS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            done = dict(ex.map(one, range(spec.realizations)))
    else:
        done = dict(one(i) for i in range(spec.realizations))
    runs = [done[i] for i in range(spec.realizations)]
    times = runs[0]["times"]
    return EnsembleResult(
        times=times,
        survival=_order_free_mean(np.stack([r["survival"] for r in runs])),
        activity=_order_free_mean(np.stack([r["activity"] for r in runs])),
        populations=_order_free_mean(np.stack([r["populations"] for r in runs])),
        realizations=runs,
    )


# -- config-driven runs ----------------------------------------------------------------

PRESETS = {
    "ring_single_site": "ring_single_site", "fig2": "ring_single_site",
    "ring_packet": "ring_packet", "fig3": "ring_packet",
    "chain_edge": "chain_edge", "fig4": "chain_edge",
    "freeze": "freeze", "fig5": "freeze",
    "direction_switch": "direction_switch", "fig5d": "direction_switch",
}


@dataclass
class RunConfig:
    preset: str
    n: int
    a_over_lambda: float
    t_final: float
    delta_over_gamma: float = FIG5_DELTA
    sigma_over_a: float = 0.0
    realizations: int = 1
    seed: int = 0
    sample_dt: float = 0.01
    fine_dt: float = 1e-3
    engine: str = "spectral"
    threads: int = 1
    p_center_over_pi: float = FIG3_P_CENTER
    sigma_k_a: float = FIG3_SIGMA_K
    interacting: bool = True
    switch: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; known: {sorted(PRESETS)}")
        self.preset = PRESETS[self.preset]
        for name in ("n", "a_over_lambda", "t_final", "sample_dt", "fine_dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma_over_a < 0 or self.realizations < 1:
            raise ValueError("sigma_over_a must be >= 0 and realizations >= 1")
        if self.engine not in ("spectral", "rk4"):
            raise ValueError("engine must be 'spectral' or 'rk4'")

    @classmethod
    def from_mapping(cls, doc: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # python < 3.11
                import tomli as tomllib
            return cls.from_mapping(tomllib.loads(text))
        return cls.from_mapping(json.loads(text))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _preset_callable(cfg: RunConfig) -> Callable[[Geometry | None], obs.TimeSeries]:
    common = {"sample_dt": cfg.sample_dt, "fine_dt": cfg.fine_dt, "engine": cfg.engine}
    sw = cfg.switch or {}
    if cfg.preset == "ring_single_site":
        return lambda geo=None: preset_ring_single_site(cfg.n, cfg.a_over_lambda, cfg.t_final, geometry=geo, **common)
    if cfg.preset == "ring_packet":
        k_s = k_for_momentum(cfg.n, cfg.p_center_over_pi)
        return lambda geo=None: preset_ring_packet(cfg.n, cfg.a_over_lambda, k_s, cfg.sigma_k_a, cfg.t_final,
                                                   geometry=geo, **common)
    if cfg.preset == "chain_edge":
        return lambda geo=None: preset_chain_edge(cfg.n, cfg.a_over_lambda, cfg.t_final, geometry=geo,
                                                  interacting=cfg.interacting, **common)
    if cfg.preset == "freeze":
        t_min = sw.get("t_min", FIG5_T_MIN)
        if t_min in ("auto", None):
            t_min = None
        return lambda geo=None: preset_freeze(cfg.n, cfg.a_over_lambda, cfg.delta_over_gamma, t_min,
                                              sw.get("tau"), cfg.t_final, geometry=geo, **common)
    times = sw.get("times", list(SWITCH_TIMES))
    return lambda geo=None: preset_direction_switch(cfg.n, cfg.a_over_lambda, cfg.delta_over_gamma, times,
                                                    sw.get("tau"), cfg.t_final, geometry=geo, **common)


def _clean_geometry(cfg: RunConfig) -> Geometry:
    if cfg.preset.startswith("ring"):
        return build_ring(cfg.n, cfg.a_over_lambda)
    return build_chain(cfg.n, cfg.a_over_lambda)


def _summary_doc(series: obs.TimeSeries, geometry: Geometry, cfg: RunConfig) -> dict:
    plateau = obs.plateau_stats(series, geometry)
    fit = series.meta.get("fit_window")
    geff = series.meta.get("gamma_eff")
    if fit is None:
        window = obs.default_fit_window(series, geometry)
        if window is not None:
            fit = list(window)
            geff = obs.effective_decay_rate(series.times, series.survival, window)
    doc = {
        "plateau": plateau.value if plateau.present else None,
        "plateau_stats": plateau.to_dict(),
        "t_pl": plateau.t_pl,
        "gamma_eff": geff,
        "fit_window": fit,
        "config": cfg.to_dict(),
    }
    for key, val in series.meta.items():
        if key in ("theta",):
            continue
        doc.setdefault("meta", {})[key] = val
    resid, kmax = obs.activity_balance(series.times, series.survival, series.activity)
    doc["activity_balance"] = {"max_residual": resid, "max_activity": kmax}
    return doc


def execute(cfg: RunConfig, out_dir) -> dict:
    """Run a configured preset (or its disorder ensemble) and write series.csv and summary.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = _preset_callable(cfg)
    clean = _clean_geometry(cfg)
    if cfg.realizations == 1 and cfg.sigma_over_a == 0:
        series = run(None)
        series.to_csv(out / "series.csv")
        doc = _summary_doc(series, clean, cfg)
    else:
        spec = EnsembleSpec(clean, cfg.sigma_over_a, cfg.realizations, cfg.seed, protocol=lambda g: run(g))
        ens = run_ensemble(spec, threads=cfg.threads)
        mean = ens.mean_series(clean.topology)
        mean.to_csv(out / "series.csv")
        for i, r in enumerate(ens.realizations):
            sub = out / "realizations" / f"r{i:03d}"
            sub.mkdir(parents=True, exist_ok=True)
            data = np.column_stack([r["times"], r["survival"], r["activity"]])
            np.savetxt(sub / "series.csv", data, delimiter=",", header="t,P_sur,K", comments="", fmt="%.17g")
        doc = {
            "plateau": None, "t_pl": None, "gamma_eff": None, "fit_window": None,
            "ensemble": {
                "realizations": cfg.realizations, "sigma_over_a": cfg.sigma_over_a, "seed": cfg.seed,
                "mean_survival_final": float(ens.survival[-1]),
                "time_averaged_ipr": obs.ipr((ens.populations / ens.survival[:, None]).mean(axis=0)),
            },
            "config": cfg.to_dict(),
        }
    obs.write_summary(out / "summary.json", doc)
    return doc
