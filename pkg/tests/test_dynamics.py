import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subrad.couplings import M0, ZeemanField, assemble
from subrad.dynamics import (
    EvolutionResult,
    ExcitationState,
    IntegratorDivergence,
    InvalidConfig,
    TruncatedDensityMatrix,
    evolve_const,
    evolve_density_oracle,
    evolve_lab_frame,
    evolve_scheduled,
    gaussian_momentum_amplitudes,
    init_gaussian_packet,
    init_localized,
    to_lab,
    to_rotating,
)
from subrad.geometry import Geometry, Topology, axis_in_yz, build_chain, build_ring
from subrad.observables import packet_moments
from subrad.schedule import FieldSchedule, axis_for_theta
from subrad.spectral import group_velocity, mode_indices, plane_waves, ring_spectrum_m0


def _random_geometry(rng, n):
    pos = rng.uniform(-0.25, 0.25, size=(n, 3))
    axis = rng.normal(size=3)
    return Geometry(pos, Topology.CHAIN, 0.1, axis / np.linalg.norm(axis))


def _random_state(rng, m):
    c = rng.normal(size=m) + 1j * rng.normal(size=m)
    return ExcitationState(c / np.linalg.norm(c))


# -- initial states -------------------------------------------------------------------

def test_localized_state():
    geo = build_ring(7, 0.08)
    s = init_localized(geo, 3, 0)
    assert s.norm2 == 1.0
    assert s.amplitudes[3 * 3 + M0] == 1.0
    ck = plane_waves(7).conj().T @ s.level(0)
    ck = ck * np.exp(2j * np.pi * mode_indices(7) * 3 / 7)  # remove the site-3 phase
    assert np.allclose(ck, 1 / math.sqrt(7), atol=1e-14)
    with pytest.raises(IndexError):
        init_localized(geo, 7)
    with pytest.raises(ValueError):
        init_localized(geo, 0, 2)


def test_packet_normalization_and_parseval():
    geo = build_ring(51, 0.08)
    s = init_gaussian_packet(geo, -11, math.pi / 16)
    assert abs(s.norm2 - 1.0) <= 1e-12
    assert not s.level(1).any() and not s.level(-1).any()
    ck = gaussian_momentum_amplitudes(51, -11, math.pi / 16)
    ck = ck / np.linalg.norm(ck)
    assert np.allclose(plane_waves(51).conj().T @ s.level(0), ck, atol=1e-12)


def test_packet_envelope_and_phase():
    n = 51
    s = init_gaussian_packet(build_ring(n, 0.08), -11, math.pi / 16).level(0)
    p_s = 2 * math.pi * -11 / n
    # site 0 carries the envelope maximum and neighbours differ by the carrier phase exp(i p_s)
    assert np.argmax(np.abs(s)) == 0
    ratio = s[1] / s[0]
    assert np.angle(ratio) == pytest.approx(p_s, abs=1e-10)


def test_wide_packet_warns_and_localizes():
    geo = build_ring(51, 0.08)
    with pytest.warns(RuntimeWarning):
        s = init_gaussian_packet(geo, 0, 20.0)
    assert abs(s.level(0)[0]) ** 2 > 0.9


def test_packet_requires_ring():
    with pytest.raises(ValueError):
        init_gaussian_packet(build_chain(5, 0.1), 0, 0.3)
    with pytest.raises(ValueError):
        init_gaussian_packet(build_ring(5, 0.1), 0, 0.0)
    with pytest.raises(ValueError):
        init_gaussian_packet(build_ring(5, 0.1), 3, 0.3)


def test_narrow_packet_does_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        init_gaussian_packet(build_ring(51, 0.08), -11, math.pi / 16)


# -- constant generators -------------------------------------------------------------------

@pytest.mark.parametrize("level", [1, 0, -1])
@pytest.mark.parametrize("engine", ["spectral", "rk4"])
def test_single_atom_decay(level, engine):
    geo = build_chain(1, 0.1)
    times = np.linspace(0, 10, 201)
    res = evolve_const(init_localized(geo, 0, level), assemble(geo).h_eff, times, engine=engine)
    assert np.max(np.abs(res.survival / np.exp(-times) - 1)) <= 1e-6
    assert np.allclose(res.activity, res.survival, rtol=1e-12)


def test_zero_generator_is_identity():
    s = _random_state(np.random.default_rng(0), 9)
    res = evolve_const(s, np.zeros((9, 9)), [0.0, 1.0, 5.0])
    assert np.allclose(res.amplitudes, s.amplitudes[None, :], atol=1e-15)
    res = evolve_const(s, np.zeros((9, 9)), [0.5, 1.0], engine="rk4")
    assert np.array_equal(res.amplitudes[-1], s.amplitudes)


def test_ring_mode_sum():
    n = 51
    geo = build_ring(n, 0.08)
    spec = ring_spectrum_m0(geo)
    times = np.array([0.0, 0.3, 1.0, 4.0, 10.0])
    res = evolve_const(init_localized(geo, 0), assemble(geo).h_eff, times)
    sites = np.arange(n)
    for t, amps in zip(times, res.amplitudes):
        phase = np.exp(-1j * (spec.energies - 0.5j * spec.decay_rates) * t)
        c = np.exp(2j * np.pi * np.outer(sites, spec.k) / n) @ phase / n
        assert np.max(np.abs(np.abs(amps[M0::3]) ** 2 - np.abs(c) ** 2)) <= 1e-8


@pytest.mark.parametrize("geo", [build_chain(25, 0.08), build_ring(21, 0.08)], ids=["chain25", "ring21"])
def test_engines_agree(geo):
    ops = assemble(geo)
    times = np.linspace(0, 2, 41)
    s = init_localized(geo, 0)
    a = evolve_const(s, ops.h_eff, times, engine="spectral")
    b = evolve_const(s, ops.h_eff, times, engine="rk4")
    assert np.max(np.abs(a.populations - b.populations)) <= 1e-8
    assert np.max(np.abs(np.sqrt(a.survival) - np.sqrt(b.survival))) <= 1e-8


def test_engines_agree_with_field():
    rng = np.random.default_rng(2)
    geo = _random_geometry(rng, 5)
    ops = assemble(geo, ZeemanField((0.5, -1.0, 2.0)))
    s = _random_state(rng, 15)
    times = np.linspace(0, 3, 13)
    a = evolve_const(s, ops.h_eff, times)
    b = evolve_const(s, ops.h_eff, times, engine="rk4")
    assert np.max(np.abs(a.amplitudes - b.amplitudes)) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_norm_is_non_increasing(seed, n):
    rng = np.random.default_rng(seed)
    geo = _random_geometry(rng, n)
    ops = assemble(geo, ZeemanField(tuple(rng.normal(size=3))))
    res = evolve_const(_random_state(rng, 3 * n), ops.h_eff, np.linspace(0, 4, 81))
    p = res.survival
    assert p[0] <= 1 + 1e-9
    assert np.all(np.diff(p) <= 1e-9)
    assert np.all(res.activity >= -1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 5.0))
def test_activity_is_minus_norm_derivative(seed, t):
    rng = np.random.default_rng(seed)
    geo = _random_geometry(rng, 4)
    ops = assemble(geo, ZeemanField(tuple(rng.normal(size=3))))
    h = 1e-4
    res = evolve_const(_random_state(rng, 12), ops.h_eff, [t - h, t, t + h])
    dp = (res.survival[2] - res.survival[0]) / (2 * h)
    assert abs(dp + res.activity[1]) <= 1e-6


def test_transverse_m0_sector_is_conserved():
    for geo in (build_ring(15, 0.08), build_chain(12, 0.08)):
        ops = assemble(geo, ZeemanField.along_axis(5.0))
        res = evolve_const(init_localized(geo, 2), ops.h_eff, np.linspace(0, 5, 11))
        other = np.delete(res.amplitudes, np.s_[M0::3], axis=1)
        assert np.max(np.abs(other)) <= 1e-12


def test_ring_translation_covariance():
    n = 13
    geo = build_ring(n, 0.08)
    h = assemble(geo).h_eff
    times = np.linspace(0, 3, 7)
    a = evolve_const(init_localized(geo, 0), h, times).populations
    b = evolve_const(init_localized(geo, 4), h, times).populations
    assert np.max(np.abs(np.roll(a, 4, axis=1) - b)) <= 1e-12


def test_sample_time_validation():
    geo = build_chain(2, 0.1)
    h = assemble(geo).h_eff
    s = init_localized(geo, 0)
    with pytest.raises(ValueError):
        evolve_const(s, h, [0.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        evolve_const(ExcitationState(s.amplitudes, t=1.0), h, [0.5, 2.0])
    with pytest.raises(InvalidConfig):
        evolve_const(s, h, [0.0, 1.0], engine="euler")
    with pytest.raises(ValueError):
        EvolutionResult(np.array([0.0, 0.0]), np.zeros((2, 6)), np.zeros(2))


def test_divergence_is_reported():
    h = np.full((3, 3), np.nan, dtype=complex)
    with pytest.raises(IntegratorDivergence):
        evolve_const(ExcitationState(np.array([1, 0, 0], complex)), h, [0.0, 1.0], engine="rk4")


# -- scheduled fields ---------------------------------------------------------------------

def test_constant_schedule_matches_const():
    geo = build_chain(10, 0.08)
    theta = 1.2
    sched = FieldSchedule.constant(theta, 50.0, 3.0)
    times = np.linspace(0, 3, 31)
    s = init_localized(geo, 0)
    a = evolve_scheduled(s, geo, sched, times)
    ops = assemble(geo.with_axis(axis_for_theta(theta)), ZeemanField.along_axis(50.0))
    b = evolve_const(s, ops.h_eff, times)
    assert np.max(np.abs(a.amplitudes - b.amplitudes)) <= 1e-10


def _ramp_case():
    geo = build_chain(6, 0.1)
    sched = FieldSchedule.switches(math.pi / 2, 200.0, 1.0, [(0.3, 0.25, 1.0)])
    times = np.linspace(0, 1.0, 11)
    return geo, sched, times


def test_scheduled_engines_agree():
    geo, sched, times = _ramp_case()
    s = init_localized(geo, 0)
    a = evolve_scheduled(s, geo, sched, times, dt_rebuild=0.25 / 40)
    b = evolve_scheduled(s, geo, sched, times, engine="rk4", dt_rebuild=0.25 / 40)
    assert np.max(np.abs(a.amplitudes - b.amplitudes)) <= 1e-8


def test_rotating_frame_matches_lab_frame():
    geo, sched, times = _ramp_case()
    s = init_localized(geo, 0)
    errs = []
    for pieces in (50, 200):
        a = evolve_scheduled(s, geo, sched, times, dt_rebuild=0.25 / pieces)
        b = evolve_lab_frame(s, geo, sched, times, dt_rebuild=0.25 / pieces)
        errs.append(np.max(np.abs(a.amplitudes - b.amplitudes)))
    assert errs[1] < 1e-4
    assert errs[1] < errs[0] / 8  # second order in the rebuild step


def test_lab_frame_rotation_round_trip():
    rng = np.random.default_rng(4)
    s = _random_state(rng, 12)
    back = to_rotating(to_lab(s, 0.7).amplitudes, 0.7)
    assert np.allclose(back, s.amplitudes, atol=1e-14)


def test_rebuild_finer_than_step_is_rejected():
    geo, sched, times = _ramp_case()
    with pytest.raises(InvalidConfig):
        evolve_scheduled(init_localized(geo, 0), geo, sched, times, engine="rk4", dt_rebuild=1e-9)


def test_samples_outside_schedule_are_rejected():
    geo, sched, _ = _ramp_case()
    with pytest.raises(ValueError):
        evolve_scheduled(init_localized(geo, 0), geo, sched, [0.0, 2.0])


# -- density-matrix oracle ------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_density_oracle_matches_pure_evolution(n):
    rng = np.random.default_rng(100 + n)
    geo = _random_geometry(rng, n)
    ops = assemble(geo, ZeemanField(tuple(rng.normal(size=3))))
    psi = _random_state(rng, 3 * n)
    times = np.linspace(0, 2, 9)
    pure = evolve_const(psi, ops.h_eff, times)
    rho = evolve_density_oracle(TruncatedDensityMatrix.from_pure(psi), ops, times)
    for c, r in zip(pure.amplitudes, rho.rho_ee):
        assert np.linalg.norm(r - np.outer(c, c.conj())) <= 1e-8
        assert np.abs(r - r.conj().T).max() <= 1e-10
    assert np.max(np.abs(rho.trace - 1)) <= 1e-8
    assert not rho.rho_ge.any() and not rho.rho_eg.any()
    assert np.all(rho.rho_gg.real >= -1e-12) and np.all(rho.rho_gg.real <= 1 + 1e-12)


def test_density_oracle_coherences():
    # a superposition of ground and excited states: the coherence decays at the amplitude rate
    geo = build_chain(1, 0.1)
    ops = assemble(geo, ZeemanField.along_axis(0.7))
    rge = np.array([0, 0.5, 0], complex)
    init = TruncatedDensityMatrix(0.5 + 0j, rge, rge.conj(), np.diag([0, 0.5, 0]).astype(complex))
    times = np.linspace(0, 3, 7)
    rho = evolve_density_oracle(init, ops, times)
    assert np.allclose(rho.rho_eg[:, 1], 0.5 * np.exp(-0.5 * times), atol=1e-10)
    assert np.allclose(rho.rho_ge, rho.rho_eg.conj(), atol=1e-12)
    assert np.max(np.abs(rho.trace - 1)) <= 1e-10


def test_density_oracle_requires_uniform_field():
    geo = build_chain(2, 0.1)
    ops = assemble(geo)
    bad = type(ops)(ops.v, ops.gamma, np.diag([1, 0, -1, 0, 0, 0]).astype(complex), ops.h_eff)
    with pytest.raises(ValueError):
        evolve_density_oracle(TruncatedDensityMatrix.from_pure(init_localized(geo, 0)), bad, [0.0, 1.0])
