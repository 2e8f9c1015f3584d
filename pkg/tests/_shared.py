"""Memoized heavy computations shared between module tests and acceptance.

Everything here is deterministic, so caching per pytest session means a
criterion's evidence is computed once no matter how many tests cite it.
"""

from functools import lru_cache
from pathlib import Path

import numpy as np

from monodomain.benchmark import run_benchmark_case, _cache_path
from monodomain.geometry import (
    ElementKind,
    SlabSpec,
    build_slab_mesh,
    nearest_node,
    slab_fiber_field,
)
from monodomain.ionic import IonicModelSpec, ModelKind, PacingProtocol0D, pace_single_cell
from monodomain.simulation import (
    ACTIVATION_SENTINEL,
    LinearSolverConfig,
    SimulationConfig,
    StimulusProtocol,
    StimulusShape,
    TissueSolver,
    VolumeConfig,
    run,
)
from monodomain.timestepping import bdf_coefficients

import _fd1d
import _reference

REPO_ROOT = Path(__file__).resolve().parents[1]
CACHE_DIR = REPO_ROOT / ".benchmark_cache"

#: Millivolts per model potential unit (the models' own output rescalings),
#: used to express deviations of the dimensionless models in mV-equivalents.
MV_PER_UNIT = {
    ModelKind.ALIEV_PANFILOV: 100.0,
    ModelKind.BUENO_OROVIO: 85.7,
    ModelKind.TTP06: 1000.0,
}

#: Benchmark conductivities (already chi*Cm-rescaled, m^2/s).
BENCH_SIGMA = (0.95298e-4, 0.12576e-4, 0.12576e-4)


def two_beat_protocol(kind, dt=2.5e-5):
    """Two pacing pulses at 0.8 s period, patterned on the published setups.

    The dimensionless models use the 0D prepacing pulse from the atrial
    listing (1162.8 1/s for 4 ms); TTP06 uses the tissue benchmark pulse
    (35.714 V/s for 2 ms).  Both are comfortably suprathreshold.
    """
    if kind is ModelKind.TTP06:
        amplitude, duration = 35.714, 2e-3
    else:
        amplitude, duration = 1.1628e3, 4e-3
    return PacingProtocol0D(
        initial_times=(0.0,),
        durations=(duration,),
        amplitudes=(amplitude,),
        period=0.8,
        total_time=1.6,
        dt=dt,
    )


@lru_cache(maxsize=None)
def oracle_deviation(kind_name, dt=2.5e-5, beats=2):
    """Max |u_IMEX - u_RK4(dt/100)| in model units over a paced run."""
    kind = ModelKind(kind_name)
    spec = IonicModelSpec(kind)
    protocol = two_beat_protocol(kind, dt)
    if beats != 2:
        protocol = PacingProtocol0D(
            protocol.initial_times, protocol.durations, protocol.amplitudes,
            protocol.period, 0.8 * beats, dt,
        )
    _, trace = pace_single_cell(spec, protocol, order=2, stride=1)
    reference = _reference.rk4_paced(spec, protocol, refine=100)
    assert trace.shape == reference.shape
    return float(np.abs(trace[:, 1] - reference[:, 1]).max())


@lru_cache(maxsize=None)
def reduction_deviation(kind_name, order):
    """Criterion 3 evidence: worst 3D-vs-0D nodal deviation and spread.

    A uniform initial state with zero stimulus must evolve identically in
    every node of a 3D mesh and in the 0D integrator, step for step.
    """
    kind = ModelKind(kind_name)
    dt, final = {
        ModelKind.ALIEV_PANFILOV: (2e-4, 0.02),
        ModelKind.BUENO_OROVIO: (1e-4, 0.01),
        ModelKind.TTP06: (5e-5, 0.005),
    }[kind]
    mesh = build_slab_mesh(SlabSpec((1e-3, 1e-3, 1e-3), 0.5e-3, ElementKind.HEX8))
    fibers = slab_fiber_field(mesh, 0, 60.0, -60.0)
    spec = IonicModelSpec(kind)
    _, trace = pace_single_cell(
        spec, PacingProtocol0D((), (), (), 0.0, final, dt), order=order, stride=1,
    )
    config = SimulationConfig(
        mesh=mesh,
        fibers=fibers,
        volumes=(VolumeConfig("Tissue", (1,), spec,
                              sigma_l=1e-4, sigma_t=2e-5, sigma_n=2e-5),),
        bdf_order=order,
        dt=dt,
        final_time=final,
        linear_solver=LinearSolverConfig(tolerance=1e-15),
    )
    solver = TissueSolver(config)
    worst_traj = worst_spread = 0.0
    k = 0
    while solver.step_index < round(final / dt):
        u = solver.step()
        k += 1
        u0d = trace[k, 1]
        worst_traj = max(worst_traj, abs(u.max() - u0d), abs(u.min() - u0d))
        worst_spread = max(worst_spread, float(u.max() - u.min()))
    return worst_traj, worst_spread


@lru_cache(maxsize=None)
def bdf_measured_order(sigma):
    """Observed convergence order of the IMEX-BDF scheme on u' = -10u.

    The history ring is seeded with exact solution values so the
    measurement sees the scheme's asymptotic order, not the startup ramp.
    """
    lam, T = -10.0, 1.0
    scheme = bdf_coefficients(sigma)
    errors, dts = [], [8e-3, 4e-3, 2e-3, 1e-3]
    for dt in dts:
        n = int(round(T / dt))
        history = [np.exp(lam * k * dt) for k in range(sigma)]  # oldest first
        for k in range(sigma - 1, n):
            u_bdf = sum(h * u for h, u in zip(scheme.history_weights, history[::-1]))
            u_ext = sum(h * u for h, u in zip(scheme.ext_weights, history[::-1]))
            u_new = (u_bdf + dt * lam * u_ext) / scheme.alpha
            history.append(u_new)
            history = history[-3:]
        errors.append(abs(history[-1] - np.exp(lam * T)))
    slope, _ = np.polyfit(np.log(dts), np.log(errors), 1)
    return float(slope)


@lru_cache(maxsize=None)
def conduction_comparison():
    """Criterion 7 evidence: fiber-aligned 3D run vs the 1D FD oracle.

    Returns (cv_fd, cv_fem, relative difference) in m/s for a thin
    (20 x 0.5 x 0.5) mm strip at the benchmark's fine resolution, with
    conduction velocity measured between the 5 mm and 15 mm stations.
    """
    spec = IonicModelSpec(ModelKind.TTP06)
    dx, dt = 0.1e-3, 5e-6
    xs, act = _fd1d.run_fd1d(
        spec, length=20e-3, dx=dx, dt=dt, final_time=40e-3,
        sigma=BENCH_SIGMA[0], stim_end=1.5e-3,
        stim_amplitude=35.714, stim_duration=2e-3, order=2,
    )
    cv_fd = _fd1d.conduction_velocity(act, xs, 5e-3, 15e-3)

    mesh = build_slab_mesh(SlabSpec((20e-3, 0.5e-3, 0.5e-3), dx, ElementKind.HEX8))
    fibers = slab_fiber_field(mesh, transmural_axis=2, endo_angle=0.0, epi_angle=0.0)
    stimulus = StimulusProtocol(
        shape=StimulusShape.CUBIC,
        sites=((0.75e-3, 0.25e-3, 0.25e-3),),
        amplitudes=(35.714,),
        extents=(1.5e-3,),
        initial_times=(0.0,),
        durations=(2e-3,),
    )
    config = SimulationConfig(
        mesh=mesh,
        fibers=fibers,
        volumes=(VolumeConfig("Strip", (1,), spec, *BENCH_SIGMA),),
        bdf_order=2,
        dt=dt,
        final_time=40e-3,
        stimuli=(stimulus,),
    )
    report = run(config, stop_when_fully_activated=True)
    t_from = report.activation_times[nearest_node(mesh, (5e-3, 0.0, 0.0))]
    t_to = report.activation_times[nearest_node(mesh, (15e-3, 0.0, 0.0))]
    assert t_from > 0 and t_to > t_from
    cv_fem = 10e-3 / (t_to - t_from)
    return cv_fd, cv_fem, abs(cv_fem - cv_fd) / cv_fd


def _strip_config(grey_factor=None, disable_band=False):
    """(1 x 1 x 10) mm two-material strip: band z in [4, 6] mm is material 2."""
    from monodomain.geometry import Mesh

    base = build_slab_mesh(SlabSpec((1e-3, 1e-3, 10e-3), 0.5e-3, ElementKind.HEX8))
    centroids = base.nodes[base.elements].mean(axis=1)[:, 2]
    materials = np.where((centroids >= 4e-3) & (centroids < 6e-3), 2, 1)
    mesh = Mesh(base.nodes, base.elements, base.element_kind, materials)
    fibers = slab_fiber_field(mesh, transmural_axis=0, endo_angle=0.0, epi_angle=0.0)
    spec = IonicModelSpec(ModelKind.TTP06)
    band_sigma = BENCH_SIGMA if grey_factor is None else tuple(
        s / grey_factor for s in BENCH_SIGMA
    )
    volumes = (
        VolumeConfig("Healthy", (1,), spec, *BENCH_SIGMA),
        VolumeConfig("Band", (2,), spec, *band_sigma, disabled=disable_band),
    )
    stimulus = StimulusProtocol(
        shape=StimulusShape.CUBIC,
        sites=((0.5e-3, 0.5e-3, 0.75e-3),),
        amplitudes=(35.714,),
        extents=(1.5e-3,),
        initial_times=(0.0,),
        durations=(2e-3,),
    )
    return SimulationConfig(
        mesh=mesh,
        fibers=fibers,
        volumes=volumes,
        bdf_order=2,
        dt=5e-5,
        final_time=60e-3,
        stimuli=(stimulus,),
    )


@lru_cache(maxsize=None)
def pathology_runs():
    """Criterion 8 evidence: healthy, scar and grey-zone strip runs.

    Returns a dict with the healthy far-corner activation time, the
    grey-zone one, and the scar run's (near-side activated, far-side
    sentinel) booleans.
    """
    healthy = run(_strip_config(), stop_when_fully_activated=True)
    grey = run(_strip_config(grey_factor=4.0), stop_when_fully_activated=True)
    scar = run(_strip_config(disable_band=True))

    mesh = _strip_config().mesh
    far = nearest_node(mesh, (1e-3, 1e-3, 10e-3))
    z = mesh.nodes[:, 2]
    beyond = z > 6e-3 + 1e-9
    before = z < 4e-3 - 1e-9
    return {
        "healthy_far_ms": float(healthy.activation_times[far]) * 1e3,
        "grey_far_ms": float(grey.activation_times[far]) * 1e3,
        "scar_beyond_all_sentinel": bool(
            np.all(scar.activation_times[beyond] == ACTIVATION_SENTINEL)
        ),
        "scar_before_all_activated": bool(
            np.all(scar.activation_times[before] > 0)
        ),
    }


def cached_benchmark_cases(kind, resolutions):
    """Cached BenchmarkCase list for ``kind``, or None if any is missing.

    Never computes: the full ladder is hours of single-core work, run
    once via ``monodomain benchmark --cache`` (see README) and committed.
    """
    cases = []
    for dx, dt in resolutions:
        if not _cache_path(CACHE_DIR, dx, dt, kind).exists():
            return None
        cases.append(run_benchmark_case(dx, dt, kind, cache_dir=CACHE_DIR))
    return cases
