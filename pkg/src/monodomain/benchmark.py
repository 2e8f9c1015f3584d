"""Slab convergence benchmark harness.

Runs the standard N-version cardiac tissue benchmark (Niederer et al.,
Phil. Trans. R. Soc. A 369, 2011): a (3 x 7 x 20) mm cuboid of
ten Tusscher-Panfilov epicardial tissue, fibers along the long axis,
stimulated in a 1.5 mm cube at one corner, with the activation map
sampled along the corner-to-corner diagonal.  Each (dx, dt) resolution
is run to full activation and reduced to the activation times at three
named points:

  P1 -- the stimulated corner (0, 0, 0)
  P9 -- the node nearest the diagonal midpoint (1.5, 3.5, 10) mm
  P8 -- the far corner (3, 7, 20) mm, where discretization error
        accumulates as the wavefront crosses the cuboid

Completed cases are cached as small JSON files so that convergence
studies (and the test suite) can be resumed without re-running hours of
single-core work; delete the cache directory to force recomputation.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .geometry import (
    SlabSpec,
    build_slab_mesh,
    nearest_node,
    slab_fiber_field,
)
from .ionic.base import IonicModelSpec, ModelKind
from .simulation import (
    SimulationConfig,
    StimulusProtocol,
    StimulusShape,
    VolumeConfig,
    run,
)

#: (dx [mm], dt [ms]) pairs of the standard convergence ladder.
STANDARD_RESOLUTIONS = ((0.5, 0.05), (0.2, 0.01), (0.1, 0.005))

#: The benchmark's finest pairing; hidden behind ``--expensive`` in the CLI.
EXPENSIVE_RESOLUTION = (0.05, 0.001)

#: Slab extent in meters.
SLAB_EXTENT = (3e-3, 7e-3, 20e-3)

#: Named sample points (meters).
P1 = (0.0, 0.0, 0.0)
P8 = SLAB_EXTENT
P9 = tuple(0.5 * c for c in SLAB_EXTENT)

#: Wall-clock cap on simulated time; every run stops as soon as the whole
#: slab has activated, so the cap only matters if propagation stalls.
TIME_CAP = 150e-3

_DIAGONAL_SAMPLES = 41
_CSV_HEADER = "element_kind,dx_mm,dt_ms,point,activation_ms"


def benchmark_config(dx_mm, dt_ms, kind):
    """Assemble the benchmark :class:`SimulationConfig` for one resolution.

    Conductivities and the stimulus amplitude are the published
    chi*Cm-rescaled values, so the dimensional rescaling factors stay at
    their defaults of one.
    """
    mesh = build_slab_mesh(SlabSpec(SLAB_EXTENT, dx_mm * 1e-3, kind))
    fibers = slab_fiber_field(mesh, transmural_axis=0,
                              endo_angle=0.0, epi_angle=0.0)
    volume = VolumeConfig(
        label="Volumetric parameters",
        material_ids=(1,),
        ionic=IonicModelSpec(ModelKind.TTP06),
        sigma_l=0.95298e-4,
        sigma_t=0.12576e-4,
        sigma_n=0.12576e-4,
    )
    stimulus = StimulusProtocol(
        shape=StimulusShape.CUBIC,
        sites=((0.75e-3, 0.75e-3, 0.75e-3),),
        amplitudes=(35.714,),
        extents=(1.5e-3,),
        initial_times=(0.0,),
        durations=(2e-3,),
    )
    return SimulationConfig(
        mesh=mesh,
        fibers=fibers,
        volumes=(volume,),
        bdf_order=2,
        dt=dt_ms * 1e-3,
        final_time=TIME_CAP,
        stimuli=(stimulus,),
    )


@dataclass
class BenchmarkCase:
    """Reduced outcome of one benchmark resolution."""

    element_kind: str
    dx_mm: float
    dt_ms: float
    p1_ms: float
    p9_ms: float
    p8_ms: float
    fully_activated: bool
    num_dofs: int
    steps: int
    max_cg_iterations: int
    wall_seconds: float
    diagonal_fractions: list
    diagonal_ms: list

    def point_rows(self):
        """Rows for the convergence CSV (schema :data:`_CSV_HEADER`)."""
        return [
            (self.element_kind, self.dx_mm, self.dt_ms, name, value)
            for name, value in (("P1", self.p1_ms),
                                ("P9", self.p9_ms),
                                ("P8", self.p8_ms))
        ]


def _cache_path(cache_dir, dx_mm, dt_ms, kind):
    return Path(cache_dir) / f"{kind.value}_dx{dx_mm:g}_dt{dt_ms:g}.json"


def _diagonal_nodes(mesh):
    """Node ids nearest to evenly spaced stations on the P1-P8 diagonal.

    Consecutive duplicates (possible on coarse meshes) are collapsed so
    the monotonicity check compares distinct nodes.
    """
    fractions = np.linspace(0.0, 1.0, _DIAGONAL_SAMPLES)
    extent = np.asarray(SLAB_EXTENT)
    nodes, kept = [], []
    for f in fractions:
        node = nearest_node(mesh, f * extent)
        if not nodes or node != nodes[-1]:
            nodes.append(node)
            kept.append(float(f))
    return kept, nodes


def run_benchmark_case(dx_mm, dt_ms, kind, cache_dir=None):
    """Run (or recall) one benchmark resolution and reduce it.

    When ``cache_dir`` is given and holds a result for this resolution,
    the cached case is returned without running the solver.
    """
    if cache_dir is not None:
        path = _cache_path(cache_dir, dx_mm, dt_ms, kind)
        if path.exists():
            return BenchmarkCase(**json.loads(path.read_text()))

    config = benchmark_config(dx_mm, dt_ms, kind)
    start = time.perf_counter()
    report = run(config, stop_when_fully_activated=True)
    wall = time.perf_counter() - start

    activation = report.activation_times
    fractions, diag_nodes = _diagonal_nodes(config.mesh)
    case = BenchmarkCase(
        element_kind=kind.value,
        dx_mm=dx_mm,
        dt_ms=dt_ms,
        p1_ms=activation[nearest_node(config.mesh, P1)] * 1e3,
        p9_ms=activation[nearest_node(config.mesh, P9)] * 1e3,
        p8_ms=activation[nearest_node(config.mesh, P8)] * 1e3,
        fully_activated=bool(report.solver.fully_activated()),
        num_dofs=config.mesh.num_nodes,
        steps=report.steps,
        max_cg_iterations=report.max_cg_iterations,
        wall_seconds=wall,
        diagonal_fractions=fractions,
        diagonal_ms=[activation[n] * 1e3 for n in diag_nodes],
    )
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        path = _cache_path(cache_dir, dx_mm, dt_ms, kind)
        path.write_text(json.dumps(asdict(case), indent=1))
    return case


def write_convergence_csv(path, cases):
    """Write the per-point convergence CSV for a list of cases."""
    lines = [_CSV_HEADER]
    for case in cases:
        for kind, dx, dt, point, ms in case.point_rows():
            lines.append(f"{kind},{dx:g},{dt:g},{point},{ms:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def convergence_table(cases):
    """Human-readable convergence table matching the CSV contents."""
    header = (f"{'kind':<6} {'dx [mm]':>8} {'dt [ms]':>8} "
              f"{'P1 [ms]':>9} {'P9 [ms]':>9} {'P8 [ms]':>9}")
    rows = [header, "-" * len(header)]
    for c in cases:
        rows.append(f"{c.element_kind:<6} {c.dx_mm:>8g} {c.dt_ms:>8g} "
                    f"{c.p1_ms:>9.3f} {c.p9_ms:>9.3f} {c.p8_ms:>9.3f}")
    return "\n".join(rows)


def evaluate_cases(cases):
    """Pass/fail lines against the convergence acceptance thresholds.

    Checks, per element kind: P1 activates within 5 ms everywhere, the
    P8 sequence is monotone with strictly shrinking steps as resolution
    increases, and (when the finest standard pair is present) P8 falls
    inside the converged 40-45 ms reference window.
    """
    lines, all_ok = [], True

    def check(label, ok):
        nonlocal all_ok
        all_ok = all_ok and ok
        lines.append(f"[{'PASS' if ok else 'FAIL'}] {label}")

    by_kind = {}
    for c in cases:
        by_kind.setdefault(c.element_kind, []).append(c)
    for kind, group in by_kind.items():
        group.sort(key=lambda c: -c.dx_mm)
        for c in group:
            check(f"{kind} dx={c.dx_mm:g}: P1 activation "
                  f"{c.p1_ms:.3f} ms < 5 ms", 0.0 <= c.p1_ms < 5.0)
            check(f"{kind} dx={c.dx_mm:g}: P1 < P9 < P8 ordering",
                  c.p1_ms < c.p9_ms < c.p8_ms)
        p8 = [c.p8_ms for c in group]
        if len(group) >= 2:
            diffs = np.diff(p8)
            check(f"{kind}: P8 sequence monotone across resolutions",
                  bool(np.all(diffs > 0)) or bool(np.all(diffs < 0)))
        if len(group) >= 3:
            steps = np.abs(np.diff(p8))
            check(f"{kind}: P8 differences strictly decrease",
                  bool(np.all(np.diff(steps) < 0)))
        finest = group[-1]
        if (finest.dx_mm, finest.dt_ms) == STANDARD_RESOLUTIONS[-1]:
            check(f"{kind}: P8 at finest = {finest.p8_ms:.3f} ms "
                  f"in [40, 45] ms", 40.0 <= finest.p8_ms <= 45.0)
    kinds = sorted(by_kind)
    if len(kinds) == 2:
        finest = [sorted(by_kind[k], key=lambda c: c.dx_mm)[0]
                  for k in kinds]
        if len({(c.dx_mm, c.dt_ms) for c in finest}) == 1:
            gap = abs(finest[0].p8_ms - finest[1].p8_ms)
            check(f"Hex8/Tet4 P8 gap at finest common pair = "
                  f"{gap:.3f} ms < 2 ms", gap < 2.0)
    return lines, all_ok
