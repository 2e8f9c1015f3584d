"""The coupled tissue time loop.

Each step advances the ionic states implicitly-in-the-gates at the
extrapolated potential, evaluates the nodal ionic current, and solves

    (alpha/dt * M + K) u_{n+1} = M (u_BDF/dt + I_app,n+1) - sum_i M^i I^i_ion

by Jacobi-preconditioned CG, warm-started from the extrapolated
potential.  The system matrix is rebuilt only when the BDF startup ramp
changes alpha; the right-hand side is recomputed every step from
matrix-vector products.

Subdomains with conduction disabled are excluded from every operator;
their interior nodes are pinned to the resting potential through
identity rows, so the wavefront has to travel around them.
"""

import struct
import time
import zlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    ConfigError,
    CorruptFile,
    DofCountMismatch,
    NonFiniteState,
    VersionMismatch,
)
from .fem import FeSpace, assemble_mass, assemble_stiffness, ici_lift
from .geometry import nearest_node
from .ionic import model_module, pace_single_cell
from .linalg import JacobiCg
from .outputs import OutputConfig, write_csv, write_vtk, write_zero_d_trace
from .timestepping import HistoryRing, bdf_coefficients

ACTIVATION_SENTINEL = -1.0


# ---------------------------------------------------------------------------
# Stimuli
# ---------------------------------------------------------------------------


class StimulusShape(Enum):
    CUBIC = "Cubic"
    SPHERICAL = "Spherical"
    GAUSSIAN = "Gaussian"


@dataclass
class StimulusProtocol:
    """A family of identically shaped impulses.

    ``extents`` holds the cube edge length, sphere radius, or Gaussian
    standard deviation depending on the shape.  ``period`` = 0 fires each
    impulse once; otherwise every impulse repeats with that period.
    """

    shape: StimulusShape
    sites: tuple
    amplitudes: tuple
    extents: tuple
    initial_times: tuple
    durations: tuple
    period: float = 0.0

    def __post_init__(self):
        lists = (self.sites, self.amplitudes, self.extents,
                 self.initial_times, self.durations)
        lengths = {len(x) for x in lists}
        if len(lengths) != 1:
            raise ValueError("stimulus lists must all have the same length")
        if any(d <= 0 for d in self.durations):
            raise ValueError("stimulus durations must be positive")
        if self.period != 0 and self.durations and \
                self.period <= max(self.durations):
            raise ValueError("stimulus period must exceed every duration")

    def window_active(self, index, t):
        s = t - self.initial_times[index]
        if s < 0.0:
            return False
        if self.period > 0.0:
            s -= self.period * np.floor(s / self.period)
        return s < self.durations[index]

    def spatial_factor(self, coords, index):
        """Amplitude pattern of one impulse over an (N, 3) point array."""
        site = np.asarray(self.sites[index], dtype=np.float64)
        amp = self.amplitudes[index]
        extent = self.extents[index]
        if self.shape is StimulusShape.CUBIC:
            half = extent / 2.0
            inside = (np.abs(coords - site) <= half * (1 + 1e-12)).all(axis=1)
            return amp * inside.astype(np.float64)
        delta2 = ((coords - site) ** 2).sum(axis=1)
        if self.shape is StimulusShape.SPHERICAL:
            inside = delta2 <= extent * extent * (1 + 1e-12)
            return amp * inside.astype(np.float64)
        return amp * np.exp(-delta2 / (2.0 * extent * extent))


def applied_current(protocols, x, t):
    """Total applied current density at a point and time (V/s)."""
    point = np.asarray(x, dtype=np.float64).reshape(1, 3)
    total = 0.0
    for protocol in protocols:
        for i in range(len(protocol.sites)):
            if protocol.window_active(i, t):
                total += protocol.spatial_factor(point, i)[0]
    return float(total)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class VolumeConfig:
    """One labeled subdomain group: materials, membrane model, conduction."""

    label: str
    material_ids: tuple
    ionic: object  # IonicModelSpec
    sigma_l: float = 0.0
    sigma_t: float = 0.0
    sigma_n: float = 0.0
    disabled: bool = False
    prepacing_time: float = 0.0
    prepacing_protocol: object = None  # PacingProtocol0D when prepacing
    zero_d_csv_path: str = None

    def __post_init__(self):
        self.material_ids = tuple(int(m) for m in self.material_ids)
        if not self.material_ids:
            raise ValueError(f"volume {self.label!r} claims no material IDs")


@dataclass
class LinearSolverConfig:
    tolerance: float = 1e-10
    max_iterations: int = 2000


@dataclass
class ActivationConfig:
    enabled: bool = False
    path: str = "activation.vtk"
    threshold: float = None  # native potential units; None = per-model


@dataclass
class CheckpointConfig:
    enabled: bool = False
    path: str = "checkpoint.bin"


@dataclass
class SimulationConfig:
    """Everything a tissue run needs, in solver units.

    ``membrane_capacitance`` (C_m) and ``chi_m`` (surface-to-volume
    ratio) default to 1, in which case conductivities and stimulus
    amplitudes are taken as the already-rescaled diffusivities (m^2/s)
    and current densities (V/s).  With other values, the solver applies
    the rescaling D = sigma/(chi_m C_m), I_app = amplitude/C_m itself;
    ionic kernels already produce their current in dV/dt form.
    """

    mesh: object
    fibers: object
    volumes: tuple
    bdf_order: int = 2
    dt: float = 1e-4
    final_time: float = 1e-3
    degree: int = 1
    stimuli: tuple = ()
    membrane_capacitance: float = 1.0
    chi_m: float = 1.0
    linear_solver: LinearSolverConfig = field(default_factory=LinearSolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    activation: ActivationConfig = field(default_factory=ActivationConfig)
    checkpoint: CheckpointConfig = field(default_factory=CheckpointConfig)

    def validate(self):
        if self.dt <= 0:
            raise ConfigError("Time solver/Time step", "must be positive")
        if self.final_time <= 0:
            raise ConfigError("Time solver/Final time", "must be positive")
        if self.membrane_capacitance <= 0 or self.chi_m <= 0:
            raise ConfigError(
                "Dimensional rescaling", "factors must be positive"
            )
        bdf_coefficients(self.bdf_order)
        claimed = {}
        for vol in self.volumes:
            for mat in vol.material_ids:
                if mat in claimed:
                    raise ConfigError(
                        f"{vol.label}/Material IDs",
                        f"material {mat} already claimed by "
                        f"{claimed[mat]!r}",
                    )
                claimed[mat] = vol.label
        present = set(int(m) for m in np.unique(self.mesh.material_ids))
        unclaimed = present - set(claimed)
        if unclaimed:
            raise ConfigError(
                "Physical constants and models",
                f"mesh materials {sorted(unclaimed)} not claimed by any "
                f"volume",
            )
        return self


# ---------------------------------------------------------------------------
# Timing
# ---------------------------------------------------------------------------

TIMING_SECTIONS = (
    "Initialization",
    "Ionic model update",
    "Monodomain assembly",
    "Linear solver",
    "Other",
)


class SectionTimer:
    """Monotonic wall-clock accumulator over named sections."""

    def __init__(self):
        self.totals = {name: 0.0 for name in TIMING_SECTIONS}

    class _Span:
        def __init__(self, timer, name):
            self.timer = timer
            self.name = name

        def __enter__(self):
            self.start = time.perf_counter()
            return self

        def __exit__(self, *exc):
            self.timer.totals[self.name] += time.perf_counter() - self.start
            return False

    def section(self, name):
        return self._Span(self, name)


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


class _Volume:
    """Runtime data of one volume: DOF slice, kernels, state history."""

    def __init__(self, config, space, threshold_override=None):
        self.config = config
        self.module = model_module(config.ionic.kind)
        self.packed = self.module.pack(
            config.ionic.parameters, config.ionic.cell_type
        )
        dof_sets = [space.dofs_in_subdomain(m) for m in config.material_ids]
        self.dofs = np.unique(np.concatenate(dof_sets))
        self.ring = HistoryRing(3)
        self.num_vars = self.module.NUM_VARS
        self.rest_u = float(config.ionic.initial_state.u)
        self.rest_w = config.ionic.initial_state.w.copy()
        if threshold_override is not None:
            self.threshold = threshold_override
        else:
            self.threshold = self.module.ACTIVATION_THRESHOLD

    def initial_cell_state(self, order):
        """Resting or 0D-pre-paced membrane state for nodal initialization."""
        cfg = self.config
        if cfg.disabled or cfg.prepacing_time <= 0.0:
            return cfg.ionic.initial_state, None
        state, trace = pace_single_cell(
            cfg.ionic, cfg.prepacing_protocol, order=order
        )
        return state, trace


class TissueSolver:
    """Owns operators and state; advances the coupled system step by step."""

    def __init__(self, config):
        config.validate()
        self.config = config
        self.timer = SectionTimer()
        with self.timer.section("Initialization"):
            self._initialize()

    # -- setup ---------------------------------------------------------------

    def _initialize(self):
        config = self.config
        self.space = FeSpace(config.mesh, config.degree)
        n = self.space.num_dofs
        self.dt = config.dt
        self.step_index = 0
        self.time = 0.0

        # volumes, sorted so smaller material IDs initialize last (they win
        # the tie-break at shared interface DOFs)
        self.volumes = [
            _Volume(vol, self.space, config.activation.threshold)
            for vol in config.volumes
        ]
        by_descending_mat = sorted(
            self.volumes, key=lambda v: min(v.config.material_ids),
            reverse=True,
        )

        # conduction operators over non-disabled materials only
        from .fem import ConductivitySet

        cset = ConductivitySet()
        active_materials = set()
        diff_scale = 1.0 / (config.chi_m * config.membrane_capacitance)
        for vol in self.volumes:
            for mat in vol.config.material_ids:
                cset.add(mat, vol.config.sigma_l * diff_scale,
                         vol.config.sigma_t * diff_scale,
                         vol.config.sigma_n * diff_scale,
                         vol.config.disabled)
                if not vol.config.disabled:
                    active_materials.add(mat)
        self.mass = assemble_mass(self.space, active_materials)
        self.stiffness = assemble_stiffness(self.space, cset, config.fibers)
        self.inactive = self.space.inactive_dof_mask(cset.disabled_ids())

        self.volume_masses = {}
        for vol in self.volumes:
            if vol.config.disabled:
                continue
            mats = set(vol.config.material_ids)
            if mats == active_materials:
                self.volume_masses[vol.config.label] = self.mass
            else:
                self.volume_masses[vol.config.label] = assemble_mass(
                    self.space, mats
                )

        # nodal initial state (0D pre-pacing per volume; smaller ID wins)
        u0 = np.zeros(n)
        self.rest_field = np.zeros(n)
        self.thresholds = np.zeros(n)
        for vol in by_descending_mat:
            state, trace = vol.initial_cell_state(config.bdf_order)
            w0 = np.broadcast_to(
                state.w, (vol.dofs.size, vol.num_vars)
            ).copy()
            vol.ring = HistoryRing(3)
            vol.ring.push(w0)
            u0[vol.dofs] = state.u
            self.rest_field[vol.dofs] = vol.rest_u
            self.thresholds[vol.dofs] = vol.threshold
            if trace is not None and vol.config.zero_d_csv_path:
                write_zero_d_trace(vol.config.zero_d_csv_path, trace)
        u0[self.inactive] = self.rest_field[self.inactive]
        self.u_ring = HistoryRing(3)
        self.u_ring.push(u0)

        # stimuli: time-independent spatial factors, one per impulse
        self._impulses = []
        coords = self.space.dof_coords
        for protocol in config.stimuli:
            for i in range(len(protocol.sites)):
                profile = protocol.spatial_factor(coords, i)
                profile /= config.membrane_capacitance
                profile[self.inactive] = 0.0
                self._impulses.append((protocol, i, profile))

        # activation map
        self.activation_time = np.full(n, ACTIVATION_SENTINEL)
        self.best_slope = np.full(n, -np.inf)
        self.frozen = np.zeros(n, dtype=bool)
        self.frozen[self.inactive] = True

        self._phase_alpha = None
        self._solver = None
        self.last_iterations = 0
        self.max_iterations_seen = 0

    def _system_for(self, alpha):
        if self._phase_alpha == alpha:
            return self._solver
        matrix = (alpha / self.dt) * self.mass + self.stiffness
        matrix = matrix.tocsr()
        inactive_rows = np.flatnonzero(self.inactive)
        if inactive_rows.size:
            # rows/cols of inactive DOFs are structurally zero (their
            # elements were excluded); pin them with unit diagonals
            diag = matrix.diagonal()
            diag[inactive_rows] = 1.0
            matrix.setdiag(diag)
        self._solver = JacobiCg(
            matrix,
            self.config.linear_solver.tolerance,
            self.config.linear_solver.max_iterations,
        )
        self._phase_alpha = alpha
        return self._solver

    # -- stepping ------------------------------------------------------------

    def applied_field(self, t):
        """Nodal samples of the applied current density at time t."""
        total = None
        for protocol, i, profile in self._impulses:
            if protocol.window_active(i, t):
                total = profile.copy() if total is None else total + profile
        return total

    def step(self):
        """Advance the coupled system by one time step."""
        order = min(self.step_index + 1, self.config.bdf_order)
        scheme = bdf_coefficients(order)
        alpha = scheme.alpha
        t_next = self.time + self.dt

        with self.timer.section("Monodomain assembly"):
            solver = self._system_for(alpha)
            u_bdf = self.u_ring.weighted_sum(scheme.history_weights)
            u_ext = self.u_ring.weighted_sum(scheme.ext_weights)

        with self.timer.section("Ionic model update"):
            new_states = []
            currents = {}
            for vol in self.volumes:
                if vol.config.disabled:
                    continue
                dofs = vol.dofs
                w_bdf = vol.ring.weighted_sum(scheme.history_weights)
                w_ext = vol.ring.weighted_sum(scheme.ext_weights)
                w_new = np.empty_like(w_ext)
                i_out = np.empty(dofs.size)
                vol.module.advance_kernel(
                    u_ext[dofs], w_ext, w_bdf, alpha, self.dt,
                    vol.packed, w_new, i_out,
                )
                full = np.zeros(self.space.num_dofs)
                full[dofs] = i_out
                currents[vol.config.label] = full
                new_states.append((vol, w_new))

        with self.timer.section("Monodomain assembly"):
            combo = u_bdf / self.dt
            app = self.applied_field(t_next)
            if app is not None:
                combo = combo + app
            rhs = self.mass @ combo
            if currents:
                rhs -= ici_lift(self.volume_masses, currents)
            rhs[self.inactive] = self.rest_field[self.inactive]

        with self.timer.section("Linear solver"):
            u_new, iters, _ = solver.solve(rhs, initial_guess=u_ext)
            self.last_iterations = iters
            self.max_iterations_seen = max(self.max_iterations_seen, iters)

        with self.timer.section("Other"):
            if not np.isfinite(u_new).all():
                raise NonFiniteState(
                    f"non-finite potential at t = {t_next:.6g} s"
                )
            self._update_activation(u_new)
            for vol, w_new in new_states:
                vol.ring.push(w_new)
            self.u_ring.push(u_new)
            self.step_index += 1
            self.time = t_next
        return u_new

    def _update_activation(self, u_new):
        u_prev = self.u_ring[0]
        slope = (u_new - u_prev) / self.dt
        unfrozen = ~self.frozen
        better = unfrozen & (slope > self.best_slope)
        self.best_slope[better] = slope[better]
        self.activation_time[better] = self.time + self.dt
        crossed = unfrozen & (u_prev <= self.thresholds) & \
            (u_new > self.thresholds)
        self.frozen[crossed] = True

    @property
    def potential(self):
        return self.u_ring[0]

    @property
    def activation_map(self):
        """Activation times, sentinel where no threshold crossing occurred.

        While a DOF is still below threshold its running argmax-slope
        time is only provisional; reporting it for nodes the wave never
        reached (blocked regions, non-conducting material) would invent
        activations, so those stay at :data:`ACTIVATION_SENTINEL`.
        """
        return np.where(self.frozen, self.activation_time,
                        ACTIVATION_SENTINEL)

    def fully_activated(self):
        """True when every conducting DOF has frozen its activation time."""
        return bool(self.frozen[~self.inactive].all())

    # -- checkpointing ---------------------------------------------------

    def checkpoint_payload(self):
        n = self.space.num_dofs
        parts = [struct.pack("<IQ", _CHECKPOINT_VERSION, n)]
        parts.append(struct.pack("<Qd", self.step_index, self.time))
        parts.append(struct.pack("<I", self.u_ring.fill))
        for k in range(self.u_ring.fill):
            parts.append(np.ascontiguousarray(self.u_ring[k]).tobytes())
        parts.append(self.activation_time.tobytes())
        parts.append(self.best_slope.tobytes())
        parts.append(self.frozen.astype(np.uint8).tobytes())
        parts.append(struct.pack("<I", len(self.volumes)))
        for vol in self.volumes:
            label = vol.config.label.encode("utf-8")
            parts.append(struct.pack("<I", len(label)))
            parts.append(label)
            parts.append(struct.pack(
                "<IQI", vol.num_vars, vol.dofs.size, vol.ring.fill
            ))
            for k in range(vol.ring.fill):
                parts.append(np.ascontiguousarray(vol.ring[k]).tobytes())
        return b"".join(parts)

    def restore(self, payload):
        version, n = struct.unpack_from("<IQ", payload, 0)
        if version != _CHECKPOINT_VERSION:
            raise VersionMismatch(
                f"checkpoint version {version}, expected "
                f"{_CHECKPOINT_VERSION}"
            )
        if n != self.space.num_dofs:
            raise DofCountMismatch(
                f"checkpoint has {n} DOFs, mesh has {self.space.num_dofs}"
            )
        off = struct.calcsize("<IQ")
        self.step_index, self.time = struct.unpack_from("<Qd", payload, off)
        off += struct.calcsize("<Qd")

        def take_array(count, dtype=np.float64):
            nonlocal off
            nbytes = count * np.dtype(dtype).itemsize
            arr = np.frombuffer(
                payload, dtype=dtype, count=count, offset=off
            ).copy()
            off += nbytes
            return arr

        (fill,) = struct.unpack_from("<I", payload, off)
        off += 4
        self.u_ring = HistoryRing(3)
        vectors = [take_array(n) for _ in range(fill)]
        for vec in reversed(vectors):
            self.u_ring.push(vec)
        self.activation_time = take_array(n)
        self.best_slope = take_array(n)
        self.frozen = take_array(n, np.uint8).astype(bool)
        (n_vols,) = struct.unpack_from("<I", payload, off)
        off += 4
        if n_vols != len(self.volumes):
            raise CorruptFile(
                f"checkpoint has {n_vols} volumes, config has "
                f"{len(self.volumes)}"
            )
        for vol in self.volumes:
            (label_len,) = struct.unpack_from("<I", payload, off)
            off += 4
            label = payload[off:off + label_len].decode("utf-8")
            off += label_len
            if label != vol.config.label:
                raise CorruptFile(
                    f"checkpoint volume {label!r} does not match "
                    f"{vol.config.label!r}"
                )
            num_vars, ndofs, wfill = struct.unpack_from("<IQI", payload, off)
            off += struct.calcsize("<IQI")
            if num_vars != vol.num_vars or ndofs != vol.dofs.size:
                raise DofCountMismatch(
                    f"checkpoint volume {label!r} shape mismatch"
                )
            vol.ring = HistoryRing(3)
            arrays = [
                take_array(ndofs * num_vars).reshape(ndofs, num_vars)
                for _ in range(wfill)
            ]
            for arr in reversed(arrays):
                vol.ring.push(arr)
        # force a system rebuild: alpha phase may differ after restore
        self._phase_alpha = None


_CHECKPOINT_MAGIC = b"MHEP"
_CHECKPOINT_VERSION = 1


def save_checkpoint(solver, path):
    """Serialize the full solver state (histories included) to disk."""
    payload = solver.checkpoint_payload()
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def load_checkpoint(path):
    """Read and checksum-verify a checkpoint; returns the raw payload."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(_CHECKPOINT_MAGIC) + 4 or \
            not blob.startswith(_CHECKPOINT_MAGIC):
        raise CorruptFile(f"{path} is not a checkpoint file")
    payload = blob[len(_CHECKPOINT_MAGIC):-4]
    (stored,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != stored:
        raise CorruptFile(f"{path} failed its checksum")
    return payload


# ---------------------------------------------------------------------------
# Run loop
# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    activation_times: np.ndarray
    final_potential: np.ndarray
    timings: dict
    steps: int
    max_cg_iterations: int
    csv_path: str = None
    vtk_paths: tuple = ()
    solver: TissueSolver = None


def run(config, stop_when_fully_activated=False, resume_from=None):
    """Execute a configured simulation to its final time.

    ``stop_when_fully_activated`` ends the loop early once every
    conducting DOF has a frozen activation time (used by the benchmark
    harness, where only the activation map matters).
    """
    solver = TissueSolver(config)
    if resume_from is not None:
        solver.restore(load_checkpoint(resume_from))

    n_steps = int(round(config.final_time / config.dt))
    out = config.output
    csv_rows = []
    vtk_paths = []
    probe_dofs = [
        nearest_node(config.mesh, p) for p in out.probe_points
    ]

    def record():
        with solver.timer.section("Other"):
            u = solver.potential
            if out.enable_csv:
                csv_rows.append(
                    (solver.time, u.min(), u.max(),
                     *[u[d] for d in probe_dofs])
                )
            if out.enable_field_output:
                path = f"{out.field_stem}_{solver.step_index:06d}.vtk"
                write_vtk(path, config.mesh, {"transmembrane_potential": u})
                vtk_paths.append(path)

    if solver.step_index == 0:
        record()
    while solver.step_index < n_steps:
        solver.step()
        if solver.step_index % out.stride == 0 or \
                solver.step_index == n_steps:
            record()
        if stop_when_fully_activated and solver.fully_activated():
            break

    with solver.timer.section("Other"):
        csv_path = None
        if out.enable_csv:
            write_csv(out.csv_path, csv_rows, probe_count=len(probe_dofs))
            csv_path = out.csv_path
        if config.activation.enabled:
            write_vtk(
                config.activation.path, config.mesh,
                {"activation_time": solver.activation_map},
            )
            vtk_paths.append(config.activation.path)
        if config.checkpoint.enabled:
            save_checkpoint(solver, config.checkpoint.path)

    return RunReport(
        activation_times=solver.activation_map,
        final_potential=solver.potential.copy(),
        timings=dict(solver.timer.totals),
        steps=solver.step_index,
        max_cg_iterations=solver.max_iterations_seen,
        csv_path=csv_path,
        vtk_paths=tuple(vtk_paths),
        solver=solver,
    )
