"""Typed binding from parameter trees to solver configuration.

Binding happens in two stages so that parameter files can be validated
without touching the filesystem:

1. :func:`bind_parameters` turns a parsed tree into
   :class:`BoundParameters` — every value typed and range-checked, every
   error a :class:`ConfigError` carrying the full parameter path.  Files
   referencing meshes that are not present (or features this solver does
   not implement, like quadratic elements) still bind.
2. :func:`build_simulation` consumes the bound parameters, loads the
   mesh and fibers, and produces a validated
   :class:`~monodomain.simulation.SimulationConfig` ready to run.

Volumes are discovered structurally: every subsection found under
``Physical constants and models`` — other than the per-volume sections
``Monodomain conductivities`` and ``Ionic model parameters`` — is a
volume, including subsections nested inside another volume (published
listings occasionally nest sibling volumes that way).  When the file
defines no volume at all, the global ``Volumetric parameters`` defaults
apply.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field

from .errors import ConfigError
from .geometry import ElementKind, import_fibers, import_msh
from .geometry import slab_fiber_field
from .ionic import model_module
from .ionic.base import (
    CellState,
    CellType,
    IonicModelSpec,
    ModelKind,
    PacingProtocol0D,
)
from .outputs import OutputConfig
from .params import (
    GLOBAL_VOLUME_LABEL,
    ParameterTree,
    registry_tree,
    volume_prototype,
)
from .simulation import (
    ActivationConfig,
    CheckpointConfig,
    LinearSolverConfig,
    SimulationConfig,
    StimulusProtocol,
    StimulusShape,
    VolumeConfig,
)

#: Subsections of a volume that are never themselves volumes.
_NON_VOLUME_SECTIONS = {"Monodomain conductivities", "Ionic model parameters"}

_AXES = {"x": 0, "y": 1, "z": 2}


class _Scope:
    """A parameter subtree plus the path used in error messages."""

    def __init__(self, tree, path=()):
        self.tree = tree
        self.path = tuple(path)

    def sub(self, name):
        return _Scope(self.tree.child(name), self.path + (name,))

    def _path_of(self, key):
        parts = self.path + ((key,) if key else ())
        return " / ".join(parts)

    def fail(self, key, message):
        raise ConfigError(self._path_of(key), message)

    def raw(self, key):
        value = self.tree.value(key)
        if value is None:
            self.fail(key, "missing value (and no registered default)")
        return value

    def user_set(self, key):
        entry = self.tree.entries.get(key)
        return entry is not None and entry.user_set

    def str(self, key):
        return self.raw(key)

    def float(self, key):
        raw = self.raw(key)
        try:
            return float(raw)
        except ValueError:
            self.fail(key, f"expected a number, got {raw!r}")

    def int(self, key):
        raw = self.raw(key)
        try:
            return int(raw)
        except ValueError:
            self.fail(key, f"expected an integer, got {raw!r}")

    def bool(self, key):
        raw = self.raw(key).lower()
        if raw in ("true", "false"):
            return raw == "true"
        self.fail(key, f"expected true or false, got {self.raw(key)!r}")

    def floats(self, key):
        raw = self.raw(key)
        try:
            return tuple(float(tok) for tok in _tokens(raw))
        except ValueError:
            self.fail(key, f"expected a list of numbers, got {raw!r}")

    def ints(self, key):
        raw = self.raw(key)
        try:
            return tuple(int(tok) for tok in _tokens(raw))
        except ValueError:
            self.fail(key, f"expected a list of integers, got {raw!r}")

    def triplets(self, key):
        """Comma-separated coordinate triplets (or one flat multiple of 3)."""
        raw = self.raw(key)
        chunks = [_tokens(c) for c in raw.split(",") if _tokens(c)]
        if not chunks:
            return ()
        try:
            if all(len(c) == 3 for c in chunks):
                return tuple(tuple(float(t) for t in c) for c in chunks)
            flat = [float(t) for c in chunks for t in c]
        except ValueError:
            self.fail(key, f"expected coordinate triplets, got {raw!r}")
        if len(flat) % 3:
            self.fail(key, f"expected three numbers per point, got {raw!r}")
        return tuple(tuple(flat[i:i + 3]) for i in range(0, len(flat), 3))


def _tokens(raw):
    return [tok for tok in re.split(r"[\s,]+", raw.strip()) if tok]


def _broadcast(scope, key, values, count):
    if len(values) == count:
        return tuple(values)
    if len(values) == 1:
        return tuple(values) * count
    scope.fail(key, f"expected 1 or {count} values, got {len(values)}")


# ---------------------------------------------------------------------------
# Bound parameter bundles
# ---------------------------------------------------------------------------


@dataclass
class MeshPlan:
    element_kind: ElementKind
    degree: int
    refinements: int
    quadrature_points: int
    filename: str
    scaling: float


@dataclass
class FiberPlan:
    geometry_type: str
    transmural_axis: int
    endo_angle: float
    epi_angle: float
    import_path: str
    array_names: tuple
    import_scaling: float
    output_enabled: bool
    output_stem: str


@dataclass
class BoundVolume:
    label: str
    material_ids: tuple
    ionic: IonicModelSpec
    sigma_l: float
    sigma_t: float
    sigma_n: float
    disabled: bool
    pacing: PacingProtocol0D
    zero_d_csv: str = None


@dataclass
class SerializationPlan:
    enabled: bool
    filename: str
    restore_from: str


@dataclass
class BoundParameters:
    """Fully typed contents of a parameter file (no filesystem access)."""

    mesh: MeshPlan
    fibers: FiberPlan
    volumes: tuple
    prepacing_time: float
    stimuli: tuple
    dt: float
    final_time: float
    bdf_order: int
    chi_m: float
    membrane_capacitance: float
    linear_solver: LinearSolverConfig
    activation: ActivationConfig
    output: OutputConfig
    serialization: SerializationPlan


# ---------------------------------------------------------------------------
# Binding
# ---------------------------------------------------------------------------


def _scan_volume_sections(tree):
    """(label, subtree) of every volume section, in document order."""
    found = []
    for name, child in tree.children.items():
        if name in _NON_VOLUME_SECTIONS:
            continue
        found.append((name, child))
        found.extend(_scan_volume_sections(child))
    return found


def _bind_initial_state(mod, constants_scope):
    """CellState from user-set entries of an Initial conditions section."""
    scope = constants_scope.sub("Initial conditions")
    names = list(mod.default_initial_conditions())
    if not any(scope.user_set(name) for name in names):
        return None
    values = dict(mod.default_initial_conditions())
    for name in names:
        if scope.user_set(name):
            values[name] = scope.float(name)
    return CellState(values["Transmembrane potential"],
                     [values[name] for name in names[1:]])


def _bind_pacing(ionic_scope, prepacing_time):
    solver = ionic_scope.sub("Time solver 0D")
    stim = ionic_scope.sub("Applied current 0D")
    times = stim.floats("Initial times")
    durations = stim.floats("Durations")
    amplitudes = stim.floats("Amplitudes")
    count = max(len(times), len(durations), len(amplitudes), 1)
    try:
        return PacingProtocol0D(
            initial_times=_broadcast(stim, "Initial times", times, count),
            durations=_broadcast(stim, "Durations", durations, count),
            amplitudes=_broadcast(stim, "Amplitudes", amplitudes, count),
            period=stim.float("Period"),
            total_time=prepacing_time,
            dt=solver.float("Time step"),
        )
    except ValueError as err:
        stim.fail("Amplitudes", str(err))


def _bind_volume(label, user_tree, path, prepacing_time):
    merged = volume_prototype().merged_with(user_tree)
    scope = _Scope(merged, path)

    ids = scope.ints("Material IDs")
    if not ids:
        scope.fail("Material IDs", "at least one material ID is required")
    try:
        kind = ModelKind.from_name(scope.str("Ionic model"))
    except ValueError as err:
        scope.fail("Ionic model", str(err))

    mod = model_module(kind)
    ionic_scope = scope.sub("Ionic model parameters")
    model_scope = ionic_scope.sub(kind.value)
    cell_type = None
    if kind is ModelKind.TTP06:
        try:
            cell_type = CellType.from_name(model_scope.str("Cell type"))
        except ValueError as err:
            model_scope.fail("Cell type", str(err))

    constants = model_scope.sub("Physical constants")
    overrides = {
        name: constants.float(name)
        for name in mod.default_parameters()
        if constants.user_set(name)
    }
    try:
        ionic = IonicModelSpec(
            kind, cell_type, overrides,
            _bind_initial_state(mod, constants),
        )
    except ValueError as err:
        constants.fail(None, str(err))

    cond = scope.sub("Monodomain conductivities")
    trace = ionic_scope.sub("0D Output")
    zero_d = (trace.str("CSV filename")
              if trace.bool("Enable CSV output") else None)

    return BoundVolume(
        label=label,
        material_ids=ids,
        ionic=ionic,
        sigma_l=cond.float("Longitudinal conductivity"),
        sigma_t=cond.float("Transversal conductivity"),
        sigma_n=cond.float("Normal conductivity"),
        disabled=scope.bool("Disable conduction"),
        pacing=_bind_pacing(ionic_scope, prepacing_time),
        zero_d_csv=zero_d,
    )


def _bind_stimuli(current_scope):
    protocols = []
    extent_keys = {
        StimulusShape.CUBIC: "Impulse length",
        StimulusShape.SPHERICAL: "Impulse radii",
        StimulusShape.GAUSSIAN: "Impulse standard deviations",
    }
    for shape, extent_key in extent_keys.items():
        scope = current_scope.sub(shape.value)
        if not scope.bool("Active"):
            continue
        sites = scope.triplets("Impulse sites")
        if not sites:
            scope.fail("Impulse sites", "an active stimulus needs sites")
        n = len(sites)
        try:
            protocols.append(StimulusProtocol(
                shape=shape,
                sites=sites,
                amplitudes=_broadcast(
                    scope, "Impulse amplitudes",
                    scope.floats("Impulse amplitudes"), n),
                extents=_broadcast(
                    scope, extent_key, scope.floats(extent_key), n),
                initial_times=_broadcast(
                    scope, "Impulse initial times",
                    scope.floats("Impulse initial times"), n),
                durations=_broadcast(
                    scope, "Impulse durations",
                    scope.floats("Impulse durations"), n),
                period=scope.float("Impulse period"),
            ))
        except ValueError as err:
            scope.fail("Impulse durations", str(err))
    return tuple(protocols)


def bind_parameters(parsed):
    """Typed :class:`BoundParameters` from a parsed parameter tree.

    ``parsed`` is the raw output of :func:`~monodomain.params.parse_prm`
    (an already-merged tree also works); unset keys take their
    registered defaults.
    """
    merged = registry_tree().merged_with(parsed)
    root = _Scope(merged)
    ep = root.sub("Electrophysiology")

    mesh_scope = ep.sub("Mesh and space discretization")
    element_name = mesh_scope.str("Element type")
    kind_map = {"Hex": ElementKind.HEX8, "Tet": ElementKind.TET4}
    if element_name not in kind_map:
        mesh_scope.fail("Element type",
                        f"expected Hex or Tet, got {element_name!r}")
    file_scope = mesh_scope.sub("File")
    scaling = file_scope.float("Scaling factor")
    if scaling <= 0:
        file_scope.fail("Scaling factor", "must be positive")
    mesh_plan = MeshPlan(
        element_kind=kind_map[element_name],
        degree=mesh_scope.int("FE space degree"),
        refinements=mesh_scope.int("Number of refinements"),
        quadrature_points=mesh_scope.int("Quadrature points per direction"),
        filename=file_scope.str("Filename"),
        scaling=scaling,
    )

    pcm_scope = ep.sub("Physical constants and models")
    prepacing_time = pcm_scope.float(
        "Time 0D simulation for variables initialization")
    if prepacing_time < 0:
        pcm_scope.fail("Time 0D simulation for variables initialization",
                       "must be nonnegative")

    # Volume discovery uses the user's tree so registry defaults do not
    # masquerade as an extra volume; an empty file gets the global one.
    user_pcm = (parsed.child("Electrophysiology")
                .child("Physical constants and models"))
    sections = _scan_volume_sections(user_pcm)
    if not sections:
        sections = [(GLOBAL_VOLUME_LABEL, ParameterTree(GLOBAL_VOLUME_LABEL))]
    labels_seen = set()
    volumes = []
    for label, subtree in sections:
        if label in labels_seen:
            raise ConfigError(
                " / ".join(pcm_scope.path + (label,)),
                "volume label appears twice")
        labels_seen.add(label)
        volumes.append(_bind_volume(
            label, subtree, pcm_scope.path + (label,), prepacing_time))

    solver_scope = ep.sub("Time solver")
    rescale = ep.sub("Dimensional rescaling")

    activation_scope = ep.sub("Activation time")
    threshold_raw = activation_scope.str("Threshold").strip()
    activation = ActivationConfig(
        enabled=activation_scope.bool("Enable output"),
        path=_vtk_name(activation_scope.str("Filename")),
        threshold=(None if not threshold_raw
                   else activation_scope.float("Threshold")),
    )

    output_scope = ep.sub("Output")
    stride = output_scope.int("Output every n steps")
    if stride < 1:
        output_scope.fail("Output every n steps", "must be at least 1")
    output = OutputConfig(
        enable_field_output=output_scope.bool("Enable output"),
        field_stem=output_scope.str("Filename"),
        enable_csv=output_scope.bool("Enable CSV output"),
        csv_path=output_scope.str("CSV filename"),
        stride=stride,
        probe_points=output_scope.triplets("Probe points"),
    )

    serial_scope = ep.sub("Serialization")
    serialization = SerializationPlan(
        enabled=serial_scope.bool("Enable serialization"),
        filename=serial_scope.str("Serialization filename"),
        restore_from=serial_scope.str("Restore from file").strip(),
    )

    linear_scope = ep.sub("Linear solver")
    tolerance = linear_scope.float("Tolerance")
    max_iterations = linear_scope.int("Max iterations")
    if tolerance <= 0:
        linear_scope.fail("Tolerance", "must be positive")
    if max_iterations < 1:
        linear_scope.fail("Max iterations", "must be at least 1")

    fg = root.sub("Fiber generation")
    slab_scope = fg.sub("Slab")
    axis_name = slab_scope.str("Transmural direction").lower()
    if axis_name not in _AXES:
        slab_scope.fail("Transmural direction",
                        f"expected x, y or z, got {axis_name!r}")
    import_scope = fg.sub("Import fibers from file")
    array_names = tuple(
        name.strip()
        for name in import_scope.str("Array names").split(",")
        if name.strip()
    )
    if len(array_names) != 3:
        import_scope.fail("Array names",
                          "expected three comma-separated array names "
                          "(f0, s0, n0)")
    import_scaling = import_scope.float("Geometry scaling factor")
    if import_scaling <= 0:
        import_scope.fail("Geometry scaling factor", "must be positive")
    fg_out = fg.sub("Output")
    fibers = FiberPlan(
        geometry_type=fg.sub("Mesh and space discretization")
                        .str("Geometry type"),
        transmural_axis=_AXES[axis_name],
        endo_angle=slab_scope.float("Endocardial angle"),
        epi_angle=slab_scope.float("Epicardial angle"),
        import_path=import_scope.str("VTU filename"),
        array_names=array_names,
        import_scaling=import_scaling,
        output_enabled=fg_out.bool("Enable output"),
        output_stem=fg_out.str("Filename"),
    )

    return BoundParameters(
        mesh=mesh_plan,
        fibers=fibers,
        volumes=tuple(volumes),
        prepacing_time=prepacing_time,
        stimuli=_bind_stimuli(ep.sub("Applied current")),
        dt=solver_scope.float("Time step"),
        final_time=solver_scope.float("Final time"),
        bdf_order=solver_scope.int("BDF order"),
        chi_m=rescale.float("Surface-to-volume ratio"),
        membrane_capacitance=rescale.float("Membrane capacitance"),
        linear_solver=LinearSolverConfig(tolerance, max_iterations),
        activation=activation,
        output=output,
        serialization=serialization,
    )


def _vtk_name(stem):
    return stem if stem.endswith(".vtk") else stem + ".vtk"


# ---------------------------------------------------------------------------
# Building a runnable configuration
# ---------------------------------------------------------------------------


def load_fibers(bound, mesh):
    """Fiber field for a loaded mesh, per the bound fiber plan."""
    plan = bound.fibers
    if plan.geometry_type == "Slab":
        return slab_fiber_field(mesh, plan.transmural_axis,
                                plan.endo_angle, plan.epi_angle)
    if plan.geometry_type == "Import from file":
        if not plan.import_path:
            raise ConfigError(
                "Fiber generation / Import fibers from file / VTU filename",
                "no fiber file given")
        return import_fibers(plan.import_path, plan.array_names,
                             plan.import_scaling, mesh)
    raise ConfigError(
        "Fiber generation / Mesh and space discretization / Geometry type",
        f"{plan.geometry_type!r} is not supported by this solver "
        f"(available: Slab, Import from file)")


def build_simulation(bound):
    """Load inputs and produce a validated :class:`SimulationConfig`.

    This is the stage with filesystem access and feature gates: it
    rejects bound parameters that name capabilities outside this
    solver's scope (quadratic elements, mesh refinement, non-slab fiber
    rules) with a path-qualified :class:`ConfigError`.
    """
    mesh_path = "Electrophysiology / Mesh and space discretization"
    if bound.mesh.degree != 1:
        raise ConfigError(f"{mesh_path} / FE space degree",
                          f"only degree 1 is supported, "
                          f"got {bound.mesh.degree}")
    if bound.mesh.refinements != 0:
        raise ConfigError(f"{mesh_path} / Number of refinements",
                          "mesh refinement is not supported; refine the "
                          "input mesh instead")
    if bound.mesh.quadrature_points != 2:
        raise ConfigError(f"{mesh_path} / Quadrature points per direction",
                          "only the default 2-point rule is supported")
    if not bound.mesh.filename:
        raise ConfigError(f"{mesh_path} / File / Filename",
                          "no mesh file given")

    mesh = import_msh(bound.mesh.filename, bound.mesh.scaling)
    if mesh.element_kind is not bound.mesh.element_kind:
        raise ConfigError(
            f"{mesh_path} / Element type",
            f"parameter says {bound.mesh.element_kind.value} but the mesh "
            f"file contains {mesh.element_kind.value} elements")

    fibers = load_fibers(bound, mesh)

    volumes = tuple(
        VolumeConfig(
            label=vol.label,
            material_ids=vol.material_ids,
            ionic=vol.ionic,
            sigma_l=vol.sigma_l,
            sigma_t=vol.sigma_t,
            sigma_n=vol.sigma_n,
            disabled=vol.disabled,
            prepacing_time=bound.prepacing_time,
            prepacing_protocol=vol.pacing,
            zero_d_csv_path=vol.zero_d_csv,
        )
        for vol in bound.volumes
    )

    config = SimulationConfig(
        mesh=mesh,
        fibers=fibers,
        volumes=volumes,
        bdf_order=bound.bdf_order,
        dt=bound.dt,
        final_time=bound.final_time,
        degree=bound.mesh.degree,
        stimuli=bound.stimuli,
        membrane_capacitance=bound.membrane_capacitance,
        chi_m=bound.chi_m,
        linear_solver=bound.linear_solver,
        output=bound.output,
        activation=bound.activation,
        checkpoint=CheckpointConfig(
            enabled=bound.serialization.enabled,
            path=bound.serialization.filename,
        ),
    )
    return config.validate()
