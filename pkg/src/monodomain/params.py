"""Parameter files: the ``subsection``/``set`` text format.

Grammar (EBNF; ``#`` starts a comment anywhere, a trailing backslash
joins the next line before tokenizing)::

    file        = { statement } ;
    statement   = blank | subsection | end | assignment ;
    subsection  = "subsection" , name ;
    end         = "end" ;
    assignment  = [ "set" ] , key , "=" , value ;

Names, keys and values are free text trimmed of surrounding whitespace;
values may not contain ``=`` (the assignment form would become
ambiguous, so a second ``=`` is a syntax error).  The ``set`` keyword is
optional on assignments: published listings occasionally drop it, and
accepting the bare form keeps the parser total on that corpus.

Values stay strings in the tree; typed interpretation happens during
config binding (:mod:`monodomain.config`) where errors can cite the full
parameter path.  Lookups of keys the user never set fall back to the
registered defaults carried by the same tree, mirroring the convention
that absent parameters retain their default values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

from .errors import (
    DuplicateKey,
    DuplicateLabel,
    MalformedSet,
    UnbalancedSubsection,
)


class Verbosity(IntEnum):
    """Template detail level; each level is a superset of the previous."""

    MINIMAL = 0
    DEFAULT = 1
    FULL = 2

    @classmethod
    def from_name(cls, name):
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(
                f"unknown verbosity {name!r}; expected minimal, default or full"
            ) from None


@dataclass
class ParameterEntry:
    """One key's value plus its documentation and provenance."""

    value: str
    documentation: str = ""
    user_set: bool = False


class ParameterTree:
    """Nested sections of key/value entries.

    ``entries`` maps keys to :class:`ParameterEntry`; ``children`` maps
    subsection names to nested trees.  Insertion order is preserved and
    is the serialization order.
    """

    def __init__(self, name=""):
        self.name = name
        self.entries = {}
        self.children = {}

    # -- construction ------------------------------------------------------

    def set(self, key, value, doc="", user_set=False):
        self.entries[key] = ParameterEntry(str(value), doc, user_set)
        return self

    def subsection(self, name):
        """Child subsection with the given name, created on first use."""
        if name not in self.children:
            self.children[name] = ParameterTree(name)
        return self.children[name]

    # -- lookup ------------------------------------------------------------

    def __contains__(self, key):
        return key in self.entries

    def value(self, key, default=None):
        entry = self.entries.get(key)
        return entry.value if entry is not None else default

    def child(self, name):
        """Existing child or an empty placeholder (nothing set)."""
        return self.children.get(name, ParameterTree(name))

    def is_empty(self):
        return not self.entries and not self.children

    # -- structure ---------------------------------------------------------

    def to_mapping(self):
        """Plain nested dict of values only (for structural comparison)."""
        return {
            "entries": {k: e.value for k, e in self.entries.items()},
            "children": {n: c.to_mapping() for n, c in self.children.items()},
        }

    def copy(self):
        out = ParameterTree(self.name)
        for key, entry in self.entries.items():
            out.set(key, entry.value, entry.documentation, entry.user_set)
        for name, childtree in self.children.items():
            out.children[name] = childtree.copy()
        return out

    def merged_with(self, overrides):
        """This tree's defaults overlaid with another tree's values.

        Keys and sections that only exist in ``overrides`` (for example
        user-defined volume labels) are kept verbatim, so no information
        from a parsed file is dropped.
        """
        out = self.copy()
        for key, entry in overrides.entries.items():
            doc = (out.entries[key].documentation
                   if key in out.entries else entry.documentation)
            out.set(key, entry.value, doc, entry.user_set)
        for name, childtree in overrides.children.items():
            if name in out.children:
                out.children[name] = out.children[name].merged_with(childtree)
            else:
                out.children[name] = childtree.copy()
        return out


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _logical_lines(text):
    """Yield (starting line number, statement) with comments stripped and
    continuation lines joined."""
    raw = text.splitlines()
    i = 0
    while i < len(raw):
        start = i + 1
        line = raw[i].split("#", 1)[0].strip()
        while line.endswith("\\") and i + 1 < len(raw):
            i += 1
            line = line[:-1].rstrip()
            line += " " + raw[i].split("#", 1)[0].strip()
        if line.endswith("\\"):  # continuation at end of file
            line = line[:-1].rstrip()
        i += 1
        if line:
            yield start, line


def parse_prm(text):
    """Parse parameter-file text into a :class:`ParameterTree`.

    All parsed entries are marked ``user_set``; defaults are attached
    later by merging onto a registry tree (:func:`registry_tree`).
    """
    root = ParameterTree()
    stack = [(root, 0)]
    for line_no, line in _logical_lines(text):
        head = line.split(None, 1)[0]
        if head == "subsection":
            name = line[len("subsection"):].strip()
            if not name:
                raise MalformedSet("subsection without a name", line_no)
            stack.append((stack[-1][0].subsection(name), line_no))
        elif head == "end":
            if line != "end":
                raise MalformedSet(
                    f"unexpected text after 'end': {line!r}", line_no)
            if len(stack) == 1:
                raise UnbalancedSubsection(
                    "'end' without a matching 'subsection'", line_no)
            stack.pop()
        else:
            if head == "set":
                line = line[len("set"):].strip()
            if "=" not in line:
                raise MalformedSet(
                    f"expected 'subsection', 'end' or 'set KEY = VALUE', "
                    f"got {line!r}", line_no)
            key, value = line.split("=", 1)
            key, value = key.strip(), value.strip()
            if not key:
                raise MalformedSet("assignment without a key", line_no)
            if "=" in value:
                raise MalformedSet(
                    "values may not contain '='", line_no)
            current = stack[-1][0]
            if key in current.entries:
                raise DuplicateKey(
                    f"key {key!r} already set in this subsection", line_no)
            current.set(key, value, user_set=True)
    if len(stack) > 1:
        raise UnbalancedSubsection(
            f"subsection {stack[-1][0].name!r} is never closed",
            stack[-1][1])
    return root


# ---------------------------------------------------------------------------
# Registry: every known parameter with its default and documentation
# ---------------------------------------------------------------------------

#: Section/volume label used when the user supplies no labels.
GLOBAL_VOLUME_LABEL = "Volumetric parameters"

_LABEL_FORBIDDEN = set("#=\\\n\r")


def _check_labels(volume_labels):
    labels = tuple(volume_labels) or (GLOBAL_VOLUME_LABEL,)
    seen = set()
    for label in labels:
        if label in seen:
            raise DuplicateLabel(f"volume label {label!r} given twice")
        seen.add(label)
        if not label or label != label.strip():
            raise ValueError(
                f"volume label {label!r} must be nonempty without "
                f"surrounding whitespace")
        if set(label) & _LABEL_FORBIDDEN:
            raise ValueError(
                f"volume label {label!r} may not contain '#', '=', "
                f"backslash or newlines")
    return labels


def _ionic_parameter_sections(parent, tier):
    """Per-model parameter subtrees under one volume section."""
    from .ionic import model_module
    from .ionic.base import ModelKind

    sub = parent.subsection("Ionic model parameters")
    for kind in ModelKind:
        mod = model_module(kind)
        model = sub.subsection(mod.NAME)
        if kind is ModelKind.TTP06:
            model.set("Cell type", "Epicardium",
                      "Endocardium, Myocardium or Epicardium; selects the "
                      "transient-outward and slow-delayed conductance variant.")
        if tier >= Verbosity.DEFAULT:
            constants = model.subsection("Physical constants")
            for name, value in mod.default_parameters().items():
                constants.set(name, _fmt_default(value),
                              f"Model constant {name} "
                              f"(units as in the {mod.NAME} publication).")
            initial = constants.subsection("Initial conditions")
            for name, value in mod.default_initial_conditions().items():
                doc = ("Starting transmembrane potential."
                       if name == "Transmembrane potential"
                       else f"Starting value of the ionic variable {name}.")
                initial.set(name, _fmt_default(value), doc)
    solver0d = sub.subsection("Time solver 0D")
    solver0d.set("Time step", "1e-4",
                 "Time step [s] of the single-cell initialization run.")
    current0d = sub.subsection("Applied current 0D")
    current0d.set("Initial times", "0.0",
                  "Start times [s] of the single-cell pacing stimuli "
                  "(comma- or space-separated list).")
    current0d.set("Durations", "2e-3",
                  "Pulse durations [s], one per stimulus.")
    current0d.set("Amplitudes", "0.0",
                  "Pulse amplitudes in the model's du/dt units "
                  "(V/s for ionic-concentration models, 1/s for "
                  "dimensionless ones).")
    current0d.set("Period", "0.8",
                  "Pacing period [s]; pulses repeat until the "
                  "initialization time is reached.")
    if tier >= Verbosity.DEFAULT:
        trace = sub.subsection("0D Output")
        trace.set("Enable CSV output", "false",
                  "true writes the single-cell initialization "
                  "trajectory of this volume as a CSV time series.")
        trace.set("CSV filename", "trace_0D.csv",
                  "Name of the 0D trace file; give each volume its "
                  "own name in multi-volume runs.")


def _fmt_default(value):
    # repr of a builtin float keeps the shortest exact decimal, so binding
    # a generated template reproduces the model defaults bit-for-bit.
    # (numpy scalars are float subclasses but repr differently.)
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _volume_section(parent, label, tier):
    vol = parent.subsection(label)
    vol.set("Material IDs", "1",
            "Volumetric tags of the mesh cells forming this volume "
            "(space- or comma-separated integers).")
    vol.set("Ionic model", "TTP06",
            "One of: Aliev-Panfilov, Bueno-Orovio, TTP06, CRN.")
    vol.set("Disable conduction", "false",
            "true excludes this volume from the diffusion operator "
            "entirely (electrically silent scar).")
    cond = vol.subsection("Monodomain conductivities")
    cond.set("Longitudinal conductivity", "0.95298e-4",
             "Diffusion along the fiber direction f0 [m^2/s], already "
             "divided by the surface-to-volume ratio and membrane "
             "capacitance (see Dimensional rescaling).")
    cond.set("Transversal conductivity", "0.12576e-4",
             "Diffusion along the sheet direction s0 [m^2/s].")
    cond.set("Normal conductivity", "0.12576e-4",
             "Diffusion along the sheet-normal direction n0 [m^2/s].")
    _ionic_parameter_sections(vol, tier)


def registry_tree(volume_labels=(), verbosity=Verbosity.FULL):
    """The full parameter registry: defaults plus documentation.

    ``verbosity`` controls which entries are present (template tiers);
    parsing always merges against the FULL registry so every key has a
    default regardless of how the file was generated.
    """
    labels = _check_labels(volume_labels)
    tier = Verbosity(verbosity)
    root = ParameterTree()

    ep = root.subsection("Electrophysiology")

    mesh = ep.subsection("Mesh and space discretization")
    mesh.set("Element type", "Hex",
             "Hex for hexahedra or Tet for tetrahedra; must match the "
             "mesh file contents.")
    mesh.set("FE space degree", "1",
             "Polynomial degree of the finite element space "
             "(only degree 1 is supported by this solver).")
    if tier >= Verbosity.FULL:
        mesh.set("Number of refinements", "0",
                 "Reserved: uniform refinements of an imported mesh are "
                 "not supported and any value other than 0 is rejected.")
        mesh.set("Quadrature points per direction", "2",
                 "Reserved: Gauss-Legendre points per direction on "
                 "hexahedra; only the default 2 is supported.")
    meshfile = mesh.subsection("File")
    meshfile.set("Filename", "",
                 "Path to the volumetric mesh in gmsh MSH 2.2 format.")
    meshfile.set("Scaling factor", "1",
                 "Multiplies node coordinates on import, e.g. 1e-3 for "
                 "a mesh given in millimeters.")

    pcm = ep.subsection("Physical constants and models")
    pcm.set("Time 0D simulation for variables initialization", "0",
            "Duration [s] of the single-cell pacing run used to "
            "initialize the ionic variables of every volume; 0 starts "
            "from the model's published initial state.")
    for label in labels:
        _volume_section(pcm, label, tier)

    current = ep.subsection("Applied current")
    for shape, extent_key, extent_default, extent_doc in (
        ("Cubic", "Impulse length", "1.5e-3",
         "Edge length [m] of each cubic impulse region, one value per "
         "site (a single value is shared by all sites)."),
        ("Spherical", "Impulse radii", "2.5e-3",
         "Radius [m] of each spherical impulse region, one value per "
         "site (a single value is shared by all sites)."),
        ("Gaussian", "Impulse standard deviations", "2.5e-3",
         "Standard deviation [m] of each Gaussian impulse, one value "
         "per site (a single value is shared by all sites)."),
    ):
        sec = current.subsection(shape)
        sec.set("Active", "false",
                "true applies this family of impulses during the run.")
        sec.set("Impulse sites", "0.0 0.0 0.0",
                "Center coordinates [m]: three numbers per site, "
                "sites separated by commas.")
        sec.set("Impulse amplitudes", "0.0",
                "Applied current per site, in du/dt units already "
                "divided by the membrane capacitance.")
        sec.set(extent_key, extent_default, extent_doc)
        sec.set("Impulse initial times", "0.0",
                "Start time [s] of each site's first pulse.")
        sec.set("Impulse durations", "2e-3",
                "Pulse duration [s] per site.")
        sec.set("Impulse period", "0",
                "Repetition period [s] shared by all sites of this "
                "shape; 0 fires each pulse once.")

    solver = ep.subsection("Time solver")
    solver.set("Time step", "5e-5", "Time step [s] of the tissue run.")
    solver.set("Final time", "0.15", "Simulated duration [s].")
    solver.set("BDF order", "2",
               "Order of the implicit-explicit BDF scheme (1, 2 or 3).")

    if tier >= Verbosity.DEFAULT:
        rescale = ep.subsection("Dimensional rescaling")
        rescale.set("Membrane capacitance", "1.0",
                    "Cm [F/m^2]. Conductivities and applied-current "
                    "amplitudes are divided by chi*Cm and Cm "
                    "respectively; keep 1 when inputs are pre-rescaled.")
        rescale.set("Surface-to-volume ratio", "1.0",
                    "chi [1/m]; see Membrane capacitance.")

    activation = ep.subsection("Activation time")
    activation.set("Enable output", "false",
                   "true writes the activation map (time of maximum "
                   "du/dt per node) as a VTK point field at the end.")
    activation.set("Filename", "activation",
                   "Stem of the activation map VTK file.")
    if tier >= Verbosity.DEFAULT:
        activation.set("Threshold", "",
                       "Potential (model units) a node must cross before "
                       "its activation time freezes; empty uses the "
                       "model-specific default.")

    output = ep.subsection("Output")
    output.set("Enable output", "false",
               "true writes the transmembrane potential as a VTK file "
               "every output stride.")
    output.set("Filename", "solution",
               "Stem of the potential VTK series.")
    output.set("Enable CSV output", "false",
               "true writes a CSV time series of min/max potential and "
               "any probe values.")
    output.set("CSV filename", "electrophysiology.csv",
               "Name of the CSV time-series file.")
    if tier >= Verbosity.DEFAULT:
        output.set("Output every n steps", "10",
                   "Stride (in time steps) between output snapshots.")
        output.set("Probe points", "",
                   "Optional probe coordinates [m]: three numbers per "
                   "point, points separated by commas; each probe adds "
                   "a CSV column sampled at the nearest mesh node.")

    if tier >= Verbosity.DEFAULT:
        serial = ep.subsection("Serialization")
        serial.set("Enable serialization", "false",
                   "true writes a binary checkpoint of the full solver "
                   "state at the end of the run.")
        serial.set("Serialization filename", "checkpoint.bin",
                   "Checkpoint file path.")
        serial.set("Restore from file", "",
                   "Optional checkpoint path to resume from; the run "
                   "continues from the serialized step.")

    if tier >= Verbosity.FULL:
        linear = ep.subsection("Linear solver")
        linear.set("Tolerance", "1e-10",
                   "Relative residual tolerance of the conjugate "
                   "gradient solver.")
        linear.set("Max iterations", "2000",
                   "Iteration cap before the solve is declared "
                   "divergent.")

    fg = root.subsection("Fiber generation")
    fgmesh = fg.subsection("Mesh and space discretization")
    fgmesh.set("Geometry type", "Slab",
               "Slab generates a rule-based transmural fiber field; "
               "Import from file reads f0/s0/n0 from a fiber file.")
    slab = fg.subsection("Slab")
    slab.set("Transmural direction", "x",
             "Mesh axis (x, y or z) across the wall thickness; the "
             "fiber angle rotates linearly along it.")
    slab.set("Endocardial angle", "0.0",
             "Fiber angle [deg] on the low-coordinate face, measured "
             "from the in-plane long axis.")
    slab.set("Epicardial angle", "0.0",
             "Fiber angle [deg] on the high-coordinate face.")
    imp = fg.subsection("Import fibers from file")
    imp.set("VTU filename", "",
            "Fiber file holding the f0, s0 and n0 vectors as point "
            "data (legacy VTK unstructured grid).")
    imp.set("Array names", "fiber, sheet, sheet_normal",
            "Comma-separated names of the f0, s0, n0 point-data arrays.")
    imp.set("Geometry scaling factor", "1",
            "Multiplies fiber-file coordinates before matching them "
            "against mesh nodes, e.g. 1e-3 for millimeters.")
    if tier >= Verbosity.DEFAULT:
        fgout = fg.subsection("Output")
        fgout.set("Enable output", "false",
                  "true writes the fiber frame as VTK vector fields "
                  "before the run starts.")
        fgout.set("Filename", "fibers", "Stem of the fiber VTK file.")

    return root


def volume_prototype():
    """Registry subtree for a single volume (used to default unknown
    user-defined volume labels during binding)."""
    tree = ParameterTree()
    _volume_section(tree, GLOBAL_VOLUME_LABEL, Verbosity.FULL)
    return tree.children[GLOBAL_VOLUME_LABEL]


# ---------------------------------------------------------------------------
# Template generation
# ---------------------------------------------------------------------------


def _serialize(tree, indent, lines):
    pad = "  " * indent
    for key, entry in tree.entries.items():
        if entry.documentation:
            for doc_line in entry.documentation.splitlines():
                lines.append(f"{pad}# {doc_line}")
        lines.append(f"{pad}set {key} = {entry.value}")
    for name, child in tree.children.items():
        if lines and lines[-1] != "":
            lines.append("")
        lines.append(f"{pad}subsection {name}")
        _serialize(child, indent + 1, lines)
        lines.append(f"{pad}end")


def serialize_tree(tree):
    """Render a tree back to parameter-file text (docs as comments)."""
    lines = []
    _serialize(tree, 0, lines)
    return "\n".join(lines) + "\n"


def generate_template(verbosity=Verbosity.DEFAULT, volume_labels=()):
    """Parameter-file text with defaults and per-entry documentation.

    ``volume_labels`` adds one volume section per label (default: the
    single global section).  Raises :class:`DuplicateLabel` on repeated
    labels and ``ValueError`` on labels the grammar cannot round-trip
    (leading/trailing whitespace or any of ``# = \\`` and newlines).
    """
    return serialize_tree(registry_tree(volume_labels, verbosity))
