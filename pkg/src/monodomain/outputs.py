"""Time-series CSV and VTK legacy field output.

Both writers are deterministic: identical inputs produce byte-identical
files.  Potentials go out in the solver's internal units (volts for the
physiological models, dimensionless for the phenomenological ones);
activation maps encode never-activated nodes as -1.0.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import IoFailure, LengthMismatch
from .geometry import ElementKind

_VTK_CELL_TYPE = {ElementKind.HEX8: 12, ElementKind.TET4: 10}


@dataclass
class OutputConfig:
    """What the time loop writes, and how often."""

    enable_field_output: bool = False
    field_stem: str = "solution"
    enable_csv: bool = False
    csv_path: str = "trace.csv"
    stride: int = 1
    probe_points: tuple = ()

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("output stride must be >= 1")


def _fmt(value):
    return f"{value:.8e}"


def write_csv(path, rows, probe_count=0):
    """Write `t,u_min,u_max,probe_*` rows with 9 significant digits."""
    header = "t,u_min,u_max" + "".join(
        f",probe_{i}" for i in range(probe_count)
    )
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write CSV {path}: {exc}") from exc


def write_zero_d_trace(path, trace):
    """Write a single-cell trace; columns t, u, then the state variables."""
    n_vars = trace.shape[1] - 2
    header = "t,u" + "".join(f",w{i + 1}" for i in range(n_vars))
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(header + "\n")
            for row in trace:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write CSV {path}: {exc}") from exc


def write_vtk(path, mesh, point_fields=None):
    """Write the mesh and nodal fields as VTK legacy ASCII.

    Scalar fields are (N,) arrays, vector fields (N, 3); material IDs
    always go out as cell data.
    """
    point_fields = point_fields or {}
    for name, values in point_fields.items():
        if np.asarray(values).shape[0] != mesh.num_nodes:
            raise LengthMismatch(
                f"field {name!r} has {np.asarray(values).shape[0]} values "
                f"for {mesh.num_nodes} nodes"
            )
    n_per = mesh.elements.shape[1]
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("# vtk DataFile Version 3.0\n")
            fh.write("monodomain output\n")
            fh.write("ASCII\n")
            fh.write("DATASET UNSTRUCTURED_GRID\n")
            fh.write(f"POINTS {mesh.num_nodes} double\n")
            for x, y, z in mesh.nodes:
                fh.write(f"{_fmt(x)} {_fmt(y)} {_fmt(z)}\n")
            fh.write(
                f"CELLS {mesh.num_elements} "
                f"{mesh.num_elements * (1 + n_per)}\n"
            )
            for conn in mesh.elements:
                fh.write(f"{n_per} " + " ".join(str(c) for c in conn) + "\n")
            fh.write(f"CELL_TYPES {mesh.num_elements}\n")
            cell_type = _VTK_CELL_TYPE[mesh.element_kind]
            for _ in range(mesh.num_elements):
                fh.write(f"{cell_type}\n")
            fh.write(f"CELL_DATA {mesh.num_elements}\n")
            fh.write("SCALARS material_id int 1\nLOOKUP_TABLE default\n")
            for m in mesh.material_ids:
                fh.write(f"{m}\n")
            if point_fields:
                fh.write(f"POINT_DATA {mesh.num_nodes}\n")
                for name, values in point_fields.items():
                    values = np.asarray(values)
                    if values.ndim == 2 and values.shape[1] == 3:
                        fh.write(f"VECTORS {name} double\n")
                        for v in values:
                            fh.write(
                                f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n"
                            )
                    else:
                        fh.write(f"SCALARS {name} double 1\n")
                        fh.write("LOOKUP_TABLE default\n")
                        for v in values:
                            fh.write(f"{_fmt(v)}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write VTK {path}: {exc}") from exc
