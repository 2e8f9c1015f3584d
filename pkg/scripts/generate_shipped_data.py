"""Regenerate the mesh and fiber files shipped under data/.

The files are committed so that the example parameter files run out of
the box; this script documents how they were produced and lets them be
rebuilt after a geometry-code change:

    python3 scripts/generate_shipped_data.py
"""

import os

import numpy as np

from monodomain.geometry import (
    ElementKind,
    SlabSpec,
    build_slab_mesh,
    write_msh,
)
from monodomain.outputs import write_vtk

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, os.pardir, "data")


def slab_mesh_mm(spacing_mm, kind=ElementKind.HEX8):
    """Benchmark slab (3 x 7 x 20 mm) authored in millimeters."""
    return build_slab_mesh(SlabSpec((3.0, 7.0, 20.0), spacing_mm, kind))


def banded(mesh):
    """Three z-bands of material IDs: 1 (near), 2 (middle), 3 (far).

    The middle band (8 mm <= z < 12 mm, in mesh units) is meant to carry
    a scar or grey-zone volume in example parameter files.
    """
    centroids = mesh.nodes[mesh.elements].mean(axis=1)
    ids = np.ones(mesh.num_elements, dtype=np.int32)
    ids[centroids[:, 2] >= 8.0] = 2
    ids[centroids[:, 2] >= 12.0] = 3
    mesh.material_ids = ids
    return mesh.validate()


def two_hex_sample():
    """A 2 x 1 x 1 block of unit hexahedra with two material IDs."""
    mesh = build_slab_mesh(SlabSpec((2.0, 1.0, 1.0), 1.0))
    mesh.material_ids = np.array([1, 2], dtype=np.int32)
    return mesh.validate()


def main():
    meshes = os.path.join(DATA, "meshes")
    samples = os.path.join(DATA, "samples")
    os.makedirs(meshes, exist_ok=True)
    os.makedirs(samples, exist_ok=True)

    write_msh(slab_mesh_mm(0.5), os.path.join(meshes, "slab_hex_0.5mm.msh"))
    write_msh(banded(slab_mesh_mm(0.5)),
              os.path.join(meshes, "slab_hex_0.5mm_3bands.msh"))

    sample = two_hex_sample()
    write_msh(sample, os.path.join(samples, "two_hex.msh"))

    # Constant fiber frame on the sample mesh: fibers along x, sheets
    # along y; serves as a template for externally generated fibers.
    n = sample.num_nodes
    write_vtk(os.path.join(samples, "two_hex_fibers.vtk"), sample, {
        "fiber": np.tile([1.0, 0.0, 0.0], (n, 1)),
        "sheet": np.tile([0.0, 1.0, 0.0], (n, 1)),
        "sheet_normal": np.tile([0.0, 0.0, 1.0], (n, 1)),
    })

    for root, _, files in os.walk(DATA):
        for name in sorted(files):
            path = os.path.join(root, name)
            print(f"{os.path.getsize(path):>9} {os.path.relpath(path, DATA)}")


if __name__ == "__main__":
    main()
