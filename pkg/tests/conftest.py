"""Shared fixtures: small meshes and the repository layout."""

from pathlib import Path

import numpy as np
import pytest

from monodomain.geometry import ElementKind, SlabSpec, build_slab_mesh

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(scope="session")
def unit_hex():
    """A single trilinear hexahedron on the unit cube."""
    return build_slab_mesh(SlabSpec((1.0, 1.0, 1.0), 1.0, ElementKind.HEX8))


@pytest.fixture(scope="session")
def small_hex_slab():
    """27-node cube used wherever only a valid tiny mesh is needed."""
    return build_slab_mesh(SlabSpec((1e-3, 1e-3, 1e-3), 0.5e-3, ElementKind.HEX8))


@pytest.fixture(scope="session")
def tet_slab():
    """(2 x 3 x 4) mm tetrahedral slab at 0.5 mm spacing."""
    return build_slab_mesh(SlabSpec((2e-3, 3e-3, 4e-3), 0.5e-3, ElementKind.TET4))


@pytest.fixture()
def two_material_slab(tet_slab):
    """The tet slab split into materials 1 (z <= 2 mm) and 2 (z > 2 mm)."""
    from monodomain.geometry import Mesh

    mats = tet_slab.material_ids.copy()
    zc = tet_slab.nodes[tet_slab.elements].mean(axis=1)[:, 2]
    mats[zc > 2e-3] = 2
    return Mesh(tet_slab.nodes, tet_slab.elements, tet_slab.element_kind, mats)


def fixture_path(*parts):
    return FIXTURE_DIR.joinpath(*parts)
