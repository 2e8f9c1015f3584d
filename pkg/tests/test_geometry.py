"""Slab construction, fiber frames, MSH/VTK import and their error paths."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monodomain.errors import (
    DegenerateThickness,
    InvertedElement,
    MalformedFile,
    MissingArray,
    MixedElementTypes,
    NodeCoordinateMismatch,
    NodeCountMismatch,
    NonDivisibleExtent,
    UnsupportedElementType,
    ZeroSpacing,
    ZeroVectorAtNode,
)
from monodomain.geometry import (
    ElementKind,
    FiberField,
    Mesh,
    SlabSpec,
    build_slab_mesh,
    element_jacobians,
    import_fibers,
    import_msh,
    nearest_node,
    slab_fiber_field,
    write_msh,
)

BENCHMARK_EXTENT = (3e-3, 7e-3, 20e-3)


def total_volume(mesh):
    dets = element_jacobians(mesh.nodes, mesh.elements, mesh.element_kind)
    if mesh.element_kind is ElementKind.TET4:
        return float(np.sum(dets[:, 0]) / 6.0)
    return float(np.sum(dets))  # 2x2x2 Gauss with unit weights


# ---------------------------------------------------------------------------
# Slab construction
# ---------------------------------------------------------------------------


def test_benchmark_slab_counts():
    mesh = build_slab_mesh(SlabSpec(BENCHMARK_EXTENT, 0.5e-3, ElementKind.HEX8))
    assert mesh.num_elements == 6 * 14 * 40 == 3360
    assert mesh.num_nodes == 7 * 15 * 41 == 4305
    assert (mesh.material_ids == 1).all()
    tet = build_slab_mesh(SlabSpec(BENCHMARK_EXTENT, 0.5e-3, ElementKind.TET4))
    assert tet.num_elements == 6 * 3360
    assert tet.num_nodes == 4305


def test_finest_standard_resolution_count():
    spec = SlabSpec(BENCHMARK_EXTENT, 0.1e-3, ElementKind.HEX8)
    nx, ny, nz = spec.cells_per_axis()
    assert nx * ny * nz == 420000


def test_slab_nodes_on_exact_lattice():
    mesh = build_slab_mesh(SlabSpec(BENCHMARK_EXTENT, 0.5e-3))
    ratio = mesh.nodes / 0.5e-3
    assert np.array_equal(ratio, np.round(ratio))


def test_unit_cube_single_hex(unit_hex):
    assert unit_hex.num_elements == 1
    assert unit_hex.num_nodes == 8
    assert total_volume(unit_hex) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("kind", [ElementKind.HEX8, ElementKind.TET4])
def test_slab_fills_box_volume(kind):
    mesh = build_slab_mesh(SlabSpec(BENCHMARK_EXTENT, 0.5e-3, kind))
    box = np.prod(BENCHMARK_EXTENT)
    assert total_volume(mesh) == pytest.approx(box, rel=1e-12)


def test_tet_slab_is_conforming(tet_slab):
    tet_slab.audit_conformity()


def test_kuhn_tets_positively_oriented(tet_slab):
    dets = element_jacobians(tet_slab.nodes, tet_slab.elements, ElementKind.TET4)
    assert (dets > 0).all()


@given(
    spacing=st.floats(1e-4, 1e-2, allow_nan=False, allow_infinity=False),
    counts=st.tuples(*[st.integers(1, 3)] * 3),
    kind=st.sampled_from(list(ElementKind)),
)
@settings(max_examples=30, deadline=None)
def test_slab_counts_property(spacing, counts, kind):
    extent = tuple(n * spacing for n in counts)
    spec = SlabSpec(extent, spacing, kind)
    assert spec.cells_per_axis() == counts
    mesh = build_slab_mesh(spec)
    per_cell = 6 if kind is ElementKind.TET4 else 1
    assert mesh.num_elements == per_cell * np.prod(counts)
    assert mesh.num_nodes == np.prod([n + 1 for n in counts])
    assert total_volume(mesh) == pytest.approx(float(np.prod(extent)), rel=1e-10)


@given(
    spacing=st.floats(1e-4, 1e-2, allow_nan=False, allow_infinity=False),
    n=st.integers(1, 5),
)
@settings(max_examples=20, deadline=None)
def test_non_divisible_extent_rejected(spacing, n):
    with pytest.raises(NonDivisibleExtent):
        SlabSpec(((n + 0.5) * spacing, spacing, spacing), spacing).cells_per_axis()


def test_slab_spec_validation():
    with pytest.raises(ZeroSpacing):
        SlabSpec((1e-3,) * 3, 0.0)
    with pytest.raises(ValueError):
        SlabSpec((1e-3, 1e-3), 1e-3)
    with pytest.raises(ValueError):
        SlabSpec((1e-3, -1e-3, 1e-3), 1e-3)
    with pytest.raises(NonDivisibleExtent):
        SlabSpec((1e-3,) * 3, 2e-3).cells_per_axis()  # spacing > extent


def test_nearest_node_picks_closest_lattice_point(small_hex_slab):
    node = nearest_node(small_hex_slab, (0.6e-3, 0.4e-3, 0.1e-3))
    np.testing.assert_allclose(
        small_hex_slab.nodes[node], (0.5e-3, 0.5e-3, 0.0), atol=0
    )


# ---------------------------------------------------------------------------
# Fiber fields
# ---------------------------------------------------------------------------


def test_flat_fiber_field_follows_long_axis():
    mesh = build_slab_mesh(SlabSpec(BENCHMARK_EXTENT, 0.5e-3))
    fib = slab_fiber_field(mesh, transmural_axis=0, endo_angle=0.0, epi_angle=0.0)
    assert np.allclose(fib.f0, [0.0, 0.0, 1.0])  # z is the long in-plane axis
    assert np.allclose(fib.n0, [1.0, 0.0, 0.0])  # transmural direction


def test_fiber_angle_interpolates_transmurally():
    mesh = build_slab_mesh(SlabSpec((3e-3, 6e-3, 12e-3), 0.75e-3))
    fib = slab_fiber_field(mesh, 0, 60.0, -60.0)
    phi = mesh.nodes[:, 0] / 3e-3
    axial = fib.f0 @ np.array([0.0, 0.0, 1.0])
    assert np.allclose(axial[np.isclose(phi, 0.5)], 1.0)  # midwall: 0 degrees
    assert np.allclose(
        axial[np.isclose(phi, 0.25)], np.cos(np.deg2rad(30.0))
    )  # quarter wall: +30 degrees


def test_fiber_frame_orthonormal():
    mesh = build_slab_mesh(SlabSpec((2e-3, 3e-3, 4e-3), 1e-3))
    fib = slab_fiber_field(mesh, 1, 60.0, -60.0)
    fib.validate()
    for a, b in ((fib.f0, fib.s0), (fib.f0, fib.n0), (fib.s0, fib.n0)):
        assert np.abs(np.einsum("ij,ij->i", a, b)).max() < 1e-12
    cross = np.cross(fib.n0, fib.f0)
    np.testing.assert_allclose(fib.s0, cross, atol=1e-12)


def test_fiber_field_validate_rejects_bad_frames(small_hex_slab):
    n = small_hex_slab.num_nodes
    e = np.tile(np.eye(3), (n, 1, 1))
    bad_unit = FiberField(2.0 * e[:, 0], e[:, 1], e[:, 2])
    with pytest.raises(Exception):
        bad_unit.validate()
    skew = FiberField(e[:, 0], e[:, 0], e[:, 2])
    with pytest.raises(Exception):
        skew.validate()


def test_degenerate_thickness_rejected():
    flat = Mesh(
        nodes=np.array([[0, 0, 0], [0, 1, 0], [0, 1, 1], [0, 0, 1]], dtype=float),
        elements=np.array([[0, 1, 2, 3]]),
        element_kind=ElementKind.TET4,
        material_ids=np.array([1]),
    )
    with pytest.raises(DegenerateThickness):
        slab_fiber_field(flat, 0, 60.0, -60.0)


# ---------------------------------------------------------------------------
# MSH import/export
# ---------------------------------------------------------------------------


def test_msh_round_trip(tet_slab, tmp_path):
    path = tmp_path / "slab.msh"
    write_msh(tet_slab, path)
    back = import_msh(path, scaling_factor=1.0)
    assert np.array_equal(back.elements, tet_slab.elements)
    assert np.array_equal(back.nodes, tet_slab.nodes)
    assert np.array_equal(back.material_ids, tet_slab.material_ids)


def test_msh_scaling_factor(tet_slab, tmp_path):
    path = tmp_path / "slab.msh"
    write_msh(tet_slab, path)
    scaled = import_msh(path, scaling_factor=2.0)
    np.testing.assert_allclose(scaled.nodes, 2.0 * tet_slab.nodes)


def test_msh_preserves_materials(two_material_slab, tmp_path):
    path = tmp_path / "two.msh"
    write_msh(two_material_slab, path)
    back = import_msh(path)
    assert set(np.unique(back.material_ids)) == {1, 2}
    assert np.array_equal(back.material_ids, two_material_slab.material_ids)


def _write_msh_text(path, body):
    path.write_text(body)
    return path


def test_msh_rejects_mixed_element_types(tmp_path):
    nodes = "\n".join(
        f"{i} {x} {y} {z}"
        for i, (x, y, z) in enumerate(
            [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
             (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)], 1)
    )
    body = (
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n8\n"
        f"{nodes}\n$EndNodes\n$Elements\n2\n"
        "1 5 1 1 1 2 3 4 5 6 7 8\n"
        "2 4 1 1 1 2 3 5\n"
        "$EndElements\n"
    )
    with pytest.raises(MixedElementTypes):
        import_msh(_write_msh_text(tmp_path / "mixed.msh", body))


def test_msh_rejects_unsupported_element_type(tmp_path):
    nodes = "\n".join(
        f"{i} {x} {y} {z}"
        for i, (x, y, z) in enumerate(
            [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1), (0, 1, 1)], 1)
    )
    body = (
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n6\n"
        f"{nodes}\n$EndNodes\n$Elements\n1\n"
        "1 6 1 1 1 2 3 4 5 6\n$EndElements\n"  # type 6 = prism
    )
    with pytest.raises(UnsupportedElementType):
        import_msh(_write_msh_text(tmp_path / "prism.msh", body))


def test_msh_malformed_reports_line_number(tmp_path):
    body = (
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n1\n"
        "1 0 0\n$EndNodes\n$Elements\n0\n$EndElements\n"
    )
    with pytest.raises(MalformedFile) as err:
        import_msh(_write_msh_text(tmp_path / "bad.msh", body))
    assert err.value.line == 6


def test_msh_rejects_inverted_element(tmp_path):
    body = (
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n"
        "1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n"
        "$EndNodes\n$Elements\n1\n"
        "1 4 1 1 2 1 3 4\n$EndElements\n"  # corners swapped
    )
    with pytest.raises(InvertedElement):
        import_msh(_write_msh_text(tmp_path / "inverted.msh", body))


def test_msh_skips_lower_dimensional_elements(tmp_path):
    """Surface/line/point entities in the file are ignored, not errors."""
    corners = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
               (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]
    nodes = "\n".join(
        f"{i} {x} {y} {z}" for i, (x, y, z) in enumerate(corners, 1)
    )
    body = (
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n8\n"
        f"{nodes}\n$EndNodes\n$Elements\n3\n"
        "1 15 1 7 1\n"          # point
        "2 2 1 9 1 2 3\n"       # triangle
        "3 5 1 1 1 2 3 4 5 6 7 8\n"
        "$EndElements\n"
    )
    mesh = import_msh(_write_msh_text(tmp_path / "mixed_dim.msh", body))
    assert mesh.num_elements == 1
    assert mesh.element_kind is ElementKind.HEX8


# ---------------------------------------------------------------------------
# Fiber import (legacy VTK)
# ---------------------------------------------------------------------------


def _write_vtk_fibers(path, points, named_vectors):
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nfibers\nASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(points)} double\n")
        for x, y, z in points:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        fh.write(f"POINT_DATA {len(points)}\n")
        for name, arr in named_vectors:
            fh.write(f"VECTORS {name} double\n")
            for v in arr:
                fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
    return path


def test_fiber_import_scales_normalizes_orthogonalizes(tmp_path):
    mesh = build_slab_mesh(SlabSpec(BENCHMARK_EXTENT, 0.5e-3))
    fib = slab_fiber_field(mesh, 0, 60.0, -60.0)
    # unnormalized, slightly skewed vectors, coordinates in millimeters
    path = _write_vtk_fibers(
        tmp_path / "fib.vtk",
        mesh.nodes / 1e-3,
        [("fiber", fib.f0 * 2.5), ("sheet", fib.s0 + 0.05 * fib.f0),
         ("normal", fib.n0)],
    )
    got = import_fibers(path, ("fiber", "sheet", "normal"), 1e-3, mesh)
    np.testing.assert_allclose(got.f0, fib.f0, atol=1e-12)
    np.testing.assert_allclose(got.s0, fib.s0, atol=1e-12)
    np.testing.assert_allclose(got.n0, fib.n0, atol=1e-12)


def test_fiber_import_error_paths(tmp_path, small_hex_slab):
    mesh = small_hex_slab
    n = mesh.num_nodes
    ex = np.tile([1.0, 0.0, 0.0], (n, 1))
    ey = np.tile([0.0, 1.0, 0.0], (n, 1))
    ez = np.tile([0.0, 0.0, 1.0], (n, 1))

    missing = _write_vtk_fibers(
        tmp_path / "missing.vtk", mesh.nodes, [("a", ex), ("b", ey)]
    )
    with pytest.raises(MissingArray):
        import_fibers(missing, ("a", "b", "c"), 1.0, mesh)

    short = _write_vtk_fibers(
        tmp_path / "short.vtk", mesh.nodes[:-1],
        [("a", ex[:-1]), ("b", ey[:-1]), ("c", ez[:-1])],
    )
    with pytest.raises(NodeCountMismatch):
        import_fibers(short, ("a", "b", "c"), 1.0, mesh)

    shifted_pts = mesh.nodes.copy()
    shifted_pts[0] += 1e-4
    shifted = _write_vtk_fibers(
        tmp_path / "shifted.vtk", shifted_pts, [("a", ex), ("b", ey), ("c", ez)]
    )
    with pytest.raises(NodeCoordinateMismatch):
        import_fibers(shifted, ("a", "b", "c"), 1.0, mesh)

    zeroed = ex.copy()
    zeroed[3] = 0.0
    zerovec = _write_vtk_fibers(
        tmp_path / "zero.vtk", mesh.nodes, [("a", zeroed), ("b", ey), ("c", ez)]
    )
    with pytest.raises(ZeroVectorAtNode):
        import_fibers(zerovec, ("a", "b", "c"), 1.0, mesh)
