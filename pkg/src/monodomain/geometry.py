"""Meshes, subdomain labels and fiber fields.

Coordinates are in meters throughout.  A mesh is a flat array of nodes
plus element connectivity of a single kind (8-node hexahedra or 4-node
tetrahedra, both in VTK/gmsh corner order) and one integer material ID
per element, partitioning the domain into subdomains.  Fiber fields
attach an orthonormal frame (f0, s0, n0) to every node.

Structured slabs are built directly; everything else arrives through a
Gmsh MSH v2.2 ASCII reader.  Tetrahedral slabs use the Kuhn/Freudenthal
six-tet decomposition of each grid cell, which is conforming across
neighboring cells by construction.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
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


class ElementKind(Enum):
    HEX8 = "Hex8"
    TET4 = "Tet4"

    @classmethod
    def from_name(cls, name):
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(
            f"unknown element kind {name!r}; expected one of "
            f"{[k.value for k in cls]}"
        )


# Nodes per element and the local faces of each kind (outward-consistent
# corner subsets, used only as unordered sets by the conformity audit).
_NODES_PER = {ElementKind.HEX8: 8, ElementKind.TET4: 4}
_FACES = {
    ElementKind.HEX8: (
        (0, 1, 2, 3), (4, 5, 6, 7), (0, 1, 5, 4),
        (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7),
    ),
    ElementKind.TET4: ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)),
}

# 2x2x2 Gauss points on [-1, 1]^3, where the slab/import Jacobian check
# samples the trilinear map.
_GAUSS_1D = (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0))

# Corner signs of the VTK/gmsh hexahedron ordering.
_HEX_SIGNS = np.array(
    [
        (-1, -1, -1), (1, -1, -1), (1, 1, -1), (-1, 1, -1),
        (-1, -1, 1), (1, -1, 1), (1, 1, 1), (-1, 1, 1),
    ],
    dtype=np.float64,
)


def _hex_gauss_gradients():
    """dN/dxi of the 8 trilinear basis functions at the 8 Gauss points."""
    pts = np.array(
        [(x, y, z) for z in _GAUSS_1D for y in _GAUSS_1D for x in _GAUSS_1D]
    )
    grads = np.empty((8, 8, 3))
    for p, xi in enumerate(pts):
        for a, s in enumerate(_HEX_SIGNS):
            fac = (1.0 + s * xi) / 2.0
            grads[p, a, 0] = s[0] / 2.0 * fac[1] * fac[2]
            grads[p, a, 1] = s[1] / 2.0 * fac[0] * fac[2]
            grads[p, a, 2] = s[2] / 2.0 * fac[0] * fac[1]
    return grads


_HEX_GAUSS_GRADS = _hex_gauss_gradients()


def element_jacobians(nodes, elements, kind):
    """Jacobian determinants per element (at Gauss points for hexes)."""
    coords = nodes[elements]  # (E, nodes, 3)
    if kind is ElementKind.TET4:
        edges = coords[:, 1:, :] - coords[:, :1, :]  # (E, 3, 3)
        return np.linalg.det(edges)[:, None]
    jac = np.einsum("pak,eaj->epjk", _HEX_GAUSS_GRADS, coords)
    return np.linalg.det(jac)


@dataclass
class Mesh:
    """A conforming single-kind mesh with per-element material IDs."""

    nodes: np.ndarray
    elements: np.ndarray
    element_kind: ElementKind
    material_ids: np.ndarray

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=np.float64)
        self.elements = np.ascontiguousarray(self.elements, dtype=np.int32)
        self.material_ids = np.ascontiguousarray(
            self.material_ids, dtype=np.int32
        )

    @property
    def num_nodes(self):
        return self.nodes.shape[0]

    @property
    def num_elements(self):
        return self.elements.shape[0]

    def bounding_box(self):
        return self.nodes.min(axis=0), self.nodes.max(axis=0)

    def min_edge_length(self):
        """Shortest first-corner edge over all elements (size scale)."""
        first = self.nodes[self.elements[:, 0]]
        second = self.nodes[self.elements[:, 1]]
        return float(np.linalg.norm(second - first, axis=1).min())

    def validate(self):
        """Check index ranges, shapes and element orientation."""
        n_per = _NODES_PER[self.element_kind]
        if self.elements.ndim != 2 or self.elements.shape[1] != n_per:
            raise ValueError(
                f"{self.element_kind.value} connectivity must have "
                f"{n_per} nodes per element"
            )
        if self.material_ids.shape != (self.num_elements,):
            raise ValueError("material_ids must have one entry per element")
        if self.num_elements and (
            self.elements.min() < 0 or self.elements.max() >= self.num_nodes
        ):
            raise ValueError("element connectivity references unknown nodes")
        dets = element_jacobians(self.nodes, self.elements, self.element_kind)
        bad = np.where((dets <= 0.0).any(axis=1))[0]
        if bad.size:
            raise InvertedElement(
                f"element {bad[0]} has non-positive Jacobian determinant"
            )
        return self

    def audit_conformity(self):
        """Face-hash audit: interior faces twice, boundary faces once.

        Structured slabs are conforming by construction; this is meant
        for imported meshes and for property tests, and costs O(faces).
        """
        faces = []
        for local in _FACES[self.element_kind]:
            faces.append(np.sort(self.elements[:, local], axis=1))
        all_faces = np.concatenate(faces, axis=0)
        _, counts = np.unique(all_faces, axis=0, return_counts=True)
        if counts.max(initial=1) > 2:
            raise ValueError("non-conforming mesh: a face is shared by "
                             "more than two elements")
        return self


@dataclass(frozen=True)
class SlabSpec:
    """Axis-aligned box with uniform target element size."""

    extent: tuple
    spacing: float
    element_kind: ElementKind = ElementKind.HEX8

    def __post_init__(self):
        object.__setattr__(
            self, "extent", tuple(float(e) for e in self.extent)
        )
        if len(self.extent) != 3 or any(e <= 0 for e in self.extent):
            raise ValueError("slab extent must be three positive lengths")
        if self.spacing <= 0:
            raise ZeroSpacing("slab element size must be positive")

    def cells_per_axis(self):
        counts = []
        for L in self.extent:
            n = int(round(L / self.spacing))
            if n < 1 or abs(n * self.spacing - L) > 1e-9 * L:
                raise NonDivisibleExtent(
                    f"extent {L} is not an integer multiple of "
                    f"element size {self.spacing}"
                )
            counts.append(n)
        return tuple(counts)


# Kuhn decomposition: six positively oriented tets per cell, each
# containing the main diagonal c000-c111.  Local corners are numbered
# i + 2j + 4k.
_KUHN_TETS = (
    (0, 1, 3, 7),
    (0, 5, 1, 7),
    (0, 3, 2, 7),
    (0, 2, 6, 7),
    (0, 4, 5, 7),
    (0, 6, 4, 7),
)


def build_slab_mesh(spec):
    """Structured mesh of an axis-aligned slab, all material IDs = 1."""
    nx, ny, nz = spec.cells_per_axis()
    dx = spec.spacing

    xs = np.arange(nx + 1) * dx
    ys = np.arange(ny + 1) * dx
    zs = np.arange(nz + 1) * dx
    Z, Y, X = np.meshgrid(zs, ys, xs, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def nid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    I, J, K = np.meshgrid(
        np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
    )
    i = I.ravel(order="F")
    j = J.ravel(order="F")
    k = K.ravel(order="F")
    corners = np.column_stack([
        nid(i, j, k), nid(i + 1, j, k), nid(i + 1, j + 1, k), nid(i, j + 1, k),
        nid(i, j, k + 1), nid(i + 1, j, k + 1), nid(i + 1, j + 1, k + 1),
        nid(i, j + 1, k + 1),
    ])

    if spec.element_kind is ElementKind.HEX8:
        elements = corners
    else:
        # corner columns above are in VTK order; Kuhn corners i+2j+4k
        vtk_to_kuhn = (0, 1, 3, 2, 4, 5, 7, 6)
        cell = corners[:, vtk_to_kuhn]
        elements = np.stack(
            [cell[:, tet] for tet in _KUHN_TETS], axis=1
        ).reshape(-1, 4)

    mesh = Mesh(
        nodes=nodes,
        elements=elements,
        element_kind=spec.element_kind,
        material_ids=np.ones(elements.shape[0], dtype=np.int32),
    )
    return mesh.validate()


def nearest_node(mesh, point):
    """Index of the mesh node closest to a 3D point."""
    deltas = mesh.nodes - np.asarray(point, dtype=np.float64)
    return int(np.argmin(np.einsum("ij,ij->i", deltas, deltas)))


@dataclass
class FiberField:
    """Orthonormal per-node frame: fiber, sheetlet, sheet-normal."""

    f0: np.ndarray
    s0: np.ndarray
    n0: np.ndarray

    def __post_init__(self):
        self.f0 = np.ascontiguousarray(self.f0, dtype=np.float64)
        self.s0 = np.ascontiguousarray(self.s0, dtype=np.float64)
        self.n0 = np.ascontiguousarray(self.n0, dtype=np.float64)

    def validate(self):
        for name, arr in (("f0", self.f0), ("s0", self.s0), ("n0", self.n0)):
            norms = np.linalg.norm(arr, axis=1)
            if np.abs(norms - 1.0).max(initial=0.0) > 1e-10:
                raise ValueError(f"{name} is not unit length at every node")
        for a, b, pair in (
            (self.f0, self.s0, "f0·s0"),
            (self.f0, self.n0, "f0·n0"),
            (self.s0, self.n0, "s0·n0"),
        ):
            dots = np.abs(np.einsum("ij,ij->i", a, b))
            if dots.max(initial=0.0) > 1e-8:
                raise ValueError(f"fiber frame not orthonormal: {pair}")
        return self


def slab_fiber_field(mesh, transmural_axis, endo_angle, epi_angle):
    """Linear transmural fiber rotation for a box slab.

    The transmural coordinate phi runs 0 (endocardium) to 1 (epicardium)
    along ``transmural_axis``; the fiber angle interpolates linearly from
    ``endo_angle`` to ``epi_angle`` (degrees), measured from the longer
    of the two in-plane axes and rotated about the transmural direction.
    n0 is the transmural unit vector and s0 = n0 x f0.
    """
    lo, hi = mesh.bounding_box()
    size = hi - lo
    thickness = size[transmural_axis]
    if thickness <= 0.0:
        raise DegenerateThickness(
            f"slab has zero thickness along axis {transmural_axis}"
        )
    in_plane = [ax for ax in range(3) if ax != transmural_axis]
    # the later axis wins ties, so a cube gets a deterministic frame
    long_axis = max(in_plane, key=lambda ax: (size[ax], ax))

    e_n = np.zeros(3)
    e_n[transmural_axis] = 1.0
    e_long = np.zeros(3)
    e_long[long_axis] = 1.0
    e_perp = np.cross(e_n, e_long)

    phi = (mesh.nodes[:, transmural_axis] - lo[transmural_axis]) / thickness
    alpha = np.deg2rad(endo_angle + phi * (epi_angle - endo_angle))

    f0 = np.outer(np.cos(alpha), e_long) + np.outer(np.sin(alpha), e_perp)
    n0 = np.tile(e_n, (mesh.num_nodes, 1))
    s0 = np.cross(n0, f0)
    return FiberField(f0=f0, s0=s0, n0=n0).validate()


# ---------------------------------------------------------------------------
# Gmsh MSH v2.2 ASCII import/export
# ---------------------------------------------------------------------------

# element type -> node count for the types we silently skip (points,
# lines, surface elements often present in gmsh output)
_SKIPPED_MSH_TYPES = {15: 1, 1: 2, 2: 3, 3: 4}
_VOLUME_MSH_TYPES = {4: ElementKind.TET4, 5: ElementKind.HEX8}


def _read_sections(path):
    sections = {}
    current = None
    start_line = 0
    body = []
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("$End"):
                if current is None or line != f"$End{current}":
                    raise MalformedFile(
                        f"unexpected section terminator {line!r}", lineno
                    )
                sections[current] = (start_line, body)
                current, body = None, []
            elif line.startswith("$"):
                if current is not None:
                    raise MalformedFile(
                        f"nested section {line!r} inside ${current}", lineno
                    )
                current = line[1:]
                start_line = lineno
                body = []
            else:
                body.append((lineno, line))
    if current is not None:
        raise MalformedFile(f"section ${current} never terminated", start_line)
    return sections


def import_msh(path, scaling_factor=1.0):
    """Read a Gmsh MSH v2.2 ASCII volume mesh.

    Node coordinates are multiplied by ``scaling_factor`` (e.g. 1e-3 for
    a mesh authored in millimeters).  The first physical tag of each
    volume element becomes its material ID.  Lower-dimensional elements
    (points, lines, triangles, quads) are skipped.
    """
    sections = _read_sections(path)
    for required in ("Nodes", "Elements"):
        if required not in sections:
            raise MalformedFile(f"missing ${required} section", 1)

    if "MeshFormat" in sections:
        lineno, fields = sections["MeshFormat"][1][0]
        version = fields.split()[0]
        if not version.startswith("2."):
            raise MalformedFile(
                f"unsupported MSH format version {version}", lineno
            )

    start, body = sections["Nodes"]
    if not body:
        raise MalformedFile("empty $Nodes section", start)
    count_line, count_text = body[0]
    try:
        n_nodes = int(count_text)
    except ValueError:
        raise MalformedFile("node count is not an integer", count_line)
    if len(body) - 1 != n_nodes:
        raise MalformedFile(
            f"expected {n_nodes} node lines, found {len(body) - 1}",
            count_line,
        )
    coords = np.empty((n_nodes, 3))
    index_of = {}
    for row, (lineno, text) in enumerate(body[1:]):
        parts = text.split()
        if len(parts) != 4:
            raise MalformedFile("node line must be 'id x y z'", lineno)
        try:
            node_id = int(parts[0])
            coords[row] = [float(p) for p in parts[1:]]
        except ValueError:
            raise MalformedFile("malformed node line", lineno)
        if node_id in index_of:
            raise MalformedFile(f"duplicate node id {node_id}", lineno)
        index_of[node_id] = row

    start, body = sections["Elements"]
    if not body:
        raise MalformedFile("empty $Elements section", start)
    count_line, count_text = body[0]
    try:
        n_elements = int(count_text)
    except ValueError:
        raise MalformedFile("element count is not an integer", count_line)
    if len(body) - 1 != n_elements:
        raise MalformedFile(
            f"expected {n_elements} element lines, found {len(body) - 1}",
            count_line,
        )

    kind = None
    connectivity = []
    tags = []
    for lineno, text in body[1:]:
        parts = text.split()
        if len(parts) < 3:
            raise MalformedFile("element line too short", lineno)
        try:
            etype = int(parts[1])
            n_tags = int(parts[2])
        except ValueError:
            raise MalformedFile("malformed element header", lineno)
        rest = parts[3:]
        if len(rest) < n_tags:
            raise MalformedFile("element tags truncated", lineno)
        tag_values = rest[:n_tags]
        node_ids = rest[n_tags:]
        if etype in _SKIPPED_MSH_TYPES:
            continue
        if etype not in _VOLUME_MSH_TYPES:
            raise UnsupportedElementType(
                f"MSH element type {etype} at line {lineno} is not supported"
            )
        this_kind = _VOLUME_MSH_TYPES[etype]
        if kind is None:
            kind = this_kind
        elif kind is not this_kind:
            raise MixedElementTypes(
                f"mesh mixes {kind.value} and {this_kind.value} elements"
            )
        if n_tags < 1:
            raise MalformedFile(
                "volume element carries no physical tag", lineno
            )
        expected = _NODES_PER[this_kind]
        if len(node_ids) != expected:
            raise MalformedFile(
                f"{this_kind.value} element needs {expected} nodes", lineno
            )
        try:
            row = [index_of[int(n)] for n in node_ids]
            tag = int(tag_values[0])
        except (ValueError, KeyError):
            raise MalformedFile(
                "element references an unknown node id", lineno
            )
        connectivity.append(row)
        tags.append(tag)

    if kind is None:
        raise MalformedFile("file contains no volume elements", start)

    mesh = Mesh(
        nodes=coords * float(scaling_factor),
        elements=np.asarray(connectivity, dtype=np.int32),
        element_kind=kind,
        material_ids=np.asarray(tags, dtype=np.int32),
    )
    mesh.validate()
    mesh.audit_conformity()
    return mesh


def write_msh(mesh, path):
    """Write a mesh as MSH v2.2 ASCII (1-based ids, one physical tag)."""
    etype = 4 if mesh.element_kind is ElementKind.TET4 else 5
    with open(path, "w", encoding="ascii") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        fh.write(f"$Nodes\n{mesh.num_nodes}\n")
        for idx, (x, y, z) in enumerate(mesh.nodes, start=1):
            fh.write(f"{idx} {x:.17g} {y:.17g} {z:.17g}\n")
        fh.write("$EndNodes\n")
        fh.write(f"$Elements\n{mesh.num_elements}\n")
        for idx, (conn, tag) in enumerate(
            zip(mesh.elements, mesh.material_ids), start=1
        ):
            nodes = " ".join(str(c + 1) for c in conn)
            fh.write(f"{idx} {etype} 1 {tag} {nodes}\n")
        fh.write("$EndElements\n")


# ---------------------------------------------------------------------------
# Fiber import from VTK legacy ASCII point data
# ---------------------------------------------------------------------------


def _parse_vtk_points_and_vectors(path, wanted):
    """POINTS and the requested VECTORS arrays of a legacy VTK file."""
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        tokens_per_line = [line.split() for line in fh]

    points = None
    vectors = {}
    i = 0
    n_lines = len(tokens_per_line)

    def take_floats(start, count):
        vals = []
        j = start
        while len(vals) < count and j < n_lines:
            vals.extend(float(tok) for tok in tokens_per_line[j])
            j += 1
        if len(vals) < count:
            raise MalformedFile("numeric block truncated", start + 1)
        return np.asarray(vals[:count]), j

    while i < n_lines:
        toks = tokens_per_line[i]
        if not toks:
            i += 1
            continue
        key = toks[0].upper()
        if key == "POINTS":
            n = int(toks[1])
            flat, i = take_floats(i + 1, 3 * n)
            points = flat.reshape(n, 3)
            continue
        if key == "VECTORS":
            name = toks[1]
            if points is None:
                raise MalformedFile("VECTORS before POINTS", i + 1)
            flat, i = take_floats(i + 1, 3 * points.shape[0])
            if name in wanted:
                vectors[name] = flat.reshape(-1, 3)
            continue
        i += 1

    if points is None:
        raise MalformedFile("file has no POINTS section", 1)
    return points, vectors


def import_fibers(path, array_names, scaling_factor, mesh):
    """Read nodal fiber frames from a VTK legacy ASCII file.

    ``array_names`` gives the VECTORS array names of (f0, s0, n0) in that
    order.  Points are scaled by ``scaling_factor``, then matched to mesh
    nodes by nearest-point search within 1e-6 of the smallest element
    edge.  f0 is normalized, s0 re-orthogonalized against f0, and n0
    recomputed as f0 x s0, so the result is exactly orthonormal.
    """
    if len(array_names) != 3:
        raise ValueError("array_names must name the f0, s0, n0 arrays")
    points, vectors = _parse_vtk_points_and_vectors(path, set(array_names))
    for name in array_names:
        if name not in vectors:
            raise MissingArray(name)

    points = points * float(scaling_factor)
    if points.shape[0] != mesh.num_nodes:
        raise NodeCountMismatch(
            f"fiber file has {points.shape[0]} points, mesh has "
            f"{mesh.num_nodes} nodes"
        )

    tol = 1e-6 * mesh.min_edge_length()
    dist, perm = cKDTree(points).query(mesh.nodes)
    if dist.max() > tol:
        worst = int(np.argmax(dist))
        raise NodeCoordinateMismatch(
            f"no fiber point within {tol:.3e} m of mesh node {worst}"
        )
    if np.unique(perm).size != mesh.num_nodes:
        raise NodeCoordinateMismatch(
            "fiber points do not match mesh nodes one-to-one"
        )

    raw_f = vectors[array_names[0]][perm]
    raw_s = vectors[array_names[1]][perm]

    f_norm = np.linalg.norm(raw_f, axis=1)
    bad = np.where(f_norm < 1e-14)[0]
    if bad.size:
        raise ZeroVectorAtNode(int(bad[0]))
    f0 = raw_f / f_norm[:, None]

    s_proj = raw_s - np.einsum("ij,ij->i", raw_s, f0)[:, None] * f0
    s_norm = np.linalg.norm(s_proj, axis=1)
    bad = np.where(s_norm < 1e-14)[0]
    if bad.size:
        raise ZeroVectorAtNode(int(bad[0]))
    s0 = s_proj / s_norm[:, None]

    n0 = np.cross(f0, s0)
    return FiberField(f0=f0, s0=s0, n0=n0).validate()
