"""Finite-element spaces and sparse operator assembly.

Continuous piecewise-(tri)linear elements on the meshes of
:mod:`monodomain.geometry`: one degree of freedom per node, Gauss
quadrature that integrates the mass matrix exactly on affine elements
(2x2x2 points for hexahedra, a 4-point degree-2 rule for tetrahedra).
The anisotropic diffusion tensor

    D = sigma_l f0 (x) f0 + sigma_t s0 (x) s0 + sigma_n n0 (x) n0

is formed at each quadrature point from the nodal fiber frame,
re-normalized after interpolation.  Mass, stiffness and per-subdomain
mass matrices share a single CSR pattern (all node pairs that share an
element), so restricted matrices keep zero-valued entries rather than a
different sparsity structure.

Assembly loops run serially under numba; for the single-assembly-per-run
usage here the loop is not the hot path, and a serial scatter keeps the
result bit-for-bit reproducible regardless of thread settings.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
from numba import njit

from .errors import KeyMismatch, MissingConductivity, NonOrthonormalFrame
from .geometry import ElementKind

# ---------------------------------------------------------------------------
# Reference elements and quadrature
# ---------------------------------------------------------------------------

_HEX_SIGNS = np.array(
    [
        (-1, -1, -1), (1, -1, -1), (1, 1, -1), (-1, 1, -1),
        (-1, -1, 1), (1, -1, 1), (1, 1, 1), (-1, 1, 1),
    ],
    dtype=np.float64,
)


def _hex_tables():
    g = 1.0 / np.sqrt(3.0)
    pts = np.array(
        [(x, y, z) for z in (-g, g) for y in (-g, g) for x in (-g, g)]
    )
    weights = np.ones(8)
    values = np.empty((8, 8))
    grads = np.empty((8, 8, 3))
    for p, xi in enumerate(pts):
        for a, s in enumerate(_HEX_SIGNS):
            fac = (1.0 + s * xi) / 2.0
            values[p, a] = fac[0] * fac[1] * fac[2]
            grads[p, a, 0] = s[0] / 2.0 * fac[1] * fac[2]
            grads[p, a, 1] = s[1] / 2.0 * fac[0] * fac[2]
            grads[p, a, 2] = s[2] / 2.0 * fac[0] * fac[1]
    return weights, values, grads


def _tet_tables():
    a = 0.5854101966249685
    b = 0.1381966011250105
    bary = np.array(
        [(a, b, b, b), (b, a, b, b), (b, b, a, b), (b, b, b, a)]
    )
    values = bary  # P1 basis functions are the barycentric coordinates
    weights = np.full(4, 1.0 / 24.0)  # reference volume 1/6, equal split
    grads = np.array(
        [(-1.0, -1.0, -1.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]
    )
    grads = np.broadcast_to(grads, (4, 4, 3)).copy()
    return weights, values, grads


_HEX_W, _HEX_N, _HEX_DN = _hex_tables()
_TET_W, _TET_N, _TET_DN = _tet_tables()


def _tables_for(kind):
    if kind is ElementKind.HEX8:
        return _HEX_W, _HEX_N, _HEX_DN
    return _TET_W, _TET_N, _TET_DN


# ---------------------------------------------------------------------------
# Conductivities and the diffusion tensor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubdomainConductivity:
    """Conductivities of one material, already divided by chi_m * C_m."""

    sigma_l: float = 0.0
    sigma_t: float = 0.0
    sigma_n: float = 0.0
    disabled: bool = False

    def __post_init__(self):
        if self.disabled:
            return
        if min(self.sigma_l, self.sigma_t, self.sigma_n) < 0.0:
            raise ValueError("conductivities must be non-negative")


@dataclass
class ConductivitySet:
    """Per-material conductivities; disabled materials conduct nothing."""

    entries: dict = field(default_factory=dict)

    def add(self, material_id, sigma_l, sigma_t, sigma_n, disabled=False):
        self.entries[int(material_id)] = SubdomainConductivity(
            sigma_l, sigma_t, sigma_n, disabled
        )
        return self

    def __contains__(self, material_id):
        return int(material_id) in self.entries

    def __getitem__(self, material_id):
        return self.entries[int(material_id)]

    def disabled_ids(self):
        return {m for m, c in self.entries.items() if c.disabled}


def diffusion_tensor(sigma, f0, s0, n0):
    """Anisotropic diffusion tensor from conductivities and a frame."""
    frame = np.array([f0, s0, n0], dtype=np.float64)
    gram = frame @ frame.T
    if np.abs(gram - np.eye(3)).max() > 1e-6:
        raise NonOrthonormalFrame(
            "fiber frame is not orthonormal within 1e-6"
        )
    sl, st, sn = sigma
    return (
        sl * np.outer(frame[0], frame[0])
        + st * np.outer(frame[1], frame[1])
        + sn * np.outer(frame[2], frame[2])
    )


# ---------------------------------------------------------------------------
# FE space
# ---------------------------------------------------------------------------


class FeSpace:
    """Nodal Lagrange space of order 1 over a mesh.

    Owns the shared CSR pattern of all assembled operators and the
    DOF-to-material adjacency used for per-subdomain evaluation.
    """

    def __init__(self, mesh, degree=1):
        if degree != 1:
            raise ValueError(
                f"only degree-1 elements are supported, got degree {degree}"
            )
        self.mesh = mesh
        self.degree = degree
        self.dof_coords = mesh.nodes
        self._pattern = None
        self._adjacency = None

    @property
    def num_dofs(self):
        return self.mesh.num_nodes

    # -- sparsity pattern ---------------------------------------------------

    def pattern(self):
        """(indptr, indices) of the element-connectivity CSR pattern."""
        if self._pattern is None:
            self._pattern = _build_pattern(
                self.num_dofs, self.mesh.elements
            )
        return self._pattern

    def empty_matrix(self):
        indptr, indices = self.pattern()
        data = np.zeros(indices.size)
        return sp.csr_matrix(
            (data, indices, indptr), shape=(self.num_dofs, self.num_dofs)
        )

    # -- DOF/material adjacency ---------------------------------------------

    def _dof_materials(self):
        if self._adjacency is None:
            elements = self.mesh.elements
            mats = self.mesh.material_ids
            dofs = elements.ravel()
            per_dof_mat = np.repeat(mats, elements.shape[1])
            pairs = np.unique(
                np.column_stack([dofs, per_dof_mat]), axis=0
            )
            indptr = np.zeros(self.num_dofs + 1, dtype=np.int64)
            np.add.at(indptr, pairs[:, 0] + 1, 1)
            np.cumsum(indptr, out=indptr)
            self._adjacency = (indptr, pairs[:, 1].astype(np.int32))
        return self._adjacency

    @property
    def dof_subdomains(self):
        """List of material-ID sets adjacent to each DOF."""
        indptr, mats = self._dof_materials()
        return [
            set(mats[indptr[d]:indptr[d + 1]].tolist())
            for d in range(self.num_dofs)
        ]

    def material_ids(self):
        return np.unique(self.mesh.material_ids)

    def dofs_in_subdomain(self, material_id):
        """Indices of DOFs adjacent to at least one element of a material."""
        mask = self.mesh.material_ids == material_id
        return np.unique(self.mesh.elements[mask].ravel())

    def inactive_dof_mask(self, disabled_material_ids):
        """DOFs adjacent only to disabled materials (excluded from solves)."""
        disabled = set(int(m) for m in disabled_material_ids)
        if not disabled:
            return np.zeros(self.num_dofs, dtype=bool)
        indptr, mats = self._dof_materials()
        active_mats = np.array(
            [m for m in self.material_ids() if int(m) not in disabled],
            dtype=np.int32,
        )
        dof_of_entry = np.repeat(np.arange(self.num_dofs), np.diff(indptr))
        touches_active = np.zeros(self.num_dofs, dtype=bool)
        touches_active[dof_of_entry[np.isin(mats, active_mats)]] = True
        attached = np.diff(indptr) > 0
        return attached & ~touches_active


def _build_pattern(num_dofs, elements):
    """CSR (indptr, indices) over all DOF pairs sharing an element."""
    n_local = elements.shape[1]
    pattern = None
    # chunked so transient COO buffers stay modest on large meshes
    chunk = max(1, 200_000)
    for start in range(0, elements.shape[0], chunk):
        e = elements[start:start + chunk]
        rows = np.repeat(e, n_local, axis=1).ravel()
        cols = np.tile(e, (1, n_local)).ravel()
        part = sp.csr_matrix(
            (np.ones(rows.size, dtype=np.int8), (rows, cols)),
            shape=(num_dofs, num_dofs),
        )
        part.data[:] = 1
        pattern = part if pattern is None else pattern + part
    pattern.sort_indices()
    return pattern.indptr.astype(np.int64), pattern.indices.astype(np.int32)


# ---------------------------------------------------------------------------
# Assembly kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _csr_add(indptr, indices, data, row, col, value):
    lo = indptr[row]
    hi = indptr[row + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        if indices[mid] < col:
            lo = mid + 1
        else:
            hi = mid
    data[lo] += value


@njit(cache=True)
def _assemble_mass_kernel(
    nodes, elements, include, weights, basis, ref_grads,
    indptr, indices, data,
):
    n_qp = weights.shape[0]
    n_loc = basis.shape[1]
    local = np.empty((n_loc, n_loc))
    jac = np.empty((3, 3))
    for e in range(elements.shape[0]):
        if not include[e]:
            continue
        conn = elements[e]
        local[:, :] = 0.0
        for q in range(n_qp):
            jac[:, :] = 0.0
            for a in range(n_loc):
                node = conn[a]
                for i in range(3):
                    for j in range(3):
                        jac[i, j] += nodes[node, i] * ref_grads[q, a, j]
            det = (
                jac[0, 0] * (jac[1, 1] * jac[2, 2] - jac[1, 2] * jac[2, 1])
                - jac[0, 1] * (jac[1, 0] * jac[2, 2] - jac[1, 2] * jac[2, 0])
                + jac[0, 2] * (jac[1, 0] * jac[2, 1] - jac[1, 1] * jac[2, 0])
            )
            scale = weights[q] * det
            for a in range(n_loc):
                va = basis[q, a] * scale
                for b in range(n_loc):
                    local[a, b] += va * basis[q, b]
        for a in range(n_loc):
            row = conn[a]
            for b in range(n_loc):
                _csr_add(indptr, indices, data, row, conn[b], local[a, b])


@njit(cache=True)
def _assemble_stiffness_kernel(
    nodes, elements, sigma_rows, sigmas, f0, s0, n0,
    weights, basis, ref_grads, indptr, indices, data,
):
    n_qp = weights.shape[0]
    n_loc = basis.shape[1]
    local = np.empty((n_loc, n_loc))
    jac = np.empty((3, 3))
    inv = np.empty((3, 3))
    grads = np.empty((n_loc, 3))
    fq = np.empty(3)
    sq = np.empty(3)
    nq = np.empty(3)
    tensor = np.empty((3, 3))
    for e in range(elements.shape[0]):
        srow = sigma_rows[e]
        if srow < 0:
            continue
        sl = sigmas[srow, 0]
        st = sigmas[srow, 1]
        sn = sigmas[srow, 2]
        conn = elements[e]
        local[:, :] = 0.0
        for q in range(n_qp):
            jac[:, :] = 0.0
            for a in range(n_loc):
                node = conn[a]
                for i in range(3):
                    for j in range(3):
                        jac[i, j] += nodes[node, i] * ref_grads[q, a, j]
            det = (
                jac[0, 0] * (jac[1, 1] * jac[2, 2] - jac[1, 2] * jac[2, 1])
                - jac[0, 1] * (jac[1, 0] * jac[2, 2] - jac[1, 2] * jac[2, 0])
                + jac[0, 2] * (jac[1, 0] * jac[2, 1] - jac[1, 1] * jac[2, 0])
            )
            idet = 1.0 / det
            inv[0, 0] = (jac[1, 1] * jac[2, 2] - jac[1, 2] * jac[2, 1]) * idet
            inv[0, 1] = (jac[0, 2] * jac[2, 1] - jac[0, 1] * jac[2, 2]) * idet
            inv[0, 2] = (jac[0, 1] * jac[1, 2] - jac[0, 2] * jac[1, 1]) * idet
            inv[1, 0] = (jac[1, 2] * jac[2, 0] - jac[1, 0] * jac[2, 2]) * idet
            inv[1, 1] = (jac[0, 0] * jac[2, 2] - jac[0, 2] * jac[2, 0]) * idet
            inv[1, 2] = (jac[0, 2] * jac[1, 0] - jac[0, 0] * jac[1, 2]) * idet
            inv[2, 0] = (jac[1, 0] * jac[2, 1] - jac[1, 1] * jac[2, 0]) * idet
            inv[2, 1] = (jac[0, 1] * jac[2, 0] - jac[0, 0] * jac[2, 1]) * idet
            inv[2, 2] = (jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]) * idet
            # physical gradients: grad_a = inv^T @ ref_grad_a
            for a in range(n_loc):
                for i in range(3):
                    grads[a, i] = (
                        inv[0, i] * ref_grads[q, a, 0]
                        + inv[1, i] * ref_grads[q, a, 1]
                        + inv[2, i] * ref_grads[q, a, 2]
                    )
            # fiber frame at the quadrature point
            for i in range(3):
                fq[i] = 0.0
                sq[i] = 0.0
            for a in range(n_loc):
                node = conn[a]
                w = basis[q, a]
                for i in range(3):
                    fq[i] += w * f0[node, i]
                    sq[i] += w * s0[node, i]
            fn = np.sqrt(fq[0] ** 2 + fq[1] ** 2 + fq[2] ** 2)
            for i in range(3):
                fq[i] /= fn
            dot = fq[0] * sq[0] + fq[1] * sq[1] + fq[2] * sq[2]
            for i in range(3):
                sq[i] -= dot * fq[i]
            sn_norm = np.sqrt(sq[0] ** 2 + sq[1] ** 2 + sq[2] ** 2)
            for i in range(3):
                sq[i] /= sn_norm
            nq[0] = fq[1] * sq[2] - fq[2] * sq[1]
            nq[1] = fq[2] * sq[0] - fq[0] * sq[2]
            nq[2] = fq[0] * sq[1] - fq[1] * sq[0]
            for i in range(3):
                for j in range(3):
                    tensor[i, j] = (
                        sl * fq[i] * fq[j]
                        + st * sq[i] * sq[j]
                        + sn * nq[i] * nq[j]
                    )
            scale = weights[q] * det
            for a in range(n_loc):
                da0 = (
                    tensor[0, 0] * grads[a, 0]
                    + tensor[0, 1] * grads[a, 1]
                    + tensor[0, 2] * grads[a, 2]
                )
                da1 = (
                    tensor[1, 0] * grads[a, 0]
                    + tensor[1, 1] * grads[a, 1]
                    + tensor[1, 2] * grads[a, 2]
                )
                da2 = (
                    tensor[2, 0] * grads[a, 0]
                    + tensor[2, 1] * grads[a, 1]
                    + tensor[2, 2] * grads[a, 2]
                )
                for b in range(n_loc):
                    local[a, b] += scale * (
                        da0 * grads[b, 0]
                        + da1 * grads[b, 1]
                        + da2 * grads[b, 2]
                    )
        for a in range(n_loc):
            row = conn[a]
            for b in range(n_loc):
                _csr_add(indptr, indices, data, row, conn[b], local[a, b])


# ---------------------------------------------------------------------------
# Public assembly front ends
# ---------------------------------------------------------------------------


def assemble_mass(space, subdomain_filter=None):
    """Consistent mass matrix, optionally restricted to some materials.

    With a filter, elements of other materials are skipped; the sparsity
    pattern stays that of the full operator, so restricted matrices over
    all materials sum to the unrestricted one entrywise.
    """
    mesh = space.mesh
    if subdomain_filter is None:
        include = np.ones(mesh.num_elements, dtype=np.bool_)
    else:
        wanted = np.array(sorted(int(m) for m in subdomain_filter),
                          dtype=np.int32)
        include = np.isin(mesh.material_ids, wanted)
    weights, basis, ref_grads = _tables_for(mesh.element_kind)
    matrix = space.empty_matrix()
    _assemble_mass_kernel(
        mesh.nodes, mesh.elements, include, weights, basis, ref_grads,
        matrix.indptr.astype(np.int64), matrix.indices, matrix.data,
    )
    return matrix


def assemble_stiffness(space, conductivities, fibers):
    """Anisotropic stiffness matrix; disabled materials contribute nothing."""
    mesh = space.mesh
    present = space.material_ids()
    table = []
    row_of = {}
    for mat in present:
        mat = int(mat)
        if mat not in conductivities:
            raise MissingConductivity(mat)
        entry = conductivities[mat]
        if entry.disabled:
            row_of[mat] = -1
        else:
            row_of[mat] = len(table)
            table.append((entry.sigma_l, entry.sigma_t, entry.sigma_n))
    sigma_rows = np.array(
        [row_of[int(m)] for m in mesh.material_ids], dtype=np.int64
    )
    sigmas = np.asarray(table, dtype=np.float64).reshape(-1, 3)

    weights, basis, ref_grads = _tables_for(mesh.element_kind)
    matrix = space.empty_matrix()
    _assemble_stiffness_kernel(
        mesh.nodes, mesh.elements, sigma_rows, sigmas,
        fibers.f0, fibers.s0, fibers.n0,
        weights, basis, ref_grads,
        matrix.indptr.astype(np.int64), matrix.indices, matrix.data,
    )
    return matrix


def ici_lift(per_subdomain_mass, nodal_currents):
    """Weight per-subdomain nodal currents by the subdomain mass matrices.

    Returns sum_i M^i @ v^i, the right-hand-side contribution of ionic
    currents evaluated at nodes and interpolated inside elements.
    """
    if set(per_subdomain_mass) != set(nodal_currents):
        raise KeyMismatch(
            f"mass matrices cover materials {sorted(per_subdomain_mass)} "
            f"but currents cover {sorted(nodal_currents)}"
        )
    result = None
    for mat, matrix in per_subdomain_mass.items():
        term = matrix @ nodal_currents[mat]
        result = term if result is None else result + term
    return result


def export_matrix_market(matrix, path):
    """Dump a sparse operator as MatrixMarket text (debugging aid)."""
    scipy.io.mmwrite(str(path), matrix)
