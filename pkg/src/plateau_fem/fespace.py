"""Lowest-order finite element spaces on tetrahedra and their operators.

Spaces: P1 (nodal), NED (first-kind Nedelec, one dof per edge), RT (lowest
order Raviart-Thomas, one flux per facet), P0 and P0^3 (cellwise constants).
Global orientations come from the mesh: edges low -> high node index, facets
by their sorted vertex triple. With these conventions the incidence matrices
satisfy ``curl @ grad == 0`` and ``div @ curl == 0`` as integer identities.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .mesh import LOCAL_EDGES, TetMesh

SPACES = ("P1", "NED", "RT", "P0", "P0^3")

# symmetric 4-point rule, exact for quadratics; barycentric coordinates
_A, _B = 0.5854101966249685, 0.1381966011250105
QUAD_BARY = np.array([[_A, _B, _B, _B], [_B, _A, _B, _B], [_B, _B, _A, _B], [_B, _B, _B, _A]])
QUAD_WEIGHTS = np.full(4, 0.25)
CENTROID_BARY = np.full((1, 4), 0.25)


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DofMap:
    space: str
    n_dofs: int
    cell_dofs: np.ndarray
    cell_signs: np.ndarray


def build_dof_map(mesh: TetMesh, space: str) -> DofMap:
    nc = mesh.n_cells
    if space == "P1":
        return DofMap(space, mesh.n_nodes, mesh.cells, np.ones((nc, 4), dtype=np.int8))
    if space == "NED":
        return DofMap(space, mesh.n_edges, mesh.cell_edges, mesh.cell_edge_signs)
    if space == "RT":
        return DofMap(space, mesh.n_facets, mesh.cell_facets, mesh.cell_facet_signs)
    if space == "P0":
        return DofMap(space, nc, np.arange(nc)[:, None], np.ones((nc, 1), dtype=np.int8))
    if space == "P0^3":
        dofs = np.arange(3 * nc).reshape(nc, 3)
        return DofMap(space, 3 * nc, dofs, np.ones((nc, 3), dtype=np.int8))
    raise ValueError(f"unknown space {space!r}; expected one of {SPACES}")


def barycentric_gradients(mesh: TetMesh) -> np.ndarray:
    """Gradients of the four barycentric coordinates, shape (cells, 4, 3)."""
    return _bary_grads(mesh)


@lru_cache(maxsize=8)
def _bary_grads(mesh: TetMesh) -> np.ndarray:
    x = mesh.nodes[mesh.cells]
    jac = (x[:, 1:] - x[:, :1]).transpose(0, 2, 1)  # columns are edge vectors
    inv = np.linalg.inv(jac)  # rows are grad(lambda_1..3)
    g = np.empty((mesh.n_cells, 4, 3))
    g[:, 1:] = inv
    g[:, 0] = -inv.sum(axis=1)
    g.flags.writeable = False
    return g


def _check_volumes(mesh: TetMesh) -> None:
    bad = mesh.volumes < 1e-14
    if np.any(bad):
        raise AssemblyError(f"degenerate cell {int(np.flatnonzero(bad)[0])} (volume {mesh.volumes[bad][0]:.3e})")


# --------------------------------------------------------------------------
# incidence operators


def discrete_gradient(mesh: TetMesh) -> sp.csr_matrix:
    """NED x P1 incidence: -1 at the low node, +1 at the high node of each edge."""
    ne = mesh.n_edges
    rows = np.repeat(np.arange(ne), 2)
    cols = mesh.edges.ravel()
    vals = np.tile([-1.0, 1.0], ne)
    return sp.csr_matrix((vals, (rows, cols)), shape=(ne, mesh.n_nodes))


def _edge_lookup(mesh: TetMesh, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    keys = mesh.edges[:, 0] * mesh.n_nodes + mesh.edges[:, 1]
    q = a * mesh.n_nodes + b
    idx = np.searchsorted(keys, q)
    assert np.all(keys[idx] == q)
    return idx


def discrete_curl(mesh: TetMesh) -> sp.csr_matrix:
    """RT x NED incidence: boundary of facet [a,b,c] is [a,b] + [b,c] - [a,c]."""
    f = mesh.facets
    nf = mesh.n_facets
    e_ab = _edge_lookup(mesh, f[:, 0], f[:, 1])
    e_bc = _edge_lookup(mesh, f[:, 1], f[:, 2])
    e_ac = _edge_lookup(mesh, f[:, 0], f[:, 2])
    rows = np.repeat(np.arange(nf), 3)
    cols = np.stack([e_ab, e_bc, e_ac], axis=1).ravel()
    vals = np.tile([1.0, 1.0, -1.0], nf)
    return sp.csr_matrix((vals, (rows, cols)), shape=(nf, mesh.n_edges))


def discrete_div(mesh: TetMesh) -> sp.csr_matrix:
    """P0 x RT incidence: signed sum of outward facet fluxes."""
    nc = mesh.n_cells
    rows = np.repeat(np.arange(nc), 4)
    return sp.csr_matrix(
        (mesh.cell_facet_signs.ravel().astype(float), (rows, mesh.cell_facets.ravel())),
        shape=(nc, mesh.n_facets),
    )


# --------------------------------------------------------------------------
# Whitney basis functions


def ned_basis(mesh: TetMesh, bary: np.ndarray) -> np.ndarray:
    """Signed NED basis values at barycentric points, shape (cells, points, 6, 3)."""
    g = barycentric_gradients(mesh)
    i, j = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    lam_i = bary[:, i]  # (points, 6)
    lam_j = bary[:, j]
    vals = lam_i[None, :, :, None] * g[:, None, j, :] - lam_j[None, :, :, None] * g[:, None, i, :]
    return vals * mesh.cell_edge_signs[:, None, :, None]


def ned_basis_curls(mesh: TetMesh) -> np.ndarray:
    """Signed (constant) curls of the NED basis, shape (cells, 6, 3)."""
    g = barycentric_gradients(mesh)
    i, j = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    return 2.0 * np.cross(g[:, i], g[:, j]) * mesh.cell_edge_signs[:, :, None]


def _cellwise_operator(mesh: TetMesh, local: np.ndarray) -> sp.csr_matrix:
    """Sparse (3*cells x edges) matrix from per-cell (6, 3) blocks."""
    nc = mesh.n_cells
    rows = (3 * np.arange(nc)[:, None, None] + np.arange(3)[None, None, :]).repeat(6, axis=1)
    cols = np.broadcast_to(mesh.cell_edges[:, :, None], (nc, 6, 3))
    return sp.csr_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(3 * nc, mesh.n_edges))


def centroid_operator(mesh: TetMesh) -> sp.csr_matrix:
    """NED -> P0^3: the field value at each cell centroid (equal to its cell mean)."""
    return _cellwise_operator(mesh, ned_basis(mesh, CENTROID_BARY)[:, 0])


def cell_curl_operator(mesh: TetMesh) -> sp.csr_matrix:
    """NED -> P0^3: the constant curl on each cell."""
    return _cellwise_operator(mesh, ned_basis_curls(mesh))


def evaluate_ned(mesh: TetMesh, u: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """Values of a NED field at barycentric points of every cell, (cells, points, 3)."""
    phi = ned_basis(mesh, bary)
    return np.einsum("cpkd,ck->cpd", phi, u[mesh.cell_edges])


def project_p0(mesh: TetMesh, u: np.ndarray) -> np.ndarray:
    """Cell averages of a NED field, shape (cells, 3)."""
    return (centroid_operator(mesh) @ u).reshape(-1, 3)


def cell_curl(mesh: TetMesh, u: np.ndarray) -> np.ndarray:
    return (cell_curl_operator(mesh) @ u).reshape(-1, 3)


# --------------------------------------------------------------------------
# interpolation

_GAUSS2 = 0.5 + np.array([-0.5, 0.5]) / np.sqrt(3.0)


def interpolate_ned(mesh: TetMesh, f) -> np.ndarray:
    """Edge dofs ``int_e f . t_e`` with ``t_e = x_b - x_a``, 2-point Gauss rule."""
    xa = mesh.nodes[mesh.edges[:, 0]]
    xb = mesh.nodes[mesh.edges[:, 1]]
    t = xb - xa
    dofs = np.zeros(mesh.n_edges)
    for s in _GAUSS2:
        dofs += 0.5 * np.einsum("ij,ij->i", np.asarray(f(xa + s * t)), t)
    return dofs


def interpolate_p1(mesh: TetMesh, f) -> np.ndarray:
    return np.asarray(f(mesh.nodes), dtype=float)


def interpolate_rt(mesh: TetMesh, f) -> np.ndarray:
    """Facet fluxes ``int_F f . n_F`` (n_F from the sorted-vertex orientation), edge-midpoint rule."""
    x = mesh.nodes[mesh.facets]
    area_normal = 0.5 * np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    flux = np.zeros(mesh.n_facets)
    for a, b in ((0, 1), (1, 2), (0, 2)):
        flux += np.einsum("ij,ij->i", np.asarray(f(0.5 * (x[:, a] + x[:, b]))), area_normal) / 3.0
    return flux


def rt_cell_vectors(mesh: TetMesh, flux: np.ndarray) -> np.ndarray:
    """Constant part of an RT field on each cell from its four facet fluxes.

    For a divergence-free RT field (such as a discrete curl) this is the exact
    cell value; in general it is the cell mean.
    """
    x = mesh.nodes[mesh.facets[mesh.cell_facets]]  # (cells, 4, 3, 3)
    # mean of RT field: (1/|T|) sum_F flux_F (c_F - c_T) with outward fluxes
    cF = x.mean(axis=2)
    out_flux = flux[mesh.cell_facets] * mesh.cell_facet_signs
    return np.einsum("cf,cfd->cd", out_flux, cF - mesh.centroids[:, None, :]) / mesh.volumes[:, None]


# --------------------------------------------------------------------------
# bilinear forms


def _assemble_cells(mesh: TetMesh, local: np.ndarray) -> sp.csr_matrix:
    rows = np.repeat(mesh.cell_edges, 6, axis=1)
    cols = np.tile(mesh.cell_edges, (1, 6))
    A = sp.csr_matrix((local.reshape(mesh.n_cells, -1).ravel(), (rows.ravel(), cols.ravel())), shape=(mesh.n_edges,) * 2)
    A.sum_duplicates()
    return A


def assemble_mass_ned(mesh: TetMesh) -> sp.csr_matrix:
    """NED mass matrix ``<u, v>`` with the 4-point rule."""
    _check_volumes(mesh)
    phi = ned_basis(mesh, QUAD_BARY)
    local = np.einsum("q,cqad,cqbd->cab", QUAD_WEIGHTS, phi, phi) * mesh.volumes[:, None, None]
    return _assemble_cells(mesh, local)


def assemble_curlcurl(mesh: TetMesh) -> sp.csr_matrix:
    """NED stiffness ``<curl u, curl v>``."""
    _check_volumes(mesh)
    c = ned_basis_curls(mesh)
    local = np.einsum("cad,cbd->cab", c, c) * mesh.volumes[:, None, None]
    return _assemble_cells(mesh, local)


def assemble_mixed(mesh: TetMesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Couplings of P0^3 with NED: ``(<p, v>, <p, curl v>)``, each (3*cells x edges)."""
    _check_volumes(mesh)
    w = sp.diags(np.repeat(mesh.volumes, 3))
    return (w @ centroid_operator(mesh)).tocsr(), (w @ cell_curl_operator(mesh)).tocsr()
