"""Cell classification into obstacle, boundary layer and exterior."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .mesh import TetMesh
from .shapes import Shape


class Region(IntEnum):
    OBSTACLE = 0
    LAYER = 1
    EXTERIOR = 2


@dataclass(frozen=True, eq=False)
class RegionLabels:
    labels: np.ndarray
    p_max: np.ndarray
    q_max: np.ndarray
    node_level: np.ndarray

    @property
    def obstacle(self) -> np.ndarray:
        return self.labels == Region.OBSTACLE

    @property
    def layer(self) -> np.ndarray:
        return self.labels == Region.LAYER

    @property
    def exterior(self) -> np.ndarray:
        return self.labels == Region.EXTERIOR


def classify_cells(mesh: TetMesh, shape: Shape, w_E: float = 1e5, eps: float = 1e-6, beta: float = 1.0) -> RegionLabels:
    """Label cells by the signs of the level set at their vertices.

    A cell is OBSTACLE when all vertex values are negative, LAYER when the
    values change sign or touch zero, EXTERIOR otherwise. The surface density
    on LAYER cells is ``max(|nu . H|, eps)`` with the normal taken at the
    centroid.
    """
    level = shape.level(mesh.nodes)
    lc = level[mesh.cells]
    obstacle = np.all(lc < 0, axis=1)
    exterior = np.all(lc > 0, axis=1)
    labels = np.full(mesh.n_cells, Region.LAYER, dtype=np.int8)
    labels[obstacle] = Region.OBSTACLE
    labels[exterior] = Region.EXTERIOR

    p_max = np.ones(mesh.n_cells)
    p_max[obstacle] = w_E
    layer = labels == Region.LAYER
    if np.any(layer):
        nu = shape.normal(mesh.centroids[layer], strict=False)
        p_max[layer] = np.maximum(np.abs(nu @ shape.H), eps)
    q_max = np.where(obstacle, w_E, beta)
    for a in (labels, p_max, q_max, level):
        a.flags.writeable = False
    return RegionLabels(labels=labels, p_max=p_max, q_max=q_max, node_level=level)


def with_beta(labels: RegionLabels, beta: float, w_E: float) -> RegionLabels:
    q_max = np.where(labels.obstacle, w_E, beta)
    q_max.flags.writeable = False
    return RegionLabels(labels=labels.labels, p_max=labels.p_max, q_max=q_max, node_level=labels.node_level)


def cut_out_interior(mesh: TetMesh, shape: Shape) -> TetMesh:
    """Drop obstacle cells that share no vertex with a boundary-layer cell.

    Keeps a one-cell band inside the particle, which carries the initial
    line field and blocks the surface from entering the particle.
    """
    level = shape.level(mesh.nodes)
    lc = level[mesh.cells]
    obstacle = np.all(lc < 0, axis=1)
    near = np.zeros(mesh.n_nodes, dtype=bool)
    near[mesh.cells[~obstacle].ravel()] = True
    keep = ~obstacle | np.any(near[mesh.cells], axis=1)
    return mesh.submesh(keep)


def layer_surface_area(mesh: TetMesh, labels: RegionLabels) -> float:
    """Area of the piecewise-planar zero set of the interpolated level set.

    Sums the triangles/quadrilaterals cut from each LAYER cell by the zero
    level of the P1 interpolant of the nodal level-set values.
    """
    idx = np.flatnonzero(labels.layer)
    x = mesh.nodes[mesh.cells[idx]]
    f = labels.node_level[mesh.cells[idx]]
    # vertices exactly on the zero set count as outside
    neg = f < 0
    f = np.where(f == 0, np.finfo(float).tiny, f)

    def cut(sel, i, j):
        f_, x_ = f[sel], x[sel]
        fi = np.take_along_axis(f_, i[:, None], 1)[:, 0]
        fj = np.take_along_axis(f_, j[:, None], 1)[:, 0]
        xi = np.take_along_axis(x_, i[:, None, None], 1)[:, 0]
        xj = np.take_along_axis(x_, j[:, None, None], 1)[:, 0]
        return xi + (fi / (fi - fj))[:, None] * (xj - xi)

    area = 0.0
    n_neg = neg.sum(axis=1)
    # one vertex separated from the other three: a triangle
    odd = np.where(n_neg == 1, np.argmax(neg, axis=1), np.argmin(neg, axis=1))
    tri = (n_neg == 1) | (n_neg == 3)
    if np.any(tri):
        o = odd[tri]
        others = (o[:, None] + np.arange(1, 4)[None, :]) % 4
        p = [cut(tri, o, others[:, k]) for k in range(3)]
        area += 0.5 * np.linalg.norm(np.cross(p[1] - p[0], p[2] - p[0]), axis=1).sum()
    quad = n_neg == 2
    if np.any(quad):
        order = np.argsort(~neg[quad], axis=1, kind="stable")  # two negatives, then two positives
        i, j, k, l = order.T
        # cycle ik -> il -> jl -> jk; area is half the cross product of the diagonals
        a, b, c, d = cut(quad, i, k), cut(quad, i, l), cut(quad, j, l), cut(quad, j, k)
        area += 0.5 * np.linalg.norm(np.cross(c - a, d - b), axis=1).sum()
    return float(area)
