"""Tetrahedral meshes: topology enumeration, structured box meshes and GMSH import."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

# local edge (i, j) and facet (opposite vertex k) numbering inside a cell
LOCAL_EDGES = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
LOCAL_FACETS = np.array([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)])


class MeshError(ValueError):
    pass


class MshParseError(MeshError):
    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def signed_volumes(nodes: np.ndarray, cells: np.ndarray) -> np.ndarray:
    x = nodes[cells]
    d = x[:, 1:] - x[:, :1]
    return np.einsum("ij,ij->i", d[:, 0], np.cross(d[:, 1], d[:, 2])) / 6.0


@dataclass(frozen=True, eq=False)
class TetMesh:
    """Tetrahedral mesh with enumerated edges and facets.

    Edges are stored as sorted node pairs and are oriented from the lower to
    the higher node index. Facets are sorted node triples (a, b, c) oriented by
    the normal ``(x_b - x_a) x (x_c - x_a)``; ``cell_facet_signs`` is +1 where
    that normal points out of the cell. Cells are ordered to have positive
    signed volume.
    """

    nodes: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    facets: np.ndarray
    cell_edges: np.ndarray
    cell_edge_signs: np.ndarray
    cell_facets: np.ndarray
    cell_facet_signs: np.ndarray
    facet_cells: np.ndarray
    volumes: np.ndarray
    centroids: np.ndarray
    tags: Optional[np.ndarray] = None

    @classmethod
    def from_cells(cls, nodes, cells, tags=None) -> "TetMesh":
        nodes = np.asarray(nodes, dtype=float)
        cells = np.array(cells, dtype=np.int64).reshape(-1, 4)
        if nodes.ndim != 2 or nodes.shape[1] != 3:
            raise MeshError("nodes must be an (n, 3) array")
        if cells.size and (cells.min() < 0 or cells.max() >= len(nodes)):
            raise MeshError("cell references a node that does not exist")

        vol = signed_volumes(nodes, cells)
        flip = vol < 0
        cells[flip, 2], cells[flip, 3] = cells[flip, 3], cells[flip, 2].copy()
        vol = np.abs(vol)
        if np.any(vol < 1e-14):
            raise MeshError(f"{int(np.sum(vol < 1e-14))} degenerate cell(s)")

        n = len(nodes)
        nc = len(cells)

        a = cells[:, LOCAL_EDGES[:, 0]]
        b = cells[:, LOCAL_EDGES[:, 1]]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys = (lo * n + hi).ravel()
        ukeys, inv = np.unique(keys, return_inverse=True)
        edges = np.stack([ukeys // n, ukeys % n], axis=1)
        cell_edges = inv.reshape(nc, 6)
        cell_edge_signs = np.where(a < b, 1, -1).astype(np.int8)

        tri = np.sort(cells[:, LOCAL_FACETS], axis=2)
        keys = ((tri[..., 0] * n + tri[..., 1]) * n + tri[..., 2]).ravel()
        ukeys, inv = np.unique(keys, return_inverse=True)
        facets = np.stack([ukeys // (n * n), (ukeys // n) % n, ukeys % n], axis=1)
        cell_facets = inv.reshape(nc, 4)

        # +1 where the facet normal points away from the opposite vertex
        f = facets[cell_facets]
        xa, xb, xc = nodes[f[..., 0]], nodes[f[..., 1]], nodes[f[..., 2]]
        normal = np.cross(xb - xa, xc - xa)
        xo = nodes[cells]
        cell_facet_signs = np.where(np.einsum("ijk,ijk->ij", normal, xa - xo) > 0, 1, -1).astype(np.int8)

        counts = np.bincount(cell_facets.ravel(), minlength=len(facets))
        if np.any(counts > 2):
            raise MeshError("non-manifold mesh: a facet is shared by more than two cells")
        facet_cells = np.full((len(facets), 2), -1, dtype=np.int64)
        order = np.argsort(cell_facets.ravel(), kind="stable")
        owner = order // 4
        sorted_f = cell_facets.ravel()[order]
        first = np.ones(len(sorted_f), dtype=bool)
        first[1:] = sorted_f[1:] != sorted_f[:-1]
        facet_cells[sorted_f[first], 0] = owner[first]
        facet_cells[sorted_f[~first], 1] = owner[~first]

        centroids = nodes[cells].mean(axis=1)
        if tags is not None:
            tags = _frozen(np.asarray(tags, dtype=np.int64))
        return cls(
            nodes=_frozen(nodes),
            cells=_frozen(cells),
            edges=_frozen(edges),
            facets=_frozen(facets),
            cell_edges=_frozen(cell_edges),
            cell_edge_signs=_frozen(cell_edge_signs),
            cell_facets=_frozen(cell_facets),
            cell_facet_signs=_frozen(cell_facet_signs),
            facet_cells=_frozen(facet_cells),
            volumes=_frozen(vol),
            centroids=_frozen(centroids),
            tags=tags,
        )

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def euler_characteristic(self) -> int:
        return self.n_nodes - self.n_edges + self.n_facets - self.n_cells

    @property
    def boundary_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_cells[:, 1] < 0)

    @property
    def h(self) -> float:
        """Mean edge length."""
        d = self.nodes[self.edges[:, 1]] - self.nodes[self.edges[:, 0]]
        return float(np.linalg.norm(d, axis=1).mean())

    def cell_neighbors(self) -> np.ndarray:
        """Pairs of cells sharing an interior facet."""
        fc = self.facet_cells
        return fc[fc[:, 1] >= 0]

    def submesh(self, keep: np.ndarray) -> "TetMesh":
        """Mesh made of the selected cells, nodes renumbered in original order."""
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.flatnonzero(keep)
        cells = self.cells[keep]
        used = np.unique(cells)
        renum = np.full(self.n_nodes, -1, dtype=np.int64)
        renum[used] = np.arange(len(used))
        tags = None if self.tags is None else self.tags[keep]
        return TetMesh.from_cells(self.nodes[used], renum[cells], tags)


def build_box_mesh(subdivisions=(1, 1, 1), halfwidths=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0), *, lower=None, upper=None) -> TetMesh:
    """Structured mesh of a box, each hexahedron split into six tetrahedra.

    All six tetrahedra of a hexahedron share its main diagonal (Kuhn /
    Freudenthal subdivision), so the splitting is conforming across
    neighbouring hexahedra. The box is ``center +- halfwidths`` unless
    explicit ``lower``/``upper`` corners are given.
    """
    sub = np.broadcast_to(np.asarray(subdivisions), (3,))
    if np.any(sub < 1) or not np.all(np.equal(np.mod(sub, 1), 0)):
        raise ValueError(f"subdivisions must be positive integers, got {tuple(subdivisions)}")
    sub = sub.astype(int)
    if lower is None or upper is None:
        hw = np.broadcast_to(np.asarray(halfwidths, dtype=float), (3,))
        if np.any(hw <= 0):
            raise ValueError(f"box half-widths must be positive, got {tuple(hw)}")
        c = np.asarray(center, dtype=float)
        lower, upper = c - hw, c + hw
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(upper <= lower):
        raise ValueError("upper corner must exceed lower corner")

    nx, ny, nz = sub
    axes = [np.linspace(lower[d], upper[d], sub[d] + 1) for d in range(3)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def index(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    I, J, K = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    cells = []
    for perm in itertools.permutations(range(3)):
        offs = np.zeros((4, 3), dtype=int)
        for s, axis in enumerate(perm):
            offs[s + 1] = offs[s]
            offs[s + 1, axis] += 1
        cells.append(np.stack([index(I + o[0], J + o[1], K + o[2]) for o in offs], axis=1))
    cells = np.stack(cells, axis=1).reshape(-1, 4)
    return TetMesh.from_cells(nodes, cells)


# --------------------------------------------------------------------------
# GMSH ASCII import


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    @property
    def lineno(self) -> int:
        return self.pos

    def next(self, what: str) -> str:
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line:
                return line
        raise MshParseError(f"unexpected end of file while reading {what}", self.pos)

    def ints(self, what: str) -> list:
        line = self.next(what)
        try:
            return [int(t) for t in line.split()]
        except ValueError:
            raise MshParseError(f"expected integers in {what}: {line!r}", self.pos) from None

    def floats(self, what: str) -> list:
        line = self.next(what)
        try:
            return [float(t) for t in line.split()]
        except ValueError:
            raise MshParseError(f"expected numbers in {what}: {line!r}", self.pos) from None

    def expect(self, token: str) -> None:
        line = self.next(token)
        if line != token:
            raise MshParseError(f"expected {token}, found {line!r}", self.pos)


def _skip_section(lines: _Lines, name: str) -> None:
    end = "$End" + name[1:]
    while lines.next(end) != end:
        pass


def read_msh(path) -> TetMesh:
    """Read tetrahedra from an ASCII GMSH file (format 2.2 or 4.1).

    The first physical tag of every tetrahedron is kept in ``TetMesh.tags``
    (-1 where none is assigned). Lower-dimensional elements are ignored.
    """
    text = Path(path).read_text()
    lines = _Lines(text)
    version = None
    node_ids, coords = [], []
    tets, tet_tags = [], []
    volume_phys = {}

    while True:
        try:
            header = lines.next("section header")
        except MshParseError:
            break
        if header == "$MeshFormat":
            fields = lines.next("$MeshFormat").split()
            if len(fields) < 3:
                raise MshParseError("malformed $MeshFormat line", lines.lineno)
            version = fields[0]
            if fields[1] != "0":
                raise MshParseError("binary MSH files are not supported", lines.lineno)
            if version not in ("2.2", "4.1"):
                raise MshParseError(f"unsupported MSH version {version}", lines.lineno)
            lines.expect("$EndMeshFormat")
        elif header == "$Entities" and version == "4.1":
            volume_phys = _read_entities_41(lines)
        elif header == "$Nodes":
            if version is None:
                raise MshParseError("$Nodes before $MeshFormat", lines.lineno)
            if version == "2.2":
                _read_nodes_22(lines, node_ids, coords)
            else:
                _read_nodes_41(lines, node_ids, coords)
            lines.expect("$EndNodes")
        elif header == "$Elements":
            if version is None:
                raise MshParseError("$Elements before $MeshFormat", lines.lineno)
            if version == "2.2":
                _read_elements_22(lines, tets, tet_tags)
            else:
                _read_elements_41(lines, tets, tet_tags, volume_phys)
            lines.expect("$EndElements")
        elif header.startswith("$"):
            _skip_section(lines, header)
        else:
            raise MshParseError(f"unexpected content {header!r}", lines.lineno)

    if version is None:
        raise MshParseError("missing $MeshFormat section", lines.lineno)
    if not tets:
        raise MshParseError("file contains no tetrahedral elements", lines.lineno)

    node_ids = np.asarray(node_ids, dtype=np.int64)
    lookup = {int(t): i for i, t in enumerate(node_ids)}
    cells = np.empty((len(tets), 4), dtype=np.int64)
    for c, (lineno, ids) in enumerate(tets):
        try:
            cells[c] = [lookup[t] for t in ids]
        except KeyError as err:
            raise MshParseError(f"element references unknown node {err.args[0]}", lineno) from None
    # drop nodes not used by any tetrahedron (surface-only geometry points)
    used = np.unique(cells)
    renum = np.full(len(node_ids), -1, dtype=np.int64)
    renum[used] = np.arange(len(used))
    nodes = np.asarray(coords, dtype=float)[used]
    return TetMesh.from_cells(nodes, renum[cells], np.asarray(tet_tags))


def _read_nodes_22(lines, node_ids, coords):
    (count,) = lines.ints("$Nodes count")[:1]
    for _ in range(count):
        row = lines.floats("$Nodes")
        if len(row) < 4:
            raise MshParseError("node line needs an id and three coordinates", lines.lineno)
        node_ids.append(int(row[0]))
        coords.append(row[1:4])


def _read_nodes_41(lines, node_ids, coords):
    head = lines.ints("$Nodes header")
    if len(head) != 4:
        raise MshParseError("malformed $Nodes header", lines.lineno)
    for _ in range(head[0]):
        block = lines.ints("node block header")
        if len(block) != 4:
            raise MshParseError("malformed node block header", lines.lineno)
        _, _, parametric, n = block
        ids = [lines.ints("node tags")[0] for _ in range(n)]
        for _ in range(n):
            row = lines.floats("node coordinates")
            if len(row) < 3:
                raise MshParseError("node line needs three coordinates", lines.lineno)
            coords.append(row[:3])
        node_ids.extend(ids)


def _read_elements_22(lines, tets, tet_tags):
    (count,) = lines.ints("$Elements count")[:1]
    for _ in range(count):
        row = lines.ints("$Elements")
        if len(row) < 3:
            raise MshParseError("malformed element line", lines.lineno)
        etype, ntags = row[1], row[2]
        if etype != 4:
            continue
        ids = row[3 + ntags:]
        if len(ids) != 4:
            raise MshParseError("tetrahedron needs four nodes", lines.lineno)
        tets.append((lines.lineno, ids))
        tet_tags.append(row[3] if ntags > 0 else -1)


def _read_entities_41(lines) -> dict:
    counts = lines.ints("$Entities header")
    if len(counts) != 4:
        raise MshParseError("malformed $Entities header", lines.lineno)
    npts, ncurves, nsurfs, nvols = counts
    for _ in range(npts + ncurves + nsurfs):
        lines.next("entity")
    phys = {}
    for _ in range(nvols):
        row = lines.floats("volume entity")
        tag, nphys = int(row[0]), int(row[7])
        phys[tag] = int(row[8]) if nphys > 0 else -1
    lines.expect("$EndEntities")
    return phys


def _read_elements_41(lines, tets, tet_tags, volume_phys):
    head = lines.ints("$Elements header")
    if len(head) != 4:
        raise MshParseError("malformed $Elements header", lines.lineno)
    for _ in range(head[0]):
        block = lines.ints("element block header")
        if len(block) != 4:
            raise MshParseError("malformed element block header", lines.lineno)
        dim, entity, etype, n = block
        for _ in range(n):
            row = lines.ints("element")
            if etype != 4:
                continue
            if len(row) != 5:
                raise MshParseError("tetrahedron needs four nodes", lines.lineno)
            tets.append((lines.lineno, row[1:]))
            tet_tags.append(volume_phys.get(entity, -1))
