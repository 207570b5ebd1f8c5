"""Legacy ASCII VTK export of cellwise fields."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..mesh import TetMesh

VTK_TETRA = 10


def write_vtk(mesh: TetMesh, fields: dict, path) -> Path:
    """Write an UNSTRUCTURED_GRID with one CELL_DATA array per entry of ``fields``.

    Arrays of shape (cells,) become SCALARS, arrays of shape (cells, 3) VECTORS.
    """
    path = Path(path)
    nc = mesh.n_cells
    lines = [
        "# vtk DataFile Version 3.0",
        "cellwise fields",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.nodes]
    lines.append(f"CELLS {nc} {5 * nc}")
    lines += [f"4 {a} {b} {c} {d}" for a, b, c, d in mesh.cells]
    lines.append(f"CELL_TYPES {nc}")
    lines += [str(VTK_TETRA)] * nc
    lines.append(f"CELL_DATA {nc}")
    for name, data in fields.items():
        data = np.asarray(data)
        if data.shape == (nc,):
            kind = "int" if np.issubdtype(data.dtype, np.integer) else "double"
            lines += [f"SCALARS {name} {kind} 1", "LOOKUP_TABLE default"]
            lines += [f"{v:.17g}" if kind == "double" else str(int(v)) for v in data]
        elif data.shape == (nc, 3):
            lines.append(f"VECTORS {name} double")
            lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in data]
        else:
            raise ValueError(f"field {name!r} has shape {data.shape}, expected ({nc},) or ({nc}, 3)")
    path.write_text("\n".join(lines) + "\n")
    return path


def result_fields(p: np.ndarray, q: np.ndarray, labels: np.ndarray) -> dict:
    return {
        "p_mag": np.linalg.norm(p, axis=1),
        "q_mag": np.linalg.norm(q, axis=1),
        "region": np.asarray(labels, dtype=np.int64),
        "p": p,
        "q": q,
    }


def read_vtk_counts(path) -> dict:
    """Structural check of a file written by ``write_vtk``; raises ValueError on inconsistencies."""
    tokens = Path(path).read_text().split("\n")
    if not tokens[0].startswith("# vtk DataFile Version"):
        raise ValueError("missing VTK header")
    out = {"arrays": {}}
    i = 4
    while i < len(tokens):
        head = tokens[i].split()
        i += 1
        if not head:
            continue
        if head[0] == "POINTS":
            out["points"] = n = int(head[1])
            i += n
        elif head[0] == "CELLS":
            out["cells"] = n = int(head[1])
            sizes = [len(tokens[i + k].split()) for k in range(n)]
            if sum(sizes) != int(head[2]):
                raise ValueError("CELLS size does not match its entries")
            i += n
        elif head[0] == "CELL_TYPES":
            n = int(head[1])
            out["cell_types"] = [int(t) for t in tokens[i:i + n]]
            i += n
        elif head[0] == "CELL_DATA":
            out["cell_data"] = int(head[1])
        elif head[0] == "SCALARS":
            i += 1  # lookup table
            vals = np.array([float(t) for t in tokens[i:i + out["cell_data"]]])
            out["arrays"][head[1]] = vals
            i += out["cell_data"]
        elif head[0] == "VECTORS":
            vals = np.array([[float(t) for t in tokens[i + k].split()] for k in range(out["cell_data"])])
            out["arrays"][head[1]] = vals
            i += out["cell_data"]
        else:
            raise ValueError(f"unexpected line {tokens[i - 1]!r}")
    for name, vals in out["arrays"].items():
        if len(vals) != out.get("cell_data"):
            raise ValueError(f"array {name} has {len(vals)} values, expected {out.get('cell_data')}")
    return out
