"""VTU and CSV writers.

High-order cells are written as their linear sub-simplices on the node
lattice, so every Lagrange node becomes a VTU point.
"""

from __future__ import annotations

import csv
import itertools
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..fespace import lattice

VTK_TYPES = {1: 3, 2: 5, 3: 10}  # line, triangle, tetra


@lru_cache(maxsize=None)
def linear_subcells(dim: int, order: int) -> np.ndarray:
    """Local node indices ``(order**dim, dim + 1)`` of the linear split of the order-``order`` lattice."""
    A = lattice(dim, order)
    index = {tuple(a[1:]): i for i, a in enumerate(A.tolist())}
    if dim == 1:
        cells = [((k,), (k + 1,)) for k in range(order)]
    elif dim == 2:
        cells = []
        for i in range(order):
            for j in range(order - i):
                cells.append(((i, j), (i + 1, j), (i, j + 1)))
                if i + j <= order - 2:
                    cells.append(((i + 1, j), (i + 1, j + 1), (i, j + 1)))
    elif dim == 3:
        # Kuhn split of the cube grid in (a, b, c) = (x + y + z, y + z, z);
        # the simplex is the Kuhn cell a >= b >= c
        cells = []
        for v0 in itertools.product(range(order), repeat=3):
            for perm in itertools.permutations(range(3)):
                verts = [np.array(v0)]
                for ax in perm:
                    verts.append(verts[-1] + np.eye(3, dtype=int)[ax])
                if all(v[0] >= v[1] >= v[2] and v[0] <= order for v in verts):
                    cells.append(tuple((v[0] - v[1], v[1] - v[2], v[2]) for v in verts))
    else:
        raise ValueError(f"dimension must be 1, 2 or 3, got {dim}")
    out = np.array([[index[tuple(int(c) for c in v)] for v in cell] for cell in cells], dtype=np.int64)
    assert len(out) == order**dim
    return out


def _ascii(a: np.ndarray, fmt: str) -> str:
    a = np.asarray(a).reshape(len(a), -1) if np.ndim(a) else np.asarray([a])
    return "\n".join(" ".join(fmt % v for v in row) for row in a)


def write_vtu(solution, path) -> None:
    """Write the nodal displacement and rotation of ``solution`` as an ASCII VTU file.

    Cell data: ``region`` (index into ``mesh.regions``) and ``dim``.
    """
    s = solution.system
    mesh, dm = s.mesh, s.dofmap
    X = dm.node_coords
    cells, types, region_id, dims = [], [], [], []
    for k, r in enumerate(mesh.regions):
        sub = linear_subcells(r.dim, dm.order)
        conn = dm.cell_nodes[r.name][:, sub].reshape(-1, r.dim + 1)
        if r.dim == 3:
            P = X[conn]
            neg = np.linalg.det(P[:, 1:] - P[:, :1]) < 0
            conn[neg] = conn[neg][:, [1, 0, 2, 3]]
        cells.append(conn)
        types.append(np.full(len(conn), VTK_TYPES[r.dim]))
        region_id.append(np.full(len(conn), k))
        dims.append(np.full(len(conn), r.dim))
    conn = [c.ravel() for c in cells]
    sizes = np.concatenate([np.full(len(c), c.shape[1]) for c in cells]) if cells else np.zeros(0, int)
    offsets = np.cumsum(sizes)
    n_cells = len(sizes)
    names = ", ".join(f"{k}={r.name}" for k, r in enumerate(mesh.regions))
    cat = np.concatenate

    def array(name, typ, data, ncomp=1, fmt="%d"):
        comp = f' NumberOfComponents="{ncomp}"' if ncomp > 1 else ""
        return f'<DataArray type="{typ}" Name="{name}"{comp} format="ascii">\n{_ascii(data, fmt)}\n</DataArray>'

    parts = [
        '<?xml version="1.0"?>',
        '<VTKFile type="UnstructuredGrid" version="1.0" byte_order="LittleEndian" header_type="UInt64">',
        f"<!-- regions: {names} -->",
        "<UnstructuredGrid>",
        f'<Piece NumberOfPoints="{len(X)}" NumberOfCells="{n_cells}">',
        "<PointData>",
        array("displacement", "Float64", solution.u, 3, "%.17g"),
        array("rotation", "Float64", solution.theta, 3, "%.17g"),
        "</PointData>",
        "<CellData>",
        array("region", "Int32", cat(region_id) if cells else []),
        array("dim", "Int32", cat(dims) if cells else []),
        "</CellData>",
        "<Points>",
        array("Points", "Float64", X, 3, "%.17g"),
        "</Points>",
        "<Cells>",
        array("connectivity", "Int64", cat(conn) if cells else []),
        array("offsets", "Int64", offsets),
        array("types", "UInt8", cat(types) if cells else []),
        "</Cells>",
        "</Piece>",
        "</UnstructuredGrid>",
        "</VTKFile>",
    ]
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def write_csv(rows: list[dict], path) -> None:
    """Comma-separated table; the header is the union of the row keys in first-seen order."""
    header: list[str] = []
    for row in rows:
        header += [k for k in row if k not in header]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(row[k])) if k in row else "" for k in header])


def read_csv(path) -> list[dict[str, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: float(v) for k, v in row.items() if v != ""} for row in csv.DictReader(fh)]
