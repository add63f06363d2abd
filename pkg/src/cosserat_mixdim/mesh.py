"""Conforming simplicial meshes with chart-backed regions.

A mesh is one vertex set shared by every region. Each region is a set of
simplices of one dimension (tets, triangles or segments) bound to a named
chart; every cell stores the chart parameters of its own vertices, so a
vertex lying on several charts (a shell-beam junction, a strip
intersection) is described exactly on each of them.

Boundary tags are named sets of facets (triangles or segments) used for
Dirichlet data and line loads.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Chart, affine_chart, chart_from_spec, circle_arc_chart, extruded_arc_chart

FORMAT_NAME = "cosserat-mesh"
FORMAT_VERSION = 1
CHART_TOL = 1e-10


class MeshFormatError(ValueError):
    pass


@dataclass
class Region:
    """Cells of one dimension on one chart.

    Attributes:
        name: unique region name.
        dim: topological dimension (3 tets, 2 triangles, 1 segments).
        chart: key into :attr:`Mesh.charts`.
        cells: ``(n, dim + 1)`` vertex ids.
        params: ``(n, dim + 1, chart_dim)`` chart parameters per cell vertex.
        n_ref: seed for the beam cross-section normal (segments only).
    """

    name: str
    dim: int
    chart: str
    cells: np.ndarray
    params: np.ndarray
    n_ref: np.ndarray | None = None

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, self.dim + 1)
        self.params = np.asarray(self.params, dtype=float)
        if self.params.ndim == 2:
            self.params = self.params[..., None]
        if self.n_ref is not None:
            self.n_ref = np.asarray(self.n_ref, dtype=float)

    def __len__(self):
        return len(self.cells)


@dataclass
class Mesh:
    vertices: np.ndarray
    charts: dict[str, dict]
    regions: list[Region]
    tags: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.tags = {k: np.asarray(v, dtype=np.int64) for k, v in self.tags.items()}
        names = [r.name for r in self.regions]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate region names in {names}")
        self._chart_cache: dict[str, Chart] = {}

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def chart(self, name: str) -> Chart:
        if name not in self._chart_cache:
            self._chart_cache[name] = chart_from_spec(self.charts[name])
        return self._chart_cache[name]

    def region(self, name: str) -> Region:
        for r in self.regions:
            if r.name == name:
                return r
        raise KeyError(f"unknown region {name!r}; known: {[r.name for r in self.regions]}")

    def regions_of_dim(self, dim: int) -> list[Region]:
        return [r for r in self.regions if r.dim == dim]

    @property
    def scale(self) -> float:
        ext = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(max(ext.max(), 1e-300))


# ---------------------------------------------------------------------------
# structured lattices


def _kuhn_tets(nx: int, ny: int, nz: int) -> tuple[np.ndarray, np.ndarray]:
    """Lattice vertices (integer coords) and positively oriented Kuhn tets."""
    ii, jj, kk = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), np.arange(nz + 1), indexing="ij")
    lattice = np.stack([ii.ravel(order="F"), jj.ravel(order="F"), kk.ravel(order="F")], axis=1)

    def vid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    hi, hj, hk = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    hi, hj, hk = hi.ravel(order="F"), hj.ravel(order="F"), hk.ravel(order="F")
    tets = []
    for perm in itertools.permutations(range(3)):
        offs = [np.zeros(3, dtype=int)]
        for ax in perm:
            step = offs[-1].copy()
            step[ax] += 1
            offs.append(step)
        ids = [vid(hi + o[0], hj + o[1], hk + o[2]) for o in offs]
        # orientation of this path simplex is the sign of the permutation
        if np.linalg.det(np.array(offs[1:]) - 0) < 0:
            ids[2], ids[3] = ids[3], ids[2]
        tets.append(np.stack(ids, axis=1))
    tets = np.stack(tets, axis=1).reshape(-1, 4)
    return lattice, tets


def _quad_triangles(ids: np.ndarray) -> np.ndarray:
    """Split a structured ``(m+1, n+1)`` id grid into triangles with the Kuhn diagonal."""
    a = ids[:-1, :-1].ravel()
    b = ids[1:, :-1].ravel()
    c = ids[1:, 1:].ravel()
    d = ids[:-1, 1:].ravel()
    return np.stack([np.stack([a, b, c], 1), np.stack([a, c, d], 1)], axis=1).reshape(-1, 3)


def _lattice_index(value: float, length: float, n: int, what: str) -> int:
    k = value / length * n
    kr = int(round(k))
    if abs(k - kr) > 1e-9 * max(1, n) or not 0 <= kr <= n:
        raise ValueError(f"{what} = {value} is not a lattice plane of {n} divisions over [0, {length}]")
    return kr


def _boundary_faces_of_box(lattice, nx, ny, nz):
    shape = (nx + 1, ny + 1, nz + 1)
    grid = np.arange(np.prod(shape)).reshape(shape, order="F")
    faces = {}
    for ax, name in enumerate("xyz"):
        for side, idx in (("0", 0), ("1", shape[ax] - 1)):
            sl = [slice(None)] * 3
            sl[ax] = idx
            faces[name + side] = _quad_triangles(grid[tuple(sl)])
    return grid, faces


def generate_box(
    lengths,
    divisions,
    embedded_planes=(),
    embedded_lines=(),
    beam_n_ref=None,
) -> Mesh:
    """Structured 6-tet box mesh with optional embedded shell planes and beam lines.

    Args:
        lengths: ``(Lx, Ly, Lz)`` in mm, box ``[0, Lx] x [0, Ly] x [0, Lz]``.
        divisions: ``(nx, ny, nz)``.
        embedded_planes: z-levels, each a float or a ``(name, z)`` pair.
            Each becomes a triangle region on an affine chart with params (x, y).
        embedded_lines: dicts ``{"axis": a, "at": (c1, c2), "name": ...}``;
            ``at`` holds the two fixed coordinates in increasing axis order.
        beam_n_ref: cross-section normal seed for the line regions; defaults
            to the next coordinate axis after the line direction.

    Raises:
        ValueError: if an embedded entity does not lie on lattice planes.
    """
    L = np.asarray(lengths, dtype=float)
    n = np.asarray(divisions, dtype=int)
    if L.shape != (3,) or n.shape != (3,) or np.any(n < 1) or np.any(L <= 0):
        raise ValueError(f"bad box lengths/divisions {lengths}, {divisions}")
    lattice, tets = _kuhn_tets(*n)
    h = L / n
    verts = lattice * h
    grid, bfaces = _boundary_faces_of_box(lattice, *n)
    charts = {"box": {"kind": "identity"}}
    regions = [Region("volume", 3, "box", tets, verts[tets])]
    for i, plane in enumerate(embedded_planes):
        name, z = (plane if isinstance(plane, (tuple, list)) else (f"plane{i}", plane))
        k = _lattice_index(float(z), L[2], n[2], "plane z")
        tris = _quad_triangles(grid[:, :, k])
        cname = f"{name}_chart"
        charts[cname] = affine_chart([0.0, 0.0, k * h[2]], [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).spec
        regions.append(Region(name, 2, cname, tris, verts[tris][..., :2]))
    for i, line in enumerate(embedded_lines):
        ax = int(line["axis"])
        others = [a for a in range(3) if a != ax]
        name = line.get("name", f"line{i}")
        idx = [_lattice_index(float(c), L[a], n[a], f"line coordinate {'xyz'[a]}") for a, c in zip(others, line["at"])]
        sl: list = [None, None, None]
        sl[ax] = slice(None)
        sl[others[0]], sl[others[1]] = idx
        ids = grid[tuple(sl)]
        segs = np.stack([ids[:-1], ids[1:]], axis=1)
        origin = np.zeros(3)
        origin[others[0]], origin[others[1]] = idx[0] * h[others[0]], idx[1] * h[others[1]]
        basis = np.zeros((3, 1))
        basis[ax, 0] = 1.0
        cname = f"{name}_chart"
        charts[cname] = affine_chart(origin, basis).spec
        nref = beam_n_ref if beam_n_ref is not None else np.eye(3)[(ax + 1) % 3]
        if "n_ref" in line:
            nref = line["n_ref"]
        regions.append(Region(name, 1, cname, segs, verts[segs][..., ax : ax + 1], np.asarray(nref, float)))
    return Mesh(verts, charts, regions, bfaces)


def generate_curved_slab(divisions=(16, 5, 2), with_shell: bool = True) -> Mesh:
    """Tet mesh of the curved slab with its bottom surface as a shell region.

    Tags ``xi0``/``xi1`` (Dirichlet ends), ``eta0``/``eta1``, ``zeta0``/``zeta1``.
    """
    n = np.asarray(divisions, dtype=int)
    if n.shape != (3,) or np.any(n < 1):
        raise ValueError(f"bad divisions {divisions}")
    lattice, tets = _kuhn_tets(*n)
    params = lattice / n
    charts = {"slab": {"kind": "curved_slab"}, "slab_bottom": {"kind": "slab_midsurface"}}
    vol = chart_from_spec(charts["slab"])
    verts = vol.map(params)
    grid, bfaces = _boundary_faces_of_box(lattice, *n)
    tags = {k.replace("x", "xi").replace("y", "eta").replace("z", "zeta"): v for k, v in bfaces.items()}
    regions = [Region("slab", 3, "slab", tets, params[tets])]
    if with_shell:
        tris = _quad_triangles(grid[:, :, 0])
        regions.append(Region("shell", 2, "slab_bottom", tris, params[tris][..., :2]))
    return Mesh(verts, charts, regions, tags)


class _VertexPool:
    """Merge vertices by physical position."""

    def __init__(self, tol: float):
        self.tol = tol
        self.points: list[np.ndarray] = []
        self.keys: dict[tuple, int] = {}

    def add(self, pts: np.ndarray) -> np.ndarray:
        ids = np.empty(len(pts), dtype=np.int64)
        for i, p in enumerate(pts):
            key = tuple(np.round(p / self.tol).astype(np.int64))
            if key not in self.keys:
                self.keys[key] = len(self.points)
                self.points.append(p)
            ids[i] = self.keys[key]
        return ids


def generate_extruded_s(divisions=(10, 10, 10), length: float = 500.0, radius: float = 50.0, reinforce: bool = True) -> Mesh:
    """Surface mesh of two extruded half circles crossed by a flat strip.

    Args:
        divisions: ``(nx, n_arc, n_strip)``; ``nx`` must be a multiple of 10
            so the curved beam stations ``x = 0, 50, ..., 500`` are lattice
            lines, and ``n_strip`` must be even so ``y = 0`` is one.
        reinforce: also create the beam regions of the frame.

    Regions: ``s1`` (lower arc, centre z = -R), ``s2`` (upper arc, centre
    z = +R), ``s3`` (strip ``y in [-2R, 2R]``, z = 0). Beam regions:
    ``arc1_x<k>``, ``arc2_x<k>``, ``long_y<c>``, ``trans_x<c>``.
    Tags: ``x0``, ``x1`` (end curves), ``top`` (z = +2R), ``bottom`` (z = -2R).
    """
    nx, na, ns = (int(d) for d in divisions)
    if nx < 1 or na < 1 or ns < 2 or ns % 2 or (reinforce and nx % 10):
        raise ValueError(f"bad divisions {divisions}: need nx % 10 == 0 and even n_strip")
    R, Lx = float(radius), float(length)
    pool = _VertexPool(1e-9 * Lx)
    charts: dict[str, dict] = {}
    regions: list[Region] = []
    xs = np.linspace(0.0, Lx, nx + 1)

    def surface(name, chart, u_vals, v_vals):
        U, V = np.meshgrid(u_vals, v_vals, indexing="ij")
        prm = np.stack([U, V], axis=-1)
        ids = pool.add(chart.map(prm.reshape(-1, 2))).reshape(U.shape)
        tris = _quad_triangles(ids)
        ptri = _quad_triangles(np.arange(U.size).reshape(U.shape))
        charts[name + "_chart"] = chart.spec
        regions.append(Region(name, 2, name + "_chart", tris, prm.reshape(-1, 2)[ptri]))
        return ids

    arcs = {
        "s1": (extruded_arc_chart(R, 0.0, -R), np.linspace(np.pi / 2, 3 * np.pi / 2, na + 1), -R),
        "s2": (extruded_arc_chart(R, 0.0, R), np.linspace(-np.pi / 2, np.pi / 2, na + 1), R),
    }
    grids = {}
    for name, (chart, phis, _) in arcs.items():
        grids[name] = surface(name, chart, xs, phis)
    strip = affine_chart([0.0, 0.0, 0.0], [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    ys = np.linspace(-2 * R, 2 * R, ns + 1)
    grids["s3"] = surface("s3", strip, xs, ys)

    def segs_of(ids):
        return np.stack([ids[:-1], ids[1:]], axis=1)

    # boundary tags: end curves and the load edges
    tags = {
        "x0": np.concatenate([segs_of(grids[s][0]) for s in ("s1", "s2", "s3")]),
        "x1": np.concatenate([segs_of(grids[s][-1]) for s in ("s1", "s2", "s3")]),
        "bottom": segs_of(grids["s1"][:, -1]),
        "top": segs_of(grids["s2"][:, -1]),
    }
    if reinforce:
        e1 = np.array([1.0, 0.0, 0.0])
        e3 = np.array([0.0, 0.0, 1.0])
        step = nx // 10
        for arc_i, name in ((1, "s1"), (2, "s2")):
            _, phis, cz = arcs[name]
            for k in range(11):
                ix = k * step
                x = xs[ix]
                cname = f"arc{arc_i}_x{int(round(x))}"
                charts[cname + "_chart"] = circle_arc_chart(R, [x, 0.0, cz], 0).spec
                regions.append(Region(cname, 1, cname + "_chart", segs_of(grids[name][ix]), segs_of(phis)[..., None], e1))
        for j, y in ((0, -2 * R), (ns // 2, 0.0), (ns, 2 * R)):
            cname = f"long_y{int(round(y))}"
            charts[cname + "_chart"] = affine_chart([0.0, y, 0.0], [[1.0], [0.0], [0.0]]).spec
            regions.append(Region(cname, 1, cname + "_chart", segs_of(grids["s3"][:, j]), segs_of(xs)[..., None], e3))
        for ix in (0, nx):
            x = xs[ix]
            cname = f"trans_x{int(round(x))}"
            charts[cname + "_chart"] = affine_chart([x, 0.0, 0.0], [[0.0], [1.0], [0.0]]).spec
            regions.append(Region(cname, 1, cname + "_chart", segs_of(grids["s3"][ix]), segs_of(ys)[..., None], e3))
    return Mesh(np.array(pool.points), charts, regions, tags)


# ---------------------------------------------------------------------------
# validation


def _face_set(cells: np.ndarray, k: int) -> set[frozenset]:
    out = set()
    for sub in itertools.combinations(range(cells.shape[1]), k):
        out.update(frozenset(row) for row in cells[:, sub].tolist())
    return out


def validate_conformity(mesh: Mesh) -> list[str]:
    """Return a list of conformity violations (empty when the mesh is sound)."""
    problems: list[str] = []
    vols = mesh.regions_of_dim(3)
    shells = mesh.regions_of_dim(2)
    tet_cells = np.concatenate([r.cells for r in vols]) if vols else np.zeros((0, 4), int)
    tri_cells = np.concatenate([r.cells for r in shells]) if shells else np.zeros((0, 3), int)
    tet_faces = _face_set(tet_cells, 3)
    tet_edges = _face_set(tet_cells, 2)
    tri_edges = _face_set(tri_cells, 2)
    nv = mesh.n_vertices
    for r in mesh.regions:
        if r.chart not in mesh.charts:
            problems.append(f"region {r.name}: unknown chart {r.chart!r}")
            continue
        if r.cells.size and (r.cells.min() < 0 or r.cells.max() >= nv):
            problems.append(f"region {r.name}: vertex id out of range")
            continue
        if r.dim == 2 and vols:
            for i, row in enumerate(r.cells.tolist()):
                if frozenset(row) not in tet_faces:
                    problems.append(f"region {r.name}: triangle {i} {row} is not a tet face")
        if r.dim == 1:
            for i, row in enumerate(r.cells.tolist()):
                key = frozenset(row)
                if key not in tet_edges and key not in tri_edges:
                    problems.append(f"region {r.name}: segment {i} {row} is not an edge of a tet or triangle")
        # vertex positions must lie on the region chart
        chart = mesh.chart(r.chart)
        mapped = chart.map(r.params.reshape(-1, chart.dim)).reshape(r.cells.shape + (3,))
        err = np.linalg.norm(mapped - mesh.vertices[r.cells], axis=-1)
        bad = np.argwhere(err > CHART_TOL * max(1.0, chart.scale))
        for c, v in bad[:5]:
            problems.append(f"region {r.name}: cell {c} vertex {r.cells[c, v]} off its chart by {err[c, v]:.3e}")
        # orientation: positive volume in physical space, positive area in parameter space
        if r.dim == 3:
            x = mesh.vertices[r.cells]
            vol = np.einsum("ij,ij->i", np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), x[:, 3] - x[:, 0])
            for i in np.flatnonzero(vol <= 0)[:5]:
                problems.append(f"region {r.name}: tet {i} is not positively oriented")
        if r.dim == 2:
            p = r.params
            area = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
            if np.any(area > 0) and np.any(area < 0):
                problems.append(f"region {r.name}: inconsistent triangle orientation")
            if np.any(area == 0):
                problems.append(f"region {r.name}: degenerate triangle in parameter space")
    all_faces = tet_faces | _face_set(tri_cells, 3)
    all_edges = tet_edges | tri_edges
    for name, facets in mesh.tags.items():
        pool = all_faces if facets.shape[1] == 3 else all_edges
        for i, row in enumerate(facets.tolist()):
            if facets.shape[1] in (2, 3) and frozenset(row) not in pool:
                problems.append(f"tag {name}: facet {i} {row} is not a mesh entity")
    if nv > 1:
        pairs = cKDTree(mesh.vertices).query_pairs(1e-9 * mesh.scale)
        for a, b in sorted(pairs)[:5]:
            problems.append(f"duplicate vertices {a} and {b}")
    return problems


# ---------------------------------------------------------------------------
# JSON I/O


def write_mesh(mesh: Mesh, path) -> None:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "vertices": [[i, *map(float, x)] for i, x in enumerate(mesh.vertices)],
        "charts": mesh.charts,
        "regions": [
            {
                "name": r.name,
                "dim": r.dim,
                "chart": r.chart,
                "cells": r.cells.tolist(),
                "params": r.params.tolist(),
                **({"n_ref": r.n_ref.tolist()} if r.n_ref is not None else {}),
            }
            for r in mesh.regions
        ],
        "tags": {k: v.tolist() for k, v in mesh.tags.items()},
    }
    Path(path).write_text(json.dumps(doc))


def _require(cond, where, msg):
    if not cond:
        raise MeshFormatError(f"{where}: {msg}")


def read_mesh(path) -> Mesh:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    _require(isinstance(doc, dict) and doc.get("format") == FORMAT_NAME, "format", f"expected {FORMAT_NAME!r}")
    for key in ("vertices", "charts", "regions"):
        _require(key in doc, key, "missing section")
    ids: dict[int, int] = {}
    coords = []
    for i, row in enumerate(doc["vertices"]):
        _require(isinstance(row, list) and len(row) == 4, f"vertices[{i}]", "expected [id, x, y, z]")
        vid = int(row[0])
        _require(vid not in ids, f"vertices[{i}]", f"duplicate vertex id {vid}")
        ids[vid] = len(coords)
        coords.append([float(c) for c in row[1:]])
    _require(sorted(ids) == list(range(len(ids))), "vertices", "ids must be 0..n-1")
    coords = np.array(coords, dtype=float).reshape(-1, 3)
    order = np.argsort([int(r[0]) for r in doc["vertices"]])
    coords = coords[order]
    charts = doc["charts"]
    for name, spec in charts.items():
        try:
            chart_from_spec(spec)
        except (ValueError, KeyError, TypeError) as exc:
            raise MeshFormatError(f"charts.{name}: {exc}") from exc
    regions = []
    for i, rd in enumerate(doc["regions"]):
        where = f"regions[{i}]"
        for key in ("name", "dim", "chart", "cells", "params"):
            _require(key in rd, where, f"missing field {key!r}")
        _require(rd["chart"] in charts, f"{where}.chart", f"unknown chart id {rd['chart']!r}")
        dim = int(rd["dim"])
        _require(dim in (1, 2, 3), f"{where}.dim", f"bad dimension {dim}")
        cells = np.asarray(rd["cells"], dtype=np.int64).reshape(-1, dim + 1)
        _require(cells.size == 0 or (cells.min() >= 0 and cells.max() < len(coords)), f"{where}.cells", "vertex id out of range")
        regions.append(Region(rd["name"], dim, rd["chart"], cells, np.asarray(rd["params"], float).reshape(len(cells), dim + 1, -1), rd.get("n_ref")))
    tags = {k: np.asarray(v, dtype=np.int64) for k, v in doc.get("tags", {}).items()}
    return Mesh(coords, charts, regions, tags)
