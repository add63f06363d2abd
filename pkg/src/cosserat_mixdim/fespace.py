"""Continuous Lagrange spaces on simplices with trace-shared nodes.

Nodes are identified by their barycentric support: the node with lattice
index ``alpha`` in a cell is keyed by ``{(vertex, alpha_v) : alpha_v > 0}``.
A node on a face or edge therefore receives the same global id from every
tet, triangle and segment that contains it, which makes the trace of a
volume field onto a shell or beam region the identity on shared DOFs.

Each node carries six DOFs ``(u0, u1, u2, theta0, theta1, theta2)`` with
global index ``6 * node + component``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import ceil

import numpy as np
from scipy.special import roots_jacobi

from .geometry import curve_frame, surface_frame
from .mesh import Mesh, Region

N_COMP = 6
MAX_ORDER = 3


# ---------------------------------------------------------------------------
# reference basis


@lru_cache(maxsize=None)
def lattice(dim: int, order: int) -> np.ndarray:
    """Barycentric multi-indices ``(nb, dim + 1)``; vertices first, then by entity."""
    idx = [a for a in itertools.product(range(order + 1), repeat=dim + 1) if sum(a) == order]
    # sort so the vertex nodes come first, then edge, face and interior nodes
    idx.sort(key=lambda a: (sum(1 for v in a if v > 0), [-v for v in a]))
    return np.array(idx, dtype=np.int64).reshape(-1, dim + 1)


def _lagrange_1d(t: np.ndarray, a: int, p: int):
    """``f_a(t) = prod_{k<a} (p t - k) / (k + 1)`` and its derivative."""
    val = np.ones_like(t)
    der = np.zeros_like(t)
    for k in range(a):
        fac = (p * t - k) / (k + 1)
        der = der * fac + val * p / (k + 1)
        val = val * fac
    return val, der


@dataclass(frozen=True)
class ReferenceBasis:
    """Equispaced Lagrange basis of order ``order`` on the reference simplex.

    The reference simplex has vertices ``0, e_1, ..., e_dim``; barycentric
    coordinates are ``lambda_0 = 1 - sum(xi)``, ``lambda_i = xi_i``.
    """

    dim: int
    order: int

    def __post_init__(self):
        if not 1 <= self.order <= MAX_ORDER:
            raise ValueError(f"unsupported order {self.order}; use 1..{MAX_ORDER}")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"unsupported dimension {self.dim}")

    @property
    def alphas(self) -> np.ndarray:
        return lattice(self.dim, self.order)

    @property
    def n(self) -> int:
        return len(self.alphas)

    @property
    def nodes(self) -> np.ndarray:
        """Reference coordinates of the nodes ``(nb, dim)``."""
        return self.alphas[:, 1:] / self.order

    def eval(self, xi) -> tuple[np.ndarray, np.ndarray]:
        """Values ``(nq, nb)`` and reference gradients ``(nq, nb, dim)``."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        lam = np.concatenate([1.0 - xi.sum(axis=1, keepdims=True), xi], axis=1)
        p = self.order
        A = self.alphas
        nq, nb, d = len(xi), len(A), self.dim
        f = np.empty((nq, nb, d + 1))
        df = np.empty((nq, nb, d + 1))
        for j in range(d + 1):
            for b, a in enumerate(A[:, j]):
                f[:, b, j], df[:, b, j] = _lagrange_1d(lam[:, j], int(a), p)
        phi = f.prod(axis=2)
        dlam = np.empty((nq, nb, d + 1))
        for j in range(d + 1):
            others = np.delete(f, j, axis=2).prod(axis=2)
            dlam[:, :, j] = df[:, :, j] * others
        dphi = dlam[:, :, 1:] - dlam[:, :, :1]
        return phi, dphi


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int


def _gauss_01(n: int, alpha: float = 0.0):
    x, w = roots_jacobi(n, alpha, 0.0)
    return x, w


@lru_cache(maxsize=None)
def quadrature(dim: int, degree: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi rule exact for polynomials of total degree ``degree``.

    Weights sum to the reference measure (1, 1/2, 1/6).
    """
    n = max(1, ceil((degree + 1) / 2))
    a, wa = _gauss_01(n)
    if dim == 1:
        pts = ((a + 1) / 2)[:, None]
        w = wa / 2
    elif dim == 2:
        b, wb = _gauss_01(n, 1.0)
        A, B = np.meshgrid(a, b, indexing="ij")
        WA, WB = np.meshgrid(wa, wb, indexing="ij")
        pts = np.stack([(1 + A) * (1 - B) / 4, (1 + B) / 2], axis=-1).reshape(-1, 2)
        w = (WA * WB / 8).ravel()
    elif dim == 3:
        b, wb = _gauss_01(n, 1.0)
        c, wc = _gauss_01(n, 2.0)
        A, B, C = np.meshgrid(a, b, c, indexing="ij")
        WA, WB, WC = np.meshgrid(wa, wb, wc, indexing="ij")
        pts = np.stack(
            [(1 + A) * (1 - B) * (1 - C) / 8, (1 + B) * (1 - C) / 4, (1 + C) / 2], axis=-1
        ).reshape(-1, 3)
        w = (WA * WB * WC / 64).ravel()
    else:
        raise ValueError(f"unsupported dimension {dim}")
    return QuadratureRule(pts, w, degree)


# ---------------------------------------------------------------------------
# DOF map


@dataclass
class DofMap:
    """Global node numbering shared by all regions of a mesh.

    Attributes:
        order: polynomial order.
        n_nodes: number of scalar nodes; the vector system has ``6 * n_nodes`` DOFs.
        cell_nodes: region name -> ``(n_cells, nb)`` global node ids.
        node_support: ``(n_nodes, 4)`` sorted support vertex ids, padded with -1.
        node_coords: ``(n_nodes, 3)`` physical node positions (exact chart points).
    """

    order: int
    n_nodes: int
    cell_nodes: dict[str, np.ndarray]
    node_support: np.ndarray
    node_coords: np.ndarray

    @property
    def n_dofs(self) -> int:
        return N_COMP * self.n_nodes


def build_space(mesh: Mesh, order: int) -> DofMap:
    """Number the Lagrange nodes of order ``order`` on every region of ``mesh``."""
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"unsupported order {order}; use 1..{MAX_ORDER}")
    base = order + 1
    blocks = []
    for r in mesh.regions:
        A = lattice(r.dim, order)
        # code = vertex * base + alpha for the support, -1 elsewhere; sorted per row
        codes = np.full((len(r.cells), len(A), 4), -1, dtype=np.int64)
        for j in range(r.dim + 1):
            on = A[:, j] > 0
            codes[:, on, j] = r.cells[:, j, None] * base + A[on, j][None, :]
        codes.sort(axis=2)
        blocks.append(codes.reshape(-1, 4))
    allcodes = np.concatenate(blocks) if blocks else np.zeros((0, 4), np.int64)
    uniq, inverse = np.unique(allcodes, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    cell_nodes = {}
    coords = np.zeros((len(uniq), 3))
    start = 0
    for r in mesh.regions:
        nb = len(lattice(r.dim, order))
        ids = inverse[start : start + len(r.cells) * nb].reshape(len(r.cells), nb)
        start += len(r.cells) * nb
        cell_nodes[r.name] = ids
        chart = mesh.chart(r.chart)
        lam = lattice(r.dim, order) / order
        prm = np.einsum("bj,cjk->cbk", lam, r.params)
        coords[ids.ravel()] = chart.map(prm.reshape(-1, chart.dim))
    support = np.where(uniq >= 0, uniq // base, -1)
    support.sort(axis=1)
    return DofMap(order, len(uniq), cell_nodes, support, coords)


# ---------------------------------------------------------------------------
# element geometry


@dataclass
class ElementGeometry:
    """Per-cell, per-quadrature-point geometric data of one region.

    ``grad`` holds physical gradients for tets and tangential gradients
    (``P`` applied) for triangles and segments, shape ``(nc, nq, nb, 3)``.
    ``dx`` is the integration weight (measure times quadrature weight).
    """

    phi: np.ndarray
    grad: np.ndarray
    dx: np.ndarray
    points: np.ndarray
    params: np.ndarray
    frame: object | None = None


def cell_jacobians(mesh: Mesh, region: Region, xi: np.ndarray, cells=None):
    """Chart parameters and physical Jacobians ``(nc, nq, 3, dim)`` at reference points."""
    chart = mesh.chart(region.chart)
    P = region.params if cells is None else region.params[cells]
    lam = np.concatenate([1.0 - xi.sum(axis=1, keepdims=True), xi], axis=1)
    prm = np.einsum("qj,cjk->cqk", lam, P)
    A = np.swapaxes(P[:, 1:] - P[:, :1], 1, 2)  # (nc, chart_dim, dim)
    DX = chart.jac(prm)  # (nc, nq, 3, chart_dim)
    J = np.einsum("cqkm,cmd->cqkd", DX, A)
    return prm, J, chart


def element_geometry(mesh: Mesh, dofmap: DofMap, region: Region, rule: QuadratureRule, cells=None, frames: bool = False):
    basis = ReferenceBasis(region.dim, dofmap.order)
    phi, dphi = basis.eval(rule.points)
    prm, J, chart = cell_jacobians(mesh, region, rule.points, cells)
    if region.dim == 3:
        det = np.linalg.det(J)
        if np.any(det <= 0):
            raise ValueError(f"region {region.name}: singular or inverted element Jacobian")
        Jinv = np.linalg.inv(J)
        grad = np.einsum("qbd,cqdk->cqbk", dphi, Jinv)
        meas = det
    else:
        G = np.einsum("cqkd,cqke->cqde", J, J)
        Ginv = np.linalg.inv(G)
        dual = np.einsum("cqkd,cqde->cqke", J, Ginv)
        grad = np.einsum("qbd,cqkd->cqbk", dphi, dual)
        meas = np.sqrt(np.linalg.det(G))
        if np.any(meas <= 0):
            raise ValueError(f"region {region.name}: degenerate element")
    dx = meas * rule.weights
    points = chart.map(prm)
    frame = None
    if frames:
        if region.dim == 2:
            frame = surface_frame(chart, prm)
        elif region.dim == 1:
            frame = curve_frame(chart, prm[..., 0], region.n_ref)
    nc = J.shape[0]
    return ElementGeometry(np.broadcast_to(phi, (nc,) + phi.shape), grad, dx, points, prm, frame)


# ---------------------------------------------------------------------------
# evaluation and checks


def _find_region(mesh: Mesh, name: str) -> Region:
    return mesh.region(name)


def eval_field(mesh: Mesh, dofmap: DofMap, coefficients, region: str, element: int, ref_point):
    """Value ``(k,)`` and physical (or tangential) gradient ``(k, 3)`` of a nodal field.

    ``coefficients`` is ``(n_nodes, k)``; for the six-component system vector
    pass ``x.reshape(-1, 6)``.
    """
    reg = _find_region(mesh, region)
    if not 0 <= element < len(reg):
        raise IndexError(f"element {element} out of range for region {region} ({len(reg)} cells)")
    C = np.asarray(coefficients, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    if C.shape[0] != dofmap.n_nodes:
        raise ValueError(f"expected {dofmap.n_nodes} nodal rows, got {C.shape[0]}")
    rule = QuadratureRule(np.atleast_2d(np.asarray(ref_point, dtype=float)), np.ones(1), 0)
    geo = element_geometry(mesh, dofmap, reg, rule, cells=np.array([element]))
    nodes = dofmap.cell_nodes[region][element]
    val = geo.phi[0, 0] @ C[nodes]
    grad = np.einsum("bk,bi->ik", geo.grad[0, 0], C[nodes])
    return val, grad


def _sub_entity_nodes(dim: int, order: int, local_vertices) -> np.ndarray:
    """Local node indices of a cell lying on the sub-simplex spanned by ``local_vertices``."""
    A = lattice(dim, order)
    outside = [j for j in range(dim + 1) if j not in local_vertices]
    return np.flatnonzero((A[:, outside] == 0).all(axis=1)) if outside else np.arange(len(A))


def trace_consistency(mesh: Mesh, dofmap: DofMap, region: str) -> list[str]:
    """Check that each cell of a shell/beam region shares its nodes with a parent cell.

    The parent is any higher-dimensional cell containing the entity. Returns
    a list of mismatches (empty on success).
    """
    reg = _find_region(mesh, region)
    parents = [r for r in mesh.regions if r.dim > reg.dim]
    index: dict[frozenset, tuple[Region, int]] = {}
    for r in parents:
        for c, row in enumerate(r.cells.tolist()):
            for sub in itertools.combinations(range(r.dim + 1), reg.dim + 1):
                index.setdefault(frozenset(row[s] for s in sub), (r, c))
    problems = []
    own = dofmap.cell_nodes[region]
    for c, row in enumerate(reg.cells.tolist()):
        hit = index.get(frozenset(row))
        if hit is None:
            problems.append(f"{region} cell {c}: no parent entity")
            continue
        pr, pc = hit
        loc = [pr.cells[pc].tolist().index(v) for v in row]
        pnodes = set(dofmap.cell_nodes[pr.name][pc][_sub_entity_nodes(pr.dim, dofmap.order, loc)].tolist())
        if pnodes != set(own[c].tolist()):
            problems.append(f"{region} cell {c}: nodes differ from parent {pr.name}[{pc}]")
    return problems


FIELD_COMPONENTS = {"u": (0, 1, 2), "theta": (3, 4, 5), "both": (0, 1, 2, 3, 4, 5)}


def nodes_on(mesh: Mesh, dofmap: DofMap, names) -> np.ndarray:
    """Global nodes lying on the named boundary tags or regions."""
    picked = []
    for name in names:
        if name in mesh.tags:
            facets = mesh.tags[name]
        elif name in dofmap.cell_nodes:
            picked.append(dofmap.cell_nodes[name].ravel())
            continue
        else:
            raise KeyError(f"unknown tag {name!r}; known tags: {sorted(mesh.tags)}")
        # a node lies on a facet iff its support is a subset of the facet vertices
        subsets = set()
        for f in facets.tolist():
            for k in range(1, len(f) + 1):
                subsets.update(frozenset(c) for c in itertools.combinations(f, k))
        hit = np.array([frozenset(s[s >= 0].tolist()) in subsets for s in dofmap.node_support], dtype=bool)
        picked.append(np.flatnonzero(hit))
    return np.unique(np.concatenate(picked)) if picked else np.zeros(0, dtype=np.int64)


def dirichlet_mask(mesh: Mesh, dofmap: DofMap, tags, field: str = "u", components=None, value=None):
    """Constrained DOFs and prescribed values for nodes on ``tags``.

    Args:
        tags: boundary tag or region names.
        field: ``"u"``, ``"theta"`` or ``"both"``.
        components: subset of ``0, 1, 2`` within the field (default all).
        value: callable ``x -> (3,)`` or constant vector; default zero.

    Returns:
        ``(dofs, values)`` sorted by DOF.
    """
    if field not in FIELD_COMPONENTS:
        raise ValueError(f"field must be one of {list(FIELD_COMPONENTS)}, got {field!r}")
    nodes = nodes_on(mesh, dofmap, list(tags))
    fcomps = FIELD_COMPONENTS[field]
    sel = components if components is not None else (0, 1, 2)
    comps = [c for c in fcomps if (c % 3) in sel]
    if not len(nodes) or not comps:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    dofs = (N_COMP * nodes[:, None] + np.array(comps)[None, :]).ravel()
    if value is None:
        vals = np.zeros(len(dofs))
    else:
        xs = dofmap.node_coords[nodes]
        v = np.array([np.asarray(value(x) if callable(value) else value, float) for x in xs])
        vals = v[:, [c % 3 for c in comps]].ravel()
    order = np.argsort(dofs)
    return dofs[order], vals[order]
