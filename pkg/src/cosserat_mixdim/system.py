"""Global assembly, constraints, linear solves and post-processing.

The discrete functional is ``1/2 x^T K x - F^T x`` over the shared
``(u, theta)`` nodal vector. Volume, shell and beam regions add their
element matrices into the same global DOFs; coupling is purely through the
shared numbering.
"""

from __future__ import annotations

import fnmatch
import glob
import itertools
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fespace import (
    N_COMP,
    DofMap,
    ReferenceBasis,
    cell_jacobians,
    element_geometry,
    lattice,
    quadrature,
)
from .mesh import Mesh, Region
from .models import (
    _check_torsion,
    BeamFrame,
    KernelSpec,
    LoadSpec,
    ShellFrame,
    beam_frame_from,
    eval_load,
    pointwise_form,
    shell_frame_from,
    term_densities,
)

log = logging.getLogger(__name__)

CHUNK_ENTRIES = 4_000_000


class SolverError(RuntimeError):
    pass


class NotPositiveDefiniteError(SolverError):
    pass


# ---------------------------------------------------------------------------
# bindings


def resolve_bindings(mesh: Mesh, bindings: dict) -> dict[str, KernelSpec | None]:
    """Map every region to a kernel spec via exact names or glob patterns.

    A binding value of ``None`` switches a region off explicitly.
    """
    out: dict[str, KernelSpec | None] = {}
    for r in mesh.regions:
        if r.name in bindings:
            out[r.name] = bindings[r.name]
            continue
        hits = [k for k in bindings if fnmatch.fnmatchcase(r.name, k)]
        if not hits:
            raise KeyError(f"region {r.name!r} has no kernel binding")
        out[r.name] = bindings[hits[0]]
    for key in bindings:
        if key not in out and not any(fnmatch.fnmatchcase(n, key) for n in out):
            raise KeyError(f"binding {key!r} matches no region")
    for name, spec in out.items():
        if spec is None:
            continue
        want = {3: "volume", 2: "shell", 1: "beam"}[mesh.region(name).dim]
        if spec.kind != want:
            raise ValueError(f"region {name!r} of dimension {mesh.region(name).dim} bound to a {spec.kind} kernel")
    return out


def default_degree(region: Region, order: int) -> int:
    return 2 * order if region.dim == 3 else 2 * order + 2


# ---------------------------------------------------------------------------
# per-region element data


def _chunks(n: int, per: int):
    per = max(1, per)
    for s in range(0, n, per):
        yield np.arange(s, min(n, s + per))


def _frame_of(geo, region: Region):
    if region.dim == 2:
        return shell_frame_from(geo.frame)
    if region.dim == 1:
        return beam_frame_from(geo.frame)
    return None


def _flatten_frame(frame):
    if frame is None:
        return None
    if isinstance(frame, ShellFrame):
        return ShellFrame(frame.n.reshape(-1, 3), frame.W.reshape(-1, 3, 3))
    return BeamFrame(
        frame.t.reshape(-1, 3),
        frame.n.reshape(-1, 3),
        frame.c.reshape(-1, 3),
        np.asarray(frame.kn).reshape(-1),
        np.asarray(frame.kc).reshape(-1),
        None if frame.tau is None else np.asarray(frame.tau).reshape(-1),
    )


def _frame_is_constant(frame) -> bool:
    if frame is None:
        return True
    arrays = [frame.n, frame.W] if isinstance(frame, ShellFrame) else [frame.t, frame.n, frame.c, frame.kn, frame.kc]
    return all(np.ptp(np.asarray(a), axis=0).max(initial=0.0) <= 1e-14 * max(1.0, np.abs(a).max()) for a in arrays)


def _take_frame(frame, idx):
    if isinstance(frame, ShellFrame):
        return ShellFrame(frame.n[idx], frame.W[idx])
    return BeamFrame(frame.t[idx], frame.n[idx], frame.c[idx], frame.kn[idx], frame.kc[idx], None if frame.tau is None else frame.tau[idx])


def region_forms(spec: KernelSpec, frame):
    """Pointwise forms ``C`` of shape ``(1, 24, 24)`` or ``(nq_total, 24, 24)``."""
    flat = _flatten_frame(frame)
    if flat is None:
        return pointwise_form(spec)
    if _frame_is_constant(flat):
        return pointwise_form(spec, _take_frame(flat, slice(0, 1)))
    return pointwise_form(spec, flat)


def _phi_slots(geo) -> np.ndarray:
    """``Phi[c, q, b, s]``: value and gradient of each basis function."""
    return np.concatenate([geo.phi[..., None], geo.grad], axis=-1)


def element_matrices(geo, C: np.ndarray) -> np.ndarray:
    """Element matrices ``(nc, nb*6, nb*6)`` from basis slots and pointwise forms."""
    Phi = _phi_slots(geo)
    nc, nq, nb, _ = Phi.shape
    Phiw = Phi * geo.dx[..., None, None]
    C6 = C.reshape(C.shape[0], 6, 4, 6, 4)
    if C.shape[0] == 1:
        # G[c, a, s, b, t] = sum_q Phiw[c, q, a, s] Phi[c, q, b, t]
        G = np.matmul(Phiw.reshape(nc, nq, nb * 4).transpose(0, 2, 1), Phi.reshape(nc, nq, nb * 4))
        G = G.reshape(nc, nb, 4, nb, 4).transpose(0, 1, 3, 2, 4).reshape(nc * nb * nb, 16)
        Ct = C6[0].transpose(1, 3, 0, 2).reshape(16, 36)
        K = (G @ Ct).reshape(nc, nb, nb, 6, 6).transpose(0, 1, 3, 2, 4)
    else:
        Cq = C.reshape(nc, nq, 6, 4, 6, 4).transpose(0, 1, 3, 2, 4, 5).reshape(nc, nq, 4, 144)
        # Y[c, q, a, (i, j, t)] = sum_s Phiw[c, q, a, s] C[c, q, i, s, j, t]
        Y = np.matmul(Phiw, Cq).reshape(nc, nq, nb * 36, 4)
        Y = Y.transpose(0, 2, 1, 3).reshape(nc, nb * 36, nq * 4)
        K = np.matmul(Y, Phi.transpose(0, 1, 3, 2).reshape(nc, nq * 4, nb))
        K = K.reshape(nc, nb, 6, 6, nb).transpose(0, 1, 2, 4, 3)
    return K.reshape(nc, nb * 6, nb * 6)


def _cell_dofs(nodes: np.ndarray) -> np.ndarray:
    return (N_COMP * nodes[..., None] + np.arange(N_COMP)).reshape(nodes.shape[0], -1)


# ---------------------------------------------------------------------------
# assembly


@dataclass
class SparseSystem:
    K: sp.csr_matrix
    F: np.ndarray
    fixed: np.ndarray
    values: np.ndarray
    mesh: Mesh
    dofmap: DofMap
    bindings: dict
    loads: LoadSpec | None = None
    degrees: dict = field(default_factory=dict)
    parts: dict = field(default_factory=dict)

    @property
    def n_dofs(self) -> int:
        return self.K.shape[0]


def _region_degree(region, dofmap, degrees):
    return degrees.get(region.name, default_degree(region, dofmap.order))


def assemble_region(mesh: Mesh, dofmap: DofMap, region: Region, spec: KernelSpec, degree: int) -> sp.csr_matrix:
    rule = quadrature(region.dim, degree)
    nb = len(lattice(region.dim, dofmap.order))
    per = max(1, CHUNK_ENTRIES // (len(rule.weights) * nb * 36 * 4))
    N = dofmap.n_dofs
    acc = sp.csr_matrix((N, N))
    nodes = dofmap.cell_nodes[region.name]
    C_const = pointwise_form(spec) if region.dim == 3 else None
    for cells in _chunks(len(region), per):
        geo = element_geometry(mesh, dofmap, region, rule, cells=cells, frames=region.dim < 3)
        C = C_const if C_const is not None else region_forms(spec, _frame_of(geo, region))
        Ke = element_matrices(geo, C)
        d = _cell_dofs(nodes[cells])
        rows = np.repeat(d, d.shape[1], axis=1).ravel()
        cols = np.tile(d, (1, d.shape[1])).ravel()
        acc = acc + sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(N, N))
    return acc


def _facet_parents(mesh: Mesh, facets: np.ndarray):
    """For each facet, a containing cell (lowest dimension first) and local vertex slots."""
    k = facets.shape[1]
    index: dict[frozenset, tuple[Region, int]] = {}
    for r in sorted(mesh.regions, key=lambda r: r.dim):
        if r.dim + 1 < k:
            continue
        for c, row in enumerate(r.cells.tolist()):
            for sub in itertools.combinations(row, k):
                index.setdefault(frozenset(sub), (r, c))
    out = []
    for f in facets.tolist():
        hit = index.get(frozenset(f))
        if hit is None:
            raise KeyError(f"facet {f} is not an entity of any region")
        r, c = hit
        out.append((r, c, [r.cells[c].tolist().index(v) for v in f]))
    return out


def facet_quadrature(mesh: Mesh, dofmap: DofMap, facets: np.ndarray, degree: int):
    """Quadrature on tagged facets through their parent cells.

    Yields ``(nodes (nb,), phi (nq, nb), dx (nq,), points (nq, 3))`` per facet.
    """
    k = facets.shape[1]
    rule = quadrature(k - 1, degree)
    lam_f = np.concatenate([1.0 - rule.points.sum(axis=1, keepdims=True), rule.points], axis=1)
    for r, c, loc in _facet_parents(mesh, facets):
        ref_vertices = np.vstack([np.zeros(r.dim), np.eye(r.dim)])
        fv = ref_vertices[loc]
        xi = lam_f @ fv
        basis = ReferenceBasis(r.dim, dofmap.order)
        phi, _ = basis.eval(xi)
        prm, J, chart = cell_jacobians(mesh, r, xi, cells=np.array([c]))
        Ef = (fv[1:] - fv[0]).T  # (dim, k-1)
        Jf = J[0] @ Ef
        meas = np.sqrt(np.linalg.det(np.einsum("qkd,qke->qde", Jf, Jf)))
        yield dofmap.cell_nodes[r.name][c], phi, meas * rule.weights, chart.map(prm[0])


def _add_load(F, nodes, phi, dx, vals, offset):
    contrib = np.einsum("qb,q,qi->bi", phi, dx, vals)
    np.add.at(F, (N_COMP * nodes[:, None] + offset + np.arange(3)[None, :]).ravel(), contrib.ravel())


def assemble_loads(mesh: Mesh, dofmap: DofMap, loads: LoadSpec | None, degrees=None) -> np.ndarray:
    F = np.zeros(dofmap.n_dofs)
    if loads is None:
        return F
    degrees = degrees or {}
    groups = [
        (loads.body, 0, 3), (loads.body_couple, 3, 3),
        (loads.surface, 0, 2), (loads.surface_couple, 3, 2),
        (loads.line, 0, 1), (loads.line_couple, 3, 1),
    ]  # fmt: skip
    region_names = {r.name for r in mesh.regions}
    for table, offset, dim in groups:
        factor = 2.0 if offset == 3 else 1.0
        for name, value in table.items():
            if name in region_names:
                region = mesh.region(name)
                if region.dim != dim:
                    raise ValueError(f"load on {name!r} expects a region of dimension {dim}")
                rule = quadrature(dim, _region_degree(region, dofmap, degrees))
                nodes = dofmap.cell_nodes[name]
                for cells in _chunks(len(region), 2000):
                    geo = element_geometry(mesh, dofmap, region, rule, cells=cells)
                    vals = factor * eval_load(value, geo.points)
                    contrib = np.einsum("cqb,cq,cqi->cbi", geo.phi, geo.dx, vals)
                    idx = N_COMP * nodes[cells][..., None] + offset + np.arange(3)
                    np.add.at(F, idx.ravel(), contrib.ravel())
            elif name in mesh.tags:
                facets = mesh.tags[name]
                if facets.shape[1] != dim + 1:
                    raise ValueError(f"tag {name!r} has facets of dimension {facets.shape[1] - 1}, load needs {dim}")
                deg = 2 * dofmap.order + 2
                for nodes, phi, dx, pts in facet_quadrature(mesh, dofmap, facets, deg):
                    _add_load(F, nodes, phi, dx, factor * eval_load(value, pts), offset)
            else:
                raise KeyError(f"load on unknown region or tag {name!r}")
    return F


def assemble(
    mesh: Mesh,
    dofmap: DofMap,
    bindings: dict,
    loads: LoadSpec | None = None,
    constraints=(),
    degrees: dict | None = None,
    keep_parts: bool = False,
) -> SparseSystem:
    """Assemble the global stiffness matrix and load vector.

    Args:
        bindings: region name or glob pattern -> :class:`KernelSpec` (or None).
        constraints: iterable of ``(dofs, values)`` pairs, e.g. from
            :func:`~cosserat_mixdim.fespace.dirichlet_mask`.
        degrees: per-region quadrature degree overrides.
        keep_parts: also keep each region's matrix in ``parts``.
    """
    degrees = degrees or {}
    resolved = resolve_bindings(mesh, bindings)
    N = dofmap.n_dofs
    K = sp.csr_matrix((N, N))
    parts = {}
    for region in mesh.regions:
        spec = resolved[region.name]
        if spec is None:
            continue
        Kr = assemble_region(mesh, dofmap, region, spec, _region_degree(region, dofmap, degrees))
        if keep_parts:
            parts[region.name] = Kr
        K = K + Kr
    K = ((K + K.T) * 0.5).tocsr()
    K.sum_duplicates()
    F = assemble_loads(mesh, dofmap, loads, degrees)
    fixed, values = merge_constraints(constraints, N)
    return SparseSystem(K, F, fixed, values, mesh, dofmap, resolved, loads, degrees, parts)


def merge_constraints(constraints, n: int):
    table: dict[int, float] = {}
    for dofs, vals in constraints:
        for d, v in zip(np.asarray(dofs).tolist(), np.asarray(vals, dtype=float).tolist()):
            if d < 0 or d >= n:
                raise IndexError(f"constrained DOF {d} out of range")
            if d in table and table[d] != v:
                raise ValueError(f"conflicting prescribed values for DOF {d}")
            table[d] = v
    fixed = np.array(sorted(table), dtype=np.int64)
    return fixed, np.array([table[d] for d in fixed.tolist()], dtype=float)


# ---------------------------------------------------------------------------
# constraints and solvers


@dataclass
class ReducedSystem:
    K: sp.csr_matrix
    F: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    values: np.ndarray
    n: int

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        x = np.zeros(self.n)
        x[self.fixed] = self.values
        x[self.free] = x_free
        return x


def inactive_dofs(K: sp.spmatrix) -> np.ndarray:
    """DOFs whose row of ``K`` is identically zero."""
    K = sp.csr_matrix(K)
    return np.flatnonzero(np.diff(K.indptr) == 0) if K.nnz == 0 else np.flatnonzero(np.abs(K).sum(axis=1).A.ravel() == 0)


def apply_dirichlet(system_or_K, F=None, fixed=None, values=None, drop_inactive: bool = False) -> ReducedSystem:
    """Eliminate prescribed DOFs symmetrically: ``K_ff x_f = F_f - K_fc x_c``.

    With ``drop_inactive`` DOFs that no energy term touches are fixed to zero.
    """
    if isinstance(system_or_K, SparseSystem):
        s = system_or_K
        K, F, fixed, values = s.K, s.F, s.fixed, s.values
    else:
        K = sp.csr_matrix(system_or_K)
        fixed = np.asarray(fixed if fixed is not None else [], dtype=np.int64)
        values = np.asarray(values if values is not None else np.zeros(len(fixed)), dtype=float)
    n = K.shape[0]
    if drop_inactive:
        extra = np.setdiff1d(inactive_dofs(K), fixed)
        if len(extra):
            log.info("fixing %d DOFs without stiffness to zero", len(extra))
        fixed = np.concatenate([fixed, extra])
        values = np.concatenate([values, np.zeros(len(extra))])
        order = np.argsort(fixed)
        fixed, values = fixed[order], values[order]
    mask = np.ones(n, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    if len(free) == 0:
        return ReducedSystem(sp.csr_matrix((0, 0)), np.zeros(0), free, fixed, values, n)
    K = sp.csr_matrix(K)
    Kff = K[free][:, free].tocsr()
    rhs = np.asarray(F, dtype=float)[free]
    if len(fixed) and np.any(values != 0):
        rhs = rhs - K[free][:, fixed] @ values
    return ReducedSystem(Kff, rhs, free, fixed, values, n)


def _find_mkl():
    if "PYPARDISO_MKL_RT" in os.environ:
        return
    import ctypes.util
    import sys

    if ctypes.util.find_library("mkl_rt"):
        return
    for base in (sys.prefix, "/usr/local", "/usr", os.path.expanduser("~/.local")):
        hits = sorted(glob.glob(os.path.join(base, "lib*", "**", "libmkl_rt*"), recursive=True), key=len)
        if hits:
            os.environ["PYPARDISO_MKL_RT"] = hits[0]
            return


def _pardiso_solver():
    _find_mkl()
    try:
        import pypardiso
    except ImportError:
        return None
    return pypardiso


def _check_pivots(K):
    d = K.diagonal()
    bad = np.flatnonzero(d <= 0)
    if len(bad):
        raise NotPositiveDefiniteError(f"non-positive diagonal entry {d[bad[0]]:.3e} at reduced DOF {bad[0]}")


def solve_spd(K: sp.csr_matrix, b: np.ndarray, method: str = "cholesky", tol: float = 1e-10, maxiter: int | None = None):
    """Solve an SPD system by sparse Cholesky (PARDISO) or Jacobi-preconditioned CG.

    Returns ``(x, info)`` where ``info`` holds the backend and, for CG, the
    residual history.
    """
    n = K.shape[0]
    if n == 0:
        return np.zeros(0), {"backend": "empty"}
    _check_pivots(K)
    if method == "cholesky":
        pyp = _pardiso_solver()
        if pyp is not None:
            solver = pyp.PyPardisoSolver(mtype=2)
            solver.set_iparm(1, 1)
            upper = sp.triu(K, format="csr")
            upper.sort_indices()
            try:
                x = solver.solve(upper, np.asarray(b, dtype=float))
            except pyp.pardiso_wrapper.PyPardisoError as exc:
                raise NotPositiveDefiniteError(f"sparse Cholesky failed: {exc}") from exc
            finally:
                solver.free_memory(everything=True)
            return np.asarray(x).reshape(np.shape(b)), {"backend": "pardiso"}
        lu = spla.splu(sp.csc_matrix(K), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
        if np.any(lu.U.diagonal() <= 0):
            bad = int(np.flatnonzero(lu.U.diagonal() <= 0)[0])
            raise NotPositiveDefiniteError(f"non-positive pivot at factor position {bad}")
        return lu.solve(np.asarray(b, dtype=float)), {"backend": "superlu"}
    if method == "cg":
        d = K.diagonal()
        M = sp.diags(1.0 / d)
        history: list[float] = []
        bn = np.linalg.norm(b) or 1.0

        def cb(xk):
            history.append(float(np.linalg.norm(K @ xk - b) / bn))

        x, info = spla.cg(K, b, rtol=tol, maxiter=maxiter or 10 * n, M=M, callback=cb)
        res = float(np.linalg.norm(K @ x - b) / bn)
        if info != 0 or res > tol * 1.0001:
            raise SolverError(f"CG did not converge: residual {res:.3e} after {len(history)} iterations; history tail {history[-5:]}")
        return x, {"backend": "cg", "iterations": len(history), "residual": res, "history": history}
    raise ValueError(f"unknown solver method {method!r}")


@dataclass
class SolutionField:
    x: np.ndarray
    system: SparseSystem
    info: dict = field(default_factory=dict)

    @property
    def nodal(self) -> np.ndarray:
        return self.x.reshape(-1, N_COMP)

    @property
    def u(self) -> np.ndarray:
        return self.nodal[:, :3]

    @property
    def theta(self) -> np.ndarray:
        return self.nodal[:, 3:]


def solve(system: SparseSystem, method: str = "cholesky", tol: float = 1e-10, maxiter=None, drop_inactive: bool = True) -> SolutionField:
    red = apply_dirichlet(system, drop_inactive=drop_inactive)
    xf, info = solve_spd(red.K, red.F, method, tol, maxiter)
    info["n_free"] = len(red.free)
    return SolutionField(red.expand(xf), system, info)


# ---------------------------------------------------------------------------
# evaluation of the energy functional from fields


def _inputs_at(geo, nodes, X):
    """Pointwise inputs ``(v, Dv, theta, Dtheta)`` from nodal values ``X (n_nodes, 6)``."""
    C = X[nodes]  # (nc, nb, 6)
    val = np.einsum("cqb,cbi->cqi", geo.phi, C)
    grad = np.einsum("cqbk,cbi->cqik", geo.grad, C)
    return val[..., :3], grad[..., :3, :], val[..., 3:], grad[..., 3:, :]


def region_energy(system: SparseSystem, region: Region, X: np.ndarray, cells=None, by_term: bool = False):
    """``1/2 int density`` over a region (or a subset of its cells)."""
    spec = system.bindings.get(region.name)
    if spec is None:
        return {} if by_term else 0.0
    mesh, dofmap = system.mesh, system.dofmap
    rule = quadrature(region.dim, _region_degree(region, dofmap, system.degrees))
    all_cells = np.arange(len(region)) if cells is None else np.asarray(cells)
    totals: dict[str, float] = {}
    for chunk in _chunks(len(all_cells), 2000):
        sel = all_cells[chunk]
        geo = element_geometry(mesh, dofmap, region, rule, cells=sel, frames=region.dim < 3)
        v, Dv, th, Dth = _inputs_at(geo, dofmap.cell_nodes[region.name][sel], X)
        frame = _frame_of(geo, region)
        if frame is not None:
            frame = _strip_torsion(frame)
        terms = spec.terms(v, Dv, th, Dth, frame)
        for name, dens in term_densities(terms).items():
            totals[name] = totals.get(name, 0.0) + 0.5 * float(np.sum(np.broadcast_to(dens, geo.dx.shape) * geo.dx))
    return totals if by_term else float(sum(totals.values()))


def _strip_torsion(frame):
    if isinstance(frame, BeamFrame) and frame.tau is not None:
        _check_torsion(frame)
        return BeamFrame(frame.t, frame.n, frame.c, frame.kn, frame.kc, None)
    return frame


def external_work(system: SparseSystem, x: np.ndarray) -> float:
    return float(system.F @ x)


def functional_energy(system: SparseSystem, x: np.ndarray) -> float:
    """``1/2 int density - L`` evaluated through the kernels, not through ``K``."""
    X = x.reshape(-1, N_COMP)
    internal = sum(region_energy(system, r, X) for r in system.mesh.regions)
    return internal - external_work(system, x)


def gradient_check(system: SparseSystem, x: np.ndarray | None = None, n_samples: int = 200, h_fd: float | None = None, seed: int = 0) -> float:
    """Compare central differences of the kernel-evaluated functional with ``K x - F``.

    Only cells touching the perturbed node are re-evaluated. Returns the
    max relative error over the sampled DOFs, relative to ``max |K x - F|``.
    """
    rng = np.random.default_rng(seed)
    n = system.n_dofs
    if x is None:
        x = rng.standard_normal(n)
    scale = float(np.abs(x).max()) or 1.0
    h = h_fd if h_fd is not None else 1e-4 * scale
    g = system.K @ x - system.F
    dofs = rng.choice(n, size=min(n_samples, n), replace=False)
    X = x.reshape(-1, N_COMP)
    touching: dict[str, dict[int, np.ndarray]] = {}
    for r in system.mesh.regions:
        if system.bindings.get(r.name) is None:
            continue
        cn = system.dofmap.cell_nodes[r.name]
        touching[r.name] = cn
    errs = []
    for d in dofs.tolist():
        node, comp = divmod(d, N_COMP)
        diff = 0.0
        for rname, cn in touching.items():
            cells = np.flatnonzero((cn == node).any(axis=1))
            if not len(cells):
                continue
            region = system.mesh.region(rname)
            Xp, Xm = X.copy(), X.copy()
            Xp[node, comp] += h
            Xm[node, comp] -= h
            diff += region_energy(system, region, Xp, cells) - region_energy(system, region, Xm, cells)
        fd = diff / (2 * h) - system.F[d]
        errs.append(abs(fd - g[d]))
    denom = max(float(np.abs(g[dofs]).max()), 1e-300)
    return float(max(errs) / denom)


# ---------------------------------------------------------------------------
# post-processing


def _l2_norms(system: SparseSystem, X: np.ndarray, regions):
    acc = {"u": 0.0, "theta": 0.0, "skw_Du": 0.0, "Theta": 0.0}
    max_qp = 0.0
    for region in regions:
        rule = quadrature(region.dim, _region_degree(region, system.dofmap, system.degrees))
        nodes = system.dofmap.cell_nodes[region.name]
        for chunk in _chunks(len(region), 2000):
            geo = element_geometry(system.mesh, system.dofmap, region, rule, cells=chunk)
            v, Dv, th, _ = _inputs_at(geo, nodes[chunk], X)
            w = geo.dx
            acc["u"] += float(np.sum(w * np.einsum("...i,...i->...", v, v)))
            acc["theta"] += float(np.sum(w * np.einsum("...i,...i->...", th, th)))
            S = 0.5 * (Dv - np.swapaxes(Dv, -1, -2))
            acc["skw_Du"] += float(np.sum(w * np.einsum("...ij,...ij->...", S, S)))
            # |anti(theta)|^2 = 2 |theta|^2
            acc["Theta"] += float(np.sum(w * 2 * np.einsum("...i,...i->...", th, th)))
            max_qp = max(max_qp, float(np.linalg.norm(v, axis=-1).max(initial=0.0)))
    return {k: float(np.sqrt(v)) for k, v in acc.items()}, max_qp


def field_norms(system: SparseSystem, x: np.ndarray) -> dict[str, float]:
    """L2 norms of ``u``, ``theta``, ``skw Du`` and ``anti theta`` over the top-dimensional active regions."""
    active = [r for r in system.mesh.regions if system.bindings.get(r.name) is not None]
    top = max((r.dim for r in active), default=3)
    return _l2_norms(system, np.asarray(x).reshape(-1, N_COMP), [r for r in active if r.dim == top])[0]


def postprocess(solution: SolutionField) -> dict:
    """Energies, displacement maxima and L2 norms of a solved field."""
    s = solution.system
    x = solution.x
    X = x.reshape(-1, N_COMP)
    per_region = {r.name: region_energy(s, r, X) for r in s.mesh.regions if s.bindings.get(r.name) is not None}
    active = [r for r in s.mesh.regions if s.bindings.get(r.name) is not None]
    top = max((r.dim for r in active), default=3)
    norms, max_qp = _l2_norms(s, X, [r for r in active if r.dim == top])
    all_qp = max((_l2_norms(s, X, [r])[1] for r in active if r.dim < top), default=0.0)
    # only nodes that belong to active regions carry meaningful values
    used = np.unique(np.concatenate([s.dofmap.cell_nodes[r.name].ravel() for r in active])) if active else np.zeros(0, int)
    max_nodes = float(np.linalg.norm(X[used, :3], axis=1).max(initial=0.0)) if len(used) else 0.0
    return {
        "energy": 0.5 * float(x @ (s.K @ x)),
        "energy_kernels": float(sum(per_region.values())),
        "external_work": external_work(s, x),
        "max_u": max(max_nodes, max_qp, all_qp),
        "max_u_nodes": max_nodes,
        "l2": norms,
        "region_energy": per_region,
        "n_dofs": s.n_dofs,
    }
