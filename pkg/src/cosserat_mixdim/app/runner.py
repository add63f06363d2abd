"""Solve configured problems, sweep parameters and compute report metrics."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .. import system as S
from ..fespace import DofMap, build_space, dirichlet_mask
from ..mesh import Mesh, generate_box, generate_curved_slab, generate_extruded_s, read_mesh
from ..models import LoadSpec
from .config import ConfigError, MeshSource, RunConfig, SweepSpec, apply_overrides, get_path
from .io import write_csv, write_vtu

log = logging.getLogger(__name__)

_GENERATORS = {"box": generate_box, "curved_slab": generate_curved_slab, "extruded_s": generate_extruded_s}


def build_mesh(source: MeshSource) -> Mesh:
    if source.file is not None:
        return read_mesh(source.file)
    try:
        return _GENERATORS[source.generator](divisions=source.divisions, **source.options)
    except TypeError as exc:
        raise ConfigError(f"mesh.options: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"mesh: {exc}") from exc


@dataclass
class Problem:
    """Mesh and node numbering shared by every run of one configuration."""

    mesh: Mesh
    dofmap: DofMap
    source: MeshSource
    order: int

    @classmethod
    def from_config(cls, config: RunConfig) -> Problem:
        mesh = build_mesh(config.mesh)
        return cls(mesh, build_space(mesh, config.order), config.mesh, config.order)

    def matches(self, config: RunConfig) -> bool:
        return self.source == config.mesh and self.order == config.order

    def check(self, config: RunConfig) -> None:
        """Every tag and load target named by ``config`` must exist in the mesh."""
        regions = {r.name for r in self.mesh.regions}
        for i, bc in enumerate(config.dirichlet):
            for j, t in enumerate(bc.tags):
                if t not in self.mesh.tags and t not in regions:
                    raise ConfigError(f"dirichlet[{i}].tags[{j}]: unknown tag {t!r}")
        for i, ld in enumerate(config.loads):
            if ld.target not in self.mesh.tags and ld.target not in regions:
                raise ConfigError(f"loads[{i}].target: unknown region or tag {ld.target!r}")

    def assemble(self, config: RunConfig) -> S.SparseSystem:
        self.check(config)
        bindings = {name: config.kernel(name) for name in config.regions}
        loads = LoadSpec()
        for ld in config.loads:
            getattr(loads, ld.type)[ld.target] = ld.density()
        constraints = [
            dirichlet_mask(self.mesh, self.dofmap, bc.tags, bc.field, bc.components, bc.value) for bc in config.dirichlet
        ]
        try:
            return S.assemble(self.mesh, self.dofmap, bindings, loads, constraints)
        except KeyError as exc:
            raise ConfigError(f"regions: {exc.args[0]}") from exc


def mirror_metric(solution: S.SolutionField, reflect=(1.0, -1.0, -1.0)) -> float:
    """Largest nodal ``|u(x) - R u(R x)|`` with ``R = diag(reflect)``, relative to the largest ``|u|``.

    Only nodes whose mirror image is also a node take part.
    """
    X = solution.system.dofmap.node_coords
    U = solution.u
    R = np.asarray(reflect, dtype=float)
    scale = max(float(np.abs(X).max()), 1.0)
    dist, j = cKDTree(X).query(X * R)
    paired = dist < 1e-9 * scale
    umax = float(np.linalg.norm(U, axis=1).max(initial=0.0))
    if umax == 0.0 or not paired.any():
        return 0.0
    return float(np.linalg.norm(U[paired] - U[j[paired]] * R, axis=1).max() / umax)


def solve_config(config: RunConfig, problem: Problem | None = None) -> S.SolutionField:
    if problem is None or not problem.matches(config):
        problem = Problem.from_config(config)
    system = problem.assemble(config)
    return S.solve(system, config.solver.method, config.solver.tol, config.solver.maxiter)


def report_of(config: RunConfig, solution: S.SolutionField) -> dict:
    post = S.postprocess(solution)
    rep = {
        "name": config.name,
        "n_dofs": post["n_dofs"],
        "n_free": solution.info.get("n_free"),
        "max_u": post["max_u"],
        "max_u_nodes": post["max_u_nodes"],
        "energy": post["energy"],
        "external_work": post["external_work"],
        "region_energy": post["region_energy"],
        "l2": post["l2"],
        "solver": {"backend": solution.info.get("backend"), "method": config.solver.method},
        "metrics": {},
    }
    if "mirror" in config.metrics:
        rep["metrics"]["mirror"] = mirror_metric(solution)
    return rep


def run(config: RunConfig, problem: Problem | None = None, write: bool = True) -> dict:
    """Assemble, solve and post-process ``config``; write the configured outputs.

    Returns:
        Report with ``max_u``, ``energy``, ``region_energy``, ``l2`` norms,
        requested ``metrics`` and the list of written ``outputs``.
    """
    solution = solve_config(config, problem)
    rep = report_of(config, solution)
    outputs = []
    if write:
        out = config.output
        if out.vtu:
            write_vtu(solution, out.vtu)
            outputs.append(out.vtu)
        if out.csv:
            write_csv([flatten(rep)], out.csv)
            outputs.append(out.csv)
        if out.json:
            Path(out.json).write_text(json.dumps({**rep, "config": config.to_dict()}, indent=2), encoding="utf-8")
            outputs.append(out.json)
    rep["outputs"] = outputs
    log.info("%s: %d dofs, max|u| = %.6g", config.name, rep["n_dofs"], rep["max_u"])
    return rep


def flatten(report: dict, prefix: str = "") -> dict[str, float]:
    """Numeric leaves of a nested report keyed by dotted paths."""
    out: dict[str, float] = {}
    for k, v in report.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            out[key] = float(v)
    return out


def sweep(config: RunConfig, spec: SweepSpec, csv_path=None) -> list[dict]:
    """Re-solve ``config`` for each value of ``spec.parameter`` and compare with the reference run.

    ``energy_gap`` is ``(I_ref - I) / I_ref`` with ``I = x.K.x / 2`` at the
    solution; ``l2_gap`` is ``|u_ref - u| / |u_ref|`` in L2 over the
    top-dimensional regions. Both runs share the mesh and the order.
    """
    doc = config.to_dict()
    try:
        parent = get_path(doc, spec.parameter.rpartition(".")[0]) if "." in spec.parameter else doc
        if not isinstance(parent, (dict, list)):
            raise TypeError
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ConfigError(f"sweep.parameter: {spec.parameter!r} is not a config field") from exc
    problem = Problem.from_config(config)
    ref_cfg = RunConfig.from_dict(apply_overrides(doc, [f"{k}={json.dumps(v)}" for k, v in spec.reference.items()]))
    ref = solve_config(ref_cfg, problem)
    I_ref = 0.5 * float(ref.x @ (ref.system.K @ ref.x))
    u_ref = S.field_norms(ref.system, ref.x)["u"]
    rows = []
    for value in spec.values:
        cfg = RunConfig.from_dict(apply_overrides(doc, [f"{spec.parameter}={json.dumps(value)}"]))
        sol = solve_config(cfg, problem)
        row = {"value": float(value)}
        I = 0.5 * float(sol.x @ (sol.system.K @ sol.x))
        if "energy_gap" in spec.metrics:
            row["energy_gap"] = (I_ref - I) / I_ref
        if "l2_gap" in spec.metrics:
            row["l2_gap"] = S.field_norms(sol.system, ref.x - sol.x)["u"] / u_ref
        if "max_u" in spec.metrics:
            row["max_u"] = S.postprocess(sol)["max_u"]
        if "energy" in spec.metrics:
            row["energy"] = I
        log.info("%s = %g: %s", spec.parameter, value, row)
        rows.append(row)
    if csv_path is not None:
        write_csv(rows, csv_path)
    return rows
