"""Run configuration: JSON schema, dataclasses and command-line overrides.

A configuration document looks like::

    {
      "name": "slab",
      "mesh": {"generator": "curved_slab", "divisions": [16, 5, 2]},
      "order": 3,
      "materials": {"silicone": {"mu_e": 0.34, "lambda_e": 5.328, "mu_c": 1.0, "Lc": 0.01}},
      "regions": {"slab": {"kind": "volume", "material": "silicone"}, "shell": null},
      "dirichlet": [{"tags": ["xi0", "xi1"], "field": "u"}],
      "loads": [{"type": "body", "target": "slab", "value": [0, 0, -1e-6]}],
      "solver": {"method": "cholesky"},
      "output": {"vtu": "slab.vtu", "csv": "slab.csv"}
    }

Region keys are region names or glob patterns; ``null`` switches a region
off. Load values are affine in the position, ``value + gradient @ x``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from ..models import VOLUME_VARIANTS, BeamSection, CosseratMaterial, KernelSpec, ShellSection, circle_section

GENERATORS = ("box", "curved_slab", "extruded_s")
LOAD_TYPES = ("body", "body_couple", "surface", "surface_couple", "line", "line_couple")

_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_positive = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "cosserat-mixdim run configuration",
    "type": "object",
    "required": ["mesh", "materials", "regions"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "mesh": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "generator": {"enum": list(GENERATORS)},
                "divisions": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 3, "maxItems": 3},
                "options": {"type": "object"},
                "file": {"type": "string"},
            },
            "oneOf": [{"required": ["generator", "divisions"], "not": {"required": ["file"]}}, {"required": ["file"], "not": {"required": ["generator"]}}],
        },
        "order": {"type": "integer", "minimum": 1, "maximum": 4},
        "materials": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "object",
                "additionalProperties": False,
                "required": ["mu_e", "lambda_e", "mu_c"],
                "properties": {
                    "mu_e": _positive,
                    "lambda_e": {"type": "number"},
                    "mu_c": {"type": "number", "minimum": 0},
                    "Lc": {"type": "number", "minimum": 0},
                    "a": {**_vec3, "items": {"type": "number", "minimum": 0}},
                    "couple_moduli": {"anyOf": [{"type": "null"}, {**_vec3, "items": {"type": "number", "minimum": 0}}]},
                },
            },
        },
        "regions": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "anyOf": [
                    {"type": "null"},
                    {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["kind", "material"],
                        "properties": {
                            "kind": {"enum": ["volume", "shell", "beam"]},
                            "material": {"type": "string"},
                            "variant": {"type": "string"},
                            "thickness": _positive,
                            "radius": _positive,
                            "A": _positive,
                            "I_eta": {"type": "number", "minimum": 0},
                            "I_zeta": {"type": "number", "minimum": 0},
                        },
                    },
                ]
            },
        },
        "dirichlet": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["tags"],
                "properties": {
                    "tags": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "field": {"enum": ["u", "theta", "both"]},
                    "components": {"anyOf": [{"type": "null"}, {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 2}}]},
                    "value": {"anyOf": [{"type": "null"}, _vec3]},
                },
            },
        },
        "loads": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["type", "target"],
                "properties": {
                    "type": {"enum": list(LOAD_TYPES)},
                    "target": {"type": "string"},
                    "value": _vec3,
                    "gradient": {"type": "array", "items": _vec3, "minItems": 3, "maxItems": 3},
                },
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["cholesky", "cg"]},
                "tol": _positive,
                "maxiter": {"anyOf": [{"type": "null"}, {"type": "integer", "minimum": 1}]},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"anyOf": [{"type": "null"}, {"type": "string"}]} for k in ("vtu", "csv", "json")},
        },
        "metrics": {"type": "array", "items": {"enum": ["mirror"]}},
    },
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def validate(doc: dict) -> None:
    """Raise :class:`ConfigError` listing every schema violation with its field path."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError("; ".join(f"{_path(e.absolute_path)}: {e.message}" for e in errors))


@dataclass(frozen=True)
class MeshSource:
    generator: str | None = None
    divisions: tuple[int, int, int] | None = None
    options: dict = field(default_factory=dict)
    file: str | None = None


@dataclass(frozen=True)
class RegionConfig:
    kind: str
    material: str
    variant: str | None = None
    thickness: float | None = None
    radius: float | None = None
    A: float | None = None
    I_eta: float | None = None
    I_zeta: float | None = None


@dataclass(frozen=True)
class DirichletConfig:
    tags: tuple[str, ...]
    field: str = "u"
    components: tuple[int, ...] | None = None
    value: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class LoadConfig:
    type: str
    target: str
    value: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gradient: tuple[tuple[float, ...], ...] | None = None

    def density(self):
        """Constant vector or an affine callable of the position."""
        c = np.asarray(self.value, dtype=float)
        if self.gradient is None:
            return tuple(c)
        G = np.asarray(self.gradient, dtype=float)
        return lambda x: c + np.asarray(x) @ G.T


@dataclass(frozen=True)
class SolverConfig:
    method: str = "cholesky"
    tol: float = 1e-10
    maxiter: int | None = None


@dataclass(frozen=True)
class OutputConfig:
    vtu: str | None = None
    csv: str | None = None
    json: str | None = None


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshSource
    materials: dict[str, dict]
    regions: dict[str, RegionConfig | None]
    order: int = 2
    dirichlet: tuple[DirichletConfig, ...] = ()
    loads: tuple[LoadConfig, ...] = ()
    solver: SolverConfig = SolverConfig()
    output: OutputConfig = OutputConfig()
    metrics: tuple[str, ...] = ()
    name: str = "run"

    @classmethod
    def from_dict(cls, doc: dict) -> RunConfig:
        validate(doc)
        d = copy.deepcopy(doc)
        mesh = d["mesh"]
        for name, r in d["regions"].items():
            if r is not None and r["material"] not in d["materials"]:
                raise ConfigError(f"regions.{name}.material: unknown material {r['material']!r}")
        cfg = cls(
            mesh=MeshSource(mesh.get("generator"), tuple(mesh["divisions"]) if "divisions" in mesh else None, mesh.get("options", {}), mesh.get("file")),
            materials=d["materials"],
            regions={k: (None if v is None else RegionConfig(**v)) for k, v in d["regions"].items()},
            order=d.get("order", 2),
            dirichlet=tuple(
                DirichletConfig(tuple(b["tags"]), b.get("field", "u"), _tuple(b.get("components")), _tuple(b.get("value"))) for b in d.get("dirichlet", [])
            ),
            loads=tuple(
                LoadConfig(ld["type"], ld["target"], tuple(ld.get("value", (0.0, 0.0, 0.0))), _tuple(ld.get("gradient"))) for ld in d.get("loads", [])
            ),
            solver=SolverConfig(**d.get("solver", {})),
            output=OutputConfig(**d.get("output", {})),
            metrics=tuple(d.get("metrics", [])),
            name=d.get("name", "run"),
        )
        # build every kernel once so bad variants or sections fail here with a path
        for name in cfg.regions:
            cfg.kernel(name)
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mesh"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in d["mesh"].items() if v not in (None, {})}
        d["regions"] = {k: (None if v is None else {a: b for a, b in v.items() if b is not None}) for k, v in d["regions"].items()}
        d["dirichlet"] = [{k: v for k, v in b.items() if v is not None} for b in d["dirichlet"]]
        d["loads"] = [{k: v for k, v in ld.items() if v is not None} for ld in d["loads"]]
        return json.loads(json.dumps(d))

    def material(self, name: str) -> CosseratMaterial:
        m = dict(self.materials[name])
        if "a" in m:
            m["a"] = tuple(m["a"])
        if m.get("couple_moduli") is not None:
            m["couple_moduli"] = tuple(m["couple_moduli"])
        return CosseratMaterial(**m)

    def kernel(self, region: str) -> KernelSpec | None:
        r = self.regions[region]
        if r is None:
            return None
        where = f"regions.{region}"
        try:
            mat = self.material(r.material)
            if r.kind == "volume":
                if (r.variant or "cosserat") not in VOLUME_VARIANTS:
                    raise ConfigError(f"{where}.variant: must be one of {VOLUME_VARIANTS}, got {r.variant!r}")
                return KernelSpec("volume", mat, variant=r.variant or "cosserat")
            if r.kind == "shell":
                if r.thickness is None:
                    raise ConfigError(f"{where}.thickness: required for shells")
                return KernelSpec("shell", mat, ShellSection(r.thickness, r.variant or "full"))
            if r.radius is not None:
                return KernelSpec("beam", mat, circle_section(r.radius, r.variant or "curved"))
            if None in (r.A, r.I_eta, r.I_zeta):
                raise ConfigError(f"{where}: beams need 'radius' or all of 'A', 'I_eta', 'I_zeta'")
            return KernelSpec("beam", mat, BeamSection(r.A, r.I_eta, r.I_zeta, r.variant or "curved"))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc


def _tuple(v):
    if isinstance(v, list):
        return tuple(_tuple(x) for x in v)
    return v


def set_path(doc: dict, path: str, value) -> None:
    """Set ``doc[a][b]...`` for a dotted path; integer parts index lists."""
    parts = path.split(".")
    node = doc
    for i, p in enumerate(parts[:-1]):
        key = int(p) if isinstance(node, list) else p
        if isinstance(node, dict) and key not in node:
            node[key] = {}
        node = node[key]
        if not isinstance(node, (dict, list)):
            raise ConfigError(f"{'.'.join(parts[: i + 1])}: cannot descend into a {type(node).__name__}")
    last = parts[-1]
    node[int(last) if isinstance(node, list) else last] = value


def get_path(doc: dict, path: str):
    node = doc
    for p in path.split("."):
        node = node[int(p) if isinstance(node, list) else p]
    return node


def apply_overrides(doc: dict, overrides) -> dict:
    """Return a copy of ``doc`` with ``key.path=value`` items applied; values parse as JSON when possible."""
    out = copy.deepcopy(doc)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        set_path(out, key.strip(), value)
    return out


def load_config(source, overrides=()) -> RunConfig:
    """Build a :class:`RunConfig` from a JSON file path or a dict, then apply overrides."""
    if isinstance(source, dict):
        doc = source
    else:
        text = Path(source).read_text(encoding="utf-8")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return RunConfig.from_dict(apply_overrides(doc, overrides))


@dataclass(frozen=True)
class SweepSpec:
    """Parameter sweep against a reference run on the same mesh.

    Attributes:
        parameter: dotted config path that receives each value.
        values: the values to visit, in order.
        reference: config overrides that turn a run into the reference run.
        metrics: columns to report besides the parameter value.
    """

    parameter: str
    values: tuple[float, ...]
    reference: dict = field(default_factory=dict)
    metrics: tuple[str, ...] = ("energy_gap", "l2_gap")

    def __post_init__(self):
        if not self.values:
            raise ConfigError("sweep.values: must not be empty")
        unknown = set(self.metrics) - {"energy_gap", "l2_gap", "max_u", "energy"}
        if unknown:
            raise ConfigError(f"sweep.metrics: unknown metric(s) {sorted(unknown)}")
