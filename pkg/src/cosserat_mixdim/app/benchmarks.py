"""Built-in configurations of the three reinforcement benchmarks and the Lc sweep.

Each builder returns a plain config document, so it can be dumped to JSON,
edited and fed back through :func:`~cosserat_mixdim.app.config.load_config`.
Division counts default to desk-sized meshes; pass ``divisions`` to refine.
"""

from __future__ import annotations

import copy

import numpy as np

from .config import SweepSpec

SILICONE = {"mu_e": 0.34, "lambda_e": 5.328, "mu_c": 1.0, "Lc": 1e-2, "a": [1.0, 1.0, 1.0]}
SILVER = {"mu_e": 30.0, "lambda_e": 98.5, "mu_c": 1.0, "Lc": 1e-2, "a": [1.0, 1.0, 1.0]}
GRAPHITE = {"mu_e": 2122.64, "lambda_e": 289.451, "mu_c": 1e4, "couple_moduli": [10867.9, 122264.0, 0.0]}

THICKNESS = 1.6
RADIUS = 0.8

REINFORCEMENTS = {
    1: ("none", "shell", "membrane"),
    2: ("none", "beams", "plate", "both"),
    3: ("none", "beams"),
}
DEFAULT_DIVISIONS = {1: (16, 5, 2), 2: (50, 10, 3), 3: (10, 10, 10)}
DEFAULT_ORDER = {1: 3, 2: 2, 3: 3}

# sixteen log-spaced characteristic lengths from 1e3 down to 1e-3
LC_GRID = (1000.0, 100.0, *np.logspace(1.75, -0.5, 10).tolist(), 10 ** -0.75, 0.1, 0.01, 0.001)


def _slab(reinforce: str) -> dict:
    shell = None
    if reinforce != "none":
        shell = {"kind": "shell", "material": "graphite", "thickness": THICKNESS, "variant": "full" if reinforce == "shell" else "membrane"}
    return {
        "mesh": {"generator": "curved_slab", "options": {"with_shell": True}},
        "materials": {"silicone": dict(SILICONE), "graphite": dict(GRAPHITE)},
        "regions": {"slab": {"kind": "volume", "material": "silicone"}, "shell": shell},
        "dirichlet": [{"tags": ["xi0", "xi1"], "field": "u"}],
        "loads": [{"type": "body", "target": "slab", "value": [0.0, 0.0, -1e-6]}],
    }


def _cantilever(reinforce: str) -> dict:
    plate = {"kind": "shell", "material": "graphite", "thickness": THICKNESS, "variant": "plate"}
    beam = {"kind": "beam", "material": "graphite", "radius": RADIUS, "variant": "straight"}
    lines = [{"axis": 0, "at": [y, 10.0], "name": f"beam_y{y:g}", "n_ref": [0, 0, 1]} for y in (0.0, 100.0)]
    return {
        "mesh": {"generator": "box", "options": {"lengths": [500.0, 100.0, 15.0], "embedded_planes": [["plate", 10.0]], "embedded_lines": lines}},
        "materials": {"silver": dict(SILVER), "graphite": dict(GRAPHITE)},
        "regions": {
            "volume": {"kind": "volume", "material": "silver"},
            "plate": plate if reinforce in ("plate", "both") else None,
            "beam_*": beam if reinforce in ("beams", "both") else None,
        },
        "dirichlet": [{"tags": ["x0"], "field": "u"}],
        "loads": [{"type": "body", "target": "volume", "value": [0.0, 0.0, -1e-5]}],
    }


def _s_profile(reinforce: str) -> dict:
    on = reinforce == "beams"
    curved = {"kind": "beam", "material": "graphite", "radius": RADIUS, "variant": "curved"}
    straight = {"kind": "beam", "material": "graphite", "radius": RADIUS, "variant": "straight"}
    torque = [[0.0, 0.0, 0.0], [0.0, 0.0, -1e-4], [0.0, 0.0, 0.0]]
    return {
        "mesh": {"generator": "extruded_s", "options": {"reinforce": True}},
        "materials": {"silver": dict(SILVER), "graphite": dict(GRAPHITE)},
        "regions": {
            "s*": {"kind": "shell", "material": "silver", "thickness": THICKNESS, "variant": "full"},
            "arc*": curved if on else None,
            "long*": straight if on else None,
            "trans*": straight if on else None,
        },
        "dirichlet": [{"tags": ["x0"], "field": "both"}],
        "loads": [{"type": "line", "target": t, "value": [0.0, 0.0, 0.0], "gradient": torque} for t in ("top", "bottom")],
        "metrics": ["mirror"],
    }


_BUILDERS = {1: _slab, 2: _cantilever, 3: _s_profile}


def example_config(number: int, reinforce: str = "none", divisions=None, order: int | None = None) -> dict:
    """Config document of benchmark ``number`` with the given reinforcement."""
    if number not in _BUILDERS:
        raise ValueError(f"unknown example {number}; choose 1, 2 or 3")
    if reinforce not in REINFORCEMENTS[number]:
        raise ValueError(f"example {number} reinforcement must be one of {REINFORCEMENTS[number]}, got {reinforce!r}")
    doc = _BUILDERS[number](reinforce)
    doc["name"] = f"example{number}-{reinforce}"
    doc["mesh"]["divisions"] = list(divisions or DEFAULT_DIVISIONS[number])
    doc["order"] = order or DEFAULT_ORDER[number]
    doc["solver"] = {"method": "cholesky"}
    return copy.deepcopy(doc)


def lc_sweep(divisions=None, order: int | None = None) -> tuple[dict, SweepSpec]:
    """Unreinforced slab with a unit couple modulus, swept over ``Lc`` against the classical solid."""
    doc = example_config(1, "none", divisions, order)
    doc["name"] = "lc-sweep"
    doc["materials"]["silicone"]["Lc"] = 1.0
    spec = SweepSpec("materials.silicone.Lc", LC_GRID, {"regions.slab.variant": "cauchy"})
    return doc, spec
