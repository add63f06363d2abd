from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cosserat_mixdim.app import (
    ConfigError,
    FitError,
    Problem,
    RunConfig,
    SweepSpec,
    example_config,
    fit_exponential,
    lc_sweep,
    load_config,
    mirror_metric,
    read_csv,
    run,
    sweep,
    write_csv,
    write_vtu,
)
from cosserat_mixdim.app import benchmarks as B
from cosserat_mixdim.app.cli import main
from cosserat_mixdim.app.config import apply_overrides
from cosserat_mixdim.app.io import linear_subcells
from cosserat_mixdim.app.runner import flatten, solve_config
from cosserat_mixdim.fespace import ReferenceBasis
from cosserat_mixdim.system import SolutionField


def _tiny(n=2, **over):
    doc = example_config(n, "none", divisions={1: (4, 2, 1), 2: (10, 2, 3), 3: (10, 2, 2)}[n], order=1)
    return apply_overrides(doc, [f"{k}={json.dumps(v)}" for k, v in over.items()])


def _vtu_arrays(path):
    root = ET.parse(path).getroot()
    out = {}
    for da in root.iter("DataArray"):
        vals = np.array(da.text.split(), dtype=float)
        n = int(da.get("NumberOfComponents", 1))
        out[da.get("Name")] = vals.reshape(-1, n) if n > 1 else vals
    return root, out


# configuration --------------------------------------------------------------


@pytest.mark.parametrize("number", [1, 2, 3])
def test_builtin_configs_load(number):
    for reinforce in B.REINFORCEMENTS[number]:
        cfg = load_config(example_config(number, reinforce))
        assert RunConfig.from_dict(cfg.to_dict()) == cfg


def test_builtin_constants():
    assert (B.SILICONE["lambda_e"], B.SILICONE["mu_e"]) == (5.328, 0.34)
    assert (B.SILVER["lambda_e"], B.SILVER["mu_e"]) == (98.5, 30.0)
    assert B.GRAPHITE == {"mu_e": 2122.64, "lambda_e": 289.451, "mu_c": 1e4, "couple_moduli": [10867.9, 122264.0, 0.0]}
    assert (B.THICKNESS, B.RADIUS) == (1.6, 0.8)
    loads = {n: example_config(n)["loads"] for n in (1, 2, 3)}
    assert loads[1][0]["value"] == [0.0, 0.0, -1e-6]
    assert loads[2][0]["value"] == [0.0, 0.0, -1e-5]
    assert loads[3][0]["gradient"][1] == [0.0, 0.0, -1e-4]
    assert len(B.LC_GRID) == 16 and B.LC_GRID[0] == 1000 and B.LC_GRID[-1] == 0.001
    assert B.LC_GRID[2] == pytest.approx(56.23413251903491, rel=1e-14)
    assert np.all(np.diff(B.LC_GRID) < 0)


def test_schema_errors_carry_field_paths():
    doc = _tiny()
    doc["materials"]["silver"]["mu_e"] = -1.0
    doc["loads"][0]["value"] = [0, 0]
    doc["solver"]["method"] = "lu"
    with pytest.raises(ConfigError) as exc:
        load_config(doc)
    msg = str(exc.value)
    assert "materials.silver.mu_e" in msg and "loads[0].value" in msg and "solver.method" in msg


@pytest.mark.parametrize(
    "override,path",
    [
        ("regions.volume.material=\"gold\"", "regions.volume.material"),
        ("regions.plate={\"kind\": \"shell\", \"material\": \"graphite\"}", "regions.plate.thickness"),
        ("regions.volume.variant=\"odd\"", "regions.volume"),
        ("dirichlet.0.tags=[\"x9\"]", "dirichlet[0].tags[0]"),
        ("loads.0.target=\"nowhere\"", "loads[0].target"),
        ("regions.extra={\"kind\": \"volume\", \"material\": \"silver\"}", "regions"),
    ],
)
def test_semantic_errors_carry_field_paths(override, path):
    with pytest.raises(ConfigError, match=path.replace("[", r"\[").replace("]", r"\]")):
        cfg = load_config(_tiny(), [override])
        solve_config(cfg)


def test_overrides_take_precedence():
    cfg = load_config(_tiny(), ["order=2", "materials.silver.Lc=0.5", "output.csv=\"r.csv\""])
    assert cfg.order == 2 and cfg.materials["silver"]["Lc"] == 0.5 and cfg.output.csv == "r.csv"
    with pytest.raises(ConfigError):
        apply_overrides({}, ["no-equals-sign"])


def test_config_file_errors(tmp_path):
    (tmp_path / "c.json").write_text('{"mesh": \n oops}')
    with pytest.raises(ConfigError, match="line 2"):
        load_config(tmp_path / "c.json")


def test_sweep_spec_validation():
    with pytest.raises(ConfigError, match="values"):
        SweepSpec("materials.silver.Lc", ())
    with pytest.raises(ConfigError, match="metrics"):
        SweepSpec("materials.silver.Lc", (1.0,), metrics=("bogus",))
    with pytest.raises(ConfigError, match="parameter"):
        sweep(load_config(_tiny()), SweepSpec("materials.nothing.Lc", (1.0,)))


# runs -----------------------------------------------------------------------


def test_zero_load_gives_zero_field(tmp_path):
    doc = _tiny(loads=[])
    doc["output"] = {"vtu": str(tmp_path / "z.vtu"), "csv": str(tmp_path / "z.csv")}
    rep = run(load_config(doc))
    assert rep["max_u"] == 0.0 and rep["energy"] == 0.0
    root, arrays = _vtu_arrays(tmp_path / "z.vtu")
    assert root.tag == "VTKFile" and root.get("type") == "UnstructuredGrid"
    assert not arrays["displacement"].any() and not arrays["rotation"].any()
    piece = root.find("UnstructuredGrid/Piece")
    assert int(piece.get("NumberOfPoints")) == len(arrays["Points"])
    assert int(piece.get("NumberOfCells")) == len(arrays["types"]) == len(arrays["region"])


def test_runs_are_deterministic(tmp_path):
    cfg = load_config(_tiny(2, **{"regions.plate": {"kind": "shell", "material": "graphite", "thickness": 1.6, "variant": "plate"}}))
    a, b = run(cfg), run(cfg)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    problem = Problem.from_config(cfg)
    assert json.dumps(run(cfg, problem), sort_keys=True) == json.dumps(a, sort_keys=True)


def test_vtu_matches_report_and_meshio(tmp_path):
    doc = example_config(1, "shell", divisions=(4, 2, 1), order=2)
    doc["output"] = {"vtu": str(tmp_path / "e1.vtu"), "csv": str(tmp_path / "e1.csv"), "json": str(tmp_path / "e1.json")}
    rep = run(load_config(doc))
    _, arrays = _vtu_arrays(tmp_path / "e1.vtu")
    assert np.linalg.norm(arrays["displacement"], axis=1).max() == rep["max_u_nodes"]
    assert rep["max_u"] >= rep["max_u_nodes"] > 0
    counts = np.bincount(arrays["types"].astype(int))
    assert counts[10] == 8 * 4 * 2 * 6 and counts[5] == 4 * 4 * 2 * 2
    assert read_csv(tmp_path / "e1.csv")[0] == flatten(rep)
    saved = json.loads((tmp_path / "e1.json").read_text())
    assert saved["max_u"] == rep["max_u"] and RunConfig.from_dict(saved["config"]) == load_config(doc)
    meshio = pytest.importorskip("meshio")
    m = meshio.read(tmp_path / "e1.vtu")
    np.testing.assert_array_equal(m.point_data["displacement"], arrays["displacement"])
    assert {c.type for c in m.cells} == {"tetra", "triangle"}


def test_csv_round_trip(tmp_path):
    rows = [{"value": 0.1, "energy_gap": 1 / 3}, {"value": 1e-300, "energy_gap": -2.5e17, "extra": math.pi}]
    write_csv(rows, tmp_path / "r.csv")
    back = read_csv(tmp_path / "r.csv")
    assert back == rows
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "value,energy_gap,extra"


@given(st.integers(1, 3), st.integers(1, 3))
def test_linear_subcells_tile_the_reference_cell(dim, order):
    sub = linear_subcells(dim, order)
    X = ReferenceBasis(dim, order).nodes
    P = X[sub]
    vol = np.abs(np.linalg.det(P[:, 1:] - P[:, :1])) / math.factorial(dim)
    assert len(sub) == order**dim
    assert vol.sum() == pytest.approx(1 / math.factorial(dim), rel=1e-12)
    np.testing.assert_allclose(vol, vol[0], rtol=1e-12)


def test_mirror_metric(rng):
    cfg = load_config(_tiny(3))
    sol = solve_config(cfg)
    X = sol.system.dofmap.node_coords
    R = np.array([1.0, -1.0, -1.0])
    # a field with u(Rx) = R u(x): odd in (y, z) for the second and third component
    U = np.stack([X[:, 0] ** 2, X[:, 1] * (1 + X[:, 0]), X[:, 2]], axis=1)
    x = np.concatenate([U, np.zeros_like(U)], axis=1).ravel()
    assert mirror_metric(SolutionField(x, sol.system)) < 1e-12
    U2 = U + np.array([0.0, 1.0, 0.0]) * 1e-3 * np.abs(U).max()
    x2 = np.concatenate([U2, np.zeros_like(U)], axis=1).ravel()
    assert mirror_metric(SolutionField(x2, sol.system)) > 1e-3
    assert mirror_metric(SolutionField(0 * x, sol.system)) == 0.0
    assert R.shape == (3,)


def test_sweep_small():
    doc, spec = lc_sweep(divisions=(4, 2, 1), order=1)
    spec = SweepSpec(spec.parameter, (100.0, 1.0, 0.01), spec.reference, ("energy_gap", "l2_gap", "max_u"))
    rows = sweep(load_config(doc), spec)
    gaps = [r["energy_gap"] for r in rows]
    assert all(0 <= g < 1 for g in gaps) and gaps == sorted(gaps, reverse=True)
    assert all(r["l2_gap"] >= 0 for r in rows)
    # the reference run against itself has no gap
    same = SweepSpec(spec.parameter, (1.0,), {spec.parameter: 1.0})
    assert sweep(load_config(doc), same)[0] == {"value": 1.0, "energy_gap": 0.0, "l2_gap": 0.0}


# fit ------------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(
    st.floats(-5, 5).filter(lambda a: abs(a) > 0.1),
    st.floats(-2, 2).filter(lambda b: abs(b) > 0.1),
    st.floats(-10, 10),
)
def test_fit_recovers_exact_data(a, b, c):
    h = np.array([0.2, 0.5, 0.9, 1.4, 2.0])
    f = fit_exponential(np.c_[h, a * np.exp(b * h) + c])
    np.testing.assert_allclose([f.a, f.b, f.c], [a, b, c], rtol=1e-8, atol=1e-8 * (1 + abs(c)))
    assert f.f0 == pytest.approx(a + c, rel=1e-8, abs=1e-8)


def test_fit_degenerate_and_errors():
    f = fit_exponential([(0.0, 2.5), (1.0, 2.5), (3.0, 2.5)])
    assert f.f0 == 2.5 and f.residual == 0.0
    with pytest.raises(ValueError, match="three"):
        fit_exponential([(0.0, 1.0), (1.0, 2.0)])
    with pytest.raises(ValueError, match="distinct"):
        fit_exponential([(0.0, 1.0), (1.0, 2.0), (1.0, 3.0)])
    with pytest.raises(FitError):
        fit_exponential([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])


# command line ---------------------------------------------------------------


def test_cli_commands(tmp_path, capsys):
    assert main(["example", "2", "--reinforce", "plate", "--dump"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["regions"]["plate"]["variant"] == "plate"
    assert main(["fit", "0.2,3.0", "0.5,2.5", "1.0,2.2", "2.0,2.05"]) == 0
    assert set(json.loads(capsys.readouterr().out)) == {"a", "b", "c", "f0", "residual"}
    mesh = tmp_path / "m.json"
    assert main(["mesh", "gen", "box", "--divisions", "2", "1", "1", "--options", '{"lengths": [2, 1, 1]}', "--out", str(mesh)]) == 0
    assert main(["mesh", "validate", str(mesh)]) == 0
    cfg = _tiny(2, **{"regions.plate": None, "regions.beam_*": None})
    cfg["mesh"] = {"file": str(mesh)}
    cfg["regions"] = {"volume": cfg["regions"]["volume"]}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["run", str(tmp_path / "c.json"), "--csv", str(tmp_path / "r.csv")]) == 0
    assert read_csv(tmp_path / "r.csv")[0]["n_dofs"] == 6 * 12
    assert main(["export", str(tmp_path / "c.json"), "--out", str(tmp_path / "e.vtu")]) == 0
    assert (tmp_path / "e.vtu").exists()
    capsys.readouterr()
    assert main(["schema"]) == 0
    assert "regions" in json.loads(capsys.readouterr().out)["properties"]
    assert main(["run", str(tmp_path / "c.json"), "--set", "order=9"]) == 2
    assert "order" in capsys.readouterr().err
