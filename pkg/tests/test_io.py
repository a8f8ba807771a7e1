import copy
import sys

import numpy as np
import pytest

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from nlococ import GridSpec, TimeGrid
from nlococ.io import (
    HEADER,
    MAGIC,
    ScenarioError,
    ScenarioValidationError,
    export_field,
    export_raw64,
    export_table,
    export_trajectory,
    field_from_spec,
    import_raw64,
    load_scenario,
    parse_scenario,
    shipped_scenario,
)

DEFAULT = tomllib.loads(shipped_scenario("default").read_text(encoding="utf-8"))


def patched(**sections):
    """The default document with selected keys replaced; ``{"model": {"tau": 0}}`` style."""
    doc = copy.deepcopy(DEFAULT)
    for section, values in sections.items():
        if isinstance(values, dict):
            doc.setdefault(section, {}).update(values)
        else:
            doc[section] = values
    return doc


def labels_of(doc):
    with pytest.raises(ScenarioValidationError) as info:
        parse_scenario(doc)
    return [label for label, _ in info.value.violations], str(info.value)


# -- loading ---------------------------------------------------------------------------------

def test_default_scenario_validates():
    scn = load_scenario(shipped_scenario("default"))
    assert scn.grid.cells == (32, 32)
    assert scn.time.steps == 25 and scn.seed == 7
    assert scn.weights is not None and scn.weights.tracking
    assert scn.bounds.feasible(scn.controls, scn.grid, scn.time)
    assert np.max(np.abs(scn.phi0)) == pytest.approx(0.9, abs=1e-3)


def test_fixedpoint_scenario_validates():
    scn = load_scenario(shipped_scenario("fixedpoint"))
    assert np.all(scn.phi0 == 1.0) and np.all(scn.sigma0 == 0.0)
    assert scn.weights is None


def test_seed_override():
    assert load_scenario(shipped_scenario("default"), seed=99).seed == 99


def test_tau_zero_cites_A1():
    labels, msg = labels_of(patched(model={"tau": 0.0}))
    assert labels == ["A1"] and "tau > 0" in msg


def test_theta_order_cites_log_condition():
    labels, msg = labels_of(patched(potential={"theta": 0.6, "theta0": 0.3}))
    assert "A3" in labels and "0 < theta < theta0" in msg


def test_all_violations_reported_together():
    labels, _ = labels_of(patched(model={"A": -1.0}, bounds={"M": -1.0}, weights={"alpha_u": -1.0}))
    assert {"A1", "C3", "C1"} <= set(labels)


@pytest.mark.parametrize(
    "sections,label",
    [
        ({"model": {"A": 0.0}}, "A1"),
        ({"model": {"B": -1.0}}, "A1"),
        ({"model": {"chi": -0.5}}, "A1"),
        ({"model": {"tau": float("nan")}}, "A1"),
        ({"kernel": {"width": -0.1}}, "A2"),
        ({"kernel": {"width": 0.001}}, "A2"),
        ({"potential": {"theta": 0.0}}, "A3"),
        ({"model": {"B": 0.1}}, "A4"),
        ({"model": {"P": {"low": 0.0, "high": 1.0}}}, "A5"),
        ({"model": {"m": 0.0}}, "A6"),
        ({"model": {"n": -1.0}}, "A6"),
        ({"model": {"chi": 0.7}}, "B2"),
        ({"model": {"h": {"low": 0.0, "high": float("inf")}}}, "B3"),
        ({"initial": {"phi": 1.0}}, "B5"),
        ({"initial": {"phi": float("nan")}}, "B5"),
        ({"initial": {"sigma": float("inf")}}, "B5"),
        ({"weights": {"alpha_omega": -1.0}}, "C1"),
        ({"weights": {"alpha_omega": 0.0, "alpha_q": 0.0, "alpha_u": 0.0, "beta_v": 0.0}}, "C1"),
        ({"targets": {"phi_q": float("nan")}}, "C2"),
        ({"bounds": {"u_min": -1.0}}, "C3"),
        ({"bounds": {"v_min": 2.0}}, "C3"),
        ({"bounds": {"M": 0.0}}, "C3"),
        ({"controls": {"u": float("nan")}}, "controls"),
        ({"grid": {"cells": [1, 32]}}, "grid"),
        ({"time": {"steps": 0}}, "time"),
        ({"optimizer": {"shrink": 2.0}}, "optimizer"),
    ],
)
def test_every_invariant_is_reachable(sections, label):
    labels, _ = labels_of(patched(**sections))
    assert label in labels


@pytest.mark.parametrize(
    "doc",
    [
        patched(colour="red"),
        patched(weights={"gamma": 1.0}),
        patched(targets={"mu_q": 0.0}),
        patched(solver={"restarts": 3}),
        patched(initial={"phi": {"preset": "star"}}),
        patched(initial={"phi": "0.5"}),
    ],
)
def test_unknown_keys_and_bad_values_are_scenario_errors(doc):
    with pytest.raises(ScenarioError):
        parse_scenario(doc)


def test_parse_error_reports_line_and_column(tmp_path):
    path = tmp_path / "broken.scn"
    path.write_text("[grid]\ncells = [16, 16\n", encoding="utf-8")
    with pytest.raises(ScenarioError, match=r"line \d+, column \d+"):
        load_scenario(path)
    path.write_text("[time]\nhorizon = 0.1x\n", encoding="utf-8")
    with pytest.raises(ScenarioError, match=r"line 2, column"):
        load_scenario(path)


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "absent.scn")
    with pytest.raises(FileNotFoundError):
        shipped_scenario("absent")


def test_field_presets(rng):
    g = GridSpec((2.0, 1.0), (8, 4))
    assert np.all(field_from_spec(0.25, g) == 0.25)
    cos = field_from_spec({"preset": "cosine", "mean": 1.0, "amplitude": 0.5, "modes": [1, 0]}, g)
    X, _ = g.coordinates()
    assert np.allclose(cos, 1 + 0.5 * np.cos(np.pi * X / 2.0))
    a = field_from_spec({"preset": "random", "amplitude": 0.1}, g, rng=np.random.default_rng(4))
    b = field_from_spec({"preset": "random", "amplitude": 0.1}, g, rng=np.random.default_rng(4))
    assert np.array_equal(a, b) and np.max(np.abs(a)) <= 0.1
    with pytest.raises(ScenarioError):
        field_from_spec({"preset": "random"}, g)


def test_field_from_file(tmp_path, rng):
    g = GridSpec((1.0, 1.0), (16, 16))
    data = rng.uniform(-0.5, 0.5, g.shape)
    export_raw64(data, tmp_path / "phi0.raw64")
    doc = patched(initial={"phi": {"preset": "file", "path": "phi0.raw64"}}, grid={"cells": [16, 16]})
    scn = parse_scenario(doc, base=tmp_path)
    assert np.array_equal(scn.phi0, data)
    with pytest.raises(ScenarioError, match="does not match grid"):
        parse_scenario(patched(initial={"phi": {"preset": "file", "path": "phi0.raw64"}}), base=tmp_path)


# -- exports ------------------------------------------------------------------------------------

def test_raw64_round_trip_is_bit_identical(tmp_path, rng):
    for shape in [(7,), (5, 3), (4, 3, 2)]:
        data = rng.standard_normal(shape) * 10.0 ** rng.integers(-300, 300, shape)
        path = export_raw64(data, tmp_path / "f.raw64")
        back = import_raw64(path)
        assert back.shape == shape
        assert back.tobytes() == np.ascontiguousarray(data, "<f8").tobytes()


def test_raw64_header_layout(tmp_path):
    path = export_raw64(np.arange(6.0).reshape(2, 3), tmp_path / "h.raw64")
    raw = path.read_bytes()
    assert HEADER.size == 32 and len(raw) == 32 + 6 * 8
    assert raw[:8] == MAGIC
    assert HEADER.unpack_from(raw) == (MAGIC, 2, 2, 3, 0, 6)


def test_raw64_rejects_corrupt_files(tmp_path):
    path = export_raw64(np.ones(4), tmp_path / "c.raw64")
    raw = path.read_bytes()
    (tmp_path / "short.raw64").write_bytes(raw[:20])
    (tmp_path / "magic.raw64").write_bytes(b"XXXXXXXX" + raw[8:])
    (tmp_path / "trunc.raw64").write_bytes(raw[:-8])
    for name in ("short", "magic", "trunc"):
        with pytest.raises(ValueError):
            import_raw64(tmp_path / f"{name}.raw64")
    with pytest.raises(ValueError):
        export_raw64(np.array([1.0, np.nan]), tmp_path / "nan.raw64")


def test_csv_of_2x2_field(tmp_path):
    g = GridSpec((1.0, 1.0), (2, 2))
    vals = np.array([[0.1, 1 / 3], [2.0, -1e-300]])
    path = export_field(vals, g, tmp_path / "f.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) == 5
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(back[:, 2], vals.ravel())
    assert np.array_equal(back[:, :2], [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]])


def test_csv_1d_header(tmp_path):
    g = GridSpec((1.0,), (3,))
    assert export_field(np.ones(3), g, tmp_path / "f.csv").read_text().splitlines()[0] == "x,value"
    with pytest.raises(ValueError):
        export_field(np.ones(3), g, tmp_path / "f.bin", fmt="hdf5")


@pytest.mark.parametrize("fmt", ["raw64", "csv"])
def test_trajectory_export_has_all_snapshots(tmp_path, log_problem, fmt):
    traj = log_problem.simulate()
    files = export_trajectory(traj, log_problem.grid, tmp_path, fmt)
    steps = log_problem.time.steps
    if fmt == "raw64":
        assert [f.name for f in files] == ["phi.raw64", "mu.raw64", "sigma.raw64"]
        phi = import_raw64(files[0])
        assert phi.shape[0] == steps + 1 and np.array_equal(phi, traj.phi)
    else:
        assert len(files) == 3 * (steps + 1)
        assert len(list(tmp_path.glob("phi_*.csv"))) == steps + 1


def test_export_table(tmp_path):
    path = export_table({"t": [0.0, 0.5], "E": [1.0, 0.25]}, tmp_path / "t.csv")
    assert path.read_text().splitlines() == ["t,E", "0,1", "0.5,0.25"]


def test_time_grid_in_scenario():
    scn = parse_scenario(patched(time={"horizon": 0.2, "steps": 4}))
    assert scn.time == TimeGrid(0.2, 4)
    assert scn.controls.u.shape == (5, 32, 32)
