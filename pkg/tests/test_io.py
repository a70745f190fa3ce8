"""Tests for snapshot files, run manifests, and report serialization."""

import math

import numpy as np
import pytest

from gravlab.benchmark import (
    MismatchRecord,
    MismatchReport,
    ScalingRecord,
    ScalingReport,
)
from gravlab.domain import default_units, preset_case
from gravlab.fd_solver import initial_state_for
from gravlab.io import (
    FormatError,
    default_output_root,
    make_manifest,
    mismatch_report_text,
    parse_mismatch_report,
    parse_scaling_report,
    read_manifest,
    read_snapshot,
    scaling_report_text,
    snapshot_columns,
    write_manifest,
    write_snapshot,
    write_state_snapshot,
)

U = default_units()


def test_snapshot_columns_per_dimension():
    assert snapshot_columns(1) == ("x", "t", "rho", "vx", "phi")
    assert snapshot_columns(3) == ("x", "y", "z", "t", "rho",
                                   "vx", "vy", "vz", "phi")


def test_snapshot_round_trip_is_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    n = 37
    points = rng.uniform(0.0, 7.0, size=(n, 1))
    rho = 1.0 + 0.1 * rng.standard_normal(n)
    v = rng.standard_normal((n, 1))
    phi = rng.standard_normal(n)
    path = tmp_path / "snap.csv"
    write_snapshot(path, points, 1.25, rho, v, phi, case="case1", units=U)
    cols, meta = read_snapshot(path)
    assert np.array_equal(cols["x"], points[:, 0])
    assert np.array_equal(cols["rho"], rho)
    assert np.array_equal(cols["vx"], v[:, 0])
    assert np.array_equal(cols["phi"], phi)
    assert np.all(cols["t"] == 1.25)
    assert meta["case"] == "case1"
    assert meta["dimension"] == 1


def test_snapshot_header_and_uniform_density_text(tmp_path):
    path = tmp_path / "tiny.csv"
    points = np.array([[0.0], [0.5], [1.0], [1.5]])
    write_snapshot(path, points, 0.0, np.ones(4), np.zeros((4, 1)),
                   np.zeros(4), case="case1", units=U)
    lines = path.read_text().splitlines()
    assert lines[0].lstrip("# ") == "x,t,rho,vx,phi"
    assert len(lines) == 5
    # %.17g prints exact integers without a trailing exponent or decimals.
    assert lines[1].split(",")[2] == "1"


def test_state_snapshot_matches_grid_fields(tmp_path):
    state = initial_state_for(preset_case("case1", grid_points=16), U)
    path = tmp_path / "state.csv"
    write_state_snapshot(path, state, case="case1", units=U)
    cols, meta = read_snapshot(path)
    assert np.array_equal(cols["rho"], state.rho.ravel())
    assert np.array_equal(cols["x"], state.grid_axes()[0])
    assert meta["grid_shape"] == [16]
    assert np.all(cols["t"] == state.t)


def test_state_snapshot_3d_orders_axes_consistently(tmp_path):
    state = initial_state_for(
        preset_case("case1_oblique", grid_points=8), U)
    path = tmp_path / "state3.csv"
    write_state_snapshot(path, state, case="case1_oblique", units=U)
    cols, meta = read_snapshot(path)
    assert meta["dimension"] == 3
    assert meta["grid_shape"] == [8, 8, 8]
    assert np.array_equal(cols["rho"], state.rho.ravel())
    vel = state.velocity()
    assert np.array_equal(cols["vy"], vel[1].ravel())
    # x varies slowest in the ij layout.
    assert cols["x"][0] == cols["x"][1] == 0.0
    assert cols["z"][0] != cols["z"][1]


def test_read_snapshot_rejects_malformed_files(tmp_path):
    bad_header = tmp_path / "a.csv"
    bad_header.write_text("# q,r,s\n1,2,3\n")
    with pytest.raises(FormatError):
        read_snapshot(bad_header)

    bad_width = tmp_path / "b.csv"
    bad_width.write_text("# x,t,rho,vx,phi\n0,0,1\n")
    with pytest.raises(FormatError):
        read_snapshot(bad_width)


def test_manifest_round_trip(tmp_path):
    cfg = preset_case("case2", grid_points=512, courant=0.45)
    manifest = make_manifest("gravlab run --case 2", cfg, tmp_path)
    path = write_manifest(tmp_path, manifest)
    assert path.name == "manifest.json"
    back = read_manifest(path)
    assert back.command == manifest.command
    assert back.seed == cfg.seed
    assert back.config == cfg


def test_manifest_rejects_garbage(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text("{not json")
    with pytest.raises(FormatError):
        read_manifest(path)
    path.write_text("{\"command\": \"x\"}")
    with pytest.raises(FormatError):
        read_manifest(path)


def test_mismatch_report_round_trip():
    report = MismatchReport(
        case="case1", solver_a="fd", solver_b="lt",
        records=(
            MismatchRecord(0.5, "rho", "density", 0.1234567890123456, 0.5),
            MismatchRecord(0.5, "v_x", "signed", 1.0 / 3.0, math.pi),
        ))
    text = mismatch_report_text(report)
    assert text.startswith("# mismatch report\n")
    back = parse_mismatch_report(text)
    assert back == report


def test_scaling_report_round_trip():
    report = ScalingReport(kind="time", records=(
        ScalingRecord("fd", "t1", "wall_seconds", 0.123456789012345678, 3),
        ScalingRecord("grinn", "d3", "seconds_per_iteration", 2.5e-3, 5),
    ))
    back = parse_scaling_report(scaling_report_text(report))
    assert back == report


def test_report_parsers_reject_wrong_magic_and_rows():
    with pytest.raises(FormatError):
        parse_mismatch_report("# scaling report\nkind time\ncolumns a\n")
    good = mismatch_report_text(MismatchReport(
        case="c", solver_a="a", solver_b="b",
        records=(MismatchRecord(0.0, "rho", "density", 0.0, 0.0),)))
    with pytest.raises(FormatError):
        parse_mismatch_report(good + "1.0 rho density 0.0\n")
    with pytest.raises(FormatError):
        parse_scaling_report("# scaling report\ncolumns a b c d e\n")


def test_default_output_root_honors_environment(monkeypatch):
    monkeypatch.setenv("GRAVLAB_OUTPUT_ROOT", "/tmp/elsewhere")
    assert str(default_output_root()) == "/tmp/elsewhere"
    monkeypatch.delenv("GRAVLAB_OUTPUT_ROOT")
    assert str(default_output_root()) == "runs"
