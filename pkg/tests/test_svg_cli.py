import json
import subprocess
import sys

import numpy as np
import pytest

from measureproj.cli import main
from measureproj.measure import ValidationError
from measureproj.svgout import (parse_svg_points, parse_svg_polyline,
                                read_points_csv, render_svg_points,
                                render_svg_polyline, write_points_csv)


def write_pgm(path, pixels):
    arr = np.asarray(pixels, dtype=np.uint8)
    h, w = arr.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + arr.tobytes())


def half_dark_image(tmp_path, name="half.pgm"):
    img = np.full((32, 32), 128, dtype=np.uint8)
    img[:, :16] = 0
    p = tmp_path / name
    write_pgm(p, img)
    return p


# ---------------------------------------------------------------------------
# SVG / CSV primitives
# ---------------------------------------------------------------------------

def test_empty_svg_is_valid():
    text = render_svg_points(np.zeros((0, 2)))
    assert parse_svg_points(text).shape == (0, 2)


def test_single_point_affine_map():
    text = render_svg_points(np.array([[0.5, 0.5]]), size=100)
    assert 'cx="50"' in text and 'cy="50"' in text


def test_svg_point_round_trip():
    rng = np.random.default_rng(0)
    pts = rng.random((17, 2))
    back = parse_svg_points(render_svg_points(pts))
    assert back.shape == (17, 2)
    assert np.abs(back - pts).max() < 1e-6


def test_svg_polyline_round_trip():
    rng = np.random.default_rng(1)
    pts = rng.random((23, 2))
    back = parse_svg_polyline(render_svg_polyline(pts))
    assert back.shape == (23, 2)
    assert np.abs(back - pts).max() < 1e-6


def test_svg_rejects_3d():
    with pytest.raises(ValidationError):
        render_svg_points(np.zeros((2, 3)))


def test_points_csv_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    pts = rng.random((9, 2))
    path = tmp_path / "p.csv"
    write_points_csv(path, pts)
    assert np.array_equal(read_points_csv(path), pts)


# ---------------------------------------------------------------------------
# CLI subcommands
# ---------------------------------------------------------------------------

def test_stipple_writes_n_circles(tmp_path):
    img = half_dark_image(tmp_path)
    out = tmp_path / "dots.svg"
    rc = main(["stipple", "--in", str(img), "--out", str(out), "--n", "50",
               "--iters", "30", "--seed", "1"])
    assert rc == 0
    pts = parse_svg_points(out.read_text())
    assert len(pts) == 50
    csv_pts = read_points_csv(tmp_path / "dots.points.csv")
    assert len(csv_pts) == 50
    trace = (tmp_path / "dots.trace.csv").read_text().splitlines()
    assert trace[0] == "iteration,J,step_norm"
    assert len(trace) >= 2


def test_stipple_deterministic_bytes(tmp_path):
    img = half_dark_image(tmp_path)
    args = ["stipple", "--in", str(img), "--n", "40", "--iters", "20", "--seed", "9"]
    out1, out2 = tmp_path / "a.svg", tmp_path / "b.svg"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    for suffix in (".points.csv", ".trace.csv", ".summary.json"):
        assert (tmp_path / ("a" + suffix)).read_bytes() == (tmp_path / ("b" + suffix)).read_bytes()


def test_stipple_summary_json(tmp_path):
    img = half_dark_image(tmp_path)
    out = tmp_path / "s.svg"
    assert main(["stipple", "--in", str(img), "--out", str(out), "--n", "20",
                 "--iters", "10", "--seed", "0"]) == 0
    summary = json.loads((tmp_path / "s.summary.json").read_text())
    assert summary["command"] == "stipple"
    assert summary["J_final"] <= summary["J_start"]
    assert summary["gamma"] > 0


def test_stipple_density_follows_mass(tmp_path):
    img = half_dark_image(tmp_path)
    out = tmp_path / "dots.svg"
    rc = main(["stipple", "--in", str(img), "--out", str(out), "--n", "400",
               "--iters", "150", "--seed", "1"])
    assert rc == 0
    pts = parse_svg_points(out.read_text())
    left = int((pts[:, 0] < 0.5).sum())
    right = len(pts) - left
    mass_ratio = 2.0  # dark half has pixel 0 -> mass 1, gray half 128 -> mass 0.5
    assert abs(left / right - mass_ratio) / mass_ratio < 0.2


def test_lineart_vertex_count_feasibility_and_descent(tmp_path):
    img = half_dark_image(tmp_path)
    out = tmp_path / "line.svg"
    rc = main(["lineart", "--in", str(img), "--out", str(out), "--n", "80",
               "--iters", "40", "--T", "4", "--alpha1", "1.0", "--seed", "2"])
    assert rc == 0
    poly = parse_svg_polyline(out.read_text())
    assert len(poly) == 80
    text = out.read_text()
    assert "feasibility residuals:" in text
    from measureproj.constraints import CurveConstraintSpec, feasibility_residuals
    spec = CurveConstraintSpec(m=1, q="inf", alphas=(1.0,), N=80, dim=2, dt=4.0 / 80)
    chain = read_points_csv(tmp_path / "line.points.csv")
    res = feasibility_residuals(spec, chain.reshape(-1))
    assert res[0] <= 1.0 * 1e-6
    trace = (tmp_path / "line.trace.csv").read_text().splitlines()[1:]
    first_J = float(trace[0].split(",")[1])
    last_J = float(trace[-1].split(",")[1])
    assert last_J < first_J
    curve_rows = (tmp_path / "line.curve.csv").read_text().splitlines()
    assert curve_rows[0] == "t,x1,x2"
    assert len(curve_rows) == 1 + 4 * 80 + 1
    assert curve_rows[1].startswith("0.0,")
    summary = json.loads((tmp_path / "line.summary.json").read_text())
    assert summary["command"] == "lineart" and summary["n"] == 80


def test_lineart_warns_when_step_below_cell(tmp_path, capsys):
    img = half_dark_image(tmp_path)
    out = tmp_path / "line.svg"
    rc = main(["lineart", "--in", str(img), "--out", str(out), "--n", "40",
               "--iters", "5", "--T", "0.4", "--alpha1", "0.05", "--seed", "2"])
    captured = capsys.readouterr()
    assert rc == 0
    assert "warning" in captured.err


def test_quantize_csv_and_svg(tmp_path):
    img = half_dark_image(tmp_path)
    out_csv = tmp_path / "q.csv"
    assert main(["quantize", "--in", str(img), "--out", str(out_csv), "--n", "64"]) == 0
    assert len(read_points_csv(out_csv)) == 64
    out_svg = tmp_path / "q.svg"
    assert main(["quantize", "--in", str(img), "--out", str(out_svg), "--n", "64"]) == 0
    assert len(parse_svg_points(out_svg.read_text())) == 64


def test_w1_subcommand_matches_library(tmp_path, capsys):
    rng = np.random.default_rng(3)
    a, b = rng.random((12, 2)), rng.random((15, 2))
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_points_csv(pa, a)
    write_points_csv(pb, b)
    assert main(["w1", "--a", str(pa), "--b", str(pb)]) == 0
    printed = float(capsys.readouterr().out.strip())
    from measureproj.measure import DiscreteMeasure
    from measureproj.transport import w1_exact
    want, _ = w1_exact(DiscreteMeasure(a, np.full(12, 1 / 12)),
                       DiscreteMeasure(b, np.full(15, 1 / 15)))
    assert abs(printed - want) < 1e-12


def test_rates_subcommand_writes_files(tmp_path, capsys):
    out = tmp_path / "r.csv"
    rc = main(["rates", "--which", "quantizer", "--d", "1",
               "--sweep", "4,16,64", "--trials", "2", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "size,trial,w1,bound"
    assert len(lines) == 7
    assert (tmp_path / "r.dat").exists()


def test_gradcheck_subcommand(capsys):
    rc = main(["gradcheck", "--kernel", "gauss", "--n", "5", "--grid", "12"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "max relative error" in out


def test_config_file_with_flag_override(tmp_path, capsys):
    img = half_dark_image(tmp_path)
    cfg = {"input": str(img), "n": 30, "iters": 10, "seed": 4,
           "out": str(tmp_path / "cfg.svg")}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["stipple", "--config", str(cfg_path)]) == 0
    assert len(parse_svg_points((tmp_path / "cfg.svg").read_text())) == 30
    # flag overrides the file
    assert main(["stipple", "--config", str(cfg_path), "--n", "12",
                 "--out", str(tmp_path / "cfg2.svg")]) == 0
    assert len(parse_svg_points((tmp_path / "cfg2.svg").read_text())) == 12


def test_config_constraint_spec_form(tmp_path):
    # the {m, q, alphas, N, T} constraint-spec shape is accepted directly
    img = half_dark_image(tmp_path)
    cfg = {"input": str(img), "m": 1, "q": "inf", "alphas": [1.0], "N": 24,
           "T": 2.0, "iters": 5, "out": str(tmp_path / "c.svg")}
    cfg_path = tmp_path / "spec.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["lineart", "--config", str(cfg_path)]) == 0
    assert len(parse_svg_polyline((tmp_path / "c.svg").read_text())) == 24


def test_validation_exit_code(tmp_path, capsys):
    assert main(["stipple", "--in", str(tmp_path / "missing.pgm"),
                 "--out", str(tmp_path / "x.svg")]) == 1
    img = half_dark_image(tmp_path)
    assert main(["stipple", "--in", str(img)]) == 1  # missing --out
    assert main(["w1", "--a", str(img)]) == 1
    # all-white image inverted to zero mass: degenerate target
    white = tmp_path / "white.pgm"
    write_pgm(white, np.full((8, 8), 255, dtype=np.uint8))
    assert main(["stipple", "--in", str(white), "--out", str(tmp_path / "y.svg")]) == 1


def test_cli_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "measureproj.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
