import itertools
import json
import math

import pytest

from framefem.cli import (
    CSV_HEADER,
    main,
    plateau_statistics,
    read_csv,
    run_cond1d,
    run_dim_table,
    ResultRow,
)
from framefem.framespace import GlobalFrame, StandardBasis, local_dim
from framefem.mesh import generate_mesh


def _run(tmp_path, *args):
    out = tmp_path / "out"
    code = main(list(args) + ["--out", str(out)])
    return code, out


@pytest.mark.parametrize("argv,name", [
    (["cond1d", "--basis", "jacobi", "--rmax", "6"], "cond1d_jacobi.csv"),
    (["cond1d", "--basis", "bernstein", "--rmax", "5", "--no-bc"], "cond1d_bernstein_nobc.csv"),
    (["frame-cond", "--mesh", "gen:interval:2", "--rmax", "5"], "frame_cond.csv"),
    (["solve", "--mesh", "gen:interval:2", "--r", "4"], "solve.csv"),
])
def test_csv_is_byte_deterministic(tmp_path, argv, name):
    first = tmp_path / "a"
    second = tmp_path / "b"
    assert main(argv + ["--out", str(first)]) == 0
    assert main(argv + ["--out", str(second)]) == 0
    text = (first / name).read_text()
    assert text.split("\n")[0] == CSV_HEADER
    assert text == (second / name).read_text()
    stem = name[:-4]
    for svg in first.glob("*.svg"):
        assert svg.name.startswith(stem)


def test_threads_do_not_change_output(tmp_path, monkeypatch):
    argv = ["cond1d", "--basis", "bernstein", "--rmax", "9"]
    assert main(argv + ["--out", str(tmp_path / "one")]) == 0
    monkeypatch.setenv("FRAMEFEM_THREADS", "4")
    assert main(argv + ["--out", str(tmp_path / "four")]) == 0
    name = "cond1d_bernstein.csv"
    assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "four" / name).read_bytes()


def test_cond1d_jacobi_rows(tmp_path):
    code, out = _run(tmp_path, "cond1d", "--basis", "jacobi", "--rmax", "10")
    assert code == 0
    rows = read_csv(out / "cond1d_jacobi.csv")
    assert [row["r"] for row in rows] == list(range(2, 11))
    for row in rows:
        assert row["kappa_M"] == pytest.approx(1.0, abs=1e-10)
        assert row["kappa_A"] == pytest.approx(row["kappa_genAM"], rel=1e-8)
        assert row["K_frame"] is None and row["iters"] is None
    assert (out / "cond1d_jacobi.svg").read_text().startswith("<svg")
    assert (out / "cond1d_jacobi_logratio.svg").exists()


def test_bernstein_r2_no_bc_mass_condition():
    row = run_cond1d("bernstein", 2, no_bc=True)[0]
    # the 3x3 Bernstein mass matrix (1/30)[[6,3,1],[3,4,3],[1,3,6]] has eigenvalues 1/3, 1/6, 1/30
    assert row.kappa_M == pytest.approx(10.0, rel=1e-12)
    assert row.kappa_A is None and row.kappa_genAM is None


def test_power_exceeds_bernstein_at_r5():
    power = run_cond1d("power", 5, r_min=5)[0].kappa_M
    bern = run_cond1d("bernstein", 5, r_min=5)[0].kappa_M
    assert power > bern


def test_power_annotation(tmp_path, monkeypatch):
    code, out = _run(tmp_path, "cond1d", "--basis", "power", "--rmax", "20")
    assert code == 0
    kappas = [row["kappa_M"] for row in read_csv(out / "cond1d_power.csv")]
    assert max(kappas) < 1e14
    assert not (out / "cond1d_power.notes.txt").exists()
    monkeypatch.setattr("framefem.cli.DOUBLE_PRECISION_LIMIT", 1e10)
    assert main(["cond1d", "--basis", "power", "--rmax", "20", "--out", str(tmp_path / "low")]) == 0
    notes = (tmp_path / "low" / "cond1d_power.notes.txt").read_text().split("\n")[:-1]
    assert len(notes) == sum(1 for k in kappas if k >= 1e10)
    assert all("beyond double precision" in line for line in notes)


@pytest.mark.parametrize("argv", [
    ["cond1d", "--basis", "power", "--rmax", "21"],
    ["cond1d", "--basis", "jacobi", "--rmax", "121"],
    ["cond1d", "--basis", "jacobi", "--rmax", "1"],
    ["cond1d", "--basis", "power", "--rmax", "5", "--no-bc"],
    ["frame-cond", "--mesh", "gen:hexagon:2", "--rmax", "4"],
    ["solve", "--mesh", "/nonexistent/mesh.json", "--r", "4"],
    ["dim-table", "--dim", "2", "--r", "4", "--counts", "1,2"],
])
def test_usage_errors_exit_2_without_output(tmp_path, argv):
    out = tmp_path / "never"
    assert main(argv + ["--out", str(out)]) == 2
    assert not out.exists()


def test_bad_rank_tol_is_usage_error(tmp_path):
    out = tmp_path / "never"
    with pytest.raises(SystemExit) as info:
        main(["solve", "--mesh", "gen:interval:2", "--r", "4", "--rank-tol", "2", "--out", str(out)])
    assert info.value.code == 2
    assert not out.exists()


def test_solve_1d_accuracy(tmp_path):
    code, out = _run(tmp_path, "solve", "--mesh", "gen:interval:4", "--r", "8")
    assert code == 0
    report = json.loads((out / "solve_report.json").read_text())
    assert report["l2_error"] <= 1e-8
    assert report["converged"]
    assert report["kappa_BA"] >= 1.0
    row = read_csv(out / "solve.csv")[0]
    assert row["iters"] == report["iterations"]


def test_schwarz_fewer_iterations_than_none(tmp_path):
    iters = {}
    for precond in ("none", "schwarz"):
        code = main(["solve", "--mesh", "gen:interval:4", "--r", "10", "--precond", precond,
                     "--out", str(tmp_path / precond)])
        assert code == 0
        iters[precond] = json.loads((tmp_path / precond / "solve_report.json").read_text())["iterations"]
    assert iters["schwarz"] < iters["none"]


def test_solve_requires_unit_box(tmp_path):
    code, out = _run(tmp_path, "solve", "--mesh", "gen:single_simplex:2", "--r", "3")
    assert code == 2


def test_dump_matrix(tmp_path):
    code, out = _run(tmp_path, "frame-cond", "--mesh", "gen:interval:2", "--rmax", "3", "--dump-matrix")
    assert code == 0
    from framefem.assembly import read_matrix

    m = read_matrix(out / "matrices" / "frame_cond_r3_M.txt")
    assert m.n == GlobalFrame(generate_mesh("interval", 2), 3).size


def test_frame_cond_summary(tmp_path):
    code, out = _run(tmp_path, "frame-cond", "--mesh", "gen:interval:1", "--rmax", "8", "--bc", "essential")
    assert code == 0
    for row in read_csv(out / "frame_cond.csv"):
        assert row["K_frame"] == pytest.approx(1.0, abs=1e-10)
    summary = json.loads((out / "frame_cond_summary.json").read_text())
    assert summary["rank_equals_dim_P"]
    assert summary["plateau_ratio"] == pytest.approx(1.0, abs=1e-10)


def test_plateau_statistics():
    rows = [ResultRow(r=r, K_frame=k) for r, k in zip(range(2, 8), [5.0, 4.0, 3.0, 2.0, 4.0, 3.0])]
    stats = plateau_statistics(rows)
    assert stats["r_top"] == [5, 6, 7]
    assert stats["plateau_ratio"] == 2.0
    assert stats["r_median"] == 4
    assert stats["last_over_median"] == 1.0


# dimension bookkeeping ------------------------------------------------------------


@pytest.mark.parametrize("r", [2, 3, 5, 8])
@pytest.mark.parametrize("v", [2, 5, 9])
def test_dim_table_1d_formulas(r, v):
    res = run_dim_table(1, r, [v, v - 1])
    assert res["frame_table_closed"] == (2 * r - 1) * v - (r - 1)
    assert res["frame_definitional"] == r * v + (r - 1) * (v - 1)
    assert res["basis_definitional"] == r * v - (r - 1)


@pytest.mark.parametrize("r", [2, 4, 6])
def test_dim_table_2d_edge_term(r):
    res = run_dim_table(2, r, [9, 16, 8])
    edge = res["terms"][1]
    assert edge["frame_table"] == edge["frame_definitional"] == r * (r - 1) // 2
    assert not edge["frame_discrepancy"]


def test_dim_table_flags_vertex_and_top_terms():
    res = run_dim_table(2, 4, [9, 16, 8])
    flags = {t["term"]: (t["basis_discrepancy"], t["frame_discrepancy"]) for t in res["terms"]}
    assert flags["V"] == (False, True)
    assert flags["F"] == (True, True)
    assert flags["E"] == (False, False)


def test_dim_table_cli_output(tmp_path, capsys):
    code, out = _run(tmp_path, "dim-table", "--dim", "2", "--r", "4", "--counts", "9,16,8")
    assert code == 0
    text = (out / "dim_table.txt").read_text()
    assert "FRAME_MISMATCH" in text
    assert text == capsys.readouterr().out
    assert json.loads((out / "dim_table.json").read_text())["d"] == 2


_MESHES = [("interval", 1), ("interval", 4), ("unit_square", 1), ("unit_square", 2), ("unit_cube", 1),
           ("single_simplex", 2), ("single_simplex", 3)]


@pytest.mark.parametrize("kind,n", _MESHES)
@pytest.mark.parametrize("r", [2, 3, 4])
def test_definitional_counts_match_enumeration(kind, n, r):
    mesh = generate_mesh(kind, n)
    d = mesh.dim
    faces = {frozenset(f) for cell in mesh.cells for k in range(1, d + 2)
             for f in itertools.combinations(cell.tolist(), k)}
    counts = [sum(1 for f in faces if len(f) == m + 1) for m in range(d + 1)]
    assert counts == [mesh.num_simplices(m) for m in range(d + 1)]
    res = run_dim_table(d, r, counts)
    assert res["frame_definitional"] == GlobalFrame(mesh, r).size
    assert res["basis_definitional"] == StandardBasis(mesh, r).size
    assert res["basis_definitional"] == sum(counts[m] * math.comb(r - 1, m) for m in range(d + 1))
    assert res["frame_definitional"] == sum(counts[m] * local_dim(m, d, r) for m in range(d + 1))
