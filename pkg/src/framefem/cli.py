"""Command-line experiment harness.

Subcommands ``cond1d``, ``frame-cond``, ``dim-table`` and ``solve`` write a
CSV with the fixed header below (plus SVG plots or JSON reports) into
``--out``.  Exit status: 0 on success, 1 on numerical failure, 2 on usage or
configuration errors.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _svg
from .assembly import MASS, STIFFNESS, assemble, assemble_load, l2_distance, write_matrix
from .errors import DegreeCapExceeded, FrameFEMError, MeshError, NumericalFailure
from .framespace import (
    BasisKind1D,
    ComparisonBasis1D,
    GlobalFrame,
    local_dim,
    standard_dimension,
)
from .mesh import SimplicialMesh, parse_mesh_spec
from .solver import build_schwarz, pcg, spectrum_of_preconditioned
from .spectral import Tolerances, frame_report, generalized_spectrum, sym_eigvals

CSV_HEADER = "r,kappa_M,kappa_A,kappa_genAM,K_frame,N,rank,iters"
CSV_FIELDS = CSV_HEADER.split(",")
DEGREE_CAPS = {"jacobi": 120, "bernstein": 120, "power": 20}
BASIS_KINDS = {"jacobi": BasisKind1D.JACOBI, "bernstein": BasisKind1D.BERNSTEIN, "power": BasisKind1D.POWER}
DOUBLE_PRECISION_LIMIT = 1e14


@dataclass
class ResultRow:
    r: int
    kappa_M: float | None = None
    kappa_A: float | None = None
    kappa_genAM: float | None = None
    K_frame: float | None = None
    N: int | None = None
    rank: int | None = None
    iters: int | None = None
    extra: dict = field(default_factory=dict)

    def csv(self) -> str:
        out = []
        for name in CSV_FIELDS:
            v = getattr(self, name)
            if v is None:
                out.append("")
            elif isinstance(v, (int, np.integer)):
                out.append(str(int(v)))
            else:
                out.append(repr(float(v)))
        return ",".join(out)


def write_csv(path: Path, rows) -> None:
    path.write_text("\n".join([CSV_HEADER] + [row.csv() for row in rows]) + "\n", encoding="utf-8")


def read_csv(path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").strip().split("\n")
    if lines[0] != CSV_HEADER:
        raise ValueError("unexpected CSV header %r" % lines[0])
    out = []
    for line in lines[1:]:
        vals = line.split(",")
        out.append({k: (float(v) if v else None) for k, v in zip(CSV_FIELDS, vals)})
    return out


def worker_count() -> int:
    raw = os.environ.get("FRAMEFEM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_r(fn, rs):
    """Run ``fn`` over ``rs`` on up to ``FRAMEFEM_THREADS`` workers; rows come back sorted by r."""
    workers = min(worker_count(), len(rs))
    if workers <= 1:
        return [fn(r) for r in rs]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(fn, rs))
    return sorted(rows, key=lambda row: row.r)


def _log10(v):
    return math.log10(v) if v is not None and v > 0 and math.isfinite(v) else float("nan")


# experiments ---------------------------------------------------------------------


def cond1d_row(kind: str, r: int, no_bc: bool = False, tolerances: Tolerances = Tolerances(),
               dump_dir: Path | None = None) -> ResultRow:
    basis = ComparisonBasis1D(BASIS_KINDS[kind], r, include_boundary=no_bc)
    m = assemble(basis, MASS)
    row = ResultRow(r=r, N=basis.size)
    rm = sym_eigvals(m, tolerances)
    row.kappa_M = rm.kappa
    row.rank = rm.rank
    if not no_bc:
        a = assemble(basis, STIFFNESS)
        row.kappa_A = sym_eigvals(a, tolerances).kappa
        row.kappa_genAM = generalized_spectrum(a, m, tolerances).kappa
        if dump_dir is not None:
            write_matrix(dump_dir / ("cond1d_%s_r%d_A.txt" % (kind, r)), a)
    if dump_dir is not None:
        write_matrix(dump_dir / ("cond1d_%s%s_r%d_M.txt" % (kind, "_nobc" if no_bc else "", r)), m)
    return row


def run_cond1d(kind: str, r_max: int, no_bc: bool = False, r_min: int = 2,
               tolerances: Tolerances = Tolerances(), dump_dir: Path | None = None) -> list[ResultRow]:
    """Condition numbers of one of the 1D comparison bases for ``r = r_min..r_max``."""
    if kind not in DEGREE_CAPS:
        raise ValueError("unknown basis %r" % kind)
    if r_max > DEGREE_CAPS[kind]:
        raise DegreeCapExceeded("%s basis is capped at r = %d" % (kind, DEGREE_CAPS[kind]))
    if r_min < 2 or r_max < r_min:
        raise ValueError("need 2 <= r_min <= r_max")
    if no_bc and kind != "bernstein":
        raise ValueError("--no-bc is only defined for the bernstein basis")
    return _map_r(lambda r: cond1d_row(kind, r, no_bc, tolerances, dump_dir), list(range(r_min, r_max + 1)))


def frame_cond_row(mesh: SimplicialMesh, r: int, bc: str, tolerances: Tolerances = Tolerances(),
                   dump_dir: Path | None = None) -> ResultRow:
    frame = GlobalFrame(mesh, r, bc)
    m = assemble(frame, MASS)
    if dump_dir is not None:
        write_matrix(dump_dir / ("frame_cond_r%d_M.txt" % r), m)
    try:
        rep = frame_report(m, tolerances)
    except NumericalFailure as exc:
        raise type(exc)("r = %d: %s" % (r, exc)) from exc
    return ResultRow(r=r, K_frame=rep.kappa_pos, N=frame.size, rank=rep.rank,
                     extra={"dim_P": standard_dimension(mesh, r, bc)})


def plateau_statistics(rows) -> dict:
    """Plateau ratio max/min of ``K`` over the top half of the r range and ``K(r_max)/K(r_median)``."""
    rs = [row.r for row in rows]
    ks = [row.K_frame for row in rows]
    half = len(rs) // 2
    top = ks[half:]
    median_index = (len(rs) - 1) // 2
    return {
        "r_top": rs[half:],
        "plateau_ratio": max(top) / min(top),
        "last_over_median": ks[-1] / ks[median_index],
        "r_median": rs[median_index],
    }


def run_frame_cond(mesh: SimplicialMesh, r_max: int, bc: str = "natural", r_min: int = 2,
                   tolerances: Tolerances = Tolerances(), dump_dir: Path | None = None) -> list[ResultRow]:
    if r_min < 1 or r_max < r_min:
        raise ValueError("need 1 <= r_min <= r_max")
    return _map_r(lambda r: frame_cond_row(mesh, r, bc, tolerances, dump_dir), list(range(r_min, r_max + 1)))


_TERMS = ("V", "E", "F", "T")


def _table_formulas(d: int, r: int):
    """Per-term coefficients of the reference dimension table."""
    full2 = (r + 2) * (r + 1) // 2 - 3
    full3 = (r + 3) * (r + 2) * (r + 1) // 6 - 4
    if d == 1:
        return [1, r - 1], [1 + r, r - 1]
    if d == 2:
        return [1, r - 1, full2], [r + 1, r * (r - 1) // 2, full2]
    return [1, r - 1, full2, full3], [r + 1, r * (r - 1) // 2, r * (r - 1) * (r - 2) // 6, full3]


def run_dim_table(d: int, r: int, counts) -> dict:
    """Basis and frame dimensions from subsimplex counts, both by definition and by
    the reference table formulas, with every per-term discrepancy flagged."""
    if d not in (1, 2, 3):
        raise ValueError("dimension must satisfy 1 <= d <= 3")
    if r < 2:
        raise ValueError("r must be >= 2")
    counts = [int(c) for c in counts]
    if len(counts) != d + 1:
        raise ValueError("need %d counts (%s), got %d" % (d + 1, ",".join(_TERMS[: d + 1]), len(counts)))
    basis_tab, frame_tab = _table_formulas(d, r)
    terms = []
    for m in range(d + 1):
        basis_def = math.comb(r - 1, m)
        frame_def = local_dim(m, d, r)
        terms.append({
            "term": _TERMS[m], "count": counts[m],
            "basis_definitional": basis_def, "basis_table": basis_tab[m],
            "frame_definitional": frame_def, "frame_table": frame_tab[m],
            "basis_discrepancy": basis_def != basis_tab[m],
            "frame_discrepancy": frame_def != frame_tab[m],
        })
    out = {
        "d": d, "r": r, "counts": counts, "terms": terms,
        "basis_definitional": sum(t["count"] * t["basis_definitional"] for t in terms),
        "basis_table": sum(t["count"] * t["basis_table"] for t in terms),
        "frame_definitional": sum(t["count"] * t["frame_definitional"] for t in terms),
        "frame_table": sum(t["count"] * t["frame_table"] for t in terms),
    }
    if d == 1:
        # the 1D row also gives closed forms that use E = V - 1
        v = counts[0]
        out["basis_table_closed"] = r * v - (r - 1)
        out["frame_table_closed"] = (2 * r - 1) * v - (r - 1)
    return out


def format_dim_table(res: dict) -> str:
    lines = ["d=%d r=%d counts=%s" % (res["d"], res["r"], ",".join(map(str, res["counts"]))),
             "term count basis_def basis_table frame_def frame_table flags"]
    for t in res["terms"]:
        flags = []
        if t["basis_discrepancy"]:
            flags.append("BASIS_MISMATCH")
        if t["frame_discrepancy"]:
            flags.append("FRAME_MISMATCH")
        lines.append("%s %d %d %d %d %d %s" % (t["term"], t["count"], t["basis_definitional"], t["basis_table"],
                                               t["frame_definitional"], t["frame_table"], " ".join(flags) or "ok"))
    lines.append("total basis_def=%d basis_table=%d frame_def=%d frame_table=%d"
                 % (res["basis_definitional"], res["basis_table"], res["frame_definitional"], res["frame_table"]))
    if "frame_table_closed" in res:
        lines.append("closed forms (E = V-1): basis=%d frame=%d" % (res["basis_table_closed"], res["frame_table_closed"]))
    return "\n".join(lines) + "\n"


def manufactured_problem(dim: int):
    """``u = Π sin(π x_i)`` on the unit box and ``f = -Δu = d π² u``."""
    def u(x):
        return np.prod(np.sin(math.pi * np.asarray(x)), axis=1)

    def f(x):
        return dim * math.pi ** 2 * u(x)

    return u, f


def run_solve(mesh: SimplicialMesh, r: int, precond: str = "schwarz", tol: float = 1e-10,
              tolerances: Tolerances = Tolerances(), with_spectrum: bool = True,
              dump_dir: Path | None = None) -> tuple[ResultRow, dict]:
    """Frame solve of the manufactured Poisson problem with essential BC on the unit box."""
    if precond not in ("none", "schwarz"):
        raise ValueError("precond must be none or schwarz")
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    if not (np.allclose(lo, 0.0) and np.allclose(hi, 1.0) and math.isclose(mesh.volume, 1.0)):
        raise MeshError("the manufactured solution needs a mesh of the unit box")
    u, f = manufactured_problem(mesh.dim)
    frame = GlobalFrame(mesh, r, "essential")
    a = assemble(frame, STIFFNESS)
    b = assemble_load(frame, f)
    if dump_dir is not None:
        write_matrix(dump_dir / ("solve_r%d_A.txt" % r), a)
    bmat = build_schwarz(frame, a.dense()) if precond == "schwarz" else None
    rep = pcg(a.dense(), b, bmat, tol=tol)
    err = l2_distance(frame, rep.c, u)
    report = {"r": r, "N": frame.size, "precond": precond, "tol": tol, "l2_error": err}
    report.update(rep.as_dict())
    if with_spectrum:
        from .solver import IdentityPreconditioner

        spec = spectrum_of_preconditioned(a.dense(), bmat if bmat is not None else IdentityPreconditioner(frame.size),
                                          tolerances)
        report["kappa_BA"] = spec.kappa
        report["rank_BA"] = spec.rank
    row = ResultRow(r=r, N=frame.size, iters=rep.iterations, extra={"l2_error": err})
    return row, report


# plotting -----------------------------------------------------------------------


def cond1d_plots(kind: str, rows) -> dict[str, str]:
    rs = [row.r for row in rows]
    series = {"log10 kappa(M)": (rs, [_log10(row.kappa_M) for row in rows])}
    if rows and rows[0].kappa_A is not None:
        series["log10 kappa(A)"] = (rs, [_log10(row.kappa_A) for row in rows])
        series["log10 kappa(M^-1 A)"] = (rs, [_log10(row.kappa_genAM) for row in rows])
    values = _svg.line_plot(series, "%s basis: condition numbers" % kind, "r", "log10 condition number")
    ratio = {}
    for name, attr in (("kappa(M)", "kappa_M"), ("kappa(A)", "kappa_A"), ("kappa(M^-1 A)", "kappa_genAM")):
        vals = [getattr(row, attr) for row in rows]
        if vals and vals[0] is not None:
            ratio[name] = (rs, [math.log(v) / math.log(r) if v and v > 0 and math.isfinite(v) else float("nan")
                                for r, v in zip(rs, vals)])
    ratios = _svg.line_plot(ratio, "%s basis: log kappa / log r" % kind, "r", "log kappa / log r")
    return {"values": values, "logratio": ratios}


def frame_plot(rows) -> str:
    rs = [row.r for row in rows]
    return _svg.line_plot({"K(frame)": (rs, [row.K_frame for row in rows])},
                          "frame condition number", "r", "K")


# entry point ---------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default: current directory)")
    common.add_argument("--dump-matrix", action="store_true", default=argparse.SUPPRESS,
                        help="also write every assembled matrix as text")
    common.add_argument("--rank-tol", type=float, default=argparse.SUPPRESS,
                        help="relative eigenvalue threshold for the numerical rank (default 1e-10)")

    parser = argparse.ArgumentParser(prog="framefem", parents=[common],
                                     description="Condition-number experiments for high-order frames.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cond1d", parents=[common], help="1D comparison bases on one interval")
    p.add_argument("--basis", choices=sorted(DEGREE_CAPS), required=True)
    p.add_argument("--rmax", type=int, required=True)
    p.add_argument("--rmin", type=int, default=2)
    p.add_argument("--no-bc", action="store_true", help="Bernstein only: keep the two boundary functions")

    p = sub.add_parser("frame-cond", parents=[common], help="frame condition number versus r")
    p.add_argument("--mesh", required=True, help="mesh JSON path or gen:kind:n")
    p.add_argument("--rmax", type=int, required=True)
    p.add_argument("--rmin", type=int, default=2)
    p.add_argument("--bc", choices=["natural", "essential"], default="natural")

    p = sub.add_parser("dim-table", parents=[common], help="basis and frame dimension bookkeeping")
    p.add_argument("--dim", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--counts", required=True, help="comma separated V,E[,F[,T]]")

    p = sub.add_parser("solve", parents=[common], help="manufactured Poisson problem by frame PCG")
    p.add_argument("--mesh", required=True, help="mesh JSON path or gen:kind:n")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--precond", choices=["none", "schwarz"], default="schwarz")
    p.add_argument("--tol", type=float, default=1e-10)
    return parser


def _prepare_out(args) -> tuple[Path, Path | None]:
    out = Path(getattr(args, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    dump = None
    if getattr(args, "dump_matrix", False):
        dump = out / "matrices"
        dump.mkdir(exist_ok=True)
    return out, dump


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        tolerances = Tolerances(rank_tol=getattr(args, "rank_tol", 1e-10))
    except ValueError as exc:
        parser.error(str(exc))

    # everything that can fail as a usage error is checked before any output is written
    try:
        mesh = parse_mesh_spec(args.mesh) if hasattr(args, "mesh") else None
        if args.command == "cond1d":
            if args.rmax > DEGREE_CAPS[args.basis]:
                raise DegreeCapExceeded("%s basis is capped at r = %d" % (args.basis, DEGREE_CAPS[args.basis]))
            if args.rmax < max(args.rmin, 2):
                raise ValueError("--rmax must be >= max(--rmin, 2)")
            if args.no_bc and args.basis != "bernstein":
                raise ValueError("--no-bc is only defined for the bernstein basis")
        elif args.command == "frame-cond" and args.rmax < max(args.rmin, 1):
            raise ValueError("--rmax must be >= max(--rmin, 1)")
        elif args.command == "dim-table":
            counts = [int(c) for c in args.counts.split(",")]
            table = run_dim_table(args.dim, args.r, counts)
        elif args.command == "solve" and args.r < 1:
            raise ValueError("--r must be >= 1")
    except (FrameFEMError, ValueError, OSError) as exc:
        print("framefem: error: %s" % exc, file=sys.stderr)
        return 1 if isinstance(exc, NumericalFailure) else 2

    try:
        out, dump = _prepare_out(args)
    except OSError as exc:
        print("framefem: error: cannot write output directory: %s" % exc, file=sys.stderr)
        return 2

    try:
        if args.command == "cond1d":
            rows = run_cond1d(args.basis, args.rmax, args.no_bc, args.rmin, tolerances, dump)
            stem = "cond1d_%s%s" % (args.basis, "_nobc" if args.no_bc else "")
            write_csv(out / (stem + ".csv"), rows)
            plots = cond1d_plots(args.basis, rows)
            (out / (stem + ".svg")).write_text(plots["values"], encoding="utf-8")
            (out / (stem + "_logratio.svg")).write_text(plots["logratio"], encoding="utf-8")
            flagged = [row for row in rows
                       if any(v is not None and not (v < DOUBLE_PRECISION_LIMIT)
                              for v in (row.kappa_M, row.kappa_A, row.kappa_genAM))]
            if flagged:
                notes = ["r=%d beyond double precision (kappa > 1e14)" % row.r for row in flagged]
                (out / (stem + ".notes.txt")).write_text("\n".join(notes) + "\n", encoding="utf-8")
            print("wrote %s (%d rows)" % (out / (stem + ".csv"), len(rows)))
        elif args.command == "frame-cond":
            rows = run_frame_cond(mesh, args.rmax, args.bc, args.rmin, tolerances, dump)
            write_csv(out / "frame_cond.csv", rows)
            (out / "frame_cond.svg").write_text(frame_plot(rows), encoding="utf-8")
            stats = plateau_statistics(rows)
            stats["rank_tol"] = tolerances.rank_tol
            stats["rank_equals_dim_P"] = all(row.rank == row.extra["dim_P"] for row in rows)
            (out / "frame_cond_summary.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n",
                                                         encoding="utf-8")
            print("plateau ratio %.6g, K(r_max)/K(r_median) %.6g" % (stats["plateau_ratio"], stats["last_over_median"]))
        elif args.command == "dim-table":
            text = format_dim_table(table)
            (out / "dim_table.txt").write_text(text, encoding="utf-8")
            (out / "dim_table.json").write_text(json.dumps(table, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            sys.stdout.write(text)
        elif args.command == "solve":
            row, report = run_solve(mesh, args.r, args.precond, args.tol, tolerances, dump_dir=dump)
            report["rank_tol"] = tolerances.rank_tol
            write_csv(out / "solve.csv", [row])
            (out / "solve_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                                   encoding="utf-8")
            print("iterations %d, L2 error %.3e" % (report["iterations"], report["l2_error"]))
    except NumericalFailure as exc:
        print("framefem: numerical failure: %s" % exc, file=sys.stderr)
        return 1
    except (FrameFEMError, ValueError) as exc:
        print("framefem: error: %s" % exc, file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
