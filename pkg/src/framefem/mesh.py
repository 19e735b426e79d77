"""Simplicial meshes in one to three dimensions.

A :class:`SimplicialMesh` stores vertices and cells (vertex tuples sorted
ascending) and eagerly builds every subsimplex table ``Δ_m``, boundary
flags, and the affine maps to barycentric coordinates of each cell.
Meshes are immutable once built.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateCell,
    IndexOutOfRange,
    MeshError,
    NonConforming,
    PointOutsideMesh,
    UnknownSubsimplex,
    UnsupportedKind,
)

#: Barycentric coordinates above ``-LOCATE_TOL`` count as inside a cell.
LOCATE_TOL = 1e-12


@dataclass(frozen=True)
class Subsimplex:
    """A subsimplex ``f = [x_0, ..., x_m]`` identified by its sorted vertices."""

    m: int
    vertices: tuple[int, ...]
    on_boundary: bool = False

    def __post_init__(self):
        if len(self.vertices) != self.m + 1:
            raise MeshError("subsimplex of dimension %d needs %d vertices" % (self.m, self.m + 1))


@dataclass(frozen=True)
class Macroelement:
    """The patch ``Ω_f`` of cells containing ``f`` and its extension ``Ω_f^e``.

    ``c_f`` is the pull-back scaling factor; it is left as ``None`` by
    :func:`macroelement` and filled in by :func:`framefem.framespace.pullback_scaling`
    callers when needed.
    """

    f: Subsimplex
    cells: tuple[int, ...]
    extended_cells: tuple[int, ...]
    h_f: float
    c_f: float | None = None


class SimplicialMesh:
    """Conforming simplicial mesh with eagerly built subsimplex tables.

    Parameters
    ----------
    dim : int
        Spatial dimension, at most 3.
    vertices : array_like, shape (nv, dim)
    cells : array_like of int, shape (nc, dim + 1)
        Vertex indices of each cell. They are sorted on input.
    """

    def __init__(self, dim, vertices, cells):
        if dim not in (1, 2, 3):
            raise MeshError("dim must satisfy 1 <= dim <= 3, got %r" % (dim,))
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim == 1 and dim == 1:
            vertices = vertices[:, None]
        if vertices.size == 0 or len(cells) == 0:
            raise MeshError("mesh needs at least one vertex and one cell")
        if vertices.ndim != 2 or vertices.shape[1] != dim:
            raise MeshError("vertices must have shape (nv, %d)" % dim)
        raw = [tuple(int(i) for i in c) for c in cells]
        nv = len(vertices)
        for c in raw:
            if len(c) != dim + 1:
                raise MeshError("cell %r must have %d vertices" % (c, dim + 1))
            if any(i < 0 or i >= nv for i in c):
                raise IndexOutOfRange("cell %r references a vertex outside 0..%d" % (c, nv - 1))
            if len(set(c)) != len(c):
                raise DegenerateCell("cell %r repeats a vertex" % (c,))

        self.dim = dim
        self.vertices = vertices.copy()
        self.vertices.setflags(write=False)
        self.cells = np.array([sorted(c) for c in raw], dtype=np.int64)
        self.cells.setflags(write=False)

        self._build_geometry()
        self._build_subsimplices()
        self._check_conformity()

    # construction -----------------------------------------------------------

    def _build_geometry(self):
        d = self.dim
        nc = len(self.cells)
        xs = self.vertices[self.cells]  # (nc, d+1, d)
        # rows of `aff` map (x, 1) to the cell's barycentric coordinates
        homog = np.concatenate([xs, np.ones((nc, d + 1, 1))], axis=2)  # (nc, d+1, d+1)
        edges = xs[:, 1:, :] - xs[:, :1, :]
        dets = np.linalg.det(edges) if d > 0 else np.ones(nc)
        volumes = np.abs(dets) / math.factorial(d)
        scale = np.max(np.abs(edges), axis=(1, 2)) ** d
        bad = np.nonzero(volumes <= 1e-13 * np.maximum(scale, 1e-300))[0]
        if len(bad):
            raise DegenerateCell("cell %r has zero volume" % (tuple(self.cells[bad[0]]),))
        aff = np.linalg.inv(np.transpose(homog, (0, 2, 1)))  # (nc, d+1, d+1)
        self._affine = aff
        self._affine.setflags(write=False)
        self.cell_volumes = volumes
        self.cell_volumes.setflags(write=False)
        self.barycentric_gradients = aff[:, :, :d].copy()  # (nc, d+1, d)
        self.barycentric_gradients.setflags(write=False)
        diam = np.zeros(nc)
        for i, j in itertools.combinations(range(d + 1), 2):
            diam = np.maximum(diam, np.linalg.norm(xs[:, i] - xs[:, j], axis=1))
        self.cell_diameters = diam
        self.cell_diameters.setflags(write=False)

    def _build_subsimplices(self):
        d = self.dim
        tables = [set() for _ in range(d + 1)]
        facet_cells: dict[tuple[int, ...], list[int]] = {}
        for ci, c in enumerate(self.cells):
            c = tuple(int(i) for i in c)
            for m in range(d + 1):
                tables[m].update(itertools.combinations(c, m + 1))
            for facet in itertools.combinations(c, d):
                facet_cells.setdefault(facet, []).append(ci)

        if len(tables[d]) != len(self.cells):
            raise NonConforming("mesh contains duplicate cells")
        for facet, owners in facet_cells.items():
            if len(owners) > 2:
                raise NonConforming("facet %r is shared by %d cells" % (facet, len(owners)))

        boundary_facets = [f for f, owners in facet_cells.items() if len(owners) == 1]
        on_bnd = set()
        for facet in boundary_facets:
            for m in range(d):
                on_bnd.update(itertools.combinations(facet, m + 1))

        self._simplices: list[list[tuple[int, ...]]] = [sorted(t) for t in tables]
        self._index = [{s: i for i, s in enumerate(t)} for t in self._simplices]
        self._boundary = [np.array([s in on_bnd for s in t], dtype=bool) for t in self._simplices]
        self._facet_cells = {f: tuple(v) for f, v in facet_cells.items()}

        vertex_cells: list[list[int]] = [[] for _ in range(len(self.vertices))]
        for ci, c in enumerate(self.cells):
            for v in c:
                vertex_cells[int(v)].append(ci)
        unused = [v for v, cs in enumerate(vertex_cells) if not cs]
        if unused:
            raise NonConforming("vertex %d is not used by any cell" % unused[0])
        self._vertex_cells = [frozenset(cs) for cs in vertex_cells]

    def _check_conformity(self):
        # a vertex inside the closure of a cell it does not belong to is a hanging node
        # or an overlap; a cell barycenter inside another cell is an overlap
        for ci, c in enumerate(self.cells):
            lam = self._bary_all(self.vertices, ci)  # (nv, d+1)
            inside = np.all(lam >= -1e-10, axis=1)
            inside[list(c)] = False
            if np.any(inside):
                v = int(np.nonzero(inside)[0][0])
                raise NonConforming("vertex %d lies on cell %r without being one of its vertices"
                                    % (v, tuple(c)))
        centers = self.vertices[self.cells].mean(axis=1)
        for ci in range(len(self.cells)):
            lam = self._bary_all(centers, ci)
            inside = np.all(lam > 1e-10, axis=1)
            inside[ci] = False
            if np.any(inside):
                raise NonConforming("cells %d and %d overlap" % (ci, int(np.nonzero(inside)[0][0])))

    # basic queries ------------------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    def num_simplices(self, m: int) -> int:
        return len(self._simplices[m])

    def simplices(self, m: int) -> list[Subsimplex]:
        """All subsimplices of dimension ``m`` in sorted-vertex order."""
        return [Subsimplex(m, s, bool(b)) for s, b in zip(self._simplices[m], self._boundary[m])]

    def all_simplices(self) -> list[Subsimplex]:
        """Every subsimplex, ordered by dimension and then by vertex tuple."""
        return [f for m in range(self.dim + 1) for f in self.simplices(m)]

    def subsimplex(self, vertices) -> Subsimplex:
        key = tuple(sorted(int(v) for v in vertices))
        m = len(key) - 1
        if m < 0 or m > self.dim or key not in self._index[m]:
            raise UnknownSubsimplex(key)
        return Subsimplex(m, key, bool(self._boundary[m][self._index[m][key]]))

    def simplex_index(self, f) -> int:
        key = tuple(f.vertices) if isinstance(f, Subsimplex) else tuple(sorted(f))
        try:
            return self._index[len(key) - 1][key]
        except (KeyError, IndexError):
            raise UnknownSubsimplex(key) from None

    def boundary_flags(self, m: int) -> np.ndarray:
        return self._boundary[m].copy()

    def facet_cells(self, facet) -> tuple[int, ...]:
        return self._facet_cells[tuple(sorted(facet))]

    def vertex_cells(self, v: int) -> frozenset:
        return self._vertex_cells[v]

    def cells_containing(self, f) -> tuple[int, ...]:
        key = tuple(f.vertices) if isinstance(f, Subsimplex) else tuple(sorted(f))
        if len(key) - 1 > self.dim or key not in self._index[len(key) - 1]:
            raise UnknownSubsimplex(key)
        cells = frozenset.intersection(*(self._vertex_cells[v] for v in key))
        return tuple(sorted(cells))

    @property
    def volume(self) -> float:
        return float(self.cell_volumes.sum())

    # barycentric coordinates -------------------------------------------------

    def _bary_all(self, x, cell):
        x = np.atleast_2d(x)
        xh = np.concatenate([x, np.ones((len(x), 1))], axis=1)
        return xh @ self._affine[cell].T

    def barycentric(self, cell: int, x) -> np.ndarray:
        """Barycentric coordinates of point(s) ``x`` with respect to ``cell``."""
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        lam = self._bary_all(x.reshape(-1, self.dim), cell)
        return lam[0] if single else lam

    def cell_points(self, cell: int, bary) -> np.ndarray:
        """Physical points of ``cell`` from barycentric coordinates (n, d+1)."""
        return np.asarray(bary) @ self.vertices[self.cells[cell]]

    def locate(self, x) -> int:
        """Index of a cell whose closure contains ``x``."""
        x = np.asarray(x, dtype=float).reshape(self.dim)
        xh = np.append(x, 1.0)
        lam = self._affine @ xh  # (nc, d+1)
        inside = np.nonzero(np.all(lam >= -LOCATE_TOL, axis=1))[0]
        if len(inside) == 0:
            raise PointOutsideMesh("point %r is outside the mesh" % (tuple(x),))
        return int(inside[0])

    def __repr__(self):
        counts = ", ".join("|Δ_%d|=%d" % (m, self.num_simplices(m)) for m in range(self.dim + 1))
        return "SimplicialMesh(dim=%d, %s)" % (self.dim, counts)


def build_mesh(dim, vertices, cells) -> SimplicialMesh:
    """Validate input and build a :class:`SimplicialMesh`."""
    return SimplicialMesh(dim, vertices, cells)


# generators -------------------------------------------------------------------


def _kuhn_cells(n, d):
    """Kuhn (Freudenthal) subdivision of the n^d grid of unit cubes."""
    def vid(idx):
        out = 0
        for a in reversed(idx):
            out = out * (n + 1) + a
        return out

    cells = []
    for corner in itertools.product(range(n), repeat=d):
        for perm in itertools.permutations(range(d)):
            p = list(corner)
            cell = [vid(p)]
            for axis in perm:
                p[axis] += 1
                cell.append(vid(p))
            cells.append(cell)
    return cells


def _grid_vertices(n, d):
    ticks = np.linspace(0.0, 1.0, n + 1)
    pts = np.array(list(itertools.product(ticks, repeat=d)))
    # itertools varies the last axis fastest; _kuhn_cells expects the first axis fastest
    return pts[:, ::-1].copy()


def generate_mesh(kind: str, n: int = 1, *, a: float = 0.0, b: float = 1.0) -> SimplicialMesh:
    """Generate a standard mesh.

    ``kind`` is one of ``interval`` (``n`` uniform cells on ``(a, b)``),
    ``unit_square`` (``n x n`` squares, two triangles each), ``unit_cube``
    (``n^3`` cubes, six Kuhn tetrahedra each) or ``single_simplex`` (the
    reference simplex of dimension ``n``).
    """
    if n < 1:
        raise MeshError("n must be >= 1")
    if kind == "interval":
        if not b > a:
            raise MeshError("interval needs a < b")
        return SimplicialMesh(1, np.linspace(a, b, n + 1)[:, None], [(i, i + 1) for i in range(n)])
    if kind == "unit_square":
        return SimplicialMesh(2, _grid_vertices(n, 2), _kuhn_cells(n, 2))
    if kind == "unit_cube":
        return SimplicialMesh(3, _grid_vertices(n, 3), _kuhn_cells(n, 3))
    if kind == "single_simplex":
        if n > 3:
            raise UnsupportedKind("single_simplex supports dimension 1..3")
        verts = np.vstack([np.zeros(n), np.eye(n)])
        return SimplicialMesh(n, verts, [tuple(range(n + 1))])
    raise UnsupportedKind(kind)


def parse_mesh_spec(spec: str) -> SimplicialMesh:
    """Build a mesh from ``gen:kind:n[:a:b]`` or a path to a mesh JSON file."""
    if spec.startswith("gen:"):
        parts = spec.split(":")[1:]
        if len(parts) not in (2, 4):
            raise MeshError("mesh spec must be gen:kind:n or gen:interval:n:a:b, got %r" % spec)
        try:
            n = int(parts[1])
            extra = {"a": float(parts[2]), "b": float(parts[3])} if len(parts) == 4 else {}
        except ValueError:
            raise MeshError("bad numbers in mesh spec %r" % spec) from None
        return generate_mesh(parts[0], n, **extra)
    return load_mesh_json(spec)


# point evaluation -------------------------------------------------------------


def hat_eval(mesh: SimplicialMesh, y: int, x) -> float:
    """Extended barycentric coordinate ``λ_y(x)`` (zero outside ``Ω_y``)."""
    if not 0 <= y < mesh.num_vertices:
        raise IndexOutOfRange(y)
    cell = mesh.locate(x)
    verts = list(mesh.cells[cell])
    if y not in verts:
        return 0.0
    lam = mesh.barycentric(cell, x)
    return float(np.clip(lam[verts.index(y)], 0.0, 1.0))


def barycentric_map(mesh: SimplicialMesh, f, x) -> np.ndarray:
    """``λ_f(x) = (λ_0(x), ..., λ_m(x))`` for the vertices of ``f``."""
    key = tuple(f.vertices) if isinstance(f, Subsimplex) else tuple(sorted(f))
    mesh.simplex_index(key)
    cell = mesh.locate(x)
    verts = [int(v) for v in mesh.cells[cell]]
    lam = np.clip(mesh.barycentric(cell, x), 0.0, 1.0)
    return np.array([lam[verts.index(v)] if v in verts else 0.0 for v in key])


def macroelement(mesh: SimplicialMesh, f) -> Macroelement:
    """The macroelement ``Ω_f`` and extended macroelement ``Ω_f^e`` of ``f``."""
    if not isinstance(f, Subsimplex):
        f = mesh.subsimplex(f)
    else:
        mesh.simplex_index(f)
    cells = mesh.cells_containing(f)
    ext = sorted(frozenset.union(*(mesh.vertex_cells(v) for v in f.vertices)))
    h_f = float(max(mesh.cell_diameters[list(cells)]))
    return Macroelement(f, tuple(cells), tuple(ext), h_f)


# JSON -------------------------------------------------------------------------


def load_mesh_json(path) -> SimplicialMesh:
    """Load ``{"dim": d, "vertices": [...], "cells": [...]}`` from a file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MeshError("cannot read mesh file %s: %s" % (path, exc)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshError("invalid mesh JSON in %s: %s" % (path, exc)) from None
    if not isinstance(data, dict):
        raise MeshError("mesh JSON must be an object")
    unknown = set(data) - {"dim", "vertices", "cells"}
    if unknown:
        raise MeshError("unknown keys in mesh JSON: %s" % ", ".join(sorted(unknown)))
    missing = {"dim", "vertices", "cells"} - set(data)
    if missing:
        raise MeshError("missing keys in mesh JSON: %s" % ", ".join(sorted(missing)))
    return SimplicialMesh(data["dim"], data["vertices"], data["cells"])


def mesh_to_json(mesh: SimplicialMesh) -> str:
    return json.dumps({
        "dim": mesh.dim,
        "vertices": mesh.vertices.tolist(),
        "cells": mesh.cells.tolist(),
    })
