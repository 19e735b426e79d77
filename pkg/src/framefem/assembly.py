"""Quadrature assembly of mass and stiffness matrices and load vectors.

Works with any object following the ``cell_tabulation`` protocol of
:mod:`framefem.framespace` (frames, comparison bases, the standard basis).
Cells are visited in index order, so assembly is bit-reproducible.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, QuadratureTooWeak
from .polylib import simplex_quadrature


class FormKind(str, enum.Enum):
    MASS = "mass"
    STIFFNESS = "stiffness"
    STIFFNESS_PLUS_MASS = "stiffness_plus_mass"


@dataclass(frozen=True)
class BilinearFormSpec:
    """``diffusion * (∇u, ∇v) + reaction * (u, v)`` restricted by ``kind``.

    ``mass`` ignores both coefficients and gives ``(u, v)``; ``stiffness``
    uses only ``diffusion``; ``stiffness_plus_mass`` uses both.
    """

    kind: FormKind = FormKind.STIFFNESS
    diffusion: float = 1.0
    reaction: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", FormKind(self.kind))
        if self.diffusion <= 0:
            raise ValueError("diffusion coefficient must be positive")
        if self.reaction < 0:
            raise ValueError("reaction coefficient must be nonnegative")


MASS = BilinearFormSpec(FormKind.MASS)
STIFFNESS = BilinearFormSpec(FormKind.STIFFNESS)


class SymmetricMatrix:
    """Dense symmetric matrix kept as its packed lower triangle.

    ``dense()`` returns the (read-only, exactly symmetric) full array;
    ``np.asarray`` works too.  ``blocks`` optionally records the row ranges
    of the subsimplex blocks of a frame.
    """

    def __init__(self, lower: np.ndarray, n: int, blocks=None):
        lower = np.asarray(lower, dtype=float)
        if lower.shape != (n * (n + 1) // 2,):
            raise DimensionMismatch("packed storage of order %d needs %d entries" % (n, n * (n + 1) // 2))
        self.lower = lower
        self.lower.setflags(write=False)
        self.n = n
        self.blocks = blocks
        self._dense = None

    @classmethod
    def from_dense(cls, a, blocks=None) -> "SymmetricMatrix":
        """Keep the lower triangle of ``a``; the upper triangle is discarded."""
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch("matrix must be square")
        n = a.shape[0]
        return cls(a[np.tril_indices(n)], n, blocks)

    def dense(self) -> np.ndarray:
        if self._dense is None:
            full = np.zeros((self.n, self.n))
            rows, cols = np.tril_indices(self.n)
            full[rows, cols] = self.lower
            full[cols, rows] = self.lower
            full.setflags(write=False)
            self._dense = full
        return self._dense

    def __array__(self, dtype=None, copy=None):
        out = self.dense()
        if dtype is not None:
            out = out.astype(dtype)
        return out.copy() if copy else out

    @property
    def shape(self):
        return (self.n, self.n)

    def __matmul__(self, other):
        return self.dense() @ other

    def __repr__(self):
        return "SymmetricMatrix(n=%d)" % self.n


def _tabulate(basis, cell, rule):
    cached = getattr(basis, "cached_tabulation", None)
    if cached is not None:
        return cached(cell, rule)
    return basis.cell_tabulation(cell, rule.points)


def default_exactness(basis) -> int:
    return 2 * basis.degree + 2 * (basis.mesh.dim + 1)


def _rule(basis, quad_exactness, kind):
    r = basis.degree
    q = default_exactness(basis) if quad_exactness is None else int(quad_exactness)
    need = 2 * r - 2 if kind is FormKind.STIFFNESS else 2 * r
    if q < need:
        raise QuadratureTooWeak("%s needs exactness >= %d, got %d" % (kind.value, need, q))
    return simplex_quadrature(basis.mesh.dim, q)


def _blocks(basis):
    blocks = getattr(basis, "block_slices", None)
    return blocks() if blocks is not None else None


def assemble(basis, form=STIFFNESS, quad_exactness=None) -> SymmetricMatrix:
    """Assemble the Gram matrix of ``basis`` under the bilinear ``form``.

    Parameters
    ----------
    basis
        A frame or basis with ``mesh``, ``degree``, ``size`` and ``cell_tabulation``.
    form : BilinearFormSpec or str
    quad_exactness : int, optional
        Defaults to ``2r + 2(d + 1)``; must be at least ``2r`` (``2r - 2`` for
        pure stiffness).
    """
    if not isinstance(form, BilinearFormSpec):
        form = BilinearFormSpec(form)
    mesh = basis.mesh
    rule = _rule(basis, quad_exactness, form.kind)
    n = basis.size
    out = np.zeros((n, n))
    with_grad = form.kind is not FormKind.MASS
    with_mass = form.kind is not FormKind.STIFFNESS
    for cell in range(mesh.num_cells):
        dofs, vals, grads = _tabulate(basis, cell, rule)
        if len(dofs) == 0:
            continue
        w = rule.weights * (math.factorial(mesh.dim) * mesh.cell_volumes[cell])
        local = np.zeros((len(dofs), len(dofs)))
        if with_mass:
            coef = 1.0 if form.kind is FormKind.MASS else form.reaction
            local += coef * ((vals * w[:, None]).T @ vals)
        if with_grad:
            for k in range(mesh.dim):
                g = grads[:, :, k]
                local += form.diffusion * ((g * w[:, None]).T @ g)
        out[np.ix_(dofs, dofs)] += local
    return SymmetricMatrix.from_dense(out, _blocks(basis))


def assemble_cross(basis_a, basis_b, quad_exactness=None) -> np.ndarray:
    """Rectangular L² Gram ``<a_i, b_j>`` of two representations on one mesh."""
    if basis_a.mesh is not basis_b.mesh:
        raise DimensionMismatch("both representations must live on the same mesh object")
    mesh = basis_a.mesh
    r = max(basis_a.degree, basis_b.degree)
    q = 2 * r + 2 * (mesh.dim + 1) if quad_exactness is None else quad_exactness
    rule = simplex_quadrature(mesh.dim, q)
    out = np.zeros((basis_a.size, basis_b.size))
    for cell in range(mesh.num_cells):
        da, va, _ = _tabulate(basis_a, cell, rule)
        db, vb, _ = _tabulate(basis_b, cell, rule)
        if len(da) == 0 or len(db) == 0:
            continue
        w = rule.weights * (math.factorial(mesh.dim) * mesh.cell_volumes[cell])
        out[np.ix_(da, db)] += (va * w[:, None]).T @ vb
    return out


def assemble_load(basis, f, quad_exactness=None) -> np.ndarray:
    """Load vector ``(μ_h f)_i = <f, φ_i>``; ``f`` maps points ``(n, d)`` to values."""
    mesh = basis.mesh
    rule = _rule(basis, quad_exactness, FormKind.MASS)
    out = np.zeros(basis.size)
    for cell in range(mesh.num_cells):
        dofs, vals, _ = _tabulate(basis, cell, rule)
        if len(dofs) == 0:
            continue
        pts = mesh.cell_points(cell, rule.points)
        fx = np.asarray(f(pts), dtype=float).reshape(len(pts))
        w = rule.weights * (math.factorial(mesh.dim) * mesh.cell_volumes[cell])
        out[dofs] += vals.T @ (w * fx)
    return out


def evaluate_solution(basis, c, x) -> float:
    """``τ_h(c)(x) = Σ_j c_j φ_j(x)``."""
    c = np.asarray(c, dtype=float)
    if c.shape != (basis.size,):
        raise DimensionMismatch("coefficient vector has length %d, expected %d" % (c.size, basis.size))
    return basis.evaluate(x, c)


def l2_distance(basis, c, other, quad_exactness=None) -> float:
    """``||τ_h(c) - g||_{L²}`` where ``other`` is a callable ``g`` or a pair ``(basis2, c2)``."""
    mesh = basis.mesh
    c = np.asarray(c, dtype=float)
    q = 2 * basis.degree + 2 * (mesh.dim + 1) + 8 if quad_exactness is None else quad_exactness
    rule = simplex_quadrature(mesh.dim, q)
    total = 0.0
    for cell in range(mesh.num_cells):
        dofs, vals, _ = basis.cell_tabulation(cell, rule.points)
        uh = vals @ c[dofs] if len(dofs) else np.zeros(len(rule.points))
        if callable(other):
            g = np.asarray(other(mesh.cell_points(cell, rule.points)), dtype=float).reshape(-1)
        else:
            b2, c2 = other
            d2, v2, _ = b2.cell_tabulation(cell, rule.points)
            g = v2 @ np.asarray(c2)[d2] if len(d2) else np.zeros(len(rule.points))
        w = rule.weights * (math.factorial(mesh.dim) * mesh.cell_volumes[cell])
        total += float(np.dot(w, (uh - g) ** 2))
    return math.sqrt(total)


# text export -------------------------------------------------------------------


def write_matrix(path, matrix) -> None:
    """Header line ``n``, then row ``i`` of the lower triangle (``i + 1`` entries)."""
    if not isinstance(matrix, SymmetricMatrix):
        matrix = SymmetricMatrix.from_dense(matrix)
    a = matrix.dense()
    lines = [str(matrix.n)]
    for i in range(matrix.n):
        lines.append(" ".join(repr(float(v)) for v in a[i, : i + 1]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_matrix(path) -> SymmetricMatrix:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    n = int(lines[0])
    rows = [np.array(line.split(), dtype=float) for line in lines[1:n + 1]]
    for i, row in enumerate(rows):
        if len(row) != i + 1:
            raise DimensionMismatch("row %d has %d entries, expected %d" % (i, len(row), i + 1))
    if any(line.strip() for line in lines[n + 1:]):
        raise DimensionMismatch("trailing data after %d rows" % n)
    return SymmetricMatrix(np.concatenate(rows) if rows else np.zeros(0), n)
