"""The global frame ``Φ = {Φ_f}`` of ``P_r(T_h)`` and companion bases.

Every subsimplex ``f`` of dimension ``m < d`` contributes the functions
``λ_f^*[(Πλ)_m J_s]`` with ``J_s`` the orthonormal simplex Jacobi family of
degree ``r - m - 1``; every cell contributes ``(Πλ)_d q_s`` with ``q_s`` the
interior orthonormal family of degree ``r - d - 1``.  Each function is scaled
to unit L² norm, which makes every block ``Φ_f`` exactly orthonormal.

All basis-like objects here share one evaluation protocol used by assembly:
``cell_tabulation(cell, bary) -> (dofs, values, gradients)``.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CellMismatch, DegenerateProbe, InvalidIndex, UnsupportedMesh
from .mesh import LOCATE_TOL, SimplicialMesh, Subsimplex, generate_mesh, macroelement
from .polylib import (
    bernstein_derivative,
    bernstein_eval,
    interior_orthobasis,
    jacobi_table,
    multi_indices,
    power_basis_derivative,
    power_basis_eval,
    simplex_jacobi_family,
    simplex_quadrature,
)


class BoundaryCondition(str, enum.Enum):
    NATURAL = "natural"
    ESSENTIAL = "essential"


class BasisKind1D(str, enum.Enum):
    JACOBI = "jacobi_bubble"
    BERNSTEIN = "bernstein_interior"
    POWER = "power_interior"


def local_dim(m: int, d: int, r: int) -> int:
    """Dimension ``N_f`` of the local space of an ``m``-subsimplex in a ``d``-mesh."""
    if r < 1:
        raise ValueError("r must be >= 1")
    if m < d:
        return math.comb(r, m + 1)
    return math.comb(r - 1, d)


@dataclass(frozen=True)
class FrameIndex:
    f: Subsimplex
    s: tuple[int, ...]
    position: int


class _Tabulating:
    """Shared point evaluation for objects providing ``cell_tabulation``."""

    mesh: SimplicialMesh
    size: int

    def cell_tabulation(self, cell, bary):  # pragma: no cover - interface
        raise NotImplementedError

    def evaluate(self, x, coefficients=None):
        """Values of all functions at point ``x`` (or ``Σ c_j φ_j`` if given)."""
        x = np.asarray(x, dtype=float).reshape(self.mesh.dim)
        cell = self.mesh.locate(x)
        lam = np.clip(self.mesh.barycentric(cell, x), 0.0, 1.0)
        dofs, vals, _ = self.cell_tabulation(cell, lam[None, :])
        out = np.zeros(self.size)
        out[dofs] = vals[0]
        if coefficients is None:
            return out
        return float(out @ coefficients)


class GlobalFrame(_Tabulating):
    """The frame ``Φ`` of ``P_r(T_h)`` built from local orthonormal blocks.

    Parameters
    ----------
    mesh : SimplicialMesh
    r : int
        Polynomial degree, ``r >= 1``.
    bc : {"natural", "essential"}
        With ``"essential"`` every subsimplex lying on the boundary is dropped.
    """

    def __init__(self, mesh: SimplicialMesh, r: int, bc="natural"):
        if r < 1:
            raise ValueError("r must be >= 1")
        self.mesh = mesh
        self.degree = r
        self.bc = BoundaryCondition(bc)
        d = mesh.dim
        self._families = {}
        for m in range(d):
            if r - m - 1 >= 0:
                self._families[m] = simplex_jacobi_family(d, m, r - m - 1)
        if r - d - 1 >= 0:
            self._families[d] = interior_orthobasis(d, r - d - 1)

        indices: list[FrameIndex] = []
        blocks: dict[tuple[int, ...], tuple[int, int]] = {}
        norms = []
        for f in mesh.all_simplices():
            if self.bc is BoundaryCondition.ESSENTIAL and f.on_boundary:
                continue
            n_f = local_dim(f.m, d, r)
            if n_f == 0:
                continue
            fam = self._families[f.m]
            assert len(fam) == n_f
            start = len(indices)
            scale = 1.0 / math.sqrt(self.change_of_variables_constant(f))
            for s in fam.indices:
                indices.append(FrameIndex(f, tuple(s), len(indices)))
                norms.append(scale)
            blocks[f.vertices] = (start, len(indices))
        self.indices = indices
        self.blocks = blocks
        self.normalization = np.array(norms)
        self.normalization.setflags(write=False)
        self.size = len(indices)
        self._block_of_cell = self._cell_blocks()
        self._cache: dict = {}

    def change_of_variables_constant(self, f: Subsimplex) -> float:
        """Exact ``c_f`` with ``∫_{Ω_f} λ_f^*φ = c_f ∫_{S_m^c} φ b^{d-m-1}``.

        For ``m = d`` this is ``d! |f|`` (so that ``∫_f g(λ) = c_f ∫_{S_d} g``).
        Each cell ``T ⊃ f`` contributes ``d! |T| / (d - m - 1)!``: the pushed
        forward Lebesgue measure of the coordinates ``λ_f`` is a Dirichlet law.
        """
        d = self.mesh.dim
        if f.m == d:
            return math.factorial(d) * float(self.mesh.cell_volumes[self.mesh.simplex_index(f)])
        cells = self.mesh.cells_containing(f)
        vol = float(self.mesh.cell_volumes[list(cells)].sum())
        return math.factorial(d) * vol / math.factorial(d - f.m - 1)

    def _cell_blocks(self):
        out = []
        for cell in self.mesh.cells:
            cell = [int(v) for v in cell]
            entries = []
            for m in range(self.mesh.dim + 1):
                for pos in itertools.combinations(range(len(cell)), m + 1):
                    key = tuple(cell[p] for p in pos)
                    if key in self.blocks:
                        entries.append((key, pos) + self.blocks[key])
            out.append(sorted(entries, key=lambda e: e[2]))
        return out

    def block_slices(self) -> list[slice]:
        return [slice(a, b) for a, b in self.blocks.values()]

    def block_of(self, f) -> slice:
        key = tuple(f.vertices) if isinstance(f, Subsimplex) else tuple(sorted(f))
        a, b = self.blocks[key]
        return slice(a, b)

    def cell_tabulation(self, cell: int, bary):
        """Frame functions supported on ``cell`` at barycentric points ``bary``.

        Returns global positions, values ``(npts, nloc)`` and physical
        gradients ``(npts, nloc, d)``.
        """
        bary = np.atleast_2d(np.asarray(bary, dtype=float))
        d = self.mesh.dim
        grads_lam = self.mesh.barycentric_gradients[cell]  # (d+1, d)
        dof_chunks, val_chunks, grad_chunks = [], [], []
        for key, pos, start, stop in self._block_of_cell[cell]:
            m = len(key) - 1
            fam = self._families[m]
            lamf = bary[:, list(pos)]
            # interior family ignores λ_0 itself, but the bubble (Πλ) uses all coordinates
            p, dp = fam.evaluate(lamf, derivative=True)
            bub = np.prod(lamf, axis=1)
            dbub = np.empty_like(lamf)
            for j in range(m + 1):
                dbub[:, j] = np.prod(np.delete(lamf, j, axis=1), axis=1)
            vals = bub[:, None] * p
            dlam = dbub[:, None, :] * p[:, :, None] + bub[:, None, None] * dp  # (npts, nf, m+1)
            grads = dlam @ grads_lam[list(pos)]  # (npts, nf, d)
            scale = self.normalization[start:stop]
            dof_chunks.append(np.arange(start, stop))
            val_chunks.append(vals * scale)
            grad_chunks.append(grads * scale[None, :, None])
        if not dof_chunks:
            npts = len(bary)
            return np.zeros(0, dtype=int), np.zeros((npts, 0)), np.zeros((npts, 0, d))
        return (np.concatenate(dof_chunks), np.concatenate(val_chunks, axis=1),
                np.concatenate(grad_chunks, axis=1))

    def cached_tabulation(self, cell: int, rule):
        """:meth:`cell_tabulation` at a quadrature rule's points, memoized."""
        key = (cell, rule.m, rule.exactness)
        hit = self._cache.get(key)
        if hit is None:
            hit = self.cell_tabulation(cell, rule.points)
            self._cache[key] = hit
        return hit

    def __len__(self):
        return self.size

    def __repr__(self):
        return "GlobalFrame(r=%d, bc=%s, N=%d, blocks=%d)" % (
            self.degree, self.bc.value, self.size, len(self.blocks))


def enumerate_frame(mesh: SimplicialMesh, r: int, bc="natural") -> GlobalFrame:
    return GlobalFrame(mesh, r, bc)


def _index(frame, idx) -> int:
    if isinstance(idx, FrameIndex):
        idx = idx.position
    if not 0 <= int(idx) < frame.size:
        raise InvalidIndex(idx)
    return int(idx)


def frame_eval(frame: GlobalFrame, idx, x) -> float:
    """Value of one frame function at a point ``x`` of the closed domain."""
    i = _index(frame, idx)
    return float(frame.evaluate(x)[i])


def frame_grad(frame: GlobalFrame, idx, x, cell: int) -> np.ndarray:
    """Gradient of one frame function on ``cell`` at a point ``x`` of that cell."""
    i = _index(frame, idx)
    mesh = frame.mesh
    lam = mesh.barycentric(cell, np.asarray(x, dtype=float).reshape(mesh.dim))
    if np.any(lam < -LOCATE_TOL):
        raise CellMismatch("point %r is not in cell %d" % (tuple(np.ravel(x)), cell))
    dofs, _, grads = frame.cell_tabulation(cell, lam[None, :])
    hit = np.nonzero(dofs == i)[0]
    if len(hit) == 0:
        return np.zeros(mesh.dim)
    return grads[0, hit[0]].copy()


def pullback_scaling(mesh: SimplicialMesh, f, probe, exactness: int = 20) -> float:
    """Measure ``c_f`` in ``∫_{Ω_f} λ_f^*φ dx = c_f ∫_{S_m^c} φ(λ) b(λ)^{d-m-1} dλ``.

    ``probe`` maps points of shape ``(n, m + 1)`` to values.  Both integrals
    are computed by quadrature of the given exactness (plus the weight degree).
    """
    if not isinstance(f, Subsimplex):
        f = mesh.subsimplex(f)
    d, m = mesh.dim, f.m
    if m >= d:
        raise ValueError("pull-back scaling is defined for m < d")
    mac = macroelement(mesh, f)
    cell_rule = simplex_quadrature(d, exactness)
    num = 0.0
    for cell in mac.cells:
        verts = [int(v) for v in mesh.cells[cell]]
        lamf = cell_rule.points[:, [verts.index(v) for v in f.vertices]]
        jac = math.factorial(d) * mesh.cell_volumes[cell]
        num += jac * float(np.dot(cell_rule.weights, probe(lamf)))
    ref_rule = simplex_quadrature(m + 1, exactness + d - m - 1)
    lam = ref_rule.cartesian
    den = float(np.dot(ref_rule.weights, probe(lam) * (1 - lam.sum(axis=1)) ** (d - m - 1)))
    if abs(den) < 1e-14 * max(1.0, abs(num)):
        raise DegenerateProbe("probe has (near) zero weighted integral on the reference simplex")
    return num / den


# 1D comparison bases -------------------------------------------------------------


class ComparisonBasis1D(_Tabulating):
    """One of the three bases of ``P̊_r(-1, 1)`` on a single interval.

    ``jacobi_bubble`` is ``(1 - x^2) J_s^{2,2}(x)``, ``s = 0..r-2`` (already
    L² orthonormal); ``bernstein_interior`` is ``b_{s,r}((x + 1)/2)``,
    ``1 <= s <= r-1``; ``power_interior`` is ``(1 - x^2) x^k``, ``k = 0..r-2``.
    ``include_boundary=True`` (Bernstein only) keeps ``s = 0`` and ``s = r``.
    """

    def __init__(self, kind, r: int, include_boundary: bool = False, mesh=None):
        self.kind = BasisKind1D(kind)
        if r < 2:
            raise ValueError("comparison bases need r >= 2")
        if include_boundary and self.kind is not BasisKind1D.BERNSTEIN:
            raise UnsupportedMesh("only the Bernstein basis has a no-boundary-condition variant")
        if mesh is None:
            mesh = generate_mesh("interval", 1, a=-1.0, b=1.0)
        if mesh.dim != 1 or mesh.num_cells != 1 or not np.allclose(mesh.vertices[:, 0], [-1, 1]):
            raise UnsupportedMesh("comparison bases live on the single interval (-1, 1)")
        self.mesh = mesh
        self.degree = r
        self.include_boundary = include_boundary
        self.bc = BoundaryCondition.NATURAL if include_boundary else BoundaryCondition.ESSENTIAL
        if self.kind is BasisKind1D.BERNSTEIN:
            self._range = list(range(0, r + 1)) if include_boundary else list(range(1, r))
        else:
            self._range = list(range(r - 1))
        self.size = len(self._range)

    def _values(self, x):
        r = self.degree
        if self.kind is BasisKind1D.JACOBI:
            J, dJ = jacobi_table(2, 2, r - 2, x, derivative=True)
            bub = 1 - x * x
            vals = (bub * J).T
            ders = (bub * dJ - 2 * x * J).T
        elif self.kind is BasisKind1D.BERNSTEIN:
            t = (x + 1) / 2
            vals = np.stack([bernstein_eval(r, s, t) for s in self._range], axis=1)
            ders = np.stack([bernstein_derivative(r, s, t) / 2 for s in self._range], axis=1)
        else:
            vals = np.stack([power_basis_eval(k + 2, x) for k in self._range], axis=1)
            ders = np.stack([power_basis_derivative(k + 2, x) for k in self._range], axis=1)
        return vals, ders

    def cell_tabulation(self, cell: int, bary):
        bary = np.atleast_2d(np.asarray(bary, dtype=float))
        x = self.mesh.cell_points(cell, bary)[:, 0]
        vals, ders = self._values(x)
        return np.arange(self.size), vals, ders[:, :, None]


def build_1d_comparison_basis(kind, r: int, include_boundary: bool = False) -> ComparisonBasis1D:
    return ComparisonBasis1D(kind, r, include_boundary)


# standard C0 basis ------------------------------------------------------------------


class StandardBasis(_Tabulating):
    """Global C⁰ Bernstein basis of ``P_r(T_h)`` (a genuine basis, no redundancy).

    Degrees of freedom are the multisets of ``r`` mesh vertices contained in
    some cell; on each cell the function is ``r!/α! λ^α``.  Used as the
    reference representation for frame checks and the nodal-basis solve.
    """

    def __init__(self, mesh: SimplicialMesh, r: int, bc="natural"):
        if r < 1:
            raise ValueError("r must be >= 1")
        self.mesh = mesh
        self.degree = r
        self.bc = BoundaryCondition(bc)
        d = mesh.dim
        self._local = np.array([a for a in multi_indices(d + 1, r) if sum(a) == r], dtype=int)
        self._coef = np.array([math.factorial(r) / np.prod([math.factorial(int(k)) for k in a])
                               for a in self._local])
        keys = {}
        cell_dofs = []
        for cell in mesh.cells:
            row = []
            for a in self._local:
                key = tuple((int(v), int(k)) for v, k in zip(cell, a) if k > 0)
                row.append(key)
                keys.setdefault(key, None)
            cell_dofs.append(row)
        order = sorted(keys, key=lambda k: (len(k), k))
        if self.bc is BoundaryCondition.ESSENTIAL:
            order = [k for k in order if not mesh.subsimplex([v for v, _ in k]).on_boundary]
        self.keys = order
        pos = {k: i for i, k in enumerate(order)}
        self._cell_dofs = []
        for row in cell_dofs:
            keep = [(j, pos[k]) for j, k in enumerate(row) if k in pos]
            self._cell_dofs.append((np.array([j for j, _ in keep], dtype=int),
                                    np.array([p for _, p in keep], dtype=int)))
        self.size = len(order)

    def vertex_dof(self, v: int) -> int:
        return self.keys.index(((int(v), self.degree),))

    def cell_tabulation(self, cell: int, bary):
        bary = np.atleast_2d(np.asarray(bary, dtype=float))
        local, dofs = self._cell_dofs[cell]
        alpha = self._local[local]  # (nl, d+1)
        coef = self._coef[local]
        pw = bary[:, None, :] ** alpha[None, :, :]  # (npts, nl, d+1)
        vals = coef * np.prod(pw, axis=2)
        dlam = np.empty(pw.shape)
        for j in range(bary.shape[1]):
            a_j = alpha[:, j]
            lower = np.where(a_j > 0, bary[:, None, j] ** np.maximum(a_j - 1, 0), 0.0)
            dlam[:, :, j] = coef * a_j * lower * np.prod(np.delete(pw, j, axis=2), axis=2)
        grads = dlam @ self.mesh.barycentric_gradients[cell]
        return dofs, vals, grads

    def __len__(self):
        return self.size


def standard_dimension(mesh: SimplicialMesh, r: int, bc="natural") -> int:
    """``dim P_r(T_h)`` (or of its zero-trace subspace) from subsimplex counts."""
    bc = BoundaryCondition(bc)
    total = 0
    for m in range(mesh.dim + 1):
        count = mesh.num_simplices(m)
        if bc is BoundaryCondition.ESSENTIAL:
            count -= int(mesh.boundary_flags(m).sum())
        total += count * math.comb(r - 1, m)
    return total
