"""Preconditioned conjugate gradients for (possibly singular) frame systems.

The frame stiffness matrix is singular whenever the frame is redundant,
but the system ``A c = μ(f)`` stays consistent.  CG started at ``c = 0``
keeps every iterate in the range of ``B A``, so the kernel component never
grows and ``τ_h(c)`` converges to the finite element solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, InconsistentRHS, MaxIterations, SingularLocalBlock
from .spectral import DEFAULT_TOLERANCES, SpectralReport, Tolerances, _report, sym_eigvals


class Preconditioner:
    """Symmetric positive definite operator ``B`` on coefficient space.

    ``B x = E A₀⁻¹ Eᵀ x + Σ_f A_ff⁻¹ x_f`` where ``E`` embeds the piecewise
    linear hat functions into the frame, ``A₀ = Eᵀ A E`` is the coarse
    matrix and ``A_ff`` are the diagonal blocks of ``A``.  Either part may be
    absent.
    """

    def __init__(self, n: int, embedding=None, coarse_factor=None, local_factors=()):
        self.n = n
        self.embedding = embedding
        self.coarse_factor = coarse_factor
        self.local_factors = list(local_factors)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise DimensionMismatch("vector has length %d, preconditioner order %d" % (x.shape[0], self.n))
        out = np.zeros_like(x)
        if self.embedding is not None:
            out += self.embedding @ scipy.linalg.cho_solve(self.coarse_factor, self.embedding.T @ x)
        for sl, fac in self.local_factors:
            out[sl] += scipy.linalg.cho_solve(fac, x[sl])
        return out

    __call__ = apply

    def as_matrix(self) -> np.ndarray:
        b = self.apply(np.eye(self.n))
        return 0.5 * (b + b.T)


class IdentityPreconditioner(Preconditioner):
    def __init__(self, n: int):
        super().__init__(n)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise DimensionMismatch("vector has length %d, preconditioner order %d" % (x.shape[0], self.n))
        return x.copy()

    __call__ = apply


PIVOT_TOL = 1e-12


def _factor(block, what):
    """Cholesky factor of ``block``; a squared pivot below ``PIVOT_TOL`` times
    the largest diagonal entry counts as singular, since a semidefinite block
    often factors without error in floating point."""
    try:
        fac = scipy.linalg.cho_factor(block, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularLocalBlock("%s is not positive definite" % what) from exc
    pivots = np.diag(fac[0]) ** 2
    if pivots.min() <= PIVOT_TOL * np.diag(block).max():
        raise SingularLocalBlock("%s is numerically singular (pivot ratio %.3g)"
                                 % (what, pivots.min() / np.diag(block).max()))
    return fac


def hat_embedding(frame) -> tuple[np.ndarray, list[int]]:
    """Frame coefficients of the hat function of every retained vertex.

    The degree-zero member of a vertex block is a constant multiple of the
    hat function ``λ_y``; its value at ``y`` gives that multiple.  Returns
    the ``N × n_vertices`` matrix and the vertex ids of its columns.
    """
    mesh = frame.mesh
    verts = [key[0] for key in frame.blocks if len(key) == 1]
    e = np.zeros((frame.size, len(verts)))
    for col, y in enumerate(verts):
        cell = min(mesh.vertex_cells(y))
        bary = np.zeros((1, mesh.dim + 1))
        bary[0, list(mesh.cells[cell]).index(y)] = 1.0
        dofs, vals, _ = frame.cell_tabulation(cell, bary)
        start = frame.blocks[(y,)][0]
        e[start, col] = 1.0 / vals[0, list(dofs).index(start)]
    return e, verts


def schwarz_from_blocks(a, blocks, embedding=None) -> Preconditioner:
    """Additive Schwarz operator for ``a`` from index ``blocks`` and an optional coarse embedding.

    ``blocks`` maps a label to a ``(start, stop)`` range; each diagonal block
    is inverted exactly, and so is the coarse matrix ``Eᵀ a E``.
    """
    a = np.asarray(a, dtype=float)
    factor = None
    if embedding is not None and embedding.shape[1]:
        a0 = embedding.T @ a @ embedding
        factor = _factor(0.5 * (a0 + a0.T), "coarse matrix")
    else:
        embedding = None
    factors = []
    for key, (start, stop) in blocks.items():
        sl = slice(start, stop)
        factors.append((sl, _factor(a[sl, sl], "block of %s" % (key,))))
    return Preconditioner(a.shape[0], embedding, factor, factors)


def build_schwarz(frame, a, coarse: bool = True, local: bool = True) -> Preconditioner:
    """Additive Schwarz preconditioner: exact coarse solve on the hat
    functions plus exact inverses of the subsimplex blocks of ``a``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (frame.size, frame.size):
        raise DimensionMismatch("matrix order %d does not match frame size %d" % (a.shape[0], frame.size))
    embedding = hat_embedding(frame)[0] if coarse else None
    return schwarz_from_blocks(a, frame.blocks if local else {}, embedding)


@dataclass
class SolveReport:
    """Outcome of :func:`pcg`.

    ``residuals[k]`` is ``||B(A c_k - b)||_{B⁻¹}`` with ``residuals[0]`` for
    ``c_0 = 0``; ``energies[k] = ½ c_kᵀ A c_k - bᵀ c_k``.
    """

    iterations: int
    residuals: list[float]
    converged: bool
    c: np.ndarray
    energies: list[float] = field(default_factory=list)
    iterates: list[np.ndarray] | None = None

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "residuals": [float(v) for v in self.residuals],
        }


def pcg(a, b, precond=None, tol: float = 1e-10, maxit: int | None = None,
        keep_iterates: bool = False) -> SolveReport:
    """Preconditioned CG from ``c = 0`` on a symmetric semidefinite system.

    Stops once ``||B(Ac - b)||_{B⁻¹} <= tol ||Bb||_{B⁻¹}``.

    Raises
    ------
    MaxIterations
        ``maxit`` steps without convergence (the partial report is attached
        as ``exc.report``).
    InconsistentRHS
        A search direction with zero curvature while the residual is still
        above tolerance, i.e. ``b`` has a component outside the range of ``A``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if a.shape != (n, n):
        raise DimensionMismatch("matrix is %s, right-hand side has length %d" % (a.shape, n))
    precond = IdentityPreconditioner(n) if precond is None else precond
    maxit = max(10 * n, 50) if maxit is None else maxit
    anorm = float(np.abs(a).sum(axis=1).max()) if n else 0.0

    c = np.zeros(n)
    r = b.copy()
    z = precond.apply(r)
    rz = float(r @ z)
    res0 = math.sqrt(max(rz, 0.0))
    residuals, energies = [res0], [0.0]
    iterates = [c.copy()] if keep_iterates else None
    report = SolveReport(0, residuals, res0 == 0.0, c, energies, iterates)
    if res0 == 0.0:
        return report
    target = tol * res0
    p = z.copy()
    for k in range(1, maxit + 1):
        q = a @ p
        curv = float(p @ q)
        if curv <= 1e-14 * anorm * float(p @ p):
            raise InconsistentRHS(
                "zero curvature at step %d with residual %.3g > %.3g" % (k, residuals[-1], target))
        alpha = rz / curv
        c += alpha * p
        r -= alpha * q
        z = precond.apply(r)
        rz_new = float(r @ z)
        residuals.append(math.sqrt(max(rz_new, 0.0)))
        energies.append(-0.5 * float(c @ (b + r)))
        if keep_iterates:
            iterates.append(c.copy())
        report.iterations = k
        if residuals[-1] <= target:
            report.converged = True
            return report
        p = z + (rz_new / rz) * p
        rz = rz_new
    exc = MaxIterations("no convergence in %d iterations (residual %.3g > %.3g)" % (maxit, residuals[-1], target))
    exc.report = report
    raise exc


def spectrum_of_preconditioned(a, precond, tolerances: Tolerances = DEFAULT_TOLERANCES) -> SpectralReport:
    """Positive spectrum of ``B A``, i.e. of ``A v = θ B⁻¹ v`` off the kernel.

    With ``B = L Lᵀ`` the nonzero eigenvalues of ``B A`` are those of ``Lᵀ A L``.
    """
    a = np.asarray(a, dtype=float)
    bmat = precond.as_matrix() if isinstance(precond, Preconditioner) else np.asarray(precond, dtype=float)
    try:
        lower = scipy.linalg.cholesky(bmat, lower=True)
    except np.linalg.LinAlgError as exc:
        from .errors import MNotDefinite

        raise MNotDefinite("preconditioner is not positive definite") from exc
    s = lower.T @ a @ lower
    rep = sym_eigvals(0.5 * (s + s.T), tolerances)
    w = rep.eigenvalues[rep.eigenvalues > tolerances.rank_tol * rep.lam_max]
    return _report(w, None, tolerances.rank_tol, rep.backward_error)
