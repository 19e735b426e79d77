"""Dense symmetric eigenvalue problems and the condition numbers built on them.

Eigenvalues come from LAPACK (``numpy.linalg.eigh``); every pair is checked
for backward error before a report is returned.  Generalized problems are
reduced by a Cholesky congruence.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, GapTooSmall, MNotDefinite, NoConvergence


@dataclass(frozen=True)
class Tolerances:
    eig_residual_tol: float = 1e-11
    rank_tol: float = 1e-10

    def __post_init__(self):
        for name in ("eig_residual_tol", "rank_tol"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError("%s must lie in (0, 1), got %r" % (name, v))


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class SpectralReport:
    """Sorted spectrum plus the derived extremes and condition numbers.

    ``lam_min_pos`` is the smallest eigenvalue above ``rank_tol * lam_max``
    and ``kappa_pos = lam_max / lam_min_pos``.
    """

    eigenvalues: np.ndarray
    lam_min: float
    lam_max: float
    lam_min_pos: float
    rank: int
    kappa: float
    kappa_pos: float
    rank_tol: float
    backward_error: float = 0.0
    eigenvectors: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "lam_min": self.lam_min,
            "lam_max": self.lam_max,
            "lam_min_pos": self.lam_min_pos,
            "rank": self.rank,
            "kappa": self.kappa,
            "kappa_pos": self.kappa_pos,
            "rank_tol": self.rank_tol,
            "backward_error": self.backward_error,
        }


def _as_array(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch("expected a square matrix, got shape %s" % (a.shape,))
    return a


def _report(w, v, rank_tol, backward_error) -> SpectralReport:
    lam_max = float(w[-1])
    lam_min = float(w[0])
    thresh = rank_tol * lam_max
    positive = w[w > thresh]
    lam_min_pos = float(positive[0]) if len(positive) else float("nan")
    kappa = lam_max / lam_min if lam_min > 0 else float("inf")
    return SpectralReport(
        eigenvalues=w,
        lam_min=lam_min,
        lam_max=lam_max,
        lam_min_pos=lam_min_pos,
        rank=int(len(positive)),
        kappa=kappa,
        kappa_pos=lam_max / lam_min_pos if len(positive) else float("nan"),
        rank_tol=rank_tol,
        backward_error=backward_error,
        eigenvectors=v,
    )


def sym_eigvals(m, tolerances: Tolerances = DEFAULT_TOLERANCES, vectors: bool = False) -> SpectralReport:
    """Full spectrum of a symmetric matrix with a backward-error check.

    Only the lower triangle is read.  Raises :class:`NoConvergence` if any
    pair has ``||Mv - λv|| > eig_residual_tol * ||M||``.
    """
    a = _as_array(m)
    if a.shape[0] == 0:
        raise DimensionMismatch("empty matrix")
    try:
        w, v = np.linalg.eigh(a, UPLO="L")
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    sym = np.tril(a) + np.tril(a, -1).T
    norm = max(abs(w[0]), abs(w[-1]))
    if not np.isfinite(norm):
        raise NoConvergence("non-finite eigenvalues")
    resid = np.linalg.norm(sym @ v - v * w, axis=0)
    backward = float(resid.max() / norm) if norm > 0 else float(resid.max())
    if backward > tolerances.eig_residual_tol:
        raise NoConvergence("eigenpair backward error %.3g exceeds %.3g" % (backward, tolerances.eig_residual_tol))
    return _report(w, v if vectors else None, tolerances.rank_tol, backward)


def frame_condition(gram, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """``K(Φ) = λ_max / λ_min⁺`` of a frame Gram matrix.

    Raises :class:`GapTooSmall` when the smallest retained eigenvalue is
    within a factor 10 of the rank threshold, i.e. when redundancy cannot be
    told apart from near-dependence.
    """
    return frame_report(gram, tolerances).kappa_pos


def frame_report(gram, tolerances: Tolerances = DEFAULT_TOLERANCES) -> SpectralReport:
    rep = sym_eigvals(gram, tolerances)
    if not rep.rank or rep.lam_min_pos < 10 * tolerances.rank_tol * rep.lam_max:
        raise GapTooSmall(
            "smallest positive eigenvalue %.3g is not separated from the threshold %.3g"
            % (rep.lam_min_pos, tolerances.rank_tol * rep.lam_max)
        )
    return rep


def cholesky_lower(m) -> np.ndarray:
    """Lower Cholesky factor; :class:`MNotDefinite` if ``m`` is not SPD."""
    a = _as_array(m)
    try:
        return scipy.linalg.cholesky(a, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise MNotDefinite("matrix is not positive definite: %s" % exc) from exc


def congruence(a, lower) -> np.ndarray:
    """``L⁻¹ A L⁻ᵀ`` symmetrized exactly."""
    x = scipy.linalg.solve_triangular(lower, _as_array(a), lower=True)
    c = scipy.linalg.solve_triangular(lower, x.T, lower=True)
    return 0.5 * (c + c.T)


def generalized_spectrum(a, m, tolerances: Tolerances = DEFAULT_TOLERANCES,
                         positive_part: bool = False) -> SpectralReport:
    """Spectrum of ``A v = λ M v`` with ``M`` SPD.

    With ``positive_part`` only eigenvalues above the rank threshold are kept,
    so ``kappa`` of the result is the ratio over the positive part.
    """
    a = _as_array(a)
    if a.shape != _as_array(m).shape:
        raise DimensionMismatch("A and M differ in shape")
    rep = sym_eigvals(congruence(a, cholesky_lower(m)), tolerances)
    if positive_part:
        w = rep.eigenvalues[rep.eigenvalues > tolerances.rank_tol * rep.lam_max]
        rep = _report(w, None, tolerances.rank_tol, rep.backward_error)
    return rep


def generalized_condition(a, m, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """``κ(M⁻¹A)``; for semidefinite ``A`` the ratio over the positive part."""
    return generalized_spectrum(a, m, tolerances).kappa_pos


@dataclass(frozen=True)
class ProductBound:
    lhs: float
    rhs: float
    holds: bool
    lam_max_holds: bool
    lam_min_holds: bool
    detail: dict


def verify_product_bound(a, m, tolerances: Tolerances = DEFAULT_TOLERANCES,
                         slack: float = 1e-9) -> ProductBound:
    """Check ``κ(A) <= κ(M⁻¹A) κ(M)`` and the two eigenvalue-level bounds.

    ``slack`` is a relative allowance for roundoff; equality cases (``M = I``)
    would otherwise flip on the last bit.
    """
    ra = sym_eigvals(a, tolerances)
    rm = sym_eigvals(m, tolerances)
    rg = generalized_spectrum(a, m, tolerances)
    lhs = ra.kappa
    rhs = rg.kappa * rm.kappa
    up = ra.lam_max <= rg.lam_max * rm.lam_max * (1 + slack)
    low = ra.lam_min >= rg.lam_min * rm.lam_min * (1 - slack)
    ok = lhs <= rhs * (1 + slack)
    detail = {
        "lam_max_A": ra.lam_max, "lam_min_A": ra.lam_min,
        "lam_max_M": rm.lam_max, "lam_min_M": rm.lam_min,
        "lam_max_IA": rg.lam_max, "lam_min_IA": rg.lam_min,
    }
    return ProductBound(lhs, rhs, bool(ok and up and low), bool(up), bool(low), detail)


def frame_operator_spectrum(frame, nodal, tolerances: Tolerances = DEFAULT_TOLERANCES) -> SpectralReport:
    """Spectrum of the frame operator ``S u = Σ_i <u, φ_i> φ_i`` on ``P_r``.

    ``nodal`` is any basis of the same space.  It is orthonormalized through
    the Cholesky factor of its mass matrix and ``S`` is written in that
    orthonormal basis.  ``ψ = L⁻¹ b`` gives ``<φ_i, ψ_k> = (C L⁻ᵀ)_{ik}``
    with ``C`` the cross Gram, so ``S = Tᵀ T`` with ``T = C L⁻ᵀ``.  The
    extremes of ``S`` are the optimal frame bounds, with no rank threshold.
    """
    from .assembly import MASS, assemble, assemble_cross

    cross = assemble_cross(frame, nodal)
    lower = cholesky_lower(assemble(nodal, MASS).dense())
    t = scipy.linalg.solve_triangular(lower, cross.T, lower=True).T
    s = t.T @ t
    return sym_eigvals(0.5 * (s + s.T), tolerances)


@dataclass(frozen=True)
class DecompositionConstants:
    """Measured constants of a block decomposition of a frame Gram matrix.

    ``a`` and ``b`` are the best constants in ``a ||Σ u_j||² <= Σ ||u_j||²``
    and ``Σ ||u_j||² <= b ||u||²`` (for the best decomposition); ``alphas``
    and ``betas`` are the extreme eigenvalues of each diagonal block.
    """

    a: float
    b: float
    alphas: np.ndarray
    betas: np.ndarray
    kappa_frame: float

    @property
    def local_kappa_max(self) -> float:
        return float(np.max(self.betas / self.alphas))

    @property
    def scaling_factor(self) -> float:
        return float(self.alphas.max() / self.alphas.min())

    @property
    def bound(self) -> float:
        return self.b / self.a * self.local_kappa_max * self.scaling_factor

    @property
    def holds(self) -> bool:
        return bool(self.kappa_frame <= self.bound * (1 + 1e-9))


def decomposition_constants(gram, blocks, tolerances: Tolerances = DEFAULT_TOLERANCES) -> DecompositionConstants:
    """Best stability constants of the block splitting ``blocks`` of ``gram``.

    With ``D`` the block diagonal of ``M``, ``a = 1/λ_max(D^-1/2 M D^-1/2)``
    and ``b = 1/λ_min⁺`` of the same matrix.
    """
    g = _as_array(gram)
    lower = np.zeros_like(g)
    alphas, betas = [], []
    for sl in blocks:
        blk = g[sl, sl]
        w = sym_eigvals(blk, tolerances).eigenvalues
        alphas.append(w[0])
        betas.append(w[-1])
        lower[sl, sl] = cholesky_lower(blk)
    scaled = frame_report(congruence(g, lower), tolerances)
    return DecompositionConstants(
        a=1.0 / scaled.lam_max,
        b=1.0 / scaled.lam_min_pos,
        alphas=np.array(alphas),
        betas=np.array(betas),
        kappa_frame=frame_condition(g, tolerances),
    )
