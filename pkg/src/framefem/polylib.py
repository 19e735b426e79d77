"""Orthogonal polynomials on intervals and simplices, plus simplex quadrature.

Single-variate families are orthonormal Jacobi polynomials ``J_n^{α,β}`` on
``[-1, 1]`` evaluated by the orthonormal three-term recurrence, with the
starting value fixed by the Gamma-function norm.  Multivariate families on
the corner simplex ``S_m^c`` are products of *homogenized* shifted Jacobi
factors ``b^n J̃_n(t / b)``; these are evaluated by a recurrence in
``(t, b)`` so that ``b = 0`` needs no division.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, roots_jacobi, roots_legendre

from .errors import (
    IndexOutOfRange,
    InvalidDimensions,
    InvalidParameters,
    PointOutsideSimplex,
    UnsupportedDegree,
)

#: Largest degree of single-variate families.
MAX_DEGREE_1D = 120
#: Largest total degree of multivariate families.
MAX_DEGREE_MULTI = 20
#: Largest quadrature exactness per simplex dimension.
MAX_EXACTNESS = {0: 10**9, 1: 600, 2: 120, 3: 80}

_SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class JacobiWeight:
    """Weight ``(1 - x)^alpha (1 + x)^beta`` on ``[-1, 1]``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha <= -1 or self.beta <= -1:
            raise InvalidParameters("Jacobi parameters must exceed -1, got (%r, %r)"
                                    % (self.alpha, self.beta))


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference ``m``-simplex.

    ``points`` holds barycentric coordinates, shape ``(n, m + 1)``; column 0 is
    ``1 - sum`` of the Cartesian coordinates stored in columns ``1..m``.
    Weights sum to the reference volume ``1 / m!``.
    """

    m: int
    points: np.ndarray
    weights: np.ndarray
    exactness: int

    @property
    def cartesian(self) -> np.ndarray:
        return self.points[:, 1:]


# single-variate Jacobi -------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _recurrence(alpha: float, beta: float, nmax: int):
    """Recurrence data ``(p0, diag, offdiag)`` for orthonormal ``J^{α,β}``.

    ``x p_n = a_{n+1} p_{n+1} + b_n p_n + a_n p_{n-1}``; returns ``p_0`` and
    arrays ``b[0..nmax]`` and ``a[0..nmax+1]`` (with ``a[0] = 0``).
    """
    JacobiWeight(alpha, beta)
    ab = alpha + beta
    log_h0 = (ab + 1) * math.log(2.0) + gammaln(alpha + 1) + gammaln(beta + 1) - gammaln(ab + 2)
    p0 = math.exp(-0.5 * log_h0)
    n = np.arange(nmax + 1, dtype=float)
    b = np.empty(nmax + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        b[:] = (beta**2 - alpha**2) / ((2 * n + ab) * (2 * n + ab + 2))
    b[0] = (beta - alpha) / (ab + 2)
    k = np.arange(1, nmax + 2, dtype=float)
    num = 4 * k * (k + alpha) * (k + beta) * (k + ab)
    den = (2 * k + ab) ** 2 * (2 * k + ab + 1) * (2 * k + ab - 1)
    a = np.zeros(nmax + 2)
    a[1:] = np.sqrt(num / den)
    if abs(ab) < 1e-14 or abs(ab + 1) < 1e-14:
        # (k + ab) / (2k + ab - 1) is 0/0 at k = 1 when ab = -1; ab = 0 is regular
        a[1] = math.sqrt(4 * (1 + alpha) * (1 + beta) / ((2 + ab) ** 2 * (3 + ab)))
    for arr in (a, b):
        arr.setflags(write=False)
    return p0, b, a


def _check_degree(n, cap=MAX_DEGREE_1D):
    if n < 0:
        raise InvalidParameters("degree must be nonnegative, got %d" % n)
    if n > cap:
        raise UnsupportedDegree("degree %d above cap %d" % (n, cap))


def jacobi_table(alpha: float, beta: float, nmax: int, x, derivative: bool = False):
    """Values of ``J_0..J_nmax`` (orthonormal, weight ``(1-x)^α (1+x)^β``).

    Returns an array of shape ``(nmax + 1,) + x.shape``; with
    ``derivative=True`` also the derivatives.
    """
    _check_degree(nmax)
    p0, b, a = _recurrence(float(alpha), float(beta), nmax)
    x = np.asarray(x, dtype=float)
    vals = np.empty((nmax + 1,) + x.shape)
    ders = np.zeros_like(vals)
    vals[0] = p0
    if nmax >= 1:
        vals[1] = (x - b[0]) * vals[0] / a[1]
        ders[1] = vals[0] / a[1]
    for n in range(1, nmax):
        vals[n + 1] = ((x - b[n]) * vals[n] - a[n] * vals[n - 1]) / a[n + 1]
        ders[n + 1] = (vals[n] + (x - b[n]) * ders[n] - a[n] * ders[n - 1]) / a[n + 1]
    return (vals, ders) if derivative else vals


def jacobi_eval(alpha: float, beta: float, n: int, x):
    """Orthonormal Jacobi polynomial ``J_n^{α,β}(x)`` on ``[-1, 1]``."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.abs(x_arr) > 1 + 1e-12):
        raise InvalidParameters("x must lie in [-1, 1]")
    out = jacobi_table(alpha, beta, n, x_arr)[n]
    return float(out) if out.ndim == 0 else out


def shifted_jacobi_eval(alpha: float, beta: float, n: int, xi):
    """``J̃_n^{α,β}(ξ) = J_n^{α,β}(2ξ - 1)`` on ``[0, 1]``.

    Orthogonal under ``(1 - ξ)^α ξ^β`` with squared norm ``2^{-α-β-1}``.
    """
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr < -1e-12) or np.any(xi_arr > 1 + 1e-12):
        raise InvalidParameters("xi must lie in [0, 1]")
    return jacobi_eval(alpha, beta, n, 2 * xi_arr - 1)


def shifted_norm(alpha: float, beta: float) -> float:
    """``∫_0^1 J̃_s^2 (1 - ξ)^α ξ^β dξ``, the same for every ``s``."""
    return 2.0 ** (-alpha - beta - 1)


class HomogenizedJacobi:
    """``G_n(t, b) = b^n J̃_n^{a,2}(t / b)`` for ``n = 0..nmax``.

    The shifted orthonormal recurrence, multiplied through by ``b^{n+1}``,
    gives ``a_{n+1} G_{n+1} = (2t - (1 + b_n) b) G_n - a_n b^2 G_{n-1}``,
    valid at ``b = 0``.
    """

    def __init__(self, a: float, nmax: int, beta: float = 2.0):
        _check_degree(nmax)
        self.a = float(a)
        self.beta = float(beta)
        self.nmax = nmax
        self._p0, self._diag, self._off = _recurrence(self.a, self.beta, nmax)

    def __call__(self, t, b, derivative: bool = False):
        """Table of ``G_n`` (and ``∂G/∂t``, ``∂G/∂b``), shape ``(nmax+1,) + t.shape``."""
        t = np.asarray(t, dtype=float)
        b = np.asarray(b, dtype=float)
        t, b = np.broadcast_arrays(t, b)
        nmax, diag, off = self.nmax, self._diag, self._off
        G = np.empty((nmax + 1,) + t.shape)
        G[0] = self._p0
        if derivative:
            Gt = np.zeros_like(G)
            Gb = np.zeros_like(G)
        for n in range(nmax):
            lin = 2 * t - (1 + diag[n]) * b
            nxt = lin * G[n]
            if n > 0:
                nxt -= off[n] * b * b * G[n - 1]
            G[n + 1] = nxt / off[n + 1]
            if derivative:
                dt = 2 * G[n] + lin * Gt[n]
                db = -(1 + diag[n]) * G[n] + lin * Gb[n]
                if n > 0:
                    dt -= off[n] * b * b * Gt[n - 1]
                    db -= off[n] * (2 * b * G[n - 1] + b * b * Gb[n - 1])
                Gt[n + 1] = dt / off[n + 1]
                Gb[n + 1] = db / off[n + 1]
        return (G, Gt, Gb) if derivative else G


@functools.lru_cache(maxsize=None)
def homogenized_jacobi(a: float, nmax: int) -> HomogenizedJacobi:
    """Shared :class:`HomogenizedJacobi` table for ``J̃^{a,2}``."""
    return HomogenizedJacobi(a, nmax)


# multivariate Jacobi on S_m^c -------------------------------------------------


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def multi_indices(nvars: int, k: int) -> list[tuple[int, ...]]:
    """Multi-indices of length ``nvars`` with ``|s| <= k``, graded then lexicographic."""
    if nvars == 0:
        return [()]
    return [s for deg in range(k + 1) for s in _compositions(deg, nvars)]


def jacobi_exponents(s, weight_exp: int) -> list[int]:
    """First Jacobi parameters ``a_j = 2 sum_{i>j} s_i + 3(m - j) + e``.

    ``e`` is the exponent of ``b(λ)`` in the weight; ``e = d - m - 1`` gives
    ``a_j = 2 sum_{i>j} s_i + d + 2m - 3j - 1``.
    """
    m = len(s) - 1
    return [2 * sum(s[j + 1:]) + 3 * (m - j) + weight_exp for j in range(m + 1)]


class SimplexJacobiFamily:
    """Orthonormal basis of ``P_k(S_m^c)`` under ``(Πλ)_m^2 b(λ)^e``.

    ``J_s(λ) = c_s^{-1} prod_j b_j^{s_j} J̃_{s_j}^{a_j,2}(λ_j / b_j)`` with
    ``b_j = 1 - sum_{i<j} λ_i`` and ``c_s^{-2} = prod_j 2^{a_j + 3}``.
    For a mesh of dimension ``d`` the weight exponent is ``e = d - m - 1``.
    """

    def __init__(self, m: int, k: int, weight_exp: int):
        if m < 0 or weight_exp < 0:
            raise InvalidDimensions("need m >= 0 and a nonnegative weight exponent")
        _check_degree(k, MAX_DEGREE_MULTI if m > 0 else MAX_DEGREE_1D)
        self.m = m
        self.k = k
        self.weight_exp = weight_exp
        self.indices = multi_indices(m + 1, k)
        self._exps = [jacobi_exponents(s, weight_exp) for s in self.indices]
        self._scale = np.array([math.sqrt(2.0 ** sum(a + 3 for a in ex)) for ex in self._exps])

    def __len__(self):
        return len(self.indices)

    def _tables(self, lam, derivative):
        m = self.m
        b = np.empty_like(lam)
        b[:, 0] = 1.0
        if m > 0:
            b[:, 1:] = 1.0 - np.cumsum(lam[:, :-1], axis=1)
        b = np.clip(b, 0.0, None)
        tables = {}
        for s, ex in zip(self.indices, self._exps):
            for j in range(m + 1):
                key = (j, ex[j])
                if key not in tables:
                    tables[key] = homogenized_jacobi(float(ex[j]), self.k)(lam[:, j], b[:, j], derivative)
        return tables

    def evaluate(self, lam, derivative: bool = False):
        """Values ``(npts, nfun)`` and, optionally, gradients ``(npts, nfun, m+1)``."""
        lam = np.atleast_2d(np.asarray(lam, dtype=float))
        if lam.shape[1] != self.m + 1:
            raise InvalidDimensions("expected points with %d coordinates" % (self.m + 1))
        m = self.m
        tables = self._tables(lam, derivative)
        npts = len(lam)
        vals = np.empty((npts, len(self.indices)))
        grads = np.zeros((npts, len(self.indices), m + 1)) if derivative else None
        for col, (s, ex) in enumerate(zip(self.indices, self._exps)):
            if derivative:
                facs = [tables[(j, ex[j])][0][s[j]] for j in range(m + 1)]
                dts = [tables[(j, ex[j])][1][s[j]] for j in range(m + 1)]
                dbs = [tables[(j, ex[j])][2][s[j]] for j in range(m + 1)]
            else:
                facs = [tables[(j, ex[j])][s[j]] for j in range(m + 1)]
            prod = np.ones(npts)
            for fj in facs:
                prod = prod * fj
            vals[:, col] = self._scale[col] * prod
            if derivative:
                for j in range(m + 1):
                    others = np.ones(npts)
                    for i in range(m + 1):
                        if i != j:
                            others = others * facs[i]
                    # factor j depends on λ_j through t and on λ_i (i < j) through b_j
                    grads[:, col, j] += dts[j] * others
                    for i in range(j):
                        grads[:, col, i] -= dbs[j] * others
                grads[:, col, :] *= self._scale[col]
        return (vals, grads) if derivative else vals


def _check_in_corner_simplex(lam):
    if np.any(lam < -_SIMPLEX_TOL) or np.any(lam.sum(axis=-1) > 1 + _SIMPLEX_TOL):
        raise PointOutsideSimplex("point outside the closed corner simplex")


@functools.lru_cache(maxsize=None)
def simplex_jacobi_family(d: int, m: int, k: int) -> SimplexJacobiFamily:
    """Orthonormal ``{J_s : |s| <= k}`` on ``S_m^c`` under ``w_m`` for mesh dimension ``d``."""
    if not (0 <= m < d <= 3):
        raise InvalidDimensions("need 0 <= m < d <= 3, got m=%d, d=%d" % (m, d))
    return SimplexJacobiFamily(m, k, d - m - 1)


def simplex_jacobi_eval(d: int, m: int, s, lam) -> float:
    """Evaluate the single simplex Jacobi polynomial ``J_s`` at ``λ ∈ S_m^c``."""
    s = tuple(int(i) for i in s)
    if len(s) != m + 1:
        raise InvalidDimensions("multi-index must have m + 1 = %d entries" % (m + 1))
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    _check_in_corner_simplex(lam)
    fam = simplex_jacobi_family(d, m, sum(s))
    col = fam.indices.index(s)
    out = fam.evaluate(lam)[:, col]
    return float(out[0]) if len(out) == 1 else out


class InteriorOrthobasis:
    """Orthonormal basis ``{q_s}`` of ``P_k(S_d)`` under ``(Πλ)_d^2``.

    The simplex ``S_d`` is parametrized by ``(λ_1, ..., λ_d)``; the weight
    is ``λ_0^2 λ_1^2 ... λ_d^2`` with ``λ_0 = 1 - sum``.  This is the corner
    family of ``d`` variables with ``b(λ)`` exponent 2, so the same product
    construction applies.
    """

    def __init__(self, d: int, k: int):
        if not 1 <= d <= 3:
            raise InvalidDimensions("interior basis needs 1 <= d <= 3")
        if k < 0:
            raise InvalidParameters("k must be nonnegative")
        self.d = d
        self.k = k
        self._family = SimplexJacobiFamily(d - 1, k, 2)
        self.indices = self._family.indices

    def __len__(self):
        return len(self._family)

    def evaluate(self, lam_full, derivative: bool = False):
        """Evaluate at barycentric points ``(npts, d + 1)``.

        Gradients are with respect to all ``d + 1`` barycentric coordinates
        and are zero in the ``λ_0`` slot.
        """
        lam_full = np.atleast_2d(np.asarray(lam_full, dtype=float))
        if lam_full.shape[1] != self.d + 1:
            raise InvalidDimensions("expected %d barycentric coordinates" % (self.d + 1))
        out = self._family.evaluate(lam_full[:, 1:], derivative)
        if not derivative:
            return out
        vals, g = out
        grads = np.zeros(g.shape[:2] + (self.d + 1,))
        grads[:, :, 1:] = g
        return vals, grads


@functools.lru_cache(maxsize=None)
def interior_orthobasis(d: int, k: int) -> InteriorOrthobasis:
    return InteriorOrthobasis(d, k)


# 1D comparison families ---------------------------------------------------------


def bernstein_eval(r: int, s: int, t):
    """``b_{s,r}(t) = C(r, s) t^s (1 - t)^{r - s}``."""
    if not 0 <= s <= r:
        raise IndexOutOfRange("need 0 <= s <= r, got s=%d, r=%d" % (s, r))
    t = np.asarray(t, dtype=float)
    out = math.comb(r, s) * t**s * (1 - t) ** (r - s)
    return float(out) if out.ndim == 0 else out


def bernstein_derivative(r: int, s: int, t):
    """``d/dt b_{s,r}(t) = r (b_{s-1,r-1} - b_{s,r-1})``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    if s >= 1:
        out = out + r * np.asarray(bernstein_eval(r - 1, s - 1, t))
    if s <= r - 1:
        out = out - r * np.asarray(bernstein_eval(r - 1, s, t))
    return out


def power_basis_eval(r: int, x):
    """``(1 + x)(1 - x) x^{r - 2}`` for ``r >= 2``."""
    if r < 2:
        raise IndexOutOfRange("power basis needs r >= 2, got %d" % r)
    x = np.asarray(x, dtype=float)
    out = (1 + x) * (1 - x) * x ** (r - 2)
    return float(out) if out.ndim == 0 else out


def power_basis_derivative(r: int, x):
    """Derivative of :func:`power_basis_eval`: ``k x^{k-1} (1 - x^2) - 2 x^{k+1}``, ``k = r - 2``."""
    x = np.asarray(x, dtype=float)
    k = r - 2
    head = k * x ** (k - 1) * (1 - x * x) if k > 0 else np.zeros_like(x)
    return head - 2 * x ** (k + 1)


# quadrature -------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _interval_gauss_jacobi(n: int, alpha: float):
    """Gauss-Jacobi on ``[0, 1]`` for weight ``(1 - u)^alpha``."""
    if alpha == 0:
        x, w = roots_legendre(n)
    else:
        x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1) / 2, w / 2 ** (alpha + 1)


@functools.lru_cache(maxsize=None)
def simplex_quadrature(m: int, exactness: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi rule exact for total degree ``<= exactness`` on the reference ``m``-simplex."""
    if not 0 <= m <= 3:
        raise InvalidDimensions("quadrature supports simplices of dimension 0..3")
    if exactness < 0:
        raise InvalidParameters("exactness must be nonnegative")
    if exactness > MAX_EXACTNESS[m]:
        raise UnsupportedDegree("exactness %d above cap %d for m=%d" % (exactness, MAX_EXACTNESS[m], m))
    if m == 0:
        pts = np.ones((1, 1))
        wts = np.ones(1)
    else:
        n = exactness // 2 + 1
        # Duffy map: x_1 = u_1, x_2 = (1 - u_1) u_2, ...; Jacobian prod (1 - u_i)^{m - i}
        rules = [_interval_gauss_jacobi(n, float(m - 1 - i)) for i in range(m)]
        grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        wgrid = np.meshgrid(*[r[1] for r in rules], indexing="ij")
        u = np.stack([g.ravel() for g in grids], axis=1)
        wts = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
        cart = np.empty_like(u)
        rest = np.ones(len(u))
        for i in range(m):
            cart[:, i] = rest * u[:, i]
            rest = rest * (1 - u[:, i])
        pts = np.concatenate([1 - cart.sum(axis=1, keepdims=True), cart], axis=1)
        pts[:, 0] = np.clip(pts[:, 0], 0.0, None)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(m, pts, wts, exactness)
