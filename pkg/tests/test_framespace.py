import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from framefem.assembly import MASS, assemble
from framefem.errors import CellMismatch, DegenerateProbe, InvalidIndex, UnsupportedMesh
from framefem.framespace import (
    BasisKind1D,
    GlobalFrame,
    StandardBasis,
    build_1d_comparison_basis,
    enumerate_frame,
    frame_eval,
    frame_grad,
    local_dim,
    pullback_scaling,
    standard_dimension,
)
from framefem.mesh import generate_mesh, hat_eval, macroelement
from framefem.polylib import simplex_quadrature
from framefem.spectral import sym_eigvals


def fine_l2_norms(frame, exactness=None):
    """Squared L² norms of all frame functions with a rule finer than assembly's."""
    mesh = frame.mesh
    q = 2 * frame.degree + 2 * mesh.dim + 10 if exactness is None else exactness
    rule = simplex_quadrature(mesh.dim, q)
    out = np.zeros(frame.size)
    for cell in range(mesh.num_cells):
        dofs, vals, _ = frame.cell_tabulation(cell, rule.points)
        w = rule.weights * math.factorial(mesh.dim) * mesh.cell_volumes[cell]
        out[dofs] += w @ vals ** 2
    return out


def random_points(mesh, cell, n, rng):
    bary = rng.dirichlet(np.ones(mesh.dim + 1), size=n)
    return bary, mesh.cell_points(cell, bary)


# dimensions -------------------------------------------------------------------------


@pytest.mark.parametrize("r", range(1, 9))
def test_local_dim_examples(r):
    assert local_dim(0, 2, r) == r
    assert local_dim(2, 3, r) == r * (r - 1) * (r - 2) // 6
    assert local_dim(1, 1, r) == r - 1


def test_local_dim_edge_r3():
    assert local_dim(1, 2, 3) == 3 and local_dim(1, 3, 3) == 3


@pytest.mark.parametrize("n", [1, 3, 6])
@pytest.mark.parametrize("r", [1, 2, 5])
def test_1d_frame_size(n, r):
    mesh = generate_mesh("interval", n)
    V, E = mesh.num_vertices, mesh.num_cells
    assert enumerate_frame(mesh, r).size == r * V + (r - 1) * E


def test_single_interval_essential():
    assert GlobalFrame(generate_mesh("interval", 1), 5, "essential").size == 4


def test_unit_square1_r2(square1):
    assert GlobalFrame(square1, 2).size == 4 * 2 + 5 * 1 + 2 * 0 == 13


@pytest.mark.parametrize("kind,n", [("interval", 3), ("unit_square", 2), ("unit_cube", 1)])
@pytest.mark.parametrize("bc", ["natural", "essential"])
def test_size_is_sum_of_local_dims(kind, n, bc):
    mesh = generate_mesh(kind, n)
    for r in (1, 2, 4):
        frame = GlobalFrame(mesh, r, bc)
        expected = sum(local_dim(f.m, mesh.dim, r) for f in mesh.all_simplices()
                       if not (bc == "essential" and f.on_boundary))
        assert frame.size == expected


def test_index_ordering_and_blocks(square2):
    frame = GlobalFrame(square2, 4)
    assert [idx.position for idx in frame.indices] == list(range(frame.size))
    keys = [(idx.f.m, idx.f.vertices) for idx in frame.indices]
    assert keys == sorted(keys)
    for idx in frame.indices:
        assert sum(idx.s) <= 4 - idx.f.m - 1 or idx.f.m == 2
        start, stop = frame.blocks[idx.f.vertices]
        assert start <= idx.position < stop


def test_essential_drops_boundary(square2):
    frame = GlobalFrame(square2, 3, "essential")
    assert not any(idx.f.on_boundary for idx in frame.indices)


# evaluation --------------------------------------------------------------------------


@pytest.mark.parametrize("kind,n,r", [("interval", 4, 6), ("unit_square", 2, 4), ("unit_cube", 1, 3)])
def test_unit_l2_norms(kind, n, r):
    frame = GlobalFrame(generate_mesh(kind, n), r)
    np.testing.assert_allclose(fine_l2_norms(frame), 1.0, atol=1e-10)


def test_local_support(square2, rng):
    frame = GlobalFrame(square2, 3)
    for idx in frame.indices[::7]:
        inside = set(macroelement(square2, idx.f).cells)
        for cell in range(square2.num_cells):
            if cell in inside:
                continue
            _, pts = random_points(square2, cell, 3, rng)
            for x in pts:
                # interior points of a cell outside Ω_f
                assert frame_eval(frame, idx, x) == 0.0


def test_lowest_vertex_function_is_a_hat(square2, rng):
    frame = GlobalFrame(square2, 4)
    y = 4
    pos = frame.blocks[(y,)][0]
    ratios = []
    for cell in sorted(square2.vertex_cells(y)):
        _, pts = random_points(square2, cell, 4, rng)
        ratios += [frame_eval(frame, pos, x) / hat_eval(square2, y, x) for x in pts]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-12)


def test_vertex_functions_span_hat_powers(interval4, rng):
    # span of the vertex block equals span{λ_y, ..., λ_y^r}
    r, y = 4, 2
    frame = GlobalFrame(interval4, r)
    start, stop = frame.blocks[(y,)]
    x = rng.uniform(0.25, 0.75, size=40)
    vals = np.array([frame.evaluate([xi])[start:stop] for xi in x])
    lam = np.array([hat_eval(interval4, y, [xi]) for xi in x])
    powers = np.stack([lam ** k for k in range(1, r + 1)], axis=1)
    coef, *_ = np.linalg.lstsq(powers, vals, rcond=None)
    np.testing.assert_allclose(powers @ coef, vals, atol=1e-11)


def test_essential_functions_vanish_on_boundary(square2):
    frame = GlobalFrame(square2, 5, "essential")
    rule = simplex_quadrature(1, 8)
    for f in square2.simplices(1):
        if not f.on_boundary:
            continue
        pts = rule.points @ square2.vertices[list(f.vertices)]
        for x in pts:
            assert np.abs(frame.evaluate(x)).max() <= 1e-10


def test_frame_vanishes_on_macroelement_boundary(square2):
    frame = GlobalFrame(square2, 4)
    rule = simplex_quadrature(1, 6)
    y = 4
    start, stop = frame.blocks[(y,)]
    # the outer edges of Ω_y are exactly the edges of its cells that avoid y
    for cell in square2.vertex_cells(y):
        verts = [int(v) for v in square2.cells[cell] if v != y]
        for x in rule.points @ square2.vertices[verts]:
            assert np.abs(frame.evaluate(x)[start:stop]).max() <= 1e-10


def test_frame_eval_invalid_index(square1):
    frame = GlobalFrame(square1, 2)
    with pytest.raises(InvalidIndex):
        frame_eval(frame, frame.size, [0.5, 0.5])


# gradients -----------------------------------------------------------------------------


def _fd_check(frame, rng, samples=50, h=1e-6):
    mesh = frame.mesh
    for _ in range(samples):
        idx = int(rng.integers(frame.size))
        cell = int(rng.integers(mesh.num_cells))
        bary = rng.dirichlet(np.ones(mesh.dim + 1) * 3)
        x = mesh.cell_points(cell, bary[None])[0]
        g = frame_grad(frame, idx, x, cell)
        fd = np.zeros(mesh.dim)
        for k in range(mesh.dim):
            e = np.zeros(mesh.dim)
            e[k] = h
            lp = mesh.barycentric(cell, x + e)
            lm = mesh.barycentric(cell, x - e)
            dofs, vp, _ = frame.cell_tabulation(cell, lp[None])
            _, vm, _ = frame.cell_tabulation(cell, lm[None])
            hit = np.nonzero(dofs == idx)[0]
            fd[k] = 0.0 if len(hit) == 0 else (vp[0, hit[0]] - vm[0, hit[0]]) / (2 * h)
        scale = max(np.abs(fd).max(), 1.0)
        assert np.abs(g - fd).max() <= 1e-5 * scale


@pytest.mark.parametrize("kind,n,r", [("interval", 4, 7), ("unit_square", 2, 5), ("unit_cube", 1, 4)])
def test_gradient_matches_finite_differences(kind, n, r, rng):
    _fd_check(GlobalFrame(generate_mesh(kind, n), r), rng)


def test_gradient_outside_support_is_zero(square2):
    frame = GlobalFrame(square2, 3)
    pos = frame.blocks[(0,)][0]
    far = [c for c in range(square2.num_cells) if 0 not in square2.cells[c]][0]
    x = square2.vertices[square2.cells[far]].mean(axis=0)
    np.testing.assert_array_equal(frame_grad(frame, pos, x, far), np.zeros(2))


def test_gradient_of_1d_hat(interval4):
    frame = GlobalFrame(interval4, 3)
    y = 2
    pos = frame.blocks[(y,)][0]
    peak = frame_eval(frame, pos, [0.5])
    for cell in interval4.vertex_cells(y):
        x = interval4.vertices[interval4.cells[cell]].mean(axis=0)
        g = frame_grad(frame, pos, x, cell)
        assert abs(g[0]) == pytest.approx(peak / 0.25, rel=1e-12)


def test_gradient_cell_mismatch(square2):
    frame = GlobalFrame(square2, 2)
    with pytest.raises(CellMismatch):
        frame_grad(frame, 0, [0.9, 0.1], 7 if 7 != square2.locate([0.9, 0.1]) else 0)


# pull-back scaling -----------------------------------------------------------------------


@pytest.mark.parametrize("k", range(6))
def test_pullback_1d_vertex(interval4, k):
    c = pullback_scaling(interval4, (2,), lambda lam: lam[:, 0] ** k)
    assert c == pytest.approx(2 * 0.25, rel=1e-12)


def test_pullback_probe_independence_2d(square2):
    edge = [f for f in square2.simplices(1) if not f.on_boundary][0]
    c1 = pullback_scaling(square2, edge, lambda lam: np.ones(len(lam)))
    c2 = pullback_scaling(square2, edge, lambda lam: 1 + lam[:, 0] ** 3 * lam[:, 1])
    assert c2 == pytest.approx(c1, rel=1e-8)
    assert c1 == pytest.approx(GlobalFrame(square2, 2).change_of_variables_constant(edge), rel=1e-12)


def test_pullback_bounded_ratio_on_square4():
    mesh = generate_mesh("unit_square", 4)
    for f in mesh.all_simplices():
        if f.m == mesh.dim:
            continue
        c = pullback_scaling(mesh, f, lambda lam: np.ones(len(lam)))
        h = macroelement(mesh, f).h_f
        assert 1e-2 <= c / h ** 2 <= 1e2


def test_pullback_degenerate_probe(interval4):
    with pytest.raises(DegenerateProbe):
        pullback_scaling(interval4, (2,), lambda lam: np.zeros(len(lam)))


# comparison bases and the standard basis --------------------------------------------------


def test_jacobi_bubble_mass_is_identity():
    basis = build_1d_comparison_basis(BasisKind1D.JACOBI, 12)
    np.testing.assert_allclose(assemble(basis, MASS).dense(), np.eye(11), atol=1e-12)


@pytest.mark.parametrize("kind", list(BasisKind1D))
@pytest.mark.parametrize("r", [2, 3, 9])
def test_comparison_basis_sizes(kind, r):
    assert build_1d_comparison_basis(kind, r).size == r - 1


def test_bernstein_gram_exact_rationals():
    r = 3
    basis = build_1d_comparison_basis(BasisKind1D.BERNSTEIN, r)
    M = assemble(basis, MASS).dense()
    for a, i in enumerate(range(1, r)):
        for b, j in enumerate(range(1, r)):
            # ∫_{-1}^{1} b_i b_j dx = 2 C(r,i) C(r,j) B(i+j+1, 2r-i-j+1)
            exact = Fraction(2 * math.comb(r, i) * math.comb(r, j) * math.factorial(i + j)
                             * math.factorial(2 * r - i - j), math.factorial(2 * r + 1))
            assert M[a, b] == pytest.approx(float(exact), rel=1e-14)


def test_comparison_bases_span_the_same_space():
    r = 7
    x = np.linspace(-1, 1, 25)
    mats = []
    for kind in BasisKind1D:
        basis = build_1d_comparison_basis(kind, r)
        mats.append(np.array([basis.evaluate([xi]) for xi in x]))
    for other in mats[1:]:
        coef, *_ = np.linalg.lstsq(mats[0], other, rcond=None)
        np.testing.assert_allclose(mats[0] @ coef, other, atol=1e-11)


def test_comparison_basis_wrong_mesh():
    with pytest.raises(UnsupportedMesh):
        from framefem.framespace import ComparisonBasis1D

        ComparisonBasis1D("jacobi_bubble", 4, mesh=generate_mesh("interval", 2))


@pytest.mark.parametrize("kind,n", [("interval", 1), ("unit_square", 1), ("single_simplex", 2)])
@pytest.mark.parametrize("r", [1, 2, 3, 4])
def test_span_rank_equals_dim(kind, n, r):
    mesh = generate_mesh(kind, n)
    frame = GlobalFrame(mesh, r)
    rep = sym_eigvals(assemble(frame, MASS))
    assert rep.rank == standard_dimension(mesh, r) == StandardBasis(mesh, r).size


def test_redundancy_witness(square2, rng):
    """λ_y(1 - λ_y) lies both in the vertex block of y and in the span of its edge blocks."""
    frame = GlobalFrame(square2, 2)
    y = 4
    pts = np.concatenate([random_points(square2, c, 15, rng)[1] for c in range(square2.num_cells)])
    vals = np.array([frame.evaluate(x) for x in pts])
    target = np.array([hat_eval(square2, y, x) * (1 - hat_eval(square2, y, x)) for x in pts])
    vertex_cols = list(range(*frame.blocks[(y,)]))
    edge_cols = [i for f, (a, b) in frame.blocks.items() if len(f) == 2 and y in f for i in range(a, b)]
    for cols in (vertex_cols, edge_cols):
        coef, *_ = np.linalg.lstsq(vals[:, cols], target, rcond=None)
        assert np.abs(vals[:, cols] @ coef - target).max() <= 1e-12
    assert sym_eigvals(assemble(frame, MASS)).rank < frame.size


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["interval", "unit_square"]), st.integers(1, 2), st.integers(1, 5),
       st.sampled_from(["natural", "essential"]))
def test_frame_functions_live_in_the_fe_space(kind, n, r, bc):
    """Every frame function is a C0 piecewise polynomial of degree r (the standard basis reproduces it)."""
    from framefem.assembly import assemble_cross

    mesh = generate_mesh(kind, n)
    frame = GlobalFrame(mesh, r, bc)
    std = StandardBasis(mesh, r, bc)
    if frame.size == 0:
        return
    cross = assemble_cross(frame, std)
    ms = assemble(std, MASS).dense()
    proj = np.einsum("ij,ij->i", cross, np.linalg.solve(ms, cross.T).T)
    np.testing.assert_allclose(proj, 1.0, atol=1e-10)
