import numpy as np
import pytest

from wendpoly.kernels import WendlandKernel
from wendpoly.nodes import PointSet, chebyshev_lobatto, dart_throw_target, sphere_spiral
from wendpoly.polynomials import build_basis, vandermonde
from wendpoly.solver import (
    RankDeficiencyError,
    UnifiedInterpolant,
    direct_saddle_solve,
    evaluate,
    fit_auto,
    fit_diag,
    fit_hybrid,
    fit_rank_deficient,
    load_model,
    refit,
    save_model,
)
from wendpoly.sparselinalg import cpqr_truncated, lstsq_coeffs
from wendpoly.tuning import solve_eps_for_cond


def sub_separation_kernel(pts, order=1):
    return WendlandKernel(order=order, eps=2.0 / pts.sep)


def rel_diff(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# --- fit_diag ---------------------------------------------------------------


def test_diag_polynomial_data_gives_zero_residual():
    pts = chebyshev_lobatto(30)
    basis = build_basis(pts, 5)
    rng = np.random.default_rng(0)
    d_true = rng.standard_normal(basis.size)
    y = vandermonde(basis, pts.coords) @ d_true
    model = fit_diag(pts, y, sub_separation_kernel(pts), basis)
    assert np.max(np.abs(model.d - d_true)) <= 1e-10
    assert np.max(np.abs(model.c)) <= 1e-10


def test_diag_degree_zero_is_constant_projection():
    pts = chebyshev_lobatto(9)
    basis = build_basis(pts, 0)
    y = np.arange(9.0)
    model = fit_diag(pts, y, sub_separation_kernel(pts), basis)
    assert model.d[0] == pytest.approx(y.mean())
    assert np.allclose(model.c, y - y.mean())


def test_diag_matches_normal_equations_oracle():
    rng = np.random.default_rng(3)
    pts = chebyshev_lobatto(50)
    basis = build_basis(pts, 4)
    y = rng.standard_normal(50)
    model = fit_diag(pts, y, sub_separation_kernel(pts), basis)
    P = vandermonde(basis, pts.coords)
    d_oracle = np.linalg.solve(P.T @ P, P.T @ y)
    assert np.max(np.abs(model.d - d_oracle)) <= 1e-8


def test_length_mismatch_rejected():
    pts = chebyshev_lobatto(10)
    basis = build_basis(pts, 2)
    with pytest.raises(ValueError):
        fit_diag(pts, np.ones(9), sub_separation_kernel(pts), basis)


# --- fit_hybrid -------------------------------------------------------------


def test_hybrid_reduces_to_diag_when_gramian_is_identity():
    pts = chebyshev_lobatto(20)
    kernel = sub_separation_kernel(pts)
    basis = build_basis(pts, 3)
    rng = np.random.default_rng(1)
    y = rng.standard_normal(20)
    md = fit_diag(pts, y, kernel, basis)
    mh = fit_hybrid(pts, y, kernel, basis)
    assert np.max(np.abs(md.c - mh.c)) <= 1e-12
    assert np.max(np.abs(md.d - mh.d)) <= 1e-12


def test_hybrid_reproduces_polynomial_data():
    pts = dart_throw_target("disk", 120, seed=1)
    basis = build_basis(pts, 3)
    rng = np.random.default_rng(2)
    d_true = rng.standard_normal(basis.size)
    y = vandermonde(basis, pts.coords) @ d_true
    kernel = WendlandKernel(order=1, eps=3.0)
    model = fit_hybrid(pts, y, kernel, basis)
    assert np.max(np.abs(model.d - d_true)) <= 1e-8
    assert np.max(np.abs(model.c)) <= 1e-8


def test_hybrid_matches_saddle_oracle_at_cond_1e6():
    pts = dart_throw_target("disk", 150, seed=7)
    y = np.cos(3 * pts.coords[:, 0]) * pts.coords[:, 1]
    eps = solve_eps_for_cond(pts, 1, 1e6).eps
    kernel = WendlandKernel(order=1, eps=eps)
    basis = build_basis(pts, 5)
    model = fit_hybrid(pts, y, kernel, basis)
    c, d = direct_saddle_solve(pts, y, kernel, basis)
    oracle = UnifiedInterpolant(pts, kernel, basis, c, d, "oracle")
    xe = dart_throw_target("disk", 500, seed=77)
    assert rel_diff(evaluate(model, xe), evaluate(oracle, xe)) <= 1e-6


def test_hybrid_interpolates_and_satisfies_moments():
    pts = dart_throw_target("disk", 150, seed=9)
    y = np.sin(pts.coords[:, 0] * 2) + pts.coords[:, 1] ** 2
    kernel = WendlandKernel(order=1, eps=4.0)
    basis = build_basis(pts, 4)
    model = fit_hybrid(pts, y, kernel, basis)
    y_inf = np.abs(y).max()
    assert np.abs(evaluate(model, pts) - y).max() <= 1e-8 * y_inf
    P = vandermonde(basis, pts.coords)
    assert np.abs(P.T @ model.c).max() <= 1e-8 * y_inf


# --- rank-deficient route ---------------------------------------------------


def test_rank_deficient_matches_hybrid_on_full_rank():
    pts = dart_throw_target("disk", 100, seed=4)
    y = np.cos(pts.coords[:, 0])
    kernel = WendlandKernel(order=1, eps=4.0)
    basis = build_basis(pts, 3)
    mh = fit_hybrid(pts, y, kernel, basis)
    mr = fit_rank_deficient(pts, y, kernel, basis)
    assert np.max(np.abs(mh.c - mr.c)) <= 1e-10
    assert np.max(np.abs(mh.d - mr.d)) <= 1e-10
    assert mr.report.rank == basis.size


def test_sphere_rank_deficiency_detected_and_constraints_hold():
    pts = sphere_spiral(400)
    y = pts.coords[:, 0] ** 2 * np.abs(pts.coords[:, 0])
    kernel = WendlandKernel(order=1, eps=4.0)
    basis = build_basis(pts, 3)  # degree >= 2 loses rank on the sphere
    with pytest.raises(RankDeficiencyError):
        fit_hybrid(pts, y, kernel, basis)
    model = fit_rank_deficient(pts, y, kernel, basis)
    assert model.report.rank < basis.size
    # restricted-degree polynomials on the sphere span (ell+1)^2 dimensions
    assert model.report.rank == 16
    assert np.abs(evaluate(model, pts) - y).max() <= 1e-8 * np.abs(y).max()


def test_rank_deficient_zero_at_truncated_pivot():
    # plant an exactly duplicated basis column via duplicated coordinates:
    # use a custom basis whose last column equals its first
    pts = dart_throw_target("disk", 80, seed=5)
    basis = build_basis(pts, 2)
    P = vandermonde(basis, pts.coords)
    dup = np.column_stack([P, P[:, 1]])
    f = cpqr_truncated(dup)
    assert f.rank == P.shape[1]
    rng = np.random.default_rng(0)
    y = rng.standard_normal(pts.n)
    x = lstsq_coeffs(f, dup, y)
    dropped = f.pivots[f.rank :]
    assert np.all(x[dropped] == 0.0)


# --- dispatch and evaluation ------------------------------------------------


def test_auto_dispatch_regimes():
    pts = chebyshev_lobatto(25)
    q = pts.sep
    w = pts.diam
    y = np.tanh(pts.coords[:, 0])
    basis = build_basis(pts, 3)
    m1 = fit_auto(pts, y, WendlandKernel(order=1, eps=2.0 / q), basis)
    assert m1.mode == "diag"
    m2 = fit_auto(pts, y, WendlandKernel(order=1, eps=2.0 / (q + w)), basis)
    assert m2.mode == "hybrid"
    sph = sphere_spiral(300)
    ys = sph.coords[:, 2] ** 3
    m3 = fit_auto(sph, ys, WendlandKernel(order=1, eps=4.0), build_basis(sph, 3))
    assert m3.mode == "rank_deficient"


def test_regime_collapse_three_routes_agree():
    pts = chebyshev_lobatto(30)
    kernel = sub_separation_kernel(pts)
    basis = build_basis(pts, 4)
    y = np.exp(pts.coords[:, 0])
    xe = PointSet(np.linspace(-1, 1, 300)[:, None])
    md = fit_diag(pts, y, kernel, basis)
    mh = fit_hybrid(pts, y, kernel, basis)
    c, d = direct_saddle_solve(pts, y, kernel, basis)
    ms = UnifiedInterpolant(pts, kernel, basis, c, d, "oracle")
    sd, sh, ss = (evaluate(m, xe) for m in (md, mh, ms))
    assert rel_diff(sd, ss) <= 1e-10
    assert rel_diff(sh, ss) <= 1e-10


def test_evaluate_pure_polynomial_and_far_points():
    pts = chebyshev_lobatto(12)
    kernel = WendlandKernel(order=1, eps=20.0)
    basis = build_basis(pts, 2)
    d = np.array([1.0, 2.0, 0.5])
    model = UnifiedInterpolant(pts, kernel, basis, np.zeros(12), d, "diag")
    xe = PointSet(np.array([[0.3], [0.9]]))
    expected = vandermonde(basis, xe.coords) @ d
    assert np.allclose(evaluate(model, xe), expected)

    # a far evaluation point sees only the polynomial part
    model2 = UnifiedInterpolant(pts, kernel, basis, np.ones(12), d, "diag")
    far = PointSet(np.array([[50.0]]))
    assert np.allclose(
        evaluate(model2, far), vandermonde(basis, far.coords) @ d
    )


def test_evaluate_dimension_mismatch():
    pts = chebyshev_lobatto(5)
    model = fit_diag(
        pts, np.zeros(5) + 1.0, sub_separation_kernel(pts), build_basis(pts, 1)
    )
    with pytest.raises(ValueError):
        evaluate(model, PointSet(np.zeros((3, 2)) + np.arange(3)[:, None]))


# --- saddle oracle ----------------------------------------------------------


def test_saddle_tiny_hand_example():
    pts = PointSet(np.array([[0.0]]))
    kernel = WendlandKernel(order=1, eps=1.0)
    basis = build_basis(pts, 0)
    c, d = direct_saddle_solve(pts, np.array([2.0]), kernel, basis)
    assert c[0] == pytest.approx(0.0, abs=1e-14)
    assert d[0] == pytest.approx(2.0)


def test_saddle_identity_regime_matches_normal_equations():
    pts = chebyshev_lobatto(20)
    kernel = sub_separation_kernel(pts)
    basis = build_basis(pts, 3)
    rng = np.random.default_rng(11)
    y = rng.standard_normal(20)
    c, d = direct_saddle_solve(pts, y, kernel, basis)
    P = vandermonde(basis, pts.coords)
    d_ne = np.linalg.solve(P.T @ P, P.T @ y)
    assert np.max(np.abs(d - d_ne)) <= 1e-9
    assert np.max(np.abs(c - (y - P @ d_ne))) <= 1e-9


def test_saddle_matches_hybrid_random_instance():
    pts = dart_throw_target("disk", 100, seed=13)
    rng = np.random.default_rng(13)
    y = rng.standard_normal(pts.n)
    kernel = WendlandKernel(order=1, eps=3.0)
    basis = build_basis(pts, 4)
    model = fit_hybrid(pts, y, kernel, basis)
    c, d = direct_saddle_solve(pts, y, kernel, basis)
    assert np.max(np.abs(model.c - c)) <= 1e-8
    assert np.max(np.abs(model.d - d)) <= 1e-8


# --- persistence and refit ---------------------------------------------------


def test_model_round_trip(tmp_path):
    pts = dart_throw_target("disk", 90, seed=21)
    y = np.cos(pts.coords[:, 0] + pts.coords[:, 1])
    kernel = WendlandKernel(order=2, eps=3.0)
    basis = build_basis(pts, 3)
    model = fit_hybrid(pts, y, kernel, basis)
    path = tmp_path / "model.txt"
    save_model(model, path)
    back = load_model(path)
    assert back.mode == "hybrid"
    assert back.kernel == kernel
    assert np.array_equal(back.c, model.c)
    assert np.array_equal(back.d, model.d)
    xe = dart_throw_target("disk", 200, seed=22)
    assert np.array_equal(evaluate(back, xe), evaluate(model, xe))


def test_refit_reuses_factors():
    pts = dart_throw_target("disk", 100, seed=23)
    kernel = WendlandKernel(order=1, eps=3.0)
    basis = build_basis(pts, 3)
    y1 = np.sin(pts.coords[:, 0])
    y2 = np.cos(pts.coords[:, 1])
    m1 = fit_hybrid(pts, y1, kernel, basis)
    m2 = refit(m1, y2)
    fresh = fit_hybrid(pts, y2, kernel, basis)
    assert np.max(np.abs(m2.c - fresh.c)) <= 1e-12
    assert np.max(np.abs(m2.d - fresh.d)) <= 1e-12
    assert m2.report.timings["assemble"] == 0.0  # nothing reassembled
