import numpy as np
import pytest

from wendpoly.kernels import WendlandKernel
from wendpoly.nodes import chebyshev_lobatto, dart_throw_target
from wendpoly.sparselinalg import assemble_gramian, cholesky, cond_estimate
from wendpoly.tuning import (
    ShapeStrategy,
    TuningError,
    apply_strategy,
    solve_eps_for_cond,
)


def post_hoc_log10_cond(pts, order, eps):
    A = assemble_gramian(pts, WendlandKernel(order=order, eps=eps))
    return np.log10(cond_estimate(A, cholesky(A)).value)


def test_rootfind_self_consistency_1d():
    pts = chebyshev_lobatto(100)
    solved = solve_eps_for_cond(pts, 1, 1e4)
    assert abs(solved.log10_cond - 4.0) <= 0.1
    assert solved.probes <= 40
    # independent re-estimate agrees to within a quarter decade
    assert abs(post_hoc_log10_cond(pts, 1, solved.eps) - 4.0) <= 0.25


def test_rootfind_self_consistency_2d():
    pts = dart_throw_target("disk", 150, seed=2)
    for kt in (1e4, 1e8):
        solved = solve_eps_for_cond(pts, 1, kt)
        assert abs(post_hoc_log10_cond(pts, 1, solved.eps) - np.log10(kt)) <= 0.25


def test_cond_monotone_in_support():
    # halving eps (doubling support) never decreases the condition number;
    # the rootfinder's bracketing logic relies on this
    pts = chebyshev_lobatto(60)
    eps = 2.0 / pts.sep
    conds = []
    for _ in range(8):
        conds.append(post_hoc_log10_cond(pts, 1, eps))
        eps /= 2.0
    assert all(b >= a - 0.05 for a, b in zip(conds, conds[1:]))


def test_diag_band_target_unreachable():
    pts = chebyshev_lobatto(40)
    with pytest.raises(TuningError):
        solve_eps_for_cond(pts, 1, 1.2)  # inside the cond == 1 regime band


def test_absurd_target_reports_achievable_range():
    pts = chebyshev_lobatto(16)
    with pytest.raises(TuningError, match="largest log10 condition seen"):
        solve_eps_for_cond(pts, 1, 1e25)


def test_strategy_validation():
    with pytest.raises(ValueError):
        ShapeStrategy(kind="nope")
    with pytest.raises(ValueError):
        ShapeStrategy(kind="fc")  # missing target_cond
    with pytest.raises(ValueError):
        ShapeStrategy(kind="explicit")  # missing eps


def test_explicit_strategy_broadcasts():
    sets = [chebyshev_lobatto(n) for n in (9, 17, 33)]
    eps = apply_strategy(ShapeStrategy(kind="explicit", eps=10.0), sets, 1)
    assert eps == [10.0, 10.0, 10.0]


def test_fs_broadcasts_finest_eps():
    sets = [chebyshev_lobatto(n) for n in (17, 65, 33)]
    eps = apply_strategy(ShapeStrategy(kind="fs", target_cond=1e4), sets, 1)
    assert len(set(eps)) == 1
    # the broadcast value is the one tuned on the largest set
    finest = solve_eps_for_cond(chebyshev_lobatto(65), 1, 1e4)
    assert eps[0] == pytest.approx(finest.eps)


def test_fc_tunes_each_set():
    sets = [chebyshev_lobatto(n) for n in (17, 33, 65)]
    eps = apply_strategy(ShapeStrategy(kind="fc", target_cond=1e4), sets, 1)
    for ps, e in zip(sets, eps):
        assert abs(post_hoc_log10_cond(ps, 1, e) - 4.0) <= 0.25


def test_failing_node_set_is_identified():
    sets = [chebyshev_lobatto(9), chebyshev_lobatto(17)]
    with pytest.raises(TuningError, match="node set"):
        apply_strategy(ShapeStrategy(kind="fc", target_cond=1e25), sets, 1)
