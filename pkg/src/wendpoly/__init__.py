"""Scattered-data interpolation with compactly supported kernels plus polynomials."""

from .kernels import KERNEL_IDS, WendlandKernel, kernel_eval, kernel_from_id, reference_eval
from .nodes import (
    PointSet,
    chebyshev_lobatto,
    dart_throw,
    dart_throw_target,
    geometry_stats,
    hemisphere_fibonacci,
    kte_map,
    read_points,
    sphere_spiral,
    write_points,
)
from .polynomials import TotalDegreeBasis, build_basis, degree_from_points, vandermonde
from .solver import (
    FitReport,
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
from .sparselinalg import (
    CholeskyFactor,
    QRFactor,
    SparseSymmetric,
    assemble_cross,
    assemble_gramian,
    cholesky,
    cond_estimate,
    cpqr_truncated,
    qr,
    solve_lower,
    solve_upper,
)
from .study import StudyConfig, parse_config, rel_l2_error, run_convergence
from .targets import REGISTRY, TargetFunction, registry_lookup
from .tuning import ShapeStrategy, TuningError, apply_strategy, solve_eps_for_cond

__version__ = "0.1.0"
