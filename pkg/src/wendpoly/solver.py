"""Fit pipelines for the kernel-plus-polynomial interpolant, and evaluation.

Three routes produce the coefficient pair (c, d):

* diag -- support below the separation distance, so the Gramian is the
  identity: d is the plain polynomial least-squares solution and c the
  residual at the data sites.
* hybrid -- sparse Gramian A = L L^T; the polynomial coefficients solve
  min ||L^-1 P d - L^-1 y|| through a QR of the whitened matrix, and the
  kernel coefficients come from one more pair of triangular solves. The
  M x M normal-equations product of the whitened matrix with itself is
  never formed anywhere in this pipeline.
* rank_deficient -- same as hybrid but with truncated column-pivoted QR,
  for point sets on algebraic varieties where the polynomial matrix loses
  column rank; truncated pivots get zero coefficients.

A dense saddle-point solve over the full block system is included purely
as a test oracle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .kernels import WendlandKernel, kernel_eval, kernel_from_id
from .nodes import PointSet
from .polynomials import TotalDegreeBasis, total_degree_indices, vandermonde
from .sparselinalg import (
    CholeskyFactor,
    QRFactor,
    SparseSymmetric,
    assemble_cross,
    assemble_gramian,
    cholesky,
    cond_estimate,
    cpqr_truncated,
    lstsq_coeffs,
    qr,
    solve_lower,
    solve_upper,
    truncation_tol,
)

MODES = ("diag", "hybrid", "rank_deficient")


class RankDeficiencyError(RuntimeError):
    """Whitened least-squares matrix is numerically rank deficient."""

    def __init__(self, msg, rank=None):
        super().__init__(msg)
        self.rank = rank


@dataclass
class FitReport:
    mode: str
    q: float
    w: float
    support: float
    nnz_a: int = 0
    nnz_l: int = 0
    rank: int = 0
    cond: float = float("nan")
    dense_gramian: bool = False
    timings: dict = field(default_factory=dict)


@dataclass(eq=False)
class UnifiedInterpolant:
    """Fitted model: centers, kernel, basis and the coefficient pair."""

    centers: PointSet
    kernel: WendlandKernel
    basis: TotalDegreeBasis
    c: np.ndarray
    d: np.ndarray
    mode: str
    report: FitReport | None = None

    def __call__(self, eval_points: PointSet) -> np.ndarray:
        return evaluate(self, eval_points)


@dataclass(eq=False)
class FitWorkspace:
    """Retained factorizations so new right-hand sides reuse the heavy work."""

    P: np.ndarray
    gramian: SparseSymmetric | None = None
    chol: CholeskyFactor | None = None
    B: np.ndarray | None = None
    qrf: QRFactor | None = None


def _check_y(X: PointSet, y) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if len(y) != X.n:
        raise ValueError(f"got {len(y)} samples for {X.n} points")
    return y


def _new_report(X: PointSet, kernel: WendlandKernel, mode: str) -> FitReport:
    q, w = (X.sep, X.diam) if X.n > 1 else (float("inf"), 0.0)
    support = kernel.support_radius()
    return FitReport(
        mode=mode, q=q, w=w, support=support, dense_gramian=bool(support >= w)
    )


def fit_diag(
    X: PointSet,
    y,
    kernel: WendlandKernel,
    basis: TotalDegreeBasis,
    workspace: FitWorkspace | None = None,
) -> UnifiedInterpolant:
    """Polynomial-limit fit (caller guarantees support < separation).

    The polynomial coefficients are the least-squares solution for the
    Vandermonde matrix (column-pivoted and truncated if it is rank
    deficient) and the kernel coefficients are simply the least-squares
    residual at the data sites.
    """
    y = _check_y(X, y)
    report = _new_report(X, kernel, "diag")
    t0 = time.perf_counter()
    if workspace is None or workspace.qrf is None:
        P = vandermonde(basis, X.coords)
        qrf = qr(P)
        if np.abs(np.diag(qrf.r)).min(initial=np.inf) <= qrf.tol:
            qrf = cpqr_truncated(P)
        workspace = FitWorkspace(P=P, qrf=qrf)
    P, qrf = workspace.P, workspace.qrf
    t1 = time.perf_counter()
    d = lstsq_coeffs(qrf, P, y)
    c = y - P @ d
    t2 = time.perf_counter()
    report.rank = qrf.rank
    report.cond = 1.0
    report.timings = {"assemble": 0.0, "factor": t1 - t0, "solve": t2 - t1}
    model = UnifiedInterpolant(X, kernel, basis, c, d, "diag", report)
    model._workspace = workspace
    return model


def _whiten(X, y, kernel, basis, workspace):
    """Shared hybrid-path setup: factor A and whiten P and y."""
    report_stage = {}
    t0 = time.perf_counter()
    if workspace is None or workspace.chol is None:
        A = assemble_gramian(X, kernel)
        t1 = time.perf_counter()
        chol = cholesky(A)
        P = vandermonde(basis, X.coords)
        B = solve_lower(chol, P[chol.perm])
        workspace = FitWorkspace(P=P, gramian=A, chol=chol, B=B)
    else:
        t1 = t0
    A, chol, P, B = (
        workspace.gramian,
        workspace.chol,
        workspace.P,
        workspace.B,
    )
    g = solve_lower(chol, y[chol.perm])
    t2 = time.perf_counter()
    report_stage["assemble"] = t1 - t0
    report_stage["factor"] = t2 - t1
    return workspace, g, report_stage


def _finish_hybrid(X, kernel, basis, workspace, g, y, mode, stages):
    chol, P, B, qrf = workspace.chol, workspace.P, workspace.B, workspace.qrf
    t0 = time.perf_counter()
    d = lstsq_coeffs(qrf, B, g)
    c_perm = solve_upper(chol, g - B @ d)
    c = np.empty_like(c_perm)
    c[chol.perm] = c_perm
    t1 = time.perf_counter()
    report = _new_report(X, kernel, mode)
    report.nnz_a = workspace.gramian.nnz
    report.nnz_l = chol.nnz
    report.rank = qrf.rank
    stages["solve"] = t1 - t0
    report.timings = stages
    model = UnifiedInterpolant(X, kernel, basis, c, d, mode, report)
    model._workspace = workspace
    return model


def fit_hybrid(
    X: PointSet,
    y,
    kernel: WendlandKernel,
    basis: TotalDegreeBasis,
    workspace: FitWorkspace | None = None,
    estimate_cond: bool = False,
) -> UnifiedInterpolant:
    """Sparse-Gramian fit through Cholesky whitening and one QR.

    Raises RankDeficiencyError when the whitened matrix fails the shared
    truncation test, in which case fit_rank_deficient applies.
    """
    y = _check_y(X, y)
    workspace, g, stages = _whiten(X, y, kernel, basis, workspace)
    if workspace.qrf is None or workspace.qrf.pivots is not None:
        workspace.qrf = qr(workspace.B)
    qrf = workspace.qrf
    diag = np.abs(np.diag(qrf.r))
    if diag.min(initial=np.inf) <= qrf.tol:
        rank = int(np.sum(diag > qrf.tol))
        raise RankDeficiencyError(
            f"whitened matrix numerically rank deficient ({rank} < {workspace.B.shape[1]}); "
            "use fit_rank_deficient",
            rank=rank,
        )
    model = _finish_hybrid(X, kernel, basis, workspace, g, y, "hybrid", stages)
    if estimate_cond:
        est = cond_estimate(workspace.gramian, workspace.chol)
        model.report.cond = est.value
    return model


def fit_rank_deficient(
    X: PointSet,
    y,
    kernel: WendlandKernel,
    basis: TotalDegreeBasis,
    workspace: FitWorkspace | None = None,
    estimate_cond: bool = False,
) -> UnifiedInterpolant:
    """Hybrid fit with truncated column-pivoted QR of the whitened matrix.

    Coefficients are solved on the retained pivot columns and scattered
    back with zeros elsewhere, which keeps the interpolation constraints
    intact on algebraic varieties such as spheres.
    """
    y = _check_y(X, y)
    workspace, g, stages = _whiten(X, y, kernel, basis, workspace)
    if workspace.qrf is None or workspace.qrf.pivots is None:
        workspace.qrf = cpqr_truncated(workspace.B)
    model = _finish_hybrid(X, kernel, basis, workspace, g, y, "rank_deficient", stages)
    if estimate_cond:
        est = cond_estimate(workspace.gramian, workspace.chol)
        model.report.cond = est.value
    return model


def fit_auto(
    X: PointSet,
    y,
    kernel: WendlandKernel,
    basis: TotalDegreeBasis,
    estimate_cond: bool = False,
) -> UnifiedInterpolant:
    """Dispatch on the support/separation regime.

    Support strictly below the separation distance goes to the diagonal
    limit; otherwise the hybrid pipeline runs, falling back to the
    rank-deficient variant if the whitened matrix is truncatable. Ties at
    support == separation resolve to hybrid.
    """
    if kernel.support_radius() < X.sep:
        return fit_diag(X, y, kernel, basis)
    try:
        return fit_hybrid(X, y, kernel, basis, estimate_cond=estimate_cond)
    except RankDeficiencyError:
        return fit_rank_deficient(X, y, kernel, basis, estimate_cond=estimate_cond)


def refit(model: UnifiedInterpolant, y) -> UnifiedInterpolant:
    """Fit new data on the retained factorizations of an existing model."""
    ws = getattr(model, "_workspace", None)
    if ws is None:
        raise ValueError("model carries no retained factorizations")
    fitter = {
        "diag": fit_diag,
        "hybrid": fit_hybrid,
        "rank_deficient": fit_rank_deficient,
    }[model.mode]
    return fitter(model.centers, y, model.kernel, model.basis, workspace=ws)


def evaluate(model: UnifiedInterpolant, eval_points: PointSet) -> np.ndarray:
    """Kernel part through the sparse cross matrix plus polynomial part.

    The polynomial term uses the rescale map stored at fit time; the
    Vandermonde block is assembled in row chunks to bound memory on large
    evaluation sets.
    """
    if eval_points.dim != model.centers.dim:
        raise ValueError(
            f"evaluation points have dimension {eval_points.dim}, "
            f"model expects {model.centers.dim}"
        )
    cross = assemble_cross(eval_points, model.centers, model.kernel)
    s = cross @ model.c
    coords = eval_points.coords
    block = 4096
    for i in range(0, len(coords), block):
        s[i : i + block] += vandermonde(model.basis, coords[i : i + block]) @ model.d
    return s


def direct_saddle_solve(
    X: PointSet,
    y,
    kernel: WendlandKernel,
    basis: TotalDegreeBasis,
    columns: np.ndarray | None = None,
):
    """Dense saddle-point oracle: build the full block system and solve it.

    Builds the (N+M) x (N+M) matrix [[A, P], [P^T, 0]] from brute-force
    kernel evaluations and solves with a pivoted dense factorization.
    `columns` optionally restricts the polynomial block to a column
    subset (for checking rank-truncated fits). Only suitable for small
    problems; this is a test oracle, not a pipeline.
    """
    y = _check_y(X, y)
    coords = X.coords
    sq = (coords * coords).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (coords @ coords.T), 0.0)
    A = kernel_eval(kernel, np.sqrt(d2))
    np.fill_diagonal(A, 1.0)
    P = vandermonde(basis, coords)
    if columns is not None:
        P = P[:, columns]
    n, m = X.n, P.shape[1]
    S = np.zeros((n + m, n + m))
    S[:n, :n] = A
    S[:n, n:] = P
    S[n:, :n] = P.T
    rhs = np.concatenate([y, np.zeros(m)])
    try:
        sol = sla.solve(S, rhs)
    except sla.LinAlgError as exc:
        raise RuntimeError(f"saddle-point oracle is singular: {exc}") from exc
    return sol[:n], sol[n:]


# ---------------------------------------------------------------------------
# model persistence (coefficients and descriptors only; refit to change y)

_MODEL_HEADER = "wendpoly-model v1"


def save_model(model: UnifiedInterpolant, path) -> None:
    b = model.basis
    rep = model.report
    with open(path, "w") as fh:
        fh.write(_MODEL_HEADER + "\n")
        fh.write(f"kernel {model.kernel.kernel_id}\n")
        fh.write(f"eps {model.kernel.eps:.17g}\n")
        fh.write(f"dim {b.dim}\n")
        fh.write(f"degree {b.degree}\n")
        fh.write("lo " + " ".join(f"{v:.17g}" for v in b.lo) + "\n")
        fh.write("hi " + " ".join(f"{v:.17g}" for v in b.hi) + "\n")
        fh.write(f"mode {model.mode}\n")
        fh.write(f"n {model.centers.n}\n")
        fh.write(f"m {len(model.d)}\n")
        if rep is not None:
            fh.write(
                f"diag q={rep.q:.17g} w={rep.w:.17g} rank={rep.rank} "
                f"cond={rep.cond:.17g} nnz_a={rep.nnz_a} nnz_l={rep.nnz_l}\n"
            )
        else:
            fh.write("diag\n")
        for row in model.centers.coords:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
        for v in model.c:
            fh.write(f"{v:.17g}\n")
        for v in model.d:
            fh.write(f"{v:.17g}\n")


def load_model(path) -> UnifiedInterpolant:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MODEL_HEADER:
        raise ValueError(f"{path} is not a wendpoly model file")
    fields = {}
    i = 1
    while not lines[i].startswith("diag"):
        key, _, val = lines[i].partition(" ")
        fields[key] = val
        i += 1
    i += 1  # skip the diagnostics line
    dim = int(fields["dim"])
    n = int(fields["n"])
    m = int(fields["m"])
    coords = np.array(
        [[float(v) for v in ln.split()] for ln in lines[i : i + n]]
    ).reshape(n, dim)
    c = np.array([float(v) for v in lines[i + n : i + 2 * n]])
    d = np.array([float(v) for v in lines[i + 2 * n : i + 2 * n + m]])
    degree = int(fields["degree"])
    basis = TotalDegreeBasis(
        dim=dim,
        degree=degree,
        indices=total_degree_indices(dim, degree),
        lo=np.array([float(v) for v in fields["lo"].split()]),
        hi=np.array([float(v) for v in fields["hi"].split()]),
    )
    kernel = kernel_from_id(fields["kernel"], float(fields["eps"]))
    return UnifiedInterpolant(
        centers=PointSet(coords),
        kernel=kernel,
        basis=basis,
        c=c,
        d=d,
        mode=fields["mode"],
    )
