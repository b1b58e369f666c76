"""Sparse Gramian assembly, banded Cholesky, QR variants, condition estimates.

Neighbor search uses a uniform background grid whose cell size equals the
kernel support radius: every pair inside the support lies in adjacent
cells, which is optimal for fixed-radius queries and needs no tree.

The Cholesky factorization reorders with reverse Cuthill-McKee and then
factorizes the resulting band with LAPACK's banded routine; the band is
the sparsity structure being exploited, and the permutation is carried by
the factor object so callers never see it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .kernels import WendlandKernel, kernel_eval
from .nodes import PointSet


class NotSPDError(RuntimeError):
    """Factorization hit a non-positive pivot (duplicates or conditioning)."""


class SingularFactorError(RuntimeError):
    """A triangular solve encountered a zero diagonal."""


# ---------------------------------------------------------------------------
# background-grid neighbor search


def _grid_cells(coords: np.ndarray, cell: float) -> dict:
    keys = np.floor(coords / cell).astype(np.int64)
    cells: dict[tuple, list[int]] = {}
    for i, k in enumerate(map(tuple, keys)):
        cells.setdefault(k, []).append(i)
    return {k: np.asarray(v, dtype=np.int64) for k, v in cells.items()}


def _close_pairs_block(rows, cols, a_idx, a_pts, b_idx, b_pts, r2, same_cell):
    # row-blocked so a handful of huge cells (support beyond the domain)
    # cannot blow up memory
    block = 512
    for s in range(0, len(a_idx), block):
        pa = a_pts[s : s + block]
        d2 = ((pa[:, None, :] - b_pts[None, :, :]) ** 2).sum(axis=2)
        ii, jj = np.nonzero(d2 < r2)
        if same_cell:
            keep = (s + ii) < jj
            ii, jj = ii[keep], jj[keep]
        rows.append(a_idx[s + ii])
        cols.append(b_idx[jj])


def _pairs_within(coords: np.ndarray, radius: float):
    """Index pairs (i, j), i < j, with distance strictly below `radius`."""
    dim = coords.shape[1]
    cells = _grid_cells(coords, radius)
    # half-neighborhood: pair each cell with itself and with its
    # lexicographically positive neighbors so no pair is visited twice
    offsets = [tuple(o - 1 for o in off) for off in np.ndindex(*(3,) * dim)]
    offsets = [off for off in offsets if off > (0,) * dim]
    rows, cols = [], []
    r2 = radius * radius
    for key, idx in cells.items():
        pts = coords[idx]
        if len(idx) > 1:
            _close_pairs_block(rows, cols, idx, pts, idx, pts, r2, same_cell=True)
        for off in offsets:
            other = cells.get(tuple(k + o for k, o in zip(key, off)))
            if other is None:
                continue
            _close_pairs_block(rows, cols, idx, pts, other, coords[other], r2, same_cell=False)
    if rows:
        return np.concatenate(rows), np.concatenate(cols)
    return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)


class SparseSymmetric:
    """Symmetric matrix stored as the lower triangle in CSR form."""

    def __init__(self, lower: sp.csr_matrix):
        self.lower = lower
        self.n = lower.shape[0]
        self._full = None

    @property
    def nnz(self) -> int:
        """Stored (lower-triangle) nonzero count, diagonal included."""
        return self.lower.nnz

    def full(self) -> sp.csr_matrix:
        if self._full is None:
            strict = sp.tril(self.lower, k=-1)
            self._full = (self.lower + strict.T).tocsr()
        return self._full

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.full() @ x

    def to_dense(self) -> np.ndarray:
        return self.full().toarray()


def assemble_gramian(points: PointSet, kernel: WendlandKernel) -> SparseSymmetric:
    """Kernel Gramian over all point pairs inside the support radius.

    The diagonal is exactly 1; entries that evaluate to exactly zero at
    the support boundary are dropped from the pattern. A support below
    the separation distance therefore yields the identity pattern.
    """
    coords = points.coords
    n = points.n
    i, j = _pairs_within(coords, kernel.support_radius())
    if len(i):
        dist = np.linalg.norm(coords[i] - coords[j], axis=1)
        vals = kernel_eval(kernel, dist)
        keep = vals > 0.0
        i, j, vals = i[keep], j[keep], vals[keep]
    else:
        vals = np.zeros(0)
    # lower triangle: row >= col
    rows = np.concatenate([np.maximum(i, j), np.arange(n)])
    cols = np.concatenate([np.minimum(i, j), np.arange(n)])
    data = np.concatenate([vals, np.ones(n)])
    lower = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    lower.sort_indices()
    return SparseSymmetric(lower)


def assemble_cross(
    eval_points: PointSet, centers: PointSet, kernel: WendlandKernel
) -> sp.csr_matrix:
    """Rectangular kernel matrix between evaluation points and centers."""
    if eval_points.dim != centers.dim:
        raise ValueError(
            f"dimension mismatch: {eval_points.dim} vs {centers.dim}"
        )
    radius = kernel.support_radius()
    xe, xc = eval_points.coords, centers.coords
    cells = _grid_cells(xc, radius)
    dim = xc.shape[1]
    eval_cells = _grid_cells(xe, radius)
    offsets = [tuple(o - 1 for o in off) for off in np.ndindex(*(3,) * dim)]
    rows, cols, data = [], [], []
    r2 = radius * radius
    for key, eidx in eval_cells.items():
        cand = [cells[k] for off in offsets if (k := tuple(a + b for a, b in zip(key, off))) in cells]
        if not cand:
            continue
        cand = np.concatenate(cand)
        pts_c = xc[cand]
        for s in range(0, len(eidx), 512):
            sub = eidx[s : s + 512]
            d2 = ((xe[sub][:, None, :] - pts_c[None, :, :]) ** 2).sum(axis=2)
            ii, jj = np.nonzero(d2 < r2)
            if len(ii):
                vals = kernel_eval(kernel, np.sqrt(d2[ii, jj]))
                keep = vals > 0.0
                rows.append(sub[ii[keep]])
                cols.append(cand[jj[keep]])
                data.append(vals[keep])
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        data = np.concatenate(data)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        data = np.zeros(0)
    out = sp.csr_matrix((data, (rows, cols)), shape=(eval_points.n, centers.n))
    out.sort_indices()
    return out


# ---------------------------------------------------------------------------
# banded Cholesky behind a fill-reducing (bandwidth-reducing) ordering


@dataclass(eq=False)
class CholeskyFactor:
    """Lower banded factor L with its RCM permutation: A[p][:,p] = L L^T."""

    perm: np.ndarray
    bands: np.ndarray  # (bandwidth+1, n); bands[k, j] = L[j+k, j]
    bandwidth: int

    @property
    def n(self) -> int:
        return self.bands.shape[1]

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.bands))

    def _upper_bands(self) -> np.ndarray:
        if not hasattr(self, "_ub"):
            ub = np.zeros_like(self.bands)
            n = self.n
            for k in range(self.bandwidth + 1):
                ub[self.bandwidth - k, k:] = self.bands[k, : n - k]
            self._ub = ub
        return self._ub

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Apply the inverse of A, permutation handled internally."""
        rhs = np.asarray(rhs, dtype=float)
        z = solve_lower(self, rhs[self.perm])
        w = solve_upper(self, z)
        out = np.empty_like(w)
        out[self.perm] = w
        return out


def cholesky(A: SparseSymmetric) -> CholeskyFactor:
    """Sparse Cholesky via RCM ordering plus banded LAPACK factorization."""
    full = A.full()
    perm = np.asarray(reverse_cuthill_mckee(full, symmetric_mode=True))
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    coo = A.lower.tocoo()
    r = inv[coo.row]
    c = inv[coo.col]
    rows = np.maximum(r, c)
    cols = np.minimum(r, c)
    bw = int((rows - cols).max()) if len(rows) else 0
    ab = np.zeros((bw + 1, A.n))
    ab[rows - cols, cols] = coo.data
    try:
        bands = sla.cholesky_banded(ab, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise NotSPDError(f"Gramian is not positive definite: {exc}") from exc
    return CholeskyFactor(perm=perm, bands=bands, bandwidth=bw)


def solve_lower(factor: CholeskyFactor, rhs: np.ndarray) -> np.ndarray:
    """Forward substitution L z = rhs (no permutation applied)."""
    if np.any(factor.bands[0] == 0.0):
        raise SingularFactorError("zero diagonal in triangular factor")
    return sla.solve_banded(
        (factor.bandwidth, 0), factor.bands, rhs, check_finite=False
    )


def solve_upper(factor_or_r, rhs: np.ndarray) -> np.ndarray:
    """Back substitution with L^T (CholeskyFactor) or a dense upper R."""
    if isinstance(factor_or_r, CholeskyFactor):
        f = factor_or_r
        if np.any(f.bands[0] == 0.0):
            raise SingularFactorError("zero diagonal in triangular factor")
        return sla.solve_banded((0, f.bandwidth), f._upper_bands(), rhs, check_finite=False)
    r = np.asarray(factor_or_r)
    if np.any(np.diag(r) == 0.0):
        raise SingularFactorError("zero diagonal in triangular matrix")
    return sla.solve_triangular(r, rhs, lower=False, check_finite=False)


# ---------------------------------------------------------------------------
# dense QR, truncated column-pivoted QR


@dataclass(eq=False)
class QRFactor:
    """Reduced QR data: B[:, pivots] ~ q[:, :rank] @ r[:rank, :rank]."""

    q: np.ndarray
    r: np.ndarray
    pivots: np.ndarray | None
    rank: int
    tol: float


def truncation_tol(shape: tuple[int, int], r: np.ndarray) -> float:
    """max(N, M) * ulp(||R||_inf), the shared rank-truncation rule."""
    norm_inf = float(np.abs(r).sum(axis=1).max()) if r.size else 0.0
    return max(shape) * float(np.spacing(norm_inf))


def qr(B: np.ndarray) -> QRFactor:
    """Reduced Householder QR; rank is recorded as the full column count."""
    B = np.asarray(B, dtype=float)
    q, r = np.linalg.qr(B)
    return QRFactor(q=q, r=r, pivots=None, rank=B.shape[1], tol=truncation_tol(B.shape, r))


def cpqr_truncated(B: np.ndarray) -> QRFactor:
    """Column-pivoted QR truncated at the shared tolerance.

    The numerical rank is the number of leading diagonal entries of the
    pivoted R exceeding max(N,M)*ulp(||R||_inf); only the corresponding
    leading blocks of Q and R are returned, along with the pivot order.
    """
    B = np.asarray(B, dtype=float)
    q, r, piv = sla.qr(B, mode="economic", pivoting=True, check_finite=False)
    tol = truncation_tol(B.shape, r)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > tol))
    return QRFactor(
        q=q[:, :rank],
        r=r[:rank, :rank],
        pivots=piv,
        rank=rank,
        tol=tol,
    )


def lstsq_coeffs(factor: QRFactor, B: np.ndarray, rhs: np.ndarray, refine: int = 1) -> np.ndarray:
    """Least-squares solve through a QRFactor, with iterative refinement.

    One fixed-precision refinement pass keeps the residual orthogonal to
    the column space even when the basis columns are poorly scaled; for a
    truncated factor the coefficients live on the pivot columns and the
    refinement runs in that subspace.
    """
    cols = slice(None) if factor.pivots is None else factor.pivots[: factor.rank]
    Br = B if factor.pivots is None else B[:, cols]
    x = solve_upper(factor.r, factor.q.T @ rhs)
    for _ in range(refine):
        x = x + solve_upper(factor.r, factor.q.T @ (rhs - Br @ x))
    if factor.pivots is None:
        return x
    full = np.zeros(B.shape[1])
    full[cols] = x
    return full


# ---------------------------------------------------------------------------
# condition estimation


@dataclass
class CondEstimate:
    value: float
    lam_max: float
    lam_min: float
    converged: bool


def cond_estimate(
    A: SparseSymmetric,
    factor: CholeskyFactor,
    rel_tol: float = 0.02,
    max_iter: int = 400,
    seed: int = 7,
) -> CondEstimate:
    """Two-norm condition estimate via power and inverse iteration.

    The largest eigenvalue comes from power iteration on A, the smallest
    from inverse iteration through the Cholesky solve. Intended accuracy
    is a few percent, which is plenty for log-scale shape tuning; the
    `converged` flag drops when either iteration hits its cap.
    """
    n = A.n
    if n == 1:
        v = float(A.lower[0, 0])
        return CondEstimate(1.0, v, v, True)
    rng = np.random.default_rng(seed)
    full = A.full()

    def dominant(apply_op):
        x = rng.standard_normal(n)
        x /= np.linalg.norm(x)
        lam = 0.0
        for _ in range(max_iter):
            y = apply_op(x)
            norm = np.linalg.norm(y)
            if norm == 0.0:
                return 0.0, True
            lam_new = float(x @ y)
            x = y / norm
            if abs(lam_new - lam) <= rel_tol * abs(lam_new):
                return lam_new, True
            lam = lam_new
        return lam, False

    lam_max, ok_max = dominant(lambda v: full @ v)
    inv_lam, ok_min = dominant(factor.solve)
    lam_min = 1.0 / inv_lam if inv_lam > 0 else np.inf
    value = lam_max / lam_min if lam_min > 0 else np.inf
    return CondEstimate(
        value=max(value, 1.0),
        lam_max=lam_max,
        lam_min=lam_min,
        converged=ok_max and ok_min,
    )
