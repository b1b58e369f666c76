"""Total-degree tensor-product Legendre basis and Vandermonde assembly.

Points are rescaled onto [-1, 1]^d (per-dimension affine map from the
fitting data's bounding box) before any polynomial is evaluated; kernels
elsewhere always see the original coordinates. Univariate Legendre values
come from numpy's three-term-recurrence evaluator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

# default degree-scaling constants by dimension; manifolds use the d=3 value
DEGREE_SCALE_DEFAULTS = {1: 1.0, 2: 0.8, 3: 1.0}


def total_degree_indices(dim: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """Multi-indices with |alpha| <= degree in graded lexicographic order.

    Within each total degree the leading dimensions carry the higher
    exponents first, e.g. d=3, degree 1 gives (0,0,0), (1,0,0), (0,1,0),
    (0,0,1). The ordering is deterministic so Vandermonde columns and
    serialized coefficient vectors are reproducible.
    """
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    alphas = [
        a
        for a in itertools.product(range(degree + 1), repeat=dim)
        if sum(a) <= degree
    ]
    alphas.sort(key=lambda a: (sum(a), tuple(-x for x in a)))
    return tuple(alphas)


def degree_from_points(n_points: int, dim: int, scale: float | None = None) -> int:
    """Degree schedule floor(scale * N**(1/d)) with exact-power correction.

    With scale omitted the per-dimension defaults apply (0.8 in 2D, 1.0
    otherwise). Perfect d-th powers are detected so that e.g. 1000**(1/3)
    rounding down to 9.999... cannot spuriously floor the result.
    """
    if n_points < 1 or dim < 1:
        raise ValueError("need n_points >= 1 and dim >= 1")
    if scale is None:
        scale = DEGREE_SCALE_DEFAULTS.get(dim, 1.0)
    if not scale > 0:
        raise ValueError("degree scale must be positive")
    root = float(n_points) ** (1.0 / dim)
    nearest = int(round(root))
    if nearest**dim == n_points:
        root = float(nearest)
    return int(np.floor(scale * root))


@dataclass(frozen=True, eq=False)
class TotalDegreeBasis:
    """Graded-lex total-degree Legendre basis with its affine rescale map."""

    dim: int
    degree: int
    indices: tuple[tuple[int, ...], ...]
    lo: np.ndarray
    hi: np.ndarray

    @property
    def size(self) -> int:
        return len(self.indices)

    def rescale(self, coords: np.ndarray) -> np.ndarray:
        """Map coordinates onto [-1,1]^d; degenerate axes collapse to 0."""
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        span = self.hi - self.lo
        safe = np.where(span > 0, span, 1.0)
        xhat = 2.0 * (coords - self.lo) / safe - 1.0
        return np.where(span > 0, xhat, 0.0)


def build_basis(points, degree: int) -> TotalDegreeBasis:
    """Basis over the bounding box of `points` (a PointSet or (N,d) array)."""
    coords = np.atleast_2d(np.asarray(getattr(points, "coords", points), dtype=float))
    if coords.size == 0:
        raise ValueError("cannot build a basis over an empty point set")
    dim = coords.shape[1]
    indices = total_degree_indices(dim, degree)
    assert len(indices) == comb(degree + dim, dim)
    return TotalDegreeBasis(
        dim=dim,
        degree=degree,
        indices=indices,
        lo=coords.min(axis=0),
        hi=coords.max(axis=0),
    )


def vandermonde(basis: TotalDegreeBasis, coords: np.ndarray) -> np.ndarray:
    """Dense K x M matrix of basis evaluations at the given points.

    Entry (i, j) is the product over dimensions of Legendre polynomials at
    the rescaled coordinates. Points falling outside [-1,1] after rescale
    are evaluated anyway (evaluation sets may extrapolate slightly).
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if coords.shape[1] != basis.dim:
        raise ValueError(
            f"points have dimension {coords.shape[1]}, basis expects {basis.dim}"
        )
    xhat = basis.rescale(coords)
    # univariate Legendre tables per dimension, degree 0..ell
    tables = [
        np.polynomial.legendre.legvander(xhat[:, k], basis.degree)
        for k in range(basis.dim)
    ]
    out = np.empty((coords.shape[0], basis.size))
    for j, alpha in enumerate(basis.indices):
        col = tables[0][:, alpha[0]].copy()
        for k in range(1, basis.dim):
            col *= tables[k][:, alpha[k]]
        out[:, j] = col
    return out
