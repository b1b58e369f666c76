"""Point-set generation, ingestion and geometric statistics.

The separation distance q used throughout this package is the raw minimum
pairwise distance (not the conventional half of it): a kernel support
strictly below q is exactly what diagonalizes the Gramian, so the raw
minimum is the quantity every regime decision needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

DOMAIN_TAGS = ("interval", "disk", "ball", "sphere", "hemisphere", "torus", "custom")
_SPHERE_TOL = 1e-12


class GenerationError(RuntimeError):
    """Raised when a node generator cannot place a valid point set."""


class DegenerateNodesError(ValueError):
    """Raised when a point set contains duplicate points."""


@dataclass(eq=False)
class PointSet:
    """Immutable N x d point cloud with cached separation / diameter.

    Duplicate points are rejected at construction. Sets tagged sphere or
    hemisphere must lie on the unit sphere to 1e-12.
    """

    coords: np.ndarray
    domain: str = "custom"
    _sep: float | None = field(default=None, repr=False)
    _diam: float | None = field(default=None, repr=False)

    def __post_init__(self):
        coords = np.ascontiguousarray(np.atleast_2d(self.coords), dtype=float)
        if coords.ndim != 2 or coords.shape[0] < 1:
            raise ValueError("coords must be a nonempty (N, d) array")
        if self.domain not in DOMAIN_TAGS:
            raise ValueError(f"unknown domain tag {self.domain!r}")
        object.__setattr__(self, "coords", coords)
        coords.setflags(write=False)
        if self.n >= 2 and self.sep <= 0:
            raise DegenerateNodesError("point set contains duplicate points")
        if self.domain in ("sphere", "hemisphere"):
            dev = np.abs(np.linalg.norm(coords, axis=1) - 1.0)
            if dev.max() > _SPHERE_TOL:
                raise ValueError(
                    f"{self.domain} points deviate from the unit sphere by {dev.max():.2e}"
                )

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def sep(self) -> float:
        """Minimum pairwise distance (inf for a single point)."""
        if self._sep is None:
            if self.n < 2:
                object.__setattr__(self, "_sep", float("inf"))
            else:
                dists, _ = cKDTree(self.coords).query(self.coords, k=2)
                object.__setattr__(self, "_sep", float(dists[:, 1].min()))
        return self._sep

    @property
    def diam(self) -> float:
        """Maximum pairwise distance (0 for a single point)."""
        if self._diam is None:
            object.__setattr__(self, "_diam", _max_pairwise(self.coords))
        return self._diam


def geometry_stats(points: PointSet) -> tuple[float, float]:
    """(q, w): exact minimum and maximum pairwise distances.

    Requires at least two points; duplicate points raise
    DegenerateNodesError (they cannot survive PointSet construction, but
    raw arrays are accepted too).
    """
    if not isinstance(points, PointSet):
        points = PointSet(np.asarray(points, dtype=float))
    if points.n < 2:
        raise ValueError("geometry statistics need at least two points")
    if points.sep <= 0:
        raise DegenerateNodesError("duplicate points: separation distance is zero")
    return points.sep, points.diam


def _max_pairwise(coords: np.ndarray) -> float:
    n, d = coords.shape
    if n < 2:
        return 0.0
    if d == 1:
        return float(coords.max() - coords.min())
    pts = coords
    if n > 64 and d in (2, 3):
        try:
            pts = coords[ConvexHull(coords).vertices]
        except QhullError:
            pass  # degenerate geometry; fall through to the full scan
    sq = (pts * pts).sum(axis=1)
    best = 0.0
    block = 256
    for i in range(0, len(pts), block):
        chunk = pts[i : i + block]
        d2 = sq[i : i + block, None] + sq[None, :] - 2.0 * (chunk @ pts.T)
        best = max(best, float(d2.max()))
    return float(np.sqrt(max(best, 0.0)))


def chebyshev_lobatto(n: int) -> PointSet:
    """Chebyshev extrema cos(pi*k/(n-1)), sorted ascending on [-1, 1]."""
    if n < 2:
        raise ValueError("need at least two Chebyshev-Lobatto nodes")
    x = np.sort(np.cos(np.pi * np.arange(n) / (n - 1)))
    return PointSet(x[:, None], domain="interval")


def kte_map(points: PointSet, alpha: float) -> PointSet:
    """Arcsine reparameterization x -> arcsin(alpha*x)/arcsin(alpha).

    Loosens the boundary clustering of Chebyshev-type nodes; endpoints map
    to endpoints, and alpha -> 0 approaches the identity.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    coords = points.coords
    if np.any(np.abs(coords) > 1.0 + 1e-15):
        raise ValueError("inputs to the arcsine map must lie in [-1, 1]")
    mapped = np.arcsin(alpha * np.clip(coords, -1.0, 1.0)) / np.arcsin(alpha)
    return PointSet(mapped, domain=points.domain)


def hemisphere_fibonacci(n: int, q_cluster: float = 1.5) -> PointSet:
    """Fibonacci-spiral nodes on the upper unit hemisphere.

    Heights follow z_k = 1 - (1 - k/(n-1))**q_cluster, which clusters the
    points toward the boundary circle z = 0 for q_cluster > 1; azimuths
    advance by the golden ratio. k = 0 sits on the equator, k = n-1 at the
    north pole.
    """
    if n < 2:
        raise ValueError("need at least two hemisphere nodes")
    if not q_cluster > 1.0:
        raise ValueError("clustering exponent must exceed 1")
    t = np.arange(n) / (n - 1)
    z = 1.0 - (1.0 - t) ** q_cluster
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    az = 2.0 * np.pi * golden * np.arange(n)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    coords = np.column_stack([r * np.cos(az), r * np.sin(az), z])
    # pin the pole exactly; r underflow keeps the rest on the sphere already
    coords[-1] = (0.0, 0.0, 1.0)
    return PointSet(coords, domain="hemisphere")


def sphere_spiral(n: int) -> PointSet:
    """Generalized spiral nodes on the unit sphere (quasi-uniform).

    Heights are equispaced in z; azimuths advance by 3.6/sqrt(n*(1-z^2)),
    with the poles placed directly.
    """
    if n < 2:
        raise ValueError("need at least two sphere nodes")
    z = -1.0 + 2.0 * np.arange(n) / (n - 1)
    theta = np.zeros(n)
    for k in range(1, n - 1):
        theta[k] = theta[k - 1] + 3.6 / np.sqrt(n * (1.0 - z[k] ** 2))
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    coords = np.column_stack([r * np.cos(theta), r * np.sin(theta), z])
    coords[0] = (0.0, 0.0, -1.0)
    coords[-1] = (0.0, 0.0, 1.0)
    return PointSet(coords, domain="sphere")


def _disk_boundary(h: float) -> np.ndarray:
    # chord spacing >= 0.75h so the returned set keeps that as its floor
    arg = min(1.0, 0.375 * h)
    n_ring = int(np.pi / np.arcsin(arg)) if arg < 1.0 else 3
    if n_ring < 3:
        raise GenerationError(f"spacing h={h} too coarse for the unit circle")
    ang = 2.0 * np.pi * np.arange(n_ring) / n_ring
    return np.column_stack([np.cos(ang), np.sin(ang)])


def _ball_boundary(h: float) -> np.ndarray:
    # shrink the shell count until its separation clears 0.75h
    target = 0.75 * h
    n_shell = max(4, int(4.0 * np.pi / target**2))
    for _ in range(60):
        shell = sphere_spiral(n_shell).coords
        d, _ = cKDTree(shell).query(shell, k=2)
        if d[:, 1].min() >= target:
            return shell
        n_shell = int(n_shell * 0.9)
        if n_shell < 4:
            break
    raise GenerationError(f"could not build a unit-sphere shell at spacing {target}")


def dart_throw(domain: str, h: float, seed: int, max_misses: int = 2000) -> PointSet:
    """Poisson-disk set by rejection sampling, boundary inserted first.

    Boundary nodes go in at spacing 0.75*h; interior candidates are drawn
    uniformly from a seeded PRNG and accepted when at least h away from
    everything accepted so far. Deterministic for a fixed seed. Generation
    stops after `max_misses` consecutive rejections.
    """
    if h <= 0:
        raise ValueError("spacing h must be positive")
    if domain not in ("interval", "disk", "ball"):
        raise ValueError(f"dart throwing supports interval/disk/ball, not {domain!r}")
    rng = np.random.default_rng(seed)

    if domain == "interval":
        boundary = np.array([[-1.0], [1.0]])
        dim = 1
    elif domain == "disk":
        boundary = _disk_boundary(h)
        dim = 2
    else:
        boundary = _ball_boundary(h)
        dim = 3

    cell = h
    grid: dict[tuple, list[np.ndarray]] = {}

    def cell_key(p):
        return tuple(int(np.floor(v / cell)) for v in p)

    def far_enough(p):
        k = cell_key(p)
        for off in np.ndindex(*(3,) * dim):
            neigh = tuple(k[i] + off[i] - 1 for i in range(dim))
            for q in grid.get(neigh, ()):
                if np.sum((q - p) ** 2) < h * h:
                    return False
        return True

    accepted = []
    for p in boundary:
        grid.setdefault(cell_key(p), []).append(p)
    misses = 0
    while misses < max_misses:
        cand = rng.uniform(-1.0, 1.0, size=dim)
        if domain != "interval" and np.sum(cand**2) > 1.0:
            continue
        if far_enough(cand):
            grid.setdefault(cell_key(cand), []).append(cand)
            accepted.append(cand)
            misses = 0
        else:
            misses += 1
    coords = np.vstack([boundary] + accepted) if accepted else boundary
    if len(coords) == 0:
        raise GenerationError("dart throwing produced no points")
    return PointSet(coords, domain=domain)


# empirical dart-throw densities: N is roughly density / h**dim
_DART_DENSITY = {"interval": 1.5, "disk": 2.1, "ball": 2.9}


def dart_throw_target(domain: str, n_target: int, seed: int) -> PointSet:
    """Dart-throw set with roughly n_target points (deterministic per seed)."""
    if n_target < 2:
        raise ValueError("need a target of at least two points")
    dim = {"interval": 1, "disk": 2, "ball": 3}[domain]
    h = (_DART_DENSITY[domain] / n_target) ** (1.0 / dim)
    best = None
    for _ in range(6):
        ps = dart_throw(domain, h, seed)
        if best is None or abs(ps.n - n_target) < abs(best.n - n_target):
            best = ps
        if abs(ps.n - n_target) <= 0.1 * n_target:
            return ps
        h *= (ps.n / n_target) ** (1.0 / dim)
    return best


def write_points(points: PointSet, path) -> None:
    """Plain-text point file: `d N` header then one point per line."""
    with open(path, "w") as fh:
        fh.write(f"{points.dim} {points.n}\n")
        for row in points.coords:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_points(path, domain: str = "custom") -> PointSet:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"malformed point file header in {path}")
        dim, n = int(header[0]), int(header[1])
        coords = np.loadtxt(fh, ndmin=2)
    if coords.shape != (n, dim):
        raise ValueError(
            f"point file {path} promised {(n, dim)} but contains {coords.shape}"
        )
    return PointSet(coords, domain=domain)
