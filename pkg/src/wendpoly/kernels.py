"""Compactly supported Wendland kernels, normalized to 1 at the origin.

The three orders provided here are the members positive-definite on R^3
(and hence on R and R^2 as well) with smoothness C^2, C^4 and C^6. Each
kernel is a polynomial inside its support and identically zero outside.
All evaluation happens through the dimensionless radius r = eps * dist,
where the shape parameter eps is the reciprocal of the support radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

# string ids used by the CLI and config files, keyed by smoothness
KERNEL_IDS = {"c2": 1, "c4": 2, "c6": 3}
_ID_BY_ORDER = {v: k for k, v in KERNEL_IDS.items()}


class QuadratureError(RuntimeError):
    """Raised when the reference quadrature does not reach its tolerance."""


def _phi1(r):
    return (1.0 - r) ** 4 * (4.0 * r + 1.0)


def _phi2(r):
    return (1.0 - r) ** 6 * (35.0 * r * r + 18.0 * r + 3.0) / 3.0


def _phi3(r):
    return (1.0 - r) ** 8 * (32.0 * r**3 + 25.0 * r * r + 8.0 * r + 1.0)


_CLOSED_FORMS = {1: _phi1, 2: _phi2, 3: _phi3}


@dataclass(frozen=True)
class WendlandKernel:
    """Wendland kernel of smoothness C^(2*order) with shape parameter eps.

    order selects the closed polynomial form (1, 2 or 3); eps > 0 is the
    reciprocal of the support radius, so evaluation at a distance d uses
    the dimensionless radius eps * d.
    """

    order: int
    eps: float

    def __post_init__(self):
        if self.order not in _CLOSED_FORMS:
            raise ValueError(f"kernel order must be 1, 2 or 3, got {self.order}")
        if not self.eps > 0:
            raise ValueError(f"shape parameter must be positive, got {self.eps}")

    @property
    def kernel_id(self) -> str:
        return _ID_BY_ORDER[self.order]

    def support_radius(self) -> float:
        return 1.0 / self.eps

    def __call__(self, dist):
        return kernel_eval(self, dist)


def kernel_from_id(kernel_id: str, eps: float) -> WendlandKernel:
    try:
        order = KERNEL_IDS[kernel_id]
    except KeyError:
        raise ValueError(
            f"unknown kernel id {kernel_id!r}; expected one of {sorted(KERNEL_IDS)}"
        ) from None
    return WendlandKernel(order=order, eps=eps)


def kernel_eval(kernel: WendlandKernel, dist):
    """Evaluate the kernel at nonnegative distances (scalar or array).

    Returns values in [0, 1]: exactly 1 at distance 0 and exactly 0 at or
    beyond the support radius 1/eps.
    """
    d = np.asarray(dist, dtype=float)
    if np.any(d < 0):
        raise ValueError("kernel distances must be nonnegative")
    r = kernel.eps * d
    inside = r < 1.0
    rc = np.where(inside, r, 0.0)
    vals = np.where(inside, _CLOSED_FORMS[kernel.order](rc), 0.0)
    if np.isscalar(dist) or d.ndim == 0:
        return float(vals)
    return vals


def reference_eval(m: int, n: int, r: float, abs_tol: float = 1e-12) -> float:
    """Quadrature oracle for the kernel's integral definition.

    Integrates s*(1-s)^m * (s^2 - r^2)^(n-1) over [r, 1] and normalizes by
    the value of the same integral at r = 0, so the oracle equals 1 at the
    origin. Intended only for testing the closed forms, with m = 3//2+n+1.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be at least 1")
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r >= 1.0:
        # empty integration interval at r = 1, zero by definition beyond
        return 0.0

    def integrand(s, rr):
        return s * (1.0 - s) ** m * (s * s - rr * rr) ** (n - 1)

    num, num_err = quad(integrand, r, 1.0, args=(r,), epsabs=abs_tol, epsrel=1e-13, limit=200)
    den, den_err = quad(integrand, 0.0, 1.0, args=(0.0,), epsabs=abs_tol, epsrel=1e-13, limit=200)
    if num_err > 1e-10 or den_err > 1e-10:
        raise QuadratureError(
            f"kernel quadrature did not converge (errors {num_err:.2e}, {den_err:.2e})"
        )
    return num / den
