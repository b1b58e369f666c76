"""Registry of the benchmark target functions used by the study harness."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class TargetFunction:
    id: str
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    note: str

    def __call__(self, coords: np.ndarray) -> np.ndarray:
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        return self.fn(coords)


def _register(registry, id, dim, note):
    def wrap(fn):
        registry[id] = TargetFunction(id=id, dim=dim, fn=fn, note=note)
        return fn

    return wrap


REGISTRY: dict[str, TargetFunction] = {}


@_register(REGISTRY, "abs1", 1, "piecewise smooth; algebraic convergence")
def _abs1(x):
    return np.abs(x[:, 0])


@_register(REGISTRY, "runge1", 1, "analytic; root-exponential convergence")
def _runge1(x):
    return 1.0 / (1.0 + 25.0 * x[:, 0] ** 2)


@_register(REGISTRY, "radial32_2d", 2, "C^1 radial power on the disk")
def _radial32_2d(x):
    return (x[:, 0] ** 2 + x[:, 1] ** 2) ** 1.5


@_register(REGISTRY, "expridge_2d", 2, "analytic ridge on the disk")
def _expridge_2d(x):
    return np.exp((x[:, 0] + x[:, 1]) ** 2 / 0.2)


@_register(REGISTRY, "radial32_3d", 3, "C^1 radial power on the ball")
def _radial32_3d(x):
    return (x[:, 0] ** 2 + x[:, 1] ** 2 + x[:, 2] ** 2) ** 1.5


@_register(REGISTRY, "expridge_3d", 3, "analytic ridge on the ball")
def _expridge_3d(x):
    return np.exp((x[:, 0] + x[:, 1] + x[:, 2]) ** 2 / 0.8)


@_register(REGISTRY, "c1_surface", 3, "C^1 odd cubic, used on manifolds")
def _c1_surface(x):
    return (
        x[:, 0] ** 2 * np.abs(x[:, 0])
        + x[:, 1] ** 2 * np.abs(x[:, 1])
        + x[:, 2] ** 2 * np.abs(x[:, 2])
    )


def registry_lookup(target_id: str) -> TargetFunction:
    try:
        return REGISTRY[target_id]
    except KeyError:
        raise ValueError(
            f"unknown target {target_id!r}; known ids: {', '.join(sorted(REGISTRY))}"
        ) from None
