"""Quadrature rules on the reference triangle and the unit edge.

Triangle rules are conical products of a Gauss-Legendre rule with a
Gauss-Jacobi rule (weight 1 - y), which gives positive weights, interior
points, and certified polynomial exactness for every requested degree.
Edge rules are plain Gauss-Legendre on [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import MixedElastError

MAX_DEGREE = 12


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on a reference element.

    Triangle rules store barycentric points of shape (n, 3) with weights
    summing to 1/2 (the reference area); edge rules store parametric points
    of shape (n,) in [0, 1] with weights summing to 1.
    """

    points: np.ndarray
    weights: np.ndarray
    exactness: int

    @property
    def xy(self) -> np.ndarray:
        """Cartesian reference coordinates (n, 2) of a triangle rule."""
        return self.points[:, 1:]


def _check_degree(d: int) -> None:
    if not 1 <= d <= MAX_DEGREE:
        raise MixedElastError(f"quadrature degree must be in 1..{MAX_DEGREE}, got {d}")


@lru_cache(maxsize=None)
def triangle_rule(d: int) -> QuadratureRule:
    """Rule on the reference triangle exact for polynomials of degree <= d."""
    _check_degree(d)
    m = (d + 2) // 2
    # Gauss-Legendre on [0, 1]
    xg, wg = np.polynomial.legendre.leggauss(m)
    xg = 0.5 * (xg + 1.0)
    wg = 0.5 * wg
    # Gauss-Jacobi on [0, 1] with weight (1 - y)
    yj, wj = roots_jacobi(m, 1.0, 0.0)
    yj = 0.5 * (yj + 1.0)
    wj = 0.25 * wj  # affine map scales both the measure and the weight factor
    x = np.outer(xg, 1.0 - yj).ravel()
    y = np.tile(yj, m)
    w = np.outer(wg, wj).ravel()
    bary = np.column_stack([1.0 - x - y, x, y])
    return QuadratureRule(points=bary, weights=w, exactness=d)


@lru_cache(maxsize=None)
def edge_rule(d: int) -> QuadratureRule:
    """Gauss rule on [0, 1] with ceil((d+1)/2) points, exact to degree d."""
    _check_degree(d)
    m = (d + 1 + 1) // 2
    t, w = np.polynomial.legendre.leggauss(m)
    return QuadratureRule(points=0.5 * (t + 1.0), weights=0.5 * w, exactness=d)
