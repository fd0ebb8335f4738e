"""Elastostatic saddle solves, the weakly symmetric elliptic projection,
and discrete initial data for the dynamic solver."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .assembly import (BlockSystem, assemble_body_load, assemble_dirichlet_load,
                       assemble_stress_mass)
from .errors import SingularSystemError
from .quadrature import triangle_rule
from .spaces import DiscreteSpaces, l2_project_velocity


@dataclass
class StaticSolution:
    sigma: np.ndarray
    u: np.ndarray
    r: np.ndarray


@dataclass
class InitialData:
    """Discrete initial data: weakly symmetric sigma0, projected v0 and u0."""

    sigma0: np.ndarray
    v0: np.ndarray
    r0: np.ndarray
    u0: np.ndarray


def _saddle_factorization(system: BlockSystem, key: str, top_left: sps.spmatrix):
    cache = system._cache
    if key not in cache:
        S = sps.bmat(
            [[top_left, system.Bmat.T, system.Cmat.T],
             [system.Bmat, None, None],
             [system.Cmat, None, None]],
            format="csc",
        )
        try:
            cache[key] = (spla.splu(S), S)
        except RuntimeError as exc:
            raise SingularSystemError(f"saddle factorization failed: {exc}") from exc
    return cache[key]


def _solve_saddle(system: BlockSystem, key: str, top_left, rhs_sigma, rhs_v, rhs_r,
                  residual_tol: float = 1e-10):
    lu, S = _saddle_factorization(system, key, top_left)
    rhs = np.concatenate([rhs_sigma, rhs_v, rhs_r])
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("saddle solve produced non-finite values")
    scale = max(np.linalg.norm(rhs), np.linalg.norm(x), 1.0)
    res = np.linalg.norm(S @ x - rhs)
    if res > residual_tol * scale:
        raise SingularSystemError(f"saddle solve residual {res:.3e} exceeds tolerance")
    nM, nV, _ = system.dims
    return x[:nM], x[nM:nM + nV], x[nM + nV:]


def solve_elastostatics(system: BlockSystem, rhs_sigma: np.ndarray,
                        rhs_v: np.ndarray, rhs_r: np.ndarray) -> StaticSolution:
    """Solve the weak-symmetry saddle system with the compliance pairing.

    Block rows: (A s, tau) + (div tau, u) + (r, tau) = rhs_sigma;
    (div s, w) = rhs_v; (s, q) = rhs_r.
    """
    sig, u, r = _solve_saddle(system, "static", system.Amat, rhs_sigma, rhs_v, rhs_r)
    return StaticSolution(sigma=sig, u=u, r=r)


def elliptic_projection(system: BlockSystem, sigma: Callable, div_sigma: Callable,
                        degree: int = 12) -> np.ndarray:
    """Weakly symmetric elliptic projection of an exact stress field.

    Solves the saddle system with the plain L2 stress pairing and data
    ((sigma, tau), (div sigma, w), (sigma, q)); div_sigma must be supplied
    analytically.  The result preserves the divergence moments and the
    skew moments of sigma.
    """
    spaces = system.spaces
    if "stress_mass" not in system._cache:
        system._cache["stress_mass"] = assemble_stress_mass(spaces)
    mass = system._cache["stress_mass"]

    rule = triangle_rule(degree)
    X = spaces.physical_points(rule)
    W = spaces.quad_weights(rule)
    vals = np.asarray(sigma(X[..., 0], X[..., 1]), dtype=float)  # (2, 2, T, nq)
    V = spaces.stress_row_values(rule)
    rhs_sigma = np.empty(spaces.dim_stress)
    for r in range(2):
        loc = np.einsum("tq,tbdq,dtq->tb", W, V, vals[r])
        vec = np.zeros(spaces.n_row_global)
        np.add.at(vec, spaces.row_dof_map, loc)
        rhs_sigma[r * spaces.n_row_global:(r + 1) * spaces.n_row_global] = vec

    rhs_v = assemble_body_load(spaces, lambda t, x, y: div_sigma(x, y), 0.0, degree=degree)

    psi = spaces.scalar_values(rule)
    skew = vals[0, 1] - vals[1, 0]
    rhs_r = np.einsum("tq,iq,tq->ti", W, psi, skew).ravel()

    sig, _, _ = _solve_saddle(system, "projection", mass, rhs_sigma, rhs_v, rhs_r)
    return sig


def build_initial_data(case, system: BlockSystem, spaces: DiscreteSpaces,
                       degree: int | None = None) -> InitialData:
    """Initial data: v0 and u0 by local L2 projection, (sigma0, r0) from the
    mixed elliptic system driven by div sigma(0), weakly symmetric by
    construction.  For inhomogeneous displacement data the boundary moment
    of u(0) enters the first block row."""
    if degree is None:
        degree = 2 * spaces.k + 4
    v0 = l2_project_velocity(spaces, lambda x, y: case.v(0.0, x, y), degree=degree)
    u0 = l2_project_velocity(spaces, lambda x, y: case.u(0.0, x, y), degree=degree)

    if case.homogeneous:
        rhs_sigma = np.zeros(spaces.dim_stress)
    else:
        rhs_sigma = assemble_dirichlet_load(spaces, case.u, 0.0, degree=degree)
    rhs_v = assemble_body_load(spaces, case.div_sigma, 0.0, degree=degree)
    rhs_r = np.zeros(spaces.dim_rotation)

    sol = solve_elastostatics(system, rhs_sigma, rhs_v, rhs_r)
    return InitialData(sigma0=sol.sigma, v0=v0, r0=sol.r, u0=u0)


def infsup_constant(system: BlockSystem) -> float:
    """Discrete inf-sup constant of the (M_h; V_h x K_h) pairing.

    beta^2 is the smallest eigenvalue of N^{-1} Bb D^{-1} Bb^T with
    Bb = [B; C], D the H(div) Gram on M_h and N the V_h x K_h mass,
    the rotation measured in the scalar L2 norm of its stored component.
    Dense eigensolve; intended for small diagnostic meshes only.
    """
    import scipy.linalg as sla

    spaces = system.spaces
    mass = assemble_stress_mass(spaces)
    # velocity mass with rho = 1 is area * I per scalar block; same for rotation
    areas = spaces.areas
    m = spaces.n_scalar
    mv_diag = np.repeat(areas, 2 * m)
    mk_diag = np.repeat(areas, m)

    divdiv = system.Bmat.T @ sps.diags(1.0 / mv_diag) @ system.Bmat
    D = (mass + divdiv).toarray()
    Bb = sps.vstack([system.Bmat, system.Cmat]).toarray()
    N = np.diag(np.concatenate([mv_diag, mk_diag]))
    S = Bb @ np.linalg.solve(D, Bb.T)
    eigs = sla.eigh(S, N, eigvals_only=True)
    return float(np.sqrt(max(eigs[0], 0.0)))
