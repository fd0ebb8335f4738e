"""Sparse block matrices and load vectors of the semidiscrete system.

The block ODE reads  E ydot = G y + F(t)  with

    E = [[A, 0, C^T], [0, M, 0], [C, 0, 0]],
    G = [[0, -B^T, 0], [B, 0, 0], [0, 0, 0]],
    F = (dirichlet_load(t), load(t), 0),

where the entries are (A phi_j, phi_i), (div phi_j, psi_i), (phi_j, chi_i)
and (rho psi_j, psi_i) over the stress, velocity and rotation bases.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sps

from . import polynomials as poly
from .errors import AssemblyError, MixedElastError
from .mesh import DIRICHLET, Mesh
from .quadrature import edge_rule, triangle_rule
from .spaces import DiscreteSpaces, _rotate_minus90


@dataclass
class MaterialModel:
    """Isotropic material data: Lame coefficients, density, skew extension.

    ``rho`` may be a positive constant or a callable rho(x, y); for a
    callable the bounds rho0 <= rho <= rho1 must be supplied and are checked
    at the quadrature points during assembly.
    """

    mu: float
    lambda_: float
    rho: float | Callable = 1.0
    rho0: float | None = None
    rho1: float | None = None
    skw_scale: float = 1.0

    def __post_init__(self):
        if self.mu <= 0 or self.lambda_ <= 0 or self.skw_scale <= 0:
            raise MixedElastError("mu, lambda_ and skw_scale must be positive")
        if callable(self.rho):
            if self.rho0 is None or self.rho1 is None:
                raise MixedElastError("rho bounds rho0, rho1 required for a spatial density")
        else:
            value = float(self.rho)
            if value <= 0:
                raise MixedElastError("rho must be positive")
            self.rho0 = value if self.rho0 is None else self.rho0
            self.rho1 = value if self.rho1 is None else self.rho1
        if not 0 < self.rho0 <= self.rho1:
            raise MixedElastError("need 0 < rho0 <= rho1")

    def rho_at(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if callable(self.rho):
            return np.broadcast_to(np.asarray(self.rho(x, y), dtype=float), np.shape(x)).copy()
        return np.full(np.shape(x), float(self.rho))


def isotropic_compliance_apply(tau: np.ndarray, material: MaterialModel) -> np.ndarray:
    """Apply A = C^{-1} to 2x2 tensors, extended to skew parts by skw_scale.

    A tau = (1/2mu) (sym tau - lambda/(2mu + 2lambda) tr(tau) I)
            + skw_scale * skw tau,  for arrays of shape (2, 2) + any.
    """
    tau = np.asarray(tau, dtype=float)
    sym = 0.5 * (tau + np.swapaxes(tau, 0, 1))
    skw = tau - sym
    mu, lam = material.mu, material.lambda_
    trace = tau[0, 0] + tau[1, 1]
    out = sym / (2.0 * mu) + material.skw_scale * skw
    c = lam / (2.0 * mu * (2.0 * mu + 2.0 * lam))
    out[0, 0] -= c * trace
    out[1, 1] -= c * trace
    return out


def isotropic_stiffness_apply(tau: np.ndarray, material: MaterialModel) -> np.ndarray:
    """Apply C tau = 2 mu sym(tau) + lambda tr(tau) I + skw part / skw_scale."""
    tau = np.asarray(tau, dtype=float)
    sym = 0.5 * (tau + np.swapaxes(tau, 0, 1))
    skw = tau - sym
    mu, lam = material.mu, material.lambda_
    trace = tau[0, 0] + tau[1, 1]
    out = 2.0 * mu * sym + skw / material.skw_scale
    out[0, 0] += lam * trace
    out[1, 1] += lam * trace
    return out


@dataclass
class BlockSystem:
    """Assembled matrices and time-dependent loads of the matrix ODE."""

    Amat: sps.csr_matrix
    Bmat: sps.csr_matrix
    Cmat: sps.csr_matrix
    Mmat: sps.csr_matrix
    load: Callable[[float], np.ndarray]
    dirichlet_load: Callable[[float], np.ndarray]
    spaces: DiscreteSpaces
    material: MaterialModel
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.Amat.shape[0], self.Mmat.shape[0], self.Cmat.shape[0])


def _coo(vals, rows, cols, shape):
    return sps.coo_matrix(
        (vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).tocsr()


def _stress_block_matrices(spaces: DiscreteSpaces, material: MaterialModel | None,
                           degree: int):
    """Stress-stress matrix: compliance pairing, or plain L2 mass if material is None."""
    rule = triangle_rule(degree)
    V = spaces.stress_row_values(rule)
    W = spaces.quad_weights(rule)
    VW = V * W[:, None, None, :]
    G = np.einsum("tapq,tbrq->prtab", VW, V)  # test comp p, trial comp r
    dot = G[0, 0] + G[1, 1]

    nd = V.shape[1]
    nrow = spaces.n_row_global
    dim = spaces.dim_stress
    gmap = spaces.row_dof_map
    rows_loc = np.broadcast_to(gmap[:, :, None], G.shape[2:])
    cols_loc = np.broadcast_to(gmap[:, None, :], G.shape[2:])

    blocks = {}
    if material is None:
        for s in range(2):
            for r in range(2):
                blocks[s, r] = dot if s == r else None
    else:
        mu, lam, sk = material.mu, material.lambda_, material.skw_scale
        c = lam / (2.0 * mu * (2.0 * mu + 2.0 * lam))
        for s in range(2):
            for r in range(2):
                blk = (1.0 / (4.0 * mu)) * G[r, s] - c * G[s, r] - (sk / 2.0) * G[r, s]
                if s == r:
                    blk = blk + (1.0 / (4.0 * mu) + sk / 2.0) * dot
                blocks[s, r] = blk

    parts = []
    for s in range(2):
        for r in range(2):
            blk = blocks[s, r]
            if blk is None:
                continue
            parts.append(_coo(blk, rows_loc + s * nrow, cols_loc + r * nrow, (dim, dim)))
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


def _b_matrix(spaces: DiscreteSpaces, degree: int) -> sps.csr_matrix:
    rule = triangle_rule(degree)
    DV = spaces.stress_row_div_values(rule)
    W = spaces.quad_weights(rule)
    psi = spaces.scalar_values(rule)
    loc = np.einsum("tq,iq,tbq->tib", W, psi, DV)  # (T, m, nd)

    nt = spaces.mesh.num_triangles
    m = spaces.n_scalar
    vel_rows = (np.arange(nt)[:, None] * 2 * m + np.arange(m)[None, :])  # comp 0
    rows0 = np.broadcast_to(vel_rows[:, :, None], loc.shape)
    cols = np.broadcast_to(spaces.row_dof_map[:, None, :], loc.shape)
    shape = (spaces.dim_velocity, spaces.dim_stress)
    B = _coo(loc, rows0, cols, shape)
    B = B + _coo(loc, rows0 + m, cols + spaces.n_row_global, shape)
    return B


def _c_matrix(spaces: DiscreteSpaces, degree: int) -> sps.csr_matrix:
    # (phi, S(chi)) with S(q) = [[0, q], [-q, 0]]: rotation chi pairs with
    # phi[0, 1] - phi[1, 0], i.e. +v_y for row-0 fields, -v_x for row-1 fields.
    rule = triangle_rule(degree)
    V = spaces.stress_row_values(rule)
    W = spaces.quad_weights(rule)
    psi = spaces.scalar_values(rule)
    loc0 = np.einsum("tq,iq,tbq->tib", W, psi, V[:, :, 1, :])
    loc1 = -np.einsum("tq,iq,tbq->tib", W, psi, V[:, :, 0, :])

    nt = spaces.mesh.num_triangles
    m = spaces.n_scalar
    rot_rows = np.arange(nt)[:, None] * m + np.arange(m)[None, :]
    rows = np.broadcast_to(rot_rows[:, :, None], loc0.shape)
    cols = np.broadcast_to(spaces.row_dof_map[:, None, :], loc0.shape)
    shape = (spaces.dim_rotation, spaces.dim_stress)
    C = _coo(loc0, rows, cols, shape)
    C = C + _coo(loc1, rows, cols + spaces.n_row_global, shape)
    return C


def _m_matrix(spaces: DiscreteSpaces, material: MaterialModel, degree: int) -> sps.csr_matrix:
    rule = triangle_rule(degree)
    X = spaces.physical_points(rule)
    rho = material.rho_at(X[..., 0], X[..., 1])
    if np.any(rho < material.rho0 - 1e-12) or np.any(rho > material.rho1 + 1e-12):
        raise AssemblyError("density out of declared bounds at quadrature points")
    W = spaces.quad_weights(rule) * rho
    psi = spaces.scalar_values(rule)
    loc = np.einsum("tq,iq,jq->tij", W, psi, psi)  # (T, m, m)

    nt = spaces.mesh.num_triangles
    m = spaces.n_scalar
    base = np.arange(nt)[:, None] * 2 * m + np.arange(m)[None, :]
    rows = np.broadcast_to(base[:, :, None], loc.shape)
    cols = np.broadcast_to(base[:, None, :], loc.shape)
    shape = (spaces.dim_velocity, spaces.dim_velocity)
    M = _coo(loc, rows, cols, shape)
    M = M + _coo(loc, rows + m, cols + m, shape)
    return M


def assemble_stress_mass(spaces: DiscreteSpaces, degree: int | None = None) -> sps.csr_matrix:
    """Plain L2 mass matrix (phi_j, phi_i) on the stress space."""
    if degree is None:
        degree = 2 * spaces.k + 2
    return _stress_block_matrices(spaces, None, degree)


def assemble(mesh: Mesh, spaces: DiscreteSpaces, material: MaterialModel,
             body_force: Callable | None = None,
             dirichlet_velocity: Callable | None = None,
             degree: int | None = None,
             load_degree: int | None = None) -> BlockSystem:
    """Assemble the four block matrices and the load closures.

    ``body_force(t, x, y)`` and ``dirichlet_velocity(t, x, y)`` are optional
    time-space callables returning (2,) + broadcast shape; omitted loads are
    identically zero.
    """
    if spaces.mesh is not mesh:
        raise MixedElastError("spaces were built on a different mesh")
    if degree is None:
        degree = 2 * spaces.k + 2
    if load_degree is None:
        load_degree = 2 * spaces.k + 4

    Amat = _stress_block_matrices(spaces, material, degree)
    Bmat = _b_matrix(spaces, degree)
    Cmat = _c_matrix(spaces, degree)
    Mmat = _m_matrix(spaces, material, degree)

    if body_force is None:
        zeta = np.zeros(spaces.dim_velocity)
        load = lambda t: zeta
    else:
        load = lambda t: assemble_body_load(spaces, body_force, t, degree=load_degree)
    if dirichlet_velocity is None:
        eta = np.zeros(spaces.dim_stress)
        dload = lambda t: eta
    else:
        dload = lambda t: assemble_dirichlet_load(
            spaces, dirichlet_velocity, t, degree=load_degree)

    return BlockSystem(Amat=Amat, Bmat=Bmat, Cmat=Cmat, Mmat=Mmat,
                       load=load, dirichlet_load=dload,
                       spaces=spaces, material=material)


def assemble_body_load(spaces: DiscreteSpaces, f: Callable, t: float,
                       degree: int | None = None) -> np.ndarray:
    """Velocity-space load vector with entries (f(t, .), psi_i)."""
    if degree is None:
        degree = 2 * spaces.k + 4
    rule = triangle_rule(degree)
    X = spaces.physical_points(rule)
    vals = np.asarray(f(t, X[..., 0], X[..., 1]), dtype=float)  # (2, T, nq)
    W = spaces.quad_weights(rule)
    psi = spaces.scalar_values(rule)
    coeffs = np.einsum("tq,jq,ctq->tcj", W, psi, vals)
    return coeffs.ravel()


def assemble_dirichlet_load(spaces: DiscreteSpaces, g: Callable, t: float,
                            degree: int | None = None) -> np.ndarray:
    """Stress-space boundary load with entries int_Gamma_D g . (phi_i nu) ds."""
    if degree is None:
        degree = 2 * spaces.k + 4
    mesh = spaces.mesh
    out = np.zeros(spaces.dim_stress)
    dir_edges = np.array(
        [e for e, tag in zip(mesh.boundary_edges, mesh.boundary_tags) if tag == DIRICHLET],
        dtype=int,
    )
    if len(dir_edges) == 0:
        return out

    inc = mesh.edge_triangles()
    tris = inc[dir_edges, 0]
    # local edge index and outward-normal sign of each boundary edge
    loc = np.argmax(mesh.triangle_edges[tris] == dir_edges[:, None], axis=1)
    sign = mesh.edge_signs[tris, loc]

    rule = edge_rule(degree)
    tq, wq = rule.points, rule.weights
    a = mesh.vertices[mesh.edges[dir_edges, 0]]
    b = mesh.vertices[mesh.edges[dir_edges, 1]]
    tang = b - a
    length = np.linalg.norm(tang, axis=1)
    nu = sign[:, None] * _rotate_minus90(tang / length[:, None])
    pts = a[:, None, :] + tq[None, :, None] * tang[:, None, :]

    gv = np.asarray(g(t, pts[..., 0], pts[..., 1]), dtype=float)  # (2, nbe, nqe)

    nm = len(spaces.ref.stress_exps)
    xi = (pts - spaces.centers[tris, None, :]) / spaces.scales[tris, None, None]
    mv = poly.eval_monomials(spaces.ref.stress_exps, xi[..., 0], xi[..., 1])
    coef = spaces.stress_coef[tris]
    vx = np.einsum("ebm,meq->ebq", coef[:, :, :nm], mv)
    vy = np.einsum("ebm,meq->ebq", coef[:, :, nm:], mv)
    vdotnu = vx * nu[:, None, None, 0] + vy * nu[:, None, None, 1]

    # entry for stress dof (r, b): int_e g_r (v_b . nu) ds
    contrib = np.einsum("e,q,req,ebq->reb", length, wq, gv, vdotnu)
    gmap = spaces.row_dof_map[tris]  # (nbe, nd)
    for r in range(2):
        np.add.at(out, r * spaces.n_row_global + gmap, contrib[r])
    return out


def export_matrix(mat: sps.spmatrix, stream) -> None:
    """Write a sparse matrix in coordinate text form: row col value per line."""
    coo = mat.tocoo()
    for i, j, v in zip(coo.row, coo.col, coo.data):
        stream.write(f"{i} {j} {v:.17g}\n")
