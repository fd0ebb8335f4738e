"""Discrete spaces for the weakly symmetric mixed method of degree k.

The triple is: stress fields whose rows are normal-continuous piecewise
P_k vector fields (edge moments against P_k per edge plus interior moments),
discontinuous vector P_{k-1} velocities, and discontinuous scalar P_{k-1}
rotations (the scalar q stands for the skew matrix [[0, q], [-q, 0]]).

Stress row bases are constructed on each physical triangle by inverting the
matrix of the degree-of-freedom functionals.  The edge functionals use the
global low-to-high edge parameterization and a fixed normal per edge, so a
shared edge carries the same functionals from both sides and the assembled
space is H(div)-conforming with no orientation bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import polynomials as poly
from .errors import GeometryError, MixedElastError
from .mesh import Mesh
from .quadrature import QuadratureRule, edge_rule, triangle_rule

SUPPORTED_DEGREES = (1, 2, 3)

_REF_VERTS = np.array([[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]])
_REF_SIGNS = np.array([[1, 1, -1]])


def _rotate_minus90(v: np.ndarray) -> np.ndarray:
    """Right-hand normal (t_y, -t_x) of tangent vectors in the last axis."""
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def _triangle_geometry(verts: np.ndarray):
    """Centers, scales (longest edge), doubled areas and barycentric gradients."""
    e = np.stack(
        [verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 1], verts[:, 0] - verts[:, 2]],
        axis=1,
    )
    d1 = verts[:, 1] - verts[:, 0]
    d2 = verts[:, 2] - verts[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(det <= 0.0):
        raise GeometryError("triangle with nonpositive area")
    centers = verts.mean(axis=1)
    scales = np.linalg.norm(e, axis=2).max(axis=1)
    # grad lambda_i = perp(P_{i+2} - P_{i+1}) / det with perp(v) = (-v_y, v_x)
    opp = np.stack([e[:, 1], e[:, 2], e[:, 0]], axis=1)
    grad_lam = np.stack([-opp[..., 1], opp[..., 0]], axis=-1) / det[:, None, None]
    return centers, scales, det, grad_lam


def _edge_frames(verts: np.ndarray, signs: np.ndarray, loc: int):
    """Globally oriented start/end points, unit normal and length of local edge."""
    a = verts[:, loc]
    b = verts[:, (loc + 1) % 3]
    flip = signs[:, loc] < 0
    start = np.where(flip[:, None], b, a)
    end = np.where(flip[:, None], a, b)
    length = np.linalg.norm(end - start, axis=1)
    normal = _rotate_minus90((end - start) / length[:, None])
    return start, end, normal, length


def stress_row_dof_count(k: int) -> int:
    return (k + 1) * (k + 2)


def _interior_index_sets(k: int, exps: np.ndarray):
    degs = exps.sum(axis=1)
    grad_ix = np.flatnonzero((degs >= 1) & (degs <= k - 1))
    curl_ix = np.flatnonzero(degs <= k - 2)
    return grad_ix, curl_ix


def _stress_dof_matrices(k: int, verts: np.ndarray, signs: np.ndarray,
                         degree: int | None = None) -> np.ndarray:
    """DOF matrices D[t, i, j] = functional_i(vector monomial j) per triangle.

    Vector monomials are (m, 0) for the first n_mono columns and (0, m) for
    the rest, with m the monomials of degree <= k in centered, scaled local
    coordinates.  Functionals: per local edge, mean-normalized moments of the
    normal trace against orthonormal Legendre polynomials in the global edge
    parameter; then interior moments against scaled gradients of P_{k-1} and
    against curls of bubble-times-P_{k-2}.
    """
    if degree is None:
        degree = 2 * k + 2
    exps = poly.monomial_exponents(k)
    nm = len(exps)
    nd = stress_row_dof_count(k)
    nt = len(verts)
    centers, scales, det, grad_lam = _triangle_geometry(verts)
    D = np.zeros((nt, nd, nd))

    erule = edge_rule(degree)
    tq, wq = erule.points, erule.weights
    leg = poly.eval_edge_polynomials(poly.edge_legendre_basis(k), tq)  # (k+1, nqe)
    for loc in range(3):
        start, end, normal, _ = _edge_frames(verts, signs, loc)
        pts = start[:, None, :] + tq[None, :, None] * (end - start)[:, None, :]
        xi = (pts - centers[:, None, :]) / scales[:, None, None]
        mv = poly.eval_monomials(exps, xi[..., 0], xi[..., 1])  # (nm, nt, nqe)
        mom = np.einsum("q,iq,jtq->tij", wq, leg, mv)  # (nt, k+1, nm)
        rows = slice(loc * (k + 1), (loc + 1) * (k + 1))
        D[:, rows, :nm] = normal[:, 0, None, None] * mom
        D[:, rows, nm:] = normal[:, 1, None, None] * mom

    if k >= 2:
        trule = triangle_rule(degree)
        bary, wt = trule.points, trule.weights
        X = np.einsum("ql,tld->tqd", bary, verts)
        xi = (X - centers[:, None, :]) / scales[:, None, None]
        mv = poly.eval_monomials(exps, xi[..., 0], xi[..., 1])  # (nm, nt, nq)
        dxm, dym = poly.monomial_derivative_matrices(exps)
        dmx = np.einsum("ij,itq->jtq", dxm, mv)  # d/dxi_x of monomial j
        dmy = np.einsum("ij,itq->jtq", dym, mv)
        grad_ix, curl_ix = _interior_index_sets(k, exps)
        row0 = 3 * (k + 1)

        # moments against scaled gradients of P_{k-1} \ constants
        gx = dmx[grad_ix]  # (np, nt, nq)
        gy = dmy[grad_ix]
        D[:, row0:row0 + len(grad_ix), :nm] = 2.0 * np.einsum(
            "q,ptq,jtq->tpj", wt, gx, mv)
        D[:, row0:row0 + len(grad_ix), nm:] = 2.0 * np.einsum(
            "q,ptq,jtq->tpj", wt, gy, mv)

        # moments against curl(bubble * P_{k-2}), gradients in scaled coords
        lam = bary.T  # (3, nq), triangle independent
        bub = lam[0] * lam[1] * lam[2]
        partials = np.stack([lam[1] * lam[2], lam[0] * lam[2], lam[0] * lam[1]])
        grad_bub = np.einsum("t,tid,iq->tqd", scales, grad_lam, partials)
        row0 += len(grad_ix)
        for p, j_mono in enumerate(curl_ix):
            dwx = grad_bub[..., 0] * mv[j_mono] + bub[None, :] * dmx[j_mono]
            dwy = grad_bub[..., 1] * mv[j_mono] + bub[None, :] * dmy[j_mono]
            D[:, row0 + p, :nm] = 2.0 * np.einsum("q,tq,jtq->tj", wt, dwy, mv)
            D[:, row0 + p, nm:] = -2.0 * np.einsum("q,tq,jtq->tj", wt, dwx, mv)
    return D


class ReferenceElement:
    """Bases of degree k on the reference triangle, for tests and diagnostics.

    The stress row basis is dual to the DOF functionals; the velocity and
    rotation bases are orthonormal P_{k-1} against the doubled reference
    measure, so their Gram matrix on a physical triangle is area * identity.
    """

    def __init__(self, k: int):
        if k not in SUPPORTED_DEGREES:
            raise MixedElastError(f"unsupported degree k={k}; expected one of {SUPPORTED_DEGREES}")
        self.k = k
        self.stress_exps = poly.monomial_exponents(k)
        self.scalar_exps, self.scalar_coef = poly.orthonormal_scalar_basis(k - 1)
        dof = _stress_dof_matrices(k, _REF_VERTS, _REF_SIGNS)[0]
        self.stress_coef = np.linalg.inv(dof).T  # (n_dof, 2 * n_mono)

    @property
    def n_row_dofs(self) -> int:
        return stress_row_dof_count(self.k)

    @property
    def n_edge_dofs_per_row(self) -> int:
        return 3 * (self.k + 1)

    @property
    def n_interior_dofs_per_row(self) -> int:
        return self.k**2 - 1

    @property
    def n_scalar(self) -> int:
        return self.k * (self.k + 1) // 2

    def stress_row_values(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Row basis values on the reference triangle, shape (n_dof, 2, npts)."""
        nm = len(self.stress_exps)
        centers, scales, _, _ = _triangle_geometry(_REF_VERTS)
        xi = (np.asarray(x) - centers[0, 0]) / scales[0]
        eta = (np.asarray(y) - centers[0, 1]) / scales[0]
        mv = poly.eval_monomials(self.stress_exps, xi, eta)
        vx = np.tensordot(self.stress_coef[:, :nm], mv, axes=(1, 0))
        vy = np.tensordot(self.stress_coef[:, nm:], mv, axes=(1, 0))
        return np.stack([vx, vy], axis=1)

    def scalar_values(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        mv = poly.eval_monomials(self.scalar_exps, np.asarray(x), np.asarray(y))
        return np.tensordot(self.scalar_coef, mv, axes=(1, 0))

    def dof_matrix(self, degree: int) -> np.ndarray:
        """Reference DOF matrix recomputed at the given quadrature degree."""
        return _stress_dof_matrices(self.k, _REF_VERTS, _REF_SIGNS, degree)[0]


@dataclass
class DiscreteSpaces:
    """Global DOF maps and per-triangle bases for the degree-k triple."""

    mesh: Mesh
    k: int
    ref: ReferenceElement
    stress_coef: np.ndarray      # (T, n_row_dofs, 2 * n_mono)
    row_dof_map: np.ndarray      # (T, n_row_dofs) -> global row-space index
    tri_verts: np.ndarray        # (T, 3, 2)
    centers: np.ndarray
    scales: np.ndarray
    dets: np.ndarray             # 2 * triangle areas
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_row_global(self) -> int:
        k, m = self.k, self.mesh
        return (k + 1) * m.num_edges + (k**2 - 1) * m.num_triangles

    @property
    def dim_stress(self) -> int:
        return 2 * self.n_row_global

    @property
    def n_scalar(self) -> int:
        return self.ref.n_scalar

    @property
    def dim_velocity(self) -> int:
        return self.mesh.num_triangles * self.k * (self.k + 1)

    @property
    def dim_rotation(self) -> int:
        return self.mesh.num_triangles * self.k * (self.k + 1) // 2

    @property
    def areas(self) -> np.ndarray:
        return 0.5 * self.dets

    # -- indexing ---------------------------------------------------------

    def velocity_index(self, tri, comp, j):
        m = self.n_scalar
        return tri * 2 * m + comp * m + j

    def rotation_index(self, tri, j):
        return tri * self.n_scalar + j

    def stress_index(self, row, row_dof):
        return row * self.n_row_global + row_dof

    # -- evaluation -------------------------------------------------------

    def physical_points(self, rule: QuadratureRule) -> np.ndarray:
        key = ("pts", rule.exactness)
        if key not in self._cache:
            self._cache[key] = np.einsum("ql,tld->tqd", rule.points, self.tri_verts)
        return self._cache[key]

    def quad_weights(self, rule: QuadratureRule) -> np.ndarray:
        """Physical integration weights (T, nq): sum_q W f(x_q) = int_T f."""
        key = ("w", rule.exactness)
        if key not in self._cache:
            self._cache[key] = self.dets[:, None] * rule.weights[None, :]
        return self._cache[key]

    def _xi(self, pts: np.ndarray) -> np.ndarray:
        return (pts - self.centers[:, None, :]) / self.scales[:, None, None]

    def stress_row_values(self, rule: QuadratureRule) -> np.ndarray:
        """Row basis values at rule points, shape (T, n_row_dofs, 2, nq)."""
        key = ("sv", rule.exactness)
        if key not in self._cache:
            nm = len(self.ref.stress_exps)
            xi = self._xi(self.physical_points(rule))
            mv = poly.eval_monomials(self.ref.stress_exps, xi[..., 0], xi[..., 1])
            vx = np.einsum("tbm,mtq->tbq", self.stress_coef[:, :, :nm], mv)
            vy = np.einsum("tbm,mtq->tbq", self.stress_coef[:, :, nm:], mv)
            self._cache[key] = np.stack([vx, vy], axis=2)
        return self._cache[key]

    def stress_row_div_values(self, rule: QuadratureRule) -> np.ndarray:
        """Divergence of each row basis function at rule points, (T, n_row_dofs, nq)."""
        key = ("sdiv", rule.exactness)
        if key not in self._cache:
            nm = len(self.ref.stress_exps)
            dxm, dym = poly.monomial_derivative_matrices(self.ref.stress_exps)
            dcoef = (self.stress_coef[:, :, :nm] @ dxm.T
                     + self.stress_coef[:, :, nm:] @ dym.T)
            dcoef /= self.scales[:, None, None]
            xi = self._xi(self.physical_points(rule))
            mv = poly.eval_monomials(self.ref.stress_exps, xi[..., 0], xi[..., 1])
            self._cache[key] = np.einsum("tbm,mtq->tbq", dcoef, mv)
        return self._cache[key]

    def scalar_values(self, rule: QuadratureRule) -> np.ndarray:
        """P_{k-1} basis values at reference rule points, shape (m, nq)."""
        key = ("psi", rule.exactness)
        if key not in self._cache:
            xy = rule.xy
            self._cache[key] = self.ref.scalar_values(xy[:, 0], xy[:, 1])
        return self._cache[key]

    def stress_values(self, alpha: np.ndarray, rule: QuadratureRule) -> np.ndarray:
        """Field values of a stress coefficient vector, shape (T, 2, 2, nq)."""
        V = self.stress_row_values(rule)
        rows = alpha.reshape(2, self.n_row_global)
        local = rows[:, self.row_dof_map]  # (2, T, n_row_dofs)
        return np.einsum("rtb,tbdq->trdq", local, V)

    def stress_div_values(self, alpha: np.ndarray, rule: QuadratureRule) -> np.ndarray:
        """Row-wise divergence of a stress field, shape (T, 2, nq)."""
        DV = self.stress_row_div_values(rule)
        rows = alpha.reshape(2, self.n_row_global)
        local = rows[:, self.row_dof_map]
        return np.einsum("rtb,tbq->trq", local, DV)

    def velocity_values(self, coeffs: np.ndarray, rule: QuadratureRule) -> np.ndarray:
        """Field values of a V_h coefficient vector, shape (T, 2, nq)."""
        psi = self.scalar_values(rule)
        c = coeffs.reshape(self.mesh.num_triangles, 2, self.n_scalar)
        return np.einsum("tcj,jq->tcq", c, psi)

    def rotation_values(self, gamma: np.ndarray, rule: QuadratureRule) -> np.ndarray:
        """Scalar rotation values of a K_h coefficient vector, shape (T, nq)."""
        psi = self.scalar_values(rule)
        c = gamma.reshape(self.mesh.num_triangles, self.n_scalar)
        return np.einsum("tj,jq->tq", c, psi)

    def stress_values_at(self, tri: int, pts: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        """Stress field on one triangle's polynomial at physical points (n, 2)."""
        nm = len(self.ref.stress_exps)
        xi = (pts - self.centers[tri]) / self.scales[tri]
        mv = poly.eval_monomials(self.ref.stress_exps, xi[:, 0], xi[:, 1])
        rows = alpha.reshape(2, self.n_row_global)
        local = rows[:, self.row_dof_map[tri]]  # (2, n_row_dofs)
        vx = local @ (self.stress_coef[tri, :, :nm] @ mv)
        vy = local @ (self.stress_coef[tri, :, nm:] @ mv)
        return np.stack([vx, vy], axis=1)  # (2 rows, 2 comps, n)


def build_spaces(mesh: Mesh, k: int) -> DiscreteSpaces:
    """Build the degree-k triple on a mesh; k must be 1, 2, or 3."""
    ref = ReferenceElement(k)
    verts = mesh.vertices[mesh.triangles]
    dof = _stress_dof_matrices(k, verts, mesh.edge_signs)
    coef = np.transpose(np.linalg.inv(dof), (0, 2, 1))
    centers, scales, dets, _ = _triangle_geometry(verts)

    nt = mesh.num_triangles
    nd = stress_row_dof_count(k)
    n_int = k**2 - 1
    row_map = np.empty((nt, nd), dtype=int)
    for loc in range(3):
        cols = slice(loc * (k + 1), (loc + 1) * (k + 1))
        row_map[:, cols] = (mesh.triangle_edges[:, loc, None] * (k + 1)
                            + np.arange(k + 1)[None, :])
    if n_int:
        base = (k + 1) * mesh.num_edges
        row_map[:, 3 * (k + 1):] = (base + np.arange(nt)[:, None] * n_int
                                    + np.arange(n_int)[None, :])
    return DiscreteSpaces(
        mesh=mesh, k=k, ref=ref, stress_coef=coef, row_dof_map=row_map,
        tri_verts=verts, centers=centers, scales=scales, dets=dets,
    )


# -- Piola map -------------------------------------------------------------


class PiolaMappedField:
    """Contravariant push-forward of a reference matrix field to a triangle.

    Each row of the reference field is mapped as an H(div) vector field:
    sigma(F(xhat)) = sigmahat(xhat) B^T / det(B) for the affine map
    F(xhat) = B xhat + b.  Row-wise divergence transforms as
    div sigma (F(xhat)) = div sigmahat (xhat) / det(B).
    """

    def __init__(self, reference_field: Callable, triangle: np.ndarray):
        triangle = np.asarray(triangle, dtype=float)
        B = np.column_stack([triangle[1] - triangle[0], triangle[2] - triangle[0]])
        det = float(np.linalg.det(B))
        scale = max(np.abs(B).max(), 1.0)
        if abs(det) <= 1e-14 * scale**2:
            raise GeometryError("degenerate triangle in Piola map")
        self.reference_field = reference_field
        self.origin = triangle[0]
        self.B = B
        self.det = det

    def map_points(self, xhat: np.ndarray, yhat: np.ndarray) -> np.ndarray:
        pts = np.stack(np.broadcast_arrays(xhat, yhat), axis=-1)
        return pts @ self.B.T + self.origin

    def __call__(self, xhat: np.ndarray, yhat: np.ndarray) -> np.ndarray:
        ref = np.asarray(self.reference_field(xhat, yhat))
        return np.einsum("rk...,ck->rc...", ref, self.B) / self.det


def piola_map_stress(reference_field: Callable, triangle: np.ndarray) -> PiolaMappedField:
    """Contravariant (row-wise Piola) map of a reference matrix field.

    ``reference_field(xhat, yhat)`` must return values of shape
    (2, 2) + broadcast shape.  The result evaluates the physical field at the
    image points F(xhat, yhat) of the affine map onto ``triangle``.
    """
    return PiolaMappedField(reference_field, triangle)


# -- canonical interpolation and local projections -------------------------


def canonical_interpolation(spaces: DiscreteSpaces, sigma: Callable,
                            degree: int = 12) -> np.ndarray:
    """Coefficients of the canonical stress interpolant of a matrix field.

    ``sigma(x, y)`` must return (2, 2) + broadcast shape and be continuous on
    each closed triangle.  The interpolant commutes with the divergence:
    div of the result is the V_h projection of div sigma.
    """
    mesh, k = spaces.mesh, spaces.k
    alpha = np.zeros(spaces.dim_stress)
    rows = alpha.reshape(2, spaces.n_row_global)

    erule = edge_rule(degree)
    tq, wq = erule.points, erule.weights
    leg = poly.eval_edge_polynomials(poly.edge_legendre_basis(k), tq)
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    tang = b - a
    length = np.linalg.norm(tang, axis=1)
    normal = _rotate_minus90(tang / length[:, None])
    pts = a[:, None, :] + tq[None, :, None] * tang[:, None, :]
    vals = np.asarray(sigma(pts[..., 0], pts[..., 1]), dtype=float)  # (2,2,E,nqe)
    vn = np.einsum("rdeq,ed->req", vals, normal)
    moments = np.einsum("q,iq,req->rei", wq, leg, vn)  # (2, E, k+1)
    for r in range(2):
        rows[r, : (k + 1) * mesh.num_edges] = moments[r].ravel()

    if k >= 2:
        trule = triangle_rule(degree)
        wt = trule.weights
        X = spaces.physical_points(trule)
        vals = np.asarray(sigma(X[..., 0], X[..., 1]), dtype=float)  # (2,2,T,nq)
        exps = spaces.ref.stress_exps
        xi = spaces._xi(X)
        mv = poly.eval_monomials(exps, xi[..., 0], xi[..., 1])
        dxm, dym = poly.monomial_derivative_matrices(exps)
        dmx = np.einsum("ij,itq->jtq", dxm, mv)
        dmy = np.einsum("ij,itq->jtq", dym, mv)
        grad_ix, curl_ix = _interior_index_sets(k, exps)

        grad_mom = 2.0 * (np.einsum("q,ptq,rtq->rtp", wt, dmx[grad_ix], vals[:, 0])
                          + np.einsum("q,ptq,rtq->rtp", wt, dmy[grad_ix], vals[:, 1]))

        _, _, _, grad_lam = _triangle_geometry(spaces.tri_verts)
        lam = trule.points.T
        bub = lam[0] * lam[1] * lam[2]
        partials = np.stack([lam[1] * lam[2], lam[0] * lam[2], lam[0] * lam[1]])
        grad_bub = np.einsum("t,tid,iq->tqd", spaces.scales, grad_lam, partials)
        curl_mom = np.empty((2, mesh.num_triangles, len(curl_ix)))
        for p, j_mono in enumerate(curl_ix):
            dwx = grad_bub[..., 0] * mv[j_mono] + bub[None, :] * dmx[j_mono]
            dwy = grad_bub[..., 1] * mv[j_mono] + bub[None, :] * dmy[j_mono]
            curl_mom[:, :, p] = 2.0 * (np.einsum("q,tq,rtq->rt", wt, dwy, vals[:, 0])
                                       - np.einsum("q,tq,rtq->rt", wt, dwx, vals[:, 1]))

        interior = np.concatenate([grad_mom, curl_mom], axis=2)
        for r in range(2):
            rows[r, (k + 1) * mesh.num_edges:] = interior[r].ravel()
    return alpha


def l2_project_velocity(spaces: DiscreteSpaces, v: Callable,
                        degree: int | None = None) -> np.ndarray:
    """Elementwise L2 projection of a vector field onto V_h."""
    if degree is None:
        degree = 2 * spaces.k + 4
    rule = triangle_rule(degree)
    X = spaces.physical_points(rule)
    vals = np.asarray(v(X[..., 0], X[..., 1]), dtype=float)  # (2, T, nq)
    psi = spaces.scalar_values(rule)
    coeffs = 2.0 * np.einsum("q,jq,ctq->tcj", rule.weights, psi, vals)
    return coeffs.ravel()


def l2_project_rotation(spaces: DiscreteSpaces, q: Callable,
                        degree: int | None = None) -> np.ndarray:
    """Elementwise L2 projection of a scalar rotation field onto K_h."""
    if degree is None:
        degree = 2 * spaces.k + 4
    rule = triangle_rule(degree)
    X = spaces.physical_points(rule)
    vals = np.asarray(q(X[..., 0], X[..., 1]), dtype=float)  # (T, nq)
    psi = spaces.scalar_values(rule)
    coeffs = 2.0 * np.einsum("q,jq,tq->tj", rule.weights, psi, vals)
    return coeffs.ravel()
