"""Manufactured solutions, error norms, convergence and locking studies.

Each built-in case carries a closed-form displacement; every derived field
(velocity, stress, rotation, body force, stress divergence) is produced by
symbolic differentiation at case construction and lambdified to vectorized
numpy callables.  Rebuilding a case for a different Lame lambda rederives
sigma = C eps(u) and the load, which is what the locking sweep needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from .assembly import MaterialModel, assemble
from .dynamics import CN, integrate
from .errors import MixedElastError
from .mesh import build_uniform_square_mesh
from .quadrature import triangle_rule
from .spaces import (DiscreteSpaces, build_spaces, l2_project_rotation,
                     l2_project_velocity)
from .statics import build_initial_data, elliptic_projection

BUILTIN_CASES = ("eg1", "eg2", "eg3", "locking")


@dataclass
class MmsCase:
    """A manufactured solution with all derived fields in closed form.

    Field callables take (t, x, y) with array-broadcast x, y and return
    shape (2,) + broadcast for vectors, (2, 2) + broadcast for the stress,
    and plain broadcast shape for the scalar rotation.
    """

    name: str
    material: MaterialModel
    u: Callable
    v: Callable
    sigma: Callable
    rotation: Callable
    f: Callable
    div_sigma: Callable
    homogeneous: bool
    T0: float = 1.0
    alpha: float | None = None
    rebuild: Callable | None = field(default=None, repr=False)

    @property
    def g(self) -> Callable | None:
        """Dirichlet velocity data; None when the boundary data vanish."""
        return None if self.homogeneous else self.v


def _lambdify_vector(exprs, args):
    fns = [sp.lambdify(args, e, modules="numpy") for e in exprs]

    def call(t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.empty((len(fns),) + x.shape)
        for i, fn in enumerate(fns):
            out[i] = np.broadcast_to(fn(t, x, y), x.shape)
        return out

    return call


def _lambdify_matrix(exprs, args):
    fns = [[sp.lambdify(args, e, modules="numpy") for e in row] for row in exprs]

    def call(t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.empty((2, 2) + x.shape)
        for i in range(2):
            for j in range(2):
                out[i, j] = np.broadcast_to(fns[i][j](t, x, y), x.shape)
        return out

    return call


def _lambdify_scalar(expr, args):
    fn = sp.lambdify(args, expr, modules="numpy")

    def call(t, x, y):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(fn(t, x, np.asarray(y, dtype=float)), x.shape).copy()

    return call


def case_from_displacement(name: str, u_exprs, material: MaterialModel,
                           homogeneous: bool, T0: float = 1.0,
                           alpha: float | None = None,
                           rebuild: Callable | None = None,
                           rho_expr=None) -> MmsCase:
    """Derive all fields of a case from a symbolic displacement pair."""
    t, x, y = sp.symbols("t x y", real=True)
    u = sp.Matrix(u_exprs)
    grad_u = sp.Matrix([[sp.diff(u[0], x), sp.diff(u[0], y)],
                        [sp.diff(u[1], x), sp.diff(u[1], y)]])
    eps = (grad_u + grad_u.T) / 2
    mu, lam = sp.nsimplify(material.mu), sp.nsimplify(material.lambda_)
    sigma = 2 * mu * eps + lam * sp.trace(eps) * sp.eye(2)
    rot = (grad_u[0, 1] - grad_u[1, 0]) / 2
    v = u.diff(t)
    div_sigma = sp.Matrix([sp.diff(sigma[0, 0], x) + sp.diff(sigma[0, 1], y),
                           sp.diff(sigma[1, 0], x) + sp.diff(sigma[1, 1], y)])
    rho = sp.nsimplify(material.rho) if not callable(material.rho) else rho_expr
    f = rho * u.diff(t, 2) - div_sigma

    args = (t, x, y)
    return MmsCase(
        name=name,
        material=material,
        u=_lambdify_vector(list(u), args),
        v=_lambdify_vector(list(v), args),
        sigma=_lambdify_matrix([[sigma[0, 0], sigma[0, 1]], [sigma[1, 0], sigma[1, 1]]], args),
        rotation=_lambdify_scalar(rot, args),
        f=_lambdify_vector(list(f), args),
        div_sigma=_lambdify_vector(list(div_sigma), args),
        homogeneous=homogeneous,
        T0=T0,
        alpha=alpha,
        rebuild=rebuild,
    )


def builtin_case(name: str, alpha: float | None = None, mu: float = 1.0,
                 lam: float = 1.0, rho: float = 1.0) -> MmsCase:
    """Built-in manufactured cases.

    eg1/eg3: smooth field (sin(pi x) sin(pi y) sin t, x(1-x)y(1-y) sin t)
    vanishing on the boundary; eg2: reduced-regularity field
    ((1+t^2) x^alpha y^2, (1+cos t) x^2 y^alpha) with inhomogeneous
    displacement data, requiring alpha > 3/2; locking: a divergence-free
    smooth field for the lambda sweep (sigma independent of lambda).
    """
    name = name.lower()
    if name not in BUILTIN_CASES:
        raise MixedElastError(f"unknown case {name!r}; expected one of {BUILTIN_CASES}")
    material = MaterialModel(mu=mu, lambda_=lam, rho=rho)
    t, x, y = sp.symbols("t x y", real=True)

    if name in ("eg1", "eg3"):
        u = [sp.sin(sp.pi * x) * sp.sin(sp.pi * y) * sp.sin(t),
             x * (1 - x) * y * (1 - y) * sp.sin(t)]
        return case_from_displacement(
            name, u, material, homogeneous=True,
            rebuild=lambda lam_new: builtin_case(name, mu=mu, lam=lam_new, rho=rho))
    if name == "eg2":
        if alpha is None or alpha <= 1.5:
            raise MixedElastError("eg2 requires a regularity parameter alpha > 3/2")
        u = [(1 + t**2) * x**alpha * y**2,
             (1 + sp.cos(t)) * x**2 * y**alpha]
        return case_from_displacement(
            name, u, material, homogeneous=False, alpha=alpha,
            rebuild=lambda lam_new: builtin_case(name, alpha=alpha, mu=mu,
                                                 lam=lam_new, rho=rho))
    # divergence-free stream-function field, zero on the boundary
    psi = (sp.sin(sp.pi * x) * sp.sin(sp.pi * y))**2 * sp.sin(t)
    u = [sp.diff(psi, y), -sp.diff(psi, x)]
    return case_from_displacement(
        name, u, material, homogeneous=True,
        rebuild=lambda lam_new: builtin_case(name, mu=mu, lam=lam_new, rho=rho))


# -- error norms ------------------------------------------------------------


def l2_error(spaces: DiscreteSpaces, coefficients: np.ndarray, exact: Callable,
             t: float, fieldkind: str, degree: int | None = None) -> float:
    """L2 norm of (exact - discrete) at time t by elementwise quadrature.

    fieldkind is one of "stress", "velocity", "displacement", "rotation";
    the rotation error is measured in the skew-matrix Frobenius norm.
    """
    if degree is None:
        degree = 2 * spaces.k + 4
    rule = triangle_rule(degree)
    X = spaces.physical_points(rule)
    W = spaces.quad_weights(rule)
    if fieldkind == "stress":
        vals_h = spaces.stress_values(coefficients, rule)
        vals_e = np.moveaxis(np.asarray(exact(t, X[..., 0], X[..., 1])), (0, 1), (1, 2))
        diff2 = ((vals_e - vals_h) ** 2).sum(axis=(1, 2))
    elif fieldkind in ("velocity", "displacement"):
        vals_h = spaces.velocity_values(coefficients, rule)
        vals_e = np.moveaxis(np.asarray(exact(t, X[..., 0], X[..., 1])), 0, 1)
        diff2 = ((vals_e - vals_h) ** 2).sum(axis=1)
    elif fieldkind == "rotation":
        vals_h = spaces.rotation_values(coefficients, rule)
        vals_e = np.asarray(exact(t, X[..., 0], X[..., 1]))
        diff2 = 2.0 * (vals_e - vals_h) ** 2
    else:
        raise MixedElastError(f"unknown field kind {fieldkind!r}")
    return float(np.sqrt((W * diff2).sum()))


def _coefficient_l2(spaces: DiscreteSpaces, diff: np.ndarray, fieldkind: str) -> float:
    """L2 norm of a V_h/K_h coefficient difference via the diagonal Gram."""
    areas = spaces.areas
    m = spaces.n_scalar
    if fieldkind == "velocity":
        c2 = diff.reshape(-1, 2 * m) ** 2
        return float(np.sqrt((areas * c2.sum(axis=1)).sum()))
    c2 = diff.reshape(-1, m) ** 2
    return float(np.sqrt(2.0 * (areas * c2.sum(axis=1)).sum()))


# -- convergence machinery ----------------------------------------------------


@dataclass
class ConvergenceTable:
    """Rows of (1/h, error, order) pairs, one error/order column per field."""

    inv_h: list
    errors: dict  # field -> list of errors, fields sigma, v, u, r

    FIELDS = ("sigma", "v", "u", "r")

    def orders(self, fieldname: str) -> list:
        errs = self.errors[fieldname]
        out = [None]
        for prev, cur in zip(errs, errs[1:]):
            out.append(np.log2(prev / cur))
        return out

    def row_tuples(self):
        rows = []
        ords = {f: self.orders(f) for f in self.FIELDS}
        for i, n in enumerate(self.inv_h):
            row = [n]
            for f in self.FIELDS:
                row.append(self.errors[f][i])
                row.append(ords[f][i])
            rows.append(tuple(row))
        return rows

    def to_csv(self) -> str:
        lines = ["inv_h,err_sigma,ord_sigma,err_v,ord_v,err_u,ord_u,err_r,ord_r"]
        for row in self.row_tuples():
            cells = [str(row[0])]
            for err, order in zip(row[1::2], row[2::2]):
                cells.append(f"{err:.2e}")
                cells.append("" if order is None else f"{order:.2f}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def format_table(self) -> str:
        header = ["1/h"]
        for f in self.FIELDS:
            header += [f"err_{f}", "order"]
        widths = [9] * len(header)
        lines = ["".join(h.rjust(w) for h, w in zip(header, widths))]
        for row in self.row_tuples():
            cells = [str(row[0])]
            for err, order in zip(row[1::2], row[2::2]):
                cells.append(f"{err:.2e}")
                cells.append("--" if order is None else f"{order:.2f}")
            lines.append("".join(c.rjust(w) for c, w in zip(cells, widths)))
        return "\n".join(lines)


def _resolve_dt(dt_rule, n: int) -> float:
    if dt_rule in (None, "dt=1/n", "dt_eq_h"):
        return 1.0 / n
    return float(dt_rule)


def run_case(case: MmsCase, k: int, scheme: str, n: int, dt_rule=None,
             degree: int | None = None, linf_in_time: bool = False):
    """Integrate one case on one mesh and measure errors.

    Errors are taken at the final time; with ``linf_in_time`` they are the
    maxima over all step times instead (a discrete stand-in for the
    L-infinity-in-time norms).  Returns (errors dict, trajectory summary,
    spaces).
    """
    mesh = build_uniform_square_mesh(n)
    spaces = build_spaces(mesh, k)
    system = assemble(mesh, spaces, case.material, body_force=case.f,
                      dirichlet_velocity=case.g)
    initial = build_initial_data(case, system, spaces)
    dt = _resolve_dt(dt_rule, n)

    def errors_at(st):
        return {
            "sigma": l2_error(spaces, st.alpha, case.sigma, st.t, "stress", degree),
            "v": l2_error(spaces, st.beta, case.v, st.t, "velocity", degree),
            "u": l2_error(spaces, st.u, case.u, st.t, "displacement", degree),
            "r": l2_error(spaces, st.gamma, case.rotation, st.t, "rotation", degree),
        }

    observers = []
    running = {}
    if linf_in_time:
        def track(step, t, st, system):
            for f, e in errors_at(st).items():
                running[f] = max(running.get(f, 0.0), e)

        observers.append(track)
    traj = integrate(system, initial, scheme, dt, case.T0, observers=observers)
    errors = dict(running) if linf_in_time else errors_at(traj.final_state)
    return errors, traj, spaces


def convergence_study(case: MmsCase, k: int, scheme: str, n_list: Sequence[int],
                      dt_rule=None) -> ConvergenceTable:
    """One integrate-and-measure run per mesh of a doubling sequence."""
    n_list = list(n_list)
    for prev, cur in zip(n_list, n_list[1:]):
        if cur != 2 * prev:
            raise MixedElastError("n_list must double at each refinement")
    errors = {f: [] for f in ConvergenceTable.FIELDS}
    for n in n_list:
        errs, _, _ = run_case(case, k, scheme, n, dt_rule)
        for f in ConvergenceTable.FIELDS:
            errors[f].append(errs[f])
    return ConvergenceTable(inv_h=n_list, errors=errors)


def locking_study(case: MmsCase, k: int, lambda_list: Sequence[float],
                  n: int = 8, scheme: str = CN) -> list:
    """Fixed-mesh error sweep over the Lame parameter lambda.

    The exact solution is rebuilt per lambda (sigma = C eps(u) depends on
    it).  Returns rows (lambda, errors dict).
    """
    if case.rebuild is None:
        raise MixedElastError("case does not support lambda overrides")
    rows = []
    for lam in lambda_list:
        sub = case.rebuild(float(lam))
        errs, _, _ = run_case(sub, k, scheme, n)
        rows.append((float(lam), errs))
    return rows


def error_decomposition_diagnostic(case: MmsCase, k: int, n: int, t: float):
    """Split each field error at time t into projection and approximation parts.

    The stress splits against the weakly symmetric elliptic projection, the
    velocity against P_h, the rotation against P'_h.  Returns
    {field: (projection_error, approximation_error)}.
    """
    mesh = build_uniform_square_mesh(n)
    spaces = build_spaces(mesh, k)
    system = assemble(mesh, spaces, case.material, body_force=case.f,
                      dirichlet_velocity=case.g)
    initial = build_initial_data(case, system, spaces)
    dt = 1.0 / n
    n_steps = round(t / dt)
    if abs(n_steps * dt - t) > 1e-12:
        raise MixedElastError("t must be a multiple of 1/n")
    traj = integrate(system, initial, CN, dt, t)
    st = traj.final_state

    proj_sigma = elliptic_projection(system, lambda x, y: case.sigma(t, x, y),
                                     lambda x, y: case.div_sigma(t, x, y))
    ph_v = l2_project_velocity(spaces, lambda x, y: case.v(t, x, y), degree=12)
    ph_r = l2_project_rotation(spaces, lambda x, y: case.rotation(t, x, y), degree=12)

    e_sigma_p = l2_error(spaces, proj_sigma, case.sigma, t, "stress")
    e_v_p = l2_error(spaces, ph_v, case.v, t, "velocity")
    e_r_p = l2_error(spaces, ph_r, case.rotation, t, "rotation")

    mass = system._cache["stress_mass"]
    d = proj_sigma - st.alpha
    e_sigma_h = float(np.sqrt(d @ (mass @ d)))
    e_v_h = _coefficient_l2(spaces, ph_v - st.beta, "velocity")
    e_r_h = _coefficient_l2(spaces, ph_r - st.gamma, "rotation")

    return {
        "sigma": (e_sigma_p, e_sigma_h),
        "v": (e_v_p, e_v_h),
        "r": (e_r_p, e_r_h),
    }
