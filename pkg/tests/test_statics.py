import numpy as np
import pytest
import scipy.sparse as sps
import sympy

from mixedelast import (MaterialModel, SingularSystemError, assemble,
                        assemble_body_load, build_initial_data, build_spaces,
                        build_uniform_square_mesh, builtin_case,
                        canonical_interpolation, elliptic_projection, infsup_constant,
                        l2_error, l2_project_velocity, solve_elastostatics)
from mixedelast.quadrature import triangle_rule
from mixedelast.verification import case_from_displacement

from conftest import make_matrix_field


def _static_case(mu=1.0, lam=1.0):
    """Stationary manufactured solution via the time-dependent pipeline at t=0."""
    t, x, y = sympy.symbols("t x y", real=True)
    u = [sympy.sin(sympy.pi * x) * sympy.sin(sympy.pi * y) * (1 + 0 * t),
         x * (1 - x) * y * (1 - y) * (1 + 0 * t)]
    return case_from_displacement("static", u, MaterialModel(mu=mu, lambda_=lam),
                                  homogeneous=True)


def _wrap_coefficient_stress(spaces, alpha, degree=12):
    """Evaluators for a coefficient stress field usable by elliptic_projection."""
    rule = triangle_rule(degree)
    vals = np.moveaxis(spaces.stress_values(alpha, rule), (1, 2), (0, 1))
    dvals = np.moveaxis(spaces.stress_div_values(alpha, rule), 1, 0)
    shape = spaces.physical_points(rule)[..., 0].shape

    def sigma(xx, yy):
        assert np.shape(xx) == shape
        return vals

    def div_sigma(xx, yy):
        assert np.shape(xx) == shape
        return dvals

    return sigma, div_sigma


def test_zero_rhs_gives_zero(mesh_cache, spaces_cache, unit_material):
    system = assemble(mesh_cache(2), spaces_cache(2, 1), unit_material)
    sol = solve_elastostatics(system, np.zeros(system.dims[0]),
                              np.zeros(system.dims[1]), np.zeros(system.dims[2]))
    assert np.abs(sol.sigma).max() <= 1e-12
    assert np.abs(sol.u).max() <= 1e-12
    assert np.abs(sol.r).max() <= 1e-12


def test_constant_load_matches_dense_solve(mesh_cache, spaces_cache, unit_material):
    mesh, spaces = mesh_cache(1), spaces_cache(1, 1)
    system = assemble(mesh, spaces, unit_material)
    f = lambda t, x, y: np.stack([np.ones(np.shape(x)), 2.0 * np.ones(np.shape(x))])
    rhs_v = -assemble_body_load(spaces, f, 0.0)
    rhs_s = np.zeros(spaces.dim_stress)
    rhs_r = np.zeros(spaces.dim_rotation)
    sol = solve_elastostatics(system, rhs_s, rhs_v, rhs_r)

    S = np.block([
        [system.Amat.toarray(), system.Bmat.toarray().T, system.Cmat.toarray().T],
        [system.Bmat.toarray(), np.zeros((4, 4)), np.zeros((4, 2))],
        [system.Cmat.toarray(), np.zeros((2, 4)), np.zeros((2, 2))],
    ])
    x = np.linalg.solve(S, np.concatenate([rhs_s, rhs_v, rhs_r]))
    got = np.concatenate([sol.sigma, sol.u, sol.r])
    assert np.abs(got - x).max() <= 1e-10


def test_static_mms_convergence(mesh_cache):
    case = _static_case()
    k = 2
    errs_sigma, errs_u, errs_r = [], [], []
    for n in (2, 4, 8):
        mesh = mesh_cache(n)
        spaces = build_spaces(mesh, k)
        system = assemble(mesh, spaces, case.material)
        # -(div sigma_h, w) = (f, w) with f = -div sigma
        rhs_v = assemble_body_load(spaces, case.div_sigma, 0.0, degree=12)
        sol = solve_elastostatics(system, np.zeros(spaces.dim_stress), rhs_v,
                                  np.zeros(spaces.dim_rotation))
        errs_sigma.append(l2_error(spaces, sol.sigma, case.sigma, 0.0, "stress"))
        errs_u.append(l2_error(spaces, sol.u, case.u, 0.0, "velocity"))
        errs_r.append(l2_error(spaces, sol.r, case.rotation, 0.0, "rotation"))
    for errs in (errs_sigma, errs_u, errs_r):
        assert np.log2(errs[-2] / errs[-1]) >= k - 0.25


def test_singular_pairing_detected(mesh_cache, spaces_cache, unit_material):
    system = assemble(mesh_cache(1), spaces_cache(1, 1), unit_material)
    broken = type(system)(
        Amat=system.Amat, Bmat=sps.csr_matrix(system.Bmat.shape),
        Cmat=system.Cmat, Mmat=system.Mmat, load=system.load,
        dirichlet_load=system.dirichlet_load, spaces=system.spaces,
        material=system.material)
    with pytest.raises(SingularSystemError):
        solve_elastostatics(broken, np.zeros(system.dims[0]),
                            np.ones(system.dims[1]), np.zeros(system.dims[2]))


def test_elliptic_projection_reproduces_mh(mesh_cache, spaces_cache, unit_material):
    spaces = spaces_cache(2, 2)
    system = assemble(mesh_cache(2), spaces, unit_material)
    rng = np.random.default_rng(11)
    alpha = rng.standard_normal(spaces.dim_stress)
    sigma, div_sigma = _wrap_coefficient_stress(spaces, alpha)
    proj = elliptic_projection(system, sigma, div_sigma)
    assert np.abs(proj - alpha).max() <= 1e-10 * max(1.0, np.abs(alpha).max())


def test_elliptic_projection_idempotent(mesh_cache, spaces_cache, unit_material):
    spaces = spaces_cache(2, 2)
    system = assemble(mesh_cache(2), spaces, unit_material)
    sigma, div_sigma = make_matrix_field(np.random.default_rng(5))
    once = elliptic_projection(system, sigma, div_sigma)
    sig2, div2 = _wrap_coefficient_stress(spaces, once)
    twice = elliptic_projection(system, sig2, div2)
    assert np.abs(twice - once).max() <= 1e-12 * max(1.0, np.abs(once).max())


@pytest.mark.parametrize("seed", range(4))
def test_elliptic_projection_lemma_identities(mesh_cache, unit_material, seed):
    # div ProjTilde sigma = P_h div sigma and skew moments preserved
    mesh = build_uniform_square_mesh(3)
    spaces = build_spaces(mesh, 2)
    system = assemble(mesh, spaces, unit_material)
    sigma, div_sigma = make_matrix_field(np.random.default_rng(100 + seed))
    proj = elliptic_projection(system, sigma, div_sigma)

    rule = triangle_rule(12)
    W = spaces.quad_weights(rule)
    dv = spaces.stress_div_values(proj, rule)
    ph = l2_project_velocity(spaces, div_sigma, degree=12)
    pv = spaces.velocity_values(ph, rule)
    assert np.sqrt((W[:, None, :] * (dv - pv) ** 2).sum()) <= 1e-10

    X = spaces.physical_points(rule)
    vals = sigma(X[..., 0], X[..., 1])
    skew_exact = vals[0, 1] - vals[1, 0]
    hv = spaces.stress_values(proj, rule)
    skew_h = hv[:, 0, 1, :] - hv[:, 1, 0, :]
    psi = spaces.scalar_values(rule)
    moments = np.einsum("tq,iq,tq->ti", W, psi, skew_exact - skew_h)
    assert np.abs(moments).max() <= 1e-10


def test_elliptic_projection_quasi_optimal(mesh_cache, unit_material):
    # || sigma - ProjTilde sigma || <= c || sigma - Pi sigma || with c <= 10
    sigma, div_sigma = make_matrix_field(np.random.default_rng(21))
    for n in (2, 4, 8):
        mesh = build_uniform_square_mesh(n)
        spaces = build_spaces(mesh, 2)
        system = assemble(mesh, spaces, unit_material)
        proj = elliptic_projection(system, sigma, div_sigma)
        interp = canonical_interpolation(spaces, sigma)
        wrap = lambda t, x, y: sigma(x, y)
        e_proj = l2_error(spaces, proj, wrap, 0.0, "stress", degree=12)
        e_interp = l2_error(spaces, interp, wrap, 0.0, "stress", degree=12)
        assert e_proj <= 10.0 * e_interp


def test_elliptic_projection_div_stability(mesh_cache, unit_material):
    # || ProjTilde sigma ||_div <= c || sigma ||_div with c <= 10
    sigma, div_sigma = make_matrix_field(np.random.default_rng(33))
    mesh = build_uniform_square_mesh(4)
    spaces = build_spaces(mesh, 2)
    system = assemble(mesh, spaces, unit_material)
    proj = elliptic_projection(system, sigma, div_sigma)
    rule = triangle_rule(12)
    W = spaces.quad_weights(rule)
    X = spaces.physical_points(rule)
    exact_sq = (np.asarray(sigma(X[..., 0], X[..., 1])) ** 2).sum(axis=(0, 1))
    exact_div_sq = (np.asarray(div_sigma(X[..., 0], X[..., 1])) ** 2).sum(axis=0)
    norm_exact = np.sqrt((W * (exact_sq + exact_div_sq)).sum())
    hv_sq = (spaces.stress_values(proj, rule) ** 2).sum(axis=(1, 2))
    hd_sq = (spaces.stress_div_values(proj, rule) ** 2).sum(axis=1)
    norm_proj = np.sqrt((W * (hv_sq + hd_sq)).sum())
    assert norm_proj <= 10.0 * norm_exact


def test_initial_data_eg1_zero_stress(mesh_cache, spaces_cache, unit_material):
    # EG1 displacement vanishes at t = 0, so sigma0, r0, u0 are all zero and
    # v0 is the projection of the nonzero initial velocity
    case = builtin_case("eg1")
    spaces = spaces_cache(2, 2)
    system = assemble(mesh_cache(2), spaces, case.material)
    init = build_initial_data(case, system, spaces)
    assert np.abs(init.sigma0).max() <= 1e-12
    assert np.abs(init.r0).max() <= 1e-12
    assert np.abs(init.u0).max() <= 1e-12
    assert np.abs(init.v0).max() > 0.1


def test_initial_data_eg2_weak_symmetry(mesh_cache, spaces_cache):
    case = builtin_case("eg2", alpha=2.7)
    spaces = spaces_cache(2, 2)
    system = assemble(mesh_cache(2), spaces, case.material,
                      body_force=case.f, dirichlet_velocity=case.g)
    init = build_initial_data(case, system, spaces)
    assert np.abs(init.sigma0).max() > 0.1
    cnorm = np.linalg.norm(system.Cmat @ init.sigma0)
    assert cnorm <= 1e-12 * np.linalg.norm(init.sigma0)


def test_initial_stress_convergence(mesh_cache):
    case = builtin_case("eg2", alpha=2.7)
    k = 2
    errs = []
    for n in (2, 4, 8):
        mesh = mesh_cache(n)
        spaces = build_spaces(mesh, k)
        system = assemble(mesh, spaces, case.material)
        init = build_initial_data(case, system, spaces)
        errs.append(l2_error(spaces, init.sigma0, case.sigma, 0.0, "stress"))
    assert np.log2(errs[-2] / errs[-1]) >= k - 0.4


@pytest.mark.parametrize("k", [1, 2])
def test_infsup_stable_under_refinement(mesh_cache, unit_material, k):
    betas = []
    for n in (1, 2, 4):
        mesh = mesh_cache(n)
        spaces = build_spaces(mesh, k)
        system = assemble(mesh, spaces, unit_material)
        betas.append(infsup_constant(system))
    assert all(b > 0.5 for b in betas)
    for prev, cur in zip(betas, betas[1:]):
        assert cur >= 0.9 * prev
