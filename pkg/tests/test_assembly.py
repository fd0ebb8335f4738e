import io

import numpy as np
import pytest

from mixedelast import (AssemblyError, MaterialModel, MixedElastError, assemble,
                        assemble_body_load, assemble_dirichlet_load,
                        assemble_stress_mass, builtin_case,
                        isotropic_compliance_apply, isotropic_stiffness_apply)
from mixedelast.assembly import export_matrix

from _oracles import (dense_assemble, dense_body_load, dense_dirichlet_load,
                      dense_system_blocks)


def test_compliance_identity_tensor(unit_material):
    out = isotropic_compliance_apply(np.eye(2), unit_material)
    assert np.abs(out - 0.25 * np.eye(2)).max() <= 1e-15


def test_stiffness_identity_tensor(unit_material):
    out = isotropic_stiffness_apply(np.eye(2), unit_material)
    assert np.abs(out - 4.0 * np.eye(2)).max() <= 1e-15


@pytest.mark.parametrize("seed", range(5))
def test_compliance_inverts_stiffness_on_symmetric(seed):
    rng = np.random.default_rng(seed)
    mat = MaterialModel(mu=rng.uniform(0.5, 3.0), lambda_=rng.uniform(0.5, 5.0))
    tau = rng.standard_normal((2, 2))
    tau = 0.5 * (tau + tau.T)
    back = isotropic_compliance_apply(isotropic_stiffness_apply(tau, mat), mat)
    assert np.abs(back - tau).max() <= 1e-12


def test_compliance_identity_on_skew(unit_material):
    q = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert np.abs(isotropic_compliance_apply(q, unit_material) - q).max() == 0.0


def test_material_validation():
    with pytest.raises(MixedElastError):
        MaterialModel(mu=0.0, lambda_=1.0)
    with pytest.raises(MixedElastError):
        MaterialModel(mu=1.0, lambda_=1.0, rho=-2.0)
    with pytest.raises(MixedElastError):
        MaterialModel(mu=1.0, lambda_=1.0, rho=lambda x, y: 1.0 + x)


def test_block_sizes(mesh_cache, spaces_cache, unit_material):
    system = assemble(mesh_cache(1), spaces_cache(1, 1), unit_material)
    assert system.Amat.shape == (20, 20)
    assert system.Bmat.shape == (4, 20)
    assert system.Cmat.shape == (2, 20)
    assert system.Mmat.shape == (4, 4)


def test_mass_matrix_is_area_blocks(mesh_cache, spaces_cache, unit_material):
    mesh = mesh_cache(2)
    system = assemble(mesh, spaces_cache(2, 1), unit_material)
    M = system.Mmat.toarray()
    expected = np.zeros_like(M)
    for t, area in enumerate(mesh.triangle_areas()):
        expected[2 * t:2 * t + 2, 2 * t:2 * t + 2] = area * np.eye(2)
    assert np.abs(M - expected).max() <= 1e-14


def test_amat_positive_definite(mesh_cache, spaces_cache, unit_material):
    system = assemble(mesh_cache(2), spaces_cache(2, 2), unit_material)
    rng = np.random.default_rng(7)
    for _ in range(5):
        a = rng.standard_normal(system.Amat.shape[0])
        assert a @ (system.Amat @ a) > 0.0
    A = system.Amat
    assert abs(A - A.T).max() <= 1e-12
    M = system.Mmat
    assert abs(M - M.T).max() <= 1e-14


def test_bmat_full_row_rank(mesh_cache, spaces_cache, unit_material):
    for n, k in ((1, 1), (2, 1), (2, 2)):
        system = assemble(mesh_cache(n), spaces_cache(n, k), unit_material)
        sv = np.linalg.svd(system.Bmat.toarray(), compute_uv=False)
        assert sv.min() > 1e-10 * sv.max()


def test_block_ode_matrix_invertible(mesh_cache, spaces_cache, unit_material):
    system = assemble(mesh_cache(1), spaces_cache(1, 1), unit_material)
    E, _ = dense_system_blocks(system)
    assert np.linalg.cond(E) < 1e3


@pytest.mark.parametrize("n,k", [(1, 1), (1, 2), (2, 1)])
def test_oracle_equivalence(mesh_cache, spaces_cache, unit_material, n, k):
    # brute-force looped assembly on meshes of up to 8 triangles
    mesh = mesh_cache(n)
    spaces = spaces_cache(n, k)
    system = assemble(mesh, spaces, unit_material)
    A, B, C, M = dense_assemble(spaces, unit_material)
    assert np.abs(system.Amat.toarray() - A).max() <= 1e-12
    assert np.abs(system.Bmat.toarray() - B).max() <= 1e-12
    assert np.abs(system.Cmat.toarray() - C).max() <= 1e-12
    assert np.abs(system.Mmat.toarray() - M).max() <= 1e-12


def test_compliance_inverts_stiffness_on_general_tensors(unit_material):
    rng = np.random.default_rng(9)
    tau = rng.standard_normal((2, 2))
    back = isotropic_compliance_apply(isotropic_stiffness_apply(tau, unit_material),
                                      unit_material)
    assert np.abs(back - tau).max() <= 1e-12


def test_amat_mmat_smallest_eigenvalue_positive(mesh_cache, spaces_cache, unit_material):
    system = assemble(mesh_cache(1), spaces_cache(1, 1), unit_material)
    assert np.linalg.eigvalsh(system.Amat.toarray()).min() > 0.0
    assert np.linalg.eigvalsh(system.Mmat.toarray()).min() > 0.0


def test_rho_scaling(mesh_cache, spaces_cache):
    base = assemble(mesh_cache(2), spaces_cache(2, 1), MaterialModel(mu=1, lambda_=1, rho=1.0))
    scaled = assemble(mesh_cache(2), spaces_cache(2, 1), MaterialModel(mu=1, lambda_=1, rho=3.0))
    assert abs(scaled.Mmat - 3.0 * base.Mmat).max() <= 1e-14


def test_rho_bound_violation(mesh_cache, spaces_cache):
    mat = MaterialModel(mu=1.0, lambda_=1.0, rho=lambda x, y: 1.0 + x, rho0=1.0, rho1=1.5)
    with pytest.raises(AssemblyError):
        assemble(mesh_cache(2), spaces_cache(2, 1), mat)


def test_spatial_rho_assembles(mesh_cache, spaces_cache):
    mat = MaterialModel(mu=1.0, lambda_=1.0, rho=lambda x, y: 1.0 + x, rho0=1.0, rho1=2.0)
    system = assemble(mesh_cache(2), spaces_cache(2, 1), mat)
    # k=1 constant basis is 1 per triangle, so the x-component diagonal sums
    # to the total mass: int (1 + x) over the unit square = 3/2
    M = system.Mmat.toarray()
    total = sum(M[2 * t, 2 * t] for t in range(mesh_cache(2).num_triangles))
    assert total == pytest.approx(1.5, rel=1e-13)


def test_body_load_zero(spaces_cache, unit_material):
    spaces = spaces_cache(2, 1)
    zero = assemble_body_load(spaces, lambda t, x, y: np.zeros((2,) + np.shape(x)), 0.0)
    assert np.all(zero == 0.0)


def test_body_load_constant(mesh_cache, spaces_cache):
    mesh = mesh_cache(2)
    spaces = spaces_cache(2, 1)

    def f(t, x, y):
        return np.stack([np.ones(np.shape(x)), np.zeros(np.shape(x))])

    zeta = assemble_body_load(spaces, f, 0.0)
    areas = mesh.triangle_areas()
    # per-triangle layout [x-const, y-const]; entry for the constant basis
    # on triangle T is its area
    expected = np.zeros_like(zeta)
    for t, a in enumerate(areas):
        expected[2 * t] = a
    assert np.abs(zeta - expected).max() <= 1e-14


def test_body_load_oracle(spaces_cache, unit_material):
    spaces = spaces_cache(1, 2)

    def f(t, x, y):
        return np.stack([2.0 * np.asarray(x), np.zeros(np.shape(x))])

    production = assemble_body_load(spaces, f, 0.0)
    oracle = dense_body_load(spaces, f, 0.0)
    assert np.abs(production - oracle).max() <= 1e-12


def test_dirichlet_load_zero(spaces_cache):
    spaces = spaces_cache(2, 2)
    zero = assemble_dirichlet_load(
        spaces, lambda t, x, y: np.zeros((2,) + np.shape(x)), 0.0)
    assert np.all(zero == 0.0)


def test_homogeneous_case_never_assembles_boundary_load(mesh_cache, spaces_cache,
                                                        unit_material):
    case = builtin_case("eg1")
    assert case.homogeneous and case.g is None
    system = assemble(mesh_cache(1), spaces_cache(1, 1), unit_material,
                      body_force=case.f, dirichlet_velocity=case.g)
    assert np.all(system.dirichlet_load(0.37) == 0.0)


def test_dirichlet_load_oracle(spaces_cache):
    spaces = spaces_cache(2, 2)
    case = builtin_case("eg2", alpha=2.7)
    production = assemble_dirichlet_load(spaces, case.v, 0.0, degree=10)
    oracle = dense_dirichlet_load(spaces, case.v, 0.0)
    assert np.abs(production - oracle).max() <= 1e-12


def test_dirichlet_load_skips_neumann_edges(mesh_cache):
    import dataclasses
    from mixedelast import NEUMANN, build_spaces

    mesh = mesh_cache(2)
    # tag the y = 0 boundary edges Neumann, keep the rest Dirichlet
    mids = 0.5 * (mesh.vertices[mesh.edges[mesh.boundary_edges, 0]]
                  + mesh.vertices[mesh.edges[mesh.boundary_edges, 1]])
    tags = tuple(NEUMANN if abs(y) < 1e-12 else "dirichlet" for _, y in mids)
    mixed = dataclasses.replace(mesh, boundary_tags=tags)
    spaces = build_spaces(mixed, 1)

    g = lambda t, x, y: np.stack([np.ones(np.shape(x)), np.zeros(np.shape(x))])
    load = assemble_dirichlet_load(spaces, g, 0.0)
    # edge dofs on the y = 0 edges carry no boundary load
    k = spaces.k
    for e, tag in zip(mixed.boundary_edges, tags):
        dofs = [r * spaces.n_row_global + e * (k + 1) + i
                for r in range(2) for i in range(k + 1)]
        if tag == NEUMANN:
            assert np.abs(load[dofs]).max() <= 1e-14
    assert np.abs(load).max() > 0.1


def test_stress_mass_spd(mesh_cache, spaces_cache):
    mass = assemble_stress_mass(spaces_cache(1, 1))
    dense = mass.toarray()
    assert np.abs(dense - dense.T).max() <= 1e-13
    assert np.linalg.eigvalsh(dense).min() > 0.0


def test_export_matrix_format(mesh_cache, spaces_cache, unit_material):
    system = assemble(mesh_cache(1), spaces_cache(1, 1), unit_material)
    buf = io.StringIO()
    export_matrix(system.Cmat, buf)
    lines = buf.getvalue().strip().split("\n")
    assert len(lines) == system.Cmat.nnz
    i, j, v = lines[0].split()
    int(i), int(j), float(v)
