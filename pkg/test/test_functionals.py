import numpy as np
import pytest
from numpy.testing import assert_allclose

from dircalc.space import DirichletSpace
from dircalc.generators import torus_grid, path, dumbbell
from dircalc.calculus import decompose, ScaleGrid, ortho_constant
from dircalc.functionals import (TimeField, Cone, maximal, horizontal_square, vertical_square, conical_square,
                                 oscillation, s_alpha, carleson_function, carleson, nontangential_max,
                                 carleson_duality_check, fefferman_stein_check, orthogonality_check,
                                 field_summary, export_field)
from dircalc.dc_math import lp_norm
from dircalc.exceptions import ValidationError


def two_point():
    return DirichletSpace(mu=[1.0, 1.0], edges=[[0, 1, 1.0, 1.0]])


def random_field(space, seed=0):
    return np.random.default_rng(seed).standard_normal(space.N)


def test_maximal_dominates_field():

    # Load space
    space = dumbbell(d=2, n=3, neck=2)
    f = random_field(space)

    # Check
    for q in [1.0, 1.5, 2.0]:
        assert np.all(maximal(space, f, q) >= np.abs(f)*(1.0-1e-12))


def test_maximal_of_constant():

    # Load space
    space = path(n=8)

    # Check
    assert_allclose(maximal(space, 3.0*np.ones(space.N), 2.0), 3.0, rtol=1e-12)


def test_maximal_of_dirac_on_path():

    # Load space
    space = path(n=10)
    f = np.zeros(space.N)
    f[0] = 1.0

    # The smallest ball holding 0 and 4 has five vertices
    M = maximal(space, f)
    assert M[0] == pytest.approx(1.0)
    assert M[4] == pytest.approx(0.2)


def test_maximal_sup_exponent():

    # Load space
    space = path(n=6)
    f = np.array([0.0, -2.0, 1.0, 0.5, 0.0, 0.0])

    # Check
    assert_allclose(maximal(space, f, np.inf), 2.0)


def test_maximal_invalid_exponent():
    with pytest.raises(ValidationError):
        maximal(path(n=4), np.ones(4), 0.5)


def test_horizontal_square_energy_identity():

    # Load space
    space = torus_grid(d=2, n=6)
    spec = decompose(space)
    f = random_field(space, 1)

    for N in [1.0, 2.5]:

        # sum mu g_N(f)^2 = c_N ||f - P_N f||_2^2
        g = horizontal_square(spec, N, f)
        lhs = np.sum(space.mu*g**2)
        rhs = ortho_constant(N)*lp_norm(f-spec.project_nullspace(f), space.mu, 2)**2
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_horizontal_square_alpha_variant():

    # Load space
    space = path(n=8)
    spec = decompose(space)

    # Constants have no square function
    assert_allclose(horizontal_square(spec, 1.0, np.ones(space.N), "gN_alpha", alpha=0.5), 0.0, atol=1e-12)
    g = horizontal_square(spec, 1.0, random_field(space), "gN_alpha", alpha=0.5)
    assert np.all(g >= 0.0)

    # Check
    with pytest.raises(ValidationError):
        horizontal_square(spec, 1.0, random_field(space), "gN_alpha")
    with pytest.raises(ValidationError):
        horizontal_square(spec, 1.0, random_field(space), "gN_beta")


def test_vertical_square_two_point():

    # Load space
    space = two_point()
    spec = decompose(space)
    f = np.array([1.0, -1.0])

    # Gamma(f,f) = 2 and lambda = 2
    assert_allclose(vertical_square(space, spec, 1.0, f, "GN_tilde"), 0.5, rtol=1e-12)
    assert_allclose(vertical_square(space, spec, 1.0, f, "GN"), np.sqrt(0.5), rtol=1e-6)


def test_vertical_square_tilde_integrates_exactly():

    # Load space
    space = dumbbell(d=2, n=3, neck=2)
    spec = decompose(space)
    f = random_field(space, 2)
    N = 1.5

    # sum mu G~_N(f)^2 = Gamma(2N+1)/(2^(2N+1) Gamma(N)^2) ||f - P_N f||_2^2
    G = vertical_square(space, spec, N, f, "GN_tilde")
    c = spec.coefficients(f)[spec.nullspace_dim:]
    constant = np.exp(np.log(6.0)-(2.0*N+1.0)*np.log(2.0)-2.0*np.log(np.sqrt(np.pi)/2.0))
    assert np.sum(space.mu*G**2) == pytest.approx(constant*np.sum(c**2), rel=1e-10)


def test_vertical_square_invalid_variant():

    # Load space
    space = path(n=4)
    spec = decompose(space)

    # Check
    with pytest.raises(ValidationError):
        vertical_square(space, spec, 1.0, np.ones(4), "GN_hat")


def test_conical_square_vanishes_on_constants():

    # Load space
    space = path(n=6)
    spec = decompose(space)

    # Check
    assert_allclose(conical_square(space, spec, 1.0, np.ones(space.N)), 0.0, atol=1e-12)
    assert np.all(conical_square(space, spec, 1.0, random_field(space)) > 0.0)


def test_oscillation():

    # Load space
    space = two_point()
    ball = space.ball(0, 1.0)

    # Check
    assert oscillation(space, ball, np.ones(2), 2.0) == pytest.approx(0.0)
    for rho in [1.0, 2.0, np.inf]:
        assert oscillation(space, ball, np.array([1.0, -1.0]), rho) == pytest.approx(1.0)
    assert oscillation(space, space.ball(0, 0.5), np.array([1.0, -1.0]), 2.0) == pytest.approx(0.0)


def test_s_alpha_two_point():

    # Load space
    space = two_point()
    f = np.array([1.0, -1.0])

    # Only balls covering the whole space oscillate
    assert_allclose(s_alpha(space, f, 0.5, 2.0), 1.0, rtol=1e-12)
    assert_allclose(s_alpha(space, f, 0.25, 2.0), np.sqrt(2.0), rtol=1e-12)
    assert_allclose(s_alpha(space, f, 0.5, 2.0, variant="mean_deviation"), np.sqrt(2.0), rtol=1e-12)


def test_s_alpha_constant_and_validation():

    # Load space
    space = path(n=8)

    # Check
    assert_allclose(s_alpha(space, np.ones(space.N), 0.5, 2.0), 0.0, atol=1e-12)
    with pytest.raises(ValidationError):
        s_alpha(space, np.ones(space.N), 1.0, 2.0)
    with pytest.raises(ValidationError):
        s_alpha(space, np.ones(space.N), 0.5, 0.5)
    with pytest.raises(ValidationError):
        s_alpha(space, np.ones(space.N), 0.5, 2.0, variant="median")
    with pytest.warns(UserWarning):
        s_alpha(space, random_field(space), 0.5, 2.0, radii=[1.0, 2.0, 50.0])


def test_time_field_shape():

    # Load grid
    grid = ScaleGrid(t_min=0.1, t_max=10.0, points_per_decade=4)

    # Check
    F = TimeField.from_function(grid, lambda t: t*np.ones(3))
    assert F.slices.shape == (grid.N, 3)
    assert_allclose(F.square_integral(), np.sum(grid.weights*grid.nodes**2))
    with pytest.raises(ValidationError):
        TimeField(grid=grid, slices=np.ones((grid.N+1, 3)))


def test_cone_contains_axis():

    # Load space
    space = path(n=6)
    grid = ScaleGrid(t_min=0.25, t_max=16.0, points_per_decade=4)
    cone = Cone(space=space, grid=grid, vertex=2)

    # Every time slice holds the apex
    apex = cone.members[cone.members[:,0] == 2]
    assert sorted(apex[:,1].tolist()) == list(range(grid.N))

    # Check
    F = TimeField(grid=grid, slices=np.zeros((grid.N, space.N)))
    F.slices[-1,5] = -3.0
    assert cone.sup(F) == pytest.approx(3.0)


def test_nontangential_max_dominates_slices():

    # Load space
    space = path(n=8)
    grid = ScaleGrid(t_min=0.5, t_max=8.0, points_per_decade=4)
    F = TimeField(grid=grid, slices=np.random.default_rng(4).standard_normal((grid.N, space.N)))

    # Check
    N_star = nontangential_max(space, F)
    assert np.all(N_star[np.newaxis,:] >= np.abs(F.slices))


def test_carleson_is_homogeneous():

    # Load space
    space = path(n=8)
    grid = ScaleGrid(t_min=0.5, t_max=8.0, points_per_decade=4)
    F = TimeField(grid=grid, slices=np.random.default_rng(5).standard_normal((grid.N, space.N)))
    G = TimeField(grid=grid, slices=2.0*F.slices)

    # Check
    assert carleson(space, G, 2.5) == pytest.approx(2.0*carleson(space, F, 2.5), rel=1e-12)
    assert np.all(carleson_function(space, F, 2.0) > 0.0)
    with pytest.raises(ValidationError):
        carleson_function(space, F, 1.5)


def test_carleson_duality_check():

    # Load space
    space = path(n=8)
    grid = ScaleGrid(t_min=0.5, t_max=8.0, points_per_decade=4)
    rng = np.random.default_rng(6)
    pairs = [(TimeField(grid=grid, slices=rng.standard_normal((grid.N, space.N))),
              TimeField(grid=grid, slices=rng.standard_normal((grid.N, space.N)))) for _ in range(3)]

    # Check
    result = carleson_duality_check(space, pairs, 2.0)
    assert result["count"] == 3
    assert result["max"] >= result["median"] > 0.0


def test_fefferman_stein_ratio_at_least_one():

    # Load space
    space = path(n=8)
    grid = ScaleGrid(t_min=0.5, t_max=8.0, points_per_decade=4)
    rng = np.random.default_rng(7)
    fields = [TimeField(grid=grid, slices=rng.standard_normal((grid.N, space.N))) for _ in range(3)]

    # M_q dominates |F| pointwise
    result = fefferman_stein_check(space, fields, 3.0, 1.5)
    assert min(result["ratios"]) >= 1.0-1e-12
    with pytest.raises(ValidationError):
        fefferman_stein_check(space, fields, 3.0, 2.0)


def test_orthogonality_check_at_two():

    # Load space
    space = torus_grid(d=1, n=12)
    spec = decompose(space)
    grid = ScaleGrid.default(spec)
    rng = np.random.default_rng(8)
    fields = [TimeField(grid=grid, slices=rng.standard_normal((grid.N, space.N))) for _ in range(4)]

    # Cauchy-Schwarz bounds the L^2 constant by 1
    result = orthogonality_check(spec, fields, 1.0, 2.0)
    assert result["count"] == 4
    assert result["max"] <= 1.0+1e-3


def test_field_summary():

    # Load space
    space = path(n=4)
    summary = field_summary(np.array([1.0, -2.0, 0.0, 1.0]), space.mu)

    # Check
    assert summary["min"] == -2.0
    assert summary["max"] == 1.0
    assert summary["norms"]["1.0"] == pytest.approx(4.0)
    assert summary["norms"]["inf"] == pytest.approx(2.0)


def test_export_field(tmp_path):

    # Export
    filename = str(tmp_path / "field.csv")
    export_field(filename, np.array([0.5, 1.5]))

    # Check
    table = np.loadtxt(filename, delimiter=",", skiprows=1)
    assert_allclose(table, [[0.0, 0.5], [1.0, 1.5]])
    with pytest.raises(ValidationError):
        export_field(str(tmp_path / "field.txt"), np.ones(2))
