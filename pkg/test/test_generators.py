import numpy as np
import pytest
from numpy.testing import assert_allclose

from dircalc.generators import generate, grid_coordinates, torus_grid, box_grid, dumbbell, binary_tree, sierpinski, GENERATORS
from dircalc.exceptions import ValidationError


def test_torus_sizes():

    # Generate
    space = torus_grid(d=2, n=6)

    # Check
    assert space.N == 36
    assert space.N_edges == 72
    assert space.h == pytest.approx(1.0/6.0)
    assert space.total_measure == pytest.approx(1.0)


def test_torus_degree_is_uniform():

    # Generate
    space = torus_grid(d=2, n=5)

    # Every vertex has 4 neighbours with conductance h^0 = 1
    assert_allclose(np.diag(space.stiffness), 4.0)


def test_two_site_torus_merges_edges():

    # Generate
    space = torus_grid(d=1, n=2)

    # Both neighbours coincide
    assert space.N_edges == 1
    assert space.edges[0,2] == pytest.approx(2.0/0.5)


def test_box_grid_sizes():

    # Generate
    space = box_grid(d=2, n=4)

    # Check
    assert space.N == 16
    assert space.N_edges == 24


def test_grid_generator_approximates_laplacian():

    # Generate
    n = 64
    space = torus_grid(d=1, n=n)
    x = grid_coordinates(space)[:,0]
    f = np.sin(2.0*np.pi*x)

    # Lf = -f'' up to O(h^2)
    assert_allclose(space.apply_generator(f), 4.0*np.pi**2*f, atol=4.0*np.pi**2*(2.0*np.pi/n)**2)


def test_dumbbell_layout():

    # Generate
    space = dumbbell(d=2, n=3, neck=2)

    # Check
    assert space.N == 20
    assert space.N_edges == 2*12+3
    coords = grid_coordinates(space)
    assert coords.shape == (20, 2)


def test_dumbbell_without_neck():

    # Generate
    space = dumbbell(d=1, n=3, neck=0)

    # Blocks joined directly
    assert space.N == 6
    assert space.N_edges == 5


def test_binary_tree():

    # Generate
    space = binary_tree(depth=3)

    # Check
    assert space.N == 15
    assert space.N_edges == 14
    assert space.diameter == pytest.approx(6.0)


def test_sierpinski_counts():
    for level in range(4):

        # Generate
        space = sierpinski(level=level)

        # Check
        assert space.N == 3*(3**level+1)//2
        assert space.N_edges == 3**(level+1)
        assert space.total_measure == pytest.approx(1.0)


def test_generate_dispatch():

    # Generate
    space = generate("torus_grid", {"d" : 1, "n" : 10})

    # Check
    assert space.kind == "torus_grid"
    assert space.params == {"d" : 1, "n" : 10, "h" : 0.1}
    assert set(GENERATORS.keys()) == {"torus_grid", "box_grid", "path", "dumbbell", "binary_tree", "sierpinski"}


def test_generate_unknown_kind():
    with pytest.raises(ValidationError):
        generate("moebius", {"n" : 4})


@pytest.mark.parametrize("params", [{"d" : 0, "n" : 4}, {"d" : 1, "n" : 1}, {"d" : 1, "n" : 4, "h" : -1.0}, {"d" : 1.5, "n" : 4}])
def test_generate_invalid_params(params):
    with pytest.raises(ValidationError):
        generate("torus_grid", params)
