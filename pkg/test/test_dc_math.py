import numpy as np
import pytest
from numpy.testing import assert_allclose

from dircalc.dc_math import (lp_norm, average, conjugate_exponent, geometric_nodes, log_trapezoid_weights,
                             fit_line, fit_grouped_line, matrix_norm, OperatorNorm)


def test_lp_norm():

    # Load field
    f = np.array([3.0, -4.0])
    mu = np.array([1.0, 1.0])

    # Check
    assert lp_norm(f, mu, 1.0) == pytest.approx(7.0)
    assert lp_norm(f, mu, 2.0) == pytest.approx(5.0)
    assert lp_norm(f, mu, np.inf) == pytest.approx(4.0)
    assert_allclose(lp_norm(np.column_stack([f, 2.0*f]), mu, 2.0), [5.0, 10.0])
    assert lp_norm(f, np.array([0.25, 0.25]), 2.0) == pytest.approx(2.5)


def test_average_and_conjugate():
    assert average(np.array([1.0, 3.0]), np.array([3.0, 1.0])) == pytest.approx(1.5)
    assert conjugate_exponent(2.0) == 2.0
    assert conjugate_exponent(1.0) == np.inf
    assert conjugate_exponent(np.inf) == 1.0
    assert conjugate_exponent(4.0) == pytest.approx(4.0/3.0)


def test_geometric_nodes_and_weights():

    # Load nodes
    nodes = geometric_nodes(1e-2, 1e2, 8)
    weights = log_trapezoid_weights(nodes)

    # Check
    assert len(nodes) == 33
    assert nodes[0] == pytest.approx(1e-2)
    assert nodes[-1] == pytest.approx(1e2)
    assert np.sum(weights) == pytest.approx(np.log(1e4))

    # int_a^b t dt/t = b - a
    assert weights.dot(nodes) == pytest.approx(1e2-1e-2, rel=1e-2)


def test_fit_line():

    # Fit
    x = np.linspace(0.0, 1.0, 11)
    fit = fit_line(x, 2.0*x-1.0)

    # Check
    assert fit["slope"] == pytest.approx(2.0)
    assert fit["intercept"] == pytest.approx(-1.0)
    assert fit["r2"] == pytest.approx(1.0)
    assert fit["max_residual"] < 1e-12
    assert not fit["degenerate"]


def test_fit_line_degenerate():

    # Fit
    with pytest.warns(UserWarning):
        fit = fit_line([1.0, 1.0], [2.0, 4.0])

    # Check
    assert fit["degenerate"]
    assert fit["slope"] == 0.0
    assert fit["intercept"] == pytest.approx(3.0)


def test_fit_grouped_line():

    # Two groups with a common slope and different intercepts
    x = np.array([0.0, 1.0, 2.0, 0.0, 1.0, 2.0])
    y = 0.5*x+np.array([0.0, 0.0, 0.0, 3.0, 3.0, 3.0])

    # Check
    assert fit_grouped_line(x, y, [0, 0, 0, 1, 1, 1])["slope"] == pytest.approx(0.5)


def test_matrix_norm_exact_cases():

    # Load matrix
    A = np.array([[1.0, -2.0], [3.0, 0.5]])
    mu = np.ones(2)

    # Check
    assert matrix_norm(A, mu, mu, 1.0).value == pytest.approx(4.0)
    assert matrix_norm(A, mu, mu, np.inf, np.inf).upper == pytest.approx(3.5)
    assert matrix_norm(A, mu, mu, 2.0).value == pytest.approx(np.linalg.norm(A, 2))
    assert matrix_norm(A, mu, mu, 2.0).exact


def test_matrix_norm_weights():

    # Diagonal operator f -> f on L^2(mu_in) to L^2(mu_out)
    A = np.eye(2)
    mu_in = np.array([1.0, 4.0])
    mu_out = np.array([1.0, 1.0])

    # sup ||f||_(mu_out) / ||f||_(mu_in) = 1
    assert matrix_norm(A, mu_in, mu_out, 2.0).value == pytest.approx(1.0)


def test_matrix_norm_bracket():

    # Load matrix
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 6))
    mu = np.ones(6)

    # Check
    bracket = matrix_norm(A, mu, mu, 3.0)
    assert not bracket.exact
    assert bracket.lower <= bracket.upper
    x = rng.standard_normal(6)
    assert lp_norm(A.dot(x), mu, 3.0)/lp_norm(x, mu, 3.0) <= bracket.upper*(1.0+1e-12)


def test_operator_norm_to_dict():

    # Check
    norm = OperatorNorm(2.0, 1.0, False)
    assert norm.to_dict() == {"lower" : 2.0, "upper" : 2.0, "exact" : False}
