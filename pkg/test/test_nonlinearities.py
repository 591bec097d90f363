import numpy as np
import pytest
from numpy.testing import assert_allclose

from dircalc.nonlinearities import NONLINEARITIES, Nonlinearity, get_nonlinearity
from dircalc.exceptions import ValidationError


@pytest.mark.parametrize("name", sorted(NONLINEARITIES.keys()))
def test_derivatives_match_differences(name):

    # Load nonlinearity
    F = get_nonlinearity(name)
    x = np.linspace(-2.0, 2.0, 21)
    h = 1e-5

    # Central differences
    assert_allclose(F.dF(x), (F(x+h)-F(x-h))/(2.0*h), atol=1e-8)
    assert_allclose(F.d2F(x), (F.dF(x+h)-F.dF(x-h))/(2.0*h), atol=1e-8)
    assert_allclose(F.d3F(x), (F.d2F(x+h)-F.d2F(x-h))/(2.0*h), atol=1e-8)


@pytest.mark.parametrize("name", sorted(NONLINEARITIES.keys()))
def test_lipschitz_bounds_derivative(name):

    # Load nonlinearity
    F = get_nonlinearity(name)
    L = 1.5
    x = np.linspace(-L, L, 301)

    # Check
    assert np.max(np.abs(F.dF(x))) <= F.lipschitz(L)*(1.0+1e-12)


def test_derivative_bounds():

    # Closed forms on [-1.5, 1.5]
    assert get_nonlinearity("square").derivative_bounds(1.5) == pytest.approx([3.0, 2.0, 0.0])
    assert get_nonlinearity("sin").derivative_bounds(1.5) == pytest.approx([1.0, np.sin(1.5), 1.0])
    assert get_nonlinearity("identity").derivative_bounds(0.0) == pytest.approx([1.0, 0.0, 0.0])

    # Check
    with pytest.raises(ValidationError):
        get_nonlinearity("tanh").derivative_bounds(-1.0)


def test_nonlinearities_vanish_at_zero():
    for F in NONLINEARITIES.values():
        assert F(np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-15)


def test_lookup():

    # Check
    F = NONLINEARITIES["tanh"]
    assert get_nonlinearity("tanh") is F
    assert get_nonlinearity(F) is F
    assert isinstance(F, Nonlinearity)


def test_lookup_errors():
    with pytest.raises(ValidationError):
        get_nonlinearity("cube")
    with pytest.raises(ValidationError):
        get_nonlinearity(np.array([0.0, 1.0]))
