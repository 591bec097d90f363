import numpy as np
import pytest
from numpy.testing import assert_allclose

from dircalc.generators import torus_grid, path
from dircalc.calculus import decompose
from dircalc.ensembles import Ensemble, ENSEMBLE_KINDS
from dircalc.exceptions import ValidationError


@pytest.fixture(scope="module")
def spec():
    return decompose(torus_grid(d=2, n=6))


@pytest.mark.parametrize("kind", ENSEMBLE_KINDS)
def test_sup_normalization(spec, kind):

    # Generate
    fields = Ensemble(kind=kind, count=5, seed=3, amplitude=2.0).fields(spec)

    # Check
    assert len(fields) == 5
    for f in fields:
        assert f.shape == (spec.N,)
        assert np.max(np.abs(f)) == pytest.approx(2.0)


def test_sobolev_normalization(spec):

    # Generate
    fields = Ensemble(kind="band_limited", count=3, normalization="sobolev", alpha=0.5, p=3.0).fields(spec)

    # Check
    for f in fields:
        assert spec.sobolev_norm(f, 0.5, 3.0) == pytest.approx(1.0)


def test_reproducible(spec):

    # Generate twice
    first = Ensemble(kind="heat_mollified_bump", count=4, seed=11).fields(spec)
    second = Ensemble(kind="heat_mollified_bump", count=4, seed=11).fields(spec)
    other = Ensemble(kind="heat_mollified_bump", count=4, seed=12).fields(spec)

    # Check
    for f, g in zip(first, second):
        assert_allclose(f, g, rtol=0.0, atol=0.0)
    assert any(not np.allclose(f, g) for f, g in zip(first, other))


def test_band_limited_fields_live_in_band(spec):

    # Generate
    lam_lo, lam_hi = spec.lambda_1, 2.0*spec.lambda_1
    fields = Ensemble(kind="band_limited", count=3, lam_lo=lam_lo, lam_hi=lam_hi).fields(spec)

    # Coefficients outside the band vanish
    outside = (spec.eigenvalues < lam_lo*(1.0-1e-9)) | (spec.eigenvalues > lam_hi*(1.0+1e-9))
    for f in fields:
        assert_allclose(spec.coefficients(f)[outside], 0.0, atol=1e-10)


def test_eigenfield_kind(spec):

    # Generate
    fields = Ensemble(kind="eigenfield", count=2, k=1, normalization="none").fields(spec)

    # Check
    assert_allclose(fields[0], spec.eigenfields[:,1])
    assert_allclose(fields[1], spec.eigenfields[:,2])


def test_random_signs(spec):

    # Generate
    f = Ensemble(kind="random_signs", count=1, normalization="none").fields(spec)[0]

    # Check
    assert set(np.unique(f).tolist()) <= {-1.0, 1.0}


def test_invalid_ensembles(spec):
    with pytest.raises(ValidationError):
        Ensemble(kind="white_noise", count=2)
    with pytest.raises(ValidationError):
        Ensemble(kind="band_limited", count=0)
    with pytest.raises(ValidationError):
        Ensemble(kind="band_limited", count=1, normalization="energy")
    with pytest.raises(ValidationError):
        Ensemble(kind="eigenfield", count=1, k=spec.N).fields(spec)
    with pytest.raises(ValidationError):
        Ensemble(kind="band_limited", count=1, lam_lo=1e6, lam_hi=2e6).fields(spec)


def test_to_dict():

    # Check
    ensemble = Ensemble(kind="random_signs", count=2, seed=5)
    assert ensemble.to_dict()["kind"] == "random_signs"
    assert ensemble.to_dict()["seed"] == 5
    assert ensemble.fields(decompose(path(n=4)))[0].shape == (4,)
