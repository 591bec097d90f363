"""Reproducible random field ensembles."""

import numpy as np

from dircalc.exceptions import ValidationError


ENSEMBLE_KINDS = ("band_limited", "heat_mollified_bump", "random_signs", "eigenfield")


class Ensemble:
    """A reproducible family of test fields.

    Parameters
    ----------
    kind : str
        "band_limited" (Gaussian coefficients on eigenvalues in [lam_lo, lam_hi]),
        "heat_mollified_bump" (signed heat-smoothed Dirac masses at random vertices),
        "random_signs" (independent +-1 values) or "eigenfield" (consecutive eigenfields from
        index k).

    count : int
        Number of fields.

    seed : int, optional
        Seed for numpy.random.default_rng. Defaults to 0.

    normalization : str, optional
        "sup" (||f||_inf = amplitude), "sobolev" (||L^(alpha/2) f||_p = amplitude) or "none".
        Defaults to "sup".

    amplitude : float, optional
        Target size after normalization. Defaults to 1.

    alpha : float, optional
        Sobolev order for the "sobolev" normalization. Defaults to 0.5.

    p : float, optional
        Sobolev exponent for the "sobolev" normalization. Defaults to 2.

    lam_lo : float, optional
        Lower band edge for "band_limited". Defaults to lambda_1.

    lam_hi : float, optional
        Upper band edge for "band_limited". Defaults to lambda_max/4.

    t0 : float, optional
        Smoothing time for "heat_mollified_bump". Defaults to 1/lambda_1/10.

    k : int, optional
        First eigenfield index for "eigenfield". Defaults to 1.
    """

    def __init__(self, **kwargs):

        self.kind = kwargs["kind"]
        if self.kind not in ENSEMBLE_KINDS:
            raise ValidationError("{0} is not a valid ensemble kind. Valid kinds are {1}.".format(self.kind, ", ".join(ENSEMBLE_KINDS)))
        self.count = int(kwargs["count"])
        if self.count < 1:
            raise ValidationError("An ensemble needs at least one field.")
        self.seed = int(kwargs.get("seed", 0))
        self.normalization = kwargs.get("normalization", "sup")
        if self.normalization not in ("sup", "sobolev", "none"):
            raise ValidationError("{0} is not a valid normalization.".format(self.normalization))
        self.amplitude = float(kwargs.get("amplitude", 1.0))
        self.alpha = float(kwargs.get("alpha", 0.5))
        self.p = float(kwargs.get("p", 2.0))
        self.lam_lo = kwargs.get("lam_lo", None)
        self.lam_hi = kwargs.get("lam_hi", None)
        self.t0 = kwargs.get("t0", None)
        self.k = int(kwargs.get("k", 1))


    def fields(self, spec):
        """Generates the fields on the space described by the spectral data.

        Parameters
        ----------
        spec : SpectralData
            Spectral data of the space.

        Returns
        -------
        list of ndarray
        """
        rng = np.random.default_rng(self.seed)
        E = spec.eigenfields
        N = spec.N

        if self.kind == "band_limited":
            lam_lo = spec.lambda_1 if self.lam_lo is None else self.lam_lo
            lam_hi = 0.25*spec.lambda_max if self.lam_hi is None else self.lam_hi
            band = np.flatnonzero((spec.eigenvalues >= lam_lo*(1.0-1e-12)) & (spec.eigenvalues <= lam_hi*(1.0+1e-12)) & (spec.eigenvalues > 0.0))
            if len(band) == 0:
                raise ValidationError("No eigenvalue lies in the band [{0}, {1}].".format(lam_lo, lam_hi))
            raw = [E[:,band].dot(rng.standard_normal(len(band))) for _ in range(self.count)]

        elif self.kind == "heat_mollified_bump":
            t0 = 0.1/spec.lambda_1 if self.t0 is None else float(self.t0)
            raw = []
            for _ in range(self.count):
                x = rng.integers(N)
                sign = 1.0 if rng.random() < 0.5 else -1.0
                dirac = np.zeros(N)
                dirac[x] = sign/spec.mu[x]
                raw.append(spec.heat(t0, dirac))

        elif self.kind == "random_signs":
            raw = [np.where(rng.random(N) < 0.5, -1.0, 1.0) for _ in range(self.count)]

        else:
            if self.k < 0 or self.k >= N:
                raise ValidationError("Eigenfield index {0} is out of range.".format(self.k))
            raw = [np.copy(E[:,min(self.k+i, N-1)]) for i in range(self.count)]

        return [self._normalize(f, spec) for f in raw]


    def _normalize(self, f, spec):
        if self.normalization == "none":
            return self.amplitude*f
        if self.normalization == "sup":
            scale = np.max(np.abs(f))
        else:
            scale = spec.sobolev_norm(f, self.alpha, self.p)
        return self.amplitude*f/scale if scale > 0.0 else f


    def to_dict(self):
        """Returns the ensemble description."""
        return {"kind" : self.kind,
                "count" : self.count,
                "seed" : self.seed,
                "normalization" : self.normalization,
                "amplitude" : self.amplitude,
                "alpha" : self.alpha,
                "p" : self.p,
                "lam_lo" : self.lam_lo,
                "lam_hi" : self.lam_hi,
                "t0" : self.t0,
                "k" : self.k}
