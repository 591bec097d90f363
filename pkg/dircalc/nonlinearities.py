"""Registry of scalar nonlinearities with closed-form derivatives."""

import numpy as np
import scipy.special as special

from dircalc.exceptions import ValidationError


class Nonlinearity:
    """A smooth scalar function F together with its first three derivatives.

    Parameters
    ----------
    name : str
        Registry name.

    F, dF, d2F, d3F : callable
        Vectorized F, F', F'' and F'''.

    lipschitz : callable
        Returns the Lipschitz constant of F on [-L, L].
    """

    def __init__(self, **kwargs):

        self.name = kwargs["name"]
        self.F = kwargs["F"]
        self.dF = kwargs["dF"]
        self.d2F = kwargs["d2F"]
        self.d3F = kwargs["d3F"]
        self._lipschitz = kwargs["lipschitz"]


    def __call__(self, x):
        return self.F(x)


    def lipschitz(self, L):
        """Lipschitz constant of F on [-L, L]."""
        return float(self._lipschitz(L))


    def derivative_bounds(self, L, points=2001):
        """Sup norms of F', F'' and F''' on [-L, L], sampled on a uniform grid that includes the endpoints.

        Parameters
        ----------
        L : float
            Half-width of the interval, nonnegative.

        points : int, optional
            Number of sample points. Defaults to 2001.

        Returns
        -------
        list
            [sup |F'|, sup |F''|, sup |F'''|]
        """
        if L < 0.0:
            raise ValidationError("Interval half-width must be nonnegative; got {0}.".format(L))
        x = np.linspace(-L, L, points)
        return [float(np.max(np.abs(D(x)))) for D in (self.dF, self.d2F, self.d3F)]


def _sech2(x):
    return 1.0/np.cosh(x)**2


NONLINEARITIES = {
    "identity" : Nonlinearity(name="identity",
                              F=lambda x: np.asarray(x, dtype=float),
                              dF=lambda x: np.ones_like(x, dtype=float),
                              d2F=lambda x: np.zeros_like(x, dtype=float),
                              d3F=lambda x: np.zeros_like(x, dtype=float),
                              lipschitz=lambda L: 1.0),
    "square" : Nonlinearity(name="square",
                            F=lambda x: np.asarray(x, dtype=float)**2,
                            dF=lambda x: 2.0*np.asarray(x, dtype=float),
                            d2F=lambda x: np.full_like(x, 2.0, dtype=float),
                            d3F=lambda x: np.zeros_like(x, dtype=float),
                            lipschitz=lambda L: 2.0*L),
    "sin" : Nonlinearity(name="sin",
                         F=np.sin,
                         dF=np.cos,
                         d2F=lambda x: -np.sin(x),
                         d3F=lambda x: -np.cos(x),
                         lipschitz=lambda L: 1.0),
    "tanh" : Nonlinearity(name="tanh",
                          F=np.tanh,
                          dF=_sech2,
                          d2F=lambda x: -2.0*np.tanh(x)*_sech2(x),
                          d3F=lambda x: 4.0*np.tanh(x)**2*_sech2(x)-2.0*_sech2(x)**2,
                          lipschitz=lambda L: 1.0),

    # log(1+e^x) - log 2, so that F(0) = 0
    "softplus_shifted" : Nonlinearity(name="softplus_shifted",
                                      F=lambda x: np.logaddexp(0.0, x)-np.log(2.0),
                                      dF=special.expit,
                                      d2F=lambda x: special.expit(x)*(1.0-special.expit(x)),
                                      d3F=lambda x: special.expit(x)*(1.0-special.expit(x))*(1.0-2.0*special.expit(x)),
                                      lipschitz=lambda L: special.expit(L))
}


def get_nonlinearity(F):
    """Looks up a nonlinearity by name. Nonlinearity objects are passed through.

    Tabulated functions are not accepted, since every use needs accurate derivatives.
    """
    if isinstance(F, Nonlinearity):
        return F
    if not isinstance(F, str):
        raise ValidationError("Nonlinearities must be given by name; tabulated functions are not supported.")
    if F not in NONLINEARITIES:
        raise ValidationError("{0} is not a valid nonlinearity. Valid names are {1}.".format(F, ", ".join(sorted(NONLINEARITIES))))
    return NONLINEARITIES[F]
