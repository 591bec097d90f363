"""Spectral functional calculus of the generator of a Dirichlet space."""

import os
import time

import numpy as np
import scipy.linalg as sla
import scipy.special as special

from dircalc.exceptions import ValidationError, NumericalError
from dircalc.dc_math import lp_norm, geometric_nodes, log_trapezoid_weights, matrix_norm


def q_multiplier(x, N):
    """Spectral multiplier of Q_t^(N) at x = t*lambda: x^N e^(-x) / Gamma(N)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = np.exp(N*np.log(x[pos])-x[pos]-special.gammaln(N))
    return out


def p_multiplier(x, N):
    """Spectral multiplier of P_t^(N) at x = t*lambda: the regularized upper incomplete gamma function."""
    return special.gammaincc(N, np.asarray(x, dtype=float))


def r_multiplier(x, N):
    """Spectral multiplier of R_t^(N) = P_t^(N) e^(tL/2)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    direct = x < 600.0
    out[direct] = special.gammaincc(N, x[direct])*np.exp(0.5*x[direct])

    # Leading asymptotics where gammaincc underflows
    xa = x[~direct]
    out[~direct] = np.exp((N-1.0)*np.log(xa)-0.5*xa-special.gammaln(N))*(1.0+(N-1.0)/xa)
    return out


def ortho_constant(N):
    """Returns int_0^inf (x^N e^(-x)/Gamma(N))^2 dx/x = Gamma(2N)/(4^N Gamma(N)^2)."""
    return float(np.exp(special.gammaln(2.0*N)-N*np.log(4.0)-2.0*special.gammaln(N)))


def check_incomplete_gamma(N, x):
    """Returns max |log(Q(N,x) + P(N,x))| over the points where both are representable."""
    x = np.asarray(x, dtype=float)
    total = special.gammaincc(N, x)+special.gammainc(N, x)
    ok = np.isfinite(total) & (total > 0.0)
    if not np.any(ok):
        return 0.0
    return float(np.max(np.abs(np.log(total[ok]))))


class SpectralData:
    """mu-orthonormal eigendecomposition of the generator L = sum lambda_i e_i <e_i, .>_mu.

    Usually obtained from decompose().

    Parameters
    ----------
    eigenvalues : ndarray
        Nondecreasing eigenvalues, the first equal to zero.

    eigenfields : ndarray
        Matrix whose columns are the mu-orthonormal eigenfields.

    mu : ndarray
        Vertex measure.

    space_hash : str, optional
        Hash of the space the data belongs to. Defaults to None.
    """

    def __init__(self, **kwargs):

        self.eigenvalues = np.asarray(kwargs["eigenvalues"], dtype=float)
        self.eigenfields = np.asarray(kwargs["eigenfields"], dtype=float)
        self.mu = np.asarray(kwargs["mu"], dtype=float)
        self.space_hash = kwargs.get("space_hash", None)
        self.N = len(self.eigenvalues)
        self.nullspace_dim = 1
        self.total_measure = float(np.sum(self.mu))


    @property
    def lambda_max(self):
        """Largest eigenvalue."""
        return float(self.eigenvalues[-1])


    @property
    def lambda_1(self):
        """Smallest nonzero eigenvalue."""
        if self.N < 2:
            raise ValidationError("A single-vertex space has no nonzero eigenvalue.")
        return float(self.eigenvalues[self.nullspace_dim])


    def coefficients(self, f):
        """Returns <f, e_i>_mu for every eigenfield (per column for a stack of fields)."""
        f = np.asarray(f)
        w = self.mu if f.ndim == 1 else self.mu[:,np.newaxis]
        return self.eigenfields.T.dot(w*f)


    def synthesize(self, c):
        """Returns sum_i c_i e_i."""
        return self.eigenfields.dot(c)


    def multiply(self, values, f):
        """Applies the spectral multiplier with the given values on the eigenvalues."""
        values = np.asarray(values)
        c = self.coefficients(f)
        if c.ndim == 2:
            values = values[:,np.newaxis]
        return self.synthesize(values*c)


    def slices(self, multipliers, f):
        """Applies a family of multipliers of shape (n_nodes, N) to f, returning shape (n_nodes, N)."""
        c = self.coefficients(f)
        return (np.asarray(multipliers)*c[np.newaxis,:]).dot(self.eigenfields.T)


    def apply_function(self, phi, f):
        """Calculates phi(L)f = sum phi(lambda_i) <f, e_i>_mu e_i.

        Parameters
        ----------
        phi : callable
            Vectorized function of the spectrum.

        f : ndarray
            Field (or stack of fields).

        Returns
        -------
        ndarray
        """
        return self.multiply(self._evaluate(phi), f)


    def _evaluate(self, phi):
        values = np.broadcast_to(np.asarray(phi(self.eigenvalues)), self.eigenvalues.shape)
        if not np.all(np.isfinite(values)):
            raise NumericalError("The spectral function is not finite on the spectrum.")
        return values


    def operator_matrix(self, values):
        """Matrix A of the multiplier acting on fields, (Af)(x) = sum_y A[x,y] f(y)."""
        E = self.eigenfields
        return (E*np.asarray(values)[np.newaxis,:]).dot(E.T)*self.mu[np.newaxis,:]


    def kernel(self, values):
        """Integral kernel k(x,y) = sum_i values_i e_i(x) e_i(y) of the multiplier with respect to mu."""
        E = self.eigenfields
        return (E*np.asarray(values)[np.newaxis,:]).dot(E.T)


    def project_nullspace(self, f):
        """Returns P_N f, the mu-average of f as a constant field."""
        f = np.asarray(f)
        w = self.mu if f.ndim == 1 else self.mu[:,np.newaxis]
        mean = np.sum(w*f, axis=0)/self.total_measure
        return np.ones_like(f)*mean


    def project_range(self, f):
        """Returns (f - P_N f, mass) where mass = sum_x f(x) mu(x) is the projected-out part."""
        f = np.asarray(f)
        w = self.mu if f.ndim == 1 else self.mu[:,np.newaxis]
        return f-self.project_nullspace(f), np.sum(w*f, axis=0)


    def heat(self, t, f):
        """Returns e^(-tL)f."""
        if not t > 0.0:
            raise ValidationError("Heat time must be positive; got {0}.".format(t))
        return self.multiply(np.exp(-t*self.eigenvalues), f)


    def heat_kernel(self, t):
        """Returns the matrix p_t(x,y), so that e^(-tL)f(x) = sum_y p_t(x,y) f(y) mu(y)."""
        if not t > 0.0:
            raise ValidationError("Heat time must be positive; got {0}.".format(t))
        return self.kernel(np.exp(-t*self.eigenvalues))


    def power_values(self, beta):
        """Spectral values of L^beta on the range, zero on the nullspace."""
        values = np.zeros(self.N, dtype=complex if np.iscomplexobj(beta) else float)
        pos = self.eigenvalues[self.nullspace_dim:]
        values[self.nullspace_dim:] = pos**beta
        return values


    def fractional_power(self, beta, f):
        """Returns L^beta f, acting on the range (the nullspace is annihilated for every beta)."""
        return self.multiply(self.power_values(float(beta)), f)


    def imaginary_power(self, beta, f):
        """Returns L^(i beta) f, a complex field, acting on the range."""
        return self.multiply(self.power_values(1j*float(beta)), f)


    def imaginary_power_norm(self, beta, p, **kwargs):
        """Bracket on the norm of L^(i beta) on L^p.

        Parameters
        ----------
        beta : float
            Imaginary order.

        p : float
            Exponent in [1, inf].

        seed : int, optional
            Seed of the random starts. Defaults to 0.

        Returns
        -------
        OperatorNorm
        """
        A = self.operator_matrix(self.power_values(1j*float(beta)))
        return matrix_norm(A, self.mu, self.mu, p, p, seed=kwargs.get("seed", 0), starts=kwargs.get("starts", 8))


    def _times(self, t):
        if not t > 0.0:
            raise ValidationError("Scale t must be positive; got {0}.".format(t))
        return t*self.eigenvalues


    def q_values(self, t, N):
        """Spectral values of Q_t^(N)."""
        _check_order(N)
        return q_multiplier(self._times(t), N)


    def p_values(self, t, N):
        """Spectral values of P_t^(N), checked against the complementary incomplete gamma function."""
        _check_order(N)
        x = self._times(t)
        residual = check_incomplete_gamma(N, x)
        if residual > 1e-10:
            raise NumericalError("Incomplete gamma evaluation for N = {0} is outside its accuracy envelope.".format(N), residual)
        return p_multiplier(x, N)


    def r_values(self, t, N):
        """Spectral values of R_t^(N)."""
        _check_order(N)
        return r_multiplier(self._times(t), N)


    def q_op(self, t, N, f):
        """Returns Q_t^(N) f = Gamma(N)^-1 (tL)^N e^(-tL) f."""
        return self.multiply(self.q_values(t, N), f)


    def p_op(self, t, N, f):
        """Returns P_t^(N) f = phi_N(tL) f."""
        return self.multiply(self.p_values(t, N), f)


    def r_op(self, t, N, f):
        """Returns R_t^(N) f, where P_t^(N) = R_t^(N) e^(-tL/2)."""
        return self.multiply(self.r_values(t, N), f)


    def calderon_values(self, N, a, b):
        """Spectral values of int_a^b Q_t^(N) dt/t = phi_N(a lambda) - phi_N(b lambda) on the range."""
        _check_order(N)
        if not (0.0 <= a < b):
            raise ValidationError("Integration limits must satisfy 0 <= a < b; got ({0}, {1}).".format(a, b))
        lam = self.eigenvalues
        values = np.zeros(self.N)
        pos = lam > 0.0
        upper = np.zeros(np.sum(pos)) if np.isinf(b) else p_multiplier(b*lam[pos], N)
        values[pos] = p_multiplier(a*lam[pos], N)-upper
        return values


    def calderon_reconstruct(self, N, f, a=0.0, b=np.inf):
        """Closed-form int_a^b Q_t^(N) f dt/t. Over (0, inf) this is f - P_N f."""
        return self.multiply(self.calderon_values(N, a, b), f)


    def band_identity_residual(self, N, t, f, sign=-1.0):
        """Relative L^2 residual of P_t^(N) f = f + sign * int_0^t Q_s^(N) f ds/s.

        sign = -1 is the identity that holds; sign = +1 evaluates the opposite-sign display.
        """
        lhs = self.p_op(t, N, f)
        rhs = np.asarray(f)+sign*self.calderon_reconstruct(N, f, 0.0, t)
        scale = lp_norm(f, self.mu, 2)
        return float(lp_norm(lhs-rhs, self.mu, 2)/scale) if scale > 0.0 else 0.0


    def q_square_integral(self, N, f):
        """Exact int_0^inf ||Q_t^(N) f||_2^2 dt/t = Gamma(2N)/(4^N Gamma(N)^2) ||f - P_N f||_2^2."""
        c = self.coefficients(f)[self.nullspace_dim:]
        return ortho_constant(N)*float(np.sum(np.abs(c)**2))


    def sobolev_norm(self, f, alpha, p):
        """Returns the homogeneous Sobolev seminorm ||L^(alpha/2) f||_p."""
        return lp_norm(self.fractional_power(0.5*alpha, f), self.mu, p)


    def save(self, filename):
        """Writes eigenvalues and eigenfields to a numpy .npz file."""
        np.savez(filename, eigenvalues=self.eigenvalues, eigenfields=self.eigenfields, mu=self.mu)


def _check_order(N):
    if not N > 0.0:
        raise ValidationError("Operator order N must be positive; got {0}.".format(N))


def decompose(space, **kwargs):
    """Computes the spectral data of the generator of a space.

    Solves K e = lambda diag(mu) e through the symmetric matrix diag(mu)^-1/2 K diag(mu)^-1/2 with
    scipy.linalg.eigh. The nullspace eigenfield is replaced by the exact normalized constant.

    Parameters
    ----------
    space : DirichletSpace
        Space to decompose.

    max_vertices : int, optional
        Largest admissible vertex count. Defaults to 4096.

    cache_dir : str, optional
        Directory of the spectral cache. Defaults to the DIRCALC_CACHE environment variable, or no
        caching if that is not set.

    verbose : bool, optional
        Defaults to False.

    Returns
    -------
    SpectralData
    """
    max_vertices = kwargs.get("max_vertices", 4096)
    cache_dir = kwargs.get("cache_dir", None) or os.environ.get("DIRCALC_CACHE", None)
    verbose = kwargs.get("verbose", False)

    if space.N > max_vertices:
        raise ValidationError("The space has {0} vertices; the dense decomposition is capped at {1}.".format(space.N, max_vertices))

    # Try the cache
    cache_file = None
    if cache_dir is not None:
        cache_file = os.path.join(cache_dir, "spectral_{0}.npz".format(space.hash))
        if os.path.isfile(cache_file):
            with np.load(cache_file) as data:
                if verbose:
                    print("\nLoaded spectral data from '{0}'.".format(cache_file))
                return SpectralData(eigenvalues=data["eigenvalues"], eigenfields=data["eigenfields"], mu=space.mu, space_hash=space.hash)

    if verbose:
        start_time = time.time()
        print("\nDecomposing generator ({0} vertices)...".format(space.N), end='', flush=True)

    mu = space.mu
    s = 1.0/np.sqrt(mu)
    K = space.stiffness
    try:
        lam, U = sla.eigh(s[:,np.newaxis]*K*s[np.newaxis,:])
    except (sla.LinAlgError, ValueError) as e:
        raise NumericalError("Eigensolver failed: {0}".format(e))
    E = s[:,np.newaxis]*U
    lam_max = max(float(lam[-1]), 0.0)

    # Nullspace is the constants
    n_null = int(np.sum(lam <= 1e-10*lam_max)) if lam_max > 0.0 else space.N
    if n_null != 1:
        raise NumericalError("Found {0} near-zero eigenvalues on a connected space.".format(n_null), float(lam[min(1, space.N-1)]))
    lam[0] = 0.0
    E[:,0] = 1.0/np.sqrt(space.total_measure)

    # Residual checks
    if space.N > 1:
        R = (K.dot(E)-mu[:,np.newaxis]*E*lam[np.newaxis,:])/mu[:,np.newaxis]
        residual = float(np.max(np.abs(R))/(lam_max*np.max(np.abs(E))))
        if residual > 1e-8:
            raise NumericalError("Eigendecomposition does not reconstruct the generator.", residual)
        orth = float(np.max(np.abs(E.T.dot(mu[:,np.newaxis]*E)-np.eye(space.N))))
        if orth > 1e-10:
            raise NumericalError("Eigenfields are not mu-orthonormal.", orth)

    if verbose:
        end_time = time.time()
        print("Finished. Time: {0} s.".format(end_time-start_time), flush=True)

    spec = SpectralData(eigenvalues=lam, eigenfields=E, mu=mu, space_hash=space.hash)
    if cache_file is not None:
        os.makedirs(cache_dir, exist_ok=True)
        spec.save(cache_file)
    return spec


class ScaleGrid:
    """Geometric time grid with log-trapezoid weights, sum_j w_j phi(t_j) ~ int_tmin^tmax phi(t) dt/t.

    Parameters
    ----------
    t_min : float
        Smallest node.

    t_max : float
        Largest node.

    points_per_decade : int, optional
        Defaults to 32.
    """

    def __init__(self, **kwargs):

        self.t_min = float(kwargs["t_min"])
        self.t_max = float(kwargs["t_max"])
        self.points_per_decade = int(kwargs.get("points_per_decade", 32))
        if not (0.0 < self.t_min < self.t_max):
            raise ValidationError("A scale grid needs 0 < t_min < t_max; got ({0}, {1}).".format(self.t_min, self.t_max))
        if self.points_per_decade < 1:
            raise ValidationError("points_per_decade must be at least 1.")

        self.nodes = geometric_nodes(self.t_min, self.t_max, self.points_per_decade)
        self.weights = log_trapezoid_weights(self.nodes)
        self.N = len(self.nodes)


    @classmethod
    def default(cls, spec, points_per_decade=32):
        """Grid from 10^-2/lambda_max to 10^2/lambda_1."""
        return cls(t_min=1e-2/spec.lambda_max, t_max=1e2/spec.lambda_1, points_per_decade=points_per_decade)


    def to_dict(self):
        """Returns the grid parameters."""
        return {"t_min" : self.t_min, "t_max" : self.t_max, "points_per_decade" : self.points_per_decade, "nodes" : self.N}


def scale_integrate(grid, phi):
    """Quadrature sum_j w_j phi(t_j) in fixed node order.

    Parameters
    ----------
    grid : ScaleGrid
        Scale grid.

    phi : callable or ndarray
        Function of t returning a field, or an array of slices of shape (grid.N, ...).

    Returns
    -------
    ndarray
    """
    total = 0.0
    for j, t in enumerate(grid.nodes):
        value = phi(t) if callable(phi) else phi[j]
        if not np.all(np.isfinite(value)):
            raise NumericalError("Integrand is not finite at t = {0}.".format(t))
        total = total+grid.weights[j]*np.asarray(value)
    return total
