"""Helpful math functions."""

import warnings

import numpy as np
import scipy.stats as stat


def lp_norm(f, mu, p):
    """Calculates the L^p(mu) norm of f along its first axis.

    Parameters
    ----------
    f : ndarray
        Field of shape (n,) or stack of fields of shape (n, k). May be complex.

    mu : ndarray
        Vertex measure of shape (n,).

    p : float
        Exponent in [1, inf].

    Returns
    -------
    float or ndarray
        Norm of f (one per column if f is two-dimensional).
    """
    a = np.abs(f)
    if np.isinf(p):
        return np.max(a, axis=0)
    w = mu if a.ndim == 1 else mu[:,np.newaxis]
    return np.sum(w*a**p, axis=0)**(1.0/p)


def average(f, mu):
    """Calculates the mu-weighted average of f along its first axis."""
    w = mu if np.ndim(f) == 1 else mu[:,np.newaxis]
    return np.sum(w*f, axis=0)/np.sum(mu)


def conjugate_exponent(p):
    """Returns the Hoelder conjugate of p."""
    if p == 1.0:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p/(p-1.0)


def geometric_nodes(lo, hi, points_per_decade):
    """Returns geometric nodes from lo to hi (inclusive) with the requested density."""
    N_int = max(int(np.ceil(points_per_decade*np.log10(hi/lo)-1e-9)), 1)
    return np.geomspace(lo, hi, N_int+1)


def log_trapezoid_weights(nodes):
    """Trapezoid weights for int phi(t) dt/t on geometric nodes. They sum to ln(t_max/t_min)."""
    du = np.diff(np.log(nodes))
    w = np.zeros(len(nodes))
    w[:-1] += 0.5*du
    w[1:] += 0.5*du
    return w


def fit_line(x, y):
    """Least-squares line through (x, y) using scipy.stats.linregress.

    Parameters
    ----------
    x, y : array_like
        Regression points.

    Returns
    -------
    dict
        Keys "slope", "intercept", "r2" and "max_residual". A degenerate fit (fewer than two
        distinct x values) returns zero slope, the mean as intercept and r2 = 0, and is flagged
        with "degenerate" set to True.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    # Degenerate sampling
    if len(x) < 2 or np.ptp(x) == 0.0:
        warnings.warn("Degenerate fit: fewer than two distinct abscissae.")
        c = float(np.mean(y)) if len(y) > 0 else 0.0
        return {"slope" : 0.0,
                "intercept" : c,
                "r2" : 0.0,
                "max_residual" : float(np.max(np.abs(y-c))) if len(y) > 0 else 0.0,
                "degenerate" : True}

    result = stat.linregress(x, y)
    residual = y-(result.slope*x+result.intercept)
    r2 = result.rvalue**2 if np.isfinite(result.rvalue) else 1.0
    return {"slope" : float(result.slope),
            "intercept" : float(result.intercept),
            "r2" : float(r2),
            "max_residual" : float(np.max(np.abs(residual))),
            "degenerate" : False}


def fit_grouped_line(x, y, groups):
    """Fits a common slope to (x, y) with one free intercept per group.

    The group means are removed before calling fit_line(), which gives the pooled
    within-group slope.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    groups = np.asarray(groups)
    xc = np.copy(x)
    yc = np.copy(y)
    for g in np.unique(groups):
        sel = groups == g
        xc[sel] -= np.mean(x[sel])
        yc[sel] -= np.mean(y[sel])
    return fit_line(xc, yc)


class OperatorNorm:
    """Bracket on an operator norm.

    Parameters
    ----------
    lower : float
        Certified lower bound (attained by an explicit input).

    upper : float
        Upper bound.

    exact : bool
        Whether lower and upper coincide by construction.
    """

    def __init__(self, lower, upper, exact):
        self.lower = float(lower)
        self.upper = float(max(upper, lower))
        self.exact = bool(exact)


    @property
    def value(self):
        """The best available estimate (the lower bound unless exact)."""
        return self.lower


    def to_dict(self):
        """Returns the bracket as a dictionary."""
        return {"lower" : self.lower, "upper" : self.upper, "exact" : self.exact}


def _dual_vector(v, r):
    # Norming functional of v in l^r, returned as a vector of unit l^{r'} norm
    a = np.abs(v)
    nv = np.sum(a**r)**(1.0/r)
    if nv == 0.0:
        return np.zeros_like(v)
    phase = np.where(a > 0.0, v/np.where(a > 0.0, a, 1.0), 0.0)
    return phase*(a/nv)**(r-1.0)


def _l_norm(v, r):
    a = np.abs(v)
    if np.isinf(r):
        return np.max(a, axis=0)
    return np.sum(a**r, axis=0)**(1.0/r)


def _exact_norm(B, p, q):
    # l^p -> l^q norm where it is available in closed form, else None
    if p == 1.0:
        return np.max(_l_norm(B, q))
    if np.isinf(q):
        return np.max(_l_norm(B.T, conjugate_exponent(p)))
    if p == 2.0 and q == 2.0:
        return np.linalg.norm(B, 2)
    return None


def matrix_norm(A, mu_in, mu_out, p, q=None, **kwargs):
    """Estimates the norm of the matrix A from L^p(mu_in) to L^q(mu_out).

    Exact for p = 1, for q = inf and for p = q = 2. Otherwise the lower bound comes from a
    normalized fixed-point ascent (the p-norm power method) started from the largest column
    and from seeded random vectors, and the upper bound from interpolation between the exact
    cases.

    Parameters
    ----------
    A : ndarray
        Matrix of shape (m, n) acting on fields by (Af)(x) = sum_y A[x,y] f(y). May be complex.

    mu_in : ndarray
        Measure on the n input vertices.

    mu_out : ndarray
        Measure on the m output vertices.

    p : float
        Input exponent in [1, inf].

    q : float, optional
        Output exponent. Defaults to p.

    starts : int, optional
        Number of random starts. Defaults to 8.

    iterations : int, optional
        Maximum ascent iterations per start. Defaults to 100.

    seed : int, optional
        Seed of the random starts. Defaults to 0.

    Returns
    -------
    OperatorNorm
    """
    if q is None:
        q = p
    starts = kwargs.get("starts", 8)
    iterations = kwargs.get("iterations", 100)
    seed = kwargs.get("seed", 0)

    # Transform to unweighted sequence spaces
    wi = np.ones_like(mu_in) if np.isinf(p) else mu_in**(-1.0/p)
    wo = np.ones_like(mu_out) if np.isinf(q) else mu_out**(1.0/q)
    B = wo[:,np.newaxis]*A*wi[np.newaxis,:]

    exact = _exact_norm(B, p, q)
    if exact is not None:
        return OperatorNorm(exact, exact, True)

    # Upper bound
    if p == q:
        n1 = _exact_norm(B, 1.0, 1.0)
        n2 = _exact_norm(B, 2.0, 2.0)
        ninf = _exact_norm(B, np.inf, np.inf)
        if np.isinf(p):
            upper = ninf
        elif p < 2.0:
            upper = n1**(2.0/p-1.0)*n2**(2.0-2.0/p)
        else:
            upper = n2**(2.0/p)*ninf**(1.0-2.0/p)
    else:
        n1q = _exact_norm(B, 1.0, q)
        rows = _l_norm(np.sum(np.abs(B), axis=1), q)
        if np.isinf(p):
            upper = rows
        else:
            upper = n1q**(1.0/p)*rows**(1.0-1.0/p)

    # Sign ascent for bounded inputs
    if np.isinf(p):
        return OperatorNorm(_sign_ascent(B, q, iterations), upper, False)

    p_dual = conjugate_exponent(p)
    rng = np.random.default_rng(seed)
    is_complex = np.iscomplexobj(B)
    x_starts = [np.abs(B).sum(axis=0)+0.0j if is_complex else np.abs(B).sum(axis=0)]
    for _ in range(starts):
        x = rng.standard_normal(B.shape[1])
        if is_complex:
            x = x+1j*rng.standard_normal(B.shape[1])
        x_starts.append(x)

    lower = 0.0
    for x in x_starts:
        x = x/_l_norm(x, p)
        gamma = 0.0
        for _ in range(iterations):
            y = B.dot(x)
            gamma = max(gamma, _l_norm(y, q))
            z = np.conj(B.T).dot(_dual_vector(y, q))
            if _l_norm(z, p_dual) <= np.real(np.vdot(z, x))*(1.0+1e-12):
                break
            x = _dual_vector(z, p_dual)
        lower = max(lower, gamma)

    return OperatorNorm(lower, upper, False)


def _sign_ascent(B, q, iterations):
    # Lower bound on the l^inf -> l^q norm by alternating sign updates
    x = np.sign(np.real(B).sum(axis=0))
    x[x == 0.0] = 1.0
    best = 0.0
    for _ in range(iterations):
        y = B.dot(x)
        best = max(best, _l_norm(y, q))
        g = np.real(np.conj(B.T).dot(_dual_vector(y, q)))
        x_new = np.sign(g)
        x_new[x_new == 0.0] = 1.0
        if np.array_equal(x_new, x):
            break
        x = x_new
    return best
