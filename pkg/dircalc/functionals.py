"""Maximal, square, oscillation and Carleson functionals on a Dirichlet space."""

import warnings

import numpy as np
import scipy.special as special

from dircalc.exceptions import ValidationError
from dircalc.calculus import ScaleGrid, q_multiplier, p_multiplier
from dircalc.dc_math import lp_norm, geometric_nodes, log_trapezoid_weights


class TimeField:
    """A family of fields F_t indexed by the nodes of a scale grid.

    Parameters
    ----------
    grid : ScaleGrid
        Scale grid.

    slices : ndarray
        Array of shape (grid.N, N_vertices); row j is F at t_j.
    """

    def __init__(self, **kwargs):

        self.grid = kwargs["grid"]
        self.slices = np.asarray(kwargs["slices"])
        if self.slices.ndim != 2 or self.slices.shape[0] != self.grid.N:
            raise ValidationError("A time field needs one slice per grid node ({0}); got shape {1}.".format(self.grid.N, self.slices.shape))


    @classmethod
    def from_function(cls, grid, func):
        """Builds a time field by evaluating func(t) at every node."""
        return cls(grid=grid, slices=np.array([func(t) for t in grid.nodes]))


    def square_integral(self):
        """Returns sum_j w_j |F_j|^2 at every vertex."""
        return self.grid.weights.dot(np.abs(self.slices)**2)


class Cone:
    """Parabolic cone {(y, t_j) : d(x,y) <= sqrt(t_j)} over a vertex.

    Parameters
    ----------
    space : DirichletSpace
        Space.

    grid : ScaleGrid
        Scale grid.

    vertex : int
        Apex of the cone.
    """

    def __init__(self, **kwargs):

        space = kwargs["space"]
        grid = kwargs["grid"]
        self.vertex = int(kwargs["vertex"])
        d = space.distances[self.vertex]
        inside = d[np.newaxis,:] <= np.sqrt(grid.nodes)[:,np.newaxis]*(1.0+1e-12)
        j, y = np.nonzero(inside)
        self.members = np.stack([y, j], axis=1)


    def sup(self, F):
        """Returns max |F(y, t_j)| over the cone."""
        return float(np.max(np.abs(F.slices[self.members[:,1], self.members[:,0]])))


def maximal(space, f, q=1.0):
    """Uncentered maximal function M_q f(x) = sup over balls B containing x of (avg_B |f|^q)^(1/q).

    Every distinct ball of the graph is visited: for each center, the balls are the prefixes of the
    vertices sorted by distance.

    Parameters
    ----------
    space : DirichletSpace
        Space.

    f : ndarray
        Field.

    q : float, optional
        Exponent in [1, inf]. Defaults to 1.

    Returns
    -------
    ndarray
    """
    a = np.abs(np.asarray(f))
    if np.isinf(q):
        return np.full(space.N, np.max(a))
    if q < 1.0:
        raise ValidationError("Maximal exponent must be at least 1; got {0}.".format(q))

    D = space.distances
    mu = space.mu
    mass = mu*a**q
    result = np.zeros(space.N)
    for z in range(space.N):
        order = np.argsort(D[z], kind='stable')
        d = D[z][order]

        # Balls end where the distance strictly increases
        ends = np.flatnonzero(np.append(d[1:] > d[:-1]*(1.0+1e-12)+1e-300, True))
        averages = np.cumsum(mass[order])[ends]/np.cumsum(mu[order])[ends]
        suffix = np.maximum.accumulate(averages[::-1])[::-1]
        best = suffix[np.searchsorted(ends, np.arange(space.N))]
        result[order] = np.maximum(result[order], best)
    return result**(1.0/q)


def _range_part(spec, f):
    c = spec.coefficients(f)[spec.nullspace_dim:]
    return c, spec.eigenvalues[spec.nullspace_dim:], spec.eigenfields[:,spec.nullspace_dim:]


def horizontal_square(spec, N, f, variant="gN", **kwargs):
    """Horizontal square function.

    "gN" is (int_0^inf |Q_t^(N) f|^2 dt/t)^(1/2), evaluated exactly through the Gram matrix
    int (t l_i)^N (t l_j)^N e^(-t(l_i+l_j)) dt/t / Gamma(N)^2 = Gamma(2N)/Gamma(N)^2 (l_i l_j)^N / (l_i+l_j)^(2N).

    "gN_alpha" uses (tL)^alpha P_t^(N) on a scale grid, with the small-t tail
    t_min^(2 alpha)/(2 alpha) |L^alpha f|^2 added.

    Parameters
    ----------
    spec : SpectralData
        Spectral data.

    N : float
        Order.

    f : ndarray
        Field.

    variant : str, optional
        "gN" or "gN_alpha". Defaults to "gN".

    alpha : float, optional
        Required for "gN_alpha".

    grid : ScaleGrid, optional
        Grid for "gN_alpha". Defaults to ScaleGrid.default(spec).

    Returns
    -------
    ndarray
    """
    c, lam, E = _range_part(spec, f)
    Y = E*c[np.newaxis,:]

    if variant == "gN":
        L = np.log(lam)
        logG = special.gammaln(2.0*N)-2.0*special.gammaln(N)+N*(L[:,np.newaxis]+L[np.newaxis,:])-2.0*N*np.log(lam[:,np.newaxis]+lam[np.newaxis,:])
        square = np.sum(Y.dot(np.exp(logG))*Y, axis=1)

    elif variant == "gN_alpha":
        alpha = kwargs.get("alpha", None)
        if alpha is None or not alpha > 0.0:
            raise ValidationError("Variant gN_alpha needs alpha > 0.")
        grid = kwargs.get("grid", None) or ScaleGrid.default(spec)
        x = grid.nodes[:,np.newaxis]*lam[np.newaxis,:]
        slices = (x**alpha*p_multiplier(x, N)*c[np.newaxis,:]).dot(E.T)
        square = grid.weights.dot(slices**2)
        square += grid.t_min**(2.0*alpha)/(2.0*alpha)*E.dot(lam**alpha*c)**2

    else:
        raise ValidationError("{0} is not a valid horizontal square function variant.".format(variant))

    return np.sqrt(np.maximum(square, 0.0))


def vertical_square(space, spec, N, f, variant="GN", **kwargs):
    """Vertical square function (int_0^inf t |grad T_t f|^2 dt/t)^(1/2), T_t = P_t^(N) ("GN") or Q_t^(N) ("GN_tilde").

    The time integral of the bilinear form is reduced to a matrix H over eigenvalue pairs, exact
    for "GN_tilde" and by quadrature (from 10^-6 t_min, with the remaining tail t_lo Gamma(f,f))
    for "GN"; the carre du champ is then summed over edges.

    Parameters
    ----------
    space : DirichletSpace
        Space.

    spec : SpectralData
        Spectral data of the space.

    N : float
        Order.

    f : ndarray
        Field.

    variant : str, optional
        "GN" or "GN_tilde". Defaults to "GN".

    grid : ScaleGrid, optional
        Grid for "GN". Defaults to ScaleGrid.default(spec).

    Returns
    -------
    ndarray
    """
    c, lam, E = _range_part(spec, f)

    if variant == "GN_tilde":
        L = np.log(lam)
        logH = special.gammaln(2.0*N+1.0)-2.0*special.gammaln(N)+N*(L[:,np.newaxis]+L[np.newaxis,:])-(2.0*N+1.0)*np.log(lam[:,np.newaxis]+lam[np.newaxis,:])
        H = np.exp(logH)

    elif variant == "GN":
        grid = kwargs.get("grid", None) or ScaleGrid.default(spec)
        t_lo = grid.t_min*1e-6
        nodes = geometric_nodes(t_lo, grid.t_max, grid.points_per_decade)
        weights = log_trapezoid_weights(nodes)
        Phi = p_multiplier(nodes[:,np.newaxis]*lam[np.newaxis,:], N)
        H = Phi.T.dot((weights*nodes)[:,np.newaxis]*Phi)+t_lo

    else:
        raise ValidationError("{0} is not a valid vertical square function variant.".format(variant))

    # Edge differences of each weighted eigenfield
    B = space.incidence
    Dc = B.dot(E*c[np.newaxis,:])
    edge_terms = space.edges[:,2]*np.sum(Dc.dot(H)*Dc, axis=1)
    square = abs(B).T.dot(edge_terms)/(2.0*space.mu)
    return np.sqrt(np.maximum(square, 0.0))


def conical_square(space, spec, N, f, grid=None):
    """Conical square function, (sum over the cone of x of |Q_t^(N) f(y)|^2 w_t mu(y)/V(y, sqrt t))^(1/2).

    Parameters
    ----------
    space : DirichletSpace
        Space.

    spec : SpectralData
        Spectral data.

    N : float
        Order.

    f : ndarray
        Field.

    grid : ScaleGrid, optional
        Defaults to ScaleGrid.default(spec).

    Returns
    -------
    ndarray
    """
    grid = grid or ScaleGrid.default(spec)
    Q = spec.slices(q_multiplier(grid.nodes[:,np.newaxis]*spec.eigenvalues[np.newaxis,:], N), f)
    square = np.zeros(space.N)
    for j, t in enumerate(grid.nodes):
        mask = space.ball_mask(np.sqrt(t))
        V = mask.dot(space.mu)
        square += mask.dot(grid.weights[j]*space.mu*Q[j]**2/V)
    return np.sqrt(square)


def oscillation(space, B, f, rho):
    """rho-oscillation (avg_B |f - avg_B f|^rho)^(1/rho) of f over a ball; rho = inf gives the largest deviation.

    Parameters
    ----------
    space : DirichletSpace
        Space.

    B : Ball
        Ball.

    f : ndarray
        Field.

    rho : float
        Exponent in [1, inf].

    Returns
    -------
    float
    """
    f = np.asarray(f)
    dev = np.abs(f[B.members]-B.average(f))
    if np.isinf(rho):
        return float(np.max(dev))
    return float((np.sum(space.mu[B.members]*dev**rho)/B.volume)**(1.0/rho))


def _ball_oscillations(space, f, r, rho, variant):
    # Oscillation over B(x,r) for every x
    mask = space.ball_mask(r)
    mu = space.mu
    V = mask.dot(mu)
    if variant == "mean_oscillation":
        center = mask.dot(mu*f)/V
    else:
        center = f
    dev = np.abs(f[np.newaxis,:]-center[:,np.newaxis])
    if np.isinf(rho):
        return np.max(np.where(mask, dev, 0.0), axis=1)
    return (np.sum(np.where(mask, dev**rho, 0.0)*mu[np.newaxis,:], axis=1)/V)**(1.0/rho)


def s_alpha(space, f, alpha, rho, radii=None, variant="mean_oscillation", points_per_decade=16):
    """Oscillation functional S_alpha^rho f(x) = (int_0^inf [r^-alpha rho-osc_B(x,r) f]^2 dr/r)^(1/2).

    The radius integral uses log-trapezoid weights on a geometric grid over [h, diameter]. Above
    the diameter every ball is the whole space, so the exact tail r_max^(-2 alpha)/(2 alpha) times
    the last oscillation squared is added.

    Parameters
    ----------
    space : DirichletSpace
        Space.

    f : ndarray
        Field.

    alpha : float
        Order in (0, 1).

    rho : float
        Oscillation exponent in [1, inf].

    radii : array_like, optional
        Radius grid. Radii outside [0, diameter] are dropped with a warning. Defaults to a geometric
        grid over [h, diameter].

    variant : str, optional
        "mean_oscillation" (deviation from the ball average) or "mean_deviation" (deviation from
        f(x)). Defaults to "mean_oscillation".

    points_per_decade : int, optional
        Density of the default radius grid. Defaults to 16.

    Returns
    -------
    ndarray
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must lie in (0, 1); got {0}.".format(alpha))
    if rho < 1.0:
        raise ValidationError("rho must be at least 1; got {0}.".format(rho))
    if variant not in ("mean_oscillation", "mean_deviation"):
        raise ValidationError("{0} is not a valid S_alpha variant.".format(variant))
    f = np.asarray(f, dtype=float)
    diam = space.diameter
    if diam == 0.0:
        return np.zeros(space.N)

    if radii is None:
        lo = min(space.h, diam)
        radii = geometric_nodes(lo, diam, points_per_decade) if lo < diam else np.array([diam])
    else:
        radii = np.sort(np.array(radii, dtype=float))
        inside = (radii >= 0.0) & (radii <= diam*(1.0+1e-12))
        if not np.all(inside):
            warnings.warn("{0} radii outside [0, diameter] were ignored.".format(np.sum(~inside)))
        radii = radii[inside & (radii > 0.0)]
        if len(radii) == 0:
            raise ValidationError("No radius lies in (0, {0}].".format(diam))

    integrand = np.array([(r**(-alpha)*_ball_oscillations(space, f, r, rho, variant))**2 for r in radii])
    square = log_trapezoid_weights(radii).dot(integrand) if len(radii) > 1 else np.zeros(space.N)
    if radii[-1] >= diam*(1.0-1e-12):
        square += integrand[-1]/(2.0*alpha)
    return np.sqrt(square)


def carleson_function(space, F, p):
    """Carleson function C_p(F)(x) = sup over balls B containing x of (avg_B (int_0^r(B)^2 |F|^2 dt/t)^(p/2))^(1/p).

    Ball radii are matched to the grid by r = sqrt(t_j). Balls larger than sqrt(t_max) use the full
    time integral.

    Parameters
    ----------
    space : DirichletSpace
        Space.

    F : TimeField
        Time field.

    p : float
        Exponent in [2, inf).

    Returns
    -------
    ndarray
    """
    if p < 2.0 or np.isinf(p):
        raise ValidationError("Carleson exponent must lie in [2, inf); got {0}.".format(p))
    grid = F.grid
    cumulative = np.cumsum(grid.weights[:,np.newaxis]*np.abs(F.slices)**2, axis=0)

    radii = list(np.sqrt(grid.nodes))
    levels = list(range(grid.N))
    if space.diameter > radii[-1]:
        extra = geometric_nodes(radii[-1], space.diameter, 8)[1:]
        radii += list(extra)
        levels += [grid.N-1]*len(extra)

    result = np.zeros(space.N)
    for r, j in zip(radii, levels):
        mask = space.ball_mask(r)
        V = mask.dot(space.mu)
        averages = mask.dot(space.mu*cumulative[j]**(0.5*p))/V
        result = np.maximum(result, np.max(np.where(mask, averages[np.newaxis,:], 0.0), axis=1))
    return result**(1.0/p)


def carleson(space, F, p):
    """Supremum of the Carleson function of F."""
    return float(np.max(carleson_function(space, F, p)))


def nontangential_max(space, F):
    """Non-tangential maximal function N_*(F)(x) = max of |F(y, t_j)| over the cone d(x,y) <= sqrt(t_j)."""
    result = np.zeros(space.N)
    for j, t in enumerate(F.grid.nodes):
        mask = space.ball_mask(np.sqrt(t))
        result = np.maximum(result, np.max(np.where(mask, np.abs(F.slices[j])[np.newaxis,:], 0.0), axis=1))
    return result


def _ratio_summary(ratios):
    ratios = np.array(ratios, dtype=float)
    if len(ratios) == 0:
        return {"ratios" : [], "max" : 0.0, "median" : 0.0, "count" : 0}
    return {"ratios" : ratios.tolist(),
            "max" : float(np.max(ratios)),
            "median" : float(np.median(ratios)),
            "count" : len(ratios)}


def carleson_duality_check(space, pairs, p, eps=0.5):
    """Empirical constant in ||(int |F|^2 |G|^2 dt/t)^(1/2)||_p <= C ||N_* F||_p ||C_(p+eps) G||_inf.

    Parameters
    ----------
    space : DirichletSpace
        Space.

    pairs : list
        List of (F, G) TimeField pairs on a common grid.

    p : float
        Exponent in [2, inf).

    eps : float, optional
        Carleson exponent increment. Defaults to 0.5.

    Returns
    -------
    dict
        Ratios with their maximum and median. Pairs with a vanishing right-hand side are skipped.
    """
    ratios = []
    for F, G in pairs:
        lhs = lp_norm(np.sqrt(F.grid.weights.dot(np.abs(F.slices)**2*np.abs(G.slices)**2)), space.mu, p)
        rhs = lp_norm(nontangential_max(space, F), space.mu, p)*carleson(space, G, p+eps)
        if rhs > 0.0:
            ratios.append(lhs/rhs)
    return _ratio_summary(ratios)


def fefferman_stein_check(space, fields, p, q):
    """Empirical constant in ||(int M_q[F_t]^2 dt/t)^(1/2)||_p <= C ||(int |F_t|^2 dt/t)^(1/2)||_p.

    Parameters
    ----------
    space : DirichletSpace
        Space.

    fields : list of TimeField
        Ensemble.

    p : float
        Outer exponent.

    q : float
        Maximal exponent, 1 <= q < min(p, 2).

    Returns
    -------
    dict
    """
    if not (1.0 <= q < min(p, 2.0)):
        raise ValidationError("Fefferman-Stein check needs 1 <= q < min(p, 2); got p = {0}, q = {1}.".format(p, q))
    ratios = []
    for F in fields:
        M = np.array([maximal(space, s, q) for s in F.slices])
        num = lp_norm(np.sqrt(F.grid.weights.dot(M**2)), space.mu, p)
        den = lp_norm(np.sqrt(F.square_integral()), space.mu, p)
        if den > 0.0:
            ratios.append(num/den)
    return _ratio_summary(ratios)


def orthogonality_check(spec, fields, N, p):
    """Empirical constant in ||int Q_t F_t dt/t||_p <= C ||(int |Q~_t F_t|^2 dt/t)^(1/2)||_p.

    Q~_t = Gamma(N)^(-1/2) (tL)^(N/2) e^(-tL/2), so that Q~_t^2 = Q_t^(N).

    Parameters
    ----------
    spec : SpectralData
        Spectral data.

    fields : list of TimeField
        Ensemble.

    N : float
        Order.

    p : float
        Exponent.

    Returns
    -------
    dict
    """
    ratios = []
    for F in fields:
        grid = F.grid
        x = grid.nodes[:,np.newaxis]*spec.eigenvalues[np.newaxis,:]
        coeffs = (F.slices*spec.mu[np.newaxis,:]).dot(spec.eigenfields)
        q = q_multiplier(x, N)
        total = spec.synthesize(grid.weights.dot(q*coeffs))
        smoothed = (np.sqrt(q)*coeffs).dot(spec.eigenfields.T)
        num = lp_norm(total, spec.mu, p)
        den = lp_norm(np.sqrt(grid.weights.dot(smoothed**2)), spec.mu, p)
        if den > 0.0:
            ratios.append(num/den)
    return _ratio_summary(ratios)


def field_summary(values, mu, p_list=(1.0, 2.0, np.inf)):
    """Returns {min, max, norms} for a field, with one L^p norm per requested exponent."""
    values = np.asarray(values, dtype=float)
    return {"min" : float(np.min(values)),
            "max" : float(np.max(values)),
            "norms" : {str(p) : float(lp_norm(values, mu, p)) for p in p_list}}


def export_field(filename, values):
    """Writes a field to a CSV file with columns (vertex, value).

    Parameters
    ----------
    filename : str
        Output file. Must have '.csv' extension.

    values : ndarray
        Field.
    """
    if ".csv" not in filename:
        raise ValidationError("Filename for field export must contain .csv extension.")
    values = np.asarray(values, dtype=float)
    table = np.column_stack([np.arange(len(values)), values])
    np.savetxt(filename, table, fmt=["%d", "%20.12e"], delimiter=",", header="vertex,value", comments="")
