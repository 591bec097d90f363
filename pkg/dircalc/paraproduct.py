"""Paraproducts built from the band operators of the heat semigroup."""

import time
import warnings

import numpy as np

from dircalc.exceptions import ValidationError, NumericalError
from dircalc.calculus import ScaleGrid, q_multiplier
from dircalc.nonlinearities import get_nonlinearity
from dircalc.dc_math import lp_norm, matrix_norm, fit_line, OperatorNorm


class Paraproduct:
    """Paraproduct Pi_g(f) = int_0^inf Q_t f . P_t g dt/t with Q_t = Q_t^(D), P_t = P_t^(D).

    The scale integral is a log-trapezoid sum over the grid nodes. The pieces outside the grid are
    added in closed form: below t_min P_t g is replaced by g, so the contribution is
    (f - P_(t_min) f) g; above t_max P_t g is replaced by P_(t_max) g, giving
    (P_(t_max) f - P_N f) P_(t_max) g.

    Parameters
    ----------
    space : DirichletSpace
        Space.

    spectral_data : SpectralData
        Spectral data of the space.

    alpha : float, optional
        Regularity in (0, 1). Defaults to 0.5.

    D : float, optional
        Order of the band operators. Defaults to the smallest even integer at least 4(1+nu).

    nu : float, optional
        Homogeneous dimension. If not given, it is fitted with space.doubling_fit() over the
        default radii.

    grid : ScaleGrid, optional
        Scale grid. Defaults to ScaleGrid.default(spectral_data).

    verbose : bool, optional
        Defaults to False.

    Raises
    ------
    ValidationError
        If alpha lies outside (0, 1), or if both D and nu are given with D < 4(1+nu).
    """

    def __init__(self, **kwargs):

        self._space = kwargs["space"]
        self._spec = kwargs["spectral_data"]
        self._verbose = kwargs.get("verbose", False)
        self.alpha = float(kwargs.get("alpha", 0.5))
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha must lie in (0, 1); got {0}.".format(self.alpha))

        # Order
        nu = kwargs.get("nu", None)
        D = kwargs.get("D", None)
        if D is None:
            if nu is None:
                nu = self._space.doubling_fit(self._space.default_radii())["nu"]
            D = int(np.ceil(4.0*(1.0+nu)))
            D += D%2
        else:
            if not D > 0.0:
                raise ValidationError("Paraproduct order D must be positive; got {0}.".format(D))
            if nu is not None and D < 4.0*(1.0+nu):
                raise ValidationError("Paraproduct order D = {0} is below 4(1+nu) = {1}.".format(D, 4.0*(1.0+nu)))
        self.D = D
        self.nu = None if nu is None else float(nu)

        self.grid = kwargs.get("grid", None) or ScaleGrid.default(self._spec)
        self._setup_multipliers()


    def _setup_multipliers(self):
        # Band multipliers at every node and at the grid ends

        if self._verbose:
            start_time = time.time()
            print("\nEvaluating band multipliers on {0} scale nodes...".format(self.grid.N), end='', flush=True)

        spec = self._spec
        lam = spec.eigenvalues
        self._x = self.grid.nodes[:,np.newaxis]*lam[np.newaxis,:]
        self._q = q_multiplier(self._x, self.D)
        self._p = np.array([spec.p_values(t, self.D) for t in self.grid.nodes])
        self._p_lo = spec.p_values(self.grid.t_min, self.D)
        self._p_hi = spec.p_values(self.grid.t_max, self.D)
        self._null = np.zeros(spec.N)
        self._null[:spec.nullspace_dim] = 1.0

        if self._verbose:
            end_time = time.time()
            print("Finished. Time: {0} s.".format(end_time-start_time), flush=True)


    def _coefficients(self, slices):
        # Spectral coefficients of each slice
        return (slices*self._spec.mu[np.newaxis,:]).dot(self._spec.eigenfields)


    def _synthesize(self, coefficients):
        return coefficients.dot(self._spec.eigenfields.T)


    def _check_pair(self, g, f):
        g = np.asarray(g, dtype=float)
        f = np.asarray(f, dtype=float)
        if g.shape != (self._space.N,) or f.shape != (self._space.N,):
            raise ValidationError("Paraproduct inputs must be fields on the same space.")
        return g, f


    def tails(self, g, f):
        """Returns the contributions of (0, t_min) and (t_max, inf) to Pi_g(f).

        Returns
        -------
        tuple
            (lower, upper) fields.
        """
        g, f = self._check_pair(g, f)
        spec = self._spec
        lower = (f-spec.multiply(self._p_lo, f))*g
        upper = (spec.multiply(self._p_hi, f)-spec.project_nullspace(f))*spec.multiply(self._p_hi, g)
        return lower, upper


    def _slices(self, g, f):
        # Q_t f . P_t g at every node
        spec = self._spec
        prod = spec.slices(self._q, f)*spec.slices(self._p, g)
        if not np.all(np.isfinite(prod)):
            raise NumericalError("Paraproduct integrand is not finite.")
        return prod


    def apply(self, g, f):
        """Computes Pi_g(f).

        Parameters
        ----------
        g : ndarray
            Symbol field.

        f : ndarray
            Field.

        Returns
        -------
        ndarray
        """
        g, f = self._check_pair(g, f)
        lower, upper = self.tails(g, f)
        return self.grid.weights.dot(self._slices(g, f))+lower+upper


    def split(self, g, f):
        """Splits Pi_g(f) into Pi^1 (with (I - P_t) applied to each slice) and Pi^2 (with P_t applied).

        Returns
        -------
        tuple
            (Pi^1_g f, Pi^2_g f).
        """
        g, f = self._check_pair(g, f)
        spec = self._spec
        prod = self._slices(g, f)
        smoothed = self._synthesize(self._p*self._coefficients(prod))
        lower, upper = self.tails(g, f)
        lower_smoothed = spec.multiply(self._p_lo, lower)
        upper_smoothed = spec.multiply(self._p_hi, upper)

        w = self.grid.weights
        first = w.dot(prod-smoothed)+(lower-lower_smoothed)+(upper-upper_smoothed)
        second = w.dot(smoothed)+lower_smoothed+upper_smoothed
        return first, second


    def product_decomposition_residual(self, f, g, p=np.inf):
        """Returns ||fg - Pi_g(f) - Pi_f(g) - P_N f . P_N g||_p."""
        g, f = self._check_pair(g, f)
        spec = self._spec
        residual = f*g-self.apply(g, f)-self.apply(f, g)-spec.project_nullspace(f)*spec.project_nullspace(g)
        return float(lp_norm(residual, spec.mu, p))


    def kernel_apply(self, g, s, t, h):
        """Applies the kernel K(s,t)h = Q_s L^(alpha/2) (Q_t L^(-alpha/2) h . P_t g).

        The nullspace part of h is projected out before L^(-alpha/2) is applied.

        Returns
        -------
        tuple
            (K(s,t)h, projected mass of h).
        """
        spec = self._spec
        h_range, mass = spec.project_range(h)
        u = spec.fractional_power(-0.5*self.alpha, h_range)
        v = spec.q_op(t, self.D, u)*spec.p_op(t, self.D, g)
        return spec.q_op(s, self.D, spec.fractional_power(0.5*self.alpha, v)), mass


    def kernel_matrix(self, g, s, t):
        """Dense matrix of K(s,t) acting on fields."""
        spec = self._spec
        A = spec.operator_matrix(spec.q_values(s, self.D)*spec.power_values(0.5*self.alpha))
        B = spec.operator_matrix(spec.q_values(t, self.D)*spec.power_values(-0.5*self.alpha))
        return A.dot(spec.p_op(t, self.D, g)[:,np.newaxis]*B)


    def kernel_integral(self, g, h):
        """Double scale integral of K(s,t)h over {0 < s <= t}.

        The outer integral uses the grid weights. The inner integral over s in [t_min, t_j] is a
        trapezoid sum with the first Euler-Maclaurin end correction, plus the closed form
        I - P_(t_min) below the grid.

        Returns
        -------
        tuple
            (integral, projected mass of h).
        """
        spec = self._spec
        h_range, mass = spec.project_range(h)
        u = spec.fractional_power(-0.5*self.alpha, h_range)
        prod = spec.slices(self._q, u)*spec.slices(self._p, g)
        outer = self._coefficients(prod)*spec.power_values(0.5*self.alpha)[np.newaxis,:]

        # Inner multipliers on the triangle s <= t_j
        q = self._q
        du = np.log(self.grid.nodes[1]/self.grid.nodes[0]) if self.grid.N > 1 else 0.0
        inner = du*(np.cumsum(q, axis=0)-0.5*q[0][np.newaxis,:]-0.5*q)
        dq = (self.D-self._x)*q
        inner -= du**2/12.0*(dq-dq[0][np.newaxis,:])
        inner += (1.0-self._p_lo)[np.newaxis,:]

        total = np.sum(self.grid.weights[:,np.newaxis]*inner*outer, axis=0)
        return spec.synthesize(total), mass


    def kernel_decay(self, g, t, ratios, center=0, min_pairs=4):
        """Fits the decay of K(s,t) in s/t and in distance.

        The scale exponent is the slope of log ||K(s,t)||_(2->2) against log(s/t). The distance
        slope is the slope of log ||1_B2 K(t,t) 1_B1||_(2->2) against log(1 + d(B1,B2)^2/t) over
        balls of radius sqrt(t) with positive set distance.

        Parameters
        ----------
        g : ndarray
            Symbol field.

        t : float
            Outer scale.

        ratios : array_like
            Values of s/t in (0, 1].

        center : int, optional
            Center of the anchor ball. Defaults to 0.

        min_pairs : int, optional
            Minimum number of separated ball pairs. Defaults to 4.

        Returns
        -------
        dict

        Raises
        ------
        ValidationError
            If fewer than min_pairs separated ball pairs exist at scale sqrt(t).
        """
        ratios = np.sort(np.array(ratios, dtype=float))
        if np.any(ratios <= 0.0) or np.any(ratios > 1.0):
            raise ValidationError("Kernel decay ratios s/t must lie in (0, 1].")
        mu = self._space.mu

        norms = np.array([matrix_norm(self.kernel_matrix(g, r*t, t), mu, mu, 2.0).value for r in ratios])
        usable = norms > 0.0
        scale_fit = fit_line(np.log(ratios[usable]), np.log(norms[usable]))

        K = self.kernel_matrix(g, t, t)
        distances = []
        pair_norms = []
        for first, second, gap in self._space.ball_pairs(np.sqrt(t), center):
            if gap <= 0.0:
                continue
            value = matrix_norm(K[np.ix_(second, first)], mu[first], mu[second], 2.0).value
            if value > 0.0:
                distances.append(gap)
                pair_norms.append(value)
        if len(distances) < min_pairs:
            raise ValidationError("Kernel decay needs at least {0} separated ball pairs at radius {1}; found {2}.".format(min_pairs, np.sqrt(t), len(distances)))
        distances = np.array(distances)
        distance_fit = fit_line(np.log(1.0+distances**2/t), np.log(pair_norms))

        return {"scale_exponent" : scale_fit["slope"],
                "scale_r2" : scale_fit["r2"],
                "scale_residual" : scale_fit["max_residual"],
                "theory_exponent" : 0.5*(1.0-self.alpha),
                "distance_slope" : distance_fit["slope"],
                "distance_r2" : distance_fit["r2"],
                "distance_residual" : distance_fit["max_residual"],
                "ratios" : ratios.tolist(),
                "norms" : norms.tolist(),
                "distances" : distances.tolist(),
                "distance_norms" : list(pair_norms)}


    def chain_transform(self, F, f):
        """Computes int_0^inf Q_t f . F'(P_t f) dt/t, so that F(f) = result + F(P_N f).

        Parameters
        ----------
        F : str or Nonlinearity
            Nonlinearity.

        f : ndarray
            Field.

        Returns
        -------
        ndarray

        Raises
        ------
        NumericalError
            If F' is not finite along P_t f.
        """
        F = get_nonlinearity(F)
        f = np.asarray(f, dtype=float)
        spec = self._spec
        Pf = spec.slices(self._p, f)
        dF = F.dF(Pf)
        if not np.all(np.isfinite(dF)):
            raise NumericalError("F' of {0} is not finite along the semigroup trajectory.".format(F.name))

        P_lo = spec.multiply(self._p_lo, f)
        P_hi = spec.multiply(self._p_hi, f)
        total = self.grid.weights.dot(spec.slices(self._q, f)*dF)
        total += (f-P_lo)*F.dF(f)
        total += (P_hi-spec.project_nullspace(f))*F.dF(P_hi)
        return total


    def chain_residual(self, F, f, p=np.inf, sign=1.0):
        """Returns ||F(f) - sign * chain_transform(F, f) - F(P_N f)||_p.

        sign = 1 is the reconstruction that holds; sign = -1 evaluates the opposite-sign display.
        """
        F = get_nonlinearity(F)
        f = np.asarray(f, dtype=float)
        residual = F(f)-sign*self.chain_transform(F, f)-F(self._spec.project_nullspace(f))
        return float(lp_norm(residual, self._spec.mu, p))


    def paralinearization_remainder(self, F, f):
        """Returns R = F(f) - Pi_(F'(f))(f)."""
        F = get_nonlinearity(F)
        f = np.asarray(f, dtype=float)
        return F(f)-self.apply(F.dF(f), f)


    def paralinearization_table(self, F, f, p, rhos):
        """Sobolev norms ||R||_(p, alpha+rho) of the paralinearization remainder.

        Returns
        -------
        dict
            "rho", "norms" and "ratios" (norms divided by ||f||_(p,alpha)).
        """
        R = self.paralinearization_remainder(F, f)
        spec = self._spec
        scale = spec.sobolev_norm(f, self.alpha, p)
        norms = [float(spec.sobolev_norm(R, self.alpha+rho, p)) for rho in rhos]
        return {"rho" : [float(rho) for rho in rhos],
                "norms" : norms,
                "ratios" : [n/scale if scale > 0.0 else 0.0 for n in norms]}


    def operator(self, g):
        """Dense matrix of f -> L^(alpha/2) Pi_g(L^(-alpha/2) f), tails included."""
        spec = self._spec
        E = spec.eigenfields
        inverse = spec.power_values(-0.5*self.alpha)

        symbols = np.vstack([spec.slices(self._p, g), g, spec.multiply(self._p_hi, g)])
        bands = np.vstack([self._q*inverse[np.newaxis,:], (1.0-self._p_lo)*inverse, (self._p_hi-self._null)*inverse])
        w = np.concatenate([self.grid.weights, [1.0, 1.0]])

        inner = E*symbols.T.dot(w[:,np.newaxis]*bands)
        outer = spec.operator_matrix(spec.power_values(0.5*self.alpha))
        return outer.dot(inner).dot(E.T*spec.mu[np.newaxis,:])


    def norm_estimate(self, g, p, ensemble=None, seed=0):
        """Lower-bound estimate of the norm of f -> L^(alpha/2) Pi_g(L^(-alpha/2) f) on L^p.

        The ensemble supremum is refined by the ascent in matrix_norm(); the result is exact at p = 2.

        Parameters
        ----------
        g : ndarray
            Symbol field.

        p : float
            Exponent.

        ensemble : list, optional
            Sample fields. Defaults to no samples.

        seed : int, optional
            Seed of the ascent starts. Defaults to 0.

        Returns
        -------
        OperatorNorm
        """
        mu = self._spec.mu
        A = self.operator(g)
        bracket = matrix_norm(A, mu, mu, p, seed=seed)
        lower = bracket.lower
        for f in ensemble or []:
            den = lp_norm(f, mu, p)
            if den > 0.0:
                lower = max(lower, lp_norm(A.dot(f), mu, p)/den)
        if lower > bracket.upper*(1.0+1e-9):
            warnings.warn("Ensemble ratio exceeds the interpolation upper bound.")
        return OperatorNorm(lower, bracket.upper, bracket.exact)


    def split_bound(self, g, f, p):
        """Returns ||Pi^2_g f||_(p,alpha) / (||f||_(p,alpha) ||g||_inf), or 0 if the denominator vanishes."""
        spec = self._spec
        _, second = self.split(g, f)
        den = spec.sobolev_norm(f, self.alpha, p)*np.max(np.abs(g))
        return float(spec.sobolev_norm(second, self.alpha, p)/den) if den > 0.0 else 0.0


    def to_dict(self):
        """Returns the configuration."""
        return {"D" : float(self.D),
                "alpha" : self.alpha,
                "nu" : self.nu,
                "grid" : self.grid.to_dict()}
