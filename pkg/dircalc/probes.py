"""Probes measuring the structural hypotheses of a Dirichlet space as fitted constants and exponents."""

import json
import warnings

import numpy as np
import scipy.linalg as sla
import scipy.optimize as opt

from dircalc.exceptions import ValidationError
from dircalc.calculus import q_multiplier, p_multiplier
from dircalc.ensembles import Ensemble
from dircalc.helpers import OneLineProgress, to_jsonable
from dircalc.dc_math import lp_norm, matrix_norm, fit_line, geometric_nodes, conjugate_exponent, OperatorNorm


VALID_TAGS = ("VD", "DUE", "UE", "Gp", "Rp", "RRp", "Ep", "Pp", "DG2", "H", "Hbar", "Ahlfors",
              "ImagPower", "OffDiag", "KernelDecay", "Embedding", "SmoothGrad")

OFFDIAGONAL_FAMILIES = ("heat", "Q", "P", "R", "grad_heat", "grad_Q", "grad_P", "K", "grad_fractional_P")


class ProbeReport:
    """Result of a probe.

    Parameters
    ----------
    tag : str
        Hypothesis tag, one of VALID_TAGS.

    params : dict, optional
        Parameters the probe was run with. Defaults to {}.

    fit : dict, optional
        Fitted quantities. The keys "exponent", "constant", "residual" and "r2" are always
        present in the serialized report (None where not applicable).

    samples : dict, optional
        Description of the sampling (times, radii, ball counts). Defaults to {}.

    seed : int, optional
        Seed of any random ensemble used. Defaults to None.

    space_hash : str, optional
        Hash of the probed space. Defaults to None.

    extra : dict, optional
        Further diagnostics. Defaults to {}.

    points : ndarray, optional
        Raw regression points, one row per point. Defaults to None.

    point_columns : list of str, optional
        Column names of points. Defaults to ["x", "y"].
    """

    def __init__(self, **kwargs):

        self.tag = kwargs["tag"]
        if self.tag not in VALID_TAGS:
            raise ValidationError("{0} is not a valid hypothesis tag. Valid tags are {1}.".format(self.tag, ", ".join(VALID_TAGS)))
        self.params = kwargs.get("params", {})
        self.fit = {"exponent" : None, "constant" : None, "residual" : None, "r2" : None}
        self.fit.update(kwargs.get("fit", {}))
        self.samples = kwargs.get("samples", {})
        self.seed = kwargs.get("seed", None)
        self.space_hash = kwargs.get("space_hash", None)
        self.extra = kwargs.get("extra", {})
        self.points = kwargs.get("points", None)
        self.point_columns = kwargs.get("point_columns", ["x", "y"])


    def to_dict(self):
        """Returns the report as a JSON-ready dictionary."""
        return to_jsonable({"tag" : self.tag,
                            "params" : self.params,
                            "fit" : self.fit,
                            "samples" : self.samples,
                            "seed" : self.seed,
                            "space_hash" : self.space_hash,
                            "extra" : self.extra})


    def export_json(self, filename):
        """Writes the report to a JSON file with sorted keys."""
        if ".json" not in filename:
            raise ValidationError("Filename for probe report must contain .json extension.")
        with open(filename, 'w') as export_handle:
            json.dump(self.to_dict(), export_handle, sort_keys=True, indent=2)
            export_handle.write("\n")


    def export_csv(self, filename):
        """Writes the raw regression points to a CSV file. Nothing is written if there are none."""
        if ".csv" not in filename:
            raise ValidationError("Filename for regression points must contain .csv extension.")
        if self.points is None:
            return
        np.savetxt(filename, np.atleast_2d(self.points), fmt="%20.12e", delimiter=",", header=",".join(self.point_columns), comments="")


def _centers(space, max_centers):
    # Evenly spread vertex sample
    return np.unique(np.linspace(0, space.N-1, min(space.N, max_centers)).astype(int))


def _default_ensemble(spec, seed, count=16):
    # Band-limited fields, or eigenfields where the band is empty
    try:
        return Ensemble(kind="band_limited", count=count, seed=seed).fields(spec)
    except ValidationError:
        return Ensemble(kind="eigenfield", count=min(count, spec.N-1), k=1).fields(spec)


def _fit_dict(fit):
    return {"exponent" : fit["slope"], "residual" : fit["max_residual"], "r2" : fit["r2"]}


def volume_doubling_probe(space, radii=None):
    """Fits the doubling constant and homogeneous dimension (VD).

    Parameters
    ----------
    space : DirichletSpace
        Space.

    radii : array_like, optional
        Radii probed. Defaults to space.default_radii().

    Returns
    -------
    ProbeReport
    """
    radii = space.default_radii() if radii is None else radii
    fit = space.doubling_fit(radii)
    return ProbeReport(tag="VD",
                       params={},
                       fit={"exponent" : fit["nu"], "constant" : fit["constant"], "residual" : fit["max_residual"], "r2" : fit["r2"]},
                       samples={"radii" : fit["radii"], "centers" : space.N},
                       space_hash=space.hash,
                       extra={"nu_constant" : fit["nu_constant"]})


def due_ue_probe(space, spec, times=None, tag="UE", m=2.0, max_centers=64):
    """Heat kernel upper bounds: on-diagonal (DUE) and Gaussian (UE).

    The DUE constant is sup p_t(x,y) sqrt(V(x,sqrt t) V(y,sqrt t)) over all requested times. The UE
    constant C comes from regressing log[p_t(x,y) V(x,sqrt t)] against (d^m/t)^(1/(m-1)) over pairs
    with d >= sqrt(t); for m = 2 the slope is -1/C.

    Parameters
    ----------
    space : DirichletSpace
        Space.

    spec : SpectralData
        Spectral data of the space.

    times : array_like, optional
        Times probed. Times outside [h^2, diam^2] are excluded from the Gaussian fit with a
        warning. Defaults to a geometric grid over [4h^2, diam^2/16].

    tag : str, optional
        "DUE" or "UE". Defaults to "UE".

    m : float, optional
        Walk dimension of the sub-Gaussian form. Defaults to 2.

    max_centers : int, optional
        Number of sampled first vertices in the regression. Defaults to 64.

    Returns
    -------
    ProbeReport
    """
    if tag not in ("DUE", "UE"):
        raise ValidationError("Heat kernel probe tag must be DUE or UE.")
    if not m > 1.0:
        raise ValidationError("Walk dimension must exceed 1; got {0}.".format(m))
    lo, hi = space.h**2, space.diameter**2
    if times is None:
        if 4.0*lo < hi/16.0:
            times = geometric_nodes(4.0*lo, hi/16.0, 4)
        else:
            times = np.unique([lo, max(hi, lo)])
    times = np.sort(np.array(times, dtype=float))
    if np.any(times <= 0.0):
        raise ValidationError("Heat kernel times must be positive.")
    inside = (times >= lo*(1.0-1e-12)) & (times <= hi*(1.0+1e-12))
    if not np.all(inside):
        warnings.warn("{0} times outside the validity window [{1}, {2}] were excluded from the Gaussian fit.".format(np.sum(~inside), lo, hi))

    centers = _centers(space, max_centers)
    D = space.distances
    due = []
    points = []
    raw = []
    for t, valid in zip(times, inside):
        P = spec.heat_kernel(t)
        V = space.volumes(np.sqrt(t))
        due.append(float(np.max(P*np.sqrt(V[:,np.newaxis]*V[np.newaxis,:]))))
        if space.N <= 32:
            raw.append({"t" : float(t), "kernel" : P})
        if valid:
            d = D[centers]
            value = P[centers]*V[centers][:,np.newaxis]
            keep = (d >= np.sqrt(t)*(1.0-1e-12)) & (value > 0.0)
            x = (d[keep]**m/t)**(1.0/(m-1.0))
            points += [[t, xi, yi] for xi, yi in zip(x, np.log(value[keep]))]

    points = np.array(points).reshape((-1, 3))
    fit = fit_line(points[:,1], points[:,2])
    slope = fit["slope"]
    gaussian = (-slope)**(-(m-1.0)) if slope < 0.0 else np.inf

    fit_out = _fit_dict(fit)
    fit_out["constant"] = max(due) if tag == "DUE" else gaussian
    return ProbeReport(tag=tag,
                       params={"m" : m},
                       fit=fit_out,
                       samples={"times" : times, "centers" : len(centers), "pairs" : len(points), "window" : [lo, hi]},
                       space_hash=space.hash,
                       extra={"due_constant" : max(due), "due_per_time" : due, "gaussian_constant" : gaussian, "raw" : raw},
                       points=points,
                       point_columns=["t", "scaled_distance", "log_pV"])


def _gradient_columns(space, A):
    # |grad| of every column of A
    return np.sqrt(np.maximum(space.carre_du_champ(A, A), 0.0))


def _sup_gradient_ascent(space, A, p, starts, seed):
    # Lower bound on sup ||grad A f||_p / ||f||_p by L-BFGS on the log ratio
    mu = space.mu
    B = space.incidence
    absB = abs(B)
    w = space.edges[:,2]

    def ratio(f, eps):
        d = B.dot(A.dot(f))
        gam = absB.T.dot(w*d*d)/(2.0*mu)
        gam = gam+eps*np.max(gam)+1e-300
        n1 = np.sum(mu*gam**(0.5*p))
        n2 = np.sum(mu*np.abs(f)**p)+1e-300
        return d, gam, n1, n2

    def objective(f):
        d, gam, n1, n2 = ratio(f, 1e-12)
        c = 0.5*p*gam**(0.5*p-1.0)
        g1 = A.T.dot(B.T.dot(w*d*absB.dot(c)))
        g2 = p*mu*np.abs(f)**(p-1.0)*np.sign(f)
        value = np.log(n1)/p-np.log(n2)/p
        grad = g1/(p*n1)-g2/(p*n2)
        return -value, -grad

    rng = np.random.default_rng(seed)
    x_starts = [np.eye(space.N)[i]/mu[i] for i in _centers(space, 4)]
    x_starts += [rng.standard_normal(space.N) for _ in range(starts)]
    best = 0.0
    for x0 in x_starts:
        result = opt.minimize(objective, x0, jac=True, method="L-BFGS-B", options={"maxiter" : 200})
        _, _, n1, n2 = ratio(result.x, 0.0)
        best = max(best, (n1/n2)**(1.0/p))
    return best


def _sup_gradient_inf(space, A, iterations=50):
    # Bracket on sup over ||f||_inf <= 1 of max_x |grad A f|(x)
    mu = space.mu
    W = space.conductance
    lower = 0.0
    upper = 0.0
    for x in range(space.N):
        nbrs = np.flatnonzero(W[x])
        rows = A[x][np.newaxis,:]-A[nbrs]
        c = W[x,nbrs]/(2.0*mu[x])
        upper = max(upper, np.sqrt(np.sum(c*np.sum(np.abs(rows), axis=1)**2)))
        f = np.sign(rows[np.argmax(c*np.sum(np.abs(rows), axis=1)**2)])
        f[f == 0.0] = 1.0
        for _ in range(iterations):
            lower = max(lower, np.sqrt(np.sum(c*rows.dot(f)**2)))
            f_new = np.sign(rows.T.dot(c*rows.dot(f)))
            f_new[f_new == 0.0] = 1.0
            if np.array_equal(f_new, f):
                break
            f = f_new
    return OperatorNorm(lower, upper, np.isclose(lower, upper, rtol=1e-12))


def gradient_bound_probe(space, spec, p, times=None, **kwargs):
    """Gradient bound of the semigroup (Gp): sup_t ||sqrt(t) |grad e^(-tL)| ||_(p->p).

    p = 2 uses the exact value sup_lambda sqrt(t lambda e^(-2 t lambda)), whose supremum over all t
    is (2e)^(-1/2). p = 1 is exact through the kernel columns. p = inf gives a bracket from a sign
    ascent and the row l^1 bound. Other p give an L-BFGS lower bound.

    Parameters
    ----------
    space : DirichletSpace
        Space.

    spec : SpectralData
        Spectral data.

    p : float
        Exponent in [1, inf].

    times : array_like, optional
        Times probed. Defaults to a geometric grid over [0.1/lambda_max, 10/lambda_1].

    ensemble : list, optional
        Fields for the multiplicative ratio ||grad f||_p^2 / (||Lf||_p ||f||_p). Defaults to a
        band-limited ensemble.

    seed : int, optional
        Defaults to 0.

    starts : int, optional
        Random starts of the ascent. Defaults to 4.

    Returns
    -------
    ProbeReport
    """
    if p < 1.0:
        raise ValidationError("Exponent must be at least 1; got {0}.".format(p))
    seed = kwargs.get("seed", 0)
    if times is None:
        times = geometric_nodes(0.1/spec.lambda_max, 10.0/spec.lambda_1, 4)
    times = np.array(times, dtype=float)
    lam = spec.eigenvalues[spec.nullspace_dim:]

    values = []
    upper = []
    exact = True
    for t in times:
        if p == 2.0:
            # Energy identity: ||sqrt(t) grad e^(-tL) f||_2^2 = t <L e^(-2tL) f, f>
            value = np.sqrt(np.max(t*lam*np.exp(-2.0*t*lam)))
            bracket = OperatorNorm(value, value, True)
        elif p == 1.0:
            G = _gradient_columns(space, spec.heat_kernel(t))
            value = np.sqrt(t)*np.max(lp_norm(G, space.mu, 1.0))
            bracket = OperatorNorm(value, value, True)
        elif np.isinf(p):
            A = spec.operator_matrix(np.exp(-t*spec.eigenvalues))
            raw = _sup_gradient_inf(space, A)
            bracket = OperatorNorm(np.sqrt(t)*raw.lower, np.sqrt(t)*raw.upper, raw.exact)
        else:
            A = spec.operator_matrix(np.exp(-t*spec.eigenvalues))
            value = np.sqrt(t)*_sup_gradient_ascent(space, A, p, kwargs.get("starts", 4), seed)
            bracket = OperatorNorm(value, np.inf, False)
        values.append(bracket.lower)
        upper.append(bracket.upper)
        exact = exact and bracket.exact

    # At p = 2 the sup over all t of t lambda e^(-2 t lambda) is 1/(2e), attained at t lambda = 1/2
    constant = 1.0/np.sqrt(2.0*np.e) if p == 2.0 else max(values)

    # Multiplicative form
    ensemble = kwargs.get("ensemble", None) or _default_ensemble(spec, seed)
    mult = []
    for f in ensemble:
        den = lp_norm(spec.multiply(spec.eigenvalues, f), space.mu, p)*lp_norm(f, space.mu, p)
        if den > 0.0:
            mult.append(lp_norm(space.gradient_norm(f), space.mu, p)**2/den)

    return ProbeReport(tag="Gp",
                       params={"p" : p},
                       fit={"constant" : constant},
                       samples={"times" : times, "ensemble_size" : len(ensemble)},
                       seed=seed,
                       space_hash=space.hash,
                       extra={"per_time" : values, "per_time_upper" : upper, "exact" : exact,
                              "multiplicative_max" : max(mult) if mult else 0.0},
                       points=np.column_stack([times, values]),
                       point_columns=["t", "norm"])


def riesz_probe(space, spec, p, ensemble=None, tag="Rp", seed=0):
    """Riesz transform constants from the ratios ||grad f||_p / ||L^(1/2) f||_p.

    The Rp constant is the largest ratio and the RRp constant the largest inverse ratio; Ep
    reports the larger of the two. Constant fields are skipped.

    Parameters
    ----------
    space : DirichletSpace
        Space.

    spec : SpectralData
        Spectral data.

    p : float
        Exponent in (1, inf).

    ensemble : list, optional
        Fields. Defaults to a band-limited ensemble.

    tag : str, optional
        "Rp", "RRp" or "Ep". Defaults to "Rp".

    seed : int, optional
        Defaults to 0.

    Returns
    -------
    ProbeReport
    """
    if tag not in ("Rp", "RRp", "Ep"):
        raise ValidationError("Riesz probe tag must be Rp, RRp or Ep.")
    if not 1.0 < p < np.inf:
        raise ValidationError("Riesz probe needs 1 < p < inf; got {0}.".format(p))
    ensemble = ensemble if ensemble is not None else _default_ensemble(spec, seed)

    ratios = []
    for f in ensemble:
        num = lp_norm(space.gradient_norm(f), space.mu, p)
        den = spec.sobolev_norm(f, 1.0, p)
        if num > 0.0 and den > 0.0:
            ratios.append(num/den)
    if len(ratios) == 0:
        raise ValidationError("Every ensemble field is constant.")
    ratios = np.array(ratios)
    R = float(np.max(ratios))
    RR = float(np.max(1.0/ratios))
    constant = {"Rp" : R, "RRp" : RR, "Ep" : max(R, RR)}[tag]
    return ProbeReport(tag=tag,
                       params={"p" : p},
                       fit={"constant" : constant},
                       samples={"ensemble_size" : len(ensemble), "used" : len(ratios)},
                       seed=seed,
                       space_hash=space.hash,
                       extra={"R" : R, "RR" : RR, "ratios" : ratios})


def _ball_form(space, members):
    # Stiffness matrix of the edges inside the ball, with the ball measure
    W = space.conductance[np.ix_(members, members)]
    return np.diag(np.sum(W, axis=1))-W, space.mu[members]


def _ball_gradient(space, members, f):
    # Gradient length using only edges inside the ball
    W = space.conductance[np.ix_(members, members)]
    fm = f[members]
    return np.sqrt(np.sum(W*(fm[:,np.newaxis]-fm[np.newaxis,:])**2, axis=1)/(2.0*space.mu[members]))


def poincare_probe(space, p, radii=None, **kwargs):
    """Scale-invariant Poincare constants (Pp) over balls.

    The gradient only counts edges inside the ball. For p = 2 the per-ball constant is exact,
    C^2 = 1/(r^2 lambda_1(B)), with lambda_1(B) the smallest nonzero Neumann eigenvalue of the
    ball-restricted form. For other p it is the largest ensemble ratio
    (avg_B |f - f_B|^p)^(1/p) / (r (avg_B |grad f|^p)^(1/p)).

    Parameters
    ----------
    space : DirichletSpace
        Space.

    p : float
        Exponent in [1, inf).

    radii : array_like, optional
        Radii in [2h, diam]; others are dropped with a warning. Defaults to space.default_radii()
        restricted to that window.

    spec : SpectralData, optional
        Needed for the default ensemble when p != 2.

    ensemble : list, optional
        Fields for p != 2.

    max_centers : int, optional
        Number of ball centers per radius. Defaults to 32.

    seed : int, optional
        Defaults to 0.

    verbose : bool, optional
        Defaults to False.

    Returns
    -------
    ProbeReport
    """
    if not 1.0 <= p < np.inf:
        raise ValidationError("Poincare probe needs 1 <= p < inf; got {0}.".format(p))
    seed = kwargs.get("seed", 0)
    verbose = kwargs.get("verbose", False)
    lo, hi = 2.0*space.h, space.diameter
    if radii is None:
        radii = [r for r in space.default_radii() if lo*(1.0-1e-12) <= r <= hi*(1.0+1e-12)] or [hi]
    radii = np.sort(np.array(radii, dtype=float))
    inside = (radii >= lo*(1.0-1e-12)) & (radii <= hi*(1.0+1e-12))
    if not np.all(inside):
        warnings.warn("{0} radii outside [2h, diam] were ignored.".format(np.sum(~inside)))
    radii = radii[inside]
    if len(radii) == 0:
        raise ValidationError("No Poincare radius lies in [{0}, {1}].".format(lo, hi))

    ensemble = None
    if p != 2.0:
        ensemble = kwargs.get("ensemble", None)
        if ensemble is None:
            ensemble = _default_ensemble(kwargs["spec"], seed)

    centers = _centers(space, kwargs.get("max_centers", 32))
    if verbose:
        prog = OneLineProgress(len(radii)*len(centers), msg="Probing Poincare constants")

    constants = []
    skipped = 0
    for r in radii:
        best = 0.0
        for x in centers:
            if verbose:
                prog.display()
            members = space.ball(x, r).members
            if len(members) < 2:
                skipped += 1
                continue
            if p == 2.0:
                K, m = _ball_form(space, members)
                lam = sla.eigh(K, np.diag(m), eigvals_only=True, subset_by_index=[0, 1])
                best = max(best, 1.0/np.sqrt(r**2*lam[1]))
            else:
                V = np.sum(space.mu[members])
                for f in ensemble:
                    fm = f[members]
                    osc = (np.sum(space.mu[members]*np.abs(fm-np.sum(space.mu[members]*fm)/V)**p)/V)**(1.0/p)
                    grad = (np.sum(space.mu[members]*_ball_gradient(space, members, f)**p)/V)**(1.0/p)
                    if grad > 0.0:
                        best = max(best, osc/(r*grad))
        constants.append(best)

    return ProbeReport(tag="Pp",
                       params={"p" : p},
                       fit={"constant" : max(constants)},
                       samples={"radii" : radii, "centers" : len(centers), "skipped_balls" : skipped,
                                "ensemble_size" : 0 if ensemble is None else len(ensemble)},
                       seed=seed,
                       space_hash=space.hash,
                       extra={"per_radius" : constants},
                       points=np.column_stack([radii, constants]),
                       point_columns=["r", "constant"])


def degiorgi_probe(space, spec, pairs=None, ensemble=None, seed=0):
    """De Giorgi property (DG2): fits kappa in

        (avg_(B_r) |grad f|^2)^(1/2) <= C (R/r)^kappa [(avg_(B_R) |grad f|^2)^(1/2) + R ||Lf||_(L^inf(B_R))]

    The per-pair constant is the largest ratio over all centers and ensemble fields; kappa is the
    slope of its logarithm against log(R/r).

    Parameters
    ----------
    space : DirichletSpace
        Space.

    spec : SpectralData
        Spectral data.

    pairs : list, optional
        (r, R) pairs with r <= R. Defaults to all ordered pairs of space.default_radii().

    ensemble : list, optional
        Fields. Defaults to a band-limited ensemble plus the first nonconstant eigenfield.

    seed : int, optional
        Defaults to 0.

    Returns
    -------
    ProbeReport
    """
    if pairs is None:
        radii = space.default_radii()
        pairs = [(r, R) for i, R in enumerate(radii) for r in radii[:i+1]]
    pairs = [(float(r), float(R)) for r, R in pairs if r <= R]
    if len(set(round(R/r, 9) for r, R in pairs)) < 2:
        raise ValidationError("De Giorgi probe needs concentric pairs with at least two distinct ratios R/r.")
    if ensemble is None:
        ensemble = _default_ensemble(spec, seed)+[spec.eigenfields[:,spec.nullspace_dim]]

    mu = space.mu
    grads = [space.carre_du_champ(f, f) for f in ensemble]
    Lf = [np.abs(space.apply_generator(f)) for f in ensemble]
    averages = {}
    sup_L = {}
    for r in sorted(set([r for pair in pairs for r in pair])):
        mask = space.ball_mask(r)
        V = mask.dot(mu)
        averages[r] = [np.sqrt(mask.dot(mu*G)/V) for G in grads]
        sup_L[r] = [np.max(np.where(mask, L[np.newaxis,:], 0.0), axis=1) for L in Lf]

    constants = []
    for r, R in pairs:
        best = 0.0
        for i in range(len(ensemble)):
            den = averages[R][i]+R*sup_L[R][i]
            keep = den > 0.0
            if np.any(keep):
                best = max(best, float(np.max(averages[r][i][keep]/den[keep])))
        constants.append(best)

    ratios = np.array([R/r for r, R in pairs])
    constants = np.array(constants)
    usable = constants > 0.0
    fit = fit_line(np.log(ratios[usable]), np.log(constants[usable]))
    fit_out = _fit_dict(fit)
    fit_out["constant"] = float(np.exp(fit["intercept"]))
    return ProbeReport(tag="DG2",
                       params={},
                       fit=fit_out,
                       samples={"pairs" : [list(pair) for pair in pairs], "ensemble_size" : len(ensemble), "centers" : space.N},
                       seed=seed,
                       space_hash=space.hash,
                       extra={"kappa" : float(np.clip(fit["slope"], 0.0, 1.0)), "per_pair" : constants},
                       points=np.column_stack([ratios, constants]),
                       point_columns=["R_over_r", "constant"])


def _local_norm(space, f, s, p):
    # sup over balls B(y, s) of (avg |f|^p)^(1/p)
    if np.isinf(p):
        return float(np.max(np.abs(f)))
    mask = space.ball_mask(s)
    return float(np.max((mask.dot(space.mu*np.abs(f)**p)/mask.dot(space.mu))**(1.0/p)))


def _holder_pairs(space):
    s = space.default_radii()[-1]
    rs = [s*2.0**(-k) for k in range(6) if s*2.0**(-k) >= space.h*(1.0-1e-12)]
    return [(r, s) for r in rs]


def holder_probe(space, spec, p, q, pairs=None, localized=False, **kwargs):
    """Hoelder regularity of the semigroup (H or Hbar): fits eta in

        q-osc_(B(x,r)) (e^(-tL) f) <= C (r/sqrt t)^eta N(f)

    where N(f) = V(x, sqrt t)^(-1/p) ||f||_p for H and the local norm
    sup_y (avg_(B(y, sqrt t)) |f|^p)^(1/p) for Hbar.

    For H the constant for each (r, sqrt t) pair is an exact or estimated operator norm of the
    ball-restricted, mean-subtracted heat matrix. For Hbar it is the largest ratio over an ensemble
    and the normalized Dirac masses in B(x, sqrt t).

    Parameters
    ----------
    space : DirichletSpace
        Space.

    spec : SpectralData
        Spectral data.

    p, q : float
        Exponents in [1, inf].

    pairs : list, optional
        (r, sqrt t) pairs with r <= sqrt t. Defaults to sqrt t = diam/4 and r halving down to h.

    localized : bool, optional
        Whether to probe Hbar instead of H. Defaults to False.

    ensemble : list, optional
        Fields for Hbar. Defaults to a band-limited ensemble.

    max_centers : int, optional
        Defaults to 16.

    chain : bool, optional
        For Hbar, also fit Hbar(1, inf) and H(q, q) and record the comparison. Defaults to False.

    seed : int, optional
        Defaults to 0.

    Returns
    -------
    ProbeReport
    """
    seed = kwargs.get("seed", 0)
    pairs = _holder_pairs(space) if pairs is None else [(float(r), float(s)) for r, s in pairs]
    pairs = [(r, s) for r, s in pairs if r <= s*(1.0+1e-12)]
    if len(set(round(r/s, 9) for r, s in pairs)) < 2:
        raise ValidationError("Hoelder probe needs (r, sqrt t) pairs with at least two distinct ratios.")
    ensemble = None
    if localized:
        ensemble = kwargs.get("ensemble", None) or _default_ensemble(spec, seed)

    mu = space.mu
    centers = _centers(space, kwargs.get("max_centers", 16))
    inv_q = 0.0 if np.isinf(q) else 1.0/q
    inv_p = 0.0 if np.isinf(p) else 1.0/p
    constants = []
    exact = True
    for r, s in pairs:
        A = spec.operator_matrix(np.exp(-s**2*spec.eigenvalues))
        if localized:
            local = [_local_norm(space, f, s, p) for f in ensemble]
            V_s = space.volumes(s)
            near_s = space.ball_mask(s)
        best = 0.0
        for x in centers:
            members = space.ball(x, r).members
            V_r = np.sum(mu[members])
            rows = A[members]
            R = rows-mu[members].dot(rows)/V_r
            if not localized:
                bracket = matrix_norm(R, mu, mu[members], p, q, seed=seed)
                exact = exact and bracket.exact
                best = max(best, V_r**(-inv_q)*bracket.value*space.volume(x, s)**inv_p)
            else:
                for f, n in zip(ensemble, local):
                    if n > 0.0:
                        best = max(best, V_r**(-inv_q)*lp_norm(R.dot(f), mu[members], q)/n)

                # Normalized Dirac masses near x
                near = space.ball(x, s).members
                Vmin = np.array([np.min(V_s[near_s[y]]) for y in near])
                dirac_norm = 1.0/mu[near] if np.isinf(p) else (mu[near]**(1.0-p)/Vmin)**(1.0/p)
                osc = lp_norm(R[:,near], mu[members], q)/mu[near]
                best = max(best, float(np.max(V_r**(-inv_q)*osc/dirac_norm)))
        constants.append(best)

    ratios = np.array([r/s for r, s in pairs])
    constants = np.array(constants)
    usable = constants > 0.0
    fit = fit_line(np.log(ratios[usable]), np.log(constants[usable]))
    fit_out = _fit_dict(fit)
    fit_out["constant"] = float(np.exp(fit["intercept"]))

    extra = {"eta" : fit["slope"], "per_pair" : constants, "exact" : exact and not localized}
    if localized and kwargs.get("chain", False):
        extra["chain"] = holder_chain(space, spec, p, q, pairs, eta=fit["slope"], seed=seed)

    return ProbeReport(tag="Hbar" if localized else "H",
                       params={"p" : p, "q" : q},
                       fit=fit_out,
                       samples={"pairs" : [list(pair) for pair in pairs], "centers" : len(centers),
                                "ensemble_size" : 0 if ensemble is None else len(ensemble)},
                       seed=seed,
                       space_hash=space.hash,
                       extra=extra,
                       points=np.column_stack([ratios, constants]),
                       point_columns=["r_over_sqrt_t", "constant"])


def holder_chain(space, spec, p, q, pairs, eta=None, seed=0, tolerance=0.15):
    """Compares the localized exponent for (p, p) with those for Hbar(1, inf) and H(q, q).

    Returns
    -------
    dict
        The three exponents and whether both implied exponents are at least eta(p, p) - tolerance.
    """
    if eta is None:
        eta = holder_probe(space, spec, p, p, pairs, localized=True, seed=seed).fit["exponent"]
    eta_1inf = holder_probe(space, spec, 1.0, np.inf, pairs, localized=True, seed=seed).fit["exponent"]
    eta_qq = holder_probe(space, spec, q, q, pairs, seed=seed).fit["exponent"]
    return {"eta_pp" : eta,
            "eta_1inf" : eta_1inf,
            "eta_qq" : eta_qq,
            "consistent" : bool(eta_1inf >= eta-tolerance and eta_qq >= eta-tolerance)}


def _family_matrix(spec, family, t, **kwargs):
    # Matrix of the operator before any gradient is taken
    lam = spec.eigenvalues
    N = kwargs.get("N", 1.0)
    if family in ("heat", "grad_heat"):
        values = np.exp(-t*lam)
    elif family in ("Q", "grad_Q"):
        values = spec.q_values(t, N)
    elif family in ("P", "grad_P"):
        values = spec.p_values(t, N)
    elif family == "R":
        values = spec.r_values(t, N)
    elif family == "grad_fractional_P":
        values = spec.power_values(-0.5*kwargs.get("eps", 0.5))*(p_multiplier(t*lam, N)-1.0)
    else:
        return kwargs["paraproduct"].kernel_matrix(kwargs["g"], kwargs.get("s", t), t)
    return spec.operator_matrix(values)


def _restricted_gradient_norm(space, A, first, second, p, q):
    # Norm of f -> 1_second |grad A f| from L^p(first) to L^q(second)
    mu = space.mu
    if p == 2.0 and q == 2.0:
        u, v = space.edges[:,0].astype(int), space.edges[:,1].astype(int)
        inside = np.isin(u, second).astype(float)+np.isin(v, second).astype(float)
        rows = np.flatnonzero(inside > 0.0)
        G = np.sqrt(0.5*inside[rows]*space.edges[rows,2])[:,np.newaxis]*space.incidence[rows].dot(A[:,first])
        return matrix_norm(G, mu[first], np.ones(len(rows)), 2.0).value, True

    # Normalized Dirac masses
    G = _gradient_columns(space, A[:,first])
    scale = np.ones(len(first)) if np.isinf(p) else mu[first]**(-1.0/p)
    return float(np.max(lp_norm(G[second], mu[second], q)*scale)), p == 1.0


def offdiagonal_probe(space, spec, family, p, q, t, **kwargs):
    """Off-diagonal bounds of an operator family at scale sqrt(t).

    Ball-to-ball norms ||1_B2 T_t 1_B1||_(p->q) over balls of radius sqrt(t) are fitted against
    log(1 + d^2/t) (polynomial order, the negated slope) and against d^2/t (exponential rate, the
    negated slope). Gradient families are multiplied by sqrt(t).

    Parameters
    ----------
    space : DirichletSpace
        Space.

    spec : SpectralData
        Spectral data.

    family : str
        One of OFFDIAGONAL_FAMILIES.

    p, q : float
        Exponents.

    t : float
        Scale.

    N : float, optional
        Order of Q, P and R. Defaults to 1.

    eps : float, optional
        Order of the fractional power in grad_fractional_P. Defaults to 0.5.

    paraproduct : Paraproduct, optional
        Required for family "K".

    g : ndarray, optional
        Symbol field, required for family "K".

    center : int, optional
        Center of the anchor ball. Defaults to 0.

    window : tuple, optional
        Range of 1 + d^2/t kept in the fits. Defaults to (1, inf).

    min_pairs : int, optional
        Defaults to 4.

    Returns
    -------
    ProbeReport
    """
    if family not in OFFDIAGONAL_FAMILIES:
        raise ValidationError("{0} is not a valid operator family. Valid families are {1}.".format(family, ", ".join(OFFDIAGONAL_FAMILIES)))
    if family == "K" and ("paraproduct" not in kwargs or "g" not in kwargs):
        raise ValidationError("Family K needs a paraproduct and a symbol field g.")
    if not t > 0.0:
        raise ValidationError("Scale t must be positive.")

    A = _family_matrix(spec, family, t, **kwargs)
    gradient = family.startswith("grad")
    window = kwargs.get("window", (1.0, np.inf))
    mu = space.mu

    distances = []
    norms = []
    exact = True
    for first, second, gap in space.ball_pairs(np.sqrt(t), kwargs.get("center", 0)):
        x = 1.0+gap**2/t
        if x < window[0]*(1.0-1e-12) or x > window[1]*(1.0+1e-12):
            continue
        if gradient:
            value, is_exact = _restricted_gradient_norm(space, A, first, second, p, q)
            value *= np.sqrt(t)
        else:
            bracket = matrix_norm(A[np.ix_(second, first)], mu[first], mu[second], p, q, seed=kwargs.get("seed", 0))
            value, is_exact = bracket.value, bracket.exact
        exact = exact and is_exact
        if value > 0.0:
            distances.append(gap)
            norms.append(value)

    min_pairs = kwargs.get("min_pairs", 4)
    if len(norms) < min_pairs:
        raise ValidationError("Off-diagonal probe needs at least {0} usable ball pairs; found {1}.".format(min_pairs, len(norms)))
    distances = np.array(distances)
    log_norms = np.log(norms)
    poly = fit_line(np.log(1.0+distances**2/t), log_norms)
    expo = fit_line(distances**2/t, log_norms)

    return ProbeReport(tag="OffDiag",
                       params={"family" : family, "p" : p, "q" : q, "t" : t, "N" : kwargs.get("N", 1.0), "eps" : kwargs.get("eps", 0.5)},
                       fit={"exponent" : -poly["slope"], "constant" : float(np.exp(poly["intercept"])), "residual" : poly["max_residual"], "r2" : poly["r2"]},
                       samples={"pairs" : len(norms), "radius" : np.sqrt(t), "window" : list(window)},
                       seed=kwargs.get("seed", 0),
                       space_hash=space.hash,
                       extra={"order" : -poly["slope"], "rate" : -expo["slope"], "rate_r2" : expo["r2"],
                              "rate_residual" : expo["max_residual"], "exact" : exact},
                       points=np.column_stack([distances, norms]),
                       point_columns=["distance", "norm"])


def kernel_decay_probe(paraproduct, g, t, ratios, **kwargs):
    """Decay of the paraproduct kernel K(s,t) in s/t and in distance, as a KernelDecay report.

    See Paraproduct.kernel_decay() for the fitted quantities.
    """
    result = paraproduct.kernel_decay(g, t, ratios, kwargs.get("center", 0), kwargs.get("min_pairs", 4))
    space = paraproduct._space
    return ProbeReport(tag="KernelDecay",
                       params={"alpha" : paraproduct.alpha, "D" : paraproduct.D, "t" : t},
                       fit={"exponent" : result["scale_exponent"], "residual" : result["scale_residual"], "r2" : result["scale_r2"]},
                       samples={"ratios" : result["ratios"], "pairs" : len(result["distances"])},
                       seed=kwargs.get("seed", None),
                       space_hash=space.hash,
                       extra=result,
                       points=np.column_stack([result["ratios"], result["norms"]]),
                       point_columns=["s_over_t", "norm"])


def ahlfors_probe(space, radii=None, nu=None):
    """Uniform volume growth: c1 <= V(x,r)/r^nu <= c2 over r in (h, 1].

    On spaces whose mesh scale is at least 1 the window (h, 1] is empty; radii are then taken
    in (h, diam] and the report records the property as failing, since no scale below 1 is
    resolved.

    Parameters
    ----------
    space : DirichletSpace
        Space.

    radii : array_like, optional
        Radii in the window; others are dropped with a warning. Defaults to
        space.default_radii() restricted to the window.

    nu : float, optional
        Exponent. Defaults to the fitted doubling dimension.

    Returns
    -------
    ProbeReport
        The fitted constant is c2/c1. extra["window"] names the radius window and
        extra["ahlfors_holds"] is False on the (h, diam] fallback, None otherwise.
    """
    lo, hi = space.h, 1.0
    window = "(h,1]"
    if hi <= lo:
        hi = max(space.diameter, lo)
        window = "(h,diam]"
    if radii is None:
        radii = [r for r in space.default_radii() if lo < r <= hi*(1.0+1e-12)] or [min(max(2.0*lo, space.diameter), hi)]
    radii = np.sort(np.array(radii, dtype=float))
    inside = (radii > lo) & (radii <= hi*(1.0+1e-12))
    if not np.all(inside):
        warnings.warn("{0} radii outside {1} were ignored.".format(np.sum(~inside), window))
    radii = radii[inside]
    if len(radii) == 0:
        raise ValidationError("No radius lies in ({0}, {1}].".format(lo, hi))
    if nu is None:
        nu = space.doubling_fit(radii)["nu"]

    ratios = np.array([space.volumes(r)/r**nu for r in radii])
    c1 = float(np.min(ratios))
    c2 = float(np.max(ratios))
    return ProbeReport(tag="Ahlfors",
                       params={"nu" : nu},
                       fit={"exponent" : nu, "constant" : c2/c1},
                       samples={"radii" : radii, "centers" : space.N},
                       space_hash=space.hash,
                       extra={"c1" : c1, "c2" : c2, "degenerate" : len(radii) < 2,
                              "window" : window, "ahlfors_holds" : False if window == "(h,diam]" else None,
                              "per_radius_min" : np.min(ratios, axis=1), "per_radius_max" : np.max(ratios, axis=1)},
                       points=np.column_stack([radii, np.min(ratios, axis=1), np.max(ratios, axis=1)]),
                       point_columns=["r", "min_ratio", "max_ratio"])


def imaginary_power_probe(space, spec, p, betas=None, nu=None, seed=0):
    """Growth of ||L^(i beta)||_(p->p) in beta, fitted as (1+|beta|)^s and compared with nu/2.

    Returns
    -------
    ProbeReport
    """
    betas = np.array([0.5, 1.0, 2.0, 4.0, 8.0] if betas is None else betas, dtype=float)
    brackets = [spec.imaginary_power_norm(beta, p, seed=seed) for beta in betas]
    values = np.array([b.value for b in brackets])
    fit = fit_line(np.log(1.0+np.abs(betas)), np.log(values))
    if nu is None:
        nu = space.doubling_fit(space.default_radii())["nu"]
    fit_out = _fit_dict(fit)
    fit_out["constant"] = float(np.exp(fit["intercept"]))
    return ProbeReport(tag="ImagPower",
                       params={"p" : p},
                       fit=fit_out,
                       samples={"betas" : betas},
                       seed=seed,
                       space_hash=space.hash,
                       extra={"norms" : [b.to_dict() for b in brackets], "reference_exponent" : 0.5*nu},
                       points=np.column_stack([betas, values]),
                       point_columns=["beta", "norm"])


def embedding_probe(space, spec, alpha, p, s_list, ensemble=None, nu=None, seed=0):
    """Sobolev embedding ratios ||L^(s/2) f||_inf / (||f||_inf + ||f||_(p,alpha)).

    Orders s outside (0, alpha - nu/p) are still evaluated, with a warning.

    Returns
    -------
    ProbeReport
    """
    if nu is None:
        nu = space.doubling_fit(space.default_radii())["nu"]
    limit = alpha-nu/p
    s_list = np.array(s_list, dtype=float)
    if np.any(s_list <= 0.0) or np.any(s_list >= limit):
        warnings.warn("Embedding orders outside (0, {0}) are outside the admissible range.".format(limit))
    ensemble = ensemble if ensemble is not None else _default_ensemble(spec, seed)

    maxima = []
    for s in s_list:
        best = 0.0
        for f in ensemble:
            den = np.max(np.abs(f))+spec.sobolev_norm(f, alpha, p)
            if den > 0.0:
                best = max(best, spec.sobolev_norm(f, s, np.inf)/den)
        maxima.append(float(best))

    return ProbeReport(tag="Embedding",
                       params={"alpha" : alpha, "p" : p, "nu" : nu},
                       fit={"constant" : max(maxima)},
                       samples={"s" : s_list, "ensemble_size" : len(ensemble)},
                       seed=seed,
                       space_hash=space.hash,
                       extra={"per_order" : maxima, "limit" : limit},
                       points=np.column_stack([s_list, maxima]),
                       point_columns=["s", "ratio"])


def smoothing_gradient_probe(space, spec, eps, times=None, N=1.0):
    """Exact ||sqrt(t) grad L^(-eps/2) P_t^(N)||_(2->2) = sup_lambda sqrt(t lambda^(1-eps)) phi_N(t lambda).

    The fitted exponent of the norm in t is expected to approach eps/2 at small t.

    Returns
    -------
    ProbeReport
    """
    lam = spec.eigenvalues[spec.nullspace_dim:]
    if times is None:
        times = geometric_nodes(1.0/spec.lambda_max, 1.0/spec.lambda_1, 4)
    times = np.array(times, dtype=float)
    values = np.array([np.sqrt(np.max(t*lam**(1.0-eps)*p_multiplier(t*lam, N)**2)) for t in times])
    fit = fit_line(np.log(times), np.log(values))
    fit_out = _fit_dict(fit)
    fit_out["constant"] = float(np.exp(fit["intercept"]))
    return ProbeReport(tag="SmoothGrad",
                       params={"eps" : eps, "N" : N},
                       fit=fit_out,
                       samples={"times" : times},
                       space_hash=space.hash,
                       extra={"norms" : values, "reference_exponent" : 0.5*eps},
                       points=np.column_stack([times, values]),
                       point_columns=["t", "norm"])


def run_probe(tag, space, spec, params=None, seed=0):
    """Runs the probe for a hypothesis tag with parameters from a dictionary.

    Parameters
    ----------
    tag : str
        One of VALID_TAGS.

    space : DirichletSpace
        Space.

    spec : SpectralData
        Spectral data.

    params : dict, optional
        Probe parameters (for example {"p" : 3} or {"family" : "heat", "t" : 0.01}).

    seed : int, optional
        Seed. Defaults to 0.

    Returns
    -------
    ProbeReport
    """
    # Kept local to avoid a module cycle
    from dircalc.paraproduct import Paraproduct

    params = dict(params or {})
    p = float(params.get("p", 2.0))
    q = float(params.get("q", p))

    if tag not in VALID_TAGS:
        raise ValidationError("{0} is not a valid hypothesis tag. Valid tags are {1}.".format(tag, ", ".join(VALID_TAGS)))

    if tag == "VD":
        return volume_doubling_probe(space, params.get("radii"))
    if tag in ("DUE", "UE"):
        return due_ue_probe(space, spec, params.get("times"), tag=tag, m=params.get("m", 2.0))
    if tag == "Gp":
        return gradient_bound_probe(space, spec, p, params.get("times"), seed=seed)
    if tag in ("Rp", "RRp", "Ep"):
        return riesz_probe(space, spec, p, tag=tag, seed=seed)
    if tag == "Pp":
        return poincare_probe(space, p, params.get("radii"), spec=spec, seed=seed)
    if tag == "DG2":
        return degiorgi_probe(space, spec, params.get("pairs"), seed=seed)
    if tag in ("H", "Hbar"):
        return holder_probe(space, spec, p, q, params.get("pairs"), localized=(tag == "Hbar"),
                            chain=params.get("chain", tag == "Hbar"), seed=seed)
    if tag == "Ahlfors":
        return ahlfors_probe(space, params.get("radii"), params.get("nu"))
    if tag == "ImagPower":
        return imaginary_power_probe(space, spec, p, params.get("betas"), params.get("nu"), seed=seed)
    if tag == "Embedding":
        return embedding_probe(space, spec, params.get("alpha", 0.5), p, params.get("s_list", [0.1]), nu=params.get("nu"), seed=seed)
    if tag == "SmoothGrad":
        return smoothing_gradient_probe(space, spec, params.get("eps", 0.5), params.get("times"), params.get("N", 1.0))

    # Probes involving the paraproduct kernel
    t = float(params.get("t", 4.0*space.h**2))
    extra = {}
    if tag == "KernelDecay" or params.get("family") == "K":
        para = Paraproduct(space=space, spectral_data=spec, alpha=params.get("alpha", 0.5), D=params.get("D"), nu=params.get("nu"))
        g = Ensemble(kind="random_signs", count=1, seed=seed).fields(spec)[0]
        extra = {"paraproduct" : para, "g" : g}
    if tag == "KernelDecay":
        return kernel_decay_probe(extra["paraproduct"], extra["g"], t, params.get("ratios", [1.0, 0.5, 0.25, 0.125, 0.0625]), seed=seed)
    return offdiagonal_probe(space, spec, params.get("family", "heat"), p, q, t, N=params.get("N", 1.0),
                             eps=params.get("eps", 0.5), seed=seed, **extra)
