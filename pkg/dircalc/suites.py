"""Theorem suites: ratio statistics over ensembles on a family of refined spaces."""

import json
import time
import warnings
import multiprocessing as mp

import numpy as np

from dircalc.exceptions import ValidationError
from dircalc.calculus import decompose, ScaleGrid
from dircalc.ensembles import Ensemble
from dircalc.functionals import s_alpha
from dircalc.paraproduct import Paraproduct
from dircalc.nonlinearities import get_nonlinearity
from dircalc.probes import holder_probe
from dircalc.helpers import OneLineProgress, to_jsonable
from dircalc.dc_math import lp_norm, fit_line


SUITES = ("algebra", "equivalence", "chain", "paralin", "decomposition")

REFINEMENT_TOLERANCE = 2.0


class SuiteReport:
    """Result of a theorem suite.

    Parameters
    ----------
    suite : str
        Suite name, one of SUITES.

    config : dict
        Echo of the suite configuration.

    probes : list
        Probe inputs used on each space (fitted dimension and the like).

    spaces : list
        Per-space statistics: space_hash, n, h, max, median, min and ratios.

    statement : str
        One-line summary.
    """

    def __init__(self, **kwargs):

        self.suite = kwargs["suite"]
        self.config = kwargs["config"]
        self.probes = kwargs.get("probes", [])
        self.spaces = kwargs["spaces"]
        self.statement = kwargs.get("statement", "")

        maxima = [s["max"] for s in self.spaces if s["max"] > 0.0]
        medians = [s["median"] for s in self.spaces if s["median"] > 0.0]
        self.trend = {"max_ratio_spread" : max(maxima)/min(maxima) if len(maxima) > 1 else None,
                      "median_ratio_spread" : max(medians)/min(medians) if len(medians) > 1 else None}


    @property
    def max_ratio(self):
        """Largest ratio over all spaces."""
        return max([s["max"] for s in self.spaces])


    @property
    def refinement_consistent(self):
        """Whether the per-space maxima agree within a factor of two. None for a single space."""
        spread = self.trend["max_ratio_spread"]
        return None if spread is None else bool(spread <= REFINEMENT_TOLERANCE)


    def to_dict(self):
        """Returns the report as a JSON-ready dictionary."""
        return to_jsonable({"suite" : self.suite,
                            "config" : self.config,
                            "probes" : self.probes,
                            "spaces" : self.spaces,
                            "trend" : self.trend,
                            "statement" : self.statement})


    def export_json(self, filename):
        """Writes the report to a JSON file with sorted keys."""
        if ".json" not in filename:
            raise ValidationError("Filename for suite report must contain .json extension.")
        with open(filename, 'w') as export_handle:
            json.dump(self.to_dict(), export_handle, sort_keys=True, indent=2)
            export_handle.write("\n")


    def export_csv(self, filename):
        """Writes one row per (space, sample) with columns space_index, n, h, sample and ratio."""
        if ".csv" not in filename:
            raise ValidationError("Filename for suite samples must contain .csv extension.")
        rows = []
        for i, s in enumerate(self.spaces):
            for j, r in enumerate(s["ratios"]):
                rows.append([i, s["n"], s["h"], j, r])
        np.savetxt(filename, np.array(rows).reshape((-1, 5)), fmt=["%d", "%d", "%20.12e", "%d", "%20.12e"],
                   delimiter=",", header="space_index,n,h,sample,ratio", comments="")


def _space_entry(space, ratios, extra=None):
    ratios = [float(r) for r in ratios if np.isfinite(r)]
    if len(ratios) == 0:
        ratios = [0.0]
    entry = {"space_hash" : space.hash,
             "n" : space.N,
             "h" : space.h,
             "max" : float(np.max(ratios)),
             "median" : float(np.median(ratios)),
             "min" : float(np.min(ratios)),
             "ratios" : ratios}
    if extra is not None:
        entry["extra"] = extra
    return entry


def _probe_inputs(space):
    # Doubling fit feeding the parameter windows
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = space.doubling_fit(space.default_radii())
    return {"space_hash" : space.hash, "nu" : fit["nu"], "doubling_constant" : fit["constant"], "nu_r2" : fit["r2"]}


def _ensembles(config):
    first = Ensemble(**config["ensemble"])
    second = dict(config["ensemble"])
    second["seed"] = first.seed+1
    return first, Ensemble(**second)


def _run_cells(cell, spaces, config, processes, verbose, msg):
    # Evaluates one cell per space, in input order

    if len(spaces) < 2:
        warnings.warn("A refinement study needs at least two spaces; only {0} given, no trend is reported.".format(len(spaces)))

    args = [(space, config) for space in spaces]
    if processes > 1:
        with mp.Pool(processes) as pool:
            return pool.map(cell, args)

    if verbose:
        prog = OneLineProgress(len(args), msg=msg)
    results = []
    for arg in args:
        results.append(cell(arg))
        if verbose:
            prog.display()
    return results


def _verdict(report):
    consistent = report.refinement_consistent
    if consistent is None:
        return "single space, no refinement trend"
    if consistent:
        return "consistent within x{0:g} across refinements".format(REFINEMENT_TOLERANCE)
    return "not consistent within x{0:g} across refinements".format(REFINEMENT_TOLERANCE)


def _finish(suite, config, spaces, results, verbose, start_time, summary):
    report = SuiteReport(suite=suite,
                         config=config,
                         probes=[r["probes"] for r in results],
                         spaces=[r["entry"] for r in results])
    report.statement = "{0}: {1}; {2}.".format(suite, summary(report), _verdict(report))
    if verbose:
        end_time = time.time()
        print("Finished. Time: {0} s.".format(end_time-start_time), flush=True)
        print(report.statement)
    return report


def _base_config(kwargs, **extra):
    ensemble = kwargs.get("ensemble", None) or Ensemble(kind="band_limited", count=kwargs.get("samples", 16), seed=kwargs.get("seed", 0))
    config = {"ensemble" : ensemble.to_dict(),
              "cache_dir" : kwargs.get("cache_dir", None),
              "max_vertices" : kwargs.get("max_vertices", 4096)}
    config.update(extra)
    return config


def _check_regime(alpha, p):
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must lie in (0, 1); got {0}.".format(alpha))
    if not 1.0 < p < np.inf:
        raise ValidationError("p must lie in (1, inf); got {0}.".format(p))


def _decompose(space, config):
    return decompose(space, cache_dir=config["cache_dir"], max_vertices=config["max_vertices"])


def _algebra_cell(arg):
    space, config = arg
    spec = _decompose(space, config)
    alpha, p = config["alpha"], config["p"]
    first, second = _ensembles(config)

    ratios = []
    form_ratios = []
    for f, g in zip(first.fields(spec), second.fields(spec)):
        nf, ng = spec.sobolev_norm(f, alpha, p), spec.sobolev_norm(g, alpha, p)
        den = nf*np.max(np.abs(g))+np.max(np.abs(f))*ng
        if den > 0.0:
            ratios.append(spec.sobolev_norm(f*g, alpha, p)/den)

        # Leibniz bound of the Dirichlet form at order 1
        ef, eg = np.sqrt(space.energy(f, f)), np.sqrt(space.energy(g, g))
        den = ef*np.max(np.abs(g))+np.max(np.abs(f))*eg
        if den > 0.0:
            form_ratios.append(np.sqrt(space.energy(f*g, f*g))/den)

    extra = {"dirichlet_form_max" : float(max(form_ratios)) if form_ratios else 0.0}
    return {"entry" : _space_entry(space, ratios, extra), "probes" : _probe_inputs(space)}


def suite_algebra(spaces, alpha=0.5, p=2.0, **kwargs):
    """Sobolev algebra suite: ratios ||fg||_(p,alpha) / (||f||_(p,alpha) ||g||_inf + ||f||_inf ||g||_(p,alpha)).

    Pairs are drawn from the ensemble and from a copy with the next seed. Each space also
    records the largest Leibniz ratio of the Dirichlet form itself, which is at most 1.

    Parameters
    ----------
    spaces : list of DirichletSpace
        Refinement family.

    alpha : float, optional
        Regularity in (0, 1). Defaults to 0.5.

    p : float, optional
        Exponent in (1, inf). Defaults to 2.

    ensemble : Ensemble, optional
        Sample fields. Defaults to a band-limited, sup-normalized ensemble of `samples` fields.

    samples : int, optional
        Size of the default ensemble. Defaults to 16.

    seed : int, optional
        Seed of the default ensemble. Defaults to 0.

    processes : int, optional
        Number of worker processes over spaces. Defaults to 1.

    cache_dir : str, optional
        Spectral cache directory.

    verbose : bool, optional
        Defaults to False.

    Returns
    -------
    SuiteReport
    """
    _check_regime(alpha, p)
    verbose = kwargs.get("verbose", False)
    config = _base_config(kwargs, alpha=alpha, p=p)
    if verbose:
        start_time = time.time()
        print("\nRunning algebra suite on {0} spaces...".format(len(spaces)), flush=True)
    results = _run_cells(_algebra_cell, spaces, config, kwargs.get("processes", 1), verbose, "Algebra suite")
    return _finish("algebra", config, spaces, results, verbose, start_time if verbose else None,
                   lambda r: "max Leibniz ratio {0:.6g}".format(r.max_ratio))


def _equivalence_cell(arg):
    space, config = arg
    spec = _decompose(space, config)
    alpha, p, rho = config["alpha"], config["p"], config["rho"]
    variant = config["variant"]
    first, _ = _ensembles(config)

    def ratio(f):
        den = spec.sobolev_norm(f, alpha, p)
        if den <= 0.0:
            return None
        S = s_alpha(space, f, alpha, rho, variant=variant)
        return lp_norm(S, space.mu, p)/den

    ratios = [r for r in map(ratio, first.fields(spec)) if r is not None]

    # Eigenfield table
    k_max = min(config["eigenfields"], spec.N-1)
    eigen = [ratio(spec.eigenfields[:,k]) for k in range(1, k_max+1)]
    extra = {"bracket" : [float(min(ratios)), float(max(ratios))] if ratios else [0.0, 0.0],
             "bracket_width" : float(max(ratios)/min(ratios)) if ratios and min(ratios) > 0.0 else None,
             "eigenfield_ratios" : eigen}

    probes = _probe_inputs(space)
    if config["necessity"] and alpha*p > probes["nu"]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            eta = holder_probe(space, spec, 2.0, 2.0).fit["exponent"]
        bound = alpha-probes["nu"]/rho-0.2
        probes["holder_eta"] = eta
        probes["holder_bound"] = bound
        probes["holder_consistent"] = bool(eta >= bound)
    return {"entry" : _space_entry(space, ratios, extra), "probes" : probes}


def suite_equivalence(spaces, alpha=0.5, p=2.0, rho=1.5, **kwargs):
    """Equivalence suite: ratios ||S_alpha^rho f||_p / ||L^(alpha/2) f||_p.

    Each space reports the bracket [min, max] of the ratios and the ratios of its first
    eigenfields. Where alpha p exceeds the fitted dimension, the Hoelder exponent of the space is
    probed and compared with alpha - nu/rho - 0.2.

    Parameters
    ----------
    spaces : list of DirichletSpace
        Refinement family.

    alpha : float, optional
        Defaults to 0.5.

    p : float, optional
        Defaults to 2.

    rho : float, optional
        Oscillation exponent, below min(2, p). Values outside that range run with a warning.
        Defaults to 1.5.

    variant : str, optional
        S_alpha variant. Defaults to "mean_oscillation".

    eigenfields : int, optional
        Number of eigenfields tabulated. Defaults to 4.

    necessity : bool, optional
        Whether to run the Hoelder cross-check. Defaults to True.

    ensemble, samples, seed, processes, cache_dir, verbose
        As in suite_algebra().

    Returns
    -------
    SuiteReport
    """
    _check_regime(alpha, p)
    if not 1.0 <= rho < min(2.0, p):
        warnings.warn("rho = {0} lies outside [1, min(2, p)); the bracket may not be finite.".format(rho))
    verbose = kwargs.get("verbose", False)
    config = _base_config(kwargs, alpha=alpha, p=p, rho=rho,
                          variant=kwargs.get("variant", "mean_oscillation"),
                          eigenfields=kwargs.get("eigenfields", 4),
                          necessity=kwargs.get("necessity", True))
    if verbose:
        start_time = time.time()
        print("\nRunning equivalence suite on {0} spaces...".format(len(spaces)), flush=True)
    results = _run_cells(_equivalence_cell, spaces, config, kwargs.get("processes", 1), verbose, "Equivalence suite")

    def summary(report):
        lo = min([s["min"] for s in report.spaces])
        return "ratio bracket [{0:.6g}, {1:.6g}]".format(lo, report.max_ratio)
    return _finish("equivalence", config, spaces, results, verbose, start_time if verbose else None, summary)


def _chain_cell(arg):
    space, config = arg
    spec = _decompose(space, config)
    alpha, p = config["alpha"], config["p"]
    para = Paraproduct(space=space, spectral_data=spec, alpha=alpha, D=config["D"], nu=config["nu"],
                       grid=ScaleGrid.default(spec, config["points_per_decade"]))

    ratios = []
    buckets = {}
    for name in config["nonlinearities"]:
        F = get_nonlinearity(name)
        buckets[name] = {}
        for amplitude in config["amplitudes"]:
            ensemble = dict(config["ensemble"])
            ensemble["amplitude"] = amplitude
            fields = Ensemble(**ensemble).fields(spec)
            bucket = []
            residual = 0.0
            for f in fields:
                den = spec.sobolev_norm(f, alpha, p)
                if den <= 0.0:
                    continue
                bucket.append(spec.sobolev_norm(F(f), alpha, p)/den)
                scale = max(np.max(np.abs(F(f))), 1e-300)
                residual = max(residual, para.chain_residual(F, f)/scale)
            ratios += bucket
            amp_max = float(max([np.max(np.abs(f)) for f in fields]))
            buckets[name]["{0:g}".format(amplitude)] = {"max" : float(max(bucket)) if bucket else 0.0,
                                                        "lipschitz" : F.lipschitz(amp_max),
                                                        "reconstruction_residual" : residual}
    extra = {"buckets" : buckets, "paraproduct" : para.to_dict()}
    return {"entry" : _space_entry(space, ratios, extra), "probes" : _probe_inputs(space)}


def suite_chain(spaces, alpha=0.5, p=2.0, nonlinearities=("identity", "square", "sin", "tanh"), **kwargs):
    """Chain rule suite: ratios ||F(f)||_(p,alpha) / ||f||_(p,alpha) bucketed by ||f||_inf.

    Every bucket also records the Lipschitz constant of F on the bucket range and the relative
    reconstruction residual of F(f) from the paraproduct chain transform.

    Parameters
    ----------
    spaces : list of DirichletSpace
        Refinement family.

    alpha, p : float, optional
        As in suite_algebra().

    nonlinearities : sequence of str, optional
        Registry names. Defaults to identity, square, sin and tanh.

    amplitudes : sequence of float, optional
        Sup norms of the buckets. Defaults to (0.5, 1, 2).

    D : float, optional
        Paraproduct order. Defaults to the order implied by the fitted dimension.

    points_per_decade : int, optional
        Scale grid density. Defaults to 32.

    ensemble, samples, seed, processes, cache_dir, verbose
        As in suite_algebra().

    Returns
    -------
    SuiteReport
    """
    _check_regime(alpha, p)
    for name in nonlinearities:
        get_nonlinearity(name)
    verbose = kwargs.get("verbose", False)
    config = _base_config(kwargs, alpha=alpha, p=p, nonlinearities=list(nonlinearities),
                          amplitudes=[float(a) for a in kwargs.get("amplitudes", (0.5, 1.0, 2.0))],
                          D=kwargs.get("D", None), nu=kwargs.get("nu", None),
                          points_per_decade=kwargs.get("points_per_decade", 32))
    if verbose:
        start_time = time.time()
        print("\nRunning chain suite on {0} spaces...".format(len(spaces)), flush=True)
    results = _run_cells(_chain_cell, spaces, config, kwargs.get("processes", 1), verbose, "Chain suite")

    def summary(report):
        residual = max([b["reconstruction_residual"] for s in report.spaces
                        for F in s["extra"]["buckets"].values() for b in F.values()])
        return "max chain ratio {0:.6g}, max reconstruction residual {1:.3e}".format(report.max_ratio, residual)
    return _finish("chain", config, spaces, results, verbose, start_time if verbose else None, summary)


def _paralin_cell(arg):
    space, config = arg
    spec = _decompose(space, config)
    alpha, p = config["alpha"], config["p"]
    probes = _probe_inputs(space)
    nu = probes["nu"] if config["nu"] is None else config["nu"]

    # Smoothing window
    limit = min(1.0-alpha, alpha-nu/p)
    probes["rho_limit"] = limit
    if limit <= 0.0:
        warnings.warn("alpha - nu/p = {0} is not positive; paralinearization gains are tabulated against 1 - alpha.".format(alpha-nu/p))
        limit = 1.0-alpha
    rhos = [fraction*limit for fraction in config["fractions"]]
    rho = 0.5*limit
    probes["rho"] = rho

    para = Paraproduct(space=space, spectral_data=spec, alpha=alpha, D=config["D"], nu=nu,
                       grid=ScaleGrid.default(spec, config["points_per_decade"]))
    F = get_nonlinearity(config["nonlinearity"])
    first, _ = _ensembles(config)

    ratios = []
    table = np.zeros(len(rhos))
    amplitude = 0.0
    for f in first.fields(spec):
        if spec.sobolev_norm(f, alpha, p) <= 0.0:
            continue
        amplitude = max(amplitude, float(np.max(np.abs(f))))
        result = para.paralinearization_table(F, f, p, rhos+[rho])
        ratios.append(result["ratios"][-1])
        table = np.maximum(table, result["ratios"][:-1])

    # Derivative sizes of F on the range of the samples
    extra = {"rhos" : rhos, "fractions" : config["fractions"], "max_ratios" : table,
             "amplitude" : amplitude, "derivative_bounds" : F.derivative_bounds(amplitude)}
    return {"entry" : _space_entry(space, ratios, extra), "probes" : probes}


def suite_paralin(spaces, alpha=0.5, p=2.0, nonlinearity="tanh", **kwargs):
    """Paralinearization suite: ratios ||F(f) - Pi_(F'(f)) f||_(p, alpha+rho) / ||f||_(p,alpha).

    rho is half of min(1 - alpha, alpha - nu/p) with nu the fitted dimension; the maxima are also
    tabulated for rho at the given fractions of that window to show how the gain degrades
    towards its edge.

    Parameters
    ----------
    spaces : list of DirichletSpace
        Refinement family.

    alpha, p : float, optional
        As in suite_algebra().

    nonlinearity : str, optional
        Registry name. Defaults to "tanh".

    fractions : sequence of float, optional
        Fractions of the window tabulated. Defaults to (0.25, 0.5, 0.75, 0.95).

    nu : float, optional
        Dimension. Defaults to the fitted value on each space.

    D, points_per_decade, ensemble, samples, seed, processes, cache_dir, verbose
        As in suite_chain().

    Returns
    -------
    SuiteReport
    """
    _check_regime(alpha, p)
    get_nonlinearity(nonlinearity)
    verbose = kwargs.get("verbose", False)
    config = _base_config(kwargs, alpha=alpha, p=p, nonlinearity=nonlinearity,
                          fractions=[float(x) for x in kwargs.get("fractions", (0.25, 0.5, 0.75, 0.95))],
                          D=kwargs.get("D", None), nu=kwargs.get("nu", None),
                          points_per_decade=kwargs.get("points_per_decade", 32))
    if verbose:
        start_time = time.time()
        print("\nRunning paralinearization suite on {0} spaces...".format(len(spaces)), flush=True)
    results = _run_cells(_paralin_cell, spaces, config, kwargs.get("processes", 1), verbose, "Paralinearization suite")
    return _finish("paralin", config, spaces, results, verbose, start_time if verbose else None,
                   lambda r: "max remainder ratio {0:.6g}".format(r.max_ratio))


def _decomposition_cell(arg):
    space, config = arg
    spec = _decompose(space, config)
    first, second = _ensembles(config)
    pairs = list(zip(first.fields(spec), second.fields(spec)))

    residuals = []
    for ppd in config["ppd_list"]:
        para = Paraproduct(space=space, spectral_data=spec, alpha=config["alpha"], D=config["D"], nu=config["nu"],
                           grid=ScaleGrid.default(spec, ppd))
        residuals.append([para.product_decomposition_residual(f, g)/(np.max(np.abs(f))*np.max(np.abs(g))) for f, g in pairs])
    residuals = np.array(residuals)
    maxima = np.max(residuals, axis=1)

    extra = {"ppd_list" : config["ppd_list"], "max_residuals" : maxima}
    if len(config["ppd_list"]) > 1 and np.all(maxima > 0.0):
        fit = fit_line(np.log(config["ppd_list"]), np.log(maxima))
        extra["order"] = -fit["slope"]
        extra["order_r2"] = fit["r2"]
    else:
        extra["order"] = None
    return {"entry" : _space_entry(space, residuals[-1], extra), "probes" : _probe_inputs(space)}


def suite_decomposition(spaces, ppd_list=(8, 16, 32), **kwargs):
    """Product decomposition suite: residuals ||fg - Pi_g f - Pi_f g - P_N(fg)||_inf / (||f||_inf ||g||_inf).

    The sample ratios are the residuals on the finest grid; each space also reports the maximum
    residual per grid density and its fitted order in the number of points per decade.

    Parameters
    ----------
    spaces : list of DirichletSpace
        Refinement family.

    ppd_list : sequence of int, optional
        Grid densities, coarse to fine. Defaults to (8, 16, 32).

    alpha : float, optional
        Paraproduct regularity. Defaults to 0.5.

    D, nu, ensemble, samples, seed, processes, cache_dir, verbose
        As in suite_chain().

    Returns
    -------
    SuiteReport
    """
    ppd_list = sorted(int(x) for x in ppd_list)
    if len(ppd_list) == 0 or ppd_list[0] < 1:
        raise ValidationError("ppd_list must hold positive grid densities.")
    verbose = kwargs.get("verbose", False)
    config = _base_config(kwargs, alpha=kwargs.get("alpha", 0.5), ppd_list=ppd_list,
                          D=kwargs.get("D", None), nu=kwargs.get("nu", None))
    if verbose:
        start_time = time.time()
        print("\nRunning decomposition suite on {0} spaces...".format(len(spaces)), flush=True)
    results = _run_cells(_decomposition_cell, spaces, config, kwargs.get("processes", 1), verbose, "Decomposition suite")

    def summary(report):
        orders = [s["extra"]["order"] for s in report.spaces if s["extra"]["order"] is not None]
        text = "max residual {0:.3e}".format(report.max_ratio)
        if orders:
            text += ", smallest fitted order {0:.3g}".format(min(orders))
        return text
    return _finish("decomposition", config, spaces, results, verbose, start_time if verbose else None, summary)


def run_suite(name, spaces, **kwargs):
    """Runs a suite by name. Keyword arguments are passed to the suite."""
    suites = {"algebra" : suite_algebra,
              "equivalence" : suite_equivalence,
              "chain" : suite_chain,
              "paralin" : suite_paralin,
              "decomposition" : suite_decomposition}
    if name not in suites:
        raise ValidationError("{0} is not a valid suite. Valid suites are {1}.".format(name, ", ".join(SUITES)))
    return suites[name](spaces, **kwargs)
