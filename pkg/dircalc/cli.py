"""Command line interface: gen, probe, suite and report."""

import os
import sys
import json
import argparse

from dircalc.exceptions import ValidationError, NumericalError
from dircalc.space import DirichletSpace
from dircalc.generators import generate, GENERATORS
from dircalc.calculus import decompose
from dircalc.probes import run_probe, VALID_TAGS
from dircalc.ensembles import Ensemble, ENSEMBLE_KINDS
from dircalc.suites import run_suite, SUITES
from dircalc.reports import aggregate


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _parser():
    parser = argparse.ArgumentParser(prog="dircalc", description="Heat semigroup calculus on finite Dirichlet spaces.")
    parser.add_argument("--config", type=str, default=None, help="JSON file of option values; explicit flags win.")
    parser.add_argument("--cache-dir", type=str, default=None, help="Spectral cache directory (default: $DIRCALC_CACHE).")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    # gen
    gen = sub.add_parser("gen", help="Generate a space file.")
    gen.add_argument("--kind", type=str, choices=sorted(GENERATORS.keys()))
    gen.add_argument("--d", type=int)
    gen.add_argument("--n", type=int)
    gen.add_argument("--h", type=float)
    gen.add_argument("--neck", type=int)
    gen.add_argument("--depth", type=int)
    gen.add_argument("--level", type=int)
    gen.add_argument("--params", type=str, help="Generator parameters as a JSON object.")
    gen.add_argument("--out", type=str)

    # probe
    probe = sub.add_parser("probe", help="Probe a structural hypothesis on a space.")
    probe.add_argument("--space", type=str)
    probe.add_argument("--hypothesis", type=str, help="One of {0}.".format(", ".join(VALID_TAGS)))
    probe.add_argument("--params", type=str, help="Probe parameters as a JSON object.")
    probe.add_argument("--seed", type=int)
    probe.add_argument("--out", type=str)

    # suite
    suite = sub.add_parser("suite", help="Run a theorem suite on a refinement family.")
    suite.add_argument("--space", "--spaces", dest="spaces", type=str, nargs="+")
    suite.add_argument("--suite", type=str, choices=SUITES)
    suite.add_argument("--alpha", type=float)
    suite.add_argument("--p", type=float)
    suite.add_argument("--rho", type=float)
    suite.add_argument("--grid-ppd", type=int)
    suite.add_argument("--samples", type=int)
    suite.add_argument("--ensemble", type=str, choices=ENSEMBLE_KINDS)
    suite.add_argument("--normalization", type=str, choices=("sup", "sobolev", "none"))
    suite.add_argument("--processes", type=int)
    suite.add_argument("--seed", type=int)
    suite.add_argument("--out", type=str)

    # report
    report = sub.add_parser("report", help="Aggregate the reports in a directory.")
    report.add_argument("--in", dest="in_dir", type=str)
    report.add_argument("--format", type=str, choices=("csv", "json"))
    report.add_argument("--plot-data", action="store_true", default=None)
    report.add_argument("--plot", type=str)
    return parser


def _merge_config(args):
    # Config file values fill in flags that were not given
    if args.config is None:
        return args
    try:
        with open(args.config, 'r') as input_handle:
            config = json.load(input_handle)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError("Could not read config file {0}: {1}".format(args.config, e))
    for key, value in config.items():
        key = key.replace("-", "_")
        if key == "in":
            key = "in_dir"
        if key == "space" and args.command == "suite":
            key = "spaces"
            value = [value] if isinstance(value, str) else value
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise ValidationError("Option --{0} is required for '{1}'.".format(name.replace("_", "-"), args.command))


def _json_arg(text):
    if text is None:
        return {}
    if isinstance(text, dict):
        return text
    try:
        value = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError("Could not parse JSON parameters '{0}': {1}".format(text, e))
    if not isinstance(value, dict):
        raise ValidationError("Parameters must be a JSON object.")
    return value


def _gen(args):
    _require(args, "kind", "out")
    params = _json_arg(args.params)
    for name in ("d", "n", "h", "neck", "depth", "level"):
        value = getattr(args, name, None)
        if value is not None:
            params[name] = value
    space = generate(args.kind, params, verbose=args.verbose)
    space.export_json(args.out)
    print("Wrote {0} ({1} vertices, hash {2}).".format(args.out, space.N, space.hash))


def _load(filename, args):
    return DirichletSpace(space_file=filename, verbose=args.verbose)


def _probe(args):
    _require(args, "space", "hypothesis", "out")
    if args.hypothesis not in VALID_TAGS:
        raise ValidationError("{0} is not a valid hypothesis tag. Valid tags are {1}.".format(args.hypothesis, ", ".join(VALID_TAGS)))
    space = _load(args.space, args)
    spec = decompose(space, cache_dir=args.cache_dir, verbose=args.verbose)
    report = run_probe(args.hypothesis, space, spec, _json_arg(args.params), seed=args.seed or 0)
    report.export_json(args.out)
    if report.points is not None:
        report.export_csv(os.path.splitext(args.out)[0]+".csv")
    print("{0}: exponent = {1}, constant = {2}".format(report.tag, report.fit["exponent"], report.fit["constant"]))


def _suite(args):
    _require(args, "spaces", "suite", "out")
    spaces = [_load(filename, args) for filename in args.spaces]
    seed = args.seed or 0
    ensemble = Ensemble(kind=args.ensemble or "band_limited",
                        count=args.samples or 16,
                        seed=seed,
                        normalization=args.normalization or "sup",
                        alpha=args.alpha if args.alpha is not None else 0.5,
                        p=args.p if args.p is not None else 2.0)

    kwargs = {"ensemble" : ensemble, "seed" : seed, "cache_dir" : args.cache_dir, "verbose" : args.verbose,
              "processes" : args.processes or 1}
    if args.suite != "decomposition":
        kwargs["alpha"] = args.alpha if args.alpha is not None else 0.5
        kwargs["p"] = args.p if args.p is not None else 2.0
    elif args.alpha is not None:
        kwargs["alpha"] = args.alpha
    if args.suite == "equivalence" and args.rho is not None:
        kwargs["rho"] = args.rho
    if args.grid_ppd is not None:
        if args.suite == "decomposition":
            kwargs["ppd_list"] = sorted(set([max(args.grid_ppd//4, 1), max(args.grid_ppd//2, 1), args.grid_ppd]))
        elif args.suite in ("chain", "paralin"):
            kwargs["points_per_decade"] = args.grid_ppd

    report = run_suite(args.suite, spaces, **kwargs)
    os.makedirs(args.out, exist_ok=True)
    base = os.path.join(args.out, "suite_{0}".format(args.suite))
    report.export_json(base+".json")
    report.export_csv(base+".csv")
    print(report.statement)


def _report(args):
    _require(args, "in_dir")
    written = aggregate(args.in_dir, args.format or "json", plot_data=bool(args.plot_data), plot=args.plot)
    for filename in written:
        print("Wrote {0}.".format(filename))


def main(argv=None):
    """Runs the command line interface.

    Parameters
    ----------
    argv : list of str, optional
        Arguments. Defaults to sys.argv[1:].

    Returns
    -------
    int
        0 on success, 2 on invalid input, 3 on a numerical failure.
    """
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK

    if args.command is None:
        parser.print_usage()
        return EXIT_VALIDATION

    commands = {"gen" : _gen, "probe" : _probe, "suite" : _suite, "report" : _report}
    try:
        args = _merge_config(args)
        commands[args.command](args)
    except ValidationError as e:
        print(e, file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as e:
        print(e, file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK
