"""Aggregation of probe and suite reports written to a directory."""

import os
import glob
import json

import numpy as np

from dircalc.exceptions import ValidationError
from dircalc.helpers import to_jsonable


SUMMARY_COLUMNS = ("report", "kind", "tag", "space_index", "n", "h", "max", "median", "min", "exponent", "constant", "r2")


def load_reports(directory):
    """Reads every *.json report in a directory, sorted by filename.

    Summary files written by aggregate() are skipped.

    Returns
    -------
    list
        (filename, report dictionary) tuples.
    """
    if not os.path.isdir(directory):
        raise ValidationError("{0} is not a directory.".format(directory))
    reports = []
    for filename in sorted(glob.glob(os.path.join(directory, "*.json"))):
        if os.path.basename(filename) == "summary.json":
            continue
        try:
            with open(filename, 'r') as input_handle:
                data = json.load(input_handle)
        except json.JSONDecodeError as e:
            raise ValidationError("Could not parse {0}: {1}".format(filename, e))
        if "suite" not in data and "tag" not in data:
            raise ValidationError("{0} is neither a probe nor a suite report.".format(filename))
        reports.append((os.path.basename(filename), data))
    return reports


def summary_rows(reports):
    """Flattens reports into rows with SUMMARY_COLUMNS. Suite reports give one row per space."""
    rows = []
    nan = float("nan")
    for name, data in reports:
        if "suite" in data:
            for i, s in enumerate(data["spaces"]):
                rows.append((name, "suite", data["suite"], i, s["n"], s["h"], s["max"], s["median"], s["min"], nan, nan, nan))
        else:
            fit = data["fit"]
            values = [nan if fit.get(key) is None else fit[key] for key in ("exponent", "constant", "r2")]
            rows.append((name, "probe", data["tag"], -1, 0, nan, nan, nan, nan, values[0], values[1], values[2]))
    return rows


def trend_rows(reports):
    """Rows (report, space_index, h, max, median) of the suite reports, for refinement plots."""
    rows = []
    for name, data in reports:
        if "suite" in data:
            for i, s in enumerate(data["spaces"]):
                rows.append((name, i, s["h"], s["max"], s["median"]))
    return rows


def _write_table(filename, rows, item_types, format_string):
    # Structured array written with a header line
    table_data = np.zeros(len(rows), dtype=item_types)
    for i, row in enumerate(rows):
        table_data[i] = row
    header = ",".join([name for name, _ in item_types])
    np.savetxt(filename, table_data, fmt=format_string, delimiter=",", header=header, comments="")


def write_summary_csv(filename, rows):
    """Writes summary rows to a CSV file."""
    item_types = [("report", "U128"),
                  ("kind", "U8"),
                  ("tag", "U32"),
                  ("space_index", "int"),
                  ("n", "int"),
                  ("h", "float"),
                  ("max", "float"),
                  ("median", "float"),
                  ("min", "float"),
                  ("exponent", "float"),
                  ("constant", "float"),
                  ("r2", "float")]
    format_string = ["%s", "%s", "%s", "%d", "%d"]+["%20.12e"]*7
    _write_table(filename, rows, item_types, format_string)


def write_trend_csv(filename, rows):
    """Writes trend rows to a CSV file."""
    item_types = [("report", "U128"),
                  ("space_index", "int"),
                  ("h", "float"),
                  ("max", "float"),
                  ("median", "float")]
    _write_table(filename, rows, item_types, ["%s", "%d", "%20.12e", "%20.12e", "%20.12e"])


def plot_trend(filename, rows):
    """Saves a log-log plot of the per-space maximum and median ratios against h.

    Parameters
    ----------
    filename : str
        PDF file.

    rows : list
        Rows from trend_rows().
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig = plt.figure()
    for name in sorted(set(row[0] for row in rows)):
        sel = [row for row in rows if row[0] == name]
        h = np.array([row[2] for row in sel])
        order = np.argsort(h)
        maxima = np.array([row[3] for row in sel])[order]
        medians = np.array([row[4] for row in sel])[order]
        line = plt.plot(h[order], maxima, 'o-', label="{0} max".format(name))[0]
        plt.plot(h[order], medians, 's--', color=line.get_color(), label="{0} median".format(name))
    plt.xscale('log')
    plt.yscale('log')
    plt.xlabel('$h$')
    plt.ylabel('Ratio')
    plt.legend(fontsize=6)
    plt.savefig(filename)
    plt.close(fig)


def aggregate(directory, fmt="json", **kwargs):
    """Aggregates the reports in a directory into summary.json or summary.csv.

    Parameters
    ----------
    directory : str
        Directory of reports.

    fmt : str, optional
        "json" or "csv". Defaults to "json".

    plot_data : bool, optional
        Whether to also write trend.csv. Defaults to False.

    plot : str, optional
        PDF file for the refinement plot. Defaults to no plot.

    Returns
    -------
    list of str
        Files written.
    """
    if fmt not in ("json", "csv"):
        raise ValidationError("{0} is not a valid summary format. Valid formats are json, csv.".format(fmt))
    reports = load_reports(directory)
    rows = summary_rows(reports)
    written = []

    filename = os.path.join(directory, "summary.{0}".format(fmt))
    if fmt == "json":
        with open(filename, 'w') as export_handle:
            json.dump(to_jsonable({"columns" : SUMMARY_COLUMNS, "rows" : rows}), export_handle, sort_keys=True, indent=2)
            export_handle.write("\n")
    else:
        write_summary_csv(filename, rows)
    written.append(filename)

    trend = trend_rows(reports)
    if kwargs.get("plot_data", False):
        filename = os.path.join(directory, "trend.csv")
        write_trend_csv(filename, trend)
        written.append(filename)
    plot = kwargs.get("plot", None)
    if plot is not None:
        if ".pdf" not in plot:
            raise ValidationError("Plot filename must contain .pdf extension.")
        plot_trend(plot, trend)
        written.append(plot)
    return written
