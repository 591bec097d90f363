import os
import json

import numpy as np
import pytest

from dircalc.cli import main
from dircalc.space import DirichletSpace
from dircalc.generators import torus_grid


def test_gen_writes_space(tmp_path):

    # Generate
    filename = str(tmp_path / "ring.json")
    code = main(["gen", "--kind", "torus_grid", "--d", "1", "--n", "12", "--out", filename])

    # Check
    assert code == 0
    space = DirichletSpace(space_file=filename)
    assert space.N == 12
    assert space.hash == torus_grid(d=1, n=12).hash


def test_gen_params_json(tmp_path):

    # Generate
    filename = str(tmp_path / "tree.json")
    code = main(["gen", "--kind", "binary_tree", "--params", '{"depth": 2}', "--out", filename])

    # Check
    assert code == 0
    assert DirichletSpace(space_file=filename).N == 7


def test_gen_invalid_params(tmp_path):
    assert main(["gen", "--kind", "torus_grid", "--d", "0", "--n", "4", "--out", str(tmp_path / "x.json")]) == 2
    assert main(["gen", "--kind", "torus_grid", "--params", "[1, 2]", "--out", str(tmp_path / "x.json")]) == 2
    assert main(["gen", "--kind", "torus_grid"]) == 2


def test_probe_unknown_tag(tmp_path):

    # Generate
    filename = str(tmp_path / "ring.json")
    torus_grid(d=1, n=12).export_json(filename)

    # Check
    assert main(["probe", "--space", filename, "--hypothesis", "Doubling", "--out", str(tmp_path / "p.json")]) == 2


def test_probe_writes_report(tmp_path):

    # Generate
    filename = str(tmp_path / "ring.json")
    torus_grid(d=1, n=16).export_json(filename)
    out = str(tmp_path / "g2.json")

    # Probe
    code = main(["probe", "--space", filename, "--hypothesis", "Gp", "--params", '{"p": 2}', "--out", out])

    # Check
    assert code == 0
    with open(out, 'r') as input_handle:
        data = json.load(input_handle)
    assert data["tag"] == "Gp"
    assert data["fit"]["constant"] == pytest.approx(1.0/np.sqrt(2.0*np.e))
    assert os.path.isfile(str(tmp_path / "g2.csv"))


def test_missing_space_file(tmp_path):
    assert main(["probe", "--space", str(tmp_path / "none.json"), "--hypothesis", "VD", "--out", str(tmp_path / "p.json")]) == 2


def test_config_file_fills_options(tmp_path):

    # Write config
    config = str(tmp_path / "config.json")
    filename = str(tmp_path / "ring.json")
    with open(config, 'w') as export_handle:
        json.dump({"kind" : "path", "n" : 5, "out" : filename}, export_handle)

    # Check
    assert main(["--config", config, "gen"]) == 0
    assert DirichletSpace(space_file=filename).N == 5


def test_suite_and_report(tmp_path):

    # Generate family
    spaces = []
    for n in [16, 32]:
        filename = str(tmp_path / "ring_{0}.json".format(n))
        torus_grid(d=1, n=n).export_json(filename)
        spaces.append(filename)
    out = str(tmp_path / "reports")

    # Run suite
    code = main(["suite", "--spaces"]+spaces+["--suite", "algebra", "--samples", "4", "--out", out])
    assert code == 0
    assert os.path.isfile(os.path.join(out, "suite_algebra.json"))
    assert os.path.isfile(os.path.join(out, "suite_algebra.csv"))

    # Aggregate
    code = main(["report", "--in", out, "--format", "csv", "--plot-data"])
    assert code == 0
    table = np.genfromtxt(os.path.join(out, "summary.csv"), delimiter=",", names=True, dtype=None, encoding=None)
    assert len(table) == 2
    assert os.path.isfile(os.path.join(out, "trend.csv"))

    # JSON summary
    assert main(["report", "--in", out]) == 0
    with open(os.path.join(out, "summary.json"), 'r') as input_handle:
        data = json.load(input_handle)
    assert data["columns"][0] == "report"
    assert len(data["rows"]) == 2


def test_report_rejects_missing_directory(tmp_path):
    assert main(["report", "--in", str(tmp_path / "missing")]) == 2


def test_usage_errors():
    assert main([]) == 2
    assert main(["gen", "--kind", "moebius"]) == 2
