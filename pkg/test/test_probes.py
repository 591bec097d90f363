import json
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dircalc.generators import torus_grid, path, dumbbell, binary_tree
from dircalc.calculus import decompose
from dircalc.probes import (ProbeReport, VALID_TAGS, volume_doubling_probe, due_ue_probe, gradient_bound_probe,
                            riesz_probe, poincare_probe, degiorgi_probe, holder_probe, offdiagonal_probe,
                            ahlfors_probe, imaginary_power_probe, embedding_probe, smoothing_gradient_probe,
                            run_probe)
from dircalc.exceptions import ValidationError


@pytest.fixture(scope="module")
def ring():
    space = torus_grid(d=1, n=64)
    return space, decompose(space)


@pytest.fixture(scope="module")
def small_ring():
    space = torus_grid(d=1, n=32)
    return space, decompose(space)


def test_report_requires_valid_tag():
    with pytest.raises(ValidationError):
        ProbeReport(tag="XYZ")


def test_report_fit_keys_always_present():

    # Load report
    report = ProbeReport(tag="Gp", fit={"constant" : 2.0})

    # Check
    assert report.fit == {"exponent" : None, "constant" : 2.0, "residual" : None, "r2" : None}


def test_report_export(tmp_path):

    # Export report
    report = ProbeReport(tag="VD", params={"b" : 1, "a" : np.float64(2.0)}, fit={"exponent" : 1.0},
                         extra={"values" : np.arange(3)}, points=np.array([[1.0, 2.0], [3.0, 4.0]]),
                         point_columns=["r", "V"])
    report.export_json(str(tmp_path / "vd.json"))
    report.export_csv(str(tmp_path / "vd.csv"))

    # Check
    with open(str(tmp_path / "vd.json"), 'r') as input_handle:
        data = json.load(input_handle)
    assert data["tag"] == "VD"
    assert data["params"] == {"a" : 2.0, "b" : 1}
    assert data["extra"]["values"] == [0, 1, 2]
    with open(str(tmp_path / "vd.csv"), 'r') as input_handle:
        assert input_handle.readline().strip() == "r,V"
    assert_allclose(np.loadtxt(str(tmp_path / "vd.csv"), delimiter=",", skiprows=1), [[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(ValidationError):
        report.export_json(str(tmp_path / "vd.txt"))


def test_run_probe_rejects_unknown_tag(ring):
    space, spec = ring
    with pytest.raises(ValidationError):
        run_probe("Doubling", space, spec)
    assert "VD" in VALID_TAGS


def test_volume_doubling_ring():

    # Probe
    space = torus_grid(d=1, n=200)
    report = volume_doubling_probe(space)

    # Check
    assert report.tag == "VD"
    assert abs(report.fit["exponent"]-1.0) < 0.1
    assert report.space_hash == space.hash


def test_gradient_bound_exact_at_two(ring):

    # Probe
    space, spec = ring
    report = gradient_bound_probe(space, spec, 2.0)

    # Check
    assert report.fit["constant"] == pytest.approx(1.0/np.sqrt(2.0*np.e), abs=1e-9)
    assert max(report.extra["per_time"]) <= report.fit["constant"]*(1.0+1e-12)
    assert report.extra["exact"]


def test_gradient_bound_other_exponents():

    # Load space
    space = path(n=8)
    spec = decompose(space)
    times = [0.5, 1.0, 2.0]

    # Exact at p = 1
    report = gradient_bound_probe(space, spec, 1.0, times)
    assert report.extra["exact"]
    assert report.fit["constant"] > 0.0

    # Bracket at p = inf
    report = gradient_bound_probe(space, spec, np.inf, times)
    assert np.all(np.array(report.extra["per_time"]) <= np.array(report.extra["per_time_upper"])*(1.0+1e-12))

    # Lower bound otherwise
    report = gradient_bound_probe(space, spec, 3.0, times, starts=2)
    assert not report.extra["exact"]
    assert report.fit["constant"] > 0.0

    # Check
    with pytest.raises(ValidationError):
        gradient_bound_probe(space, spec, 0.5, times)


def test_riesz_constants_at_two(ring):

    # Probe
    space, spec = ring
    report = riesz_probe(space, spec, 2.0)

    # ||grad f||_2 = ||L^(1/2) f||_2
    assert report.extra["R"] == pytest.approx(1.0, rel=1e-10)
    assert report.extra["RR"] == pytest.approx(1.0, rel=1e-10)
    assert riesz_probe(space, spec, 2.0, tag="Ep").fit["constant"] == pytest.approx(1.0, rel=1e-10)


def test_riesz_validation(ring):
    space, spec = ring
    with pytest.raises(ValidationError):
        riesz_probe(space, spec, 1.0)
    with pytest.raises(ValidationError):
        riesz_probe(space, spec, 2.0, tag="Gp")
    with pytest.raises(ValidationError):
        riesz_probe(space, spec, 2.0, ensemble=[np.ones(space.N)])


def test_heat_kernel_bounds(ring):

    # Probe
    space, spec = ring
    due = due_ue_probe(space, spec, tag="DUE")
    ue = due_ue_probe(space, spec, tag="UE")

    # Check
    assert 0.0 < due.fit["constant"] < 10.0
    assert 1.0 < ue.fit["constant"] < np.inf
    assert ue.extra["due_constant"] == pytest.approx(due.fit["constant"])
    assert ue.points.shape[1] == 3


def test_heat_kernel_validation(ring):

    # Load space
    space, spec = ring

    # Check
    with pytest.raises(ValidationError):
        due_ue_probe(space, spec, tag="Gp")
    with pytest.raises(ValidationError):
        due_ue_probe(space, spec, m=1.0)
    with pytest.warns(UserWarning):
        due_ue_probe(space, spec, times=[space.h**2/10.0, 4.0*space.h**2, 16.0*space.h**2])


def test_heat_kernel_raw_on_small_spaces():

    # Load space
    space = path(n=6)
    spec = decompose(space)

    # Check
    report = due_ue_probe(space, spec, times=[1.0, 4.0], tag="DUE")
    assert len(report.extra["raw"]) == 2
    assert report.extra["raw"][0]["kernel"].shape == (6, 6)


def test_poincare_whole_path():

    # Load space
    n = 10
    space = path(n=n)

    # The ball of radius diam is the whole path
    report = poincare_probe(space, 2.0, [space.diameter])
    lam_1 = 2.0-2.0*np.cos(np.pi/n)
    assert report.fit["constant"] == pytest.approx(1.0/((n-1)*np.sqrt(lam_1)), rel=1e-10)


def test_poincare_other_exponent():

    # Load space
    space = dumbbell(d=2, n=3, neck=2)
    spec = decompose(space)

    # Check
    report = poincare_probe(space, 1.5, spec=spec)
    assert report.fit["constant"] > 0.0
    assert len(report.extra["per_radius"]) == len(report.samples["radii"])


def test_gradient_bound_bottleneck_at_infinity():

    # Matched mesh h = 1/4
    torus = torus_grid(d=2, n=4)
    bell = dumbbell(d=2, n=4)

    # Check
    torus_report = gradient_bound_probe(torus, decompose(torus), np.inf)
    bell_report = gradient_bound_probe(bell, decompose(bell), np.inf)
    assert bell_report.fit["constant"] > torus_report.fit["constant"]


def test_poincare_dumbbell_grows_with_block_size():

    # Fixed mesh, growing blocks; the ball of radius diam spans the neck
    constants = []
    for n in [4, 8]:
        space = dumbbell(d=3, n=n, neck=2, h=0.25)
        report = poincare_probe(space, 2.0, [space.diameter], max_centers=2)
        constants.append(report.fit["constant"])

    # Torus on the same mesh for reference
    torus = torus_grid(d=3, n=4, h=0.25)
    reference = poincare_probe(torus, 2.0, [torus.diameter], max_centers=2).fit["constant"]

    # Check
    assert constants[1] > 1.2*constants[0]
    assert constants[0] > reference


def test_poincare_validation():

    # Load space
    space = path(n=10)

    # Check
    with pytest.raises(ValidationError):
        poincare_probe(space, np.inf)
    with pytest.warns(UserWarning):
        poincare_probe(space, 2.0, [0.5, 4.0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ValidationError):
            poincare_probe(space, 2.0, [0.5])


def test_degiorgi(small_ring):

    # Probe
    space, spec = small_ring
    report = degiorgi_probe(space, spec, pairs=[(2*space.h, 2*space.h), (2*space.h, 4*space.h), (2*space.h, 8*space.h)])

    # Check
    assert 0.0 <= report.extra["kappa"] <= 1.0
    assert report.fit["constant"] > 0.0
    with pytest.raises(ValidationError):
        degiorgi_probe(space, spec, pairs=[(0.1, 0.2), (0.2, 0.4)])


def test_holder_exponent_positive(ring):

    # Probe
    space, spec = ring
    report = holder_probe(space, spec, 2.0, 2.0)

    # Check
    assert report.tag == "H"
    assert report.fit["exponent"] > 0.0
    assert report.extra["exact"]


def test_holder_localized_chain(small_ring):

    # Probe
    space, spec = small_ring
    report = run_probe("Hbar", space, spec, {"p" : 2.0})

    # Check
    assert report.tag == "Hbar"
    assert set(report.extra["chain"].keys()) == {"eta_pp", "eta_1inf", "eta_qq", "consistent"}
    with pytest.raises(ValidationError):
        holder_probe(space, spec, 2.0, 2.0, pairs=[(0.1, 0.2), (0.2, 0.4)])


def test_heat_offdiagonal_decay(ring):

    # Probe
    space, spec = ring
    report = offdiagonal_probe(space, spec, "heat", 2.0, 2.0, 16.0*space.h**2)

    # Heat contracts L^2 and decays with distance
    assert report.extra["exact"]
    assert report.extra["rate"] > 0.0
    assert np.max(report.points[:,1]) <= 1.0+1e-12


def test_gradient_offdiagonal(ring):

    # Probe
    space, spec = ring
    report = offdiagonal_probe(space, spec, "grad_heat", 2.0, 2.0, 16.0*space.h**2)

    # Check
    assert report.extra["exact"]
    assert report.extra["order"] > 0.0


def test_offdiagonal_validation(ring):

    # Load space
    space, spec = ring
    t = 16.0*space.h**2

    # Check
    with pytest.raises(ValidationError):
        offdiagonal_probe(space, spec, "wave", 2.0, 2.0, t)
    with pytest.raises(ValidationError):
        offdiagonal_probe(space, spec, "K", 2.0, 2.0, t)
    with pytest.raises(ValidationError):
        offdiagonal_probe(space, spec, "heat", 2.0, 2.0, -t)
    with pytest.raises(ValidationError):
        offdiagonal_probe(space, spec, "heat", 2.0, 2.0, t, min_pairs=1000)


def test_kernel_probes_through_dispatch(small_ring):

    # Probe
    space, spec = small_ring
    decay = run_probe("KernelDecay", space, spec, {"D" : 8})
    offdiag = run_probe("OffDiag", space, spec, {"family" : "K", "D" : 8})

    # Check
    assert decay.tag == "KernelDecay"
    assert decay.params["D"] == 8
    assert offdiag.params["family"] == "K"


def test_ahlfors_lattice_balls():

    # Load space
    space = torus_grid(d=2, n=32)
    radii = [k*space.h for k in range(2, 7)]

    # l^1 balls of radius k h hold 2k^2+2k+1 sites
    report = ahlfors_probe(space, radii, nu=2.0)
    assert report.extra["c2"] == pytest.approx(13.0/4.0)
    assert report.extra["c1"] == pytest.approx(85.0/36.0)
    assert report.fit["constant"] == pytest.approx((13.0/4.0)/(85.0/36.0))


def test_ahlfors_validation():

    # Load space
    space = path(n=10, h=0.1)

    # Check
    with pytest.warns(UserWarning):
        ahlfors_probe(space, [0.2, 0.4, 2.0], nu=1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ValidationError):
            ahlfors_probe(space, [0.05], nu=1.0)


def test_ahlfors_single_radius_degenerate():

    # Load space
    space = torus_grid(d=2, n=16)

    # Every center sees the same ball on the torus
    report = ahlfors_probe(space, [3.0*space.h], nu=2.0)
    assert report.extra["degenerate"]
    assert report.extra["c1"] == pytest.approx(report.extra["c2"])
    assert report.fit["constant"] == pytest.approx(1.0)


def test_ahlfors_tree_fails_and_grows():

    # Unit edges leave no scale in (h, 1]
    shallow = ahlfors_probe(binary_tree(depth=3), nu=1.0)
    deep = ahlfors_probe(binary_tree(depth=5), nu=1.0)

    # Check
    for report in [shallow, deep]:
        assert report.extra["window"] == "(h,diam]"
        assert report.extra["ahlfors_holds"] is False
        assert np.all(report.samples["radii"] > 1.0)
    assert deep.fit["constant"] > shallow.fit["constant"]

    # Fitted exponent path runs as well
    fitted = ahlfors_probe(binary_tree(depth=4))
    assert fitted.extra["ahlfors_holds"] is False
    assert np.isfinite(fitted.fit["constant"])


def test_ahlfors_unit_window_on_fine_mesh():

    # Load space
    space = torus_grid(d=2, n=16)

    # Check
    report = ahlfors_probe(space, [2.0*space.h, 4.0*space.h], nu=2.0)
    assert report.extra["window"] == "(h,1]"
    assert report.extra["ahlfors_holds"] is None


def test_imaginary_powers_unitary_at_two(small_ring):

    # Probe
    space, spec = small_ring
    report = imaginary_power_probe(space, spec, 2.0, nu=1.0)

    # Check
    assert report.fit["exponent"] == pytest.approx(0.0, abs=1e-8)
    assert report.fit["constant"] == pytest.approx(1.0, rel=1e-8)
    assert report.extra["reference_exponent"] == 0.5


def test_embedding(small_ring):

    # Probe
    space, spec = small_ring
    report = embedding_probe(space, spec, 0.9, 4.0, [0.1, 0.2], nu=1.0)

    # Check
    assert report.extra["limit"] == pytest.approx(0.65)
    assert len(report.extra["per_order"]) == 2
    with pytest.warns(UserWarning):
        embedding_probe(space, spec, 0.5, 2.0, [0.1], nu=1.0)


def test_smoothing_gradient(small_ring):

    # Probe
    space, spec = small_ring
    report = smoothing_gradient_probe(space, spec, 0.5)

    # Check
    assert report.extra["reference_exponent"] == pytest.approx(0.25)
    assert np.all(np.array(report.extra["norms"]) > 0.0)
    assert report.fit["exponent"] > 0.0


def test_run_probe_reports_are_deterministic(small_ring):

    # Probe twice
    space, spec = small_ring
    first = run_probe("Rp", space, spec, {"p" : 3.0}, seed=4).to_dict()
    second = run_probe("Rp", space, spec, {"p" : 3.0}, seed=4).to_dict()

    # Check
    assert json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)
    assert first["seed"] == 4
