import json
import math

import numpy as np
import pytest

from stiffnav.classifier import (FIXTURES, AxisClass, ClassifierThresholds, Motion, Stiffness, classify_axis,
                                 default_thresholds, identify_constraint, lever_arm, load_fixture,
                                 screws_from_eigendata)
from stiffnav.env import finite_difference_stiffness, make_scenario
from stiffnav.screw import InvalidInputError, angle_between_lines
from stiffnav.stiffness import Eigenscrew, principal_axes

TH = ClassifierThresholds()


def _axis(e, lam, pitch=None):
    return Eigenscrew.from_vector(e, lam, "axis", pitch)


@pytest.mark.parametrize("pitch,lam,motion,stiff,cell", [
    (0.0, 1.0, Motion.TRANSLATIONAL, Stiffness.FREE, "Free Translation"),
    (0.0, 500.0, Motion.TRANSLATIONAL, Stiffness.COMPLIANT, "Linear Spring"),
    (0.0, 1e5, Motion.TRANSLATIONAL, Stiffness.RIGID, "Rigid, Translational"),
    (math.inf, 0.01, Motion.ROTATIONAL, Stiffness.FREE, "Free Rotation"),
    (math.inf, 2.0, Motion.ROTATIONAL, Stiffness.COMPLIANT, "Torsion Spring"),
    (5.0, 100.0, Motion.ROTATIONAL, Stiffness.RIGID, "Rigid, Rotational"),
    (0.3, 200.0, Motion.SCREW, Stiffness.COMPLIANT, "Screw Spring"),
])
def test_axis_table(pitch, lam, motion, stiff, cell):
    c = classify_axis(_axis([1, 0, 0, 0, 0, 0], lam, pitch), TH)
    assert c == AxisClass(motion, stiff) and c.cell == cell


def test_pitch_band_edges_are_exclusive():
    assert classify_axis(_axis(np.eye(6)[0], 50, 0.1), TH).motion is Motion.SCREW
    assert classify_axis(_axis(np.eye(6)[0], 50, 0.5), TH).motion is Motion.SCREW


def test_shipped_thresholds_equal_defaults():
    assert default_thresholds() == ClassifierThresholds()


def test_threshold_validation():
    with pytest.raises(InvalidInputError):
        ClassifierThresholds(gamma_theta=0.6, gamma_x=0.5)
    with pytest.raises(InvalidInputError):
        ClassifierThresholds(dominance_ratio=1.0)


def test_lever_arm():
    assert lever_arm(_axis(np.eye(6)[3], 0.344), _axis(np.eye(6)[1], 200.3)) == pytest.approx(0.04144, abs=1e-5)
    with pytest.raises(InvalidInputError):
        lever_arm(_axis(np.eye(6)[3], 1.0), _axis(np.eye(6)[1], 0.0))


@pytest.mark.parametrize("name", FIXTURES)
def test_fixtures_get_their_labels(name):
    d = load_fixture(name)
    assert identify_constraint(screws_from_eigendata(d)).kind == d["expected_label"]


def test_hinge_fixture_parameters():
    label = identify_constraint(screws_from_eigendata(load_fixture("flexible_hinge")))
    assert label.params["lever_arm"] == pytest.approx(math.sqrt(0.344 / 200.3))
    # compliant rotation lies near the xz diagonal
    assert angle_between_lines(label.params["hinge_axis"]["direction"], [1, 0, 1]) < 10


def test_line_spring_fixture_direction_roughly_along_spring():
    label = identify_constraint(screws_from_eigendata(load_fixture("line_spring")))
    assert angle_between_lines(label.params["spring_axis"]["direction"], [0.15, 0.10, 0.071]) < 40


def test_membrane_fixture_normal_is_compliant_force_axis():
    d = load_fixture("membrane")
    label = identify_constraint(screws_from_eigendata(d))
    f = np.asarray(d["axes"][2][:3])
    assert angle_between_lines(label.params["normal"], f) < 1e-6


@pytest.mark.parametrize("name,kind", [("line_spring", "LinearSpringConstraint"),
                                       ("flexible_hinge", "FlexibleHinge"), ("membrane", "Membrane")])
def test_simulated_scenes_identified(name, kind):
    sc = make_scenario(name)
    label = identify_constraint(principal_axes(finite_difference_stiffness(sc, sc.equilibrium_pose)))
    assert label.kind == kind


def test_simulated_hinge_lever_arm_matches_geometry():
    arm = 0.1
    sc = make_scenario("flexible_hinge", arm=arm)
    label = identify_constraint(principal_axes(finite_difference_stiffness(sc, sc.equilibrium_pose)))
    assert label.params["lever_arm"] == pytest.approx(arm, rel=0.1)
    assert angle_between_lines(label.params["hinge_axis"]["direction"], [1, 0, 0]) < 1


def test_simulated_line_spring_direction():
    sc = make_scenario("line_spring")
    label = identify_constraint(principal_axes(finite_difference_stiffness(sc, sc.equilibrium_pose)))
    assert angle_between_lines(label.params["spring_axis"]["direction"], [0.15, 0.10, 0.071]) < 1e-3


def test_unknown_cases():
    assert identify_constraint([_axis(np.eye(6)[0], 1.0)] * 2).kind == "Unknown"
    assert identify_constraint(principal_axes(np.zeros((6, 6)))).kind == "Unknown"
    iso = principal_axes(np.diag([100.0, 100, 100, 1, 1, 1]))
    label = identify_constraint(iso)
    assert label.kind == "Unknown" and "no rule fired" in label.diagnostic


def test_malformed_eigendata():
    with pytest.raises(InvalidInputError):
        screws_from_eigendata({"eigenvalues": [1, 2], "axes": [[1, 0, 0, 0, 0, 0]]})
    with pytest.raises(InvalidInputError):
        screws_from_eigendata({"axes": []})
    with pytest.raises(InvalidInputError):
        load_fixture("trampoline")


def test_label_json():
    label = identify_constraint(screws_from_eigendata(load_fixture("flexible_hinge")))
    d = json.loads(json.dumps(label.to_dict()))
    assert d["label"] == "FlexibleHinge"


def _hinge_axes(angle_deg):
    """Hinge-like axes whose compliant rotation and translation meet at ``angle_deg``."""
    t = math.radians(angle_deg)
    rot_dir = np.array([math.cos(t), math.sin(t), 0.0])
    return [
        _axis([1, 0, 0, 0, 0, 0], 200.0, 0.0), _axis([0, 1, 0, 0, 0, 0], 1500.0, 0.0),
        _axis([0, 0, 1, 0, 0, 0], 1500.0, 0.0), _axis(np.r_[0, 0, 0, rot_dir], 2.0, math.inf),
        _axis([0, 0, 0, 0, 0, 1], 15.0, math.inf), _axis(np.r_[0, 0, 0, -rot_dir[1], rot_dir[0], 0], 15.0, math.inf),
    ]


@pytest.mark.parametrize("off,is_hinge", [(14.0, True), (16.0, False)])
def test_hinge_perpendicularity_boundary(off, is_hinge):
    assert (identify_constraint(_hinge_axes(90.0 - off)).kind == "FlexibleHinge") is is_hinge


def test_scaling_eigenvalues_never_softens_an_axis():
    order = {Stiffness.FREE: 0, Stiffness.COMPLIANT: 1, Stiffness.RIGID: 2}
    for pitch in (0.0, 0.3, math.inf):
        for lam in np.logspace(-3, 4, 30):
            base = classify_axis(_axis(np.eye(6)[0], lam, pitch), TH).stiffness
            for c in (1.5, 10.0, 1e3):
                assert order[classify_axis(_axis(np.eye(6)[0], c * lam, pitch), TH).stiffness] >= order[base]


@pytest.mark.parametrize("name", FIXTURES)
def test_identification_invariant_to_order_and_sign(name, rng):
    screws = screws_from_eigendata(load_fixture(name))
    base = identify_constraint(screws).kind
    for _ in range(5):
        perm = rng.permutation(len(screws))
        shuffled = [Eigenscrew.from_vector(-screws[i].e if rng.random() < 0.5 else screws[i].e, screws[i].lam,
                                           "axis", screws[i].pitch_w) for i in perm]
        assert identify_constraint(shuffled).kind == base
