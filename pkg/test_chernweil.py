"""Tests for characteristic-class descriptors and Chern-Weil cocycles."""

from fractions import Fraction

import pytest
import sympy as sp

from category import enumerate_nerve
from chernweil import (
    CocycleDescriptor,
    CocycleDescriptorError,
    CocycleKind,
    ConnectionAssignment,
    calibrate_sign,
    chain_rule_omega,
    chern_character_words,
    closed_formula_cocycle,
    connection_homotopy,
    cs_transgression,
    cw_cocycle,
    gauge,
    jacobian_omega,
    omega_h,
    stokes_check,
    string_connection_forms,
)
from cochains import coboundary_value, cochain_product, residual_sweep, total_coboundary
from forms import SmoothMap, compose
from scenario import parse_scenario
from symexpr import chart_symbols

C1 = {(1,): Fraction(1)}

SWEEP = dict(max_k=3, points_per_string=4, string_limit=8)


def _same_matrix(a, b) -> bool:
    for i in range(a.size):
        for j in range(a.size):
            difference = a[i, j] - b[i, j]
            if any(sp.simplify(c) != 0 for c in difference.components.values()):
                return False
    return True


def test_descriptor_parsing():
    assert CocycleDescriptor.parse("c1", 1).polynomial == {(1,): Fraction(1)}
    assert CocycleDescriptor.parse("c1^2", 2).polynomial == {(1, 1): Fraction(1)}
    assert CocycleDescriptor.parse("c1*c2^2", 4).polynomial == {(1, 2, 2): Fraction(1)}
    assert CocycleDescriptor.parse("c1*c2^2", 4).degrees() == [5]
    assert CocycleDescriptor.parse("gv", 2).partition == (1, 1)
    assert CocycleDescriptor.parse("gv:2", 2).kind is CocycleKind.BOTT_GV
    assert CocycleDescriptor.parse("u1", 3).kind is CocycleKind.U1
    assert CocycleDescriptor.parse("ch:2", 1).degrees() == [0, 1, 2]


@pytest.mark.parametrize("text,q", [("gv:1", 2), ("gv:0,1", 1), ("c0", 1), ("ch:x", 1), ("pontryagin", 1),
                                    ("c4^3", 4)])
def test_descriptor_errors(text, q):
    with pytest.raises(CocycleDescriptorError):
        CocycleDescriptor.parse(text, q)


def test_chern_character_words():
    assert chern_character_words(2) == (((), Fraction(1)), ((1,), Fraction(1)), ((2,), Fraction(1, 2)))


def test_moebius_omega():
    """omega of -1/(x+1) is -2 dx/(x+1)."""
    box = ((1, 2),)
    h = SmoothMap.from_text(["-1/(x1+1)"], box, ((-1, 0),))
    x1 = chart_symbols(1)[0]
    assert sp.simplify(jacobian_omega(h)[0, 0].coefficient((0,)) + 2 / (x1 + 1)) == 0


def test_omega_h_examples():
    model = parse_scenario('[model] dim=1, box=[-1/2,1/2]\n[map] id=double, map="2*x1"\n'
                           '[map] id=cubic, map="x1 + x1^3"\n').presentation
    x1 = chart_symbols(1)[0]
    assert omega_h(model.arrow("double")).is_zero()
    assert omega_h(model.arrow("id")).is_zero()
    coefficient = omega_h(model.arrow("cubic"))[0, 0].coefficient((0,))
    assert sp.simplify(coefficient - 6 * x1 / (1 + 3 * x1 ** 2)) == 0


def _string(p, *ids):
    (s,) = [s for s in enumerate_nerve(p, len(ids)) if s.ids == ids]
    return s


def test_string_connection_forms(mobius, bundled):
    trivial = ConnectionAssignment.trivial(1)
    (point,) = [s for s in enumerate_nerve(mobius, 0) if s.source == "A"]
    forms = string_connection_forms(point, trivial)
    assert len(forms) == 1 and forms[0].is_zero()

    affine = bundled("translations-q1").presentation
    assert all(f.is_zero() for f in string_connection_forms(_string(affine, "a"), trivial))

    s = _string(mobius, "a", "b")
    forms = string_connection_forms(s, trivial)
    assert len(forms) == 3
    assert _same_matrix(forms[2], jacobian_omega(compose(s.arrows[1].map, s.arrows[0].map)))
    assert _same_matrix(forms[2], chain_rule_omega(s.arrows[0].map, s.arrows[1].map))


def test_transgression_of_a_point_is_zero(mobius):
    (point,) = [s for s in enumerate_nerve(mobius, 0) if s.source == "B"]
    forms = string_connection_forms(point, ConnectionAssignment.trivial(1))
    assert cs_transgression(C1, forms).is_zero()


def test_transgression_along_one_arrow(mobius):
    """For q = 1 and the trivial connection, cs(c1) on (h) is -Tr omega_h."""
    x1 = chart_symbols(1)[0]
    for arrow_id in ("a", "b", "e_AC"):
        s = _string(mobius, arrow_id)
        cs = cs_transgression(C1, string_connection_forms(s, ConnectionAssignment.trivial(1)))
        trace = omega_h(s.arrows[0]).trace()
        for point in mobius.sample_points(s.source, 5):
            assert (cs + trace).max_abs({x1: point[0]}) < 1e-8
            assert trace.max_abs({x1: point[0]}) > 1e-3


def test_transgression_above_the_codimension_vanishes(mobius):
    """A degree-two polynomial on a single arrow lands in form degree 3 > q."""
    forms = string_connection_forms(_string(mobius, "a"), ConnectionAssignment.trivial(1))
    square = {(1, 1): Fraction(1)}
    assert cs_transgression(square, forms).is_zero()
    assert cs_transgression(square, forms, truncate=False).is_zero()


def test_chain_rule_omega_in_one_dimension(mobius):
    a, b = mobius.arrow("a"), mobius.arrow("b")
    assert _same_matrix(chain_rule_omega(a.map, b.map), jacobian_omega(compose(b.map, a.map)))


def test_chain_rule_omega_in_two_dimensions(planar_model):
    p = planar_model.presentation
    f, g = p.arrow("f").map, p.arrow("g").map
    assert _same_matrix(chain_rule_omega(f, g), jacobian_omega(compose(g, f)))
    assert _same_matrix(chain_rule_omega(g, f), jacobian_omega(compose(f, g)))


def test_gauge_of_trivial_connection_is_omega(mobius):
    h = mobius.arrow("c").map
    zero = ConnectionAssignment.trivial(1).at("C")
    assert _same_matrix(gauge(zero, h), jacobian_omega(h))


def test_u1_is_a_cech_cocycle(mobius):
    """log|det J| of a composite splits along the string."""
    u1 = closed_formula_cocycle(CocycleDescriptor(CocycleKind.U1), mobius)
    x1 = chart_symbols(1)[0]
    for s in enumerate_nerve(mobius, 2):
        value = coboundary_value(u1, 1, 0, s)
        for point in mobius.sample_points(s.source, 4):
            assert value.max_abs({x1: point[0]}) < 1e-12


def test_sign_calibration(mobius):
    calibration = calibrate_sign(mobius, points_per_string=4, string_limit=6)
    assert calibration.sign == -1
    assert calibration.decisive
    assert calibration.other_residual > 1e-3


def test_sign_calibration_on_affine_data(bundled):
    """Translations carry no Jacobian, so the default sign is returned undecided."""
    calibration = calibrate_sign(bundled("translations-q1").presentation, points_per_string=3)
    assert calibration.sign == -1
    assert not calibration.decisive


def test_first_chern_cocycle_is_closed(mobius):
    c1 = cw_cocycle(mobius, CocycleDescriptor.parse("c1", 1))
    assert c1.bidegrees == [(1, 1)]
    assert residual_sweep(total_coboundary(c1), **SWEEP).max_residual < 1e-6


def test_gv_is_closed(mobius):
    gv = closed_formula_cocycle(CocycleDescriptor.parse("gv", 1), mobius)
    assert gv.bidegrees == [(2, 1)]
    assert residual_sweep(total_coboundary(gv), **SWEEP).max_residual < 1e-8


def test_gv_is_minus_u1_times_c1(mobius):
    """In codimension one gv = -U1 . C1 with C1 the Chern-Weil cocycle of the trivial connection."""
    gv = closed_formula_cocycle(CocycleDescriptor.parse("gv", 1), mobius)
    u1 = closed_formula_cocycle(CocycleDescriptor(CocycleKind.U1), mobius)
    c1 = cw_cocycle(mobius, CocycleDescriptor.parse("c1", 1))
    assert residual_sweep(gv + cochain_product(u1, c1), **SWEEP).max_residual < 1e-8


def test_stokes_identity(bundled):
    scenario = bundled("mobius-elliptic3")
    report = stokes_check(scenario.presentation, scenario.connection("bump"), CocycleDescriptor.parse("c1", 1),
                          max_k=3, points_per_string=4, string_limit=8)
    assert report.max_residual < 1e-6
    assert report.components_sampled > 0


def test_connection_homotopy(bundled):
    """D(H) = cw(bump) - cw(trivial)."""
    scenario = bundled("mobius-elliptic3")
    p = scenario.presentation
    descriptor = CocycleDescriptor.parse("c1", 1)
    bump, trivial = scenario.connection("bump"), scenario.connection("trivial")
    homotopy = connection_homotopy(descriptor, bump, trivial, p)
    difference = cw_cocycle(p, descriptor, bump) - cw_cocycle(p, descriptor, trivial)
    assert residual_sweep(total_coboundary(homotopy) - difference, **SWEEP).max_residual < 1e-6


def test_bott_vanishing(bundled):
    """c1^2 has no components in codimension one."""
    scenario = bundled("mobius-elliptic3")
    c = cw_cocycle(scenario.presentation, CocycleDescriptor.parse("c1^2", 1), scenario.connection("bump"))
    assert c.bidegrees == []
    assert residual_sweep(c, **SWEEP).max_residual == 0.0


def test_chern_character_closed_formula(mobius):
    """The direct formula matches the Chern-Weil cocycle of the trivial connection."""
    descriptor = CocycleDescriptor.parse("ch:1", 1)
    closed = closed_formula_cocycle(descriptor, mobius)
    general = cw_cocycle(mobius, descriptor)
    assert closed.bidegrees == general.bidegrees == [(0, 0), (1, 1)]
    assert residual_sweep(closed - general, **SWEEP).max_residual < 1e-8


def test_codimension_two_cocycle_is_closed(planar_model):
    """Non-flat connection on a two-dimensional model."""
    p = planar_model.presentation
    c1 = cw_cocycle(p, CocycleDescriptor.parse("c1", 2), planar_model.connection("twist"), max_k=2)
    assert c1.bidegrees == [(0, 2), (1, 1)]
    report = residual_sweep(total_coboundary(c1), max_k=2, points_per_string=3, string_limit=4)
    assert report.max_residual < 1e-6


def test_connection_shape_is_checked(planar_model):
    with pytest.raises(CocycleDescriptorError):
        ConnectionAssignment(1, {"R": planar_model.connection("twist").at("R")})
