"""Tests for the collapse to constant coefficients and the Thurston formula."""

import math

import mpmath
import pytest
import sympy as sp

from chernweil import CocycleDescriptor, closed_formula_cocycle
from cochains import CDRCochain
from collapse import (
    CubePathError,
    cech_cocycle_check,
    collapse_check,
    collapse_cocycle,
    collapse_sign,
    cube_map,
    cube_symbols,
    sample_model_strings,
    thurston_cochain,
    thurston_gv,
)
from scenario import parse_scenario

CLOSED_FORM = 2 * math.log(2) * math.log(8 / 9)


def _model(maps, box="[-1/2,1/2]"):
    lines = [f"[model] dim=1, box={box}"]
    lines += [f'[map] id={name}, map="{text}"' for name, text in maps.items()]
    return parse_scenario("\n".join(lines) + "\n").presentation


def test_cube_map_nests_scalings():
    """sigma1 = x+1, sigma2 = x+2 give (tau1 + 2) tau2."""
    model = _model({"s1": "x1+1", "s2": "x1+2"}, box="[-5,5]")
    cube = cube_map([model.arrow("s1"), model.arrow("s2")], model.box)
    tau1, tau2 = cube_symbols(2)
    assert sp.expand(cube.components[0] - (tau1 + 2) * tau2) == 0
    assert cube.s == 2
    single = cube_map([model.arrow("s2")])
    assert single.components[0] == 2 * cube_symbols(1)[0]


def test_cube_path_leaving_the_box():
    model = _model({"big": "x1+1", "r": "(10*x1+1)/(10-x1)"})
    with pytest.raises(CubePathError) as info:
        cube_map([model.arrow("big")], model.box)
    assert info.value.s == 1
    gv = closed_formula_cocycle(CocycleDescriptor.parse("gv", 1), model)
    with pytest.raises(CubePathError):
        collapse_cocycle(gv, model, ("big", "r", "r"))


def test_collapse_signs():
    assert collapse_sign(3, 1) == 1
    assert collapse_sign(3, 0) == -1
    assert collapse_sign(2, 2) == -1
    assert collapse_sign(1, 1) == 1


def test_thurston_closed_form(rotations):
    """Translation, dilation, Moebius: 2 log 2 log(8/9)."""
    value = thurston_gv(rotations.arrow("p1"), rotations.arrow("d2"), rotations.arrow("m4"))
    assert value == pytest.approx(CLOSED_FORM, abs=1e-9)
    assert CLOSED_FORM == pytest.approx(-0.163281958, abs=1e-9)


def test_thurston_vanishing_cases(rotations):
    """An affine third map or a first map fixing 0 gives zero."""
    assert thurston_gv(rotations.arrow("r2"), rotations.arrow("r1"), rotations.arrow("a1")) == 0.0
    assert thurston_gv(rotations.arrow("d2"), rotations.arrow("r1"), rotations.arrow("r2")) == 0.0
    assert thurston_gv(rotations.arrow("r1"), rotations.arrow("id"), rotations.arrow("r2")) == 0.0


def test_thurston_with_affine_middle_map(rotations):
    """For affine sigma2 the integral telescopes to log|a| times a difference of log sigma3'."""
    value = thurston_gv(rotations.arrow("r1"), rotations.arrow("a1"), rotations.arrow("r2"))
    expected = 2 * math.log(0.5) * math.log(4.9 / 4.85)
    assert value == pytest.approx(expected, abs=1e-9)


def test_thurston_against_mpmath(rotations):
    """Independent quadrature of the rotation triple r1, r2, r3."""
    mpmath.mp.dps = 30

    def g(x):
        return (5 * x + 1) / (5 - x)

    def integrand(x):
        dg = 26 / (5 - x) ** 2
        return mpmath.log(dg) * (-2 / (20 + g(x))) * dg

    oracle = float(mpmath.quad(integrand, [0, mpmath.mpf(1) / 10]))
    value = thurston_gv(rotations.arrow("r1"), rotations.arrow("r2"), rotations.arrow("r3"))
    assert value == pytest.approx(oracle, abs=1e-9)


def test_thurston_pole_is_reported():
    model = _model({"p": "x1+1/4", "inv": "1/x1", "r": "(10*x1+1)/(10-x1)"})
    with pytest.raises(CubePathError):
        thurston_gv(model.arrow("p"), model.arrow("inv"), model.arrow("r"))


def test_collapse_matches_thurston(rotations):
    triples = [("r1", "r2", "r3"), ("r2", "r3", "r4"), ("p1", "d2", "m4"), ("r2", "r1", "a1")]
    report = collapse_check(rotations, triples)
    assert report.max_discrepancy < 1e-5
    assert report.collapse_values[2] == pytest.approx(CLOSED_FORM, abs=1e-6)
    assert report.cocycle_residual is None


def test_thurston_cocycle_identity(rotations):
    report = collapse_check(rotations, [("r1", "r2", "r3")], cocycle_samples=20,
                            cocycle_maps=["r1", "r2", "r3", "r4"])
    assert report.cocycle_residual < 1e-4


def test_cech_cocycle_check_on_strings(rotations):
    strings = sample_model_strings(rotations, 4, 6, ["r1", "r2", "r3", "r4"])
    assert all(s.degree == 4 for s in strings)
    assert [s.ids for s in strings] == [s.ids for s in sample_model_strings(rotations, 4, 6, ["r1", "r2", "r3", "r4"])]
    zero = cech_cocycle_check(lambda s: 0.0, 3, strings, rotations)
    assert zero.max_residual == 0.0
    report = cech_cocycle_check(thurston_cochain(rotations), 3, strings, rotations)
    assert report.max_residual < 1e-4
    with pytest.raises(ValueError):
        cech_cocycle_check(lambda s: 0.0, 2, strings, rotations)


def test_collapse_is_linear(rotations):
    gv = closed_formula_cocycle(CocycleDescriptor.parse("gv", 1), rotations)
    ids = ("r1", "r2", "r3")
    assert collapse_cocycle(CDRCochain(rotations, {}), rotations, ids) == 0.0
    single = collapse_cocycle(gv, rotations, ids)
    tripled = collapse_cocycle(gv.scale(3), rotations, ids)
    assert tripled == pytest.approx(3 * single, abs=1e-9)
