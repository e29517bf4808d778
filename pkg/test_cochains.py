"""Tests for Čech-De Rham cochains, the total coboundary and products."""

import pytest

from category import enumerate_nerve
from cochains import (
    CDRCochain,
    ResidualReport,
    cochain_product,
    combine,
    constant_cochain,
    leibniz_check,
    residual_sweep,
    total_coboundary,
)
from chernweil import CocycleDescriptor, CocycleKind, closed_formula_cocycle, cw_cocycle
from forms import DifferentialForm
from symexpr import chart_symbols

x1 = chart_symbols(1)[0]
SWEEP = dict(max_k=3, points_per_string=4, string_limit=8)


def _function(p, offsets, power=2):
    """A (0, 0) cochain x1^power + offset per chart."""
    return CDRCochain(p, {(0, 0): lambda s: DifferentialForm.scalar((x1,), x1 ** power + offsets[s.source])},
                      f"f{power}")


def test_constants_are_cocycles(mobius):
    one = constant_cochain(mobius, 3)
    report = residual_sweep(total_coboundary(one), **SWEEP)
    assert report.max_residual == 0.0
    assert report.components_sampled > 0


def test_total_coboundary_squares_to_zero(mobius):
    f = _function(mobius, {"A": 1, "B": -2, "C": 5})
    assert residual_sweep(total_coboundary(total_coboundary(f)), **SWEEP).max_residual < 1e-10
    u1 = closed_formula_cocycle(CocycleDescriptor(CocycleKind.U1), mobius)
    assert residual_sweep(total_coboundary(total_coboundary(u1)), **SWEEP).max_residual < 1e-10


def test_coboundary_bidegrees(mobius):
    f = _function(mobius, {"A": 0, "B": 0, "C": 0})
    assert total_coboundary(f).bidegrees == [(0, 1), (1, 0)]


def test_product_with_unit(mobius):
    """1 . c = c . 1 = c."""
    u1 = closed_formula_cocycle(CocycleDescriptor(CocycleKind.U1), mobius)
    one = constant_cochain(mobius)
    assert residual_sweep(cochain_product(one, u1) - u1, **SWEEP).max_residual < 1e-12
    assert residual_sweep(cochain_product(u1, one) - u1, **SWEEP).max_residual < 1e-12


def test_leibniz_for_functions(mobius):
    f = _function(mobius, {"A": 1, "B": 2, "C": 3})
    g = _function(mobius, {"A": -1, "B": 0, "C": 1}, power=3)
    assert leibniz_check(f, g, 0, **SWEEP).max_residual < 1e-10


def test_leibniz_for_u1_and_c1(mobius):
    u1 = closed_formula_cocycle(CocycleDescriptor(CocycleKind.U1), mobius)
    c1 = cw_cocycle(mobius, CocycleDescriptor.parse("c1", 1))
    assert leibniz_check(u1, c1, 1, **SWEEP).max_residual < 1e-8


def test_linear_combination(mobius):
    f = _function(mobius, {"A": 1, "B": 2, "C": 3})
    (s,) = [s for s in enumerate_nerve(mobius, 0) if s.source == "B"]
    combined = combine([(2, f), (-1, f), (-1, f)])
    assert combined.value(0, 0, s).max_abs({x1: 0.4}) == 0.0
    doubled = f + f
    assert doubled.value(0, 0, s).max_abs({x1: -0.4}) == pytest.approx(2 * (0.16 + 2))


def test_value_checks_string_degree(mobius):
    f = _function(mobius, {"A": 0, "B": 0, "C": 0})
    with pytest.raises(ValueError):
        f.value(1, 0, enumerate_nerve(mobius, 0)[0])
    assert f.value(1, 0, enumerate_nerve(mobius, 1)[0]).is_zero()


def test_components_above_codimension_are_dropped(mobius):
    c = CDRCochain(mobius, {(0, 2): lambda s: DifferentialForm.zero((x1,), 2)})
    assert c.bidegrees == []


def test_residual_report_merge():
    a = ResidualReport(1e-3, 2, 10, "a")
    b = ResidualReport(1e-5, 3, 5, "b")
    merged = a.merge(b)
    assert merged.max_residual == 1e-3
    assert merged.components_sampled == 5
    assert merged.points_sampled == 15
    assert merged.worst == "a"
