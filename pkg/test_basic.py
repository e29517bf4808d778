"""Tests for invariant forms, basic cohomology and compact coinvariants."""

import pytest
import sympy as sp

from basic import (
    PolynomialFormAnsatz,
    UnsupportedAnsatzError,
    basic_cohomology,
    compact_basic_coinvariants,
    invariant_form_cochain,
    invariant_forms,
    monomials,
    polynomial_terms,
)
from category import enumerate_nerve
from cochains import coboundary_value
from forms import DifferentialForm, exterior_d
from symexpr import chart_symbols


def test_monomials_are_graded():
    assert monomials(2, 1) == [(0, 0), (1, 0), (0, 1)]
    assert len(monomials(3, 2)) == 10
    assert monomials(1, -1) == []


def test_ansatz_dimension():
    ansatz = PolynomialFormAnsatz(("U", "V"), 2, 1, 1)
    assert ansatz.dimension == 2 * 2 * 3


def test_polynomial_terms_are_exact():
    x1, x2 = chart_symbols(2)
    form = DifferentialForm.one_form((x1, x2), [sp.Rational(1, 3) * x1 * x2, (x1 + 1) ** 2])
    terms = polynomial_terms(form, 2)
    assert terms[((0,), (1, 1))] == sp.Rational(1, 3)
    assert terms[((1,), (0, 0))] == 1
    with pytest.raises(UnsupportedAnsatzError):
        polynomial_terms(DifferentialForm.scalar((x1, x2), 1 / (x1 + 2)), 2)


def test_reflection_invariants(z2):
    """Even functions and odd multiples of dx survive the reflection."""
    functions = invariant_forms(z2, 0, 2)
    assert functions.dimension == 2
    one_forms = invariant_forms(z2, 1, 2)
    assert one_forms.dimension == 1
    (form,) = one_forms.forms()[0].values()
    x1 = chart_symbols(1)[0]
    assert sp.simplify(form.coefficient((0,)) / x1).is_constant()


def test_reflection_basic_cohomology(z2):
    report = basic_cohomology(z2, 3)
    assert report.invariant_dims == (2, 1)
    assert report.betti == (1, 0)
    assert report.closure_ok
    assert report.ansatz_kind == "polynomial"


def test_single_chart_basic_cohomology(bundled):
    report = basic_cohomology(bundled("single-chart").presentation, 3)
    assert report.invariant_dims == (4, 3)
    assert report.betti == (1, 0)


def test_compact_coinvariants(z2):
    """Odd functions and even multiples of dx are killed by the relations."""
    assert compact_basic_coinvariants(z2, 0, 2) == 2
    assert compact_basic_coinvariants(z2, 1, 2) == 1


def test_non_polynomial_maps_are_rejected(mobius):
    with pytest.raises(UnsupportedAnsatzError):
        invariant_forms(mobius, 0, 2)
    with pytest.raises(UnsupportedAnsatzError):
        compact_basic_coinvariants(mobius, 0, 2)


def test_invariant_form_cochain(z2):
    """An invariant function gives a cochain whose Čech coboundary vanishes."""
    x1 = chart_symbols(1)[0]
    cochain = invariant_form_cochain(z2, {"U": DifferentialForm.scalar((x1,), x1 ** 2)})
    (s,) = enumerate_nerve(z2, 1)
    assert coboundary_value(cochain, 0, 0, s).is_zero()
    assert not exterior_d(cochain.value(0, 0, enumerate_nerve(z2, 0)[0])).is_zero()
