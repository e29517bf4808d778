"""Tests for smooth maps, differential forms and matrix-valued forms."""

import sympy as sp
import pytest

from forms import (
    DifferentialForm,
    DimensionMismatchError,
    MatrixForm,
    SmoothMap,
    compose,
    exterior_d,
    fiber_integrate,
    pullback,
    wedge,
)
from symexpr import chart_symbols, simplex_symbol

X = chart_symbols(3)
x1, x2, x3 = X
UNIT3 = ((0, 1),) * 3


def _same(a: DifferentialForm, b: DifferentialForm) -> bool:
    indices = set(a.components) | set(b.components)
    return a.degree == b.degree and all(sp.simplify(a.coefficient(i) - b.coefficient(i)) == 0 for i in indices)


def _samples():
    f = DifferentialForm.scalar(X, x1 ** 2 * x2 + sp.sin(x3))
    alpha = DifferentialForm.one_form(X, [x2 * x3, x1 ** 3, sp.exp(x1 * x2)])
    beta = DifferentialForm(X, 2, {(0, 1): x3 ** 2, (1, 2): x1 * x2, (0, 2): sp.cos(x2)})
    return [f, alpha, beta]


def test_d_squared_vanishes():
    """d(d w) = 0 for forms of every degree."""
    for form in _samples():
        assert exterior_d(exterior_d(form)).is_zero()


def test_leibniz_rule():
    """d(a ^ b) = da ^ b + (-1)^p a ^ db."""
    forms = _samples()
    for a in forms:
        for b in forms:
            if a.degree + b.degree > 2:
                continue
            lhs = exterior_d(wedge(a, b))
            rhs = wedge(exterior_d(a), b) + wedge(a, exterior_d(b)).scale((-1) ** a.degree)
            assert _same(lhs, rhs)


def test_basis_orders_and_signs():
    """Basis forms sort their index with the permutation sign."""
    form = DifferentialForm.basis(X, (2, 0), coefficient=x1)
    assert form.coefficient((0, 2)) == -x1
    assert DifferentialForm.basis(X, (1, 1)).is_zero()
    with pytest.raises(DimensionMismatchError):
        DifferentialForm(X, 1, {(0, 1): 1})


def test_wedge_is_graded_commutative():
    alpha = DifferentialForm.one_form(X, [x1, 0, 1])
    gamma = DifferentialForm.one_form(X, [0, x3, x2])
    assert _same(wedge(alpha, gamma), wedge(gamma, alpha).scale(-1))
    assert wedge(alpha, alpha).is_zero()


def test_pullback_is_functorial():
    """(g . f)^* w = f^*(g^* w)."""
    box = ((-1, 1), (-1, 1))
    f = SmoothMap.from_text(["x1 + x2^2", "x2"], box, box)
    g = SmoothMap.from_text(["x1*x2 + 1", "x2 - x1"], box, box)
    y1, y2 = chart_symbols(2)
    for form in (
        DifferentialForm.scalar((y1, y2), y1 * y2 ** 2),
        DifferentialForm.one_form((y1, y2), [y2, y1 ** 2]),
        DifferentialForm((y1, y2), 2, {(0, 1): y1 + y2}),
    ):
        assert _same(pullback(compose(g, f), form), pullback(f, pullback(g, form)))


def test_pullback_commutes_with_d():
    box = ((-1, 1), (-1, 1))
    h = SmoothMap.from_text(["x1*x2 + x1", "x2^3 - x1"], box, box)
    y1, y2 = chart_symbols(2)
    form = DifferentialForm.one_form((y1, y2), [y1 * y2, sp.exp(y1)])
    assert _same(exterior_d(pullback(h, form)), pullback(h, exterior_d(form)))


def test_pullback_of_top_form_is_determinant():
    box = ((-1, 1), (-1, 1))
    h = SmoothMap.from_text(["x1 + x2^2", "2*x2 + x1*x2"], box, box)
    volume = DifferentialForm.basis(chart_symbols(2), (0, 1))
    assert sp.simplify(pullback(h, volume).coefficient((0, 1)) - h.jacobian_det) == 0


def test_chain_rule_for_jacobians():
    box = ((-1, 1), (-1, 1))
    f = SmoothMap.from_text(["x1 + x2^2", "x2*x1"], box, box)
    g = SmoothMap.from_text(["x1^2", "x1 + x2"], box, box)
    composite = compose(g, f)
    expected = g.jacobian.subs(f.substitution(), simultaneous=True) * f.jacobian
    assert sp.simplify(composite.jacobian - expected) == sp.zeros(2, 2)


def test_fiber_integration_moves_dt_to_front():
    """Integrating t1 dt1 ^ dx1 over the 1-simplex gives dx1 / 2."""
    t1 = simplex_symbol(1)
    ambient = (chart_symbols(1)[0], t1)
    form = DifferentialForm.basis(ambient, (1, 0), coefficient=t1)
    result = fiber_integrate(form, (t1,))
    assert result.degree == 1
    assert result.evaluate({chart_symbols(1)[0]: 0.3})[(0,)] == pytest.approx(0.5)
    # dx1 ^ dt1 carries the opposite sign
    flipped = fiber_integrate(DifferentialForm.basis(ambient, (0, 1), coefficient=t1), (t1,))
    assert flipped.evaluate({})[(0,)] == pytest.approx(-0.5)


def test_fiber_integration_eliminates_t0():
    t0, t1 = simplex_symbol(0), simplex_symbol(1)
    form = DifferentialForm.basis((t1,), (0,), coefficient=t0 ** 2)
    # t0 = 1 - t1, so the integral of (1 - t1)^2 is 1/3
    assert fiber_integrate(form, (t1,)).evaluate({})[()] == pytest.approx(1 / 3)


def test_embedding_failures():
    inside = ((0, 1),)
    shifted = SmoothMap.from_text(["x1 + 1"], inside, inside)
    assert shifted.embedding_failures([[0.5]])
    assert not shifted.embedding_failures([[0.5]], contained=False)
    cubic = SmoothMap.from_text(["x1^3"], ((-1, 1),), ((-1, 1),))
    assert any("vanishes" in f for f in cubic.embedding_failures([[0.0]]))


def test_matrix_form_identities():
    """Tr(A ^ A) = 0 for 1-forms and d(A ^ A) = dA ^ A - A ^ dA."""
    y = chart_symbols(2)
    a = MatrixForm.from_rows([
        [DifferentialForm.one_form(y, [y[0], y[1] ** 2]), DifferentialForm.one_form(y, [1, y[0]])],
        [DifferentialForm.one_form(y, [y[0] * y[1], 0]), DifferentialForm.one_form(y, [0, sp.exp(y[0])])],
    ])
    assert a.wedge(a).trace().is_zero()
    lhs = a.wedge(a).d()
    rhs = a.d().wedge(a) - a.wedge(a.d())
    for i in range(2):
        for j in range(2):
            assert _same(lhs[i, j], rhs[i, j])
    assert MatrixForm.zero(2, y, 1).is_zero()
