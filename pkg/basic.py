"""Basic (holonomy-invariant) forms and compactly supported coinvariants in a polynomial ansatz."""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence, Tuple

import sympy as sp

from category import CategoryPresentation, NerveString
from cochains import CDRCochain
from errors import LeafspaceError
from forms import DifferentialForm, exterior_d, pullback
from linalg import SparseRationalMatrix
from symexpr import chart_symbols

logger = logging.getLogger(__name__)

# (chart id, form index, monomial exponents)
BasisKey = Tuple[str, Tuple[int, ...], Tuple[int, ...]]


class UnsupportedAnsatzError(LeafspaceError):
    """An arrow map takes polynomial forms out of the ansatz."""


def monomials(q: int, bound: int) -> List[Tuple[int, ...]]:
    """Exponent vectors of total degree <= bound, graded then lexicographic."""
    if bound < 0:
        return []
    result = [e for e in itertools.product(range(bound + 1), repeat=q) if sum(e) <= bound]
    return sorted(result, key=lambda e: (sum(e), tuple(-x for x in e)))


@dataclass(frozen=True)
class PolynomialFormAnsatz:
    """Forms sum_I p_I(x) dx_I with deg p_I <= bound on every chart."""
    charts: Tuple[str, ...]
    q: int
    degree: int
    bound: int
    kind: str = "polynomial"
    basis: Tuple[BasisKey, ...] = field(init=False)

    def __post_init__(self):
        indices = list(itertools.combinations(range(self.q), self.degree)) if self.degree <= self.q else []
        basis = tuple(
            (chart, index, exponent)
            for chart in self.charts
            for index in indices
            for exponent in monomials(self.q, self.bound)
        )
        object.__setattr__(self, "basis", basis)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def position(self) -> Dict[BasisKey, int]:
        return {key: i for i, key in enumerate(self.basis)}

    def element(self, key: BasisKey) -> DifferentialForm:
        _, index, exponent = key
        variables = chart_symbols(self.q)
        monomial = sp.Mul(*(v ** e for v, e in zip(variables, exponent)))
        return DifferentialForm(variables, self.degree, {index: monomial})

    def forms(self, vector: Sequence) -> Dict[str, DifferentialForm]:
        """Per-chart forms of a coordinate vector."""
        variables = chart_symbols(self.q)
        result = {chart: DifferentialForm.zero(variables, self.degree) for chart in self.charts}
        for key, coefficient in zip(self.basis, vector):
            if coefficient:
                result[key[0]] = result[key[0]] + self.element(key).scale(sp.Rational(coefficient))
        return result


def polynomial_terms(form: DifferentialForm, q: int) -> Dict[Tuple[Tuple[int, ...], Tuple[int, ...]], Fraction]:
    """Exact (index, exponent) -> coefficient expansion of a polynomial form."""
    terms = {}
    variables = chart_symbols(q)
    for index, coefficient in form.components.items():
        expanded = sp.expand(sp.cancel(coefficient))
        if not expanded.is_polynomial(*variables):
            raise UnsupportedAnsatzError(f"coefficient {expanded} is not polynomial")
        poly = sp.Poly(expanded, *variables)
        for exponent, value in poly.terms():
            value = sp.Rational(value)
            if value != 0:
                terms[(index, tuple(exponent))] = Fraction(int(value.p), int(value.q))
    return terms


def _check_polynomial_maps(p: CategoryPresentation):
    variables = chart_symbols(p.dim)
    for arrow in p.arrows:
        for component in arrow.map.components:
            if not sp.sympify(component).is_polynomial(*variables):
                raise UnsupportedAnsatzError(f"arrow {arrow.id!r} has a non-polynomial map {arrow.map.describe()}")


def invariance_matrix(p: CategoryPresentation, ansatz: PolynomialFormAnsatz) -> SparseRationalMatrix:
    """Rows: coefficients of h^*(w|dst) - w|src for every non-identity arrow h."""
    _check_polynomial_maps(p)
    position = ansatz.position()
    equations: Dict[Tuple, Dict[int, Fraction]] = {}
    for arrow in sorted(p.arrows, key=lambda a: a.id):
        for key in ansatz.basis:
            chart, index, exponent = key
            if chart == arrow.dst:
                pulled = pullback(arrow.map, ansatz.element(key))
                for (j_index, j_exponent), value in polynomial_terms(pulled, p.dim).items():
                    row = equations.setdefault((arrow.id, j_index, j_exponent), {})
                    row[position[key]] = row.get(position[key], Fraction(0)) + value
            if chart == arrow.src:
                row = equations.setdefault((arrow.id, index, exponent), {})
                row[position[key]] = row.get(position[key], Fraction(0)) - 1
    keys = sorted(equations)
    entries = {(r, c): v for r, key in enumerate(keys) for c, v in equations[key].items()}
    return SparseRationalMatrix(len(keys), ansatz.dimension, entries)


@dataclass(frozen=True)
class InvariantFormBasis:
    ansatz: PolynomialFormAnsatz
    vectors: Tuple[Tuple[Fraction, ...], ...]

    @property
    def dimension(self) -> int:
        return len(self.vectors)

    def forms(self) -> List[Dict[str, DifferentialForm]]:
        return [self.ansatz.forms(v) for v in self.vectors]


def invariant_forms(p: CategoryPresentation, l: int, D: int) -> InvariantFormBasis:
    """Exact kernel of the invariance equations inside the degree-D ansatz of l-forms.

    Args:
        p: Presentation with polynomial arrow maps
        l: Form degree
        D: Coefficient degree bound

    Returns:
        Basis of invariant forms in monomial coordinates
    """
    ansatz = PolynomialFormAnsatz(tuple(c.id for c in p.charts), p.dim, l, D)
    if ansatz.dimension == 0:
        return InvariantFormBasis(ansatz, ())
    kernel = invariance_matrix(p, ansatz).nullspace()
    logger.info("invariant %d-forms of degree <= %d on %s: %d", l, D, p.name, len(kernel))
    return InvariantFormBasis(ansatz, tuple(tuple(v) for v in kernel))


def _coordinates(forms: Mapping[str, DifferentialForm], ansatz: PolynomialFormAnsatz) -> List[Fraction]:
    position = ansatz.position()
    vector = [Fraction(0)] * ansatz.dimension
    for chart, form in forms.items():
        for (index, exponent), value in polynomial_terms(form, ansatz.q).items():
            key = (chart, index, exponent)
            if key not in position:
                raise UnsupportedAnsatzError(f"form leaves the ansatz at {key}")
            vector[position[key]] = value
    return vector


@dataclass(frozen=True)
class BasicCohomologyReport:
    bound: int
    invariant_dims: Tuple[int, ...]
    betti: Tuple[int, ...]
    closure_ok: bool
    ansatz_kind: str = "polynomial"


def basic_cohomology(p: CategoryPresentation, D: int, N: int = None) -> BasicCohomologyReport:
    """Cohomology of invariant forms under d, with l-forms of coefficient degree <= D - l.

    Args:
        p: Presentation with polynomial arrow maps
        D: Coefficient degree bound for 0-forms
        N: Largest form degree reported (default: chart dimension)

    Returns:
        Report with invariant dimensions, Betti numbers and the closure check
    """
    N = p.dim if N is None else N
    spaces = [invariant_forms(p, l, D - l) for l in range(N + 2)]
    ranks = []
    closure_ok = True
    for l in range(N + 1):
        source, target = spaces[l], spaces[l + 1]
        if source.dimension == 0 or target.ansatz.dimension == 0:
            ranks.append(0)
            continue
        columns = []
        residual = invariance_matrix(p, target.ansatz) if p.arrows else None
        for forms in source.forms():
            image = {chart: exterior_d(form) for chart, form in forms.items()}
            vector = _coordinates(image, target.ansatz)
            if residual is not None:
                check = residual @ SparseRationalMatrix(len(vector), 1, {(i, 0): v for i, v in enumerate(vector)})
                closure_ok = closure_ok and check.is_zero()
            columns.append(vector)
        matrix = SparseRationalMatrix(len(columns), target.ansatz.dimension,
                                      {(r, c): v for r, col in enumerate(columns) for c, v in enumerate(col)})
        ranks.append(matrix.rank())
    betti = tuple(spaces[l].dimension - ranks[l] - (ranks[l - 1] if l else 0) for l in range(N + 1))
    return BasicCohomologyReport(D, tuple(s.dimension for s in spaces[:N + 1]), betti, closure_ok)


def compact_basic_coinvariants(p: CategoryPresentation, l: int, D: int) -> int:
    """dim of the ansatz modulo span{w - h^*w}, with relations projected off the ansatz.

    Relations are w|dst - h^*w|src for basis forms w; their parts outside the
    ansatz are tracked so that the quotient is dim A - rank R + rank(P_out R).
    """
    _check_polynomial_maps(p)
    ansatz = PolynomialFormAnsatz(tuple(c.id for c in p.charts), p.dim, l, D)
    inside = ansatz.position()
    outside: Dict[BasisKey, int] = {}
    relations: List[Dict[Tuple[bool, int], Fraction]] = []
    for arrow in sorted(p.arrows, key=lambda a: a.id):
        for key in ansatz.basis:
            if key[0] != arrow.dst:
                continue
            relation = {(True, inside[key]): Fraction(1)}
            pulled = pullback(arrow.map, ansatz.element(key))
            for (index, exponent), value in polynomial_terms(pulled, p.dim).items():
                target = (arrow.src, index, exponent)
                if target in inside:
                    slot = (True, inside[target])
                else:
                    slot = (False, outside.setdefault(target, len(outside)))
                relation[slot] = relation.get(slot, Fraction(0)) - value
            relations.append(relation)
    if not relations:
        return ansatz.dimension
    width = ansatz.dimension + len(outside)

    def column(slot):
        return slot[1] if slot[0] else ansatz.dimension + slot[1]

    full = SparseRationalMatrix(len(relations), width, {
        (r, column(slot)): v for r, rel in enumerate(relations) for slot, v in rel.items()
    })
    projected = SparseRationalMatrix(len(relations), max(len(outside), 1), {
        (r, slot[1]): v for r, rel in enumerate(relations) for slot, v in rel.items() if not slot[0]
    })
    return ansatz.dimension - full.rank() + projected.rank()


def invariant_form_cochain(p: CategoryPresentation, forms_by_chart: Mapping[str, DifferentialForm],
                           name: str = "invariant") -> CDRCochain:
    """An invariant l-form as a (0, l) cochain with zero higher components."""
    degree = next(iter(forms_by_chart.values())).degree if forms_by_chart else 0
    q = p.dim

    def value(s: NerveString) -> DifferentialForm:
        return forms_by_chart.get(s.source, DifferentialForm.zero(chart_symbols(q), degree))

    return CDRCochain(p, {(0, degree): value}, name)
