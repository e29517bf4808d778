"""Smooth maps, differential forms and matrix-valued forms on chart domains."""

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np
import sympy as sp

import config
from errors import LeafspaceError
from quadrature import Region
from symexpr import (
    VariableContext,
    chart_symbols,
    diff_expr,
    evaluate_expr,
    format_expr,
    integral_node,
    parse_expr,
    simplex_symbol,
    substitute,
)

logger = logging.getLogger(__name__)

Box = Tuple[Tuple[sp.Rational, sp.Rational], ...]
Index = Tuple[int, ...]


class DimensionMismatchError(LeafspaceError):
    """Operands live on incompatible ambient variables or dimensions."""


class EmbeddingError(LeafspaceError):
    """A map fails the embedding requirements on its domain box."""


def permutation_sign(sequence: Sequence[int]) -> int:
    """Sign of the permutation sorting a sequence of distinct integers."""
    inversions = sum(1 for i, j in itertools.combinations(range(len(sequence)), 2) if sequence[i] > sequence[j])
    return -1 if inversions % 2 else 1


def box_contains(box: Box, point: Sequence[float], slack: float = None) -> bool:
    slack = config.CONTAINMENT_TOL if slack is None else slack
    return all(float(a) - slack <= x <= float(b) + slack for (a, b), x in zip(box, point))


# ---------------------------------------------------------------------------
# Smooth maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothMap:
    """A map between q-dimensional chart boxes, components in x1..xq."""
    dim: int
    components: Tuple[sp.Expr, ...]
    domain_box: Box
    codomain_box: Box

    def __post_init__(self):
        if len(self.components) != self.dim:
            raise DimensionMismatchError(f"map of dimension {self.dim} has {len(self.components)} components")
        allowed = set(chart_symbols(self.dim))
        for component in self.components:
            if not component.free_symbols <= allowed:
                extra = sorted(s.name for s in component.free_symbols - allowed)
                raise DimensionMismatchError(f"map component {format_expr(component)} uses {extra}")

    @classmethod
    def identity(cls, dim: int, box: Box) -> "SmoothMap":
        return cls(dim, chart_symbols(dim), box, box)

    @classmethod
    def from_text(cls, texts: Sequence[str], domain_box: Box, codomain_box: Box) -> "SmoothMap":
        context = VariableContext(len(texts))
        return cls(len(texts), tuple(parse_expr(t, context).expr for t in texts), domain_box, codomain_box)

    @property
    def variables(self) -> Tuple[sp.Symbol, ...]:
        return chart_symbols(self.dim)

    @property
    def is_identity(self) -> bool:
        return tuple(self.components) == self.variables

    @cached_property
    def jacobian(self) -> sp.Matrix:
        """J_ij = d h_i / d x_j."""
        return sp.Matrix(self.dim, self.dim, lambda i, j: diff_expr(self.components[i], self.variables[j]))

    @cached_property
    def jacobian_det(self) -> sp.Expr:
        return sp.cancel(self.jacobian.det()) if self.dim > 1 else self.jacobian[0, 0]

    @cached_property
    def jacobian_inverse(self) -> sp.Matrix:
        if self.dim == 1:
            return sp.Matrix([[1 / self.jacobian[0, 0]]])
        return self.jacobian.adjugate() / self.jacobian_det

    @cached_property
    def _numeric(self) -> Callable:
        return sp.lambdify(self.variables, list(self.components), modules="numpy")

    def __call__(self, point: Sequence[float]) -> np.ndarray:
        with np.errstate(all="ignore"):
            return np.asarray(self._numeric(*point), dtype=float)

    def substitution(self) -> Dict[sp.Symbol, sp.Expr]:
        return dict(zip(self.variables, self.components))

    def describe(self) -> str:
        return "; ".join(format_expr(c) for c in self.components)

    def embedding_failures(self, points: Iterable[Sequence[float]], contained: bool = True) -> list:
        """Sample points where the map leaves its codomain or degenerates."""
        failures = []
        det = sp.lambdify(self.variables, self.jacobian_det, modules="numpy")
        for point in points:
            image = self(point)
            if not np.all(np.isfinite(image)):
                failures.append(f"image of {list(point)} is not finite")
                continue
            if contained and not box_contains(self.codomain_box, image):
                failures.append(f"image {np.round(image, 9).tolist()} of {list(point)} leaves the codomain box")
                continue
            with np.errstate(all="ignore"):
                value = float(det(*point))
            if not np.isfinite(value) or abs(value) < 1e-14:
                failures.append(f"Jacobian determinant vanishes at {list(point)}")
        return failures


def compose(g: SmoothMap, f: SmoothMap) -> SmoothMap:
    """g after f, symbolically."""
    if g.dim != f.dim:
        raise DimensionMismatchError(f"cannot compose maps of dimensions {g.dim} and {f.dim}")
    binding = f.substitution()
    components = tuple(substitute(c, binding) for c in g.components)
    return SmoothMap(f.dim, components, f.domain_box, g.codomain_box)


# ---------------------------------------------------------------------------
# Differential forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DifferentialForm:
    """A degree-l form: coefficient expressions keyed by increasing index tuples."""
    variables: Tuple[sp.Symbol, ...]
    degree: int
    components: Mapping[Index, sp.Expr] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.variables)
        cleaned = {}
        for index, coefficient in self.components.items():
            index = tuple(index)
            if len(index) != self.degree:
                raise DimensionMismatchError(f"index {index} in a form of degree {self.degree}")
            if any(a >= b for a, b in zip(index, index[1:])) or any(i < 0 or i >= n for i in index):
                raise DimensionMismatchError(f"index {index} is not strictly increasing over {n} variables")
            coefficient = sp.sympify(coefficient)
            if coefficient != 0:
                cleaned[index] = coefficient
        object.__setattr__(self, "components", cleaned)

    @classmethod
    def zero(cls, variables: Sequence[sp.Symbol], degree: int) -> "DifferentialForm":
        return cls(tuple(variables), degree, {})

    @classmethod
    def scalar(cls, variables: Sequence[sp.Symbol], expr) -> "DifferentialForm":
        return cls(tuple(variables), 0, {(): expr})

    @classmethod
    def basis(cls, variables: Sequence[sp.Symbol], index: Index, coefficient=1) -> "DifferentialForm":
        """coefficient * dv_{i1} ^ ... ^ dv_{il} for any ordering of distinct positions."""
        index = tuple(index)
        if len(set(index)) != len(index):
            return cls.zero(variables, len(index))
        ordered = tuple(sorted(index))
        return cls(tuple(variables), len(index), {ordered: permutation_sign(index) * sp.sympify(coefficient)})

    @classmethod
    def one_form(cls, variables: Sequence[sp.Symbol], coefficients: Sequence) -> "DifferentialForm":
        """sum_j coefficients[j] dv_j."""
        return cls(tuple(variables), 1, {(j,): c for j, c in enumerate(coefficients)})

    def coefficient(self, index: Index) -> sp.Expr:
        return self.components.get(tuple(index), sp.Integer(0))

    def is_zero(self) -> bool:
        return not self.components

    def _check(self, other: "DifferentialForm"):
        if self.variables != other.variables:
            raise DimensionMismatchError(
                f"ambient mismatch: {[v.name for v in self.variables]} vs {[v.name for v in other.variables]}"
            )

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        self._check(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.degree != other.degree:
            raise DimensionMismatchError(f"cannot add forms of degree {self.degree} and {other.degree}")
        merged = dict(self.components)
        for index, coefficient in other.components.items():
            merged[index] = merged.get(index, 0) + coefficient
        return DifferentialForm(self.variables, self.degree, merged)

    def __neg__(self) -> "DifferentialForm":
        return self.scale(-1)

    def __sub__(self, other: "DifferentialForm") -> "DifferentialForm":
        return self + (-other)

    def scale(self, factor) -> "DifferentialForm":
        factor = sp.sympify(factor)
        if factor == 1:
            return self
        return DifferentialForm(self.variables, self.degree, {i: factor * c for i, c in self.components.items()})

    def map_coefficients(self, fn: Callable[[sp.Expr], sp.Expr]) -> "DifferentialForm":
        return DifferentialForm(self.variables, self.degree, {i: fn(c) for i, c in self.components.items()})

    def embed(self, variables: Sequence[sp.Symbol]) -> "DifferentialForm":
        """Reinterpret this form in a larger ambient variable list."""
        variables = tuple(variables)
        if variables == self.variables:
            return self
        try:
            positions = [variables.index(v) for v in self.variables]
        except ValueError:
            raise DimensionMismatchError(
                f"cannot embed {[v.name for v in self.variables]} into {[v.name for v in variables]}"
            )
        result = DifferentialForm.zero(variables, self.degree)
        for index, coefficient in self.components.items():
            result = result + DifferentialForm.basis(variables, tuple(positions[i] for i in index), coefficient)
        return result

    def evaluate(self, point: Mapping[sp.Symbol, float], tol: float = None) -> Dict[Index, float]:
        return {index: evaluate_expr(c, point, tol) for index, c in self.components.items()}

    def max_abs(self, point: Mapping[sp.Symbol, float], tol: float = None) -> float:
        values = self.evaluate(point, tol).values()
        return max((abs(v) for v in values), default=0.0)

    def describe(self) -> str:
        if self.is_zero():
            return "0"
        terms = []
        for index, coefficient in sorted(self.components.items()):
            basis = "^".join(f"d{self.variables[i].name}" for i in index)
            terms.append(f"({format_expr(coefficient)})" + (f"*{basis}" if basis else ""))
        return " + ".join(terms)


def exterior_d(form: DifferentialForm) -> DifferentialForm:
    """De Rham differential in all ambient variables."""
    result = DifferentialForm.zero(form.variables, form.degree + 1)
    merged: Dict[Index, sp.Expr] = {}
    for index, coefficient in form.components.items():
        for j, variable in enumerate(form.variables):
            if j in index:
                continue
            derivative = diff_expr(coefficient, variable)
            if derivative == 0:
                continue
            before = sum(1 for i in index if i < j)
            new_index = tuple(sorted(index + (j,)))
            merged[new_index] = merged.get(new_index, 0) + (-1) ** before * derivative
    if merged:
        result = DifferentialForm(form.variables, form.degree + 1, merged)
    return result


def wedge(alpha: DifferentialForm, beta: DifferentialForm) -> DifferentialForm:
    """Exterior product alpha ^ beta."""
    alpha._check(beta)
    merged: Dict[Index, sp.Expr] = {}
    for i, a in alpha.components.items():
        for j, b in beta.components.items():
            if set(i) & set(j):
                continue
            joined = i + j
            ordered = tuple(sorted(joined))
            merged[ordered] = merged.get(ordered, 0) + permutation_sign(joined) * a * b
    return DifferentialForm(alpha.variables, alpha.degree + beta.degree, merged)


def pullback_by_substitution(form: DifferentialForm, source: Sequence[sp.Symbol],
                             binding: Mapping[sp.Symbol, sp.Expr],
                             ambient: Sequence[sp.Symbol]) -> DifferentialForm:
    """Pull a form back along the map source -> form.variables given by binding.

    Variables of the form without a binding pass through unchanged and must
    appear in the new ambient list.
    """
    ambient = tuple(ambient)
    differentials = []
    for variable in form.variables:
        if variable in binding:
            expr = binding[variable]
            differentials.append(DifferentialForm.one_form(
                ambient, [diff_expr(expr, s) if s in source else 0 for s in ambient]
            ))
        elif variable in ambient:
            differentials.append(DifferentialForm.basis(ambient, (ambient.index(variable),)))
        else:
            raise DimensionMismatchError(f"variable {variable.name} has no image in the pullback")

    result = DifferentialForm.zero(ambient, form.degree)
    for index, coefficient in form.components.items():
        term = DifferentialForm.scalar(ambient, substitute(coefficient, binding))
        for i in index:
            term = wedge(term, differentials[i])
        result = result + term
    return result


def pullback(h: SmoothMap, form: DifferentialForm) -> DifferentialForm:
    """h^* form; chart variables are substituted, simplex variables pass through."""
    chart = h.variables
    if not set(chart) <= set(form.variables):
        raise DimensionMismatchError(
            f"form on {[v.name for v in form.variables]} does not live on a {h.dim}-dimensional chart"
        )
    if h.is_identity:
        return form
    return pullback_by_substitution(form, chart, h.substitution(), form.variables)


def fiber_integrate(form: DifferentialForm, fiber: Sequence[sp.Symbol], tol: float = None) -> DifferentialForm:
    """Integrate over the simplex spanned by the fiber variables t1..tk.

    Components containing dt_1 ^ ... ^ dt_k are kept, with the dt's moved to
    the front; t0 is eliminated as 1 - t1 - ... - tk.
    """
    fiber = tuple(fiber)
    k = len(fiber)
    if k == 0:
        return form
    try:
        fiber_positions = [form.variables.index(t) for t in fiber]
    except ValueError:
        raise DimensionMismatchError("fiber variables are not ambient variables of the form")
    base = tuple(v for v in form.variables if v not in fiber)
    region = Region.simplex(k)
    eliminate = {simplex_symbol(0): 1 - sum(fiber, sp.Integer(0))}

    merged: Dict[Index, sp.Expr] = {}
    for index, coefficient in form.components.items():
        if not set(fiber_positions) <= set(index):
            continue
        rest = tuple(i for i in index if i not in fiber_positions)
        sign = permutation_sign(tuple(fiber_positions) + rest)
        new_index = tuple(base.index(form.variables[i]) for i in rest)
        integrand = substitute(coefficient, eliminate)
        merged[new_index] = merged.get(new_index, 0) + sign * integral_node(integrand, region, fiber)
    return DifferentialForm(base, form.degree - k, merged)


# ---------------------------------------------------------------------------
# Matrix-valued forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatrixForm:
    """An n x n matrix of forms of a common degree and ambient."""
    entries: Tuple[Tuple[DifferentialForm, ...], ...]

    def __post_init__(self):
        n = len(self.entries)
        if any(len(row) != n for row in self.entries):
            raise DimensionMismatchError("matrix form must be square")
        first = self.entries[0][0]
        for row in self.entries:
            for entry in row:
                if entry.variables != first.variables:
                    raise DimensionMismatchError("matrix form entries must share ambient variables")
                if not entry.is_zero() and entry.degree != self.degree:
                    raise DimensionMismatchError("matrix form entries must share degree")

    @classmethod
    def zero(cls, n: int, variables: Sequence[sp.Symbol], degree: int) -> "MatrixForm":
        zero = DifferentialForm.zero(variables, degree)
        return cls(tuple(tuple(zero for _ in range(n)) for _ in range(n)))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[DifferentialForm]]) -> "MatrixForm":
        return cls(tuple(tuple(row) for row in rows))

    @classmethod
    def from_function(cls, n: int, fn: Callable[[int, int], DifferentialForm]) -> "MatrixForm":
        return cls(tuple(tuple(fn(i, j) for j in range(n)) for i in range(n)))

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def variables(self) -> Tuple[sp.Symbol, ...]:
        return self.entries[0][0].variables

    @property
    def degree(self) -> int:
        degrees = {e.degree for row in self.entries for e in row if not e.is_zero()}
        return degrees.pop() if degrees else self.entries[0][0].degree

    def __getitem__(self, position: Tuple[int, int]) -> DifferentialForm:
        i, j = position
        return self.entries[i][j]

    def is_zero(self) -> bool:
        return all(e.is_zero() for row in self.entries for e in row)

    def map_entries(self, fn: Callable[[DifferentialForm], DifferentialForm]) -> "MatrixForm":
        return MatrixForm.from_function(self.size, lambda i, j: fn(self.entries[i][j]))

    def __add__(self, other: "MatrixForm") -> "MatrixForm":
        return MatrixForm.from_function(self.size, lambda i, j: self.entries[i][j] + other.entries[i][j])

    def __sub__(self, other: "MatrixForm") -> "MatrixForm":
        return MatrixForm.from_function(self.size, lambda i, j: self.entries[i][j] - other.entries[i][j])

    def scale(self, factor) -> "MatrixForm":
        return self.map_entries(lambda e: e.scale(factor))

    def wedge(self, other: "MatrixForm") -> "MatrixForm":
        """Matrix product with wedge multiplication of entries."""
        n = self.size

        def entry(i, j):
            total = DifferentialForm.zero(self.variables, self.degree + other.degree)
            for m in range(n):
                total = total + wedge(self.entries[i][m], other.entries[m][j])
            return total

        return MatrixForm.from_function(n, entry)

    def d(self) -> "MatrixForm":
        return self.map_entries(exterior_d)

    def trace(self) -> DifferentialForm:
        total = DifferentialForm.zero(self.variables, self.degree)
        for i in range(self.size):
            total = total + self.entries[i][i]
        return total

    def pullback(self, h: SmoothMap) -> "MatrixForm":
        return self.map_entries(lambda e: pullback(h, e))

    def embed(self, variables: Sequence[sp.Symbol]) -> "MatrixForm":
        return self.map_entries(lambda e: e.embed(variables))

    def left_multiply(self, matrix: sp.Matrix) -> "MatrixForm":
        """M . A for a matrix of functions M."""
        n = self.size

        def entry(i, j):
            total = DifferentialForm.zero(self.variables, self.degree)
            for m in range(n):
                if matrix[i, m] != 0:
                    total = total + self.entries[m][j].scale(matrix[i, m])
            return total

        return MatrixForm.from_function(n, entry)

    def right_multiply(self, matrix: sp.Matrix) -> "MatrixForm":
        """A . M for a matrix of functions M."""
        n = self.size

        def entry(i, j):
            total = DifferentialForm.zero(self.variables, self.degree)
            for m in range(n):
                if matrix[m, j] != 0:
                    total = total + self.entries[i][m].scale(matrix[m, j])
            return total

        return MatrixForm.from_function(n, entry)

    def conjugate(self, jacobian: sp.Matrix, inverse: sp.Matrix) -> "MatrixForm":
        """J^{-1} A J."""
        return self.right_multiply(jacobian).left_multiply(inverse)

    def power(self, n: int) -> "MatrixForm":
        if n < 1:
            raise DimensionMismatchError("matrix form powers start at 1")
        result = self
        for _ in range(n - 1):
            result = result.wedge(self)
        return result
