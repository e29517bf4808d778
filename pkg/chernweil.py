"""Transversal Chern-Weil and Chern-Simons cocycles of the normal bundle."""

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import sympy as sp

import config
from category import NerveString, Presentation, sample_strings
from cochains import (
    CDRCochain,
    ResidualReport,
    form_residual,
    pullback_along,
    residual_sweep,
    total_coboundary,
    zero_form,
)
from errors import LeafspaceError
from forms import (
    DifferentialForm,
    MatrixForm,
    SmoothMap,
    compose,
    exterior_d,
    fiber_integrate,
    pullback,
    wedge,
)
from symexpr import chart_symbols, simplex_symbols

logger = logging.getLogger(__name__)

MAX_TRACE_DEGREE = 2 * config.MAX_CODIMENSION

# Trace word: non-decreasing tuple of powers, Tr(A^i1) Tr(A^i2) ...
Word = Tuple[int, ...]


class CocycleDescriptorError(LeafspaceError):
    """A characteristic class is malformed or out of range."""


class CocycleKind(Enum):
    INVARIANT_POLYNOMIAL = "invariant_polynomial"
    CHERN_CHARACTER = "chern_character"
    U1 = "u1"
    GV = "gv"
    BOTT_GV = "bott_gv"


@dataclass(frozen=True)
class CocycleDescriptor:
    """A characteristic class: a trace-word polynomial or one of the closed formulas."""
    kind: CocycleKind
    words: Tuple[Tuple[Word, Fraction], ...] = ()
    order: int = 0
    partition: Tuple[int, ...] = ()
    label: str = ""

    @classmethod
    def parse(cls, text: str, q: int) -> "CocycleDescriptor":
        """Parse c1, c1^2, c1*c2^2, u1, gv, gv:a,b,... and ch:N."""
        text = text.strip()
        if text == "u1":
            return cls(CocycleKind.U1, label=text)
        if text == "gv":
            return cls(CocycleKind.GV, partition=(1,) * q, label=text)
        if text.startswith("gv:"):
            try:
                partition = tuple(int(a) for a in text[3:].split(","))
            except ValueError:
                raise CocycleDescriptorError(f"malformed partition in {text!r}")
            if any(a <= 0 for a in partition) or sum(partition) != q:
                raise CocycleDescriptorError(f"partition {partition} must be positive and sum to {q}")
            return cls(CocycleKind.BOTT_GV, partition=partition, label=text)
        if text.startswith("ch:"):
            try:
                order = int(text[3:])
            except ValueError:
                raise CocycleDescriptorError(f"malformed truncation order in {text!r}")
            if not 0 <= order <= MAX_TRACE_DEGREE:
                raise CocycleDescriptorError(f"truncation order {order} outside 0..{MAX_TRACE_DEGREE}")
            return cls(CocycleKind.CHERN_CHARACTER, chern_character_words(order), order=order, label=text)

        word: List[int] = []
        for factor in text.split("*"):
            match = re.fullmatch(r"c(\d+)(?:\^(\d+))?", factor.strip())
            if not match:
                raise CocycleDescriptorError(f"unknown class {text!r}")
            power, repeat = int(match.group(1)), int(match.group(2) or 1)
            if power < 1:
                raise CocycleDescriptorError(f"trace power must be positive in {text!r}")
            word.extend([power] * repeat)
        if sum(word) > MAX_TRACE_DEGREE:
            raise CocycleDescriptorError(f"{text!r} exceeds the trace degree bound {MAX_TRACE_DEGREE}")
        return cls(CocycleKind.INVARIANT_POLYNOMIAL, ((tuple(sorted(word)), Fraction(1)),), label=text)

    @property
    def polynomial(self) -> Dict[Word, Fraction]:
        return dict(self.words)

    def degrees(self) -> List[int]:
        """Polynomial degrees of the words present."""
        return sorted({sum(word) for word, _ in self.words})


def chern_character_words(order: int) -> Tuple[Tuple[Word, Fraction], ...]:
    """Tr exp(A) truncated: sum_{n<=order} Tr(A^n)/n!, with Tr(A^0) the rank."""
    words = [((n,), Fraction(1, math.factorial(n))) for n in range(1, order + 1)]
    return (((), Fraction(1)),) + tuple(words)


def restrict_polynomial(polynomial: Mapping[Word, Fraction], degree: int) -> Dict[Word, Fraction]:
    return {w: c for w, c in polynomial.items() if sum(w) == degree}


# ---------------------------------------------------------------------------
# Connections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConnectionAssignment:
    """Local connection 1-forms of the normal bundle, one q x q matrix per chart."""
    q: int
    forms: Mapping[str, MatrixForm] = field(default_factory=dict)
    name: str = "trivial"

    def __post_init__(self):
        allowed = set(chart_symbols(self.q))
        for chart, matrix in self.forms.items():
            if matrix.size != self.q or (not matrix.is_zero() and matrix.degree != 1):
                raise CocycleDescriptorError(f"connection on {chart!r} must be a {self.q}x{self.q} matrix of 1-forms")
            if set(matrix.variables) != allowed:
                raise CocycleDescriptorError(f"connection on {chart!r} must use the chart variables only")

    @classmethod
    def trivial(cls, q: int) -> "ConnectionAssignment":
        return cls(q)

    def at(self, chart_id: str) -> MatrixForm:
        if chart_id in self.forms:
            return self.forms[chart_id]
        return MatrixForm.zero(self.q, chart_symbols(self.q), 1)

    def is_trivial(self) -> bool:
        return all(m.is_zero() for m in self.forms.values())


def jacobian_omega(h: SmoothMap) -> MatrixForm:
    """J^{-1} dJ of a map, as a q x q matrix of 1-forms."""
    variables = h.variables
    if h.is_identity:
        return MatrixForm.zero(h.dim, variables, 1)
    if h.jacobian_det == 0:
        raise CocycleDescriptorError(f"Jacobian determinant of {h.describe()} vanishes identically")
    dJ = MatrixForm.from_function(h.dim, lambda i, j: exterior_d(DifferentialForm.scalar(variables, h.jacobian[i, j])))
    omega = dJ.left_multiply(h.jacobian_inverse)
    return omega.map_entries(lambda e: e.map_coefficients(sp.cancel))


def omega_h(a) -> MatrixForm:
    """omega_h = J_h^{-1} dJ_h of an embedding arrow."""
    return jacobian_omega(a.map)


def gauge(connection: MatrixForm, h: SmoothMap) -> MatrixForm:
    """J^{-1} (h^* A) J + J^{-1} dJ: the connection A transported along h."""
    omega = jacobian_omega(h)
    if connection.is_zero():
        return omega
    return connection.pullback(h).conjugate(h.jacobian, h.jacobian_inverse) + omega


def chain_rule_omega(f: SmoothMap, g: SmoothMap) -> MatrixForm:
    """omega_{g o f} via J_f^{-1} (f^* omega_g) J_f + omega_f."""
    return gauge(jacobian_omega(g), f)


def string_connection_forms(s: NerveString, conn: ConnectionAssignment) -> List[MatrixForm]:
    """The connections on the source chart along a string.

    Entry 0 is conn at the source, entry i transports conn at the target of
    h_i along the composite h_i ... h_1.
    """
    result = [conn.at(s.source)]
    composite: Optional[SmoothMap] = None
    for arrow in s.arrows:
        composite = arrow.map if composite is None else compose(arrow.map, composite)
        result.append(gauge(conn.at(arrow.dst), composite))
    return result


# ---------------------------------------------------------------------------
# Transgression
# ---------------------------------------------------------------------------

def simplex_curvature(forms: Sequence[MatrixForm]) -> Tuple[MatrixForm, Tuple[sp.Symbol, ...]]:
    """Curvature of sum_i t_i A_i on simplex x chart, with t_0 = 1 - sum t_i."""
    k = len(forms) - 1
    ts = simplex_symbols(k)
    ambient = ts + forms[0].variables
    weights = (1 - sum(ts, sp.Integer(0)),) + ts
    combined = MatrixForm.zero(forms[0].size, ambient, 1)
    for weight, form in zip(weights, forms):
        if not form.is_zero():
            combined = combined + form.embed(ambient).scale(weight)
    curvature = combined.d() + combined.wedge(combined)
    return curvature, ts


def evaluate_polynomial(polynomial: Mapping[Word, Fraction], curvature: MatrixForm) -> DifferentialForm:
    """P(Omega) for P a combination of trace words."""
    variables = curvature.variables
    traces: Dict[int, DifferentialForm] = {}
    power = None
    top = max((max(w) for w in polynomial if w), default=0)
    for n in range(1, top + 1):
        power = curvature if power is None else power.wedge(curvature)
        traces[n] = power.trace()

    total: Optional[DifferentialForm] = None
    for word, coefficient in sorted(polynomial.items()):
        term = DifferentialForm.scalar(variables, sp.Rational(coefficient.numerator, coefficient.denominator))
        if not word:
            term = term.scale(curvature.size)
        for n in word:
            term = wedge(term, traces[n])
        total = term if total is None else total + term
    return total if total is not None else DifferentialForm.zero(variables, 0)


def cs_transgression(polynomial: Mapping[Word, Fraction], forms: Sequence[MatrixForm],
                     tol: float = None, truncate: bool = True) -> DifferentialForm:
    """(-1)^k times the simplex integral of P(Omega(t)) for the convex combination of forms.

    Args:
        polynomial: Homogeneous trace-word polynomial
        forms: k+1 connection matrices on one chart
        tol: Quadrature tolerance for the integral coefficients
        truncate: Return zero without computing when the degree count forces it

    Returns:
        Form of degree 2 deg P - k on the chart
    """
    k = len(forms) - 1
    variables = forms[0].variables
    q = len(variables)
    degrees = {sum(w) for w in polynomial}
    if len(degrees) > 1:
        raise CocycleDescriptorError("cs_transgression needs a homogeneous polynomial")
    d = degrees.pop() if degrees else 0
    l = 2 * d - k
    if truncate and (d < k or l > q or l < 0):
        return DifferentialForm.zero(variables, max(l, 0))
    curvature, ts = simplex_curvature(forms)
    integrated = fiber_integrate(evaluate_polynomial(polynomial, curvature), ts, tol)
    integrated = DifferentialForm(integrated.variables, max(l, 0),
                                  {i: c for i, c in integrated.components.items() if len(i) == l})
    return integrated.scale((-1) ** k)


def cw_cocycle(p: Presentation, descriptor: CocycleDescriptor, conn: ConnectionAssignment = None,
               max_k: int = None, tol: float = None) -> CDRCochain:
    """Chern-Weil cocycle: on a string of length k, the simplex integral of P(Omega(t)).

    Components exist at (k, 2d - k) for every word degree d with d >= k and
    2d - k <= q; the others vanish identically.
    """
    q = p.dim
    conn = conn or ConnectionAssignment.trivial(q)
    max_k = q + 2 if max_k is None else max_k
    polynomial = descriptor.polynomial
    components = {}
    for d in descriptor.degrees():
        part = restrict_polynomial(polynomial, d)
        for k in range(0, min(d, max_k) + 1):
            l = 2 * d - k
            if 0 <= l <= q:
                components[(k, l)] = _cw_component(part, conn, k, tol)
    return CDRCochain(p, components, f"cw({descriptor.label or descriptor.kind.value})")


def _cw_component(polynomial, conn, k, tol):
    def value(s: NerveString) -> DifferentialForm:
        return cs_transgression(polynomial, string_connection_forms(s, conn), tol).scale((-1) ** k)
    return value


def connection_homotopy(descriptor: CocycleDescriptor, conn: ConnectionAssignment,
                        conn_prime: ConnectionAssignment, p: Presentation,
                        max_k: int = None, tol: float = None) -> CDRCochain:
    """H with D(H) = cw(conn) - cw(conn_prime).

    On a string of length k, H = sum_i (-1)^i times the simplex integral over
    (A'_0, ..., A'_i, A_i, ..., A_k).
    """
    q = p.dim
    max_k = q + 2 if max_k is None else max_k
    polynomial = descriptor.polynomial
    components = {}
    for d in descriptor.degrees():
        part = restrict_polynomial(polynomial, d)
        for k in range(0, min(d - 1, max_k) + 1):
            l = 2 * d - k - 1
            if 0 <= l <= q:
                components[(k, l)] = _homotopy_component(part, conn, conn_prime, k, tol)
    return CDRCochain(p, components, f"H({descriptor.label or descriptor.kind.value})")


def _homotopy_component(polynomial, conn, conn_prime, k, tol):
    def value(s: NerveString) -> DifferentialForm:
        ours = string_connection_forms(s, conn)
        theirs = string_connection_forms(s, conn_prime)
        total = zero_form(len(ours[0].variables), 2 * sum(next(iter(polynomial))) - k - 1)
        for i in range(k + 1):
            sequence = theirs[:i + 1] + ours[i:]
            # simplex integral = (-1)^{k+1} cs_transgression on k+2 vertices
            term = cs_transgression(polynomial, sequence, tol).scale((-1) ** (k + 1))
            total = total + term.scale((-1) ** i)
        return total
    return value


# ---------------------------------------------------------------------------
# Closed formulas
# ---------------------------------------------------------------------------

def log_det(arrow) -> sp.Expr:
    return sp.log(sp.Abs(arrow.map.jacobian_det))


def _block_trace(arrows) -> DifferentialForm:
    """Tr[omega_{g1} ^ g1^*(omega_{g2} ^ g2^*(omega_{g3} ...))]."""
    nested = jacobian_omega(arrows[-1].map)
    for arrow in reversed(arrows[:-1]):
        nested = jacobian_omega(arrow.map).wedge(nested.pullback(arrow.map))
    return nested.trace()


def _nested_blocks(arrows, partition) -> DifferentialForm:
    q = arrows[0].map.dim if arrows else len(partition)
    form = DifferentialForm.scalar(chart_symbols(q), 1)
    starts = [sum(partition[:j]) for j in range(len(partition))]
    for start, size in reversed(list(zip(starts, partition))):
        block = arrows[start:start + size]
        form = wedge(_block_trace(block), pullback_along(block, form))
    return form


def closed_formula_cocycle(descriptor: CocycleDescriptor, p: Presentation, max_k: int = None,
                           tol: float = None) -> CDRCochain:
    """The explicit cocycles for the trivial connection.

    U1(h) = log|det J_h| in bidegree (1, 0); gv and gv^alpha in bidegree
    (q+1, q) as log|det J_{h1}| times h1^* of nested block traces; the Chern
    character through the trace of the truncated exponential of the simplex
    curvature built from composite Jacobians.
    """
    q = p.dim
    kind = descriptor.kind
    if kind is CocycleKind.U1:
        return CDRCochain(p, {(1, 0): lambda s: DifferentialForm.scalar(chart_symbols(q), log_det(s.arrows[0]))},
                          "U1")
    if kind in (CocycleKind.GV, CocycleKind.BOTT_GV):
        partition = descriptor.partition or (1,) * q

        def gv_value(s: NerveString) -> DifferentialForm:
            first, rest = s.arrows[0], s.arrows[1:]
            nested = _nested_blocks(rest, partition)
            return pullback(first.map, nested).scale(log_det(first))

        return CDRCochain(p, {(q + 1, q): gv_value}, descriptor.label or kind.value)
    if kind is CocycleKind.CHERN_CHARACTER:
        max_k = q + 2 if max_k is None else max_k
        components = {}
        for d in descriptor.degrees():
            part = restrict_polynomial(descriptor.polynomial, d)
            for k in range(0, min(d, max_k) + 1):
                if 0 <= 2 * d - k <= q:
                    components[(k, 2 * d - k)] = _direct_chern_component(part, q, d, k, tol)
        return CDRCochain(p, components, descriptor.label or "ch")
    raise CocycleDescriptorError(f"no closed formula for {kind.value}")


def _direct_chern_component(polynomial, q, degree, k, tol):
    def value(s: NerveString) -> DifferentialForm:
        variables = chart_symbols(q)
        forms = [MatrixForm.zero(q, variables, 1)]
        composite: Optional[SmoothMap] = None
        for arrow in s.arrows:
            composite = arrow.map if composite is None else compose(arrow.map, composite)
            forms.append(jacobian_omega(composite))
        curvature, ts = simplex_curvature(forms)
        total = fiber_integrate(evaluate_polynomial(polynomial, curvature), ts, tol)
        l = 2 * degree - k
        return DifferentialForm(total.variables, l, {i: c for i, c in total.components.items() if len(i) == l})
    return value


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def stokes_check(p: Presentation, conn: ConnectionAssignment, descriptor: CocycleDescriptor,
                 max_k: int = None, tol: float = None, points_per_string: int = None,
                 string_limit: int = None) -> ResidualReport:
    """Residual of d cs(A_0..A_k) - (-1)^k sum_i (-1)^i cs(A_0..^A_i..A_k) on sampled strings.

    Args:
        p: Presentation supplying strings and chart points
        conn: Connection assignment
        descriptor: Trace-word polynomial
        max_k: Longest string length
        tol: Quadrature tolerance
        points_per_string: Chart points per string
        string_limit: Cap on strings per length

    Returns:
        ResidualReport over all strings, points and word degrees
    """
    q = p.dim
    max_k = q + 2 if max_k is None else max_k
    points_per_string = points_per_string or config.RESIDUAL_SAMPLES
    report = ResidualReport()
    for d in descriptor.degrees():
        part = restrict_polynomial(descriptor.polynomial, d)
        for k in range(max_k + 1):
            for s in sample_strings(p, k, string_limit):
                forms = string_connection_forms(s, conn)
                residual = exterior_d(cs_transgression(part, forms, tol))
                for i in range(len(forms) if k else 0):
                    face = forms[:i] + forms[i + 1:]
                    residual = residual - cs_transgression(part, face, tol).scale((-1) ** (k + i))
                report.components_sampled += 1
                form_residual(residual, p.sample_points(s.source, points_per_string), tol, report,
                              f"degree {d} on [{s.label()}]")
    logger.info("stokes check: max residual %.3e", report.max_residual)
    return report


@dataclass(frozen=True)
class SignCalibration:
    """The sign s with D(U1) = s C1, and how clearly the data decides it."""
    sign: int
    residual: float
    other_residual: float
    decisive: bool


def calibrate_sign(p: Presentation, tol: float = None, points_per_string: int = None,
                   string_limit: int = None, threshold: float = 1e-6) -> SignCalibration:
    """Decide s in {+1, -1} with D(U1) = s C1 by sampling.

    On data where both sides vanish (affine maps) the convention s = -1 is
    returned with decisive=False.
    """
    u1 = closed_formula_cocycle(CocycleDescriptor(CocycleKind.U1, label="u1"), p)
    c1 = cw_cocycle(p, CocycleDescriptor.parse("c1", p.dim), max_k=2, tol=tol)
    d_u1 = total_coboundary(u1)
    sweep = dict(max_k=2, points_per_string=points_per_string, string_limit=string_limit, tol=tol)
    residuals = {s: residual_sweep(d_u1 - c1.scale(s), **sweep).max_residual for s in (1, -1)}
    sign = min((-1, 1), key=lambda s: (residuals[s], s != -1))
    other = residuals[-sign]
    decisive = residuals[sign] < threshold <= other
    logger.info("sign calibration on %s: s=%d (residuals %.2e / %.2e)", p.name, sign, residuals[sign], other)
    return SignCalibration(sign, residuals[sign], other, decisive)
