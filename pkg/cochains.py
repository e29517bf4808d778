"""Čech-De Rham cochains: lazy components, products, total coboundary and residual sweeps."""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Tuple

import config
import tracing
from category import NerveString, Presentation, sample_strings
from forms import DifferentialForm, exterior_d, pullback, wedge
from symexpr import chart_symbols

logger = logging.getLogger(__name__)

Bidegree = Tuple[int, int]
StringValue = Callable[[NerveString], DifferentialForm]


def zero_form(q: int, degree: int) -> DifferentialForm:
    return DifferentialForm.zero(chart_symbols(q), degree)


def pullback_along(arrows, form: DifferentialForm) -> DifferentialForm:
    """(h_k ... h_1)^* form computed as h_1^*(h_2^*(... h_k^* form))."""
    for arrow in reversed(arrows):
        form = pullback(arrow.map, form)
    return form


@dataclass
class CDRCochain:
    """A cochain of the Čech-De Rham double complex, evaluated lazily per string.

    Components map a bidegree (k, l) to a function from degree-k strings to
    l-forms on the string's source chart; missing components are zero.
    """
    presentation: Presentation
    components: Dict[Bidegree, StringValue] = field(default_factory=dict)
    name: str = "cochain"

    def __post_init__(self):
        self.components = {
            bidegree: lru_cache(maxsize=None)(fn) for bidegree, fn in self.components.items()
            if bidegree[1] <= self.q
        }

    @property
    def q(self) -> int:
        return self.presentation.dim

    @property
    def bidegrees(self) -> List[Bidegree]:
        return sorted(self.components)

    @property
    def total_degrees(self) -> List[int]:
        return sorted({k + l for k, l in self.components})

    def value(self, k: int, l: int, string: NerveString) -> DifferentialForm:
        if string.degree != k:
            raise ValueError(f"string of degree {string.degree} evaluated in Čech degree {k}")
        fn = self.components.get((k, l))
        if fn is None:
            return zero_form(self.q, l)
        return fn(string)

    def __add__(self, other: "CDRCochain") -> "CDRCochain":
        return combine([(1, self), (1, other)], name=f"({self.name} + {other.name})")

    def __sub__(self, other: "CDRCochain") -> "CDRCochain":
        return combine([(1, self), (-1, other)], name=f"({self.name} - {other.name})")

    def scale(self, factor) -> "CDRCochain":
        return combine([(factor, self)], name=f"{factor}*{self.name}")


def combine(terms, name: str = "combination") -> CDRCochain:
    """Linear combination of cochains on one presentation."""
    presentation = terms[0][1].presentation
    bidegrees = sorted({b for _, c in terms for b in c.components})

    def component(k, l):
        def fn(s):
            total = zero_form(presentation.dim, l)
            for factor, c in terms:
                if (k, l) in c.components:
                    total = total + c.value(k, l, s).scale(factor)
            return total
        return fn

    return CDRCochain(presentation, {(k, l): component(k, l) for k, l in bidegrees}, name)


def constant_cochain(presentation: Presentation, value=1, name: str = "1") -> CDRCochain:
    """The (0, 0) cochain with a constant value on every chart."""
    q = presentation.dim
    return CDRCochain(presentation, {(0, 0): lambda s: DifferentialForm.scalar(chart_symbols(q), value)}, name)


def coboundary_value(c: CDRCochain, k: int, l: int, s: NerveString) -> DifferentialForm:
    """(delta c)(h_1..h_{k+1}) = h_1^* c(h_2..) + sum_i (-1)^i c(d_i s)."""
    total = pullback(s.arrows[0].map, c.value(k, l, s.tail(1)))
    for i in range(1, k + 2):
        face = s.face(i, c.presentation)
        if face is None:
            continue
        total = total + c.value(k, l, face).scale((-1) ** i)
    return total


def total_coboundary(c: CDRCochain) -> CDRCochain:
    """D = delta + (-1)^k d on C^{k,l}."""
    contributions: Dict[Bidegree, List[Callable]] = {}
    for k, l in c.components:
        contributions.setdefault((k + 1, l), []).append(
            lambda s, k=k, l=l: coboundary_value(c, k, l, s)
        )
        if l + 1 <= c.q:
            contributions.setdefault((k, l + 1), []).append(
                lambda s, k=k, l=l: exterior_d(c.value(k, l, s)).scale((-1) ** k)
            )

    def component(bidegree):
        parts = contributions[bidegree]

        def fn(s):
            total = zero_form(c.q, bidegree[1])
            for part in parts:
                total = total + part(s)
            return total
        return fn

    return CDRCochain(c.presentation, {b: component(b) for b in contributions}, f"D({c.name})")


def cochain_product(a: CDRCochain, b: CDRCochain) -> CDRCochain:
    """(a.b)(h_1..h_{k+k'}) = (-1)^{k k'} a(h_1..h_k) ^ (h_k..h_1)^* b(h_{k+1}..)."""
    q = a.q
    pieces: Dict[Bidegree, List[Tuple[Bidegree, Bidegree]]] = {}
    for ka, la in a.components:
        for kb, lb in b.components:
            if la + lb <= q:
                pieces.setdefault((ka + kb, la + lb), []).append(((ka, la), (kb, lb)))

    def component(bidegree):
        def fn(s):
            total = zero_form(q, bidegree[1])
            for (ka, la), (kb, lb) in pieces[bidegree]:
                left = a.value(ka, la, s.head(ka))
                right = pullback_along(s.arrows[:ka], b.value(kb, lb, s.tail(ka)))
                total = total + wedge(left, right).scale((-1) ** (ka * kb))
            return total
        return fn

    return CDRCochain(a.presentation, {bd: component(bd) for bd in pieces}, f"{a.name}*{b.name}")


@dataclass
class ResidualReport:
    """Largest absolute coefficient met while sampling a cochain."""
    max_residual: float = 0.0
    components_sampled: int = 0
    points_sampled: int = 0
    worst: str = ""

    def merge(self, other: "ResidualReport") -> "ResidualReport":
        worst = self if self.max_residual >= other.max_residual else other
        return ResidualReport(
            max(self.max_residual, other.max_residual),
            self.components_sampled + other.components_sampled,
            self.points_sampled + other.points_sampled,
            worst.worst,
        )

    def observe(self, value: float, where: str):
        self.points_sampled += 1
        if not self.worst or value > self.max_residual:
            self.max_residual = value
            self.worst = where


def form_residual(form: DifferentialForm, points, tol: float, report: ResidualReport, where: str):
    variables = chart_symbols(len(points[0])) if len(points) else ()
    for point in points:
        report.observe(form.max_abs(dict(zip(variables, point)), tol), f"{where} at {list(map(float, point))}")


def residual_sweep(c: CDRCochain, max_k: int = None, points_per_string: int = None,
                   string_limit: int = None, tol: float = None) -> ResidualReport:
    """Sample every component of c on strings and chart points.

    Args:
        c: Cochain expected to vanish
        max_k: Largest Čech degree sampled (default q + 2)
        points_per_string: Points per source chart
        string_limit: Cap on strings per Čech degree
        tol: Quadrature tolerance for integral coefficients

    Returns:
        ResidualReport with the largest coefficient seen
    """
    p = c.presentation
    max_k = p.dim + 2 if max_k is None else max_k
    points_per_string = points_per_string or config.RESIDUAL_SAMPLES
    tol = tol or config.DEFAULT_TOL
    report = ResidualReport()
    tracer = tracing.get_tracer()
    with tracing.trace_numeric(tracer, "residual_sweep", cochain=c.name, max_k=max_k):
        for k, l in c.bidegrees:
            if k > max_k:
                continue
            for s in sample_strings(p, k, string_limit):
                points = p.sample_points(s.source, points_per_string)
                form = c.value(k, l, s)
                report.components_sampled += 1
                form_residual(form, points, tol, report, f"({k},{l}) on [{s.label()}]")
    logger.info("residual sweep of %s: max %.3e over %d components", c.name, report.max_residual,
                report.components_sampled)
    return report


def leibniz_check(a: CDRCochain, b: CDRCochain, degree_a: int, **sweep) -> ResidualReport:
    """Residual of D(a.b) - (Da).b - (-1)^{deg a} a.(Db)."""
    lhs = total_coboundary(cochain_product(a, b))
    first = cochain_product(total_coboundary(a), b)
    second = cochain_product(a, total_coboundary(b)).scale((-1) ** degree_a)
    return residual_sweep(lhs - first - second, **sweep)

