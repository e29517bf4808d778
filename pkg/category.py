"""Finite embedding categories, one-object models and their nerves."""

import copy
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp
from scipy.stats import qmc

import config
from errors import LeafspaceError
from forms import Box, SmoothMap, compose as compose_maps

logger = logging.getLogger(__name__)


class PresentationError(LeafspaceError):
    """Ids fail to resolve or a composition is undefined."""


class InconsistentOrientationError(LeafspaceError):
    """The Jacobian determinant changes sign on the domain box."""

    def __init__(self, arrow: str, samples: Sequence = ()):
        super().__init__(f"orientation of {arrow!r} is not constant over the sampled domain")
        self.arrow = arrow
        self.samples = list(samples)


def identity_id(chart_id: str) -> str:
    return f"id_{chart_id}"


@dataclass(frozen=True)
class Chart:
    """A transversal box chart."""
    id: str
    dim: int
    box: Box


@dataclass(frozen=True)
class EmbeddingArrow:
    """A holonomy embedding between charts."""
    id: str
    src: str
    dst: str
    map: SmoothMap
    is_identity: bool = False


@dataclass(frozen=True)
class NerveString:
    """A string of composable non-identity arrows f_1, ..., f_k starting at source."""
    source: str
    arrows: Tuple[EmbeddingArrow, ...] = ()

    @property
    def degree(self) -> int:
        return len(self.arrows)

    @property
    def target(self) -> str:
        return self.arrows[-1].dst if self.arrows else self.source

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(a.id for a in self.arrows)

    def label(self) -> str:
        return ",".join(self.ids) if self.arrows else self.source

    def head(self, k: int) -> "NerveString":
        """The first k arrows."""
        return NerveString(self.source, self.arrows[:k])

    def tail(self, k: int) -> "NerveString":
        """The arrows after the first k."""
        start = self.arrows[k - 1].dst if k else self.source
        return NerveString(start, self.arrows[k:])

    def face(self, i: int, composer) -> Optional["NerveString"]:
        """The i-th face, or None when it is degenerate.

        Face 0 drops the first arrow, the last face drops the last arrow and
        inner faces compose neighbours through the composer.
        """
        k = self.degree
        if i == 0:
            return self.tail(1)
        if i == k:
            return self.head(k - 1)
        composite = composer.compose(self.arrows[i], self.arrows[i - 1])
        if composite.is_identity:
            return None
        return NerveString(self.source, self.arrows[:i - 1] + (composite,) + self.arrows[i + 1:])


def seed_from(text: str, base: int = None) -> int:
    """Deterministic sampling seed of a text, mixed with the configured base seed."""
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:4], "big") ^ (config.DEFAULT_SEED if base is None else base)


def halton_points(box: Box, n: int, seed: int) -> np.ndarray:
    """n scrambled Halton points scaled into box."""
    dim = len(box)
    sampler = qmc.Halton(d=dim, scramble=True, seed=seed)
    unit = sampler.random(n)
    lower = np.array([float(a) for a, _ in box])
    upper = np.array([float(b) for _, b in box])
    return lower + unit * (upper - lower)


@dataclass
class ValidationFailure:
    kind: str
    message: str
    witness: str = ""


@dataclass
class ValidationReport:
    failures: List[ValidationFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def add(self, kind: str, message: str, witness: str = ""):
        self.failures.append(ValidationFailure(kind, message, witness))


class CategoryPresentation:
    """Charts, embeddings and a composition table for the composable pairs."""

    def __init__(self, charts: Sequence[Chart], arrows: Sequence[EmbeddingArrow],
                 table: Mapping[Tuple[str, str], str], name: str = "presentation", seed: int = None):
        self.name = name
        self.charts = tuple(charts)
        self.arrows = tuple(a for a in arrows if not a.is_identity)
        self.table = dict(table)
        self._charts = {c.id: c for c in self.charts}
        self._arrows: Dict[str, EmbeddingArrow] = {a.id: a for a in self.arrows}
        for chart in self.charts:
            self._arrows.setdefault(identity_id(chart.id), EmbeddingArrow(
                identity_id(chart.id), chart.id, chart.id, SmoothMap.identity(chart.dim, chart.box), True
            ))
        self.seed = seed_from(self.fingerprint()) if seed is None else seed

    @property
    def dim(self) -> int:
        return self.charts[0].dim if self.charts else 0

    def fingerprint(self) -> str:
        parts = [f"chart {c.id} {c.dim} {c.box}" for c in self.charts]
        parts += [f"arrow {a.id} {a.src} {a.dst} {a.map.describe()}" for a in self.arrows]
        parts += [f"compose {g}.{f}={h}" for (g, f), h in sorted(self.table.items())]
        return "\n".join(parts)

    def chart(self, chart_id: str) -> Chart:
        try:
            return self._charts[chart_id]
        except KeyError:
            raise PresentationError(f"unknown chart {chart_id!r}")

    def arrow(self, arrow_id: str) -> EmbeddingArrow:
        try:
            return self._arrows[arrow_id]
        except KeyError:
            raise PresentationError(f"unknown arrow {arrow_id!r}")

    def identity(self, chart_id: str) -> EmbeddingArrow:
        return self.arrow(identity_id(chart_id))

    def compose(self, g: EmbeddingArrow, f: EmbeddingArrow) -> EmbeddingArrow:
        """g after f through the table, with identities implicit."""
        if f.dst != g.src:
            raise PresentationError(f"{g.id} and {f.id} are not composable")
        if f.is_identity:
            return g
        if g.is_identity:
            return f
        try:
            return self.arrow(self.table[(g.id, f.id)])
        except KeyError:
            raise PresentationError(f"composition {g.id}.{f.id} is missing from the table")

    def outgoing(self, chart_id: str) -> List[EmbeddingArrow]:
        return sorted((a for a in self.arrows if a.src == chart_id), key=lambda a: a.id)

    def sample_points(self, chart_id: str, n: int = None) -> np.ndarray:
        n = n or config.RESIDUAL_SAMPLES
        chart = self.chart(chart_id)
        return halton_points(chart.box, n, self.seed ^ seed_from(chart_id))

    def reseeded(self, base: int) -> "CategoryPresentation":
        """A copy sampling under another base seed; this presentation is left as is."""
        other = copy.copy(self)
        other.seed = seed_from(self.fingerprint(), base)
        return other


OBJECT_ID = "R"


class OneObjectModel:
    """Free strings of embeddings of one box into itself, composed symbolically."""

    def __init__(self, dim: int, box: Box, maps: Mapping[str, SmoothMap], name: str = "model", seed: int = None):
        self.name = name
        self.box = tuple(box)
        self.chart_obj = Chart(OBJECT_ID, dim, self.box)
        self.charts = (self.chart_obj,)
        self.arrows = tuple(
            EmbeddingArrow(arrow_id, OBJECT_ID, OBJECT_ID, m) for arrow_id, m in sorted(maps.items())
        )
        self._arrows = {a.id: a for a in self.arrows}
        self._identity = EmbeddingArrow(identity_id(OBJECT_ID), OBJECT_ID, OBJECT_ID,
                                        SmoothMap.identity(dim, self.box), True)
        self.seed = seed_from(self.fingerprint()) if seed is None else seed

    @property
    def dim(self) -> int:
        return self.chart_obj.dim

    def fingerprint(self) -> str:
        parts = [f"model {self.dim} {self.box}"]
        parts += [f"map {a.id} {a.map.describe()}" for a in self.arrows]
        return "\n".join(parts)

    def chart(self, chart_id: str) -> Chart:
        if chart_id != OBJECT_ID:
            raise PresentationError(f"unknown chart {chart_id!r}")
        return self.chart_obj

    def arrow(self, arrow_id: str) -> EmbeddingArrow:
        if arrow_id in (identity_id(OBJECT_ID), "id"):
            return self._identity
        try:
            return self._arrows[arrow_id]
        except KeyError:
            raise PresentationError(f"unknown map {arrow_id!r}")

    def identity(self, chart_id: str = OBJECT_ID) -> EmbeddingArrow:
        return self._identity

    def compose(self, g: EmbeddingArrow, f: EmbeddingArrow) -> EmbeddingArrow:
        if f.is_identity:
            return g
        if g.is_identity:
            return f
        return EmbeddingArrow(f"{g.id}.{f.id}", OBJECT_ID, OBJECT_ID, compose_maps(g.map, f.map))

    def string(self, arrow_ids: Sequence[str]) -> NerveString:
        return NerveString(OBJECT_ID, tuple(self.arrow(a) for a in arrow_ids))

    def sample_points(self, chart_id: str = OBJECT_ID, n: int = None) -> np.ndarray:
        n = n or config.RESIDUAL_SAMPLES
        return halton_points(self.box, n, self.seed)

    def reseeded(self, base: int) -> "OneObjectModel":
        other = copy.copy(self)
        other.seed = seed_from(self.fingerprint(), base)
        return other


Presentation = Union[CategoryPresentation, OneObjectModel]


def validate_presentation(p: CategoryPresentation, samples: int = None) -> ValidationReport:
    """Audit charts, embeddings and the composition table.

    Args:
        p: Presentation to audit
        samples: Sample points per chart

    Returns:
        Report listing each failure with its witness
    """
    samples = samples or config.VALIDATION_SAMPLES
    report = ValidationReport()

    chart_ids = [c.id for c in p.charts]
    for chart_id in {c for c in chart_ids if chart_ids.count(c) > 1}:
        report.add("duplicate-id", f"chart id {chart_id!r} is declared twice", chart_id)
    arrow_ids = [a.id for a in p.arrows]
    for arrow_id in {a for a in arrow_ids if arrow_ids.count(a) > 1}:
        report.add("duplicate-id", f"arrow id {arrow_id!r} is declared twice", arrow_id)
    if len({c.dim for c in p.charts}) > 1:
        report.add("dimension", "charts do not share one dimension")

    points = {c.id: p.sample_points(c.id, samples) for c in p.charts}

    for a in p.arrows:
        if a.src not in chart_ids or a.dst not in chart_ids:
            report.add("resolution", f"arrow {a.id!r} refers to an undeclared chart", a.id)
            continue
        for failure in a.map.embedding_failures(points[a.src]):
            report.add("embedding", f"arrow {a.id!r}: {failure}", a.id)

    for (g_id, f_id), h_id in sorted(p.table.items()):
        for name in (g_id, f_id, h_id):
            try:
                p.arrow(name)
            except PresentationError:
                report.add("resolution", f"compose entry {g_id}.{f_id}={h_id} names unknown arrow {name!r}",
                           f"{g_id}.{f_id}")
    if not report.ok:
        return report

    for (g_id, f_id), h_id in sorted(p.table.items()):
        g, f, h = p.arrow(g_id), p.arrow(f_id), p.arrow(h_id)
        if f.dst != g.src or h.src != f.src or h.dst != g.dst:
            report.add("closure", f"compose entry {g_id}.{f_id}={h_id} does not match sources and targets",
                       f"{g_id}.{f_id}")
        elif (f.is_identity and h.id != g.id) or (g.is_identity and h.id != f.id):
            report.add("identity-law", f"compose entry {g_id}.{f_id}={h_id} violates the identity law",
                       f"{g_id}.{f_id}")

    composable = [(g, f) for f in p.arrows for g in p.arrows if f.dst == g.src]
    for g, f in composable:
        if (g.id, f.id) not in p.table:
            report.add("closure", f"composable pair {g.id}.{f.id} has no compose entry", f"{g.id}.{f.id}")
    if not report.ok:
        return report

    for h, g, f in ((h, g, f) for g, f in composable for h in p.arrows if g.dst == h.src):
        left = p.compose(p.compose(h, g), f)
        right = p.compose(h, p.compose(g, f))
        if left.id != right.id:
            report.add("associativity", f"({h.id}.{g.id}).{f.id}={left.id} but {h.id}.({g.id}.{f.id})={right.id}",
                       f"{h.id},{g.id},{f.id}")

    for g, f in composable:
        h = p.compose(g, f)
        for point in points[f.src]:
            expected = g.map(f.map(point))
            actual = h.map(point)
            if not np.all(np.abs(expected - actual) < config.CONSISTENCY_TOL):
                report.add("consistency",
                           f"{g.id}.{f.id}={h.id} disagrees with the composed maps at {point.tolist()}",
                           f"{g.id}.{f.id}")
                break

    for failure in report.failures:
        logger.info("validation failure [%s] %s", failure.kind, failure.message)
    return report


def enumerate_nerve(p: Presentation, k: int) -> List[NerveString]:
    """All strings of k composable non-identity arrows, lexicographic in arrow ids."""
    if k == 0:
        return [NerveString(c.id) for c in p.charts]
    arrows = sorted(p.arrows, key=lambda a: a.id)
    strings = [NerveString(a.src, (a,)) for a in arrows]
    for _ in range(k - 1):
        strings = [
            NerveString(s.source, s.arrows + (a,))
            for s in strings for a in arrows if a.src == s.target
        ]
    return strings


def sample_strings(p: Presentation, k: int, limit: int = None, seed: int = None) -> List[NerveString]:
    """Nerve strings of degree k, thinned to a deterministic subset of at most limit."""
    strings = enumerate_nerve(p, k)
    if limit is None or len(strings) <= limit:
        return strings
    rng = np.random.default_rng(p.seed if seed is None else seed)
    chosen = sorted(rng.choice(len(strings), size=limit, replace=False))
    return [strings[i] for i in chosen]


def orientation_sign(a: EmbeddingArrow, points: np.ndarray = None) -> int:
    """Constant sign of det J over the arrow's domain box."""
    if a.is_identity:
        return 1
    if points is None:
        points = halton_points(a.map.domain_box, config.VALIDATION_SAMPLES, seed_from(a.id))
    det = sp.lambdify(a.map.variables, a.map.jacobian_det, modules="numpy")
    signs = set()
    with np.errstate(all="ignore"):
        for point in points:
            value = float(det(*point))
            signs.add(1 if value > 0 else -1 if value < 0 else 0)
    if len(signs) != 1 or 0 in signs:
        raise InconsistentOrientationError(a.id, [list(pt) for pt in points])
    return signs.pop()


def validate_model(model: OneObjectModel, samples: int = None) -> ValidationReport:
    """Audit a one-object model: maps finite with invertible Jacobian on the box.

    Images may leave the box; containment is checked along cube paths when
    they are used.
    """
    samples = samples or config.VALIDATION_SAMPLES
    report = ValidationReport()
    if not all(float(a) < 0 < float(b) for a, b in model.box):
        report.add("box", f"model box {model.box} must contain 0 in its interior")
    points = model.sample_points(OBJECT_ID, samples)
    for a in model.arrows:
        for failure in a.map.embedding_failures(points, contained=False):
            report.add("embedding", f"map {a.id!r}: {failure}", a.id)
    return report
