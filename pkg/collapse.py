"""Collapse of Čech-De Rham cocycles to constant-coefficient Čech cocycles, and Thurston's formula."""

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

import config
import tracing
from category import EmbeddingArrow, NerveString, OneObjectModel
from chernweil import CocycleDescriptor, closed_formula_cocycle
from cochains import CDRCochain, ResidualReport
from errors import LeafspaceError
from forms import box_contains, pullback_by_substitution
from quadrature import Region
from symexpr import chart_symbols, diff_expr, evaluate_expr, integrate_region, substitute

logger = logging.getLogger(__name__)


class CubePathError(LeafspaceError):
    """A nested scaling path leaves the model box or meets a pole."""

    def __init__(self, s: int, message: str):
        self.s = s
        super().__init__(f"cube stage {s}: {message}")


class CollapseTermError(LeafspaceError):
    """Evaluating the s-th collapse term failed."""

    def __init__(self, s: int, message: str):
        self.s = s
        super().__init__(f"collapse term s={s}: {message}")


@lru_cache(maxsize=None)
def cube_symbol(i: int) -> sp.Symbol:
    return sp.Symbol(f"tau{i}", real=True)


def cube_symbols(s: int) -> Tuple[sp.Symbol, ...]:
    return tuple(cube_symbol(i) for i in range(1, s + 1))


@dataclass(frozen=True)
class CubeMap:
    """I(tau_1..tau_s) = sigma_s(... sigma_1(0) tau_1 ...) tau_s, one expression per chart coordinate."""
    arrows: Tuple[EmbeddingArrow, ...]
    components: Tuple[sp.Expr, ...]

    @property
    def s(self) -> int:
        return len(self.arrows)

    @property
    def variables(self) -> Tuple[sp.Symbol, ...]:
        return cube_symbols(self.s)

    def substitution(self):
        return dict(zip(chart_symbols(len(self.components)), self.components))


def _stage_points(arrows: Sequence[EmbeddingArrow], q: int) -> List[Tuple[sp.Expr, ...]]:
    """Points p_0 = 0, p_j = sigma_j(p_{j-1}) tau_j."""
    variables = chart_symbols(q)
    points = [tuple(sp.Integer(0) for _ in range(q))]
    for j, arrow in enumerate(arrows, start=1):
        binding = dict(zip(variables, points[-1]))
        image = tuple(substitute(c, binding) for c in arrow.map.components)
        points.append(tuple(c * cube_symbol(j) for c in image))
    return points


def validate_cube_path(arrows: Sequence[EmbeddingArrow], box, samples: int = None):
    """Check every stage sigma_j(p_{j-1}) on a grid of the earlier scalings.

    Raises:
        CubePathError: An image is non-finite or leaves the box
    """
    samples = samples or config.CUBE_PATH_SAMPLES
    q = len(box)
    variables = chart_symbols(q)
    grid = np.linspace(0.0, 1.0, samples)
    points = _stage_points(arrows, q)
    for j, arrow in enumerate(arrows, start=1):
        taus = cube_symbols(j - 1)
        binding = dict(zip(variables, points[j - 1]))
        image = [substitute(c, binding) for c in arrow.map.components]
        start = sp.lambdify(taus, list(points[j - 1]), modules="numpy")
        mapped = sp.lambdify(taus, image, modules="numpy")
        for taus_value in itertools.product(grid, repeat=j - 1):
            with np.errstate(all="ignore"):
                before = np.asarray(start(*taus_value), dtype=float)
                after = np.asarray(mapped(*taus_value), dtype=float)
            if not box_contains(box, before):
                raise CubePathError(j, f"point {before.tolist()} before {arrow.id!r} leaves the box")
            if not np.all(np.isfinite(after)) or not box_contains(box, after):
                raise CubePathError(j, f"{arrow.id!r} sends {before.tolist()} to {after.tolist()} outside the box")


def cube_map(arrows: Sequence[EmbeddingArrow], box=None) -> CubeMap:
    """The nested scaling cube of a string of model maps.

    Args:
        arrows: sigma_1, ..., sigma_s
        box: Model box; the path is validated against it when given

    Returns:
        CubeMap in the variables tau1..taus
    """
    arrows = tuple(arrows)
    if not arrows:
        raise CubePathError(0, "a cube needs at least one map")
    q = arrows[0].map.dim
    if box is not None:
        validate_cube_path(arrows, box)
    return CubeMap(arrows, _stage_points(arrows, q)[-1])


def collapse_sign(n: int, s: int) -> int:
    return -1 if (n * (s - 1) + s * (s - 1) // 2) % 2 else 1


def _collapse_term(u: CDRCochain, model: OneObjectModel, ids: Sequence[str], s: int, tol: float) -> float:
    n = len(ids)
    q = model.dim
    form = u.value(n - s, s, model.string(ids[s:]))
    if form.is_zero():
        return 0.0
    if s == 0:
        return evaluate_expr(form.coefficient(()), {v: 0.0 for v in chart_symbols(q)}, tol)
    cube = cube_map([model.arrow(a) for a in ids[:s]])
    pulled = pullback_by_substitution(form, cube.variables, cube.substitution(), cube.variables)
    coefficient = pulled.coefficient(tuple(range(s)))
    if coefficient == 0:
        return 0.0
    return integrate_region(coefficient, Region.cube(s), cube.variables, tol)


def collapse_cocycle(u: CDRCochain, model: OneObjectModel, ids: Sequence[str], tol: float = None) -> float:
    """Sum over s of (-1)^{n(s-1)+s(s-1)/2} times the integral of u_{n-s}(sigma_{s+1}..sigma_n) over the s-cube.

    Args:
        u: Cochain of total degree n = len(ids) on the model
        model: One-object model holding the maps
        ids: sigma_1, ..., sigma_n by map id
        tol: Quadrature tolerance

    Returns:
        The collapsed Čech value
    """
    tol = tol or config.DEFAULT_TOL
    n = len(ids)
    terms = [s for s in range(n + 1) if (n - s, s) in u.components]
    if not terms:
        return 0.0
    highest = max(terms)
    if highest:
        validate_cube_path([model.arrow(a) for a in ids[:highest]], model.box)
    total = 0.0
    tracer = tracing.get_tracer()
    with tracing.trace_numeric(tracer, "collapse", cochain=u.name, string=",".join(ids)):
        for s in terms:
            try:
                value = _collapse_term(u, model, ids, s, tol)
            except CubePathError:
                raise
            except LeafspaceError as exc:
                raise CollapseTermError(s, str(exc)) from exc
            total += collapse_sign(n, s) * value
    return total


def thurston_integrand(sigma2: EmbeddingArrow, sigma3: EmbeddingArrow) -> sp.Expr:
    """log|sigma2'| (sigma3''/sigma3') o sigma2 * sigma2'."""
    x = chart_symbols(1)[0]
    g, h = sigma2.map.components[0], sigma3.map.components[0]
    dg = diff_expr(g, x)
    dh = diff_expr(h, x)
    ratio = substitute(diff_expr(dh, x) / dh, {x: g})
    return sp.log(sp.Abs(dg)) * ratio * dg


def thurston_gv(sigma1: EmbeddingArrow, sigma2: EmbeddingArrow, sigma3: EmbeddingArrow,
                tol: float = None, samples: int = None) -> float:
    """Integral over [0, sigma1(0)] of the Thurston integrand, orientation kept.

    Raises:
        CubePathError: The integrand has a pole on the segment
    """
    if sigma1.map.dim != 1:
        raise CubePathError(1, "the Thurston formula needs one-dimensional maps")
    tol = tol or config.DEFAULT_TOL
    samples = samples or config.CUBE_PATH_SAMPLES
    x = chart_symbols(1)[0]
    end = substitute(sigma1.map.components[0], {x: sp.Integer(0)})
    integrand = thurston_integrand(sigma2, sigma3)
    if end == 0 or integrand == 0:
        return 0.0
    grid = np.linspace(0.0, float(end), samples)
    with np.errstate(all="ignore"):
        values = np.broadcast_to(np.asarray(sp.lambdify(x, integrand, modules="numpy")(grid), dtype=float),
                                 grid.shape)
    if not np.all(np.isfinite(values)):
        bad = grid[~np.isfinite(values)][0]
        raise CubePathError(1, f"Thurston integrand has a pole near {bad:.6g}")
    value = integrate_region(integrand, Region.interval(0, end), (x,), tol)
    logger.debug("thurston(%s, %s, %s) = %.12g", sigma1.id, sigma2.id, sigma3.id, value)
    return value


def cech_cocycle_check(fn: Callable[[NerveString], float], n: int, strings: Sequence[NerveString],
                       composer) -> ResidualReport:
    """max |sum_i (-1)^i fn(d_i s)| over strings of length n+1, constant coefficients."""
    report = ResidualReport()
    for s in strings:
        if s.degree != n + 1:
            raise ValueError(f"string of length {s.degree} in a degree {n} cocycle check")
        total = 0.0
        for i in range(n + 2):
            face = s.face(i, composer)
            if face is not None:
                total += (-1) ** i * fn(face)
        report.components_sampled += 1
        report.observe(abs(total), f"[{s.label()}]")
    return report


def thurston_cochain(model: OneObjectModel, tol: float = None) -> Callable[[NerveString], float]:
    def value(s: NerveString) -> float:
        return thurston_gv(*s.arrows, tol=tol)
    return value


def sample_model_strings(model: OneObjectModel, length: int, count: int, maps: Sequence[str] = None,
                         seed: int = None) -> List[NerveString]:
    """count strings of the given length drawn from the model maps, deterministic in the seed."""
    rng = np.random.default_rng(model.seed if seed is None else seed)
    ids = list(maps) if maps else [a.id for a in model.arrows]
    return [model.string([ids[i] for i in rng.integers(len(ids), size=length)]) for _ in range(count)]


@dataclass(frozen=True)
class CollapseCheckReport:
    triples: Tuple[Tuple[str, str, str], ...]
    thurston_values: Tuple[float, ...]
    collapse_values: Tuple[float, ...]
    cocycle_residual: Optional[float] = None

    @property
    def max_discrepancy(self) -> float:
        return max((abs(a - b) for a, b in zip(self.thurston_values, self.collapse_values)), default=0.0)


def collapse_check(model: OneObjectModel, triples: Sequence[Sequence[str]], tol: float = None,
                   cocycle_samples: int = 0, cocycle_maps: Sequence[str] = None) -> CollapseCheckReport:
    """Compare the collapsed gv cocycle with the Thurston formula on each triple.

    Args:
        model: One-dimensional one-object model
        triples: Map id triples (sigma1, sigma2, sigma3)
        tol: Quadrature tolerance
        cocycle_samples: When positive, also sweep the Thurston cocycle identity on that many 4-strings
        cocycle_maps: Map ids the 4-strings are drawn from (default: all)

    Returns:
        CollapseCheckReport with both value lists
    """
    gv = closed_formula_cocycle(CocycleDescriptor.parse("gv", model.dim), model)
    thurston_values, collapse_values = [], []
    for triple in triples:
        arrows = [model.arrow(a) for a in triple]
        thurston_values.append(thurston_gv(*arrows, tol=tol))
        collapse_values.append(collapse_cocycle(gv, model, tuple(triple), tol))
    residual = None
    if cocycle_samples:
        strings = sample_model_strings(model, 4, cocycle_samples, cocycle_maps)
        residual = cech_cocycle_check(thurston_cochain(model, tol), 3, strings, model).max_residual
    report = CollapseCheckReport(tuple(tuple(t) for t in triples), tuple(thurston_values),
                                 tuple(collapse_values), residual)
    logger.info("collapse check on %s: max discrepancy %.3e", model.name, report.max_discrepancy)
    return report
