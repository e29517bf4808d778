"""Adaptive quadrature over boxes, simplices, cubes and oriented intervals."""

import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence, Tuple

import sympy as sp
from scipy import integrate
from scipy.integrate import IntegrationWarning

import config
from errors import LeafspaceError

logger = logging.getLogger(__name__)


class QuadratureError(LeafspaceError):
    """Quadrature failed: non-finite sample or no convergence."""

    def __init__(self, message: str, region: str = ""):
        super().__init__(f"{message} (region: {region})" if region else message)
        self.region = region


class QuadratureBudgetError(QuadratureError):
    """The node budget was exhausted before the tolerance was met."""


class RegionKind(Enum):
    """Integration domains."""
    BOX = "box"
    SIMPLEX = "simplex"
    CUBE = "cube"
    INTERVAL = "interval"


@dataclass(frozen=True)
class Region:
    """An integration domain over an ordered list of variables.

    BOX and INTERVAL carry explicit bounds; SIMPLEX is the standard simplex
    {t_i >= 0, sum t_i <= 1} and CUBE is [0, 1]^s, both sized by ``dim``.
    """
    kind: RegionKind
    dim: int
    bounds: Tuple[Tuple[sp.Expr, sp.Expr], ...] = ()

    @classmethod
    def box(cls, bounds):
        bounds = tuple((sp.nsimplify(a), sp.nsimplify(b)) for a, b in bounds)
        return cls(RegionKind.BOX, len(bounds), bounds)

    @classmethod
    def simplex(cls, k: int):
        return cls(RegionKind.SIMPLEX, k)

    @classmethod
    def cube(cls, s: int):
        return cls(RegionKind.CUBE, s)

    @classmethod
    def interval(cls, a, b):
        return cls(RegionKind.INTERVAL, 1, ((sp.nsimplify(a), sp.nsimplify(b)),))

    def limits(self, variables: Sequence[sp.Symbol]) -> list:
        """Sympy integration limits, innermost first."""
        variables = tuple(variables)
        if len(variables) != self.dim:
            raise QuadratureError(
                f"{self.kind.value} of dimension {self.dim} needs {self.dim} variables, got {len(variables)}",
                self.describe(),
            )
        if self.kind in (RegionKind.BOX, RegionKind.INTERVAL):
            return [(v, a, b) for v, (a, b) in zip(variables, self.bounds)]
        if self.kind is RegionKind.CUBE:
            return [(v, sp.Integer(0), sp.Integer(1)) for v in variables]
        # t_1 outermost on [0, 1], t_j on [0, 1 - t_1 - ... - t_{j-1}]
        limits = []
        for j, v in enumerate(variables):
            limits.append((v, sp.Integer(0), 1 - sum(variables[:j], sp.Integer(0))))
        return list(reversed(limits))

    def describe(self) -> str:
        if self.bounds:
            spans = ", ".join(f"[{a}, {b}]" for a, b in self.bounds)
            return f"{self.kind.value} {spans}"
        return f"{self.kind.value}^{self.dim}"


def nested_quad(func: Callable[..., float], ranges: Sequence, args: Tuple = (),
                tol: float = None, budget: int = None, region: str = "") -> float:
    """Adaptive Gauss-Kronrod quadrature with dyadic subdivision per axis.

    Args:
        func: Integrand called as func(x_0, ..., x_{n-1}, *args), x_0 innermost
        ranges: Per-axis (lo, hi) pairs or callables of the outer variables and args
        args: Extra arguments forwarded to func and the range callables
        tol: Absolute error target per axis
        budget: Maximum number of integrand evaluations
        region: Region description for error messages

    Returns:
        Integral estimate
    """
    tol = tol or config.DEFAULT_TOL
    budget = budget or config.QUAD_BUDGET
    calls = [0]

    def counted(*xs):
        calls[0] += 1
        if calls[0] > budget:
            raise QuadratureBudgetError(f"node budget of {budget} evaluations exhausted", region)
        value = func(*xs)
        if not math.isfinite(value):
            point = ", ".join(f"{x:.6g}" for x in xs[:len(ranges)])
            raise QuadratureError(f"non-finite integrand sample at ({point})", region)
        return value

    opts = {"epsabs": tol, "epsrel": 0.0, "limit": config.QUAD_SUBINTERVAL_LIMIT}
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, error = integrate.nquad(counted, list(ranges), args=tuple(args), opts=opts)
        except IntegrationWarning as exc:
            raise QuadratureError(f"no convergence: {exc}", region) from exc

    logger.debug("quadrature over %s: %.12g (est. error %.2e, %d nodes)", region, value, error, calls[0])
    return float(value)
