"""Exact Čech cohomology and homology of embedding categories."""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from fractions import Fraction
from typing import Dict, List, Tuple

import tracing
from category import CategoryPresentation, NerveString, enumerate_nerve, orientation_sign
from forms import DimensionMismatchError
from linalg import SparseRationalMatrix

logger = logging.getLogger(__name__)


class CoefficientKind(Enum):
    TRIVIAL = "trivial"
    ORIENTATION = "orientation"


class Direction(Enum):
    COHOMOLOGY = "cohomology"
    HOMOLOGY = "homology"


@dataclass(frozen=True)
class CoefficientSystem:
    """Constant real coefficients, optionally twisted by orientation."""
    kind: CoefficientKind = CoefficientKind.TRIVIAL

    @classmethod
    def parse(cls, name: str) -> "CoefficientSystem":
        return cls(CoefficientKind(name))

    def action(self, arrow) -> int:
        if self.kind is CoefficientKind.TRIVIAL:
            return 1
        return _cached_orientation(arrow)


@lru_cache(maxsize=None)
def _cached_orientation(arrow) -> int:
    return orientation_sign(arrow)


TRIVIAL = CoefficientSystem(CoefficientKind.TRIVIAL)
ORIENTATION = CoefficientSystem(CoefficientKind.ORIENTATION)


@dataclass(frozen=True)
class BettiTable:
    degrees: Tuple[int, ...]
    betti: Tuple[int, ...]
    coefficient: str = "trivial"

    def as_dict(self) -> Dict[int, int]:
        return dict(zip(self.degrees, self.betti))


@dataclass(frozen=True)
class DualityPair:
    degree: int
    cohomology_dim: int
    compact_degree: int
    compact_dim: int

    @property
    def matches(self) -> bool:
        return self.cohomology_dim == self.compact_dim


@dataclass(frozen=True)
class DualityReport:
    codimension: int
    pairs: Tuple[DualityPair, ...]

    @property
    def passed(self) -> bool:
        return all(pair.matches for pair in self.pairs)


def _index(strings: List[NerveString]) -> Dict[Tuple[str, Tuple[str, ...]], int]:
    return {(s.source, s.ids): i for i, s in enumerate(strings)}


def coboundary_matrix(p: CategoryPresentation, k: int, c: CoefficientSystem = TRIVIAL,
                      direction: Direction = Direction.COHOMOLOGY,
                      nerve: Dict[int, List[NerveString]] = None) -> SparseRationalMatrix:
    """Matrix of the normalized coboundary from degree k to degree k+1.

    Args:
        p: Presentation
        k: Source degree
        c: Coefficient system; the first face carries its action on h_1
        direction: HOMOLOGY returns the transpose, the boundary from k+1 to k
        nerve: Optional cache of enumerated strings per degree

    Returns:
        Sparse rational matrix (rows index degree k+1 strings for cohomology)
    """
    nerve = nerve if nerve is not None else {}
    for degree in (k, k + 1):
        if degree not in nerve:
            nerve[degree] = enumerate_nerve(p, degree)
    lower, upper = nerve[k], nerve[k + 1]
    columns = _index(lower)

    triples = []
    for row, s in enumerate(upper):
        for i in range(k + 2):
            face = s.face(i, p)
            if face is None:
                continue
            coefficient = (-1) ** i
            if i == 0:
                coefficient *= c.action(s.arrows[0])
            triples.append((row, columns[(face.source, face.ids)], Fraction(coefficient)))

    matrix = SparseRationalMatrix.from_triples(len(upper), len(lower), triples)
    if direction is Direction.HOMOLOGY:
        return matrix.transpose()
    return matrix


def _ranks(p: CategoryPresentation, c: CoefficientSystem, top: int, direction: Direction):
    nerve: Dict[int, List[NerveString]] = {}
    ranks = []
    tracer = tracing.get_tracer()
    for k in range(top + 1):
        with tracing.trace_numeric(tracer, "rank", degree=k, direction=direction.value, coefficient=c.kind.value):
            ranks.append(coboundary_matrix(p, k, c, direction, nerve).rank())
    dims = [len(nerve[k]) for k in range(top + 1)]
    return dims, ranks


def betti(p: CategoryPresentation, c: CoefficientSystem = TRIVIAL, N: int = 8) -> BettiTable:
    """b_k = dim C^k - rank delta^k - rank delta^{k-1} for k = 0..N."""
    dims, ranks = _ranks(p, c, N, Direction.COHOMOLOGY)
    numbers = tuple(dims[k] - ranks[k] - (ranks[k - 1] if k else 0) for k in range(N + 1))
    logger.info("betti numbers of %s (%s): %s", p.name, c.kind.value, numbers)
    return BettiTable(tuple(range(N + 1)), numbers, c.kind.value)


def homology_betti(p: CategoryPresentation, c: CoefficientSystem = TRIVIAL, N: int = 8) -> BettiTable:
    """Dimensions of H_k from the boundary matrices, computed independently of betti."""
    dims, ranks = _ranks(p, c, N, Direction.HOMOLOGY)
    numbers = tuple(dims[k] - ranks[k] - (ranks[k - 1] if k else 0) for k in range(N + 1))
    return BettiTable(tuple(range(N + 1)), numbers, c.kind.value)


def duality_check(p: CategoryPresentation, q: int, N: int = 6) -> DualityReport:
    """Compare H^n with orientation twist to the compactly supported side in degree q - n.

    On box charts H^q_c is one-dimensional with the orientation twist, so the
    compactly supported side is the twisted homology of the category in degree n.
    """
    if q != p.dim:
        raise DimensionMismatchError(f"codimension {q} differs from the chart dimension {p.dim}")
    cohomology = betti(p, ORIENTATION, N).betti
    homology = homology_betti(p, ORIENTATION, N).betti
    pairs = tuple(DualityPair(n, cohomology[n], q - n, homology[n]) for n in range(N + 1))
    report = DualityReport(q, pairs)
    logger.info("duality for %s: %s", p.name, "pass" if report.passed else "fail")
    return report


def delta_squared_check(p: CategoryPresentation, c: CoefficientSystem = TRIVIAL, N: int = 8) -> bool:
    """delta^{k+1} delta^k == 0 exactly for k < N, in both directions."""
    nerve: Dict[int, List[NerveString]] = {}
    matrices = [coboundary_matrix(p, k, c, Direction.COHOMOLOGY, nerve) for k in range(N)]
    for k in range(N - 1):
        if not (matrices[k + 1] @ matrices[k]).is_zero():
            logger.warning("delta^2 != 0 in degree %d for %s", k, p.name)
            return False
        if not (matrices[k].transpose() @ matrices[k + 1].transpose()).is_zero():
            return False
    return True
