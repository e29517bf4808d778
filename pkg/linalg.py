"""Exact sparse rational matrices: fraction-free rank and nullspaces."""

import heapq
import logging
from fractions import Fraction
from math import gcd, lcm
from typing import Dict, Iterable, List, Mapping, Tuple

from errors import LeafspaceError

logger = logging.getLogger(__name__)


class MatrixShapeError(LeafspaceError):
    """Entries fall outside the matrix or shapes do not multiply."""


class SparseRationalMatrix:
    """A rows x cols matrix of exact rationals stored as a dict of nonzeros."""

    def __init__(self, rows: int, cols: int, entries: Mapping[Tuple[int, int], Fraction] = None):
        self.rows = rows
        self.cols = cols
        self._entries: Dict[Tuple[int, int], Fraction] = {}
        for (r, c), value in (entries or {}).items():
            if not (0 <= r < rows and 0 <= c < cols):
                raise MatrixShapeError(f"entry ({r}, {c}) outside a {rows}x{cols} matrix")
            value = Fraction(value)
            if value != 0:
                self._entries[(r, c)] = value

    @classmethod
    def from_triples(cls, rows: int, cols: int, triples: Iterable[Tuple[int, int, Fraction]]):
        """Build from (row, col, value) triples; repeated positions are summed."""
        entries: Dict[Tuple[int, int], Fraction] = {}
        for r, c, value in triples:
            entries[(r, c)] = entries.get((r, c), Fraction(0)) + Fraction(value)
        return cls(rows, cols, entries)

    @classmethod
    def from_dense(cls, dense: List[List]):
        rows = len(dense)
        cols = len(dense[0]) if rows else 0
        return cls(rows, cols, {(r, c): v for r, row in enumerate(dense) for c, v in enumerate(row)})

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols

    @property
    def nnz(self) -> int:
        return len(self._entries)

    def __getitem__(self, position: Tuple[int, int]) -> Fraction:
        return self._entries.get(position, Fraction(0))

    def __eq__(self, other):
        return isinstance(other, SparseRationalMatrix) and self.shape == other.shape and self._entries == other._entries

    def __repr__(self):
        return f"SparseRationalMatrix({self.rows}x{self.cols}, nnz={self.nnz})"

    def triples(self) -> List[Tuple[int, int, Fraction]]:
        return [(r, c, v) for (r, c), v in sorted(self._entries.items())]

    def is_zero(self) -> bool:
        return not self._entries

    def transpose(self) -> "SparseRationalMatrix":
        return SparseRationalMatrix(self.cols, self.rows, {(c, r): v for (r, c), v in self._entries.items()})

    def row_dicts(self) -> Dict[int, Dict[int, Fraction]]:
        rows: Dict[int, Dict[int, Fraction]] = {}
        for (r, c), v in self._entries.items():
            rows.setdefault(r, {})[c] = v
        return rows

    def __matmul__(self, other: "SparseRationalMatrix") -> "SparseRationalMatrix":
        if self.cols != other.rows:
            raise MatrixShapeError(f"cannot multiply {self.shape} by {other.shape}")
        right = other.row_dicts()
        product: Dict[Tuple[int, int], Fraction] = {}
        for (r, m), a in self._entries.items():
            for c, b in right.get(m, {}).items():
                product[(r, c)] = product.get((r, c), Fraction(0)) + a * b
        return SparseRationalMatrix(self.rows, other.cols, product)

    def to_dense(self) -> List[List[Fraction]]:
        dense = [[Fraction(0)] * self.cols for _ in range(self.rows)]
        for (r, c), v in self._entries.items():
            dense[r][c] = v
        return dense

    def rank(self) -> int:
        return fraction_free_rank(self)

    def nullspace(self) -> List[List[Fraction]]:
        return nullspace(self)


def _integer_rows(matrix: SparseRationalMatrix) -> Dict[int, Dict[int, int]]:
    rows = {}
    for r, row in matrix.row_dicts().items():
        scale = lcm(*(v.denominator for v in row.values()))
        integer_row = {c: int(v * scale) for c, v in row.items()}
        rows[r] = _primitive(integer_row)
    return rows


def _primitive(row: Dict[int, int]) -> Dict[int, int]:
    content = 0
    for v in row.values():
        content = gcd(content, v)
        if content == 1:
            return row
    if content > 1:
        return {c: v // content for c, v in row.items()}
    return row


def fraction_free_rank(matrix: SparseRationalMatrix) -> int:
    """Rank by fraction-free elimination over the integers with Markowitz pivoting.

    Rows are cleared of denominators, eliminated with integer cross
    multiplication and kept primitive by removing their content.
    """
    rows = _integer_rows(matrix)
    columns: Dict[int, set] = {}
    for r, row in rows.items():
        for c in row:
            columns.setdefault(c, set()).add(r)

    rank = 0
    while rows:
        # Markowitz cost (|row| - 1)(|col| - 1) over the shortest rows
        shortest = heapq.nsmallest(8, rows, key=lambda r: (len(rows[r]), r))
        best = None
        for r in shortest:
            for c in rows[r]:
                cost = ((len(rows[r]) - 1) * (len(columns[c]) - 1), r, c)
                if best is None or cost < best:
                    best = cost
        _, pivot_row, pivot_col = best
        pivot = rows.pop(pivot_row)
        for c in pivot:
            columns[c].discard(pivot_row)
        a = pivot[pivot_col]
        rank += 1

        for r in sorted(columns[pivot_col]):
            row = rows[r]
            b = row[pivot_col]
            updated = {c: a * v for c, v in row.items()}
            for c, v in pivot.items():
                value = updated.get(c, 0) - b * v
                if value:
                    updated[c] = value
                else:
                    updated.pop(c, None)
            for c in row:
                if c not in updated:
                    columns[c].discard(r)
            for c in updated:
                columns.setdefault(c, set()).add(r)
            if updated:
                rows[r] = _primitive(updated)
            else:
                del rows[r]
        columns.pop(pivot_col, None)

    logger.debug("rank of %dx%d matrix (nnz=%d): %d", matrix.rows, matrix.cols, matrix.nnz, rank)
    return rank


def nullspace(matrix: SparseRationalMatrix) -> List[List[Fraction]]:
    """Basis of the right kernel by reduced row echelon form over Fraction.

    Returns:
        One vector per free column, with a 1 in that column
    """
    rows = [dict(row) for _, row in sorted(matrix.row_dicts().items())]
    pivots: List[Tuple[int, Dict[int, Fraction]]] = []
    for row in rows:
        for col, pivot_row in pivots:
            if col in row:
                factor = row[col]
                for c, v in pivot_row.items():
                    value = row.get(c, Fraction(0)) - factor * v
                    if value:
                        row[c] = value
                    else:
                        row.pop(c, None)
        if not row:
            continue
        col = min(row)
        lead = row[col]
        row = {c: v / lead for c, v in row.items()}
        for _, other_row in pivots:
            if col in other_row:
                factor = other_row[col]
                for c, v in row.items():
                    value = other_row.get(c, Fraction(0)) - factor * v
                    if value:
                        other_row[c] = value
                    else:
                        other_row.pop(c, None)
        pivots.append((col, row))

    pivot_cols = {col for col, _ in pivots}
    basis = []
    for free in range(matrix.cols):
        if free in pivot_cols:
            continue
        vector = [Fraction(0)] * matrix.cols
        vector[free] = Fraction(1)
        for col, row in pivots:
            vector[col] = -row.get(free, Fraction(0))
        basis.append(vector)
    return basis
