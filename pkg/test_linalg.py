"""Tests for exact sparse rational linear algebra."""

from fractions import Fraction

import pytest
import sympy as sp

from linalg import MatrixShapeError, SparseRationalMatrix


def _random_matrix(rng, rows, cols, density=0.4):
    dense = []
    for _ in range(rows):
        row = []
        for _ in range(cols):
            row.append(int(rng.integers(-3, 4)) if rng.random() < density else 0)
        dense.append(row)
    return dense


def test_rank_matches_sympy(rng):
    """Fraction-free rank agrees with sympy on random integer matrices."""
    for _ in range(40):
        rows, cols = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        dense = _random_matrix(rng, rows, cols)
        assert SparseRationalMatrix.from_dense(dense).rank() == sp.Matrix(dense).rank()


def test_rank_of_dependent_rows():
    m = SparseRationalMatrix.from_dense([[1, 2, 3], [2, 4, 6], [0, 1, Fraction(1, 2)]])
    assert m.rank() == 2


def test_nullspace_is_kernel(rng):
    """Nullspace vectors are annihilated and have the right count."""
    for _ in range(20):
        dense = _random_matrix(rng, 4, 6, density=0.6)
        m = SparseRationalMatrix.from_dense(dense)
        basis = m.nullspace()
        assert len(basis) == m.cols - m.rank()
        for vector in basis:
            column = SparseRationalMatrix(len(vector), 1, {(i, 0): v for i, v in enumerate(vector)})
            assert (m @ column).is_zero()


def test_triples_are_summed():
    """Repeated positions add; zeros are dropped."""
    m = SparseRationalMatrix.from_triples(2, 2, [(0, 0, 1), (0, 0, -1), (1, 0, Fraction(1, 3)), (1, 0, 1)])
    assert m.nnz == 1
    assert m[1, 0] == Fraction(4, 3)
    assert m.transpose()[0, 1] == Fraction(4, 3)


def test_shape_errors():
    with pytest.raises(MatrixShapeError):
        SparseRationalMatrix(2, 2, {(2, 0): 1})
    with pytest.raises(MatrixShapeError):
        SparseRationalMatrix(2, 3) @ SparseRationalMatrix(2, 3)


def test_product_matches_dense():
    a = SparseRationalMatrix.from_dense([[1, 2], [0, 1]])
    b = SparseRationalMatrix.from_dense([[3, 0], [1, 1]])
    assert (a @ b).to_dense() == [[5, 2], [1, 1]]
