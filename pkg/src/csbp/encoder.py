"""Sparse {-1, 0, +1} measurement matrices with constant row weight.

Each row holds exactly ``l`` nonzero entries with iid random signs, so
encoding is ``l*m`` additions and subtractions.  The optional constant
column weight construction assigns columns to row slots layer by layer via
random permutations (one permutation per unit of column weight), redrawing
any permutation that would duplicate a (row, column) edge.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ParameterError, ParseError, ShapeError
from .rng import make_rng


@dataclass(frozen=True)
class MatrixParams:
    n: int
    m: int
    l: int
    regular_columns: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ParameterError(f"row count must be >= 1, got {self.m}")
        if not 1 <= self.l <= self.n:
            raise ParameterError(f"row weight must be in [1, n], got l={self.l} n={self.n}")
        if self.regular_columns and (self.l * self.m) % self.n != 0:
            raise ParameterError(
                f"constant column weight needs l*m divisible by n: {self.l}*{self.m} vs n={self.n}"
            )


class SparseSignMatrix:
    """Adjacency-list form: per-row column indices and signs, both (m, l)."""

    def __init__(self, m, n, l, cols, signs, seed=0):
        cols = np.asarray(cols, dtype=np.int64)
        signs = np.asarray(signs, dtype=np.int8)
        if cols.shape != (m, l) or signs.shape != (m, l):
            raise ShapeError(f"adjacency arrays must be ({m}, {l})")
        if cols.size and (cols.min() < 0 or cols.max() >= n):
            raise ParameterError("column index out of range")
        if not np.isin(signs, (-1, 1)).all():
            raise ParameterError("signs must be +-1")
        for j in range(m):
            if np.unique(cols[j]).size != l:
                raise ParameterError(f"row {j} repeats a column")
        self.m, self.n, self.l, self.seed = m, n, l, seed
        self.cols, self.signs = cols, signs

    @cached_property
    def col_adj(self):
        """(indptr, rows, signs) CSR over columns; exact transpose of rows."""
        flat_cols = self.cols.ravel()
        flat_rows = np.repeat(np.arange(self.m, dtype=np.int64), self.l)
        flat_signs = self.signs.ravel()
        order = np.argsort(flat_cols, kind="stable")
        counts = np.bincount(flat_cols, minlength=self.n)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return indptr, flat_rows[order], flat_signs[order]

    def column_weights(self) -> np.ndarray:
        return np.bincount(self.cols.ravel(), minlength=self.n)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.m, self.n))
        rows = np.repeat(np.arange(self.m), self.l)
        dense[rows, self.cols.ravel()] = self.signs.ravel()
        return dense

    def row_prefix(self, m_prime: int) -> "SparseSignMatrix":
        """Matrix restricted to the first m_prime rows."""
        if not 0 < m_prime <= self.m:
            raise ParameterError(f"prefix length must be in [1, m], got {m_prime}")
        return SparseSignMatrix(
            m_prime, self.n, self.l, self.cols[:m_prime], self.signs[:m_prime], self.seed
        )

    def __eq__(self, other):
        return (
            isinstance(other, SparseSignMatrix)
            and (self.m, self.n, self.l, self.seed) == (other.m, other.n, other.l, other.seed)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.signs, other.signs)
        )


def generate_matrix(params: MatrixParams) -> SparseSignMatrix:
    """Draw a matrix with constant row weight l, deterministic in the seed."""
    rng = make_rng(params.seed)
    m, n, l = params.m, params.n, params.l
    if params.regular_columns:
        cols = _regular_topology(rng, m, n, l)
    else:
        cols = np.empty((m, l), dtype=np.int64)
        for j in range(m):
            cols[j] = rng.choice(n, size=l, replace=False)
    signs = (rng.integers(0, 2, size=(m, l)) * 2 - 1).astype(np.int8)
    order = np.argsort(cols, axis=1, kind="stable")
    cols = np.take_along_axis(cols, order, axis=1)
    signs = np.take_along_axis(signs, order, axis=1)
    return SparseSignMatrix(m, n, l, cols, signs, params.seed)


def _regular_topology(rng, m, n, l):
    """Socket construction: r layers of random column permutations.

    Layer r fills row slots [r*n, (r+1)*n); a permutation is redrawn whenever
    it would repeat a (row, column) pair already placed.
    """
    r_weight = (l * m) // n
    socket_rows = np.arange(m * l, dtype=np.int64) // l
    row_sets = [set() for _ in range(m)]
    cols = np.empty((m, l), dtype=np.int64)
    slot_fill = np.zeros(m, dtype=np.int64)
    for layer in range(r_weight):
        rows_here = socket_rows[layer * n : (layer + 1) * n]
        for _ in range(1000):
            perm = rng.permutation(n)
            ok = True
            for row, col in zip(rows_here, perm):
                if col in row_sets[row]:
                    ok = False
                    break
            if ok:
                break
        else:
            raise ParameterError(
                f"could not place layer {layer} without duplicate edges after 1000 draws"
            )
        for row, col in zip(rows_here, perm):
            row_sets[row].add(col)
            cols[row, slot_fill[row]] = col
            slot_fill[row] += 1
    return cols


def encode(phi: SparseSignMatrix, x: np.ndarray) -> np.ndarray:
    """y(j) = sum over row j of sign * x(col); O(l*m) adds and subtracts."""
    x = np.asarray(x, dtype=float)
    if x.shape != (phi.n,):
        raise ShapeError(f"signal length {x.shape} does not match n={phi.n}")
    return (phi.signs * x[phi.cols]).sum(axis=1)


def encode_transpose(phi: SparseSignMatrix, r: np.ndarray) -> np.ndarray:
    """Adjoint product: out(i) = sum over column i of sign * r(row)."""
    r = np.asarray(r, dtype=float)
    if r.shape != (phi.m,):
        raise ShapeError(f"vector length {r.shape} does not match m={phi.m}")
    out = np.zeros(phi.n)
    np.add.at(out, phi.cols.ravel(), (phi.signs * r[:, None]).ravel())
    return out


@dataclass(frozen=True)
class RuleOfThumbResult:
    params: MatrixParams
    r: float
    m_exceeds_n: bool


def rule_of_thumb_params(
    n: int,
    s: float,
    c_m: float = 1.0,
    regular_columns: bool = False,
    seed: int = 0,
) -> RuleOfThumbResult:
    """l = round(1/s) and m = ceil(c_m * s*n*log2(n)), divisibility-adjusted.

    When constant column weight is requested, m is rounded up to the next
    multiple of n / gcd(l, n) so l*m/n is an integer.  m > n is reported via
    a flag rather than rejected.
    """
    if not 0.0 < s < 1.0:
        raise ParameterError(f"sparsity rate must be in (0, 1), got {s}")
    l = max(1, round(1.0 / s))
    l = min(l, n)
    m = math.ceil(c_m * s * n * math.log2(n))
    m = max(m, 1)
    if regular_columns:
        step = n // math.gcd(l, n)
        m = ((m + step - 1) // step) * step
    params = MatrixParams(n=n, m=m, l=l, regular_columns=regular_columns, seed=seed)
    return RuleOfThumbResult(params=params, r=l * m / n, m_exceeds_n=m > n)


def serialize_matrix(phi: SparseSignMatrix) -> str:
    """Line-oriented text form; see parse_matrix for the grammar."""
    lines = [f"csldpc v1 {phi.m} {phi.n} {phi.l} {phi.seed}"]
    for j in range(phi.m):
        for col, sign in zip(phi.cols[j], phi.signs[j]):
            lines.append(f"{j} {col} {sign:+d}")
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> SparseSignMatrix:
    """Parse the text form: header ``csldpc v1 M N L seed``, then one line
    per edge ``row col sign`` with 0-based indices and rows ascending."""
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty matrix file", line=1)
    head = lines[0].split()
    if len(head) != 6 or head[0] != "csldpc" or head[1] != "v1":
        raise ParseError(f"bad header {lines[0]!r}", line=1)
    try:
        m, n, l, seed = (int(tok) for tok in head[2:])
    except ValueError:
        raise ParseError(f"non-integer header field in {lines[0]!r}", line=1) from None
    if m < 1 or n < 1 or not 1 <= l <= n:
        raise ParseError(f"inconsistent dimensions m={m} n={n} l={l}", line=1)
    cols = np.zeros((m, l), dtype=np.int64)
    signs = np.zeros((m, l), dtype=np.int8)
    fill = np.zeros(m, dtype=np.int64)
    seen = set()
    prev_row = -1
    edge_lines = [ln for ln in lines[1:] if ln.strip()]
    if len(edge_lines) != m * l:
        raise ParseError(
            f"expected {m * l} edge lines, found {len(edge_lines)}", line=len(lines)
        )
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        toks = raw.split()
        if len(toks) != 3:
            raise ParseError(f"edge line needs 3 fields, got {raw!r}", line=lineno)
        try:
            row, col, sign = int(toks[0]), int(toks[1]), int(toks[2])
        except ValueError:
            raise ParseError(f"non-integer edge field in {raw!r}", line=lineno) from None
        if not 0 <= row < m:
            raise ParseError(f"row {row} out of range [0, {m})", line=lineno)
        if not 0 <= col < n:
            raise ParseError(f"column {col} out of range [0, {n})", line=lineno)
        if sign not in (-1, 1):
            raise ParseError(f"sign must be +-1, got {sign}", line=lineno)
        if row < prev_row:
            raise ParseError(f"rows must be ascending, saw {row} after {prev_row}", line=lineno)
        prev_row = row
        if (row, col) in seen:
            raise ParseError(f"duplicate edge ({row}, {col})", line=lineno)
        seen.add((row, col))
        if fill[row] >= l:
            raise ParseError(f"row {row} has more than {l} edges", line=lineno)
        cols[row, fill[row]] = col
        signs[row, fill[row]] = sign
        fill[row] += 1
    short = np.flatnonzero(fill != l)
    if short.size:
        raise ParseError(f"row {short[0]} has {fill[short[0]]} edges, expected {l}", line=len(lines))
    return SparseSignMatrix(m, n, l, cols, signs, seed)


def save_matrix(phi: SparseSignMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_matrix(phi))


def load_matrix(path) -> SparseSignMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_matrix(fh.read())
