"""Partition combinatorics and the Schur-Weyl distribution.

Partitions are tuples of positive integers in weakly decreasing order. All
dimension counts are exact Python integers; probabilities are returned as
floats computed from exact rationals where that is cheap.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import prod

import numpy as np

from .matcore import ResourceError

Partition = tuple[int, ...]

SSYT_MAX_N = 8
THETA_MAX_T = 60
_TABLE_MAX_WORDS = 4096


def check_partition(lam) -> Partition:
    lam = tuple(int(x) for x in lam)
    while lam and lam[-1] == 0:
        lam = lam[:-1]
    if any(x <= 0 for x in lam):
        raise ValueError(f"partition parts must be positive: {lam}")
    if any(a < b for a, b in zip(lam, lam[1:])):
        raise ValueError(f"partition must be weakly decreasing: {lam}")
    return lam


def pad(lam: Partition, d: int) -> tuple[int, ...]:
    if len(lam) > d:
        raise ValueError(f"{lam} has more than {d} parts")
    return tuple(lam) + (0,) * (d - len(lam))


def conjugate(lam: Partition) -> Partition:
    if not lam:
        return ()
    return tuple(sum(1 for x in lam if x > j) for j in range(lam[0]))


@lru_cache(maxsize=None)
def enumerate_partitions(n: int, max_parts: int) -> list[Partition]:
    """All partitions of ``n`` with at most ``max_parts`` parts.

    Ordered reverse-lexicographically, so ``(n)`` comes first.
    """
    if n < 0 or max_parts < 1:
        raise ValueError("need n >= 0 and max_parts >= 1")
    out: list[Partition] = []

    def rec(remaining: int, largest: int, parts: list[int]) -> None:
        if remaining == 0:
            out.append(tuple(parts))
            return
        if len(parts) == max_parts:
            return
        for x in range(min(remaining, largest), 0, -1):
            parts.append(x)
            rec(remaining - x, x, parts)
            parts.pop()

    rec(n, n, [])
    return out


def _hooks(lam: Partition):
    conj = conjugate(lam)
    for i, row in enumerate(lam):
        for j in range(row):
            yield i, j, (row - j - 1) + (conj[j] - i - 1) + 1


@lru_cache(maxsize=None)
def dim_sym(lam: Partition) -> int:
    """Number of standard Young tableaux of shape ``lam`` (hook-length formula)."""
    lam = check_partition(lam)
    n = sum(lam)
    num = 1
    for k in range(2, n + 1):
        num *= k
    return num // prod(h for _, _, h in _hooks(lam))


@lru_cache(maxsize=None)
def dim_gl(lam: Partition, d: int) -> int:
    """Number of SSYT of shape ``lam`` with entries in [d] (hook-content formula)."""
    lam = check_partition(lam)
    if len(lam) > d:
        return 0
    num = prod(d + j - i for i, j, _ in _hooks(lam))
    den = prod(h for _, _, h in _hooks(lam))
    return num // den


def sum_squares(lam) -> int:
    return sum(x * x for x in lam)


@dataclass(frozen=True)
class SchurWeylSpec:
    n: int
    alpha: tuple[float, ...]

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be nonnegative")
        alpha = tuple(float(a) for a in self.alpha)
        if not alpha or min(alpha) < 0 or abs(sum(alpha) - 1.0) > 1e-12:
            raise ValueError("alpha must be a probability vector")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def uniform(cls, n: int, d: int) -> "SchurWeylSpec":
        return cls(n, (1.0 / d,) * d)

    @property
    def d(self) -> int:
        return len(self.alpha)

    @property
    def is_uniform(self) -> bool:
        return max(self.alpha) - min(self.alpha) <= 1e-15


def ssyt(lam: Partition, d: int):
    """Yield every SSYT of shape ``lam`` with entries in 0..d-1, as a list of rows."""
    lam = check_partition(lam)
    cells = [(i, j) for i, row in enumerate(lam) for j in range(row)]
    grid = [[0] * row for row in lam]

    def rec(pos: int):
        if pos == len(cells):
            yield [list(r) for r in grid]
            return
        i, j = cells[pos]
        lo = grid[i][j - 1] if j > 0 else 0
        if i > 0:
            lo = max(lo, grid[i - 1][j] + 1)
        for v in range(lo, d):
            grid[i][j] = v
            yield from rec(pos + 1)

    yield from rec(0)


def schur_polynomial(lam: Partition, alpha) -> float:
    """s_lam(alpha) by summing monomials over SSYT; only for small shapes."""
    lam = check_partition(lam)
    if sum(lam) > SSYT_MAX_N:
        raise ResourceError(f"SSYT summation capped at n <= {SSYT_MAX_N}")
    alpha = list(alpha)
    total = 0.0
    for tab in ssyt(lam, len(alpha)):
        term = 1.0
        for row in tab:
            for v in row:
                term *= alpha[v]
        total += term
    return total


def sw_pmf(spec: SchurWeylSpec) -> dict[Partition, float]:
    """Exact pmf of the Schur-Weyl distribution SW^n(alpha)."""
    n, d = spec.n, spec.d
    parts = enumerate_partitions(n, d)
    if spec.is_uniform:
        total = Fraction(d) ** n
        return {lam: float(Fraction(dim_sym(lam) * dim_gl(lam, d)) / total) for lam in parts}
    if n > SSYT_MAX_N:
        raise ResourceError(f"non-uniform pmf only available for n <= {SSYT_MAX_N}")
    return {lam: dim_sym(lam) * schur_polynomial(lam, spec.alpha) for lam in parts}


def rsk_shape(word) -> Partition:
    """Shape of the RSK insertion tableau of ``word`` under row insertion.

    Each letter bumps the leftmost entry strictly greater than it.
    """
    word = list(word)
    if not word:
        raise ValueError("word must be nonempty")
    rows: list[list] = []
    for x in word:
        for row in rows:
            k = bisect_right(row, x)
            if k == len(row):
                row.append(x)
                break
            row[k], x = x, row[k]
        else:
            rows.append([x])
    return tuple(len(r) for r in rows)


@lru_cache(maxsize=64)
def _shape_table(n: int, d: int) -> tuple[list[Partition], np.ndarray]:
    shapes = enumerate_partitions(n, d)
    index = {lam: i for i, lam in enumerate(shapes)}
    table = np.array([index[rsk_shape(w)] for w in product(range(d), repeat=n)], dtype=np.int64)
    return shapes, table


def sw_sample(spec: SchurWeylSpec, rng: np.random.Generator, size: int | None = None):
    """Draw from SW^n(alpha) as the RSK shape of an i.i.d. alpha-distributed word.

    Returns one partition, or a list of ``size`` partitions.
    """
    n, d = spec.n, spec.d
    m = 1 if size is None else size
    if n == 0:
        out = [()] * m
        return out[0] if size is None else out
    words = rng.choice(d, size=(m, n), p=np.asarray(spec.alpha))
    if d ** n <= _TABLE_MAX_WORDS:
        shapes, table = _shape_table(n, d)
        codes = words @ (d ** np.arange(n - 1, -1, -1))
        out = [shapes[c] for c in table[codes]]
    else:
        out = [rsk_shape(w) for w in words.tolist()]
    return out[0] if size is None else out


@lru_cache(maxsize=None)
def _exact_sum_squares(t: int, d: int) -> Fraction:
    if t > THETA_MAX_T:
        raise ResourceError(f"exact Schur-Weyl moments capped at t <= {THETA_MAX_T}")
    acc = sum(dim_sym(lam) * dim_gl(lam, d) * sum_squares(lam) for lam in enumerate_partitions(t, d))
    return Fraction(acc) / Fraction(d) ** t


def expected_sum_squares(t: int, d: int) -> float:
    """E[sum_j lam_j^2] for lam ~ SW^t_d, exactly."""
    return float(_exact_sum_squares(t, d))


def theta(t: int, d: int) -> float:
    """E_{lam ~ SW^t_d}[sum_j lam_j^2] - t^2/d, the rescaling constant of the balanced estimator."""
    if t < 1 or d < 1:
        raise ValueError("need t >= 1 and d >= 1")
    return float(_exact_sum_squares(t, d) - Fraction(t * t, d))
