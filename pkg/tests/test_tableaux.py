from collections import Counter
from itertools import combinations, permutations, product
from math import factorial

import numpy as np
import pytest
from sympy.functions.combinatorial.numbers import partition
from hypothesis import given, settings, strategies as st

from hpshadow.matcore import ResourceError
from hpshadow.tableaux import (SchurWeylSpec, check_partition, conjugate, dim_gl, dim_sym,
                               enumerate_partitions, expected_sum_squares, pad, rsk_shape,
                               schur_polynomial, ssyt, sw_pmf, sw_sample, theta)


@st.composite
def partitions(draw, max_n=7):
    n = draw(st.integers(1, max_n))
    parts = draw(st.sampled_from(enumerate_partitions(n, n)))
    return parts


def count_syt(lam):
    """Standard Young tableaux by removing the largest entry from a corner."""
    lam = tuple(x for x in lam if x)
    if sum(lam) <= 1:
        return 1
    total = 0
    for i, row in enumerate(lam):
        if i + 1 == len(lam) or lam[i + 1] < row:
            smaller = list(lam)
            smaller[i] -= 1
            total += count_syt(tuple(smaller))
    return total


def count_ssyt_bruteforce(lam, d):
    cells = [(i, j) for i, row in enumerate(lam) for j in range(row)]
    count = 0
    for values in product(range(d), repeat=len(cells)):
        grid = dict(zip(cells, values))
        rows_ok = all(grid[i, j - 1] <= grid[i, j] for i, j in cells if j)
        cols_ok = all(grid[i - 1, j] < grid[i, j] for i, j in cells if i)
        count += rows_ok and cols_ok
    return count


def test_partition_validation():
    assert check_partition([3, 1, 0]) == (3, 1)
    with pytest.raises(ValueError):
        check_partition([1, 2])
    with pytest.raises(ValueError):
        check_partition([2, -1])
    assert pad((2, 1), 4) == (2, 1, 0, 0)


@given(partitions())
def test_conjugate_is_involution(lam):
    assert conjugate(conjugate(lam)) == lam
    assert sum(conjugate(lam)) == sum(lam)


@pytest.mark.parametrize("n", range(0, 12))
def test_partition_counts(n):
    assert len(enumerate_partitions(n, max(n, 1))) == partition(n)
    assert enumerate_partitions(n, max(n, 1))[0] == ((n,) if n else ())


@given(partitions())
def test_hook_length_matches_recursion(lam):
    assert dim_sym(lam) == count_syt(lam)


@settings(max_examples=40)
@given(partitions(max_n=5), st.integers(1, 4))
def test_hook_content_matches_bruteforce(lam, d):
    assert dim_gl(lam, d) == count_ssyt_bruteforce(lam, d)
    assert dim_gl(lam, d) == sum(1 for _ in ssyt(lam, d))


@pytest.mark.parametrize("n,d", [(3, 2), (4, 3), (5, 2), (6, 4)])
def test_schur_weyl_dimension_count(n, d):
    # (C^d)^{(x) n} = sum_lam V_lam (x) S_lam
    assert sum(dim_sym(lam) * dim_gl(lam, d) for lam in enumerate_partitions(n, d)) == d ** n
    assert sum(dim_sym(lam) ** 2 for lam in enumerate_partitions(n, n)) == factorial(n)


def test_known_dimensions():
    assert dim_gl((2, 1), 3) == 8
    assert dim_sym((3, 2)) == 5
    assert dim_gl((1, 1, 1), 2) == 0


def longest_weakly_increasing(word):
    best = 0
    for r in range(1, len(word) + 1):
        for idx in combinations(range(len(word)), r):
            sub = [word[i] for i in idx]
            if all(a <= b for a, b in zip(sub, sub[1:])):
                best = r
    return best


def longest_strictly_decreasing(word):
    best = 0
    for r in range(1, len(word) + 1):
        for idx in combinations(range(len(word)), r):
            sub = [word[i] for i in idx]
            if all(a > b for a, b in zip(sub, sub[1:])):
                best = r
    return best


@given(st.lists(st.integers(0, 3), min_size=1, max_size=8))
def test_rsk_shape_obeys_schensted(word):
    shape = rsk_shape(word)
    assert sum(shape) == len(word)
    assert shape[0] == longest_weakly_increasing(word)
    assert len(shape) == longest_strictly_decreasing(word)


def test_rsk_shape_permutation_counts():
    # RSK is a bijection S_n -> pairs of SYT, so shape counts are dim_sym^2
    counts = Counter(rsk_shape(p) for p in permutations(range(5)))
    assert counts == {lam: dim_sym(lam) ** 2 for lam in enumerate_partitions(5, 5)}


def test_sw_pmf_examples():
    pmf = sw_pmf(SchurWeylSpec.uniform(3, 2))
    assert pmf == {(3,): 0.5, (2, 1): 0.5}
    point = sw_pmf(SchurWeylSpec(4, (1.0, 0.0, 0.0)))
    assert point[(4,)] == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5), st.integers(1, 3), st.integers(0, 1000))
def test_sw_pmf_normalised_and_uniform_paths_agree(n, d, seed):
    alpha = np.random.default_rng(seed).dirichlet(np.ones(d))
    pmf = sw_pmf(SchurWeylSpec(n, tuple(alpha / alpha.sum())))
    assert sum(pmf.values()) == pytest.approx(1.0)
    uniform = sw_pmf(SchurWeylSpec.uniform(n, d))
    for lam, p in uniform.items():
        assert dim_sym(lam) * schur_polynomial(lam, [1.0 / d] * d) == pytest.approx(p)


def test_nonuniform_pmf_cap():
    with pytest.raises(ResourceError):
        sw_pmf(SchurWeylSpec(9, (0.5, 0.3, 0.2)))


def test_sw_sample_matches_pmf(rng):
    spec = SchurWeylSpec(4, (0.5, 0.3, 0.2))
    draws = Counter(sw_sample(spec, rng, size=50_000))
    pmf = sw_pmf(spec)
    tv = 0.5 * sum(abs(draws.get(lam, 0) / 50_000 - p) for lam, p in pmf.items())
    assert tv < 0.015


def test_sw_sample_long_words_without_table(rng):
    lam = sw_sample(SchurWeylSpec(64, (1.0, 0.0, 0.0, 0.0)), rng)
    assert lam == (64,)
    assert sum(sw_sample(SchurWeylSpec.uniform(100, 10), rng)) == 100


def test_theta_values():
    assert theta(1, 3) == pytest.approx(2 / 3)
    assert theta(2, 2) == pytest.approx(1.5)
    assert theta(3, 2) == pytest.approx(2.5)
    # E[sum lam^2] by direct enumeration
    for t, d in [(3, 3), (4, 2)]:
        words = list(product(range(d), repeat=t))
        direct = sum(sum(x * x for x in rsk_shape(w)) for w in words) / len(words)
        assert expected_sum_squares(t, d) == pytest.approx(direct)
