from collections import Counter

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from hpshadow.fileio import FormatError
from hpshadow.matcore import (InvariantError, check_density, inner, make_rng, op_norm, random_density,
                              random_hermitian)
from hpshadow.oracle import StateOracle
from hpshadow.schurweyl import weak_schur_pmf
from hpshadow.splitting import (ClassicalShadow, MixtureOracle, SplitOracle, SplitSignature,
                                build_shadow, choose_b, dsplit, flattening_state, lower_median,
                                predicted_epsilon, random_basis_estimate, recenter_state, repetitions,
                                rough_tomography, simulate_mixture_access, split)


@st.composite
def split_cases(draw):
    d = draw(st.integers(1, 4))
    b = tuple(draw(st.lists(st.integers(0, 3), min_size=d, max_size=d)))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return SplitSignature(b), make_rng(seed)


def test_split_matches_worked_example():
    a11, a12, a21, a22 = sp.symbols("a11 a12 a21 a22")
    got = sp.Matrix(split(np.array([[a11, a12], [a21, a22]], dtype=object), SplitSignature((2, 1))))
    q, h = sp.Rational(1, 4), sp.Rational(1, 2)
    expected = sp.Matrix([
        [q * a11, 0, 0, 0, q * a12, 0],
        [0, q * a11, 0, 0, q * a12, 0],
        [0, 0, q * a11, 0, 0, q * a12],
        [0, 0, 0, q * a11, 0, q * a12],
        [q * a21, q * a21, 0, 0, h * a22, 0],
        [0, 0, q * a21, q * a21, 0, h * a22],
    ])
    assert (got - expected).expand() == sp.zeros(6, 6)


def test_trivial_signature(rng):
    m = random_hermitian(3, rng)
    sig = SplitSignature((0, 0, 0))
    assert np.array_equal(split(m, sig), m)
    assert np.array_equal(dsplit(m, sig), m)


def test_dsplit_identity():
    sig = SplitSignature((2, 0, 1))
    assert np.array_equal(dsplit(np.eye(3), sig), np.eye(sig.k))


@settings(max_examples=200, deadline=None)
@given(split_cases())
def test_splitting_properties(case):
    sig, r = case
    m, n = random_hermitian(sig.d, r), random_hermitian(sig.d, r)
    sm, dn = split(m, sig), dsplit(n, sig)
    assert np.trace(sm).real == pytest.approx(np.trace(m).real, abs=1e-12)
    assert np.linalg.norm(sm) <= np.linalg.norm(m) + 1e-12
    assert abs(inner(sm, dn) - inner(m, n)) < 1e-10
    assert np.linalg.norm(dn) <= 2 * np.sqrt(sig.k) * op_norm(n) + 1e-12
    # linearity
    c = 0.3 - 1.7j
    assert np.allclose(split(m + c * n, sig), sm + c * split(n, sig))
    assert np.allclose(dsplit(m + c * n, sig), dsplit(m, sig) + c * dn)


@settings(max_examples=50, deadline=None)
@given(split_cases())
def test_split_of_state_is_state(case):
    sig, r = case
    check_density(split(random_density(sig.d, r), sig))


@pytest.mark.parametrize("spectrum,b,k", [
    ((0.5, 0.5), (0, 0), 2),
    ((1.0, 0.0), (1, 0), 3),
    ((0.7, 0.1, 0.1, 0.1), (2, 0, 0, 0), 7),
    ((1e-14, 1.0 - 1e-14), (0, 1), 3),
])
def test_choose_b_examples(spectrum, b, k):
    sig = choose_b(spectrum)
    assert sig.b == b and sig.k == k


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_choose_b_flattens(d, seed):
    lam = np.random.default_rng(seed).dirichlet(np.ones(d) * 0.3)
    sig = choose_b(lam)
    assert sig.k <= 4 * d
    assert op_norm(split(np.diag(lam), sig)) <= 1 / d + 1e-12


def test_recenter_identity(rng):
    for _ in range(20):
        d = int(rng.integers(1, 4))
        rho = random_density(d, rng)
        lam = rng.dirichlet(np.ones(d))
        sig = choose_b(lam)
        tilde = recenter_state(rho, np.diag(lam), sig)
        check_density(tilde)
        assert np.abs(tilde - np.eye(sig.k) / sig.k - 0.25 * split(rho - np.diag(lam), sig)).max() < 1e-12


def test_recenter_examples(rng):
    sig = SplitSignature((0, 0, 0))
    assert np.allclose(recenter_state(np.eye(3) / 3, np.eye(3) / 3, sig), np.eye(3) / 3)
    rough = random_density(2, rng)
    w = np.linalg.eigvalsh(rough)
    rho = np.diag(w) + 1e-3 * np.array([[0, 1], [1, 0]]) / np.sqrt(2)
    sig = choose_b(w)
    gap = recenter_state(rho, np.diag(w), sig) - np.eye(sig.k) / sig.k
    assert np.linalg.norm(gap) <= 2.5e-4 + 1e-15


def test_recenter_rejects_bad_signature():
    with pytest.raises(InvariantError):
        # without splitting, the eigenvalue 1 exceeds 4/k = 4/5
        flattening_state(np.diag([1.0, 0, 0, 0, 0]), SplitSignature((0,) * 5))


def test_rough_tomography(rng):
    rho = np.diag([1.0, 0.0]).astype(complex)
    errs = [np.linalg.norm(rough_tomography(rho, 100_000, r) - rho) for r in rng.spawn(100)]
    assert np.mean(np.array(errs) <= 0.05) >= 0.95
    check_density(rough_tomography(rho, 1, rng))
    # unbiasedness of the pre-projection estimate
    raw = np.array([random_basis_estimate(rho, 1, r) for r in rng.spawn(50_000)])
    mean = raw.mean(axis=0)
    se = raw.std(axis=0) / np.sqrt(len(raw))
    assert np.all(np.abs(mean - rho) <= 3.5 * se + 1e-12)


def test_mixture_oracle_endpoints(rng):
    rho, sigma = random_density(2, rng), random_density(2, rng)
    oracle = StateOracle(rho)
    assert simulate_mixture_access(oracle, sigma, 1.0) is oracle
    zero = MixtureOracle(oracle, sigma, 0.0, faithful=True)
    zero.weak_schur(2, 100, rng)
    assert oracle.copies_used == 0
    assert np.allclose(zero.state(), sigma)


def test_faithful_mixture_statistics(rng):
    rho = np.diag([0.9, 0.1]).astype(complex)
    sigma = np.eye(2, dtype=complex) / 2
    oracle = StateOracle(rho)
    mix = MixtureOracle(oracle, sigma, 0.25, faithful=True)
    n = 10_000
    counts = Counter(mix.weak_schur(2, n, rng))
    pmf = weak_schur_pmf(0.25 * rho + 0.75 * sigma, 2)
    tv = 0.5 * sum(abs(counts.get(lam, 0) / n - p) for lam, p in pmf.items())
    assert tv < 0.02
    assert oracle.copies_used <= 2 * n
    assert abs(oracle.copies_used - 0.25 * 2 * n) < 5 * np.sqrt(2 * n * 0.25 * 0.75)


def test_split_oracle_state(rng):
    rho = random_density(2, rng)
    sig = SplitSignature((1, 0))
    basis = np.linalg.eigh(rho)[1]
    so = SplitOracle(StateOracle(rho), sig, basis)
    assert np.allclose(so.state(), split(basis.conj().T @ rho @ basis, sig))


def test_repetitions():
    assert repetitions(0.3) == 13
    assert repetitions(0.1) == 24
    assert lower_median([3.0, 1.0, 2.0, 4.0]) == 2.0


@pytest.fixture(scope="module")
def small_shadow():
    rng = make_rng(99)
    rho = random_density(2, rng)
    return rho, build_shadow(rho, 0.1, 0.3, rng, budget=60_000)


def test_shadow_identity_and_linearity(small_shadow, rng):
    rho, shadow = small_shadow
    assert shadow.c == 13
    assert shadow.query(np.eye(2)) == pytest.approx(1.0, abs=1e-12)
    a, b = random_hermitian(2, rng), random_hermitian(2, rng)
    for e in shadow.e_hats:
        assert abs(np.trace(e)) < 1e-10
    lhs = shadow.estimates(2.0 * a - 0.5 * b)
    assert np.allclose(lhs, 2.0 * shadow.estimates(a) - 0.5 * shadow.estimates(b), atol=1e-10)
    assert shadow.n_reals() <= 40 * shadow.d ** 2 * shadow.c


def test_shadow_accuracy(small_shadow, rng):
    rho, shadow = small_shadow
    eps = predicted_epsilon(shadow)
    for _ in range(10):
        o = random_hermitian(2, rng)
        assert abs(shadow.query(o) - inner(o, rho).real) <= eps * op_norm(o)


def test_perfect_inner_estimates(rng):
    rho = random_density(3, rng)
    w, basis = np.linalg.eigh(rho)
    sig = choose_b(w)
    shadow = ClassicalShadow(rho, basis, sig, [np.zeros((sig.k, sig.k))], {})
    assert shadow.query(rho) == pytest.approx(np.trace(rho @ rho).real)


def test_shadow_serialisation(small_shadow):
    _, shadow = small_shadow
    text = shadow.to_json()
    again = ClassicalShadow.from_json(text)
    assert again.to_json() == text
    assert again.sig == shadow.sig
    assert all(np.array_equal(a, b) for a, b in zip(again.e_hats, shadow.e_hats))
    with pytest.raises(FormatError):
        ClassicalShadow.from_json(text.replace('"version": 1', '"version": 9'))
    with pytest.raises(FormatError):
        ClassicalShadow.from_json("{")


def test_build_shadow_rejects_tiny_budget(rng):
    with pytest.raises(ValueError):
        build_shadow(np.eye(2) / 2, 0.1, 0.1, rng, budget=100)
