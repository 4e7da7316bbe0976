import numpy as np
import pytest

from hpshadow import gaussproj
from hpshadow.gaussproj import (EnsembleRejected, PostselectOracle, ProjectionEnsemble, choi_matrix,
                                columns_per_block, draw_ensemble, draw_v, exact_inner, gram_block,
                                mean_calc_target, postselect_fraction, projection_channel,
                                reduce_dimension_estimate, reduce_dimension_median, shadow_inner,
                                sketch, sketch_estimator, sketch_many)
from hpshadow.matcore import inner, op_norm, random_density, random_hermitian, random_traceless
from hpshadow.oracle import StateOracle


def test_columns_per_block():
    assert columns_per_block(16, 16) == 2
    assert columns_per_block(8, 4) == 4
    assert columns_per_block(5, 3) == 3


def test_sketch_structure(rng):
    ens, _ = draw_ensemble(6, 3, rng)
    m = random_hermitian(6, rng)
    s = sketch(m, ens)
    assert np.allclose(s, s.conj().T)
    assert np.all(np.diag(s) == 0)
    assert np.array_equal(sketch(np.zeros((6, 6)), ens), np.zeros((3, 3)))
    n = random_hermitian(6, rng)
    assert np.allclose(sketch(2 * m - n, ens), 2 * s - sketch(n, ens))
    i, j = 0, 2
    direct = np.trace(ens.v[i].T @ m @ ens.v[j])
    assert s[i, j] == pytest.approx(direct)
    two, _ = draw_ensemble(4, 2, rng)
    assert np.count_nonzero(sketch(random_hermitian(4, rng), two)) == 2


def test_sketch_many_matches_single(rng):
    v = draw_v(5, 3, 2, rng, 4)
    m = random_hermitian(5, rng)
    batch = sketch_many(m, v)
    for b, vi in zip(batch, v):
        assert np.allclose(b, sketch(m, ProjectionEnsemble.from_v(vi)))


def test_mean_identity_small(rng):
    d, k, m, n = 4, 3, 2, 40_000
    a, b = random_traceless(d, rng), random_traceless(d, rng)
    v = draw_v(d, k, m, rng, n)
    x = np.einsum("nij,nij->n", sketch_many(a, v).conj(), sketch_many(b, v)).real
    assert abs(x.mean() - mean_calc_target(a, b, d, k, m)) < 3 * x.std() / np.sqrt(n)


@pytest.mark.parametrize("d,k", [(2, 2), (3, 2), (4, 3)])
def test_channel_is_cptp(d, k, rng):
    ens, _ = draw_ensemble(d, k, rng)
    for _ in range(100):
        rho = random_density(d, rng)
        out = projection_channel(rho, ens)
        assert abs(np.trace(out) - 1) < 1e-10
        assert np.linalg.eigvalsh(out[d:, d:]).min() > -1e-10
    assert np.linalg.eigvalsh(choi_matrix(ens)).min() > -1e-8


def test_choi_dimension_limit(rng):
    ens, _ = draw_ensemble(12, 6, rng)
    with pytest.raises(ValueError):
        choi_matrix(ens)


def test_postselect_at_maximally_mixed(rng):
    d, k = 8, 4
    alphas = []
    for _ in range(2000):
        ens, _ = draw_ensemble(d, k, rng)
        alpha, rho_p = postselect_fraction(np.eye(d) / d, ens)
        assert np.trace(rho_p).real == pytest.approx(1.0)
        alphas.append(alpha)
    alphas = np.array(alphas)
    # E alpha = k m / d = 2; the spectral test truncates rare tails only
    assert abs(alphas.mean() - 2.0) < 3 * alphas.std() / np.sqrt(len(alphas)) + 0.01


def test_keep_rate(rng):
    ens, _ = draw_ensemble(4, 4, rng)
    rho = random_density(4, rng)
    post = PostselectOracle(StateOracle(rho), ens, rng)
    post.single_groups(100_000, rng)
    p = post.keep_probability
    n = post.consumed
    assert abs(post.kept / n - p) < 3 * np.sqrt(p * (1 - p) / n)
    assert np.allclose(post.state(), gram_block(rho, ens) / post.alpha)


def test_ensemble_rejection(monkeypatch, rng):
    monkeypatch.setattr(gaussproj, "SPECTRAL_LO", 1e9)
    with pytest.raises(EnsembleRejected):
        draw_ensemble(4, 2, rng, max_resamples=3)


def test_exact_inner_identity(rng):
    d = k = 16
    for _ in range(5):
        rho = random_density(d, rng)
        o = random_hermitian(d, rng)
        o /= op_norm(o)
        ens, _ = draw_ensemble(d, k, rng, observable=o)
        est = reduce_dimension_estimate(exact_inner, rho, o, 25.0, rng, ens=ens, beta_mode="exact")
        assert est.tau == pytest.approx(sketch_estimator(rho, o, ens), abs=1e-10)


def test_zero_observable_and_premise(rng):
    rho = random_density(4, rng)
    assert reduce_dimension_estimate(exact_inner, rho, np.zeros((4, 4)), 50.0, rng, k=4).tau == 0.0
    with pytest.raises(ValueError):
        reduce_dimension_estimate(exact_inner, rho, np.eye(4), 0.1, rng, k=4)


def test_wrapper_with_shadow_solver(rng):
    rho = random_density(4, rng)
    o = random_hermitian(4, rng)
    o /= op_norm(o)
    oracle = StateOracle(rho)
    est = reduce_dimension_estimate(shadow_inner(), oracle, o, 50.0, rng, k=4)
    assert est.copies == oracle.copies_used > 0
    assert abs(est.tau - inner(o, rho).real) <= 50.0
    med = reduce_dimension_median(shadow_inner(), rho, o, 50.0, 0.05, 4, rng)
    assert abs(med - inner(o, rho).real) <= 50.0
