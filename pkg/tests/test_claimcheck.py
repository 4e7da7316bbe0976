import numpy as np
import pytest

from hpshadow import splitting
from hpshadow.claimcheck import (ClaimConfig, check_haar_moments, check_splitting_properties,
                                 check_typical_tableaux, claim_ids, equality, haar_moment_target,
                                 lower, reports_to_json, run_all, select, upper)
from hpshadow.matcore import random_hermitian, random_traceless


def test_haar_targets():
    z = np.diag([1.0, -1.0])
    assert np.allclose(haar_moment_target(z, z), 2 / 3 * z)
    y = np.diag([1.0, 2.0, 3.0])
    assert np.allclose(haar_moment_target(np.eye(3), y), 6 * np.eye(3))


def test_haar_moment_checks(rng):
    z = np.diag([1.0, -1.0])
    assert check_haar_moments(z, z, 50_000, rng).verdict == "pass"
    assert check_haar_moments(np.eye(3), random_hermitian(3, rng), 1000, rng).verdict == "pass"
    x = random_traceless(3, rng)
    assert np.allclose(haar_moment_target(x, np.eye(3)), 0)
    assert check_haar_moments(x, np.eye(3), 20_000, rng).verdict == "pass"
    with pytest.raises(ValueError):
        check_haar_moments(np.eye(1), np.eye(1), 10, rng)


def test_haar_check_detects_biased_sampler(monkeypatch, rng):
    from hpshadow import claimcheck

    monkeypatch.setattr(claimcheck, "haar_unitary", lambda d, r, n: np.tile(np.eye(d), (n, 1, 1)) + 0j)
    z = np.diag([1.0, -1.0])
    assert check_haar_moments(z, z, 1000, rng).verdict == "fail"


def test_typical_tableaux_examples(rng):
    prob, expect = check_typical_tableaux(1, (1.0,), 100, rng)
    assert prob.observed == 1.0 and prob.verdict == "pass"
    prob, expect = check_typical_tableaux(64, (1.0, 0.0, 0.0, 0.0), 100, rng)
    assert prob.observed == 1.0
    assert expect.observed == 4096.0
    prob, expect = check_typical_tableaux(100, (0.1,) * 10, 2000, rng)
    assert prob.verdict == "pass" and expect.verdict == "pass"


def test_verdict_rules():
    assert equality("x", {}, 0.29, 0.1, 10).verdict == "pass"
    assert equality("x", {}, 0.35, 0.1, 10).verdict == "inconclusive"
    assert equality("x", {}, 0.5, 0.1, 10).verdict == "fail"
    assert upper("x", {}, 0.5, 1.0, 0.1, 10).verdict == "pass"
    assert upper("x", {}, 0.95, 1.0, 0.1, 10).verdict == "inconclusive"
    assert upper("x", {}, 1.5, 1.0, 0.1, 10).verdict == "fail"
    assert lower("x", {}, 0.4, 0.5, 0.01, 10).verdict == "fail"


def off_by_one_dsplit(n, sig):
    """Mutant: drops the last row/column's prefix links."""
    out = splitting.dsplit(n, sig).copy()
    if sig.k > 1:
        out[-1, :-1] = 0
        out[:-1, -1] = 0
    return out


def test_mutant_dsplit_breaks_duality(rng):
    good = {r.parameters["property"]: r.verdict for r in check_splitting_properties(200, rng)}
    assert set(good.values()) == {"pass"}
    bad = {r.parameters["property"]: r.verdict
           for r in check_splitting_properties(200, rng, off_by_one_dsplit)}
    assert bad["duality"] == "fail"


def test_run_all_quick_and_deterministic():
    cfg = ClaimConfig(seed=3, samples=300)
    first = run_all(cfg)
    assert len(first) >= 12
    assert {"haar-moments", "mean-calc", "var-calc", "typical-tableaux-1"} <= {r.claim_id for r in first}
    assert reports_to_json(first) == reports_to_json(run_all(cfg))


def test_run_all_with_mutant_records_failure():
    reports = run_all(ClaimConfig(seed=1, only=("splitting-properties",), dsplit=off_by_one_dsplit))
    assert any(r.verdict == "fail" for r in reports)


def test_select():
    assert select(()) == claim_ids()
    assert select(["mean-calc"]) == ["mean-calc"]
    with pytest.raises(KeyError):
        select(["nope"])
