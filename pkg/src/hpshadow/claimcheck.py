"""Numerical verification of the structural claims the estimators rely on.

Each check returns ClaimReports. Exact identities are compared at a fixed
numerical tolerance, Monte-Carlo equalities within 3 standard errors, and
one-sided bounds by raw comparison with a 1-standard-error inconclusive band.
"""
from __future__ import annotations

import itertools
import math
import zlib
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import gaussproj, splitting
from .balanced import fake_estimator_mean_target, haar_variance, rescale, variance_bound
from .fileio import _dump
from .matcore import (haar_unitary, inner, make_rng, op_norm, random_density, random_hermitian,
                      random_traceless)
from .schurweyl import (isotypic_projector, keyl_povm_element, keyl_sample_many, weak_schur_pmf)
from .tableaux import SchurWeylSpec, enumerate_partitions, sum_squares, sw_pmf, sw_sample

REPORT_SCHEMA = "hpshadow.claims/1"
Z_EQUAL = 3.0


@dataclass
class ClaimReport:
    claim_id: str
    parameters: dict
    observed: float
    target: float
    stderr: float
    verdict: str
    kind: str
    samples: int = 0
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _finite(x) -> float:
    x = float(x)
    return x if math.isfinite(x) else 0.0


def equality(claim_id, params, deviation, stderr, samples, note="", z=Z_EQUAL,
             atol: float = 1e-10) -> ClaimReport:
    """Monte-Carlo equality: ``deviation`` is |observed - target| (or a max over entries).

    ``atol`` absorbs rounding when the sample spread is essentially zero.
    """
    if deviation <= z * stderr + atol:
        verdict = "pass"
    elif deviation <= (z + 1) * stderr + atol:
        verdict = "inconclusive"
    else:
        verdict = "fail"
    return ClaimReport(claim_id, params, _finite(deviation), z * _finite(stderr), _finite(stderr),
                       verdict, "equality", samples, note)


def exact(claim_id, params, deviation, tol, samples=0, note="") -> ClaimReport:
    verdict = "pass" if deviation <= tol else "fail"
    return ClaimReport(claim_id, params, _finite(deviation), tol, 0.0, verdict, "exact", samples, note)


def upper(claim_id, params, observed, bound, stderr, samples, note="") -> ClaimReport:
    """One-sided claim observed <= bound."""
    if abs(observed - bound) <= stderr:
        verdict = "inconclusive"
    else:
        verdict = "pass" if observed <= bound else "fail"
    return ClaimReport(claim_id, params, _finite(observed), _finite(bound), _finite(stderr),
                       verdict, "upper", samples, note)


def lower(claim_id, params, observed, bound, stderr, samples, note="") -> ClaimReport:
    """One-sided claim observed >= bound."""
    if abs(observed - bound) <= stderr:
        verdict = "inconclusive"
    else:
        verdict = "pass" if observed >= bound else "fail"
    return ClaimReport(claim_id, params, _finite(observed), _finite(bound), _finite(stderr),
                       verdict, "lower", samples, note)


def _mean_se(x: np.ndarray, axis=0):
    n = x.shape[axis]
    return x.mean(axis=axis), x.std(axis=axis, ddof=1) / math.sqrt(n)


# -- Haar moments ------------------------------------------------------------

def haar_moment_target(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = x.shape[0]
    trx, try_ = np.trace(x).real, np.trace(y).real
    eye = np.eye(d)
    first = (np.linalg.norm(x) ** 2 - trx ** 2 / d) / (d * d - 1) * (y - try_ * eye / d)
    return first + trx ** 2 * try_ * eye / d ** 2


def check_haar_moments(x: np.ndarray, y: np.ndarray, samples: int, rng: np.random.Generator,
                       label: str = "") -> ClaimReport:
    x, y = np.asarray(x, dtype=complex), np.asarray(y, dtype=complex)
    d = x.shape[0]
    if d < 2:
        raise ValueError("Haar moment identity needs d >= 2")
    us = haar_unitary(d, rng, samples)
    rot = np.conj(np.swapaxes(us, -1, -2)) @ x @ us
    weight = np.einsum("nij,ij->n", rot.conj(), y).real
    vals = rot * weight[:, None, None]
    # compare real and imaginary parts of every entry separately
    mean, se = _mean_se(np.ascontiguousarray(vals).reshape(samples, -1).view(float))
    target = np.ascontiguousarray(haar_moment_target(x, y), dtype=complex).reshape(-1).view(float)
    z = np.abs(mean - target) / np.maximum(se, 1e-300)
    worst = int(np.argmax(np.where(se > 1e-12, z, 0.0)))
    dev = float(np.abs(mean - target)[worst])
    # entries with zero spread must match to rounding
    flat = np.all(np.abs(mean - target)[se <= 1e-12] <= 1e-10)
    rep = equality("haar-moments", {"d": d, "case": label}, dev, float(se[worst]), samples,
                   "worst entry of the empirical mean against the closed form")
    if not flat:
        rep.verdict = "fail"
    return rep


# -- Schur-Weyl distribution -------------------------------------------------

def check_typical_tableaux(n: int, alpha, samples: int, rng: np.random.Generator) -> list[ClaimReport]:
    if n < 1:
        raise ValueError("n must be at least 1")
    spec = SchurWeylSpec(n, tuple(alpha))
    lams = sw_sample(spec, rng, size=samples)
    sq = np.array([sum_squares(lam) for lam in lams], dtype=float)
    params = {"n": n, "d": spec.d, "alpha_sq": float(sum(a * a for a in spec.alpha))}
    hit = (sq >= n ** 1.5 / 4).astype(float)
    p = hit.mean()
    prob = lower("typical-tableaux-1", params, p, 0.5,
                 math.sqrt(max(p * (1 - p), 1e-300) / samples), samples,
                 "Pr[sum lam^2 >= n^1.5/4] against 1/2")
    bound = 2 * (params["alpha_sq"] * n * n + n ** 1.5)
    mean, se = _mean_se(sq)
    expect = upper("typical-tableaux-2", params, float(mean), bound, float(se), samples,
                   "E[sum lam^2] against 2((sum alpha^2) n^2 + n^1.5)")
    return [prob, expect]


def _sw_checks(rng, samples) -> list[ClaimReport]:
    """RSK sampler and weak Schur sampling against the exact Schur-Weyl pmf."""
    out = []
    for d in (2, 3):
        for t in (1, 2, 3, 4):
            alpha = np.sort(rng.dirichlet(np.ones(d)))[::-1]
            spec = SchurWeylSpec(t, tuple(alpha / alpha.sum()))
            exact_pmf = sw_pmf(spec)
            ws = weak_schur_pmf(np.diag(spec.alpha).astype(complex), t)
            dev = max(abs(ws.get(lam, 0.0) - p) for lam, p in exact_pmf.items())
            out.append(exact("schur-weyl-pmf", {"d": d, "t": t}, dev, 1e-8,
                             note="weak Schur sampling on diag(alpha)^t against s_lam(alpha) dim_sym"))
            draws = sw_sample(spec, rng, size=samples)
            counts: dict = {}
            for lam in draws:
                counts[lam] = counts.get(lam, 0) + 1
            tv = 0.5 * sum(abs(counts.get(lam, 0) / samples - p) for lam, p in exact_pmf.items())
            out.append(upper("schur-weyl-rsk", {"d": d, "t": t}, tv, 0.01,
                             math.sqrt(len(exact_pmf) / samples) / 2, samples,
                             "total variation of the RSK sampler"))
    return out


def _povm_checks(rng, samples) -> list[ClaimReport]:
    out = []
    for d in (2, 3):
        for t in (1, 2, 3, 4):
            parts = enumerate_partitions(t, d)
            total = sum(isotypic_projector(lam, d, t) for lam in parts)
            out.append(exact("povm-completeness", {"d": d, "t": t, "test": "projectors"},
                             float(np.abs(total - np.eye(d ** t)).max()), 1e-8))
    out.extend(keyl_haar_average(2, t, samples, rng) for t in (2, 3))
    return out


def keyl_haar_average(d: int, t: int, samples: int, rng: np.random.Generator) -> ClaimReport:
    """Monte-Carlo Haar average of sum_lam M_{lam,U} against the identity.

    Each draw U is averaged over its right orbit under permutation matrices;
    U P is Haar whenever U is, so this is an unbiased estimator with lower
    variance. The tolerance is 0.02 per entry.
    """
    perms = [np.eye(d)[list(p)] for p in itertools.permutations(range(d))]
    parts = enumerate_partitions(t, d)
    us = haar_unitary(d, rng, samples)
    n = d ** t
    acc = np.zeros((n, n), dtype=complex)
    sq = np.zeros((n, n))
    for u in us:
        s = sum(keyl_povm_element(lam, u @ p, d, t) for lam in parts for p in perms) / len(perms)
        acc += s
        sq += np.abs(s) ** 2
    mean = acc / samples
    se = np.sqrt(np.maximum(sq / samples - np.abs(mean) ** 2, 0.0) / samples)
    dev = float(np.abs(mean - np.eye(n)).max())
    verdict = "pass" if dev <= 0.02 else "fail"
    return ClaimReport("povm-completeness", {"d": d, "t": t, "test": "haar-average"}, dev, 0.02,
                       float(se.max()), verdict, "exact", samples,
                       "max entry deviation of the Haar-averaged POVM from I, tolerance 0.02")


# -- splitting ---------------------------------------------------------------

def random_signature(d: int, rng: np.random.Generator, max_b: int = 3) -> splitting.SplitSignature:
    return splitting.SplitSignature(tuple(int(x) for x in rng.integers(0, max_b + 1, size=d)))


def check_splitting_properties(triples: int, rng: np.random.Generator,
                               dsplit: Callable | None = None) -> list[ClaimReport]:
    ds = splitting.dsplit if dsplit is None else dsplit
    contraction, duality, dnorm = -np.inf, 0.0, -np.inf
    for _ in range(triples):
        d = int(rng.integers(1, 5))
        sig = random_signature(d, rng)
        m = random_hermitian(d, rng)
        n = random_hermitian(d, rng)
        sm, dn = splitting.split(m, sig), ds(n, sig)
        contraction = max(contraction, np.linalg.norm(sm) - np.linalg.norm(m))
        duality = max(duality, abs(inner(sm, dn) - inner(m, n)))
        dnorm = max(dnorm, np.linalg.norm(dn) - 2 * math.sqrt(sig.k) * op_norm(n))
    params = {"triples": triples}
    return [
        exact("splitting-properties", {**params, "property": "frobenius-contraction"},
              max(0.0, float(contraction)), 1e-12, triples, "max ||Split M||_F - ||M||_F"),
        exact("splitting-properties", {**params, "property": "duality"}, float(duality), 1e-10,
              triples, "max |<Split M, DSplit N> - <M, N>|"),
        exact("splitting-properties", {**params, "property": "dsplit-norm"}, max(0.0, float(dnorm)),
              1e-12, triples, "max ||DSplit N||_F - 2 sqrt(k) ||N||_op"),
    ]


# -- Gaussian sketches ---------------------------------------------------------

SKETCH_TRIPLES = ((8, 4, 4), (16, 8, 4), (16, 16, 2))


def sketch_products(mm, nn, d, k, m, samples, rng) -> np.ndarray:
    v = gaussproj.draw_v(d, k, m, rng, samples)
    a = gaussproj.sketch_many(mm, v)
    b = gaussproj.sketch_many(nn, v)
    return np.einsum("nij,nij->n", a.conj(), b).real


def check_mean_calc(d, k, m, samples, rng) -> ClaimReport:
    mm = random_traceless(d, rng, 1.0)
    nn = random_traceless(d, rng, 1.0)
    x = sketch_products(mm, nn, d, k, m, samples, rng)
    target = gaussproj.mean_calc_target(mm, nn, d, k, m)
    mean, se = _mean_se(x)
    rep = equality("mean-calc", {"d": d, "k": k, "m": m}, abs(mean - target), se, samples,
                   f"empirical mean {mean:.6g} against k(k-1)m/d^2 <M,N> = {target:.6g}")
    return rep


def check_var_calc(d, k, m, samples, rng) -> ClaimReport:
    mm = random_traceless(d, rng, 1.0)
    nn = random_traceless(d, rng, 1.0)
    x = sketch_products(mm, nn, d, k, m, samples, rng)
    var = x.var(ddof=1)
    c = x - x.mean()
    se = math.sqrt(max(np.mean(c ** 4) - var ** 2, 0.0) / samples)
    return upper("var-calc", {"d": d, "k": k, "m": m}, float(var),
                 gaussproj.var_calc_bound(mm, nn, d, k, m), se, samples)


def random_unit_op(d: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitian matrix with operator norm exactly 1."""
    n = random_hermitian(d, rng)
    return n / op_norm(n)


def check_shadow_var_bound(d, k, gammas, samples, rng) -> list[ClaimReport]:
    m = gaussproj.columns_per_block(d, k)
    rho = random_density(d, rng)  # trace norm 1
    obs = random_unit_op(d, rng)
    x = sketch_products(rho, obs, d, k, m, samples, rng)
    err = np.abs(d / (2.0 * (k - 1)) * x - inner(obs, rho).real)
    out = []
    for g in gammas:
        p = float(np.mean(err >= g))
        bound = 20.0 * d / (k * k * g * g)
        note = "bound >= 1, claim holds trivially" if bound >= 1 else ""
        out.append(upper("shadow-var-bound", {"d": d, "k": k, "gamma": g}, p, bound,
                         math.sqrt(max(p * (1 - p), 1.0 / samples) / samples), samples, note))
    return out


def check_matrix_chernoff(d, k, samples, rng, chunk: int = 500) -> list[ClaimReport]:
    m = gaussproj.columns_per_block(d, k)
    obs = random_unit_op(d, rng)
    spec_ok = np.empty(samples, dtype=bool)
    norm_ok = np.empty(samples, dtype=bool)
    for s in range(0, samples, chunk):
        n = min(chunk, samples - s)
        v = gaussproj.draw_v(d, k, m, rng, n)
        spec_ok[s:s + n] = gaussproj.spectral_events(v)
        sk = gaussproj.sketch_many(obs, v)
        norm_ok[s:s + n] = np.abs(np.linalg.eigvalsh(sk)).max(axis=1) <= gaussproj.SKETCH_NORM_MAX
    out = []
    for name, ok in (("spectrum", spec_ok), ("sketch-norm", norm_ok)):
        p = float(ok.mean())
        out.append(lower("matrix-chernoff", {"d": d, "k": k, "m": m, "event": name}, p, 0.99,
                         math.sqrt(max(p * (1 - p), 1.0 / samples) / samples), samples))
    return out


# -- balanced estimator ------------------------------------------------------

def perturbation(d: int, size: float, rng: np.random.Generator) -> np.ndarray:
    return random_traceless(d, rng, size)


def check_fake_estimator_mean(d, t, e_norm, samples, rng) -> ClaimReport:
    """Empirical mean of Keyl point estimates on I/d + E against the linearised target.

    The Frobenius deviation must stay below 1e5 t^2 ||E||_F^2 / d (the second
    order bias allowance) plus 3 aggregated standard errors.
    """
    e = perturbation(d, e_norm, rng)
    rho = np.eye(d) / d + e
    lams, us = keyl_sample_many(rho, samples, rng, t=t)
    spec = lams / t
    pts = np.einsum("nik,nk,njk->nij", us, spec, us.conj())
    mean = pts.mean(axis=0)
    var = pts.reshape(samples, -1).var(axis=0, ddof=1).sum()
    se = math.sqrt(var / samples)
    dev = float(np.linalg.norm(mean - fake_estimator_mean_target(e, t, d)))
    bias = 1e5 * t * t * e_norm ** 2 / d
    return upper("fake-estimator-mean", {"d": d, "t": t, "e_norm": e_norm}, dev,
                 bias + 3 * se, se, samples,
                 f"Frobenius deviation; allowance {bias:.3g} + 3 x {se:.3g}")


def check_variance(d, t, e_norm, samples, rng) -> list[ClaimReport]:
    e = perturbation(d, e_norm, rng)
    rho = np.eye(d) / d + e
    obs = random_traceless(d, rng, 1.0)
    lams, us = keyl_sample_many(rho, samples, rng, t=t)
    spec = lams / t
    pts = np.einsum("nik,nk,njk->nij", us, spec, us.conj())
    vals = rescale(d, t) * np.einsum("ij,nij->n", obs.conj(), pts).real
    var = vals.var(ddof=1)
    c = vals - vals.mean()
    se = math.sqrt(max(np.mean(c ** 4) - var ** 2, 0.0) / samples)
    params = {"d": d, "t": t, "e_norm": e_norm}
    out = [upper("variance-consistency", {**params, "test": "bound"}, float(var),
                 variance_bound(obs, t, d, 1), se, samples,
                 "single-batch variance against 2 x 8 ||O||_F^2 E[sum lam^2] / theta^2")]
    if e_norm == 0:
        out.append(equality("variance-consistency", {**params, "test": "haar"},
                            abs(var - haar_variance(obs, t, d, 1)), se, samples,
                            "exact Haar variance at the maximally mixed state"))
    return out


# -- registry ---------------------------------------------------------------

@dataclass
class ClaimConfig:
    seed: int = 0
    samples: int | None = None  # overrides every Monte-Carlo sample count
    dsplit: Callable | None = None
    only: tuple[str, ...] = ()

    def n(self, default: int) -> int:
        return default if self.samples is None else int(self.samples)


def _haar(cfg, rng):
    n = cfg.n(100_000)
    z = np.diag([1.0, -1.0])
    return [
        check_haar_moments(np.eye(3), random_hermitian(3, rng), n, rng, "identity"),
        check_haar_moments(z, z, n, rng, "pauli-z"),
        check_haar_moments(random_traceless(3, rng, 1.0), np.eye(3), n, rng, "traceless-vs-identity"),
        check_haar_moments(random_hermitian(3, rng), random_hermitian(3, rng), n, rng, "random"),
    ]


def _tableaux(cfg, rng):
    n = cfg.n(10_000)
    grid = [(1, (1.0,)), (100, (0.1,) * 10), (64, (1.0,) + (0.0,) * 3),
            (30, tuple(np.sort(rng.dirichlet(np.ones(4)))[::-1]))]
    out = []
    for size, alpha in grid:
        alpha = np.asarray(alpha) / np.sum(alpha)
        out.extend(check_typical_tableaux(size, alpha, n, rng))
    return out


def _mean_calc(cfg, rng):
    return [check_mean_calc(d, k, m, cfg.n(100_000), r)
            for (d, k, m), r in zip(SKETCH_TRIPLES, rng.spawn(len(SKETCH_TRIPLES)))]


def _var_calc(cfg, rng):
    return [check_var_calc(d, k, m, cfg.n(100_000), r)
            for (d, k, m), r in zip(SKETCH_TRIPLES, rng.spawn(len(SKETCH_TRIPLES)))]


def _fake_mean(cfg, rng):
    out = []
    for (d, t, e), r in zip(itertools.product((2, 3), (2, 3), (1e-3, 1e-2)), rng.spawn(8)):
        out.append(check_fake_estimator_mean(d, t, e, cfg.n(100_000), r))
    return out


def _variance(cfg, rng):
    out = []
    for (d, t, e), r in zip(((2, 3, 0.0), (3, 2, 0.0), (2, 3, 1e-2), (3, 3, 1e-2)), rng.spawn(4)):
        out.extend(check_variance(d, t, e, cfg.n(100_000), r))
    return out


REGISTRY: dict[str, Callable] = {
    "fake-estimator-mean": _fake_mean,
    "haar-moments": _haar,
    "matrix-chernoff": lambda cfg, rng: check_matrix_chernoff(100, 20, cfg.n(10_000), rng),
    "mean-calc": _mean_calc,
    "povm-completeness": lambda cfg, rng: _povm_checks(rng, cfg.n(10_000)),
    "schur-weyl": lambda cfg, rng: _sw_checks(rng, cfg.n(100_000)),
    "shadow-var-bound": lambda cfg, rng: check_shadow_var_bound(16, 16, (0.25, 0.5), cfg.n(10_000), rng),
    "splitting-properties": lambda cfg, rng: check_splitting_properties(1000, rng, cfg.dsplit),
    "typical-tableaux": _tableaux,
    "var-calc": _var_calc,
    "variance-consistency": _variance,
}


def claim_ids() -> list[str]:
    return sorted(REGISTRY)


def select(only) -> list[str]:
    """Registry ids named by ``only``; raises KeyError for unknown ids."""
    if not only:
        return claim_ids()
    unknown = [c for c in only if c not in REGISTRY]
    if unknown:
        raise KeyError(f"unknown claim id(s): {', '.join(unknown)}")
    return sorted(set(only))


def _run_one(claim_id: str, cfg: ClaimConfig) -> list[ClaimReport]:
    rng = make_rng(cfg.seed, zlib.crc32(claim_id.encode()))
    try:
        return REGISTRY[claim_id](cfg, rng)
    except Exception as exc:  # a broken check is a failed claim, not a crashed suite
        return [ClaimReport(claim_id, {}, 0.0, 0.0, 0.0, "fail", "error", 0,
                            f"{type(exc).__name__}: {exc}")]


def run_all(cfg: ClaimConfig | None = None, workers: int = 1) -> list[ClaimReport]:
    """Run the selected claims. Each claim owns a stream derived from (seed, id),
    so results do not depend on ordering or on the worker count."""
    cfg = ClaimConfig() if cfg is None else cfg
    ids = select(cfg.only)
    if workers > 1 and cfg.dsplit is None:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, ids, [cfg] * len(ids)))
    else:
        results = [_run_one(c, cfg) for c in ids]
    return [r for rs in results for r in rs]


def reports_to_json(reports: list[ClaimReport]) -> str:
    return _dump({"schema": REPORT_SCHEMA, "reports": [r.to_dict() for r in reports]}) + "\n"


def format_table(reports: list[ClaimReport]) -> str:
    rows = [("claim", "parameters", "observed", "target", "stderr", "verdict")]
    for r in reports:
        params = ",".join(f"{k}={v}" for k, v in r.parameters.items())
        rows.append((r.claim_id, params, f"{r.observed:.4g}", f"{r.target:.4g}",
                     f"{r.stderr:.2g}", r.verdict))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows)


def any_failed(reports: list[ClaimReport]) -> bool:
    return any(r.verdict == "fail" for r in reports)
