"""Perturbation estimator for states close to maximally mixed.

Each t-copy batch is measured with Keyl's POVM and mapped to the point
estimate U diag(lam/t) U^dagger. The batch average, recentred at I/d and
rescaled by t(d^2-1)/(d theta), estimates the perturbation E = rho - I/d.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matcore import dag, hermitize
from .oracle import StateOracle
from .schurweyl import KeylOutcome
from .tableaux import expected_sum_squares, pad, theta as sw_theta


@dataclass(frozen=True)
class BalancedEstimate:
    e_hat: np.ndarray
    t: int
    m: int
    theta: float
    copies: int = 0

    @property
    def d(self) -> int:
        return self.e_hat.shape[0]


def keyl_point_estimate(out: KeylOutcome, t: int) -> np.ndarray:
    """U diag(lam_1/t, ..., lam_d/t) U^dagger."""
    u = np.asarray(out.u)
    spec = np.asarray(pad(out.lam, u.shape[0]), dtype=float) / t
    return hermitize((u * spec) @ dag(u))


def point_estimates(lams: np.ndarray, us: np.ndarray, t: int) -> np.ndarray:
    """Vectorised ``keyl_point_estimate`` over stacks of outcomes."""
    spec = np.asarray(lams, dtype=float) / t
    return (us * spec[:, None, :]) @ dag(us)


def mean_point_estimate(lams: np.ndarray, us: np.ndarray, t: int) -> np.ndarray:
    spec = np.asarray(lams, dtype=float) / t
    return hermitize(np.einsum("nik,nk,njk->ij", us, spec, us.conj()) / len(lams))


def rescale(d: int, t: int) -> float:
    """t(d^2-1)/(d theta): inverse of the signal factor of the Keyl estimator."""
    th = sw_theta(t, d)
    if th <= 0:
        raise ValueError(f"theta({t}, {d}) = {th} is not positive")
    return t * (d * d - 1) / (d * th)


def fake_estimator_mean_target(e: np.ndarray, t: int, d: int) -> np.ndarray:
    """Mean of the Keyl point estimate under the linearised state: I/d + d theta E / (t(d^2-1))."""
    e = np.asarray(e, dtype=complex)
    return np.eye(d) / d + d * sw_theta(t, d) / (t * (d * d - 1)) * e


def estimate_from_outcomes(lams: np.ndarray, us: np.ndarray, t: int) -> np.ndarray:
    d = us.shape[-1]
    e_hat = rescale(d, t) * (mean_point_estimate(lams, us, t) - np.eye(d) / d)
    # drop the O(1e-16) trace left by rounding so the estimate is exactly traceless
    return e_hat - np.trace(e_hat).real / d * np.eye(d)


def estimate_balanced(access, t: int, m: int, rng: np.random.Generator) -> BalancedEstimate:
    """Measure m batches of t copies with Keyl's POVM and return the perturbation estimate."""
    if m < 1:
        raise ValueError("m must be at least 1")
    oracle = access if isinstance(access, StateOracle) else StateOracle(access)
    before = oracle.copies_used
    lams, us = oracle.keyl(t, m, rng)
    d = oracle.dim
    return BalancedEstimate(estimate_from_outcomes(lams, us, t), t, m, sw_theta(t, d),
                            oracle.copies_used - before)


def query_balanced(est: BalancedEstimate, o: np.ndarray) -> float:
    """<O, E_hat> for the Hermitian part of O."""
    o = hermitize(np.asarray(o, dtype=complex))
    return float(np.vdot(o, est.e_hat).real)


def asymptotic_preset(d: int, epsilon: float) -> tuple[int, int]:
    """Batch size t = 0.01 d^2 and batch count m = 10^6 / (eps^2 d^2) from the asymptotic analysis."""
    t = int(0.01 * d * d)
    if t < 1:
        raise ValueError(f"asymptotic preset needs 0.01 d^2 >= 1; got d={d}")
    return t, math.ceil(1e6 / (epsilon ** 2 * d * d))


def variance_bound(o: np.ndarray, t: int, d: int, m: int) -> float:
    """Upper bound on E[<O, E_hat - E[E_hat]>^2] for traceless O.

    8 ||O||_F^2 E[sum lam^2] / (m theta^2), doubled to cover the near-uniform
    (rather than uniform) distribution of the Keyl rotation.
    """
    o = np.asarray(o)
    th = sw_theta(t, d)
    return 2.0 * 8.0 * float(np.linalg.norm(o)) ** 2 * expected_sum_squares(t, d) / (m * th * th)


def haar_variance(o: np.ndarray, t: int, d: int, m: int) -> float:
    """Variance of <O, E_hat> for traceless O when rho = I/d exactly.

    The rotation is then exactly Haar, so the Haar second-moment identity gives
    ||O||_F^2 (d^2-1) / (d^2 theta m).
    """
    o = np.asarray(o)
    return float(np.linalg.norm(o)) ** 2 * (d * d - 1) / (d * d * sw_theta(t, d) * m)
