"""Reduction from general states to balanced ones.

A rough estimate of rho fixes an eigenbasis and a split signature b. In that
basis Split_b flattens the spectrum below 1/d, mixing with a known state
recentres the result at I_k/k, and the balanced estimator learns the remaining
perturbation. DSplit_b carries observables across, because
<Split_b(M), DSplit_b(N)> = <M, N>.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from statistics import NormalDist

import numpy as np

from .balanced import estimate_balanced
from .matcore import (InvariantError, check_density, dag, hermitize, inner, psd_project,
                      spawn)
from .oracle import DerivedOracle, StateOracle
from .tableaux import theta as sw_theta

EIGEN_CLAMP = 1e-12


@dataclass(frozen=True)
class SplitSignature:
    b: tuple[int, ...]

    def __post_init__(self):
        b = tuple(int(x) for x in self.b)
        if not b or min(b) < 0:
            raise ValueError("b must be a nonempty tuple of nonnegative integers")
        object.__setattr__(self, "b", b)

    @property
    def d(self) -> int:
        return len(self.b)

    @property
    def k(self) -> int:
        return sum(2 ** x for x in self.b)


@lru_cache(maxsize=256)
def _layout(b: tuple[int, ...]):
    """Row metadata, the prefix-consistency mask and 2^max(b_j1, b_j2) per entry.

    Rows are ordered by j, then by s read as a b_j-bit binary number, which is
    lexicographic order on bit strings of equal length.
    """
    j = np.repeat(np.arange(len(b)), [2 ** x for x in b])
    s = np.concatenate([np.arange(2 ** x) for x in b])
    bb = np.asarray(b)[j]
    lo = np.minimum(bb[:, None], bb[None, :])
    consistent = (s[:, None] >> (bb[:, None] - lo)) == (s[None, :] >> (bb[None, :] - lo))
    scale = 2 ** np.maximum(bb[:, None], bb[None, :])
    for arr in (j, consistent, scale):
        arr.setflags(write=False)
    return j, consistent, scale


def _check_sig(m, sig: SplitSignature):
    m = np.asarray(m)
    if m.shape != (sig.d, sig.d):
        raise ValueError(f"matrix shape {m.shape} does not match signature of length {sig.d}")
    return m


def split(m: np.ndarray, sig: SplitSignature) -> np.ndarray:
    """Split_b(M): entry ((j1,s1),(j2,s2)) is M[j1,j2] / 2^max(b_j1,b_j2) when one
    of s1, s2 is a prefix of the other, else 0."""
    m = _check_sig(m, sig)
    j, consistent, scale = _layout(sig.b)
    big = m[np.ix_(j, j)]
    if big.dtype == object:
        return np.where(consistent, big / scale.astype(object), 0)
    return np.where(consistent, big / scale, 0)


def dsplit(n: np.ndarray, sig: SplitSignature) -> np.ndarray:
    """DSplit_b(N): entry ((j1,s1),(j2,s2)) is N[j1,j2] under the same prefix condition."""
    n = _check_sig(n, sig)
    j, consistent, _ = _layout(sig.b)
    return np.where(consistent, n[np.ix_(j, j)], 0)


def choose_b(spectrum) -> SplitSignature:
    """Smallest b_j >= 0 with 2^{b_j} >= d lam_j."""
    lam = np.asarray(spectrum, dtype=float)
    lam = np.where(lam < EIGEN_CLAMP, 0.0, lam)
    d = len(lam)
    b = []
    for x in d * lam:
        bj = 0
        while 2 ** bj < x:
            bj += 1
        b.append(bj)
    return SplitSignature(tuple(b))


def flattening_state(rho_rough_diag: np.ndarray, sig: SplitSignature) -> np.ndarray:
    """sigma = (4 I_k / k - Split(rho_rough)) / 3, the known half of the recentring mixture."""
    k = sig.k
    sigma = (4.0 * np.eye(k) / k - split(np.asarray(rho_rough_diag, dtype=complex), sig)) / 3.0
    if np.linalg.eigvalsh(hermitize(sigma)).min() < -1e-12:
        raise InvariantError("recentring state is not PSD; Split(rho_rough) exceeds 4/k")
    return sigma


def recenter_state(rho: np.ndarray, rho_rough: np.ndarray, sig: SplitSignature) -> np.ndarray:
    """(3/4) sigma + (1/4) Split(rho); equals I_k/k + Split(rho - rho_rough)/4."""
    sigma = flattening_state(rho_rough, sig)
    return 0.75 * sigma + 0.25 * split(np.asarray(rho, dtype=complex), sig)


# -- simulated access ----------------------------------------------------------

class SplitOracle(DerivedOracle):
    """Copies of Split_b(W^dagger rho W), obtained by rotating and splitting each copy.

    Splitting is a channel (append b_max random bits and keep the first b_j of
    them next to level j), so every copy is transformed independently.
    """

    def __init__(self, parent: StateOracle, sig: SplitSignature, basis: np.ndarray | None = None):
        if sig.d != parent.dim:
            raise ValueError("signature length must equal the parent dimension")
        super().__init__(parent, sig.k)
        self.sig = sig
        self.basis = np.eye(parent.dim) if basis is None else np.asarray(basis)

    def _map(self, tau):
        return split(dag(self.basis) @ tau @ self.basis, self.sig)

    def state(self) -> np.ndarray:
        return self._map(self.parent.state())

    def batch_groups(self, t, count, rng):
        cache = {}
        out = []
        for slots, n in self.parent.batch_groups(t, count, rng):
            mapped = []
            for s in slots:
                if id(s) not in cache:
                    cache[id(s)] = self._map(s)
                mapped.append(cache[id(s)])
            out.append((mapped, n))
        return out

    def single_groups(self, n, rng):
        return [(self._map(s), m) for s, m in self.parent.single_groups(n, rng)]


class MixtureOracle(DerivedOracle):
    """Copies of lam rho + (1 - lam) sigma for a known sigma.

    ``faithful=True`` flips a lam-coin per copy and uses a real copy of rho only
    on heads. Otherwise the mixture is formed directly (same statistics) and
    every copy is charged to the parent.
    """

    def __init__(self, parent: StateOracle, sigma: np.ndarray, lam: float, faithful: bool = False):
        if not 0.0 <= lam <= 1.0:
            raise ValueError("mixing weight must lie in [0, 1]")
        sigma = check_density(np.asarray(sigma, dtype=complex))
        if sigma.shape[0] != parent.dim:
            raise ValueError("sigma dimension must match the parent oracle")
        super().__init__(parent, parent.dim)
        self.sigma = sigma
        self.lam = float(lam)
        self.faithful = faithful

    def state(self) -> np.ndarray:
        return self.lam * self.parent.state() + (1.0 - self.lam) * self.sigma

    def batch_groups(self, t, count, rng):
        if self.lam == 1.0:
            return self.parent.batch_groups(t, count, rng)
        if not self.faithful:
            if self.lam > 0.0:
                self.charge(t * count)
            mix = self.state()
            return [([mix] * t, count)]
        heads = rng.binomial(t, self.lam, size=count)
        out = []
        for h in range(t + 1):
            n_h = int(np.sum(heads == h))
            if not n_h:
                continue
            if h == 0:
                out.append(([self.sigma] * t, n_h))
                continue
            for slots, n in self.parent.batch_groups(h, n_h, rng):
                out.append((list(slots) + [self.sigma] * (t - h), n))
        return out

    def single_groups(self, n, rng):
        if not self.faithful:
            if self.lam > 0.0:
                self.charge(n)
            return [(self.state(), n)]
        heads = int(rng.binomial(n, self.lam))
        out = self.parent.single_groups(heads, rng) if heads else []
        return out + [(self.sigma, n - heads)]


def simulate_mixture_access(access, sigma: np.ndarray, lam: float, faithful: bool = False) -> StateOracle:
    oracle = access if isinstance(access, StateOracle) else StateOracle(access)
    if lam == 1.0:
        return oracle
    return MixtureOracle(oracle, sigma, lam, faithful)


# -- rough tomography ----------------------------------------------------------

def random_basis_estimate(access, n: int, rng: np.random.Generator) -> np.ndarray:
    """Unbiased estimate of rho from n single-copy measurements in Haar-random bases.

    Each outcome vector u contributes (d + 1) |u><u| - I.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    oracle = access if isinstance(access, StateOracle) else StateOracle(access)
    d = oracle.dim
    bases, outcomes = oracle.random_basis_measurements(n, rng)
    vecs = bases[np.arange(n), :, outcomes]
    avg = np.einsum("ni,nj->ij", vecs, vecs.conj()) / n
    return hermitize((d + 1) * avg - np.eye(d))


def rough_tomography(access, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random-basis single-copy tomography followed by projection onto density matrices."""
    return psd_project(random_basis_estimate(access, n, rng))


# -- the classical shadow -----------------------------------------------------

def repetitions(delta: float) -> int:
    """c = ceil(10 ln(1/delta)) independent repetitions for median amplification."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return max(1, math.ceil(10.0 * math.log(1.0 / delta)))


def default_budget(epsilon: float, delta: float) -> int:
    return math.ceil(100.0 * math.log(1.0 / delta) / epsilon ** 2)


@dataclass
class ClassicalShadow:
    rho_rough: np.ndarray
    basis: np.ndarray
    sig: SplitSignature
    e_hats: list[np.ndarray]
    meta: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.rho_rough.shape[0]

    @property
    def k(self) -> int:
        return self.sig.k

    @property
    def c(self) -> int:
        return len(self.e_hats)

    def n_reals(self) -> int:
        """Number of real parameters stored."""
        d, k = self.d, self.k
        return 2 * d * d + 2 * d * d + d + self.c * k * k

    def estimates(self, o: np.ndarray) -> np.ndarray:
        o = hermitize(np.asarray(o, dtype=complex))
        if o.shape != (self.d, self.d):
            raise ValueError("observable has the wrong dimension")
        base = inner(o, self.rho_rough).real
        lifted = dsplit(dag(self.basis) @ o @ self.basis, self.sig)
        return np.array([base + 4.0 * inner(lifted, e).real for e in self.e_hats])

    def query(self, o: np.ndarray) -> float:
        return lower_median(self.estimates(o))

    def to_json(self) -> str:
        from .fileio import shadow_to_json

        return shadow_to_json(self)

    @classmethod
    def from_json(cls, text: str) -> "ClassicalShadow":
        from .fileio import shadow_from_json

        return shadow_from_json(text)


def lower_median(values) -> float:
    v = np.sort(np.asarray(values, dtype=float))
    return float(v[(len(v) - 1) // 2])


def query_shadow(shadow: ClassicalShadow, o: np.ndarray) -> float:
    return shadow.query(o)


def build_shadow(access, epsilon: float, delta: float, rng: np.random.Generator, *,
                 t: int = 3, budget: int | None = None, budget_ratio: float = 0.5,
                 faithful: bool = False) -> ClassicalShadow:
    """Measure copies of rho and store a classical shadow.

    ``budget`` is the total number of copies (default ``default_budget``); a
    ``budget_ratio`` fraction goes to rough tomography, the rest is shared by
    ``repetitions(delta)`` runs of the balanced estimator with batch size t.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0.0 < budget_ratio < 1.0:
        raise ValueError("budget_ratio must lie in (0, 1)")
    oracle = access if isinstance(access, StateOracle) else StateOracle(access)
    start = oracle.copies_used
    n_total = default_budget(epsilon, delta) if budget is None else int(budget)
    c = repetitions(delta)
    n_rough = max(1, int(budget_ratio * n_total))
    m = (n_total - n_rough) // (c * t)
    if m < 1:
        raise ValueError(f"budget {n_total} leaves no batches for {c} repetitions of size {t}")
    rough_rng, *rep_rngs = spawn(rng, c + 1)
    rho_hat = rough_tomography(oracle, n_rough, rough_rng)
    rough_copies = oracle.copies_used - start

    w, basis = np.linalg.eigh(rho_hat)
    w, basis = w[::-1], basis[:, ::-1]
    w = np.where(w < EIGEN_CLAMP, 0.0, w)
    w = w / w.sum()
    sig = choose_b(w)
    rho_rough = hermitize((basis * w) @ dag(basis))
    sigma = flattening_state(np.diag(w), sig)
    recentred = MixtureOracle(SplitOracle(oracle, sig, basis), sigma, 0.25, faithful=faithful)

    th = sw_theta(t, sig.k)
    if th <= 0:
        raise AssertionError("theta must be positive for t >= 1")
    e_hats = [estimate_balanced(recentred, t, m, r).e_hat for r in rep_rngs]
    meta = {"t": t, "m": m, "epsilon": epsilon, "delta": delta,
            "copies_rough": rough_copies, "copies_total": oracle.copies_used - start}
    return ClassicalShadow(rho_rough, basis, sig, e_hats, meta)


def dsplit_frobenius_bound(sig: SplitSignature) -> float:
    """max ||DSplit_b(O)||_F over ||O||_op <= 1, bounded by min(2k, 2^max(b) d)."""
    return math.sqrt(min(2 * sig.k, 2 ** max(sig.b) * sig.d))


def predicted_epsilon(shadow: ClassicalShadow, delta: float | None = None, slack: float = 2.0) -> float:
    """Accuracy (per unit operator norm of O) that the stored shadow should reach with probability 1 - delta.

    Uses the Haar-rotation variance of the balanced estimator at the recentred
    dimension k, inflated by ``slack`` for the near-uniform rotation, the worst
    case of ||DSplit(O)||_F, and the asymptotic spread sqrt(pi/2) sigma/sqrt(c)
    of a median of c estimates. Computed from the run's parameters only.
    """
    delta = shadow.meta.get("delta", 0.1) if delta is None else delta
    t, m, k, c = shadow.meta["t"], shadow.meta["m"], shadow.k, shadow.c
    th = sw_theta(t, k)
    per_rep = math.sqrt(slack * (k * k - 1) / (k * k * th * m)) * dsplit_frobenius_bound(shadow.sig)
    z = NormalDist().inv_cdf(1.0 - delta / 2.0)
    return 4.0 * z * math.sqrt(math.pi / 2.0) * per_rep / math.sqrt(c)
