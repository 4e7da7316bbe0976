"""Gaussian sketches of observables and the dimension-reduction channel.

k real d x m Gaussian matrices V_1..V_k (entries N(0, 1/d)) compress a d x d
observable M to the k x k matrix of off-diagonal traces tr(V_i^T M V_j). A
block channel built from the same V's prepares, after post-selection, a
k-dimensional state rho' whose overlap with the sketch of O is proportional
to <O, rho> on average. Any k-dimensional shadow solver therefore serves as
a d-dimensional one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .matcore import InvariantError, hermitize, inner, op_norm, sqrtm_psd
from .oracle import DerivedOracle, StateOracle

SPECTRAL_LO = 0.1
SPECTRAL_HI = 10.0
SKETCH_NORM_MAX = 10.0
MAX_RESAMPLES = 100
CHOI_MAX_DIM = 16
_SKETCH_CHUNK = 1 << 22


class EnsembleRejected(RuntimeError):
    """The projection ensemble failed its spectral test too many times."""


def columns_per_block(d: int, k: int) -> int:
    """m = 2d/k, rounded to the nearest integer (at least 1) when k does not divide 2d."""
    return max(1, round(2 * d / k))


def draw_v(d: int, k: int, m: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """k real d x m matrices with N(0, 1/d) entries, shape (k, d, m) or (size, k, d, m)."""
    shape = (k, d, m) if size is None else (size, k, d, m)
    return rng.standard_normal(shape) / math.sqrt(d)


def gram(v: np.ndarray) -> np.ndarray:
    """sum_i V_i V_i^T for a stack of shape (..., k, d, m)."""
    w = np.moveaxis(v, -3, -2)
    w = w.reshape(*w.shape[:-2], -1)
    return w @ np.swapaxes(w, -1, -2)


@dataclass(frozen=True)
class ProjectionEnsemble:
    v: np.ndarray  # (k, d, m)
    y: np.ndarray  # I - 0.1 sum V V^T

    @property
    def k(self) -> int:
        return self.v.shape[0]

    @property
    def d(self) -> int:
        return self.v.shape[1]

    @property
    def m(self) -> int:
        return self.v.shape[2]

    @classmethod
    def from_v(cls, v: np.ndarray) -> "ProjectionEnsemble":
        v = np.asarray(v, dtype=float)
        if v.ndim != 3:
            raise ValueError("v must have shape (k, d, m)")
        return cls(v, np.eye(v.shape[1]) - 0.1 * gram(v))

    def spectral_ok(self) -> bool:
        ev = np.linalg.eigvalsh(gram(self.v))
        return bool(ev[0] >= SPECTRAL_LO and ev[-1] <= SPECTRAL_HI)


def spectral_events(v: np.ndarray) -> np.ndarray:
    """Per-ensemble indicator of 0.1 I <= sum V V^T <= 10 I for a stack (n, k, d, m)."""
    ev = np.linalg.eigvalsh(gram(v))
    return (ev[:, 0] >= SPECTRAL_LO) & (ev[:, -1] <= SPECTRAL_HI)


def draw_ensemble(d: int, k: int, rng: np.random.Generator, m: int | None = None,
                  observable: np.ndarray | None = None,
                  max_resamples: int = MAX_RESAMPLES) -> tuple[ProjectionEnsemble, int]:
    """Draw V's until the spectral test (and, given an observable, ||sketch|| <= 10) passes.

    Returns the ensemble and the number of rejected draws.
    """
    m = columns_per_block(d, k) if m is None else m
    worst = None
    for attempt in range(max_resamples + 1):
        ens = ProjectionEnsemble.from_v(draw_v(d, k, m, rng))
        ev = np.linalg.eigvalsh(gram(ens.v))
        ok = ev[0] >= SPECTRAL_LO and ev[-1] <= SPECTRAL_HI
        if ok and observable is not None:
            ok = op_norm(sketch(observable, ens)) <= SKETCH_NORM_MAX
        if ok:
            return ens, attempt
        worst = (float(ev[0]), float(ev[-1]))
    raise EnsembleRejected(f"no acceptable ensemble for d={d}, k={k}, m={m} after "
                           f"{max_resamples + 1} draws; last spectrum range {worst}")


# -- sketches ----------------------------------------------------------------

def sketch_many(mat: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sketches of one d x d matrix under a stack of ensembles (n, k, d, m) -> (n, k, k)."""
    mat = np.asarray(mat)
    n, k, d, m = v.shape
    out = np.empty((n, k, k), dtype=np.result_type(mat, v))
    chunk = max(1, _SKETCH_CHUNK // (k * d * m + k * k * m))
    for s in range(0, n, chunk):
        vs = v[s:s + chunk]
        flat = vs.reshape(len(vs), k, d * m)
        mv = (mat @ vs).reshape(len(vs), k, d * m)
        out[s:s + chunk] = flat @ mv.transpose(0, 2, 1)
    idx = np.arange(k)
    out[:, idx, idx] = 0
    return out


def sketch(mat: np.ndarray, ens: ProjectionEnsemble) -> np.ndarray:
    """M_V: entry (i, j) is tr(V_i^T M V_j) for i != j and 0 on the diagonal."""
    mat = np.asarray(mat)
    if mat.shape != (ens.d, ens.d):
        raise ValueError("matrix dimension does not match the ensemble")
    return sketch_many(mat, ens.v[None])[0]


def gram_block(rho: np.ndarray, ens: ProjectionEnsemble) -> np.ndarray:
    """k x k matrix [tr(V_i^T rho V_j)], diagonal included."""
    return np.einsum("iac,ab,jbc->ij", ens.v, np.asarray(rho), ens.v)


# -- the channel -------------------------------------------------------------

def projection_channel(rho: np.ndarray, ens: ProjectionEnsemble) -> np.ndarray:
    """blockdiag(Y^{1/2} rho Y^{1/2}, 0.1 [tr(V_i^T rho V_j)]), a (d+k) x (d+k) matrix.

    Linear in rho, so it may also be applied to non-Hermitian operators.
    """
    if not ens.spectral_ok():
        raise EnsembleRejected("ensemble fails the spectral test; resample")
    d, k = ens.d, ens.k
    rho = np.asarray(rho, dtype=complex)
    root = sqrtm_psd(ens.y)
    out = np.zeros((d + k, d + k), dtype=complex)
    out[:d, :d] = root @ rho @ root
    out[d:, d:] = 0.1 * gram_block(rho, ens)
    return out


def choi_matrix(ens: ProjectionEnsemble) -> np.ndarray:
    """sum_ab |a><b| (x) Phi(|a><b|), built by applying the channel to matrix units."""
    d, k = ens.d, ens.k
    n = d + k
    if n > CHOI_MAX_DIM:
        raise ValueError(f"Choi test limited to d + k <= {CHOI_MAX_DIM}")
    choi = np.zeros((d * n, d * n), dtype=complex)
    for a in range(d):
        for b in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[a, b] = 1.0
            choi[a * n:(a + 1) * n, b * n:(b + 1) * n] = projection_channel(unit, ens)
    return choi


def postselect_fraction(rho: np.ndarray, ens: ProjectionEnsemble) -> tuple[float, np.ndarray]:
    """alpha = sum_i tr(V_i^T rho V_i) and the post-selected k x k state rho'.

    A copy lands in the k-block with probability 0.1 alpha.
    """
    block = hermitize(gram_block(rho, ens))
    alpha = float(np.trace(block).real)
    if alpha < SPECTRAL_LO:
        raise InvariantError(f"alpha = {alpha:.4g} < 0.1 violates the spectral acceptance event")
    return alpha, block / alpha


class PostselectOracle(DerivedOracle):
    """Copies of rho' obtained by passing copies of rho through the channel and keeping the k-block.

    Every kept copy costs a geometric number of parent copies; ``consumed``
    and ``kept`` record the totals so the keep fraction can be reported.
    """

    def __init__(self, parent: StateOracle, ens: ProjectionEnsemble, rng: np.random.Generator):
        super().__init__(parent, ens.k)
        self.ens = ens
        self.alpha, self._rho_prime = postselect_fraction(parent.state(), ens)
        self._rng = rng
        self.kept = 0
        self.consumed = 0

    @property
    def keep_probability(self) -> float:
        return 0.1 * self.alpha

    def state(self) -> np.ndarray:
        return self._rho_prime

    def _draw(self, n: int) -> None:
        if n <= 0:
            return
        used = n + int(self._rng.negative_binomial(n, self.keep_probability))
        self.kept += n
        self.consumed += used
        self.charge(used)

    def batch_groups(self, t, count, rng):
        self._draw(t * count)
        return [([self._rho_prime] * t, count)]

    def single_groups(self, n, rng):
        self._draw(n)
        return [(self._rho_prime, n)]

    def observed_fraction(self) -> float:
        if not self.consumed:
            raise ValueError("no copies consumed yet")
        return self.kept / self.consumed


# -- the wrapper -------------------------------------------------------------

InnerSolver = Callable[[StateOracle, np.ndarray, float, np.random.Generator], float]


def exact_inner(access: StateOracle, o: np.ndarray, accuracy: float, rng: np.random.Generator) -> float:
    """Noise-free inner solver returning <rho', O> for the oracle's state; for testing."""
    return float(inner(o, access.state()).real)


def shadow_inner(t: int = 3, delta: float = 0.1, budget: int | None = None,
                 budget_ratio: float = 0.5) -> InnerSolver:
    """Inner solver backed by the general-state classical shadow."""
    from .splitting import build_shadow

    def solve(access, o, accuracy, rng):
        shadow = build_shadow(access, min(accuracy, 0.999), delta, rng, t=t, budget=budget,
                              budget_ratio=budget_ratio)
        return shadow.query(o)

    return solve


@dataclass(frozen=True)
class ReducedEstimate:
    tau: float
    tau_inner: float
    beta: float
    alpha: float
    copies: int
    rejections: int


def sketch_estimator(rho: np.ndarray, o: np.ndarray, ens: ProjectionEnsemble) -> float:
    """d / (2(k-1)) <sketch(rho), sketch(O)>, unbiased for <O, rho> when m = 2d/k."""
    return ens.d / (2.0 * (ens.k - 1)) * float(inner(sketch(rho, ens), sketch(o, ens)).real)


def reduce_dimension_estimate(inner_solver: InnerSolver, access, o: np.ndarray,
                              epsilon: float, rng: np.random.Generator, *, k: int | None = None,
                              ens: ProjectionEnsemble | None = None,
                              inner_accuracy: float | None = None,
                              beta_mode: str = "binomial") -> ReducedEstimate:
    """Estimate <O, rho> through a k-dimensional solver run on post-selected copies.

    ``beta_mode="binomial"`` measures the keep fraction from the copies that
    were actually consumed; ``"exact"`` substitutes 0.1 alpha and is meant for
    oracle tests. The default inner accuracy is 0.01 eps k / d.
    """
    oracle = access if isinstance(access, StateOracle) else StateOracle(access)
    d = oracle.dim
    o = hermitize(np.asarray(o, dtype=complex))
    if ens is None and k is None:
        raise ValueError("give either k or an ensemble")
    k = ens.k if ens is not None else k
    if k < 2:
        raise ValueError("k must be at least 2")
    if k < 100.0 * math.sqrt(d) / epsilon:
        raise ValueError(f"k = {k} is below 100 sqrt(d)/eps = {100.0 * math.sqrt(d) / epsilon:.4g}")
    scale = op_norm(o)
    if scale == 0.0:
        return ReducedEstimate(0.0, 0.0, 0.0, 0.0, 0, 0)
    o_unit = o / max(scale, 1.0)
    rejections = 0
    if ens is None:
        ens, rejections = draw_ensemble(d, k, rng, observable=o_unit)
    elif op_norm(sketch(o_unit, ens)) > SKETCH_NORM_MAX:
        raise EnsembleRejected("sketch of O exceeds operator norm 10; resample the ensemble")
    if beta_mode not in ("binomial", "exact"):
        raise ValueError("beta_mode must be 'binomial' or 'exact'")
    acc = 0.01 * epsilon * k / d if inner_accuracy is None else inner_accuracy
    before = oracle.copies_used
    post = PostselectOracle(oracle, ens, rng)
    tau_inner = inner_solver(post, sketch(o_unit, ens), acc, rng)
    if beta_mode == "exact" or post.consumed == 0:
        beta = post.keep_probability
    else:
        beta = post.observed_fraction()
    tau = 5.0 * d * beta / (k - 1) * tau_inner * max(scale, 1.0)
    return ReducedEstimate(tau, tau_inner, beta, post.alpha, oracle.copies_used - before, rejections)


def reduce_dimension_median(inner_solver: InnerSolver, access, o: np.ndarray, epsilon: float,
                            delta: float, k: int, rng: np.random.Generator, **kw) -> float:
    """Lower median of ceil(log(1/delta)) independent wrapper runs, each with a fresh ensemble."""
    from .splitting import lower_median

    runs = max(1, math.ceil(math.log(1.0 / delta)))
    oracle = access if isinstance(access, StateOracle) else StateOracle(access)
    vals = [reduce_dimension_estimate(inner_solver, oracle, o, epsilon, r, k=k, **kw).tau
            for r in rng.spawn(runs)]
    return lower_median(vals)


def var_calc_bound(m_mat: np.ndarray, n_mat: np.ndarray, d: int, k: int, m: int) -> float:
    """6 (m^2 k^2 |M|^2 |N|^2 + m k^2 <M^2, N^2> + m k^3 |MN|^2) / d^4, Frobenius norms."""
    a = np.asarray(m_mat)
    b = np.asarray(n_mat)
    fm, fn = np.linalg.norm(a), np.linalg.norm(b)
    cross = float(inner(a @ a, b @ b).real)
    prod_f = np.linalg.norm(a @ b)
    return 6.0 * (m * m * k * k * fm ** 2 * fn ** 2 + m * k * k * cross + m * k ** 3 * prod_f ** 2) / d ** 4


def mean_calc_target(m_mat, n_mat, d: int, k: int, m: int) -> float:
    return k * (k - 1) * m / d ** 2 * float(inner(m_mat, n_mat).real)

