"""Schur-Weyl machinery on (C^d)^{(x)t}: permutation action, S_t characters,
isotypic projectors, weight spaces, Keyl's POVM and its samplers.

Dense operators on d^t dimensions are built only when asked for (tests and
invariant checks). The samplers never form them: weak Schur probabilities are
expanded over permutations as products of cycle traces, and the Keyl density
only needs the isotypic projector restricted to the weight-lambda subspace,
which has dimension t!/prod(lam_i!).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations as _perms
from math import factorial, prod

import numpy as np

from .matcore import check_cap, dag, haar_unitary, kron_all, op_norm, tensor_power
from .tableaux import Partition, check_partition, dim_gl, dim_sym, enumerate_partitions, pad

MAX_T = 6
DEFAULT_MAX_REJECTIONS = 10**6
_CHUNK_ENTRIES = 2_000_000


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class KeylOutcome:
    lam: Partition
    u: np.ndarray


# -- symmetric group ---------------------------------------------------------

@lru_cache(maxsize=None)
def permutations(t: int) -> tuple[tuple[int, ...], ...]:
    """All permutations of range(t); ``p[x]`` is the image of ``x``."""
    return tuple(_perms(range(t)))


def inverse(p) -> tuple[int, ...]:
    inv = [0] * len(p)
    for i, x in enumerate(p):
        inv[x] = i
    return tuple(inv)


def compose(p, q) -> tuple[int, ...]:
    """(p o q)(x) = p(q(x))."""
    return tuple(p[q[x]] for x in range(len(p)))


def cycles(p) -> list[list[int]]:
    seen = [False] * len(p)
    out = []
    for start in range(len(p)):
        if seen[start]:
            continue
        cyc = []
        x = start
        while not seen[x]:
            seen[x] = True
            cyc.append(x)
            x = p[x]
        out.append(cyc)
    return out


def cycle_type(p) -> Partition:
    return tuple(sorted((len(c) for c in cycles(p)), reverse=True))


def z_value(mu: Partition) -> int:
    """Size of the centraliser of a permutation of cycle type ``mu``."""
    return prod(r ** m * factorial(m) for r, m in Counter(mu).items())


@lru_cache(maxsize=None)
def sym_character(lam: Partition, mu: Partition) -> int:
    """chi^lam evaluated at cycle type mu, by the Murnaghan-Nakayama rule.

    Works on beta-sets: removing a rim hook of length r moves one bead down by
    r; the sign counts the beads jumped over.
    """
    lam = check_partition(lam)
    mu = tuple(sorted(check_partition(mu), reverse=True))
    if sum(lam) != sum(mu):
        raise ValueError("lam and mu must partition the same integer")
    return _mn(lam, mu)


@lru_cache(maxsize=None)
def _mn(lam: Partition, mu: Partition) -> int:
    if not mu:
        return 1 if not lam else 0
    r, rest = mu[0], mu[1:]
    ell = len(lam)
    beta = [lam[i] + ell - 1 - i for i in range(ell)]
    beads = set(beta)
    total = 0
    for b in beta:
        nb = b - r
        if nb < 0 or nb in beads:
            continue
        sign = -1 if sum(1 for x in beta if nb < x < b) % 2 else 1
        new_beta = sorted((beads - {b}) | {nb}, reverse=True)
        new_lam = tuple(x - (ell - 1 - i) for i, x in enumerate(new_beta))
        new_lam = tuple(x for x in new_lam if x > 0)
        total += sign * _mn(new_lam, rest)
    return total


@lru_cache(maxsize=None)
def _cycle_classes(t: int) -> tuple[tuple[Partition, int], ...]:
    counts = Counter(cycle_type(p) for p in permutations(t))
    return tuple(sorted(counts.items(), reverse=True))


# -- dense operators ---------------------------------------------------------

@lru_cache(maxsize=256)
def _digits(d: int, t: int) -> np.ndarray:
    return np.indices((d,) * t).reshape(t, -1)


def permutation_indices(p, d: int) -> np.ndarray:
    """Index map i -> o(i) of the permutation operator on d^t basis tensors.

    Slot j of the output holds slot p^{-1}(j) of the input.
    """
    t = len(p)
    digits = _digits(d, t)
    pinv = inverse(p)
    out_digits = digits[list(pinv)]
    return np.ravel_multi_index(tuple(out_digits), (d,) * t)


def permutation_operator(p, d: int, cap: int | None = None) -> np.ndarray:
    t = len(p)
    dim = d ** t
    check_cap(dim, cap)
    op = np.zeros((dim, dim))
    op[permutation_indices(p, d), np.arange(dim)] = 1.0
    return op


def _check_t(t: int) -> None:
    if t > MAX_T:
        raise ValueError(f"t={t} exceeds the permutation-sum cap {MAX_T}")


@lru_cache(maxsize=32)
def _isotypic_projector(lam: Partition, d: int, t: int) -> np.ndarray:
    dim = d ** t
    out = np.zeros((dim, dim))
    cols = np.arange(dim)
    scale = dim_sym(lam) / factorial(t)
    for p in permutations(t):
        chi = sym_character(lam, cycle_type(p))
        if chi:
            np.add.at(out, (permutation_indices(p, d), cols), scale * chi)
    out.setflags(write=False)
    return out


def isotypic_projector(lam: Partition, d: int, t: int, cap: int | None = None) -> np.ndarray:
    """Projector onto the lam-isotypic subspace, (dim lam / t!) sum_pi chi^lam(pi) P_pi."""
    lam = check_partition(lam)
    if sum(lam) != t:
        raise ValueError("lam must partition t")
    _check_t(t)
    check_cap(d ** t, cap)
    return _isotypic_projector(lam, d, t)


def weight_indices(lam: Partition, d: int, t: int) -> np.ndarray:
    """Basis indices of the words whose symbol r occurs exactly lam_r times."""
    freqs = np.asarray(pad(check_partition(lam), d)) if lam else np.zeros(d, int)
    if freqs.sum() != t:
        raise ValueError("lam must partition t")
    digits = _digits(d, t)
    counts = np.stack([(digits == r).sum(axis=0) for r in range(d)])
    return np.flatnonzero((counts == freqs[:, None]).all(axis=0))


def weight_projector(lam: Partition, d: int, t: int, cap: int | None = None) -> np.ndarray:
    check_cap(d ** t, cap)
    diag = np.zeros(d ** t)
    diag[weight_indices(lam, d, t)] = 1.0
    return np.diag(diag)


@lru_cache(maxsize=256)
def weight_block(lam: Partition, d: int, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Words of weight lam and the isotypic projector restricted to them.

    Returns ``(words, block)`` where ``words`` has shape (n_w, t) and
    ``block[a, b] = <w_a| Pi_lam |w_b>``.
    """
    lam = check_partition(lam)
    _check_t(t)
    freqs = pad(lam, d)
    base = [r for r, f in enumerate(freqs) for _ in range(f)]
    words = sorted(set(_perms(base)))
    index = {w: i for i, w in enumerate(words)}
    n_w = len(words)
    block = np.zeros((n_w, n_w))
    scale = dim_sym(lam) / factorial(t)
    for p in permutations(t):
        chi = sym_character(lam, cycle_type(p))
        if not chi:
            continue
        pinv = inverse(p)
        for b, w in enumerate(words):
            image = tuple(w[pinv[j]] for j in range(t))
            block[index[image], b] += scale * chi
    arr = np.array(words, dtype=np.int64).reshape(n_w, t)
    arr.setflags(write=False)
    block.setflags(write=False)
    return arr, block


def keyl_povm_element(lam: Partition, u: np.ndarray, d: int, t: int, cap: int | None = None) -> np.ndarray:
    """dim_gl(lam, d) U^{(x)t} Pi_lam P_{wt=lam} U^{dagger (x)t}."""
    lam = check_partition(lam)
    check_cap(d ** t, cap)
    pi = isotypic_projector(lam, d, t, cap)
    w = weight_indices(lam, d, t)
    q = np.zeros_like(pi)
    q[np.ix_(w, w)] = pi[np.ix_(w, w)]
    ut = tensor_power(np.asarray(u), t, cap)
    return dim_gl(lam, d) * (ut @ q @ dag(ut))


# -- weak Schur sampling -----------------------------------------------------

def _as_slots(state, t: int | None) -> list[np.ndarray]:
    if isinstance(state, (list, tuple)):
        slots = [np.asarray(s, dtype=complex) for s in state]
        if t is not None and len(slots) != t:
            raise ValueError("number of per-copy states must equal t")
        return slots
    if t is None:
        raise ValueError("t is required with a single density matrix")
    return [np.asarray(state, dtype=complex)] * t


def _all_same(slots) -> bool:
    return all(s is slots[0] or np.array_equal(s, slots[0]) for s in slots[1:])


def permutation_trace(p, slots) -> complex:
    """tr(P_p (tau_1 (x) ... (x) tau_t)) as a product of ordered cycle traces."""
    pinv = inverse(p)
    total = 1.0 + 0j
    for cyc in cycles(pinv):
        m = slots[cyc[0]]
        for j in cyc[1:]:
            m = m @ slots[j]
        total *= np.trace(m)
    return total


def weak_schur_pmf(state, t: int | None = None) -> dict[Partition, float]:
    """Exact pmf of lam under weak Schur sampling.

    ``state`` is either a d x d density matrix (measured as rho^{(x)t}) or a
    list of t per-copy density matrices (a product state).
    """
    slots = _as_slots(state, t)
    t = len(slots)
    d = slots[0].shape[0]
    _check_t(t)
    lams = enumerate_partitions(t, d)
    if _all_same(slots):
        ev = np.linalg.eigvalsh(0.5 * (slots[0] + dag(slots[0])))
        power = {r: float(np.sum(ev ** r)) for r in range(1, t + 1)}
        classes = [(mu, prod(power[r] for r in mu) / z_value(mu)) for mu, _ in _cycle_classes(t)]
        raw = {lam: dim_sym(lam) * sum(sym_character(lam, mu) * w for mu, w in classes) for lam in lams}
    else:
        traces = [(cycle_type(p), permutation_trace(p, slots).real) for p in permutations(t)]
        raw = {lam: dim_sym(lam) / factorial(t) * sum(sym_character(lam, mu) * tr for mu, tr in traces)
               for lam in lams}
    return _normalise(raw)


def _normalise(raw: dict) -> dict:
    probs = {lam: max(float(v), 0.0) for lam, v in raw.items()}
    total = sum(probs.values())
    return {lam: v / total for lam, v in probs.items()}


def weak_schur_pmf_dense(rho: np.ndarray, t: int, cap: int | None = None) -> dict[Partition, float]:
    """Same pmf via explicit projectors, tr(Pi_lam rho^{(x)t})."""
    d = rho.shape[0]
    big = tensor_power(np.asarray(rho, dtype=complex), t, cap)
    raw = {lam: float(np.sum(isotypic_projector(lam, d, t, cap) * big.T).real)
           for lam in enumerate_partitions(t, d)}
    return _normalise(raw)


def weak_schur_sample(rho, t: int, rng: np.random.Generator, size: int | None = None):
    pmf = weak_schur_pmf(rho, t)
    lams = list(pmf)
    idx = rng.choice(len(lams), size=size, p=np.array(list(pmf.values())))
    if size is None:
        return lams[int(idx)]
    return [lams[i] for i in idx]


# -- Keyl measurement --------------------------------------------------------

def keyl_weight(lam: Partition, us: np.ndarray, state, t: int | None = None) -> np.ndarray:
    """tr(Pi_lam P_{wt=lam} (U^dagger tau_1 U) (x) ... (x) (U^dagger tau_t U)) for a stack of U.

    Multiplying by dim_gl(lam, d) / p(lam) gives the Keyl density of U given
    lam, with respect to Haar measure.
    """
    slots = _as_slots(state, t)
    us = np.asarray(us)
    single = us.ndim == 2
    us = us[None] if single else us
    words, block = weight_block(check_partition(lam), slots[0].shape[0], len(slots))
    out = _block_trace(words, block, _rotate_slots(slots, us))
    return out[0] if single else out


def _rotate_slots(slots, us):
    cache: dict[int, np.ndarray] = {}
    rotated = []
    for s in slots:
        key = id(s)
        if key not in cache:
            cache[key] = dag(us) @ s @ us
        rotated.append(cache[key])
    return rotated


def _block_trace(words: np.ndarray, block: np.ndarray, rotated) -> np.ndarray:
    n = rotated[0].shape[0]
    acc = np.ones((n, len(words), len(words)), dtype=complex)
    for j, sig in enumerate(rotated):
        col = words[:, j]
        acc *= sig[:, col[:, None], col[None, :]]
    return np.einsum("nba,ab->n", acc, block).real


def _sample_unitaries(lam, slots, count, p_lam, rng, max_rejections):
    d, t = slots[0].shape[0], len(slots)
    words, block = weight_block(lam, d, t)
    norms = {id(s): op_norm(s) for s in _unique(slots)}
    envelope = dim_sym(lam) * prod(norms[id(s)] for s in slots)
    accept_rate = p_lam / (dim_gl(lam, d) * envelope)
    if accept_rate * max_rejections < 1.0:
        raise SamplingError(f"envelope ratio {1.0 / accept_rate:.3g} exceeds the rejection cap "
                            f"{max_rejections} for lam={lam}")
    chunk_max = max(16, _CHUNK_ENTRIES // max(1, len(words) ** 2))
    out = []
    need, proposals = count, 0
    while need > 0:
        size = int(min(chunk_max, np.ceil(1.2 * need / accept_rate) + 8))
        us = haar_unitary(d, rng, size)
        ratio = _block_trace(words, block, _rotate_slots(slots, us)) / envelope
        keep = us[rng.random(size) < ratio][:need]
        out.append(keep)
        need -= len(keep)
        proposals += size
        if proposals > max_rejections * count:
            raise SamplingError(f"rejection cap exceeded for lam={lam}; envelope ratio "
                                f"{1.0 / accept_rate:.3g}")
    return np.concatenate(out)


def _unique(slots):
    seen, out = set(), []
    for s in slots:
        if id(s) not in seen:
            seen.add(id(s))
            out.append(s)
    return out


def keyl_sample_many(state, size: int, rng: np.random.Generator, t: int | None = None,
                     max_rejections: int = DEFAULT_MAX_REJECTIONS) -> tuple[np.ndarray, np.ndarray]:
    """``size`` independent Keyl measurements of the same t-copy product state.

    Returns ``(lams, us)``: zero-padded partitions of shape (size, d) and
    unitaries of shape (size, d, d).
    """
    slots = _as_slots(state, t)
    if _all_same(slots):
        slots = [slots[0]] * len(slots)
    d = slots[0].shape[0]
    pmf = weak_schur_pmf(slots)
    keys = list(pmf)
    probs = np.array([pmf[k] for k in keys])
    choice = rng.choice(len(keys), size=size, p=probs)
    lams = np.zeros((size, d), dtype=np.int64)
    us = np.zeros((size, d, d), dtype=complex)
    for i, lam in enumerate(keys):
        where = np.flatnonzero(choice == i)
        if not len(where):
            continue
        lams[where] = pad(lam, d)
        us[where] = _sample_unitaries(lam, slots, len(where), probs[i], rng, max_rejections)
    return lams, us


def keyl_sample(rho, t: int, rng: np.random.Generator,
                max_rejections: int = DEFAULT_MAX_REJECTIONS) -> KeylOutcome:
    lams, us = keyl_sample_many(rho, 1, rng, t=t, max_rejections=max_rejections)
    return KeylOutcome(check_partition(lams[0]), us[0])


def product_state(slots) -> np.ndarray:
    return kron_all(slots)
