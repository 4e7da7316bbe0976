"""Dense complex linear algebra shared by the rest of the package.

Matrices are plain ``numpy`` arrays. Hermitian and density matrices are not
wrapped in classes; the ``check_*`` helpers validate them where it matters.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

HERMITIAN_TOL = 1e-12
EIG_TOL = 1e-10
DEFAULT_DIM_CAP = 4096


class ResourceError(RuntimeError):
    """Raised when a dense construction would exceed the configured dimension cap."""


class InvariantError(ValueError):
    """Raised when a matrix violates a Hermiticity / density-matrix invariant."""


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for ``(seed, stream)``; equal pairs give identical draws."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream),)))


def spawn(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    return list(rng.spawn(n))


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dag(a))


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product tr(a^dagger b)."""
    return complex(np.vdot(a, b))


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    return bool(np.max(np.abs(a - dag(a)), initial=0.0) <= tol * scale)


def check_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a, tol):
        raise InvariantError("matrix is not Hermitian")
    return a


def check_density(rho: np.ndarray, tol: float = EIG_TOL) -> np.ndarray:
    rho = check_hermitian(rho, max(tol, HERMITIAN_TOL))
    if abs(np.trace(rho).real - 1.0) > tol:
        raise InvariantError(f"trace {np.trace(rho).real!r} != 1")
    if np.linalg.eigvalsh(hermitize(rho)).min() < -tol:
        raise InvariantError("matrix has a negative eigenvalue")
    return rho


def check_cap(dim: int, cap: int | None = None) -> None:
    cap = DEFAULT_DIM_CAP if cap is None else cap
    if dim > cap:
        raise ResourceError(f"dimension {dim} exceeds cap {cap}")


def tensor_power(m: np.ndarray, t: int, cap: int | None = None) -> np.ndarray:
    """t-fold Kronecker power of ``m``."""
    if t < 1:
        raise ValueError("t must be positive")
    m = np.asarray(m)
    check_cap(m.shape[0] ** t, cap)
    out = m
    for _ in range(t - 1):
        out = np.kron(out, m)
    return out


def kron_all(factors) -> np.ndarray:
    out = np.ones((1, 1))
    for f in factors:
        out = np.kron(out, f)
    return out


def haar_unitary(d: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random unitary (or a stack of ``size`` of them).

    QR of a complex Ginibre matrix, with the phases of diag(R) moved into Q so
    the result is exactly Haar distributed.
    """
    if d < 1:
        raise ValueError("d must be positive")
    shape = (d, d) if size is None else (size, d, d)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    phases = diag / np.abs(diag)
    return q * phases[..., None, :]


def gaussian_matrix(rows: int, cols: int, variance: float, rng: np.random.Generator,
                    size: int | None = None) -> np.ndarray:
    """Real matrix with i.i.d. N(0, variance) entries."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    if variance <= 0:
        raise ValueError("variance must be positive")
    shape = (rows, cols) if size is None else (size, rows, cols)
    return np.sqrt(variance) * rng.standard_normal(shape)


class Norms(NamedTuple):
    frobenius: float
    operator: float
    trace_norm: float


def norms(m: np.ndarray) -> Norms:
    m = np.asarray(m)
    ev = np.abs(np.linalg.eigvalsh(hermitize(m)))
    return Norms(float(np.linalg.norm(m)), float(ev.max()), float(ev.sum()))


def op_norm(m: np.ndarray) -> float:
    """Largest singular value; works for non-Hermitian input too."""
    return float(np.linalg.norm(m, 2))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    r = idx[u - css / idx > 0][-1]
    shift = css[r - 1] / r
    return np.maximum(v - shift, 0.0)


def psd_project(m: np.ndarray) -> np.ndarray:
    """Nearest (Frobenius) density matrix to the Hermitian part of ``m``."""
    w, v = np.linalg.eigh(hermitize(np.asarray(m, dtype=complex)))
    p = project_simplex(w)
    return hermitize((v * p) @ dag(v))


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return hermitize(g)


def random_traceless(d: int, rng: np.random.Generator, frob: float = 1.0) -> np.ndarray:
    h = random_hermitian(d, rng)
    h -= np.trace(h).real / d * np.eye(d)
    return frob * h / np.linalg.norm(h)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random state from the induced (Hilbert-Schmidt for full rank) measure."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ dag(g)
    return hermitize(rho / np.trace(rho).real)


def maximally_mixed(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex) / d


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hermitize(m))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ dag(v)


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of ``probs`` (rows need not be normalised)."""
    probs = np.asarray(probs, dtype=float)
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1] + (1,)) * cdf[..., -1:]
    idx = (u > cdf).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)
