"""Measurement access to copies of an unknown state.

An oracle hands out *groups* of identical measurement situations: for t-copy
batches, each group is a list of t per-copy density matrices together with the
number of batches in that situation. Derived oracles (splitting, mixtures)
transform these groups, so one set of samplers serves every access model and
every oracle charges copies to the root state it was built from.
"""
from __future__ import annotations

import numpy as np

from . import schurweyl
from .matcore import check_density, dag, haar_unitary, sample_categorical


class StateOracle:
    """Copies of an explicitly known state, with copy accounting."""

    def __init__(self, rho: np.ndarray):
        self.rho = check_density(np.asarray(rho, dtype=complex))
        self.copies_used = 0

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def state(self) -> np.ndarray:
        return self.rho

    def charge(self, n: int) -> None:
        self.copies_used += int(n)

    def batch_groups(self, t: int, count: int, rng: np.random.Generator) -> list[tuple[list, int]]:
        self.charge(t * count)
        return [([self.rho] * t, count)]

    def single_groups(self, n: int, rng: np.random.Generator) -> list[tuple[np.ndarray, int]]:
        self.charge(n)
        return [(self.rho, n)]

    # measurements ----------------------------------------------------------

    def keyl(self, t: int, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """``count`` Keyl measurements on fresh t-copy batches."""
        lams, us = [], []
        for slots, n in self.batch_groups(t, count, rng):
            if n:
                lam, u = schurweyl.keyl_sample_many(slots, n, rng)
                lams.append(lam)
                us.append(u)
        lams, us = np.concatenate(lams), np.concatenate(us)
        if len(lams) > 1:
            order = rng.permutation(len(lams))
            lams, us = lams[order], us[order]
        return lams, us

    def weak_schur(self, t: int, count: int, rng: np.random.Generator) -> list:
        out = []
        for slots, n in self.batch_groups(t, count, rng):
            if n:
                out.extend(schurweyl.weak_schur_sample(slots, t, rng, size=n))
        return [out[i] for i in rng.permutation(len(out))]

    def measure_bases(self, bases: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Measure one fresh copy in each orthonormal basis (columns of ``bases[i]``)."""
        n = len(bases)
        outcomes = np.empty(n, dtype=np.int64)
        start = 0
        for state, m in self.single_groups(n, rng):
            if not m:
                continue
            b = bases[start:start + m]
            probs = np.einsum("nij,jk,nki->ni", dag(b), state, b).real
            outcomes[start:start + m] = sample_categorical(np.clip(probs, 0.0, None), rng)
            start += m
        return outcomes

    def random_basis_measurements(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        bases = haar_unitary(self.dim, rng, n)
        return bases, self.measure_bases(bases, rng)


class DerivedOracle(StateOracle):
    """Base for oracles simulated from a parent oracle."""

    def __init__(self, parent: StateOracle, dim: int):
        self.parent = parent
        self._dim = dim

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def copies_used(self) -> int:
        return self.parent.copies_used

    def charge(self, n: int) -> None:
        self.parent.charge(n)

    @property
    def rho(self) -> np.ndarray:
        return self.state()
