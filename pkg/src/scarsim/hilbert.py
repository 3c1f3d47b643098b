"""Fixed-photon-number basis sectors with combinadic rank/unrank indexing.

Basis states are L-bit occupation words (bit i = occupation of qubit i,
0-indexed) with exactly N bits set.  Within a sector, states are ordered
by increasing numeric value of the word; ranks are computed in O(L) via
the combinatorial number system, so no lookup tables are required.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .errors import CapacityError

MAX_SITES = 30
LAZY_DIM = 10_000_000  # sectors above this size are never materialized
MAX_SUBSYSTEM = 12


def binomial_table(n_max: int) -> np.ndarray:
    """Pascal triangle as an (n_max+1, n_max+1) int64 array; [n, k] = C(n, k)."""
    t = np.zeros((n_max + 1, n_max + 1), dtype=np.int64)
    t[:, 0] = 1
    for n in range(1, n_max + 1):
        for k in range(1, n + 1):
            t[n, k] = t[n - 1, k - 1] + t[n - 1, k]
    return t


@dataclass(frozen=True)
class BasisSector:
    """The set of L-qubit words with popcount N, ordered by numeric value."""

    L: int
    N: int
    dim: int

    @cached_property
    def binom(self) -> np.ndarray:
        return binomial_table(self.L)

    def rank(self, state: int) -> int:
        """Index of ``state`` in the sector ordering (combinadic, O(L))."""
        if state < 0 or state >> self.L:
            raise ValueError(f"state {state:#x} has bits beyond site {self.L - 1}")
        if state.bit_count() != self.N:
            raise ValueError(
                f"state {state:#x} has {state.bit_count()} photons, sector holds {self.N}"
            )
        r = 0
        k = 0
        b = self.binom
        for p in range(self.L):
            if (state >> p) & 1:
                k += 1
                r += int(b[p, k])
        return r

    def unrank(self, index: int) -> int:
        """Inverse of :meth:`rank`."""
        if not 0 <= index < self.dim:
            raise ValueError(f"index {index} outside [0, {self.dim})")
        b = self.binom
        word = 0
        r = index
        p = self.L - 1
        for k in range(self.N, 0, -1):
            while b[p, k] > r:
                p -= 1
            r -= int(b[p, k])
            word |= 1 << p
            p -= 1
        return word

    def __contains__(self, state: int) -> bool:
        return (
            0 <= state < (1 << self.L) and state.bit_count() == self.N
        )

    def iter_states(self) -> Iterator[int]:
        """Yield sector words in increasing numeric order (lazy)."""
        if self.N == 0:
            yield 0
            return
        v = (1 << self.N) - 1
        top = 1 << self.L
        while v < top:
            yield v
            # Gosper's hack: next word with the same popcount
            c = v & -v
            r = v + c
            v = (((r ^ v) >> 2) // c) | r

    @cached_property
    def states(self) -> np.ndarray:
        """All sector words as an int64 array (materialized; small sectors only)."""
        if self.dim > LAZY_DIM:
            raise CapacityError(
                f"sector dim {self.dim} exceeds materialization limit {LAZY_DIM}; "
                "iterate lazily instead"
            )
        from ._kernels import fill_sector_states

        out = np.empty(self.dim, dtype=np.int64)
        fill_sector_states(self.N, out)
        return out


def enumerate_sector(L: int, N: int) -> BasisSector:
    """Sector of ``L`` qubits holding exactly ``N`` photons."""
    if L < 0 or N < 0 or N > L:
        raise ValueError(f"need 0 <= N <= L, got L={L}, N={N}")
    if L > MAX_SITES:
        raise CapacityError(f"L={L} exceeds supported maximum {MAX_SITES}")
    return BasisSector(L=L, N=N, dim=math.comb(L, N))


def rank(sector: BasisSector, state: int) -> int:
    return sector.rank(state)


def unrank(sector: BasisSector, index: int) -> int:
    return sector.unrank(index)


def _scatter(local: int, sites: Sequence[int]) -> int:
    """Spread bits of ``local`` onto the given site positions."""
    word = 0
    for j, site in enumerate(sites):
        if (local >> j) & 1:
            word |= 1 << site
    return word


@dataclass(frozen=True)
class SubsystemMap:
    """Decomposition of sector indices into (subsystem, complement) labels.

    The sector factorizes into photon-count classes: class k collects all
    states with k photons on the subsystem sites A.  Within class k every
    combination of an A-configuration (C(|A|, k) of them) and a complement
    configuration (C(L-|A|, N-k)) occurs exactly once, so ``index_grid[k]``
    is a dense (n_a, n_b) matrix of sector indices.  This is the layout
    used to reshape a sector vector for partial traces.
    """

    sites: tuple[int, ...]
    L: int
    N: int
    a_words: tuple[np.ndarray, ...]     # per class: local A-words, ascending
    index_grid: tuple[np.ndarray, ...]  # per class: (n_a, n_b) sector indices

    @property
    def n_classes(self) -> int:
        return len(self.a_words)

    def pairs(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        """Per sector index: (local A-word, complement rank within its class)."""
        a_of = np.empty(dim, dtype=np.int64)
        b_of = np.empty(dim, dtype=np.int64)
        for words, grid in zip(self.a_words, self.index_grid):
            for ia, a in enumerate(words):
                idx = grid[ia]
                a_of[idx] = a
                b_of[idx] = np.arange(idx.shape[0])
        return a_of, b_of


def subsystem_maps(sector: BasisSector, A: Sequence[int]) -> SubsystemMap:
    """Index decomposition of ``sector`` for the subsystem on sites ``A``."""
    A = tuple(A)
    if len(set(A)) != len(A):
        raise ValueError(f"subsystem sites contain duplicates: {A}")
    if any(s < 0 or s >= sector.L for s in A):
        raise ValueError(f"subsystem sites out of range for L={sector.L}: {A}")
    if len(A) > MAX_SUBSYSTEM:
        raise CapacityError(
            f"subsystem of {len(A)} sites exceeds maximum {MAX_SUBSYSTEM}"
        )
    nA = len(A)
    B = tuple(s for s in range(sector.L) if s not in set(A))
    nB = len(B)

    from ._kernels import rank_many

    a_words_out = []
    grids = []
    for k in range(max(0, sector.N - nB), min(nA, sector.N) + 1):
        a_sub = enumerate_sector(nA, k) if nA else BasisSector(0, 0, 1)
        b_sub = enumerate_sector(nB, sector.N - k) if nB else BasisSector(0, 0, 1)
        a_local = np.fromiter(a_sub.iter_states(), dtype=np.int64, count=a_sub.dim)
        a_scat = np.array([_scatter(int(a), A) for a in a_local], dtype=np.int64)
        b_scat = np.fromiter(
            (_scatter(b, B) for b in b_sub.iter_states()),
            dtype=np.int64,
            count=b_sub.dim,
        )
        words = (a_scat[:, None] | b_scat[None, :]).ravel()
        idx = rank_many(words, sector.binom, sector.N)
        grids.append(idx.reshape(a_sub.dim, b_sub.dim))
        a_words_out.append(a_local)
    return SubsystemMap(
        sites=A,
        L=sector.L,
        N=sector.N,
        a_words=tuple(a_words_out),
        index_grid=tuple(grids),
    )
