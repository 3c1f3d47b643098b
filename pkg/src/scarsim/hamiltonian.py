"""Sector-restricted XY Hamiltonians with fast Hermitian matvecs.

The operator is real symmetric: hop terms place the edge's angular
frequency w_ij = 2*pi*f_ij*1e-3 rad/ns between any two sector words that
differ by moving one photon along edge (i, j); the diagonal holds
sum_i w_i n_i.  Explicit-sparse mode materializes CSR triplets, matrix-free
mode keeps only the edge list plus (for speed, when 2^L is small enough)
a word->index lookup table.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import CapacityError
from .hilbert import LAZY_DIM, BasisSector
from .model import CouplingGraph

MHZ_TO_RAD_PER_NS = 2e-3 * np.pi  # f [MHz] -> omega [rad/ns]

EXPLICIT_LIMIT = 1_000_000   # CSR mode allowed up to this dimension
TABLE_SITE_LIMIT = 24        # word->index table kept while 2^L <= 16M words


@dataclass(frozen=True)
class SparseHamiltonian:
    sector: BasisSector
    edge_i: np.ndarray      # int64 site indices
    edge_j: np.ndarray
    weights: np.ndarray     # rad/ns per edge
    onsite_w: np.ndarray    # rad/ns per site
    mode: str               # "explicit" | "matrix-free"
    edge_kinds: tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        return self.sector.dim

    @cached_property
    def masks(self) -> np.ndarray:
        return (1 << self.edge_i.astype(np.int64)) | (1 << self.edge_j.astype(np.int64))

    @cached_property
    def _edge_lookup(self) -> dict[int, float]:
        return {int(m): float(w) for m, w in zip(self.masks, self.weights)}

    @cached_property
    def states(self) -> np.ndarray:
        if self.dim > LAZY_DIM:
            raise CapacityError(
                f"dim {self.dim} exceeds apply budget {LAZY_DIM}; "
                "only metadata operations are available at this size"
            )
        return self.sector.states

    @cached_property
    def diag(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.float64)
        if np.any(self.onsite_w != 0.0):
            _kernels.diag_from_onsite(self.states, self.onsite_w, out)
        return out

    @cached_property
    def _table(self) -> np.ndarray | None:
        if self.sector.L > TABLE_SITE_LIMIT:
            return None
        table = np.zeros(1 << self.sector.L, dtype=np.int64)
        table[self.states] = np.arange(self.dim, dtype=np.int64)
        return table

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        if self.mode != "explicit":
            raise RuntimeError("CSR storage is only built in explicit mode")
        states = self.states
        with_diag = bool(np.any(self.onsite_w != 0.0))
        counts = np.empty(self.dim, dtype=np.int64)
        _kernels.count_row_entries(states, self.masks, counts, with_diag)
        indptr = np.zeros(self.dim + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        nnz = int(indptr[-1])
        indices = np.empty(nnz, dtype=np.int64)
        data = np.empty(nnz, dtype=np.float64)
        _kernels.fill_csr(
            states, self.sector.binom, self.sector.N, self.masks, self.weights,
            self.diag, with_diag, indptr, indices, data,
        )
        m = sp.csr_matrix((data, indices, indptr), shape=(self.dim, self.dim))
        m.sort_indices()
        return m

    # -- spectral-scale estimate (Gershgorin-style upper bound) --------------

    @cached_property
    def norm_bound(self) -> float:
        return float(np.max(np.abs(self.diag)) + np.sum(np.abs(self.weights)))

    def apply(self, v: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """H @ v with a deterministic per-row summation order."""
        if v.shape != (self.dim,):
            raise ValueError(f"vector has shape {v.shape}, expected ({self.dim},)")
        if self.mode == "explicit":
            result = self._csr @ v
            if out is not None:
                out[:] = result
                return out
            return result
        v = np.ascontiguousarray(v, dtype=np.complex128)
        if out is None:
            out = np.empty(self.dim, dtype=np.complex128)
        if self._table is not None:
            _kernels.matvec_table(
                self.states, self._table, self.masks, self.weights, self.diag, v, out
            )
        else:
            _kernels.matvec_rank(
                self.states, self.sector.binom, self.sector.N,
                self.masks, self.weights, self.diag, v, out,
            )
        return out

    def matrix_element(self, u: int, v: int) -> float:
        """Entry <u|H|v> (rad/ns) for sector words u, v, without row assembly."""
        if u == v:
            acc = 0.0
            for i in range(self.sector.L):
                if (u >> i) & 1:
                    acc += float(self.onsite_w[i])
            return acc
        x = u ^ v
        if x.bit_count() != 2:
            return 0.0
        w = self._edge_lookup.get(x)
        if w is None:
            return 0.0
        # same popcount on both sides => exactly one of the two sites occupied
        return w if u.bit_count() == v.bit_count() else 0.0

    def toarray(self) -> np.ndarray:
        states = self.states
        h = np.zeros((self.dim, self.dim), dtype=np.float64)
        h[np.arange(self.dim), np.arange(self.dim)] = self.diag
        for m, w in zip(self.masks, self.weights):
            x = states & m
            sel = np.nonzero((x != 0) & (x != m))[0]
            partners = _kernels.rank_many(
                states[sel] ^ m, self.sector.binom, self.sector.N
            )
            h[sel, partners] += w
        return h

    def triplets(self):
        """Yield (u_word, v_word, value) for all nonzero entries; small L only."""
        states = self.states
        diag = self.diag
        for idx in range(self.dim):
            s = int(states[idx])
            if diag[idx] != 0.0:
                yield s, s, float(diag[idx])
            for m, w in zip(self.masks, self.weights):
                x = s & int(m)
                if x != 0 and x != int(m):
                    yield s, s ^ int(m), float(w)


def assemble(graph: CouplingGraph, sector: BasisSector, mode: str = "auto"
             ) -> SparseHamiltonian:
    """Build the sector Hamiltonian for a coupling graph.

    ``mode='auto'`` picks explicit CSR up to dim 10^6 and matrix-free
    beyond; explicit mode above the budget raises ``CapacityError``.
    """
    if graph.L != sector.L:
        raise ValueError(f"graph has {graph.L} sites but sector expects {sector.L}")
    if mode == "auto":
        mode = "explicit" if sector.dim <= EXPLICIT_LIMIT else "matrix-free"
    if mode not in ("explicit", "matrix-free"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "explicit" and sector.dim > EXPLICIT_LIMIT:
        raise CapacityError(
            f"explicit mode at dim {sector.dim} exceeds budget {EXPLICIT_LIMIT}; "
            "use matrix-free"
        )
    edge_i = np.array([e.i for e in graph.edges], dtype=np.int64)
    edge_j = np.array([e.j for e in graph.edges], dtype=np.int64)
    weights = np.array([e.f_MHz for e in graph.edges], dtype=np.float64)
    onsite = np.array(graph.onsite, dtype=np.float64)
    return SparseHamiltonian(
        sector=sector,
        edge_i=edge_i,
        edge_j=edge_j,
        weights=weights * MHZ_TO_RAD_PER_NS,
        onsite_w=onsite * MHZ_TO_RAD_PER_NS,
        mode=mode,
        edge_kinds=tuple(e.kind for e in graph.edges),
    )


def apply(H: SparseHamiltonian, v: np.ndarray) -> np.ndarray:
    return H.apply(v)


def matrix_element(H: SparseHamiltonian, u: int, v: int) -> float:
    return H.matrix_element(u, v)


def dump_triplets(H: SparseHamiltonian, path) -> None:
    """Write (u, v, value) rows as CSV; intended for small-L debugging."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u_bits", "v_bits", "value_rad_per_ns"])
        for u, v, val in H.triplets():
            w.writerow([f"{u:#x}", f"{v:#x}", f"{val:.17g}"])
