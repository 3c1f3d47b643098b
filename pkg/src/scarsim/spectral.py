"""Exact-diagonalization diagnostics: spectra, level statistics, entanglement,
overlaps and scar-tower detection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import CapacityError, SymmetryAbsentError
from .hamiltonian import SparseHamiltonian
from .hilbert import BasisSector, SubsystemMap, subsystem_maps
from .model import CouplingGraph

DENSE_LIMIT = 70_000
DEGENERACY_TOL = 1e-10


@dataclass
class Eigensystem:
    """Ascending spectrum of a sector Hamiltonian, optionally with vectors."""

    energies: np.ndarray               # rad/ns, ascending
    vectors: np.ndarray | None         # column n = eigenvector n
    sector: BasisSector
    parity: np.ndarray | None = None   # +-1 per eigenstate when resolved

    @property
    def dim(self) -> int:
        return self.energies.shape[0]


@dataclass(frozen=True)
class ReflectionBasis:
    """Orthonormal symmetric/antisymmetric combinations under i -> L-1-i."""

    sector: BasisSector
    perm: np.ndarray          # sector index of the reflected word
    plus: sp.csr_matrix       # dim x d_plus
    minus: sp.csr_matrix      # dim x d_minus

    @property
    def dims(self) -> tuple[int, int]:
        return self.plus.shape[1], self.minus.shape[1]


def _reflect_word(word: int, L: int) -> int:
    out = 0
    for p in range(L):
        if (word >> p) & 1:
            out |= 1 << (L - 1 - p)
    return out


def parity_sectors(sector: BasisSector, graph: CouplingGraph) -> ReflectionBasis:
    """Split the sector under the site reflection i -> L-1-i.

    Raises ``SymmetryAbsentError`` unless the graph (edges and on-site
    terms) is invariant under the reflection.
    """
    L = graph.L
    mirror = {}
    for e in graph.edges:
        mirror[e.key()] = e.f_MHz
    for (i, j), w in mirror.items():
        ri, rj = L - 1 - i, L - 1 - j
        key = (min(ri, rj), max(ri, rj))
        if key not in mirror or abs(mirror[key] - w) > 1e-12:
            raise SymmetryAbsentError(
                f"edge ({i},{j}) has no mirror partner of equal strength"
            )
    for i in range(L):
        if abs(graph.onsite[i] - graph.onsite[L - 1 - i]) > 1e-12:
            raise SymmetryAbsentError(f"on-site term at {i} breaks reflection")

    states = sector.states
    perm = np.empty(sector.dim, dtype=np.int64)
    for idx in range(sector.dim):
        perm[idx] = sector.rank(_reflect_word(int(states[idx]), L))

    rows_p, cols_p, vals_p = [], [], []
    rows_m, cols_m, vals_m = [], [], []
    cp = cm = 0
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for u in range(sector.dim):
        v = int(perm[u])
        if v == u:
            rows_p.append(u)
            cols_p.append(cp)
            vals_p.append(1.0)
            cp += 1
        elif u < v:
            rows_p += [u, v]
            cols_p += [cp, cp]
            vals_p += [inv_sqrt2, inv_sqrt2]
            cp += 1
            rows_m += [u, v]
            cols_m += [cm, cm]
            vals_m += [inv_sqrt2, -inv_sqrt2]
            cm += 1
    plus = sp.csr_matrix(
        (vals_p, (rows_p, cols_p)), shape=(sector.dim, cp), dtype=np.float64
    )
    minus = sp.csr_matrix(
        (vals_m, (rows_m, cols_m)), shape=(sector.dim, cm), dtype=np.float64
    )
    return ReflectionBasis(sector=sector, perm=perm, plus=plus, minus=minus)


def diagonalize(
    H: SparseHamiltonian,
    want_vectors: bool = True,
    reflection: ReflectionBasis | None = None,
) -> Eigensystem:
    """Full dense spectrum; dims above the dense budget raise CapacityError."""
    if H.dim > DENSE_LIMIT:
        raise CapacityError(
            f"dense diagonalization budget is {DENSE_LIMIT}, got dim {H.dim}"
        )
    if reflection is None:
        dense = H.toarray()
        if want_vectors:
            energies, vectors = sla.eigh(dense, overwrite_a=True, check_finite=False)
        else:
            energies = sla.eigvalsh(dense, overwrite_a=True, check_finite=False)
            vectors = None
        return Eigensystem(energies=energies, vectors=vectors, sector=H.sector)

    dense = H.toarray()
    chunks = []
    for label, basis in ((1, reflection.plus), (-1, reflection.minus)):
        block = basis.T @ (basis.T @ dense.T).T  # B^T H B, dense result
        block = np.asarray(block)
        if want_vectors:
            e, w = sla.eigh(block, overwrite_a=True, check_finite=False)
            vec = basis @ w
        else:
            e = sla.eigvalsh(block, overwrite_a=True, check_finite=False)
            vec = None
        chunks.append((e, vec, label))
    energies = np.concatenate([c[0] for c in chunks])
    labels = np.concatenate(
        [np.full(c[0].shape[0], c[2], dtype=np.int8) for c in chunks]
    )
    order = np.argsort(energies, kind="stable")
    vectors = None
    if want_vectors:
        vectors = np.concatenate([c[1] for c in chunks], axis=1)[:, order]
    return Eigensystem(
        energies=energies[order],
        vectors=vectors,
        sector=H.sector,
        parity=labels[order],
    )


@dataclass(frozen=True)
class GapRatioResult:
    r_mean: float
    n_used: int
    n_degenerate: int
    r_values: np.ndarray = field(repr=False, default=None)


def mean_gap_ratio(energies: np.ndarray, discard_fraction: float = 0.2
                   ) -> GapRatioResult:
    """Mean of r_n = min(s_n, s_n+1)/max(s_n, s_n+1) over the spectral bulk.

    ``discard_fraction`` is the total fraction dropped, split evenly
    between the two spectral edges.  Spacings below 1e-12 are treated as
    degeneracies: excluded from the ratios and counted in the result.
    """
    e = np.sort(np.asarray(energies, dtype=np.float64))
    n = e.shape[0]
    lo = int(np.floor(n * discard_fraction / 2))
    hi = n - lo
    bulk = e[lo:hi]
    if bulk.shape[0] < 100:
        raise ValueError(
            f"need >= 100 bulk energies after discarding edges, got {bulk.shape[0]}"
        )
    s = np.diff(bulk)
    degenerate = s < 1e-12
    n_deg = int(np.count_nonzero(degenerate))
    s = s[~degenerate]
    r = np.minimum(s[:-1], s[1:]) / np.maximum(s[:-1], s[1:])
    return GapRatioResult(
        r_mean=float(np.mean(r)),
        n_used=int(r.shape[0]),
        n_degenerate=n_deg,
        r_values=r,
    )


def _entropy_from_probs(p: np.ndarray) -> float:
    p = p[p > 1e-14]
    return float(-np.sum(p * np.log(p)))


def eigenstate_entropies(
    eigsys: Eigensystem,
    cut: "tuple[int, ...] | list[int]",
    smap: SubsystemMap | None = None,
    chunk: int = 256,
) -> np.ndarray:
    """Von Neumann entropy (natural log) of the cut for every eigenstate."""
    if eigsys.vectors is None:
        raise ValueError("eigenvectors are required for entanglement entropies")
    if smap is None:
        smap = subsystem_maps(eigsys.sector, tuple(cut))
    V = eigsys.vectors
    n = eigsys.dim
    out = np.zeros(n, dtype=np.float64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block_probs = [np.empty((stop - start, 0))]
        for grid in smap.index_grid:
            na, nb = grid.shape
            m = V[grid.reshape(-1), start:stop]         # (na*nb, batch)
            m = m.reshape(na, nb, stop - start)
            if na <= nb:
                gram = np.einsum("abs,cbs->sac", m, m.conj())
            else:
                gram = np.einsum("abs,acs->sbc", m.conj(), m)
            block_probs.append(np.linalg.eigvalsh(gram))
        probs = np.concatenate(block_probs, axis=1)
        for i in range(stop - start):
            out[start + i] = _entropy_from_probs(probs[i])
    return out


def overlaps(eigsys: Eigensystem, basis_state: int) -> np.ndarray:
    """|<alpha|E_n>|^2 for a computational basis word alpha."""
    if eigsys.vectors is None:
        raise ValueError("eigenvectors are required for overlaps")
    row = eigsys.sector.rank(basis_state)
    return np.abs(eigsys.vectors[row, :]) ** 2


def degenerate_flags(energies: np.ndarray) -> np.ndarray:
    """Mark eigenstates involved in gaps below the degeneracy tolerance."""
    flags = np.zeros(energies.shape[0], dtype=bool)
    close = np.diff(energies) < DEGENERACY_TOL
    flags[:-1] |= close
    flags[1:] |= close
    return flags


@dataclass(frozen=True)
class TowerPolicy:
    """Detection parameters; all values are reported alongside results.

    Strongly overlapping states seed the tower grid; since towers are by
    construction evenly spaced, weaker states join only when they sit on
    that grid, which separates faint edge towers from off-grid thermal
    states of comparable overlap.
    """

    strong_factor: float = 10.0   # grid seeds: overlap > factor * sector mean
    weak_factor: float = 5.0      # grid members: overlap > factor * mean
    merge_fraction: float = 0.25  # accepted distance to a grid point, in dE


@dataclass
class TowerReport:
    detected: bool
    indices: list[np.ndarray]        # eigenstate indices per tower
    energies: np.ndarray             # overlap-weighted tower centers, ascending
    tower_overlaps: np.ndarray       # summed overlap per tower
    spacing: float                   # mean adjacent spacing dE (rad/ns)
    spacing_residual: float          # max relative deviation from even spacing
    policy: TowerPolicy

    @property
    def count(self) -> int:
        return self.energies.shape[0]


def _gap_clusters(e_sel: np.ndarray, o_sel: np.ndarray):
    gaps = np.diff(e_sel)
    split = 0.5 * float(np.max(gaps))
    bounds = np.nonzero(gaps > split)[0]
    starts = np.concatenate([[0], bounds + 1])
    stops = np.concatenate([bounds + 1, [e_sel.shape[0]]])
    centers = []
    for a, b in zip(starts, stops):
        w = o_sel[a:b]
        centers.append(float(np.sum(e_sel[a:b] * w) / np.sum(w)))
    return np.array(centers)


def detect_towers(
    overlap: np.ndarray,
    energies: np.ndarray,
    policy: TowerPolicy = TowerPolicy(),
) -> TowerReport:
    """Locate the evenly spaced towers of high overlap with a given state.

    Fewer than 3 resolvable towers yields a detection-failed report
    rather than an exception.
    """
    overlap = np.asarray(overlap, dtype=np.float64)
    energies = np.asarray(energies, dtype=np.float64)
    mean = float(np.mean(overlap))

    def failed():
        return TowerReport(
            detected=False, indices=[], energies=np.empty(0),
            tower_overlaps=np.empty(0), spacing=np.nan,
            spacing_residual=np.nan, policy=policy,
        )

    strong = np.nonzero(overlap > policy.strong_factor * mean)[0]
    if strong.shape[0] < 3:
        return failed()
    centers = _gap_clusters(energies[strong], overlap[strong])
    if centers.shape[0] < 2:
        return failed()
    de0 = float(np.mean(np.diff(centers)))
    if de0 <= 0:
        return failed()
    anchor = centers[int(np.argmin(np.abs(centers - np.median(centers))))]

    weak = np.nonzero(overlap > policy.weak_factor * mean)[0]
    slot = np.rint((energies[weak] - anchor) / de0).astype(np.int64)
    on_grid = (
        np.abs(energies[weak] - anchor - slot * de0)
        <= policy.merge_fraction * de0
    )
    weak, slot = weak[on_grid], slot[on_grid]
    if weak.shape[0] == 0:
        return failed()

    slots = np.unique(slot)
    tower_idx, tower_e, tower_w = [], [], []
    for s in slots:
        members = weak[slot == s]
        w = overlap[members]
        tower_idx.append(members)
        tower_e.append(float(np.sum(energies[members] * w) / np.sum(w)))
        tower_w.append(float(np.sum(w)))
    tower_e = np.array(tower_e)
    tower_w = np.array(tower_w)
    if tower_e.shape[0] < 3:
        return failed()
    per_step = np.diff(tower_e) / np.diff(slots)
    de = float(np.mean(per_step))
    residual = float(np.max(np.abs(per_step - de)) / de) if de > 0 else np.nan
    return TowerReport(
        detected=True,
        indices=tower_idx,
        energies=tower_e,
        tower_overlaps=tower_w,
        spacing=de,
        spacing_residual=residual,
        policy=policy,
    )


def density_of_states(energies: np.ndarray, bins: int = 50):
    """Histogram of the spectrum: (bin centers, normalized density)."""
    hist, edges = np.histogram(energies, bins=bins, density=True)
    return 0.5 * (edges[:-1] + edges[1:]), hist
