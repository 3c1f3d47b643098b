"""Coupling-graph builders for dimerized XY chains, combs and circuit reductions.

All couplings and on-site terms are stored as ordinary frequencies
f = J/2pi in MHz (negative = attractive, matching the device convention);
the dynamics layer converts to angular frequencies in rad/ns.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, DispersiveRegimeError

# PRNG used for randomized couplings; recorded in run manifests.
PRNG_ALGORITHM = "numpy.random.PCG64"


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    f_MHz: float
    kind: str = "custom"  # intra | inter | cross | nnn | custom

    def key(self) -> tuple[int, int]:
        return (self.i, self.j) if self.i < self.j else (self.j, self.i)


@dataclass(frozen=True)
class CouplingGraph:
    """Weighted hopping graph with optional dimer partition and grid embedding."""

    L: int
    edges: tuple[Edge, ...]
    onsite: tuple[float, ...]
    dimers: tuple[tuple[int, int], ...] = ()
    embedding: tuple[tuple[int, int], ...] | None = None
    kind: str = "custom"  # chain | comb | custom
    boundary: str = "open"

    def __post_init__(self):
        seen = set()
        for e in self.edges:
            if e.i == e.j:
                raise ValueError(f"self-edge on site {e.i}")
            if not (0 <= e.i < self.L and 0 <= e.j < self.L):
                raise ValueError(f"edge ({e.i},{e.j}) outside 0..{self.L - 1}")
            k = e.key()
            if k in seen:
                raise ValueError(f"duplicate edge {k}")
            seen.add(k)
        if len(self.onsite) != self.L:
            raise ValueError("onsite list must have one entry per site")
        if self.dimers:
            covered = [s for pair in self.dimers for s in pair]
            if sorted(covered) != list(range(self.L)):
                raise ValueError("dimer partition must cover all sites exactly once")

    def edge_weights(self) -> dict[tuple[int, int], float]:
        return {e.key(): e.f_MHz for e in self.edges}

    def with_edges(self, extra: Iterable[Edge]) -> "CouplingGraph":
        return replace(self, edges=self.edges + tuple(extra))


def build_chain(L: int, boundary: str, f_a: float, f_e: float) -> CouplingGraph:
    """Dimerized open/periodic chain: intra coupling on bonds (2k, 2k+1)."""
    if L % 2 or L < 2:
        raise ValueError(f"chain length must be even and >= 2, got {L}")
    if boundary not in ("open", "periodic"):
        raise ValueError(f"boundary must be open or periodic, got {boundary!r}")
    edges = []
    for k in range(L // 2):
        edges.append(Edge(2 * k, 2 * k + 1, f_a, "intra"))
    for k in range(L // 2 - 1):
        edges.append(Edge(2 * k + 1, 2 * k + 2, f_e, "inter"))
    if boundary == "periodic":
        edges.append(Edge(L - 1, 0, f_e, "inter"))
    dimers = tuple((2 * k, 2 * k + 1) for k in range(L // 2))
    return CouplingGraph(
        L=L,
        edges=tuple(edges),
        onsite=(0.0,) * L,
        dimers=dimers,
        kind="chain",
        boundary=boundary,
    )


def build_comb(n_dimers: int, f_a: float, f_e: float) -> CouplingGraph:
    """Backbone of n_dimers sites, each decorated with a single-site tooth.

    Site 2k is the k-th backbone site, site 2k+1 its tooth; each
    (backbone, tooth) pair is a dimer with intra coupling f_a, backbone
    neighbors couple with f_e.
    """
    if n_dimers < 2:
        raise ValueError(f"comb needs at least 2 dimers, got {n_dimers}")
    L = 2 * n_dimers
    edges = [Edge(2 * k, 2 * k + 1, f_a, "intra") for k in range(n_dimers)]
    edges += [Edge(2 * k, 2 * k + 2, f_e, "inter") for k in range(n_dimers - 1)]
    dimers = tuple((2 * k, 2 * k + 1) for k in range(n_dimers))
    return CouplingGraph(
        L=L, edges=tuple(edges), onsite=(0.0,) * L, dimers=dimers, kind="comb"
    )


def snake_grid_embedding(L: int, rows: int, cols: int) -> tuple[tuple[int, int], ...]:
    """Boustrophedon placement: consecutive sites are always grid-adjacent."""
    if L > rows * cols:
        raise CapacityError(f"{L} sites do not fit a {rows}x{cols} grid")
    coords = []
    for k in range(L):
        r, c = divmod(k, cols)
        if r % 2:
            c = cols - 1 - c
        coords.append((r, c))
    return tuple(coords)


def with_embedding(graph: CouplingGraph, rows: int, cols: int) -> CouplingGraph:
    return replace(graph, embedding=snake_grid_embedding(graph.L, rows, cols))


def add_cross_couplings(
    graph: CouplingGraph,
    f_range: tuple[float, float],
    seed: int,
) -> CouplingGraph:
    """Add an edge on every diagonal grid pair, uniform in [f_lo, f_hi].

    Diagonal means grid distance sqrt(2) in the embedding.  Pairs are
    visited in sorted (i, j) order and strengths drawn sequentially from
    a PCG64 generator, so the result is deterministic for a fixed seed.
    Existing edges are left untouched.
    """
    if graph.embedding is None:
        raise ValueError("graph has no grid embedding; cannot place cross couplings")
    f_lo, f_hi = f_range
    if f_lo > f_hi:
        raise ValueError(f"empty coupling range [{f_lo}, {f_hi}]")
    existing = set(e.key() for e in graph.edges)
    rng = np.random.Generator(np.random.PCG64(seed))
    extra = []
    emb = graph.embedding
    for i in range(graph.L):
        for j in range(i + 1, graph.L):
            dr = abs(emb[i][0] - emb[j][0])
            dc = abs(emb[i][1] - emb[j][1])
            if dr == 1 and dc == 1 and (i, j) not in existing:
                extra.append(Edge(i, j, float(rng.uniform(f_lo, f_hi)), "cross"))
    return graph.with_edges(extra)


def add_nnn_couplings(graph: CouplingGraph, f_nn: float) -> CouplingGraph:
    """Couple chain sites three bonds apart (i, i+3) with strength f_nn."""
    if graph.kind != "chain":
        raise ValueError("next-next-nearest couplings are defined for chains only")
    if graph.boundary == "periodic":
        extra = [Edge(i, (i + 3) % graph.L, f_nn, "nnn") for i in range(graph.L)]
    else:
        extra = [Edge(i, i + 3, f_nn, "nnn") for i in range(graph.L - 3)]
    return graph.with_edges(extra)


def set_onsite(graph: CouplingGraph, pattern: str, value: float | Sequence[float] = 0.0
               ) -> CouplingGraph:
    """Assign on-site frequencies.

    Patterns: ``uniform(f)``, ``end_impurity(f)`` (last two sites),
    ``staircase(f_step)`` (constant within each dimer, f_step * dimer
    number counted from 1), or ``explicit`` with a full-length list.
    """
    L = graph.L
    if pattern == "uniform":
        onsite = (float(value),) * L
    elif pattern == "end_impurity":
        onsite = (0.0,) * (L - 2) + (float(value), float(value))
    elif pattern == "staircase":
        onsite = tuple(float(value) * (1 + k // 2) for k in range(L))
    elif pattern == "explicit":
        vals = tuple(float(v) for v in value)
        if len(vals) != L:
            raise ValueError(f"explicit onsite list has {len(vals)} entries, need {L}")
        onsite = vals
    else:
        raise ValueError(f"unknown onsite pattern {pattern!r}")
    return replace(graph, onsite=onsite)


# -- circuit-level reduction -------------------------------------------------


@dataclass(frozen=True)
class Coupler:
    """One bus coupler bridging two qubits (frequencies GHz, couplings MHz)."""

    qubit_a: int
    qubit_b: int
    omega_GHz: float
    g_ac_MHz: float
    g_bc_MHz: float


@dataclass(frozen=True)
class CircuitParams:
    """Bare circuit parameters prior to adiabatic coupler elimination."""

    qubit_freqs_GHz: tuple[float, ...]
    couplers: tuple[Coupler, ...]
    direct_MHz: dict[tuple[int, int], float] = field(default_factory=dict)

    @property
    def n_qubits(self) -> int:
        return len(self.qubit_freqs_GHz)


def effective_from_circuit(params: CircuitParams) -> CouplingGraph:
    """Dispersive reduction of qubit-coupler-qubit chains to an XY graph.

    Each coupler mediates J_ab = g_ab + g_ac*g_bc*(1/D_ac + 1/D_bc) with
    detunings D_xc = omega_x - omega_c (converted to MHz), and dresses the
    qubit frequencies by sum_c g_xc^2 / D_xc.  Requires |D| > |g| for
    every qubit-coupler pair.
    """
    n = params.n_qubits
    w_MHz = [f * 1e3 for f in params.qubit_freqs_GHz]
    coupling: dict[tuple[int, int], float] = {}
    for key, g in params.direct_MHz.items():
        i, j = min(key), max(key)
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"bad direct-coupling pair {key}")
        coupling[(i, j)] = coupling.get((i, j), 0.0) + float(g)
    onsite = list(w_MHz)
    for c in params.couplers:
        a, b = c.qubit_a, c.qubit_b
        if not (0 <= a < n and 0 <= b < n) or a == b:
            raise ValueError(f"coupler bridges invalid pair ({a}, {b})")
        wc = c.omega_GHz * 1e3
        d_a = w_MHz[a] - wc
        d_b = w_MHz[b] - wc
        for q, d, g in ((a, d_a, c.g_ac_MHz), (b, d_b, c.g_bc_MHz)):
            if abs(d) <= abs(g):
                raise DispersiveRegimeError(
                    f"qubit {q} vs coupler at {c.omega_GHz} GHz: "
                    f"|detuning| {abs(d):.3f} MHz <= |g| {abs(g):.3f} MHz"
                )
        key = (min(a, b), max(a, b))
        coupling[key] = coupling.get(key, 0.0) + c.g_ac_MHz * c.g_bc_MHz * (
            1.0 / d_a + 1.0 / d_b
        )
        onsite[a] += c.g_ac_MHz**2 / d_a
        onsite[b] += c.g_bc_MHz**2 / d_b
    edges = tuple(
        Edge(i, j, f, "custom") for (i, j), f in sorted(coupling.items())
    )
    return CouplingGraph(
        L=n, edges=edges, onsite=tuple(onsite), kind="custom"
    )


# -- CSV interfaces ----------------------------------------------------------


def _strip_label(label: str) -> int:
    """Q-prefixed 1-indexed device labels -> 0-indexed site numbers."""
    s = label.strip()
    if s and s[0] in "Qq":
        s = s[1:]
    return int(s) - 1


def load_device_csv(
    qubit_path,
    coupler_path,
    frequency_column: str = "omega_idle_GHz",
    interaction_frequency_GHz: float | None = None,
) -> CircuitParams:
    """Read qubit/coupler tables into :class:`CircuitParams`.

    Qubit columns: qubit_label, omega0_GHz, omega_idle_GHz, e_sq_pct,
    T1_us, T2star_us.  Coupler columns: coupler_label, qubit_a, qubit_b,
    omega_c_GHz, g_ac_MHz, g_bc_MHz, g_ab_MHz.  If
    ``interaction_frequency_GHz`` is given, it overrides every qubit
    frequency (all qubits biased to a common interaction point).
    """
    freqs: dict[int, float] = {}
    with open(qubit_path, newline="") as fh:
        for row in csv.DictReader(fh):
            q = _strip_label(row["qubit_label"])
            freqs[q] = float(row[frequency_column])
    n = max(freqs) + 1
    if sorted(freqs) != list(range(n)):
        raise ValueError("qubit CSV must cover labels Q1..Qn without gaps")
    if interaction_frequency_GHz is not None:
        freqs = {q: float(interaction_frequency_GHz) for q in freqs}

    couplers = []
    direct: dict[tuple[int, int], float] = {}
    with open(coupler_path, newline="") as fh:
        for row in csv.DictReader(fh):
            a = _strip_label(row["qubit_a"])
            b = _strip_label(row["qubit_b"])
            couplers.append(
                Coupler(
                    qubit_a=a,
                    qubit_b=b,
                    omega_GHz=float(row["omega_c_GHz"]),
                    g_ac_MHz=float(row["g_ac_MHz"]),
                    g_bc_MHz=float(row["g_bc_MHz"]),
                )
            )
            g_ab = float(row.get("g_ab_MHz") or 0.0)
            if g_ab:
                key = (min(a, b), max(a, b))
                direct[key] = direct.get(key, 0.0) + g_ab
    return CircuitParams(
        qubit_freqs_GHz=tuple(freqs[q] for q in range(n)),
        couplers=tuple(couplers),
        direct_MHz=direct,
    )


def load_edge_csv(path, kind: str = "cross") -> tuple[Edge, ...]:
    """Explicit edge list: columns i, j, f_MHz with 0-indexed sites."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(Edge(int(row["i"]), int(row["j"]), float(row["f_MHz"]), kind))
    return tuple(out)


def write_edge_csv(path, edges: Iterable[Edge]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "f_MHz"])
        for e in edges:
            w.writerow([e.i, e.j, f"{e.f_MHz:.17g}"])
