"""Scar diagnostics: Fourier amplitudes, product-state scans, hypercube
isolation metrics, fidelity-density scaling and imbalance decompositions."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError
from .hamiltonian import SparseHamiltonian, assemble
from .hilbert import BasisSector, enumerate_sector
from .model import CouplingGraph
from .spectral import Eigensystem
from . import dynamics

DEFAULT_PAD_NS = 4000.0


# -- Fourier side ------------------------------------------------------------


@dataclass(frozen=True)
class FourierSpectrum:
    """Single-sided amplitude of a mean-subtracted, zero-padded series.

    Normalization is 2/n_raw so that a pure cosine of unit amplitude has
    peak ~1; the DC bin is excluded.  Frequency resolution equals the
    inverse padded duration.
    """

    freqs_MHz: np.ndarray
    amplitude: np.ndarray
    n_raw: int
    n_pad: int
    pad_ns: float
    source: str = ""

    @property
    def published_scale(self) -> float:
        """Conversion from this cosine-amplitude convention to the raw
        |FFT|/n_padded scale that published amplitude plots typically use
        (no single-sided factor, padded-length normalization)."""
        return self.n_raw / (2.0 * self.n_pad)


def fourier_amplitude(
    series: np.ndarray,
    times: np.ndarray,
    pad_to_ns: float = DEFAULT_PAD_NS,
    source: str = "",
) -> FourierSpectrum:
    series = np.asarray(series, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if series.shape != times.shape or series.ndim != 1:
        raise ValueError("series and times must be matching 1-d arrays")
    dt = np.diff(times)
    if dt.shape[0] == 0 or np.max(np.abs(dt - dt[0])) > 1e-9 * dt[0]:
        raise ValueError("time grid must be uniform")
    duration = times[-1] - times[0]
    if pad_to_ns < duration:
        raise ValueError(f"pad_to_ns {pad_to_ns} shorter than series ({duration} ns)")
    n_raw = series.shape[0]
    n_pad = int(round(pad_to_ns / dt[0]))
    x = series - np.mean(series)
    amp = 2.0 * np.abs(np.fft.rfft(x, n=n_pad)) / n_raw
    if n_pad % 2 == 0:
        amp[-1] /= 2.0  # Nyquist bin has no mirror partner
    freqs = np.fft.rfftfreq(n_pad, d=dt[0]) * 1e3  # cycles/ns -> MHz
    return FourierSpectrum(
        freqs_MHz=freqs[1:], amplitude=amp[1:], n_raw=n_raw, n_pad=n_pad,
        pad_ns=pad_to_ns, source=source,
    )


def peak_at(spec: FourierSpectrum, f1_MHz: float, halfwidth_MHz: float) -> float:
    """Maximum amplitude within [f1 - halfwidth, f1 + halfwidth]."""
    lo, hi = f1_MHz - halfwidth_MHz, f1_MHz + halfwidth_MHz
    if hi < spec.freqs_MHz[0] or lo > spec.freqs_MHz[-1]:
        raise ValueError(f"window [{lo}, {hi}] MHz outside the spectrum range")
    sel = (spec.freqs_MHz >= lo) & (spec.freqs_MHz <= hi)
    return float(np.max(spec.amplitude[sel]))


def dominant_peak(
    spec: FourierSpectrum,
    band_MHz: tuple[float, float] | None = None,
) -> tuple[float, float]:
    """(frequency, amplitude) of the largest bin, optionally band-limited."""
    f, a = spec.freqs_MHz, spec.amplitude
    if band_MHz is not None:
        sel = (f >= band_MHz[0]) & (f <= band_MHz[1])
        if not np.any(sel):
            raise ValueError(f"band {band_MHz} MHz contains no bins")
        f, a = f[sel], a[sel]
    k = int(np.argmax(a))
    return float(f[k]), float(a[k])


def revival_band(f_a_MHz: float) -> tuple[float, float]:
    """Search band for the collective revival line, anchored at the bare
    dimer splitting 2|f_a| (interactions shift the line upward)."""
    base = 2.0 * abs(f_a_MHz)
    return 0.8 * base, 1.6 * base


# -- collective dimer states ---------------------------------------------------


def _dimer_word(dimers, choices) -> int:
    word = 0
    for (a, b), c in zip(dimers, choices):
        word |= 1 << (a if c else b)
    return word


def pi_states(dimers) -> tuple[int, int]:
    """Alternating one-photon-per-dimer pair (chain scars)."""
    n = len(dimers)
    pi = _dimer_word(dimers, [k % 2 == 0 for k in range(n)])
    return pi, _dimer_word(dimers, [k % 2 == 1 for k in range(n)])


def theta_states(dimers) -> tuple[int, int]:
    """Uniform one-photon-per-dimer pair (comb scars)."""
    n = len(dimers)
    return _dimer_word(dimers, [True] * n), _dimer_word(dimers, [False] * n)


def named_state(name: str, graph: CouplingGraph) -> int:
    if not graph.dimers:
        raise ValueError("graph has no dimer partition")
    pi, pip = pi_states(graph.dimers)
    th, thp = theta_states(graph.dimers)
    table = {"pi": pi, "pi_prime": pip, "theta": th, "theta_prime": thp}
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown collective state {name!r}") from None


# -- hypercube metrics ---------------------------------------------------------


def hypercube_vertices(sector: BasisSector, dimers) -> np.ndarray:
    """All 2^N words holding exactly one photon per dimer, ascending."""
    n = len(dimers)
    if sector.N != n or sector.L != 2 * n:
        raise ValueError(
            f"hypercube needs half filling with N = L/2 = {n}, "
            f"got L={sector.L}, N={sector.N}"
        )
    words = np.fromiter(
        (_dimer_word(dimers, [(cfg >> k) & 1 for k in range(n)])
         for cfg in range(1 << n)),
        dtype=np.int64,
        count=1 << n,
    )
    words.sort()
    return words


@dataclass
class HypercubeReport:
    n_dimers: int
    n_vertices: int
    delta: float                       # summed intra-subspace |H_uv| (rad/ns)
    gamma_by_kind: dict[str, float]    # leakage per edge category (rad/ns)
    ratio: float

    @property
    def gamma(self) -> float:
        return sum(self.gamma_by_kind.values())


def hypercube_report(H: SparseHamiltonian, dimers) -> HypercubeReport:
    """Summed couplings inside the one-photon-per-dimer subspace (delta)
    and from it to the rest of the sector (gamma, split by edge kind)."""
    words = hypercube_vertices(H.sector, dimers)
    vset = set(int(w) for w in words)
    kinds = H.edge_kinds or ("custom",) * H.masks.shape[0]
    delta = 0.0
    gamma: dict[str, float] = {}
    for w in vset:
        for m, wt, kind in zip(H.masks, H.weights, kinds):
            m = int(m)
            x = w & m
            if x != 0 and x != m:
                t = w ^ m
                if t in vset:
                    if t > w:
                        delta += abs(float(wt))
                else:
                    gamma[kind] = gamma.get(kind, 0.0) + abs(float(wt))
    g = sum(gamma.values())
    return HypercubeReport(
        n_dimers=len(dimers),
        n_vertices=len(vset),
        delta=delta,
        gamma_by_kind=gamma,
        ratio=delta / g if g > 0 else np.inf,
    )


# -- scaling ------------------------------------------------------------------


def fidelity_density(F_t1: float, L: int) -> float:
    """(1/L) ln F at the first revival; F = 0 maps to -inf."""
    if F_t1 < 0 or F_t1 > 1:
        raise ValueError(f"fidelity {F_t1} outside [0, 1]")
    if F_t1 == 0:
        return -np.inf
    return float(np.log(F_t1) / L)


# -- imbalance decompositions ---------------------------------------------------


SPECTRAL_ORACLE_LIMIT = 2000


def imbalance_spectral_oracle(
    eigsys: Eigensystem,
    alpha: int,
    times: np.ndarray,
) -> np.ndarray:
    """I(t) for a basis-state quench, evaluated from the eigen-decomposition.

    Expands <S_i^z(t)> over eigenstate pairs (n, m) with phases
    exp(-i (E_m - E_n) t); cost is O(dim^2) per time point.
    """
    if eigsys.vectors is None:
        raise ValueError("eigenvectors required")
    if eigsys.dim > SPECTRAL_ORACLE_LIMIT:
        raise CapacityError(
            f"spectral imbalance oracle budget is {SPECTRAL_ORACLE_LIMIT}, "
            f"got dim {eigsys.dim}"
        )
    sector = eigsys.sector
    V = eigsys.vectors
    c = V[sector.rank(alpha), :]  # <alpha|E_n>, real symmetric eigenbasis
    occ = dynamics.occupation_matrix(sector)
    s_beta = 2.0 * occ - 1.0                       # (dim, L) signs
    s_alpha = s_beta[sector.rank(alpha)]
    times = np.asarray(times, dtype=np.float64)
    out = np.empty(times.shape[0])
    for k, t in enumerate(times):
        w = c * np.exp(-1j * eigsys.energies * t)  # c_{alpha n} e^{-i E_n t}
        psi = V @ w                                # amplitudes over basis words
        sz = (np.abs(psi) ** 2) @ s_beta
        out[k] = float(np.dot(s_alpha, sz) / sector.L)
    return out


def imbalance_from_towers(
    a2,
    dE: float,
    I0: float,
    times: np.ndarray,
    a0: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Cosine-series imbalance from tower overlaps.

    ``a2`` lists the squared overlaps of the positive-energy towers in
    decreasing order (mirrored to negative energies); ``a0`` optionally
    adds a central tower for odd tower counts.  Returns (full, leading):
    the full double sum over tower pairs (constant diagonal terms folded
    into I0) and the single-cosine reduction at the tower spacing.
    """
    a2 = np.asarray(a2, dtype=np.float64)
    if np.any(np.diff(a2) > 0):
        raise ValueError("tower overlaps must be ordered decreasing")
    slots = list(a2[::-1])
    if a0 is not None:
        slots += [float(a0)]
    slots += list(a2)
    o = np.array(slots)
    m = o.shape[0]
    j = np.arange(m) - (m - 1) / 2.0
    times = np.asarray(times, dtype=np.float64)
    phase = np.exp(-1j * np.outer(times, j * dE))
    s = phase @ o
    full = I0 + (np.abs(s) ** 2 - np.sum(o**2))
    c1 = 2.0 * float(np.sum(o[:-1] * o[1:]))
    leading = I0 + c1 * np.cos(dE * times)
    return full, leading


# -- product-state scans --------------------------------------------------------


@dataclass(frozen=True)
class ScanRecord:
    word: int
    label: str              # collective-state name or "random"
    g2: float
    is_scar_candidate: bool


@dataclass
class ScanResult:
    records: list[ScanRecord]
    f1_MHz: float
    halfwidth_MHz: float
    threshold_factor: float
    seed: int
    info: dict = field(default_factory=dict)


_WORKER_H: SparseHamiltonian | None = None


def _scan_init(graph, N, mode):
    global _WORKER_H
    _WORKER_H = assemble(graph, enumerate_sector(graph.L, N), mode)


def _scan_run(args):
    word, times, tol, m_max = args
    table = dynamics.quench_observables(
        _WORKER_H, word, times, subsystem=None, tol=tol, m_max=m_max
    )
    return table.imbalance


def scan_states(
    H: SparseHamiltonian,
    graph: CouplingGraph,
    times: np.ndarray,
    include: tuple[str, ...] = ("pi", "pi_prime"),
    count: int = 120,
    seed: int = 0,
    tol: float = dynamics.DEFAULT_TOL,
    m_max: int = dynamics.DEFAULT_KRYLOV_DIM,
    pad_to_ns: float = DEFAULT_PAD_NS,
    halfwidth_MHz: float = 2.0,
    threshold_factor: float = 10.0,
    workers: int = 1,
) -> ScanResult:
    """Quench the named collective states plus seeded random basis states,
    ranking them by squared Fourier weight at the collective revival line.

    The reference frequency f1 is detected from the first included state
    (band-limited around the bare dimer splitting).  Random words are
    drawn without replacement and exclude the included states.  Results
    are deterministic for a fixed seed, independent of worker count.
    """
    sector = H.sector
    named = [(name, named_state(name, graph)) for name in include]
    rng = np.random.Generator(np.random.PCG64(seed))
    exclude = {sector.rank(w) for _, w in named}
    picks = []
    if count > 0:
        draw = rng.choice(sector.dim, size=min(sector.dim, count + len(exclude) + 8),
                          replace=False)
        picks = [int(i) for i in draw if int(i) not in exclude][:count]
        if len(picks) < count:
            raise ValueError(f"sector too small for {count} distinct random states")
    jobs = [(name, w) for name, w in named]
    jobs += [("random", int(sector.states[i])) for i in picks]

    args = [(w, times, tol, m_max) for _, w in jobs]
    if workers > 1:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_scan_init,
            initargs=(graph, sector.N, H.mode),
        ) as pool:
            curves = list(pool.map(_scan_run, args, chunksize=1))
    else:
        curves = []
        for a in args:
            table = dynamics.quench_observables(
                H, a[0], times, subsystem=None, tol=tol, m_max=m_max
            )
            curves.append(table.imbalance)

    intra = [abs(w) for w, k in zip(
        (e.f_MHz for e in graph.edges), (e.kind for e in graph.edges)) if k == "intra"]
    band = revival_band(max(intra)) if intra else (5.0, None)
    ref_spec = fourier_amplitude(curves[0], times, pad_to_ns, source=jobs[0][0])
    if band[1] is None:
        sel = ref_spec.freqs_MHz >= band[0]
        k = int(np.argmax(ref_spec.amplitude[sel]))
        f1 = float(ref_spec.freqs_MHz[sel][k])
    else:
        f1, _ = dominant_peak(ref_spec, band)

    g2 = []
    for (label, word), curve in zip(jobs, curves):
        spec = fourier_amplitude(curve, times, pad_to_ns, source=label)
        g2.append(peak_at(spec, f1, halfwidth_MHz) ** 2)
    g2 = np.array(g2)
    cut = threshold_factor * float(np.median(g2))
    records = [
        ScanRecord(word=w, label=label, g2=float(g), is_scar_candidate=bool(g > cut))
        for (label, w), g in zip(jobs, g2)
    ]
    return ScanResult(
        records=records,
        f1_MHz=f1,
        halfwidth_MHz=halfwidth_MHz,
        threshold_factor=threshold_factor,
        seed=seed,
        info={"count": count, "include": list(include), "pad_to_ns": pad_to_ns},
    )


# -- coupling-ratio sweep --------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    ratio: float
    f1_MHz: float
    g: float


def ratio_sweep(
    build_graph,
    ratios,
    times: np.ndarray,
    state_name: str = "pi",
    tol: float = dynamics.DEFAULT_TOL,
    pad_to_ns: float = DEFAULT_PAD_NS,
    halfwidth_MHz: float = 2.0,
) -> list[SweepPoint]:
    """Fourier weight of the collective revival line vs coupling ratio.

    ``build_graph(ratio)`` must return the coupling graph for one sweep
    point; the revival line is re-detected per point since it tracks the
    intra-dimer coupling.
    """
    out = []
    for ratio in ratios:
        graph = build_graph(ratio)
        sector = enumerate_sector(graph.L, graph.L // 2)
        H = assemble(graph, sector)
        word = named_state(state_name, graph)
        table = dynamics.quench_observables(H, word, times, subsystem=None, tol=tol)
        spec = fourier_amplitude(table.imbalance, times, pad_to_ns)
        intra = max(abs(e.f_MHz) for e in graph.edges if e.kind == "intra")
        f1, _ = dominant_peak(spec, revival_band(intra))
        out.append(SweepPoint(ratio=float(ratio), f1_MHz=f1,
                              g=peak_at(spec, f1, halfwidth_MHz)))
    return out
