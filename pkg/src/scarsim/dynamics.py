"""Quench evolution and time-dependent observables.

`evolve_krylov` propagates exp(-iHt)psi0 with adaptive Lanczos steps;
`evolve_dense` is the spectral-decomposition oracle for small sectors.
Observable helpers work either on whole trajectories or on single state
vectors (used by streaming consumers that do not retain states).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import CapacityError, IntegrationError
from .hamiltonian import SparseHamiltonian
from .hilbert import BasisSector, SubsystemMap, subsystem_maps
from .spectral import Eigensystem, diagonalize

DENSE_EVOLVE_LIMIT = 20_000
DEFAULT_TOL = 1e-9
DEFAULT_KRYLOV_DIM = 30


@dataclass
class Trajectory:
    times: np.ndarray                 # ns
    states: np.ndarray | None         # (n_times, dim) complex128 when retained
    psi0: np.ndarray
    sector: BasisSector
    info: dict = field(default_factory=dict)


def basis_vector(sector: BasisSector, word: int) -> np.ndarray:
    v = np.zeros(sector.dim, dtype=np.complex128)
    v[sector.rank(word)] = 1.0
    return v


def _basis_word_of(sector: BasisSector, psi0: np.ndarray) -> int:
    idx = int(np.argmax(np.abs(psi0)))
    if abs(abs(psi0[idx]) - 1.0) > 1e-12:
        raise ValueError("initial state is not a computational basis state")
    return int(sector.states[idx])


def _lanczos(H: SparseHamiltonian, psi: np.ndarray, m_max: int):
    """Hermitian Lanczos with full reorthogonalization (two CGS passes)."""
    dim = psi.shape[0]
    V = np.empty((dim, m_max), dtype=np.complex128, order="F")
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)  # beta[k] couples vector k to k+1
    nrm = np.linalg.norm(psi)
    V[:, 0] = psi / nrm
    breakdown = 1e-13 * max(H.norm_bound, 1.0)
    m = m_max
    n_matvec = 0
    for k in range(m_max):
        w = H.apply(V[:, k])
        n_matvec += 1
        a = np.vdot(V[:, k], w).real
        alpha[k] = a
        w -= a * V[:, k]
        if k > 0:
            w -= beta[k - 1] * V[:, k - 1]
        for _ in range(2):
            coef = V[:, : k + 1].conj().T @ w
            w -= V[:, : k + 1] @ coef
        b = np.linalg.norm(w)
        beta[k] = b
        if b < breakdown:
            m = k + 1
            break
        if k + 1 < m_max:
            V[:, k + 1] = w / b
    return V[:, :m], alpha[:m], beta[:m], m, n_matvec


class _KrylovStep:
    """exp(-i h T_m) e1 evaluated from one Lanczos subspace, any h."""

    def __init__(self, H, psi, m_max):
        self.V, alpha, beta, self.m, self.n_matvec = _lanczos(H, psi, m_max)
        self.beta_res = beta[self.m - 1] if self.m == m_max else 0.0
        if self.m == 1:
            self.theta = alpha[:1]
            self.Q = np.ones((1, 1))
        else:
            self.theta, self.Q = sla.eigh_tridiagonal(
                alpha[: self.m], beta[: self.m - 1]
            )
        self.q0 = self.Q[0, :]
        self.nrm = np.linalg.norm(psi)

    def coeffs(self, h: float) -> tuple[np.ndarray, float]:
        u = self.Q @ (np.exp(-1j * h * self.theta) * self.q0)
        err = abs(self.beta_res * u[-1]) * abs(h)
        return u, err

    def state(self, u: np.ndarray) -> np.ndarray:
        return self.V @ (self.nrm * u)


def evolve_krylov(
    H: SparseHamiltonian,
    psi0: np.ndarray,
    times: np.ndarray,
    tol: float = DEFAULT_TOL,
    m_max: int = DEFAULT_KRYLOV_DIM,
    keep_states: bool = True,
    callback=None,
) -> Trajectory:
    """Propagate psi0 to every time in ``times`` (ns, ascending, >= 0).

    Each restart carries a local error estimate below ``tol``; on failure
    the step is halved (sub-steps are not emitted).  Multiple sample
    times may be served from a single subspace when accuracy permits.
    """
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.shape[0] == 0:
        raise ValueError("times must be a non-empty 1-d array")
    if np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("times must be strictly ascending and start at >= 0")
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if psi0.shape != (H.dim,):
        raise ValueError(f"psi0 has shape {psi0.shape}, expected ({H.dim},)")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-8:
        raise ValueError("psi0 must be normalized")

    states = np.empty((times.shape[0], H.dim), dtype=np.complex128) if keep_states else None
    n_matvec = 0
    n_restarts = 0
    n_halvings = 0

    def emit(i, psi_t):
        if states is not None:
            states[i] = psi_t
        if callback is not None:
            callback(i, times[i], psi_t)

    t_cur = 0.0
    psi = psi0.copy()
    idx = 0
    while idx < times.shape[0]:
        if times[idx] <= t_cur + 1e-12:
            emit(idx, psi)
            idx += 1
            continue
        step = _KrylovStep(H, psi, m_max)
        n_matvec += step.n_matvec
        n_restarts += 1
        t_anchor = t_cur
        advanced = False
        while idx < times.shape[0]:
            h = times[idx] - t_anchor
            u, err = step.coeffs(h)
            if err > tol:
                break
            psi_t = step.state(u)
            emit(idx, psi_t)
            psi, t_cur = psi_t, float(times[idx])
            idx += 1
            advanced = True
        if advanced or idx >= times.shape[0]:
            continue
        # even the nearest target failed: internal half-steps
        h = (times[idx] - t_cur) / 2.0
        halved = 1
        while True:
            u, err = step.coeffs(h)
            if err <= tol:
                break
            h /= 2.0
            halved += 1
            if halved > 60:
                raise IntegrationError(
                    f"no admissible step at t={t_cur:.6g} ns: m_max={m_max}, "
                    f"tol={tol:g}, final trial step {h:.3g} ns had "
                    f"error estimate {err:.3g}"
                )
        psi = step.state(u)
        t_cur += h
        n_halvings += halved

    return Trajectory(
        times=times,
        states=states,
        psi0=psi0,
        sector=H.sector,
        info={
            "method": "krylov-lanczos",
            "tol": tol,
            "m_max": m_max,
            "n_matvec": n_matvec,
            "n_restarts": n_restarts,
            "n_halvings": n_halvings,
        },
    )


def evolve_dense(
    H: SparseHamiltonian,
    psi0: np.ndarray,
    times: np.ndarray,
    eigsys: Eigensystem | None = None,
    keep_states: bool = True,
) -> Trajectory:
    """Exact evolution through the eigen-decomposition (oracle path)."""
    if H.dim > DENSE_EVOLVE_LIMIT:
        raise CapacityError(
            f"dense evolution budget is {DENSE_EVOLVE_LIMIT}, got dim {H.dim}"
        )
    times = np.asarray(times, dtype=np.float64)
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if eigsys is None:
        eigsys = diagonalize(H, want_vectors=True)
    V = eigsys.vectors
    c = V.conj().T @ psi0
    phases = np.exp(-1j * np.outer(times, eigsys.energies))
    states = (phases * c[None, :]) @ V.conj().T if V.dtype == complex else (
        (phases * c[None, :]) @ V.T
    )
    states[times == 0.0] = psi0
    traj = Trajectory(
        times=times,
        states=states if keep_states else None,
        psi0=psi0,
        sector=H.sector,
        info={"method": "dense-spectral"},
    )
    return traj


# -- per-state observable helpers ---------------------------------------------


def occupation_matrix(sector: BasisSector) -> np.ndarray:
    """(dim, L) array of n_i per basis word."""
    states = sector.states
    return (
        (states[:, None] >> np.arange(sector.L)[None, :]) & 1
    ).astype(np.float64)


def state_populations(occ: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return (np.abs(psi) ** 2) @ occ


def site_populations(traj: Trajectory) -> np.ndarray:
    """n_i(t) table of shape (n_times, L)."""
    if traj.states is None:
        raise ValueError("trajectory did not retain states")
    occ = occupation_matrix(traj.sector)
    return (np.abs(traj.states) ** 2) @ occ


def imbalance(traj: Trajectory) -> np.ndarray:
    """I(t) = (1/L) sum_i <S_i^z(0)> <S_i^z(t)> for a basis-state quench."""
    word = _basis_word_of(traj.sector, traj.psi0)
    pops = site_populations(traj)
    return imbalance_from_populations(word, pops, traj.sector.L)


def imbalance_from_populations(word: int, pops: np.ndarray, L: int) -> np.ndarray:
    s0 = np.array([1.0 if (word >> i) & 1 else -1.0 for i in range(L)])
    return ((2.0 * pops - 1.0) @ s0) / L


def global_fidelity(traj: Trajectory) -> np.ndarray:
    if traj.states is None:
        raise ValueError("trajectory did not retain states")
    return np.abs(traj.states @ traj.psi0.conj()) ** 2


@dataclass
class DensityMatrix:
    sites: tuple[int, ...]
    matrix: np.ndarray  # (2^|A|, 2^|A|), Hermitian, unit trace

    def validate(self, tol: float = 1e-10) -> None:
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=tol):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > tol:
            raise ValueError("density matrix trace differs from 1")
        if np.min(np.linalg.eigvalsh(m)) < -tol:
            raise ValueError("density matrix has a negative eigenvalue")


def reduced_density_matrix(
    state: np.ndarray,
    smap: SubsystemMap,
) -> DensityMatrix:
    """rho_A = Tr_B |psi><psi|, block-diagonal in subsystem photon number."""
    nA = len(smap.sites)
    rho = np.zeros((1 << nA, 1 << nA), dtype=np.complex128)
    for words, grid in zip(smap.a_words, smap.index_grid):
        m = state[grid]                      # (n_a, n_b)
        block = m @ m.conj().T
        rho[np.ix_(words, words)] = block
    return DensityMatrix(sites=smap.sites, matrix=rho)


def subsystem_spectrum(state: np.ndarray, smap: SubsystemMap) -> np.ndarray:
    """Eigenvalues of rho_A without embedding into the 2^|A| matrix."""
    probs = []
    for grid in smap.index_grid:
        m = state[grid]
        na, nb = grid.shape
        gram = m @ m.conj().T if na <= nb else (m.conj().T @ m)
        probs.append(np.linalg.eigvalsh(gram))
    return np.concatenate(probs)


def entropy_vn(rho: "DensityMatrix | np.ndarray") -> float:
    """Von Neumann entropy, natural log; eigenvalues below 1e-14 count as 0."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    p = np.linalg.eigvalsh(m)
    p = p[p > 1e-14]
    return float(-np.sum(p * np.log(p)))


def entanglement_entropy(state: np.ndarray, smap: SubsystemMap) -> float:
    p = subsystem_spectrum(state, smap)
    p = p[p > 1e-14]
    return float(-np.sum(p * np.log(p)))


def subsystem_fidelity(rho: DensityMatrix, phi: "int | np.ndarray") -> float:
    """<phi|rho_A|phi> for a pure subsystem state (local word or vector)."""
    if isinstance(phi, (int, np.integer)):
        return float(rho.matrix[int(phi), int(phi)].real)
    phi = np.asarray(phi, dtype=np.complex128)
    return float(np.vdot(phi, rho.matrix @ phi).real)


def local_word(word: int, sites) -> int:
    """Restriction of a full occupation word to the given (ordered) sites."""
    out = 0
    for j, s in enumerate(sites):
        if (word >> s) & 1:
            out |= 1 << j
    return out


def energy_drift(H: SparseHamiltonian, traj: Trajectory) -> float:
    """max_t |E(t) - E(0)| / max(|E(0)|, norm bound) over retained states."""
    if traj.states is None:
        raise ValueError("trajectory did not retain states")
    e = np.array([np.vdot(s, H.apply(s)).real for s in traj.states])
    scale = max(abs(e[0]), H.norm_bound)
    return float(np.max(np.abs(e - e[0])) / scale)


def find_first_revival(
    times: np.ndarray,
    series: np.ndarray,
    drop: float = 0.5,
    prominence: float = 0.5,
) -> tuple[float, float] | None:
    """Time and height of the first prominent maximum after the initial decay.

    The series must first fall below ``drop`` relative to its t=0 value;
    among the local maxima that follow, the first one reaching at least
    ``prominence`` times the post-decay global maximum is reported, which
    skips small wiggles superimposed on the decay.  Returns None when the
    series never decays or never turns back up.
    """
    ref = series[0]
    below = np.nonzero(series < drop * ref)[0]
    if below.shape[0] == 0:
        return None
    i0 = int(below[0])
    tail = series[i0:]
    floor = prominence * float(np.max(tail))
    for i in range(i0 + 1, series.shape[0] - 1):
        if (
            series[i] >= series[i - 1]
            and series[i] > series[i + 1]
            and series[i] >= floor
        ):
            return float(times[i]), float(series[i])
    return None


@dataclass
class QuenchTable:
    """Streaming per-sample observables of a basis-state quench."""

    times: np.ndarray
    populations: np.ndarray       # (n_times, L)
    imbalance: np.ndarray
    fidelity: np.ndarray
    subsystem_fid: np.ndarray | None
    entropy: np.ndarray | None
    info: dict


def quench_observables(
    H: SparseHamiltonian,
    psi0_word: int,
    times: np.ndarray,
    subsystem: "tuple[int, ...] | None" = (0, 1, 2, 3),
    tol: float = DEFAULT_TOL,
    m_max: int = DEFAULT_KRYLOV_DIM,
) -> QuenchTable:
    """Evolve a basis state and record observables without retaining states."""
    sector = H.sector
    psi0 = basis_vector(sector, psi0_word)
    occ = occupation_matrix(sector)
    n_t = np.asarray(times).shape[0]
    pops = np.empty((n_t, sector.L))
    fid = np.empty(n_t)
    smap = None
    fa = sa = None
    phi_local = None
    if subsystem is not None:
        smap = subsystem_maps(sector, subsystem)
        phi_local = local_word(psi0_word, subsystem)
        fa = np.empty(n_t)
        sa = np.empty(n_t)

    def on_sample(i, t, psi):
        pops[i] = state_populations(occ, psi)
        fid[i] = abs(np.vdot(psi0, psi)) ** 2
        if smap is not None:
            rho = reduced_density_matrix(psi, smap)
            fa[i] = subsystem_fidelity(rho, phi_local)
            p = subsystem_spectrum(psi, smap)
            p = p[p > 1e-14]
            sa[i] = -np.sum(p * np.log(p))

    traj = evolve_krylov(
        H, psi0, times, tol=tol, m_max=m_max, keep_states=False, callback=on_sample
    )
    return QuenchTable(
        times=traj.times,
        populations=pops,
        imbalance=imbalance_from_populations(psi0_word, pops, sector.L),
        fidelity=fid,
        subsystem_fid=fa,
        entropy=sa,
        info=traj.info,
    )
