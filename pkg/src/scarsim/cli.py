"""Batch front door: run commands from a config file, emit CSV/JSON artifacts.

Commands: spectrum, evolve, scan, sweep, hypercube, sw.  Every run writes
``manifest.json`` (also on failure, with the error cause); CSV bodies are
deterministic for a fixed config and seed, so reruns are byte-identical.

Exit codes: 0 ok, 2 config error, 3 capacity error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import struct
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, dynamics, hamiltonian, hilbert, model, spectral
from .config import RunConfig, build_graph, load_config
from .errors import CapacityError, ConfigError, IntegrationError
from .model import PRNG_ALGORITHM

FMT = "{:.17g}"  # lossless float round-trip


def _fmt(x) -> str:
    return FMT.format(float(x))


class Manifest:
    def __init__(self, command: str, cfg_raw: dict, seed: int):
        self.data = {
            "command": command,
            "tool": "scarsim",
            "version": __version__,
            "config": cfg_raw,
            "seed": seed,
            "prng_algorithm": PRNG_ALGORITHM,
            "stages_s": {},
            "tolerances": {},
            "results": {},
            "error": None,
        }
        self._t0 = time.time()
        self._stage_t = self._t0

    def stage(self, name: str) -> None:
        now = time.time()
        self.data["stages_s"][name] = round(now - self._stage_t, 3)
        self._stage_t = now

    def write(self, out_dir: Path) -> None:
        self.data["wall_time_s"] = round(time.time() - self._t0, 3)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "manifest.json", "w") as fh:
            json.dump(self.data, fh, indent=2, default=str)
            fh.write("\n")


def _sector_for(cfg: RunConfig) -> hilbert.BasisSector:
    n = cfg.photons if cfg.photons is not None else cfg.L // 2
    return hilbert.enumerate_sector(cfg.L, n)


def _resolve_states(cfg: RunConfig, graph, sector) -> list[tuple[str, int]]:
    out = []
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    for name in cfg.initial_states:
        if name in ("pi", "pi_prime", "theta", "theta_prime"):
            out.append((name, analysis.named_state(name, graph)))
        elif name.startswith(("0b", "0x")):
            word = int(name, 0)
            if word not in sector:
                raise ConfigError(f"state {name} is not in the (L={sector.L}, "
                                  f"N={sector.N}) sector")
            out.append((name, word))
        elif name.startswith("random"):
            count = int(name.split(":", 1)[1]) if ":" in name else 1
            for idx in rng.choice(sector.dim, size=count, replace=False):
                out.append((f"random{int(idx)}", int(sector.states[int(idx)])))
        else:
            raise ConfigError(f"unknown initial state {name!r}")
    return out


def _dump_states_binary(path: Path, times: np.ndarray, states: np.ndarray) -> None:
    """Binary layout: magic 'XYSCARS1', u64 dim, u64 n_times, u8 dtype code
    (16 = complex128), then times as f64[n_times], then the state rows."""
    states = np.ascontiguousarray(states, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(b"XYSCARS1")
        fh.write(struct.pack("<QQB", states.shape[1], states.shape[0], 16))
        fh.write(np.ascontiguousarray(times, dtype=np.float64).tobytes())
        fh.write(states.tobytes())


def run_evolve(cfg: RunConfig, out: Path, workers: int, manifest: Manifest) -> None:
    graph = build_graph(cfg)
    sector = _sector_for(cfg)
    H = hamiltonian.assemble(graph, sector, mode=cfg.evolve.mode)
    manifest.stage("assemble")
    manifest.data["tolerances"] = {
        "krylov_tol": cfg.evolve.tol, "krylov_dim": cfg.evolve.krylov_dim,
    }
    times = cfg.times.grid()
    A = tuple(cfg.subsystem_A)
    for label, word in _resolve_states(cfg, graph, sector):
        table = dynamics.quench_observables(
            H, word, times, subsystem=A,
            tol=cfg.evolve.tol, m_max=cfg.evolve.krylov_dim,
        )
        fname = out / f"trajectory_{label}.csv"
        with open(fname, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["t_ns", "I", "F", "F_A", "S_A"]
                + [f"n_{i}" for i in range(sector.L)]
            )
            for k in range(times.shape[0]):
                w.writerow(
                    [_fmt(times[k]), _fmt(table.imbalance[k]), _fmt(table.fidelity[k]),
                     _fmt(table.subsystem_fid[k]), _fmt(table.entropy[k])]
                    + [_fmt(x) for x in table.populations[k]]
                )
        if cfg.evolve.dump_states:
            traj = dynamics.evolve_krylov(
                H, dynamics.basis_vector(sector, word), times,
                tol=cfg.evolve.tol, m_max=cfg.evolve.krylov_dim,
            )
            _dump_states_binary(out / f"states_{label}.bin", times, traj.states)
        manifest.stage(f"evolve_{label}")
        manifest.data["results"][label] = {
            "state_bits_hex": hex(word),
            "n_matvec": table.info["n_matvec"],
        }


def run_spectrum(cfg: RunConfig, out: Path, workers: int, manifest: Manifest) -> None:
    graph = build_graph(cfg)
    sector = _sector_for(cfg)
    H = hamiltonian.assemble(graph, sector, mode=cfg.evolve.mode)
    manifest.stage("assemble")
    sc = cfg.spectrum
    reflection = spectral.parity_sectors(sector, graph) if sc.resolve_parity else None
    es = spectral.diagonalize(H, want_vectors=sc.vectors, reflection=reflection)
    manifest.stage("diagonalize")

    try:
        gr = spectral.mean_gap_ratio(es.energies, sc.discard_fraction)
        manifest.data["results"]["mean_gap_ratio"] = gr.r_mean
        manifest.data["results"]["gap_ratio_excluded_degenerate"] = gr.n_degenerate
    except ValueError as exc:  # sector too small for level statistics
        manifest.data["results"]["mean_gap_ratio"] = None
        manifest.data["results"]["mean_gap_ratio_skipped"] = str(exc)
    manifest.stage("level_statistics")

    ov = entropies = None
    if sc.vectors and sc.overlap_state:
        word = analysis.named_state(sc.overlap_state, graph)
        ov = spectral.overlaps(es, word)
        towers = spectral.detect_towers(ov, es.energies)
        with open(out / "towers.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "E_over_2pi_MHz", "overlap", "n_members"])
            for k in range(towers.count):
                w.writerow([
                    k, _fmt(towers.energies[k] / hamiltonian.MHZ_TO_RAD_PER_NS),
                    _fmt(towers.tower_overlaps[k]), len(towers.indices[k]),
                ])
        manifest.data["results"]["towers"] = {
            "detected": towers.detected,
            "count": towers.count,
            "spacing_over_2pi_MHz": (
                towers.spacing / hamiltonian.MHZ_TO_RAD_PER_NS
                if towers.detected else None
            ),
            "spacing_residual": towers.spacing_residual if towers.detected else None,
            "policy": vars(towers.policy),
        }
        manifest.stage("towers")
    if sc.vectors:
        cut = tuple(sc.entropy_cut) if sc.entropy_cut else tuple(range(sector.L // 2))
        entropies = spectral.eigenstate_entropies(es, cut)
        manifest.stage("entropies")

    with open(out / "spectrum.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "E_over_2pi_MHz", "parity", "S_half", "overlap_Pi"])
        for n in range(es.dim):
            w.writerow([
                n,
                _fmt(es.energies[n] / hamiltonian.MHZ_TO_RAD_PER_NS),
                int(es.parity[n]) if es.parity is not None else "",
                _fmt(entropies[n]) if entropies is not None else "",
                _fmt(ov[n]) if ov is not None else "",
            ])
    centers, density = spectral.density_of_states(es.energies, sc.dos_bins)
    with open(out / "dos.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["E_over_2pi_MHz", "density"])
        for c, d in zip(centers, density):
            w.writerow([_fmt(c / hamiltonian.MHZ_TO_RAD_PER_NS), _fmt(d)])
    manifest.stage("write")


def run_scan(cfg: RunConfig, out: Path, workers: int, manifest: Manifest) -> None:
    graph = build_graph(cfg)
    sector = _sector_for(cfg)
    H = hamiltonian.assemble(graph, sector, mode=cfg.evolve.mode)
    manifest.stage("assemble")
    res = analysis.scan_states(
        H, graph, cfg.times.grid(),
        include=tuple(cfg.scan.include),
        count=cfg.scan.count,
        seed=cfg.seed,
        tol=cfg.evolve.tol,
        m_max=cfg.evolve.krylov_dim,
        pad_to_ns=cfg.scan.pad_to_ns,
        halfwidth_MHz=cfg.scan.halfwidth_MHz,
        threshold_factor=cfg.scan.threshold_factor,
        workers=workers,
    )
    manifest.stage("scan")
    order = sorted(range(len(res.records)), key=lambda i: -res.records[i].g2)
    ranks = {i: r for r, i in enumerate(order)}
    with open(out / "scan.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state_bits_hex", "g2_at_f1", "rank"])
        for i, rec in enumerate(res.records):
            w.writerow([hex(rec.word), _fmt(rec.g2), ranks[i]])
    manifest.data["results"] = {
        "f1_MHz": res.f1_MHz,
        "halfwidth_MHz": res.halfwidth_MHz,
        "threshold_factor": res.threshold_factor,
        "scar_candidates": [
            {"label": r.label, "state_bits_hex": hex(r.word), "g2": r.g2}
            for r in res.records if r.is_scar_candidate
        ],
    }
    manifest.stage("write")


def run_sweep(cfg: RunConfig, out: Path, workers: int, manifest: Manifest) -> None:
    if cfg.geometry != "chain":
        raise ConfigError("ratio sweeps are defined for chain geometry")
    base = cfg

    def build(ratio):
        g = model.build_chain(base.L, base.boundary, base.f_e_MHz * ratio, base.f_e_MHz)
        rows = base.grid_rows or (base.L + base.grid_cols - 1) // base.grid_cols
        g = model.with_embedding(g, rows, base.grid_cols)
        if base.cross is not None and not base.cross.edges_csv:
            seed = base.cross.seed if base.cross.seed is not None else base.seed
            g = model.add_cross_couplings(
                g, (base.cross.f_lo_MHz, base.cross.f_hi_MHz), seed
            )
        elif base.cross is not None:
            g = g.with_edges(model.load_edge_csv(base.cross.edges_csv, kind="cross"))
        return g

    pts = analysis.ratio_sweep(
        build, cfg.sweep.ratios, cfg.times.grid(),
        state_name=cfg.sweep.state, tol=cfg.evolve.tol,
        pad_to_ns=cfg.sweep.pad_to_ns, halfwidth_MHz=cfg.sweep.halfwidth_MHz,
    )
    manifest.stage("sweep")
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ratio", "f1_MHz", "g", "g2"])
        for p in pts:
            w.writerow([_fmt(p.ratio), _fmt(p.f1_MHz), _fmt(p.g), _fmt(p.g**2)])
    manifest.stage("write")


def run_hypercube(cfg: RunConfig, out: Path, workers: int, manifest: Manifest) -> None:
    points = []
    for ratio in cfg.hypercube.ratios:
        for L in cfg.hypercube.sizes:
            g = model.build_chain(L, cfg.boundary, cfg.f_e_MHz * ratio, cfg.f_e_MHz)
            rows = (L + cfg.grid_cols - 1) // cfg.grid_cols
            g = model.with_embedding(g, rows, cfg.grid_cols)
            if cfg.cross is not None and not cfg.cross.edges_csv:
                seed = cfg.cross.seed if cfg.cross.seed is not None else cfg.seed
                g = model.add_cross_couplings(
                    g, (cfg.cross.f_lo_MHz, cfg.cross.f_hi_MHz), seed
                )
            sector = hilbert.enumerate_sector(L, L // 2)
            H = hamiltonian.assemble(g, sector, mode="matrix-free")
            rep = analysis.hypercube_report(H, g.dimers)
            points.append({
                "L": L,
                "coupling_ratio": ratio,
                "N": rep.n_dimers,
                "delta": rep.delta,
                "gamma_by_category": rep.gamma_by_kind,
                "ratio": rep.ratio,
            })
    manifest.stage("hypercube")
    with open(out / "hypercube.json", "w") as fh:
        json.dump({"points": points}, fh, indent=2)
        fh.write("\n")
    manifest.stage("write")


def run_sw(cfg: RunConfig, out: Path, workers: int, manifest: Manifest) -> None:
    if not cfg.sw.qubit_csv or not cfg.sw.coupler_csv:
        raise ConfigError("sw command requires sw.qubit_csv and sw.coupler_csv")
    params = model.load_device_csv(
        cfg.sw.qubit_csv, cfg.sw.coupler_csv,
        frequency_column=cfg.sw.frequency_column,
        interaction_frequency_GHz=cfg.sw.interaction_frequency_GHz,
    )
    graph = model.effective_from_circuit(params)
    manifest.stage("reduce")
    model.write_edge_csv(out / "effective_edges.csv", graph.edges)
    with open(out / "effective_onsite.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "f_MHz"])
        for i, f in enumerate(graph.onsite):
            w.writerow([i, _fmt(f)])
    manifest.data["results"] = {
        "n_qubits": graph.L,
        "n_edges": len(graph.edges),
        "coupling_range_MHz": [
            min(e.f_MHz for e in graph.edges),
            max(e.f_MHz for e in graph.edges),
        ] if graph.edges else None,
    }
    manifest.stage("write")


COMMANDS = {
    "spectrum": run_spectrum,
    "evolve": run_evolve,
    "scan": run_scan,
    "sweep": run_sweep,
    "hypercube": run_hypercube,
    "sw": run_sw,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="scarsim",
        description="Quench dynamics and spectral diagnostics of dimerized "
                    "XY coupling graphs",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(args.command, {}, 0)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        manifest.data["config"] = cfg.raw
        manifest.data["seed"] = cfg.seed
        manifest.stage("config")
        COMMANDS[args.command](cfg, out, max(1, args.workers), manifest)
    except ConfigError as exc:
        manifest.data["error"] = {"type": "config", "message": str(exc)}
        manifest.write(out)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        manifest.data["error"] = {"type": "capacity", "message": str(exc)}
        manifest.write(out)
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (IntegrationError, np.linalg.LinAlgError) as exc:
        manifest.data["error"] = {"type": "numerical", "message": str(exc)}
        manifest.write(out)
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        manifest.data["error"] = {"type": "config", "message": str(exc)}
        manifest.write(out)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    manifest.write(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
