"""Run configuration: YAML parsing with strict validation.

Every field is validated before any computation starts and unknown keys
are rejected, so a typo in an experiment file fails fast instead of
silently running defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from . import model


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _get(section: dict, key: str, kind, where: str, default=None, required=False):
    if key not in section or section[key] is None:
        if required:
            raise ConfigError(f"missing required key {key!r} in {where}")
        return default
    val = section[key]
    try:
        if kind is float:
            return float(val)
        if kind is int:
            iv = int(val)
            if isinstance(val, float) and val != iv:
                raise ValueError
            return iv
        if kind is bool:
            if not isinstance(val, bool):
                raise ValueError
            return val
        if kind is str:
            if not isinstance(val, str):
                raise ValueError
            return val
        if kind is list:
            if not isinstance(val, list):
                raise ValueError
            return val
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"key {key!r} in {where} has invalid value {val!r}")


@dataclass
class CrossConfig:
    f_lo_MHz: float = 0.3
    f_hi_MHz: float = 1.2
    seed: int | None = None
    edges_csv: str | None = None


@dataclass
class OnsiteConfig:
    pattern: str = "uniform"
    value_MHz: float = 0.0
    values_MHz: list[float] = field(default_factory=list)


@dataclass
class TimeGrid:
    t_max_ns: float = 400.0
    dt_ns: float = 1.0

    def grid(self):
        import numpy as np

        n = int(round(self.t_max_ns / self.dt_ns))
        return np.arange(n + 1) * self.dt_ns


@dataclass
class EvolveConfig:
    tol: float = 1e-9
    krylov_dim: int = 30
    mode: str = "auto"
    dump_states: bool = False


@dataclass
class SpectrumConfig:
    vectors: bool = True
    overlap_state: str | None = "pi"
    discard_fraction: float = 0.2
    resolve_parity: bool = False
    dos_bins: int = 50
    entropy_cut: list[int] | None = None


@dataclass
class ScanConfig:
    count: int = 120
    include: list[str] = field(default_factory=lambda: ["pi", "pi_prime"])
    threshold_factor: float = 10.0
    halfwidth_MHz: float = 2.0
    pad_to_ns: float = 4000.0


@dataclass
class SweepConfig:
    ratios: list[float] = field(default_factory=lambda: [1.0, 1.5, 2.0, 2.5])
    state: str = "pi"
    halfwidth_MHz: float = 2.0
    pad_to_ns: float = 4000.0


@dataclass
class HypercubeConfig:
    sizes: list[int] = field(default_factory=lambda: [8, 12, 16, 20, 24, 28])
    ratios: list[float] = field(default_factory=lambda: [1.5, 2.0, 2.5])


@dataclass
class SwConfig:
    qubit_csv: str = ""
    coupler_csv: str = ""
    frequency_column: str = "omega_idle_GHz"
    interaction_frequency_GHz: float | None = None


@dataclass
class RunConfig:
    seed: int = 0
    geometry: str = "chain"
    L: int | None = None
    n_dimers: int | None = None
    photons: int | None = None
    boundary: str = "open"
    f_a_MHz: float = -9.0
    f_e_MHz: float = -6.0
    grid_rows: int | None = None
    grid_cols: int = 6
    cross: CrossConfig | None = None
    J_nn_MHz: float | None = None
    onsite: OnsiteConfig = field(default_factory=OnsiteConfig)
    initial_states: list[str] = field(default_factory=lambda: ["pi"])
    times: TimeGrid = field(default_factory=TimeGrid)
    subsystem_A: list[int] = field(default_factory=lambda: [0, 1, 2, 3])
    evolve: EvolveConfig = field(default_factory=EvolveConfig)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    hypercube: HypercubeConfig = field(default_factory=HypercubeConfig)
    sw: SwConfig = field(default_factory=SwConfig)
    raw: dict = field(default_factory=dict, repr=False)


_TOP_KEYS = {
    "seed", "geometry", "L", "n_dimers", "photons", "boundary", "f_a_MHz",
    "f_e_MHz", "grid", "cross_couplings", "J_nn_MHz", "onsite",
    "initial_states", "times", "subsystem_A", "evolve", "spectrum", "scan",
    "sweep", "hypercube", "sw",
}


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    _check_keys(data, _TOP_KEYS, "top level")
    cfg = RunConfig(raw=data)
    cfg.seed = _get(data, "seed", int, "top level", default=0)
    cfg.geometry = _get(data, "geometry", str, "top level", default="chain")
    if cfg.geometry not in ("chain", "comb", "circuit"):
        raise ConfigError(f"geometry must be chain, comb or circuit, got {cfg.geometry!r}")
    cfg.L = _get(data, "L", int, "top level")
    cfg.n_dimers = _get(data, "n_dimers", int, "top level")
    cfg.photons = _get(data, "photons", int, "top level")
    cfg.boundary = _get(data, "boundary", str, "top level", default="open")
    if cfg.boundary not in ("open", "periodic"):
        raise ConfigError(f"boundary must be open or periodic, got {cfg.boundary!r}")
    cfg.f_a_MHz = _get(data, "f_a_MHz", float, "top level", default=-9.0)
    cfg.f_e_MHz = _get(data, "f_e_MHz", float, "top level", default=-6.0)
    cfg.J_nn_MHz = _get(data, "J_nn_MHz", float, "top level")

    # L / n_dimers are demanded lazily (build_graph); the hypercube and sw
    # commands never instantiate the base graph
    if cfg.geometry == "chain" and cfg.L is not None:
        if cfg.L % 2 or cfg.L < 2:
            raise ConfigError(f"chain length must be even and >= 2, got {cfg.L}")
    elif cfg.geometry == "comb" and cfg.n_dimers is not None:
        cfg.L = 2 * cfg.n_dimers

    if "grid" in data and data["grid"] is not None:
        sec = data["grid"]
        _check_keys(sec, {"rows", "cols"}, "grid")
        cfg.grid_rows = _get(sec, "rows", int, "grid")
        cfg.grid_cols = _get(sec, "cols", int, "grid", default=6)

    if "cross_couplings" in data and data["cross_couplings"] is not None:
        sec = data["cross_couplings"]
        _check_keys(sec, {"f_lo_MHz", "f_hi_MHz", "seed", "edges_csv"}, "cross_couplings")
        cfg.cross = CrossConfig(
            f_lo_MHz=_get(sec, "f_lo_MHz", float, "cross_couplings", default=0.3),
            f_hi_MHz=_get(sec, "f_hi_MHz", float, "cross_couplings", default=1.2),
            seed=_get(sec, "seed", int, "cross_couplings"),
            edges_csv=_get(sec, "edges_csv", str, "cross_couplings"),
        )
        if cfg.cross.f_lo_MHz > cfg.cross.f_hi_MHz:
            raise ConfigError("cross_couplings range is empty (f_lo > f_hi)")

    if "onsite" in data and data["onsite"] is not None:
        sec = data["onsite"]
        _check_keys(sec, {"pattern", "value_MHz", "values_MHz"}, "onsite")
        pattern = _get(sec, "pattern", str, "onsite", default="uniform")
        if pattern not in ("uniform", "end_impurity", "staircase", "explicit"):
            raise ConfigError(f"unknown onsite pattern {pattern!r}")
        cfg.onsite = OnsiteConfig(
            pattern=pattern,
            value_MHz=_get(sec, "value_MHz", float, "onsite", default=0.0),
            values_MHz=[float(v) for v in _get(sec, "values_MHz", list, "onsite", default=[])],
        )
        if pattern == "explicit" and len(cfg.onsite.values_MHz) != (cfg.L or 0):
            raise ConfigError("explicit onsite pattern needs values_MHz of length L")

    if "initial_states" in data:
        states = _get(data, "initial_states", list, "top level", default=["pi"])
        cfg.initial_states = [str(s) for s in states]
        for s in cfg.initial_states:
            _validate_state_name(s)

    if "times" in data and data["times"] is not None:
        sec = data["times"]
        _check_keys(sec, {"t_max_ns", "dt_ns"}, "times")
        cfg.times = TimeGrid(
            t_max_ns=_get(sec, "t_max_ns", float, "times", default=400.0),
            dt_ns=_get(sec, "dt_ns", float, "times", default=1.0),
        )
        if cfg.times.t_max_ns <= 0 or cfg.times.dt_ns <= 0:
            raise ConfigError("time grid values must be positive")

    if "subsystem_A" in data:
        sub = _get(data, "subsystem_A", list, "top level", default=[0, 1, 2, 3])
        cfg.subsystem_A = [int(s) for s in sub]
        if len(set(cfg.subsystem_A)) != len(cfg.subsystem_A):
            raise ConfigError("subsystem_A contains duplicate sites")

    if "evolve" in data and data["evolve"] is not None:
        sec = data["evolve"]
        _check_keys(sec, {"tol", "krylov_dim", "mode", "dump_states"}, "evolve")
        cfg.evolve = EvolveConfig(
            tol=_get(sec, "tol", float, "evolve", default=1e-9),
            krylov_dim=_get(sec, "krylov_dim", int, "evolve", default=30),
            mode=_get(sec, "mode", str, "evolve", default="auto"),
            dump_states=_get(sec, "dump_states", bool, "evolve", default=False),
        )
        if cfg.evolve.mode not in ("auto", "explicit", "matrix-free"):
            raise ConfigError(f"unknown storage mode {cfg.evolve.mode!r}")

    if "spectrum" in data and data["spectrum"] is not None:
        sec = data["spectrum"]
        _check_keys(
            sec,
            {"vectors", "overlap_state", "discard_fraction", "resolve_parity",
             "dos_bins", "entropy_cut"},
            "spectrum",
        )
        cut = _get(sec, "entropy_cut", list, "spectrum")
        cfg.spectrum = SpectrumConfig(
            vectors=_get(sec, "vectors", bool, "spectrum", default=True),
            overlap_state=_get(sec, "overlap_state", str, "spectrum", default="pi"),
            discard_fraction=_get(sec, "discard_fraction", float, "spectrum", default=0.2),
            resolve_parity=_get(sec, "resolve_parity", bool, "spectrum", default=False),
            dos_bins=_get(sec, "dos_bins", int, "spectrum", default=50),
            entropy_cut=[int(s) for s in cut] if cut is not None else None,
        )

    if "scan" in data and data["scan"] is not None:
        sec = data["scan"]
        _check_keys(
            sec, {"count", "include", "threshold_factor", "halfwidth_MHz", "pad_to_ns"},
            "scan",
        )
        include = _get(sec, "include", list, "scan", default=["pi", "pi_prime"])
        cfg.scan = ScanConfig(
            count=_get(sec, "count", int, "scan", default=120),
            include=[str(s) for s in include],
            threshold_factor=_get(sec, "threshold_factor", float, "scan", default=10.0),
            halfwidth_MHz=_get(sec, "halfwidth_MHz", float, "scan", default=2.0),
            pad_to_ns=_get(sec, "pad_to_ns", float, "scan", default=4000.0),
        )
        if cfg.scan.count < 0:
            raise ConfigError("scan count must be >= 0")

    if "sweep" in data and data["sweep"] is not None:
        sec = data["sweep"]
        _check_keys(sec, {"ratios", "state", "halfwidth_MHz", "pad_to_ns"}, "sweep")
        ratios = _get(sec, "ratios", list, "sweep", default=[1.0, 1.5, 2.0, 2.5])
        cfg.sweep = SweepConfig(
            ratios=[float(r) for r in ratios],
            state=_get(sec, "state", str, "sweep", default="pi"),
            halfwidth_MHz=_get(sec, "halfwidth_MHz", float, "sweep", default=2.0),
            pad_to_ns=_get(sec, "pad_to_ns", float, "sweep", default=4000.0),
        )

    if "hypercube" in data and data["hypercube"] is not None:
        sec = data["hypercube"]
        _check_keys(sec, {"sizes", "ratios"}, "hypercube")
        sizes = _get(sec, "sizes", list, "hypercube", default=[8, 12, 16, 20, 24, 28])
        ratios = _get(sec, "ratios", list, "hypercube", default=[1.5, 2.0, 2.5])
        cfg.hypercube = HypercubeConfig(
            sizes=[int(s) for s in sizes], ratios=[float(r) for r in ratios]
        )
        for s in cfg.hypercube.sizes:
            if s % 2 or s < 4:
                raise ConfigError(f"hypercube sizes must be even and >= 4, got {s}")

    if "sw" in data and data["sw"] is not None:
        sec = data["sw"]
        _check_keys(
            sec,
            {"qubit_csv", "coupler_csv", "frequency_column", "interaction_frequency_GHz"},
            "sw",
        )
        cfg.sw = SwConfig(
            qubit_csv=_get(sec, "qubit_csv", str, "sw", default=""),
            coupler_csv=_get(sec, "coupler_csv", str, "sw", default=""),
            frequency_column=_get(sec, "frequency_column", str, "sw", default="omega_idle_GHz"),
            interaction_frequency_GHz=_get(sec, "interaction_frequency_GHz", float, "sw"),
        )
    return cfg


def _validate_state_name(name: str) -> None:
    if name in ("pi", "pi_prime", "theta", "theta_prime"):
        return
    if name.startswith(("0b", "0x")):
        try:
            int(name, 0)
            return
        except ValueError:
            pass
    if name.startswith("random"):
        return
    raise ConfigError(
        f"unknown initial state {name!r} (use pi, pi_prime, theta, theta_prime, "
        "a 0b/0x literal, or random[:count])"
    )


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(data or {})


def build_graph(cfg: RunConfig) -> model.CouplingGraph:
    """Construct the coupling graph an experiment config describes."""
    if cfg.geometry == "chain":
        if cfg.L is None:
            raise ConfigError("chain geometry requires L")
        g = model.build_chain(cfg.L, cfg.boundary, cfg.f_a_MHz, cfg.f_e_MHz)
        rows = cfg.grid_rows or (cfg.L + cfg.grid_cols - 1) // cfg.grid_cols
        g = model.with_embedding(g, rows, cfg.grid_cols)
    elif cfg.geometry == "comb":
        if cfg.n_dimers is None:
            raise ConfigError("comb geometry requires n_dimers")
        g = model.build_comb(cfg.n_dimers, cfg.f_a_MHz, cfg.f_e_MHz)
    else:
        raise ConfigError("circuit geometry graphs come from the sw command")
    if cfg.cross is not None:
        if cfg.cross.edges_csv:
            g = g.with_edges(model.load_edge_csv(cfg.cross.edges_csv, kind="cross"))
        else:
            seed = cfg.cross.seed if cfg.cross.seed is not None else cfg.seed
            if cfg.geometry == "comb":
                raise ConfigError(
                    "comb geometry has no grid embedding; provide cross "
                    "couplings through cross_couplings.edges_csv"
                )
            g = model.add_cross_couplings(
                g, (cfg.cross.f_lo_MHz, cfg.cross.f_hi_MHz), seed
            )
    if cfg.J_nn_MHz is not None:
        g = model.add_nnn_couplings(g, cfg.J_nn_MHz)
    if cfg.onsite.pattern == "explicit":
        g = model.set_onsite(g, "explicit", cfg.onsite.values_MHz)
    elif cfg.onsite.pattern != "uniform" or cfg.onsite.value_MHz != 0.0:
        g = model.set_onsite(g, cfg.onsite.pattern, cfg.onsite.value_MHz)
    return g
