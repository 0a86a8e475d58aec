"""Experiment configuration: JSON in, validated dataclasses out.

Every field has a default, and :meth:`ExperimentConfig.to_dict` writes the
fully materialised configuration so a run manifest can replay it.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .graph import DATASETS
from .predict import PipelineConfig
from .sindy import LibrarySpec

__all__ = [
    "ConfigError",
    "GraphSection",
    "DynamicsSection",
    "SimulationSection",
    "ClusterSection",
    "SurrogateSection",
    "OutputsSection",
    "ExperimentConfig",
    "load_config",
]


class ConfigError(ValueError):
    def __init__(self, message: str, path: tuple = (), line: int | None = None):
        self.path = tuple(path)
        self.line = line
        where = ".".join(str(p) for p in self.path)
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{where + ': ' if where else ''}{message}")


GENERATORS = ("sbm", "tree", "path")


@dataclass(frozen=True)
class GraphSection:
    generator: str | None = None
    dataset: str | None = None
    edge_list: str | None = None
    directed: bool | None = None
    # sbm
    block_sizes: tuple[int, ...] = (20, 20, 20)
    p_intra: float = 0.25
    p_inter: float = 0.02
    edge_weight: float = 0.05
    # tree / path
    branching: int = 2
    height: int = 4
    n: int = 10
    # optional rescaling of the infection weights
    scale: float | None = None
    mean_in_strength: float | None = None


@dataclass(frozen=True)
class DynamicsSection:
    model: str = "sis"
    delta: tuple[float, ...] | None = None
    x0: Any = "uniform"


@dataclass(frozen=True)
class SimulationSection:
    dt: float | None = None
    t_end: float | None = None
    num_snapshots: int = 200
    substeps: int = 4
    trajectory: str | None = None


@dataclass(frozen=True)
class ClusterSection:
    k: int = 4
    sources: tuple[str, ...] = ("adjacency", "snapshot")
    normalized: str | None = None


@dataclass(frozen=True)
class SurrogateSection:
    rho: Any = None
    tol: float = 1e-8
    max_sweeps: int = 200000


@dataclass(frozen=True)
class OutputsSection:
    directory: str = "out"
    format: str = "csv"


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    graph: GraphSection | None = None
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    cluster: ClusterSection = field(default_factory=ClusterSection)
    surrogate: SurrogateSection = field(default_factory=SurrogateSection)
    outputs: OutputsSection = field(default_factory=OutputsSection)
    base_dir: str = field(default=".", compare=False)

    @property
    def dt(self) -> float:
        sim = self.simulation
        if sim.dt is not None:
            return sim.dt
        return (10.0 if sim.t_end is None else sim.t_end) / (sim.num_snapshots - 1)

    @property
    def t_end(self) -> float:
        return self.dt * (self.simulation.num_snapshots - 1)

    def resolve_path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def to_dict(self) -> dict:
        sim = asdict(self.simulation)
        sim["dt"], sim["t_end"] = self.dt, self.t_end
        return {
            "seed": self.seed,
            "graph": None if self.graph is None else _jsonable(asdict(self.graph)),
            "dynamics": _jsonable(asdict(self.dynamics)),
            "simulation": sim,
            "pipeline": self.pipeline.to_dict(),
            "cluster": _jsonable(asdict(self.cluster)),
            "surrogate": _jsonable(asdict(self.surrogate)),
            "outputs": asdict(self.outputs),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


# -- parsing -------------------------------------------------------------------

def _section(raw: dict, name: str, cls, path=()):
    data = raw.get(name, {})
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("expected an object", path + (name,))
    known = set(cls.__dataclass_fields__)
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", path + (name, unknown[0]))
    return data


def _number(value, path, positive=False, integer=False, allow_none=False):
    if value is None and allow_none:
        return None
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if integer:
        ok = ok and float(value).is_integer()
    if not ok:
        raise ConfigError(f"expected {'an integer' if integer else 'a number'}, got {value!r}", path)
    if positive and not value > 0:
        raise ConfigError(f"must be positive, got {value!r}", path)
    return int(value) if integer else float(value)


def _parse_graph(raw: dict, base_dir: str, needs_graph: bool) -> GraphSection | None:
    if "graph" not in raw or raw["graph"] is None:
        if needs_graph:
            raise ConfigError("a graph section is required", ("graph",))
        return None
    data = _section(raw, "graph", GraphSection)
    sources = [k for k in ("generator", "dataset", "edge_list") if data.get(k) is not None]
    if len(sources) != 1:
        raise ConfigError("give exactly one of generator, dataset, edge_list", ("graph",))
    p = ("graph",)
    gen = data.get("generator")
    if gen is not None and gen not in GENERATORS:
        raise ConfigError(f"unknown generator {gen!r}; choose from {GENERATORS}", p + ("generator",))
    if data.get("dataset") is not None and data["dataset"] not in DATASETS:
        raise ConfigError(f"unknown dataset {data['dataset']!r}; choose from {DATASETS}",
                          p + ("dataset",))
    if data.get("edge_list") is not None:
        path = Path(data["edge_list"])
        full = path if path.is_absolute() else Path(base_dir) / path
        if not full.is_file():
            raise ConfigError(f"edge list {str(full)!r} does not exist", p + ("edge_list",))
    kw = dict(data)
    if "block_sizes" in kw:
        bs = kw["block_sizes"]
        if not isinstance(bs, list) or not bs:
            raise ConfigError("expected a nonempty list", p + ("block_sizes",))
        kw["block_sizes"] = tuple(_number(b, p + ("block_sizes",), positive=True, integer=True)
                                  for b in bs)
    for key in ("p_intra", "p_inter"):
        if key in kw:
            kw[key] = _number(kw[key], p + (key,))
            if not 0 <= kw[key] <= 1:
                raise ConfigError("must lie in [0, 1]", p + (key,))
    for key in ("edge_weight", "scale", "mean_in_strength"):
        if key in kw:
            kw[key] = _number(kw[key], p + (key,), positive=True, allow_none=True)
    for key in ("branching", "n"):
        if key in kw:
            kw[key] = _number(kw[key], p + (key,), positive=True, integer=True)
    if "height" in kw:
        kw["height"] = _number(kw["height"], p + ("height",), integer=True)
        if kw["height"] < 0:
            raise ConfigError("must be >= 0", p + ("height",))
    if kw.get("scale") is not None and kw.get("mean_in_strength") is not None:
        raise ConfigError("give at most one of scale and mean_in_strength", p + ("scale",))
    return GraphSection(**kw)


def _parse_dynamics(raw: dict) -> DynamicsSection:
    data = _section(raw, "dynamics", DynamicsSection)
    p = ("dynamics",)
    model = data.get("model", "sis")
    if model not in ("sis", "consensus"):
        raise ConfigError(f"unknown model {model!r}", p + ("model",))
    delta = data.get("delta")
    if delta is not None:
        if not isinstance(delta, list):
            raise ConfigError("expected a list of curing rates", p + ("delta",))
        delta = tuple(_number(v, p + ("delta",), positive=True) for v in delta)
    x0 = data.get("x0", "uniform")
    if isinstance(x0, list):
        x0 = tuple(_number(v, p + ("x0",)) for v in x0)
    elif isinstance(x0, dict):
        if set(x0) != {"laplacian_decay"}:
            raise ConfigError("x0 object must be {\"laplacian_decay\": r}", p + ("x0",))
        x0 = {"laplacian_decay": _number(x0["laplacian_decay"], p + ("x0",), positive=True)}
    elif x0 != "uniform":
        raise ConfigError("x0 must be \"uniform\", a list, or {\"laplacian_decay\": r}", p + ("x0",))
    return DynamicsSection(model, delta, x0)


def _parse_simulation(raw: dict, base_dir: str) -> SimulationSection:
    data = _section(raw, "simulation", SimulationSection)
    p = ("simulation",)
    dt = _number(data.get("dt"), p + ("dt",), positive=True, allow_none=True)
    t_end = _number(data.get("t_end"), p + ("t_end",), positive=True, allow_none=True)
    if dt is not None and t_end is not None:
        raise ConfigError("give at most one of dt and t_end", p + ("dt",))
    k = _number(data.get("num_snapshots", 200), p + ("num_snapshots",), integer=True)
    if k < 2:
        raise ConfigError("need at least 2 snapshots", p + ("num_snapshots",))
    sub = _number(data.get("substeps", 4), p + ("substeps",), positive=True, integer=True)
    traj = data.get("trajectory")
    if traj is not None:
        path = Path(traj)
        full = path if path.is_absolute() else Path(base_dir) / path
        if not full.is_file():
            raise ConfigError(f"trajectory {str(full)!r} does not exist", p + ("trajectory",))
    return SimulationSection(dt, t_end, k, sub, traj)


def _parse_pipeline(raw: dict) -> PipelineConfig:
    data = raw.get("pipeline", {}) or {}
    p = ("pipeline",)
    if not isinstance(data, dict):
        raise ConfigError("expected an object", p)
    known = {"obs_fraction", "m", "energy_eps", "library", "solver", "solver_options", "center"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", p + (unknown[0],))
    lib = data.get("library", {}) or {}
    try:
        library = LibrarySpec.from_dict(lib)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err), p + ("library",)) from None
    m = data.get("m", 2 if data.get("energy_eps") is None else None)
    kw = {"obs_fraction": _number(data.get("obs_fraction", 0.5), p + ("obs_fraction",)),
          "m": _number(m, p + ("m",), positive=True, integer=True, allow_none=True),
          "energy_eps": _number(data.get("energy_eps"), p + ("energy_eps",), allow_none=True),
          "library": library,
          "solver": data.get("solver", "sr3"),
          "solver_options": dict(data.get("solver_options", {}) or {}),
          "center": bool(data.get("center", False))}
    try:
        cfg = PipelineConfig(**kw)
        cfg.resolved_solver_options()
    except ValueError as err:
        raise ConfigError(str(err), p) from None
    return cfg


def _parse_cluster(raw: dict) -> ClusterSection:
    data = _section(raw, "cluster", ClusterSection)
    p = ("cluster",)
    k = _number(data.get("k", 4), p + ("k",), positive=True, integer=True)
    sources = tuple(data.get("sources", ("adjacency", "snapshot")))
    if not sources or any(s not in ("adjacency", "snapshot") for s in sources):
        raise ConfigError("sources must be a nonempty subset of [adjacency, snapshot]",
                          p + ("sources",))
    norm = data.get("normalized")
    if norm not in (None, "sym", "rw"):
        raise ConfigError("normalized must be null, \"sym\" or \"rw\"", p + ("normalized",))
    return ClusterSection(k, sources, norm)


def _parse_surrogate(raw: dict) -> SurrogateSection:
    data = _section(raw, "surrogate", SurrogateSection)
    p = ("surrogate",)
    rho = data.get("rho")
    if isinstance(rho, list):
        rho = tuple(_number(v, p + ("rho",)) for v in rho)
        if any(v < 0 for v in rho):
            raise ConfigError("rho must be nonnegative", p + ("rho",))
    elif rho is not None:
        rho = _number(rho, p + ("rho",))
        if rho < 0:
            raise ConfigError("rho must be nonnegative", p + ("rho",))
    return SurrogateSection(rho, _number(data.get("tol", 1e-8), p + ("tol",), positive=True),
                            _number(data.get("max_sweeps", 200000), p + ("max_sweeps",),
                                    positive=True, integer=True))


def _parse_outputs(raw: dict) -> OutputsSection:
    data = _section(raw, "outputs", OutputsSection)
    fmt = data.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("format must be csv or json", ("outputs", "format"))
    return OutputsSection(str(data.get("directory", "out")), fmt)


def parse_config(raw: dict, base_dir: str = ".", needs_graph: bool = True) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object")
    known = {"seed", "graph", "dynamics", "simulation", "pipeline", "cluster", "surrogate",
             "outputs", "description"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}", (unknown[0],))
    seed = _number(raw.get("seed", 0), ("seed",), integer=True)
    sim = _parse_simulation(raw, base_dir)
    graph = _parse_graph(raw, base_dir, needs_graph and sim.trajectory is None)
    cfg = ExperimentConfig(seed, graph, _parse_dynamics(raw), sim, _parse_pipeline(raw),
                           _parse_cluster(raw), _parse_surrogate(raw), _parse_outputs(raw),
                           base_dir)
    if cfg.dynamics.model == "consensus" and graph is not None and graph.directed:
        raise ConfigError("consensus dynamics need an undirected graph", ("graph", "directed"))
    return cfg


def locate(text: str, path: tuple) -> int | None:
    """Best-effort line number of the key ``path`` inside the JSON ``text``."""
    pos = 0
    found = None
    for key in path:
        idx = text.find(json.dumps(str(key)), pos)
        if idx < 0:
            break
        pos = idx
        found = text.count("\n", 0, idx) + 1
    return found


def load_config(path: str | os.PathLike, needs_graph: bool = True,
                seed: int | None = None) -> ExperimentConfig:
    """Read, validate and default-fill a JSON config file.

    Errors carry the line of the offending key when it can be found.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON: {err.msg}", line=err.lineno) from None
    if seed is not None and isinstance(raw, dict):
        raw["seed"] = seed
    try:
        return parse_config(raw, str(Path(path).resolve().parent), needs_graph)
    except ConfigError as err:
        if err.line is None:
            raise ConfigError(str(err).split(": ", 1)[-1] if err.path else str(err),
                              err.path, locate(text, err.path)) from None
        raise
