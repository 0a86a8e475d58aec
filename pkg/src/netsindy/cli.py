"""Command-line driver: simulate, predict, cluster, surrogate, report.

Each command reads a JSON config, writes its outputs atomically into one
directory and finishes with ``manifest.json``. The manifest holds the fully
materialised config and the SHA-256 of every output. Outputs never contain
clock or host data. Wall-clock timings go to ``timings.json`` only when
``--timings`` is given.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import io
import json
import os
import platform
import sys
import tempfile
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .analysis import ClusteringError, eigh_laplacian, spectral_cluster
from .config import ConfigError, ExperimentConfig, load_config
from .dynamics import (ConsensusParams, DivergenceError, SisParams, Trajectory,
                       sample_curing_rates, sample_initial_sis, simulate)
from .graph import (PRNG_ALGORITHM, Graph, GraphError, SbmSpec, generate_balanced_tree,
                    generate_path, generate_sbm, load_dataset, load_edge_list,
                    serialize_edge_list)
from .predict import (InsufficientDataError, error_metrics, run_pipeline, split_window,
                      surrogate_fit, surrogate_forecast)

__all__ = ["main", "build_parser", "StageError", "build_graph", "build_trajectory"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
FORECAST_HEADER = ("t", "node_i", "truth", "fitted_or_predicted", "phase")


class StageError(RuntimeError):
    """A failure inside a named pipeline stage; ``cause`` keeps the original."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as err:
        raise StageError(name, err) from err


def exit_code_for(err: BaseException) -> int:
    cause = err.cause if isinstance(err, StageError) else err
    if isinstance(cause, (ConfigError, InsufficientDataError, GraphError)):
        return EXIT_CONFIG
    if isinstance(cause, (DivergenceError, np.linalg.LinAlgError, ClusteringError,
                          ArithmeticError)):
        return EXIT_NUMERIC
    if isinstance(cause, OSError):
        return EXIT_IO
    if isinstance(cause, ValueError):
        return EXIT_CONFIG
    return EXIT_NUMERIC


# -- output handling ------------------------------------------------------------

def atomic_write(path: Path, data: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def render_table(header, rows, fmt: str) -> str:
    if fmt == "json":
        records = [dict(zip(header, (r.item() if isinstance(r, np.generic) else r
                                     for r in row))) for row in rows]
        return json.dumps(records, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


@dataclass
class RunWriter:
    out: Path
    fmt: str
    files: dict = field(default_factory=dict)

    def text(self, name: str, data: str) -> None:
        atomic_write(self.out / name, data)
        self.files[name] = hashlib.sha256(data.encode("utf-8")).hexdigest()

    def table(self, stem: str, header, rows) -> str:
        name = f"{stem}.{self.fmt}"
        self.text(name, render_table(header, rows, self.fmt))
        return name


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"netsindy": pkg, "numpy": np.__version__, "python": platform.python_version()}


def _input_digests(cfg: ExperimentConfig) -> dict:
    out = {}
    if cfg.graph is not None and cfg.graph.edge_list is not None:
        p = cfg.resolve_path(cfg.graph.edge_list)
        out["edge_list"] = hashlib.sha256(p.read_bytes()).hexdigest()
    if cfg.simulation.trajectory is not None:
        p = cfg.resolve_path(cfg.simulation.trajectory)
        out["trajectory"] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def write_manifest(writer: RunWriter, command: str, cfg: ExperimentConfig) -> None:
    manifest = {"command": command,
                "config": cfg.to_dict(),
                "seeds": {"graph": cfg.seed, "dynamics": cfg.seed, "kmeans": cfg.seed},
                "prng": PRNG_ALGORITHM,
                "sampling": "SeedSequence([seed, stream]) -> Philox; stream 1 initial state, "
                            "stream 2 curing rates; values 0.2 * (1 - U)",
                "versions": _versions(),
                "inputs": _input_digests(cfg),
                "outputs": dict(sorted(writer.files.items()))}
    atomic_write(writer.out / "manifest.json", dump_json(manifest))


# -- shared stages --------------------------------------------------------------

def build_graph(cfg: ExperimentConfig) -> Graph:
    gs = cfg.graph
    if gs is None:
        raise ConfigError("this command needs a graph section", ("graph",))
    if gs.generator == "sbm":
        directed = True if gs.directed is None else gs.directed
        g = generate_sbm(SbmSpec(gs.block_sizes, gs.p_intra, gs.p_inter, gs.edge_weight,
                                 directed, cfg.seed))
    elif gs.generator == "tree":
        g = generate_balanced_tree(gs.branching, gs.height)
    elif gs.generator == "path":
        g = generate_path(gs.n)
    elif gs.dataset is not None:
        g = load_dataset(gs.dataset)
    else:
        text = cfg.resolve_path(gs.edge_list).read_text(encoding="utf-8")
        g = load_edge_list(text, directed=gs.directed)
    if gs.scale is not None:
        g = g.scaled(gs.scale)
    elif gs.mean_in_strength is not None:
        mean = float(g.in_strength().mean())
        if mean <= 0:
            raise GraphError("cannot rescale a graph without edges")
        g = g.scaled(gs.mean_in_strength / mean)
    return g


def initial_state(cfg: ExperimentConfig, g: Graph) -> np.ndarray:
    x0 = cfg.dynamics.x0
    if x0 == "uniform":
        return sample_initial_sis(g.n, cfg.seed)
    if isinstance(x0, dict):
        r = x0["laplacian_decay"]
        vecs = eigh_laplacian(g).vectors
        return vecs @ (r ** np.arange(g.n))
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (g.n,):
        raise ConfigError(f"x0 has {x0.size} entries for a graph with {g.n} nodes",
                          ("dynamics", "x0"))
    return x0


def curing_rates(cfg: ExperimentConfig, n: int) -> np.ndarray:
    if cfg.dynamics.delta is None:
        return sample_curing_rates(n, cfg.seed)
    delta = np.asarray(cfg.dynamics.delta, dtype=float)
    if delta.shape != (n,):
        raise ConfigError(f"delta has {delta.size} entries for {n} nodes", ("dynamics", "delta"))
    return delta


def build_trajectory(cfg: ExperimentConfig) -> tuple[Trajectory, Graph | None]:
    """Load the configured trajectory file, or simulate one."""
    if cfg.simulation.trajectory is not None:
        with stage("load"):
            text = cfg.resolve_path(cfg.simulation.trajectory).read_text(encoding="utf-8")
            return Trajectory.from_csv(text), None
    with stage("graph"):
        g = build_graph(cfg)
    with stage("simulate"):
        x0 = initial_state(cfg, g)
        if cfg.dynamics.model == "sis":
            params = SisParams(curing_rates(cfg, g.n), g)
        else:
            params = ConsensusParams(g)
        traj = simulate(params, x0, cfg.t_end, cfg.simulation.num_snapshots,
                        cfg.simulation.substeps)
    return traj, g


def forecast_rows(times_fit, fitted, truth_fit, times_pred, predicted, truth_pred):
    rows = []
    for phase, times, vals, truth in (("fit", times_fit, fitted, truth_fit),
                                      ("predict", times_pred, predicted, truth_pred)):
        for k, t in enumerate(times):
            for i in range(vals.shape[0]):
                rows.append((float(t), i, float(truth[i, k]), float(vals[i, k]), phase))
    return rows


def _reported(cfg: ExperimentConfig, fitted, fc):
    """Values written to the forecast table; SIS probabilities are clamped to [0, 1].

    Metrics are always computed on the raw values.
    """
    if cfg.dynamics.model != "sis":
        return fitted, fc.predicted, False
    predicted, moved = fc.clipped(0.0, 1.0)
    if fitted is not None:
        clipped_fit = np.clip(fitted, 0.0, 1.0)
        moved = moved or bool(np.any(clipped_fit != fitted))
        fitted = clipped_fit
    return fitted, predicted, moved


# -- commands --------------------------------------------------------------------

def cmd_simulate(cfg: ExperimentConfig, w: RunWriter) -> dict:
    if cfg.simulation.trajectory is not None:
        raise ConfigError("simulate needs a graph, not a trajectory file",
                          ("simulation", "trajectory"))
    traj, g = build_trajectory(cfg)
    if w.fmt == "csv":
        w.text("trajectory.csv", traj.to_csv())
    else:
        header = ["t"] + [f"node_{i}" for i in range(traj.n)]
        w.table("trajectory", header,
                [[t, *traj.states[:, k]] for k, t in enumerate(traj.times)])
    w.text("graph.edges", serialize_edge_list(g))
    if cfg.dynamics.model == "sis":
        w.text("delta.json", dump_json(curing_rates(cfg, g.n).tolist()))
    return {"N": traj.n, "K": traj.num_snapshots}


def cmd_predict(cfg: ExperimentConfig, w: RunWriter) -> dict:
    traj, _ = build_trajectory(cfg)
    with stage("fit"):
        result, fc, base = run_pipeline(traj, cfg.pipeline)
    obs, held = split_window(traj, cfg.pipeline.obs_fraction)
    k = fc.predicted.shape[1]
    with stage("write"):
        fitted, predicted, clamped = _reported(cfg, fc.fitted, fc)
        w.table("forecast", FORECAST_HEADER,
                forecast_rows(obs.times, fitted, obs.states, fc.times, predicted,
                              held.states[:, :k]))
        metrics = {"model": fc.metrics, "baseline": base.metrics, "clamped": clamped,
                   "m": result.basis.m, "energy_fraction": result.basis.energy_fraction(),
                   "nnz": result.model.nnz, "equations": result.model.equations(),
                   "last_valid_time": fc.last_valid_time}
        metrics["summary"] = {
            "fit_relative_l2": fc.metrics["fit"]["relative_l2"],
            "predict_relative_l2": fc.metrics["predict"]["relative_l2"],
            "baseline_relative_l2": base.metrics["predict"]["relative_l2"],
            "diverged": fc.diverged}
        w.text("metrics.json", dump_json(metrics))
        w.text("model.json", result.model.to_json())
        w.text("basis.txt", result.basis.to_text())
    return metrics["summary"]


def cmd_cluster(cfg: ExperimentConfig, w: RunWriter) -> dict:
    k = cfg.cluster.k
    sources = cfg.cluster.sources
    if "adjacency" in sources and cfg.graph is None:
        raise ConfigError("adjacency clustering needs a graph section", ("cluster", "sources"))
    traj = g = None
    if "snapshot" in sources:
        traj, g = build_trajectory(cfg)
    if "adjacency" in sources and g is None:
        with stage("graph"):
            g = build_graph(cfg)
    rows, details = [], {}
    for source in ("adjacency", "snapshot"):
        if source not in sources:
            continue
        with stage(f"cluster:{source}"):
            if source == "adjacency":
                a = g.adjacency
                if g.directed:
                    a = a + a.T
                feats = a
            else:
                feats = traj.states
            res = spectral_cluster(feats, k, seed=cfg.seed, source=source,
                                   normalized=cfg.cluster.normalized)
        rows += [(i, int(lab), source) for i, lab in enumerate(res.labels)]
        details[source] = {"inertia": res.inertia, "labels": res.labels.tolist(),
                           "embedding": res.embedding.tolist()}
    w.table("clusters", ("node", "label", "source"), rows)
    w.text("clusters.json", dump_json(details))
    return {s: d["inertia"] for s, d in details.items()}


def cmd_surrogate(cfg: ExperimentConfig, w: RunWriter) -> dict:
    if cfg.dynamics.model != "sis":
        raise ConfigError("the surrogate predictor needs SIS dynamics", ("dynamics", "model"))
    traj, g = build_trajectory(cfg)
    n = traj.n
    with stage("surrogate_fit"):
        delta = curing_rates(cfg, n)
        obs, held = split_window(traj, cfg.pipeline.obs_fraction)
        rho = cfg.surrogate.rho
        sur = surrogate_fit(obs, delta, None if rho is None else np.asarray(rho),
                            tol=cfg.surrogate.tol, max_sweeps=cfg.surrogate.max_sweeps)
    with stage("surrogate_forecast"):
        fc = surrogate_forecast(sur.graph, delta, obs.states[:, -1], obs.times[-1],
                                held.times[-1], traj.dt)
        k = fc.predicted.shape[1]
        _, predicted, clamped = _reported(cfg, None, fc)
        metrics = {"predict": error_metrics(fc.predicted, held.states[:, :k]),
                   "diverged": fc.diverged, "clamped": clamped, "converged": sur.converged,
                   "sweeps": sur.sweeps, "rho": sur.rho.tolist()}
        metrics["summary"] = {"predict_relative_l2": metrics["predict"]["relative_l2"],
                              "diverged": fc.diverged}
    with stage("write"):
        w.text("surrogate.edges", serialize_edge_list(sur.graph))
        w.table("forecast", FORECAST_HEADER,
                forecast_rows(obs.times[:0], obs.states[:, :0], obs.states[:, :0], fc.times,
                              predicted, held.states[:, :k]))
        w.text("metrics.json", dump_json(metrics))
    return metrics["summary"]


def _metrics_files(paths) -> list[Path]:
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out += sorted(p.rglob("metrics.json"))
        elif p.is_file():
            out.append(p)
        else:
            raise FileNotFoundError(f"no such file or directory: {p}")
    return out


def cmd_report(paths, out: Path | None, fmt: str) -> str:
    files = _metrics_files(paths)
    header = ("run", "fit_relative_l2", "predict_relative_l2", "baseline_relative_l2",
              "diverged")
    rows = []
    for f in files:
        summary = json.loads(f.read_text(encoding="utf-8")).get("summary", {})
        rows.append((str(f.parent), *(summary.get(h, "") for h in header[1:])))
    text = render_table(header, rows, fmt)
    if out is not None:
        atomic_write(out / f"summary.{fmt}", text)
    return text


COMMANDS = {"simulate": cmd_simulate, "predict": cmd_predict, "cluster": cmd_cluster,
            "surrogate": cmd_surrogate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netsindy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", help="output directory (overrides outputs.directory)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--format", choices=("csv", "json"), help="table format")
        p.add_argument("--timings", action="store_true", help="also write timings.json")
    p = sub.add_parser("report", help="aggregate metrics.json files into one table")
    p.add_argument("paths", nargs="+", help="run directories or metrics.json files")
    p.add_argument("--out", help="write summary.<format> here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            text = cmd_report(args.paths, None if args.out is None else Path(args.out),
                              args.format)
            if args.out is None:
                sys.stdout.write(text)
            return EXIT_OK
        needs_graph = args.command != "cluster"
        cfg = load_config(args.config, needs_graph=needs_graph, seed=args.seed)
        out = Path(args.out) if args.out else cfg.resolve_path(cfg.outputs.directory)
        fmt = args.format or cfg.outputs.format
        writer = RunWriter(out, fmt)
        start = time.perf_counter()
        summary = COMMANDS[args.command](cfg, writer)
        elapsed = time.perf_counter() - start
        write_manifest(writer, args.command, cfg)
        if args.timings:
            atomic_write(out / "timings.json", dump_json({"seconds": elapsed}))
        print(json.dumps({"command": args.command, "out": str(out), **summary}))
        return EXIT_OK
    except (ConfigError, StageError, OSError, ValueError, ArithmeticError,
            np.linalg.LinAlgError, ClusteringError) as err:
        print(f"netsindy {args.command}: error: {err}", file=sys.stderr)
        return exit_code_for(err)


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
