"""Network construction: generators, edge-list I/O and Laplacians.

Adjacency convention: ``adjacency[i, j] > 0`` means a directed link from
node ``j`` to node ``i`` (so row ``i`` collects the influences on ``i``).
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

__all__ = [
    "Graph",
    "SbmSpec",
    "GraphError",
    "EdgeListError",
    "PRNG_ALGORITHM",
    "generate_sbm",
    "generate_balanced_tree",
    "generate_path",
    "load_edge_list",
    "serialize_edge_list",
    "load_dataset",
    "laplacian",
    "DATASETS",
]

#: Identifier recorded in run manifests so SBM draws can be replayed.
PRNG_ALGORITHM = "numpy.random.Philox(key=seed); one uniform per ordered pair, row-major"

DATASETS = ("karate", "florentine")


class GraphError(ValueError):
    """Invalid graph data or an unsupported operation on a graph."""


class EdgeListError(GraphError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Graph:
    adjacency: np.ndarray
    directed: bool = False
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=float, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError(f"adjacency must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise GraphError("adjacency has non-finite entries")
        if np.any(a < 0):
            raise GraphError("adjacency has negative entries")
        if np.any(np.diag(a) != 0):
            raise GraphError("self-loops are not allowed")
        if not self.directed and not np.array_equal(a, a.T):
            raise GraphError("undirected graph needs a symmetric adjacency")
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != a.shape[0]:
                raise GraphError(f"{len(labels)} labels for {a.shape[0]} nodes")
            object.__setattr__(self, "labels", labels)
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_edges(self) -> int:
        nnz = int(np.count_nonzero(self.adjacency))
        return nnz if self.directed else nnz // 2

    def in_strength(self) -> np.ndarray:
        """Row sums: total incoming link weight of each node."""
        return self.adjacency.sum(axis=1)

    def out_degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=0)

    def scaled(self, factor: float) -> "Graph":
        if factor < 0:
            raise GraphError("scale factor must be nonnegative")
        return Graph(self.adjacency * factor, self.directed, self.labels)


@dataclass(frozen=True)
class SbmSpec:
    block_sizes: Sequence[int]
    p_intra: float
    p_inter: float
    edge_weight: float = 1.0
    directed: bool = True
    seed: int = 0

    def validate(self) -> None:
        if len(self.block_sizes) == 0:
            raise GraphError("SBM needs at least one block")
        if any(int(b) != b or b < 1 for b in self.block_sizes):
            raise GraphError(f"block sizes must be positive integers: {list(self.block_sizes)}")
        for name in ("p_intra", "p_inter"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise GraphError(f"{name}={p} outside [0, 1]")
        if not self.edge_weight > 0:
            raise GraphError("edge_weight must be positive")

    @property
    def n(self) -> int:
        return int(sum(self.block_sizes))

    def membership(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.block_sizes)), self.block_sizes)


def generate_sbm(spec: SbmSpec) -> Graph:
    """Sample a stochastic block model graph.

    Every ordered pair ``(i, j)`` consumes exactly one uniform draw from a
    Philox stream keyed by ``spec.seed`` (row-major order, diagonal included
    and discarded), so the result depends only on the spec. For undirected
    graphs the draw of pair ``(i, j)`` with ``i < j`` decides both entries.
    """
    spec.validate()
    n = spec.n
    rng = np.random.Generator(np.random.Philox(key=spec.seed & (2**64 - 1)))
    u = rng.random((n, n))
    z = spec.membership()
    p = np.where(z[:, None] == z[None, :], spec.p_intra, spec.p_inter)
    edges = u < p
    np.fill_diagonal(edges, False)
    if not spec.directed:
        upper = np.triu(edges, k=1)
        edges = upper | upper.T
    return Graph(edges * float(spec.edge_weight), directed=spec.directed)


def generate_balanced_tree(branching: int, height: int) -> Graph:
    """Undirected rooted tree, nodes numbered breadth-first from the root."""
    if branching < 1:
        raise GraphError("branching must be >= 1")
    if height < 0:
        raise GraphError("height must be >= 0")
    n = height + 1 if branching == 1 else (branching ** (height + 1) - 1) // (branching - 1)
    a = np.zeros((n, n))
    for child in range(1, n):
        parent = (child - 1) // branching
        a[parent, child] = a[child, parent] = 1.0
    return Graph(a)


def generate_path(n: int) -> Graph:
    if n < 1:
        raise GraphError("path needs at least one node")
    a = np.zeros((n, n))
    i = np.arange(n - 1)
    a[i, i + 1] = a[i + 1, i] = 1.0
    return Graph(a)


def load_edge_list(text: str, directed: bool | None = None,
                   labels: Sequence[str] | None = None) -> Graph:
    """Parse a ``src dst [weight]`` edge list.

    A ``# directed: true|false`` comment sets the orientation when the
    ``directed`` argument is not given; otherwise the list is undirected.
    A ``# nodes: N`` comment fixes the node count (isolated nodes survive).
    A line ``src dst w`` sets ``a[dst, src] = w`` (link from src to dst), and
    also ``a[src, dst]`` when undirected.
    """
    header_directed = None
    header_nodes = None
    triples = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            body = line[1:].strip().lower()
            if body.startswith("directed:"):
                value = body.split(":", 1)[1].strip()
                if value not in ("true", "false"):
                    raise EdgeListError(f"bad directed flag {value!r}", lineno)
                header_directed = value == "true"
            elif body.startswith("nodes:"):
                try:
                    header_nodes = int(body.split(":", 1)[1])
                except ValueError:
                    raise EdgeListError(f"bad node count in {raw!r}", lineno) from None
            continue
        if not line:
            continue
        parts = line.split("#", 1)[0].split()
        if len(parts) not in (2, 3):
            raise EdgeListError(f"expected 'src dst [weight]', got {raw!r}", lineno)
        try:
            src, dst = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise EdgeListError(f"cannot parse {raw!r}", lineno) from None
        if src < 0 or dst < 0:
            raise EdgeListError("node ids must be nonnegative", lineno)
        if src == dst:
            raise EdgeListError(f"self-loop on node {src}", lineno)
        if not np.isfinite(w):
            raise EdgeListError(f"non-finite weight {parts[2]!r}", lineno)
        if w < 0:
            raise EdgeListError(f"negative weight {w}", lineno)
        triples.append((lineno, src, dst, w))

    if directed is None:
        directed = bool(header_directed)
    if labels is not None:
        n = len(labels)
    elif header_nodes is not None:
        n = header_nodes
    else:
        n = 1 + max((max(s, d) for _, s, d, _ in triples), default=-1)
    if n == 0:
        raise EdgeListError("edge list has no edges and no labels")
    a = np.zeros((n, n))
    seen = set()
    for lineno, src, dst, w in triples:
        if max(src, dst) >= n:
            raise EdgeListError(f"node id {max(src, dst)} exceeds node count {n}", lineno)
        key = (src, dst) if directed else (min(src, dst), max(src, dst))
        if key in seen:
            raise EdgeListError(f"duplicate edge {src} {dst}", lineno)
        seen.add(key)
        a[dst, src] = w
        if not directed:
            a[src, dst] = w
    return Graph(a, directed=directed, labels=labels)


def serialize_edge_list(g: Graph) -> str:
    """Inverse of :func:`load_edge_list`; weights keep 17 significant digits."""
    lines = [f"# directed: {'true' if g.directed else 'false'}", f"# nodes: {g.n}"]
    a = g.adjacency
    for dst, src in zip(*np.nonzero(a)):
        if not g.directed and src > dst:
            continue
        lines.append(f"{src} {dst} {a[dst, src]:.17g}")
    return "\n".join(lines) + "\n"


def load_dataset(name: str) -> Graph:
    """One of the embedded social networks: ``karate`` or ``florentine``."""
    if name not in DATASETS:
        raise GraphError(f"unknown dataset {name!r}; choose from {DATASETS}")
    root = resources.files("netsindy") / "data"
    text = (root / f"{name}.edges").read_text(encoding="utf-8")
    labels = (root / f"{name}.labels").read_text(encoding="utf-8").split()
    return load_edge_list(text, labels=labels)


def laplacian(g: Graph) -> np.ndarray:
    """``L = D - A`` for an undirected graph."""
    if g.directed:
        raise GraphError("Laplacian is only supported for undirected graphs")
    a = g.adjacency
    return np.diag(a.sum(axis=1)) - a
