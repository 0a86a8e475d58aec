"""Coupled-ODE dynamics on networks (SIS, consensus) and a fixed-step RK4."""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graph import Graph, laplacian

__all__ = [
    "SisParams",
    "ConsensusParams",
    "Trajectory",
    "DivergenceError",
    "sis_rhs",
    "consensus_rhs",
    "integrate_rk4",
    "sample_initial_sis",
    "sample_curing_rates",
    "sis_stable_dt",
    "simulate",
    "SAMPLE_UPPER",
]

#: Upper end of the uniform draws for initial infection and curing rates.
SAMPLE_UPPER = 0.2

_STREAM_INITIAL = 1
_STREAM_CURING = 2


class DivergenceError(ArithmeticError):
    """Integration produced a non-finite state.

    ``step`` is the index of the first step whose result is non-finite and
    ``partial`` holds the finite part of the trajectory computed so far.
    """

    def __init__(self, step: int, partial: "Trajectory"):
        self.step = step
        self.partial = partial
        super().__init__(f"non-finite state at integration step {step} "
                         f"(t = {partial.t0 + step * partial.dt:.6g})")


@dataclass(frozen=True)
class SisParams:
    delta: np.ndarray
    graph: Graph

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float)
        if delta.shape != (self.graph.n,):
            raise ValueError(f"delta has shape {delta.shape}, graph has {self.graph.n} nodes")
        if not np.all(delta > 0):
            raise ValueError("curing rates must be strictly positive")
        object.__setattr__(self, "delta", delta)


@dataclass(frozen=True)
class ConsensusParams:
    graph: Graph
    laplacian: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.graph.directed:
            raise ValueError("consensus dynamics need an undirected graph")
        lap = laplacian(self.graph)
        lap.setflags(write=False)
        object.__setattr__(self, "laplacian", lap)


@dataclass(frozen=True)
class Trajectory:
    """Equidistant snapshots; column ``k`` is the state at ``t0 + k*dt``."""

    states: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2:
            raise ValueError("states must be an N x K matrix")
        if states.shape[1] < 2:
            raise ValueError("a trajectory needs at least two snapshots")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "states", states)

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def num_snapshots(self) -> int:
        return self.states.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.num_snapshots)

    def window(self, start: int, stop: int) -> "Trajectory":
        """Snapshots ``start..stop-1`` as a new trajectory (copied)."""
        return Trajectory(self.states[:, start:stop].copy(), self.dt, self.t0 + start * self.dt)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join(["t"] + [f"node_{i}" for i in range(self.n)]) + "\n")
        for t, col in zip(self.times, self.states.T):
            out.write(",".join(f"{v:.17g}" for v in (t, *col)) + "\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trajectory":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split(",")
        if header[0] != "t" or any(h != f"node_{i}" for i, h in enumerate(header[1:])):
            raise ValueError("trajectory CSV header must be t,node_0,...,node_{N-1}")
        rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        t = rows[:, 0]
        steps = np.diff(t)
        dt = float((t[-1] - t[0]) / (len(t) - 1))
        if not np.allclose(steps, dt, rtol=1e-9, atol=0):
            raise ValueError("trajectory CSV rows are not equidistant in t")
        return cls(rows[:, 1:].T.copy(), dt, float(t[0]))


def _check_dim(x: np.ndarray, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"state has shape {x.shape}, expected ({n},)")
    return x


def sis_rhs(params: SisParams, x: np.ndarray) -> np.ndarray:
    """``dx/dt = -delta*x + (A x)*(1 - x)`` (mean-field SIS)."""
    x = _check_dim(x, params.graph.n)
    return -params.delta * x + (params.graph.adjacency @ x) * (1.0 - x)


def consensus_rhs(params: ConsensusParams, x: np.ndarray) -> np.ndarray:
    x = _check_dim(x, params.graph.n)
    return -(params.laplacian @ x)


def integrate_rk4(rhs: Callable[[np.ndarray], np.ndarray], x0: np.ndarray,
                  dt: float, steps: int, t0: float = 0.0) -> Trajectory:
    """Classical fixed-step fourth-order Runge-Kutta.

    Returns ``steps + 1`` snapshots with column 0 equal to ``x0``. Raises
    :class:`DivergenceError` as soon as a step yields a non-finite state.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if steps < 1:
        raise ValueError("need at least one step")
    x = np.array(x0, dtype=float)
    if x.ndim != 1:
        raise ValueError("x0 must be a vector")
    if not np.all(np.isfinite(x)):
        raise DivergenceError(0, Trajectory(np.stack([x, x], axis=1), dt, t0))
    out = np.empty((x.size, steps + 1))
    out[:, 0] = x
    half = 0.5 * dt
    for k in range(1, steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = rhs(x)
            k2 = rhs(x + half * k1)
            k3 = rhs(x + half * k2)
            k4 = rhs(x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            keep = out[:, :k] if k >= 2 else np.repeat(out[:, :1], 2, axis=1)
            raise DivergenceError(k, Trajectory(keep.copy(), dt, t0))
        out[:, k] = x
    return Trajectory(out, dt, t0)


def _uniform_open_low(n: int, seed: int, stream: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))
    # random() is on [0, 1); flipping it gives (0, 1] so zero is excluded
    return SAMPLE_UPPER * (1.0 - rng.random(n))


def sample_initial_sis(n: int, seed: int) -> np.ndarray:
    """Initial infection probabilities, i.i.d. uniform on (0, 0.2]."""
    return _uniform_open_low(n, seed, _STREAM_INITIAL)


def sample_curing_rates(n: int, seed: int) -> np.ndarray:
    """Curing rates, i.i.d. uniform on (0, 0.2]."""
    return _uniform_open_low(n, seed, _STREAM_CURING)


def sis_stable_dt(params: SisParams) -> float:
    """Advisory step bound ``0.1 / max(delta_i + in_strength_i)``."""
    return 0.1 / float(np.max(params.delta + params.graph.in_strength()))


def simulate(params: SisParams | ConsensusParams, x0: np.ndarray, t_end: float,
             num_snapshots: int, substeps: int = 1) -> Trajectory:
    """Integrate on ``[0, t_end]`` returning ``num_snapshots`` equidistant columns.

    ``substeps`` RK4 steps are taken per snapshot interval. For SIS a warning
    is issued when the RK4 step exceeds :func:`sis_stable_dt`.
    """
    if num_snapshots < 2:
        raise ValueError("need at least two snapshots")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    dt = t_end / (num_snapshots - 1)
    h = dt / substeps
    if isinstance(params, SisParams):
        limit = sis_stable_dt(params)
        if h > limit:
            warnings.warn(f"step {h:.4g} exceeds the advisory SIS bound {limit:.4g}",
                          RuntimeWarning, stacklevel=2)
        rhs = lambda x: sis_rhs(params, x)  # noqa: E731
    else:
        rhs = lambda x: consensus_rhs(params, x)  # noqa: E731
    fine = integrate_rk4(rhs, x0, h, (num_snapshots - 1) * substeps)
    if substeps == 1:
        return fine
    return Trajectory(fine.states[:, ::substeps].copy(), dt, fine.t0)
