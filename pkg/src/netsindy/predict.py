"""Fit POD + SINDy on an observation window and forecast nodal states.

Also hosts the surrogate-network predictor, which fits a nonnegative
adjacency matrix to SIS observations with known curing rates, and the
constant-extrapolation baseline used as a yardstick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import DivergenceError, SisParams, Trajectory, integrate_rk4, sis_rhs
from .graph import Graph
from .pod import PodBasis, fit_pod, project, reconstruct
from .sindy import (DEFAULT_GAMMA, DEFAULT_THRESHOLD, LibrarySpec, SindyModel,
                    build_library, central_difference, model_rhs, solve_sr3, solve_stlsq)

__all__ = [
    "PipelineConfig",
    "InsufficientDataError",
    "FitResult",
    "Forecast",
    "split_window",
    "fit",
    "forecast",
    "constant_forecast",
    "run_pipeline",
    "error_metrics",
    "SurrogateResult",
    "surrogate_fit",
    "surrogate_forecast",
    "surrogate_objective",
]


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    obs_fraction: float = 0.5
    m: int | None = 2
    energy_eps: float | None = None
    library: LibrarySpec = field(default_factory=LibrarySpec)
    solver: str = "sr3"
    solver_options: dict = field(default_factory=dict)
    center: bool = False

    def __post_init__(self):
        if not 0.0 < self.obs_fraction < 1.0:
            raise ValueError(f"obs_fraction={self.obs_fraction} must lie in (0, 1)")
        if (self.m is None) == (self.energy_eps is None):
            raise ValueError("set exactly one of m and energy_eps")
        if self.solver not in ("sr3", "stlsq"):
            raise ValueError(f"unknown solver {self.solver!r}")

    def resolved_solver_options(self) -> dict:
        """Solver keyword arguments with every default filled in."""
        if self.solver == "sr3":
            base = {"gamma": DEFAULT_GAMMA, "kappa": 1.0, "max_iter": 10000, "tol": 1e-10,
                    "normalize": True, "unbias": False}
        else:
            base = {"threshold": DEFAULT_THRESHOLD, "alpha": 0.0, "max_sweeps": 20,
                    "normalize": True}
        unknown = set(self.solver_options) - set(base)
        if unknown:
            raise ValueError(f"unknown {self.solver} options: {sorted(unknown)}")
        base.update(self.solver_options)
        return base

    def to_dict(self) -> dict:
        return {"obs_fraction": self.obs_fraction, "m": self.m, "energy_eps": self.energy_eps,
                "library": self.library.to_dict(), "solver": self.solver,
                "solver_options": self.resolved_solver_options(), "center": self.center}


def split_window(traj: Trajectory, obs_fraction: float) -> tuple[Trajectory, Trajectory]:
    """Observation window (first ``floor(obs_fraction*K)`` snapshots) and the rest."""
    k = traj.num_snapshots
    k_obs = int(math.floor(obs_fraction * k))
    if k_obs < 2 or k - k_obs < 2:
        raise InsufficientDataError(
            f"obs_fraction={obs_fraction} splits K={k} snapshots into {k_obs} observed and "
            f"{k - k_obs} held out; both windows need at least 2")
    return traj.window(0, k_obs), traj.window(k_obs, k)


@dataclass(frozen=True)
class FitResult:
    basis: PodBasis
    coeffs: np.ndarray
    model: SindyModel
    config: PipelineConfig
    window: Trajectory

    @property
    def fitted(self) -> np.ndarray:
        return reconstruct(self.basis, self.coeffs)


def fit(obs: Trajectory, cfg: PipelineConfig) -> FitResult:
    """POD of the observation window, projection, then sparse regression.

    Only ``obs`` is read, so held-out data cannot leak into the model.
    """
    x = obs.states
    k_obs = obs.num_snapshots
    basis = fit_pod(x, m=cfg.m, energy_eps=cfg.energy_eps, center=cfg.center, dt=obs.dt)
    d = cfg.library.size(basis.m)
    need = max(3, d + 1)
    if k_obs < need:
        raise InsufficientDataError(
            f"observation window has {k_obs} snapshots; at least {need} are required "
            f"(library size d={d} for m={basis.m})")
    coeffs = project(basis, x)
    deriv = central_difference(coeffs, obs.dt)
    theta = build_library(deriv.c_aligned, cfg.library)
    opts = cfg.resolved_solver_options()
    if cfg.solver == "sr3":
        model = solve_sr3(theta, deriv.cdot, spec=cfg.library, **opts)
    else:
        model = solve_stlsq(theta, deriv.cdot, spec=cfg.library, **opts)
    return FitResult(basis, coeffs, model, cfg, obs)


@dataclass(frozen=True)
class Forecast:
    """Predicted states on ``(t_obs, t_pred]``.

    ``anchor`` is the state the integration starts from at ``t_obs``. When
    the integration diverges, the arrays are truncated after the last finite
    step and ``diverged`` is set.
    """

    times: np.ndarray
    predicted: np.ndarray
    anchor: np.ndarray
    t_obs: float
    coeffs: np.ndarray | None = None
    diverged: bool = False
    last_valid_time: float | None = None
    fitted: np.ndarray | None = None
    fit_times: np.ndarray | None = None
    metrics: dict = field(default_factory=dict)

    def clipped(self, lo: float = 0.0, hi: float = 1.0) -> tuple[np.ndarray, bool]:
        """Predicted values clipped to ``[lo, hi]`` and whether any moved."""
        out = np.clip(self.predicted, lo, hi)
        return out, bool(np.any(out != self.predicted))


def _integrate_forward(rhs, start: np.ndarray, t_obs: float, t_pred: float, dt: float):
    if not t_pred > t_obs:
        raise ValueError("t_pred must exceed t_obs")
    steps = int(round((t_pred - t_obs) / dt))
    if steps < 1 or not math.isclose(steps * dt, t_pred - t_obs, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("horizon must be a positive multiple of dt")
    try:
        traj = integrate_rk4(rhs, start, dt, steps, t0=t_obs)
        return traj.states, False
    except DivergenceError as err:
        # keep the finite prefix (column 0 is the start state)
        return err.partial.states[:, :err.step], True


def forecast(basis: PodBasis, model: SindyModel, c_obs_end: np.ndarray, t_obs: float,
             t_pred: float, dt: float) -> Forecast:
    """Integrate the identified coefficient ODE and map back to nodal states."""
    c0 = np.asarray(c_obs_end, dtype=float)
    if c0.shape != (basis.m,):
        raise ValueError(f"c_obs_end has shape {c0.shape}, expected ({basis.m},)")
    cs, diverged = _integrate_forward(lambda c: model_rhs(model, c), c0, t_obs, t_pred, dt)
    coeffs = cs[:, 1:]
    times = t_obs + dt * np.arange(1, coeffs.shape[1] + 1)
    last = float(times[-1]) if times.size else t_obs
    return Forecast(times, reconstruct(basis, coeffs) if coeffs.shape[1] else
                    np.zeros((basis.n, 0)), reconstruct(basis, c0), t_obs, coeffs,
                    diverged, last)


def constant_forecast(x_obs_end: np.ndarray, t_obs: float, num_steps: int,
                      dt: float) -> Forecast:
    """Baseline: hold the last observed state fixed."""
    x = np.asarray(x_obs_end, dtype=float)
    times = t_obs + dt * np.arange(1, num_steps + 1)
    return Forecast(times, np.repeat(x[:, None], num_steps, axis=1), x.copy(), t_obs,
                    last_valid_time=float(times[-1]))


def error_metrics(predicted: np.ndarray, truth: np.ndarray) -> dict:
    """RMSE per snapshot, overall relative L2 error, max abs error per node.

    A zero ``truth`` gives ``relative_l2 = inf`` with ``relative_l2_defined``
    set to False.
    """
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predicted.shape != truth.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {truth.shape}")
    diff = predicted - truth
    denom = float(np.linalg.norm(truth))
    defined = denom > 0
    rel = float(np.linalg.norm(diff)) / denom if defined else math.inf
    return {"rmse_per_snapshot": np.sqrt(np.mean(diff ** 2, axis=0)).tolist(),
            "rmse": float(np.sqrt(np.mean(diff ** 2))) if diff.size else 0.0,
            "relative_l2": rel,
            "relative_l2_defined": defined,
            "max_abs_per_node": np.max(np.abs(diff), axis=1).tolist() if diff.size
            else [0.0] * diff.shape[0]}


def run_pipeline(traj: Trajectory, cfg: PipelineConfig) -> tuple[FitResult, Forecast, Forecast]:
    """Split, fit, forecast the held-out window and score against truth.

    Returns the fit, the POD+SINDy forecast and the constant baseline, both
    forecasts carrying ``metrics`` computed on the held-out snapshots.
    """
    obs, held = split_window(traj, cfg.obs_fraction)
    result = fit(obs, cfg)
    t_obs = obs.times[-1]
    c_end = result.coeffs[:, -1]
    fc = forecast(result.basis, result.model, c_end, t_obs, held.times[-1], traj.dt)
    k = fc.predicted.shape[1]
    metrics = {"fit": error_metrics(result.fitted, obs.states),
               "predict": error_metrics(fc.predicted, held.states[:, :k]),
               "diverged": fc.diverged}
    fc = replace(fc, fitted=result.fitted, fit_times=obs.times, metrics=metrics)
    base = constant_forecast(obs.states[:, -1], t_obs, held.num_snapshots, traj.dt)
    base = replace(base, metrics={"predict": error_metrics(base.predicted, held.states)})
    return result, fc, base


# -- surrogate network --------------------------------------------------------

@dataclass(frozen=True)
class SurrogateResult:
    graph: Graph
    rho: np.ndarray
    sweeps: list
    converged: bool
    objective_history: list | None = None


def _surrogate_design(x: np.ndarray, dt: float, delta: np.ndarray, i: int):
    xi = x[i]
    target = (xi[1:] - xi[:-1]) / dt + delta[i] * xi[:-1]
    design = (1.0 - xi[:-1])[:, None] * x[:, :-1].T
    return target, design


def surrogate_objective(obs: Trajectory, delta: np.ndarray, a_hat: np.ndarray,
                        rho: np.ndarray) -> np.ndarray:
    """Per-node objective: squared forward-difference residual + rho * sum(a)."""
    x = obs.states
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        target, design = _surrogate_design(x, obs.dt, delta, i)
        r = target - design @ a_hat[i]
        out[i] = r @ r + rho[i] * a_hat[i].sum()
    return out


def _nonneg_cd(h: np.ndarray, b: np.ndarray, rho: float, tol: float, max_sweeps: int,
               const: float, history: list | None):
    """Coordinate descent on ``a^T H a - 2 b^T a + rho * sum(a) + const``, ``a >= 0``."""
    n = b.size
    a = np.zeros(n)
    ha = np.zeros(n)
    diag = np.diag(h).copy()
    for sweep in range(1, max_sweeps + 1):
        biggest = 0.0
        for j in range(n):
            if diag[j] <= 0:
                continue
            new = max(0.0, a[j] - (ha[j] - b[j] + 0.5 * rho) / diag[j])
            step = new - a[j]
            if step != 0.0:
                a[j] = new
                ha += step * h[:, j]
                biggest = max(biggest, abs(step))
        if history is not None:
            history.append(float(a @ ha - 2.0 * b @ a + rho * a.sum() + const))
        if biggest < tol:
            return a, sweep, True
    return a, max_sweeps, False


def surrogate_fit(obs: Trajectory, delta: np.ndarray, rho: np.ndarray | float | None = None,
                  tol: float = 1e-8, max_sweeps: int = 200000,
                  record_history: bool = False) -> SurrogateResult:
    """Nonnegative L1-regularised least-squares fit of a surrogate adjacency.

    Each row ``i`` solves ``min_a sum_k (r_k - phi_k . a)^2 + rho_i sum(a)``
    with ``a >= 0``, where ``r_k`` is the forward-difference residual of the
    SIS equation at snapshot ``k`` and ``phi_kj = (1 - x_i) x_j``. Diagonal
    entries stay zero. The default penalty is ``rho_i = 1e-4 * K_obs``.
    """
    x = obs.states
    n, k_obs = x.shape
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (n,):
        raise ValueError("delta must have one entry per node")
    if rho is None:
        rho = 1e-4 * k_obs
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (n,)).copy()
    if np.any(rho < 0):
        raise ValueError("rho must be nonnegative")
    a_hat = np.zeros((n, n))
    sweeps, converged = [], True
    histories = [] if record_history else None
    for i in range(n):
        target, design = _surrogate_design(x, obs.dt, delta, i)
        others = np.arange(n) != i
        phi = design[:, others]
        hist = [] if record_history else None
        a, used, ok = _nonneg_cd(phi.T @ phi, phi.T @ target, rho[i], tol, max_sweeps,
                                 float(target @ target), hist)
        a_hat[i, others] = a
        sweeps.append(used)
        converged &= ok
        if record_history:
            histories.append(hist)
    return SurrogateResult(Graph(a_hat, directed=True), rho, sweeps, converged, histories)


def surrogate_forecast(a_hat: Graph | np.ndarray, delta: np.ndarray, x_obs_end: np.ndarray,
                       t_obs: float, t_pred: float, dt: float) -> Forecast:
    """Integrate SIS under the surrogate adjacency from the last observed state."""
    g = a_hat if isinstance(a_hat, Graph) else Graph(a_hat, directed=True)
    params = SisParams(delta, g)
    x0 = np.asarray(x_obs_end, dtype=float)
    xs, diverged = _integrate_forward(lambda x: sis_rhs(params, x), x0, t_obs, t_pred, dt)
    pred = xs[:, 1:]
    times = t_obs + dt * np.arange(1, pred.shape[1] + 1)
    last = float(times[-1]) if times.size else t_obs
    return Forecast(times, pred, x0.copy(), t_obs, None, diverged, last)
