"""Sparse identification of the coefficient dynamics ``dc/dt = Xi @ Theta(c)``.

Library rows are ordered: constant, order-1 terms ``c_1..c_m``, order-2
ordered products ``c_i*c_j`` in row-major ``(i, j)`` order (all ``m**2`` of
them, so ``c_1*c_2`` and ``c_2*c_1`` both appear), higher orders likewise,
then one block of ``m`` rows per trigonometric entry.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LibrarySpec",
    "DerivativeMatrix",
    "SindyModel",
    "RankDeficiencyError",
    "central_difference",
    "build_library",
    "soft_threshold",
    "solve_stlsq",
    "solve_sr3",
    "solve",
    "model_rhs",
    "DEFAULT_GAMMA",
    "DEFAULT_THRESHOLD",
]

DEFAULT_GAMMA = 0.05
DEFAULT_THRESHOLD = 0.1


class RankDeficiencyError(np.linalg.LinAlgError):
    def __init__(self, row: int, rank: int, size: int):
        self.row = row
        super().__init__(f"row {row}: active library matrix has rank {rank} < {size}")


@dataclass(frozen=True)
class LibrarySpec:
    include_constant: bool = True
    poly_orders: tuple[int, ...] = (1, 2)
    trig: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        orders = tuple(sorted(set(int(k) for k in self.poly_orders)))
        if any(k < 1 for k in orders):
            raise ValueError("polynomial orders must be >= 1")
        trig = tuple((str(kind), float(w)) for kind, w in self.trig)
        for kind, w in trig:
            if kind not in ("sin", "cos"):
                raise ValueError(f"unknown trig kind {kind!r}")
            if not w > 0:
                raise ValueError("trig frequency must be positive")
        object.__setattr__(self, "poly_orders", orders)
        object.__setattr__(self, "trig", trig)

    def size(self, m: int) -> int:
        return int(self.include_constant) + sum(m ** k for k in self.poly_orders) + m * len(self.trig)

    def names(self, m: int) -> list[str]:
        names = ["1"] if self.include_constant else []
        for k in self.poly_orders:
            for combo in itertools.product(range(m), repeat=k):
                names.append("*".join(f"c{i + 1}" for i in combo))
        for kind, w in self.trig:
            names.extend(f"{kind}({w:g}*c{i + 1})" for i in range(m))
        return names

    def to_dict(self) -> dict:
        return {"include_constant": self.include_constant,
                "poly_orders": list(self.poly_orders),
                "trig": [[kind, w] for kind, w in self.trig]}

    @classmethod
    def from_dict(cls, d: dict) -> "LibrarySpec":
        return cls(bool(d.get("include_constant", True)),
                   tuple(d.get("poly_orders", (1, 2))),
                   tuple(tuple(t) for t in d.get("trig", ())))


@dataclass(frozen=True)
class DerivativeMatrix:
    """Central-difference derivatives at the interior snapshots.

    ``cdot[:, j]`` estimates ``dc/dt`` at snapshot ``valid_range[j]``, and
    ``c_aligned`` holds the matching coefficient columns.
    """

    cdot: np.ndarray
    c_aligned: np.ndarray
    valid_range: range


def central_difference(c: np.ndarray, dt: float) -> DerivativeMatrix:
    """Second-order central differences; both end snapshots are dropped."""
    c = np.atleast_2d(np.asarray(c, dtype=float))
    k = c.shape[1]
    if k < 3:
        raise ValueError(f"central differences need at least 3 snapshots, got {k}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    cdot = (c[:, 2:] - c[:, :-2]) / (2.0 * dt)
    return DerivativeMatrix(cdot, c[:, 1:-1].copy(), range(1, k - 1))


def build_library(c: np.ndarray, spec: LibrarySpec) -> np.ndarray:
    """Evaluate the candidate functions on the columns of ``c`` (m x K) -> d x K."""
    c = np.asarray(c, dtype=float)
    if c.ndim == 1:
        return build_library(c[:, None], spec)[:, 0]
    m, k = c.shape
    rows = []
    if spec.include_constant:
        rows.append(np.ones((1, k)))
    for order in spec.poly_orders:
        block = c
        for _ in range(order - 1):
            # row-major ordered products: (block row a) * (c row b)
            block = (block[:, None, :] * c[None, :, :]).reshape(-1, k)
        rows.append(block)
    for kind, w in spec.trig:
        rows.append(np.sin(w * c) if kind == "sin" else np.cos(w * c))
    if not rows:
        return np.zeros((0, k))
    return np.concatenate(rows, axis=0)


def soft_threshold(z: np.ndarray, t: float) -> np.ndarray:
    """Proximal operator of ``t * |.|_1``: ``sign(z) * max(|z| - t, 0)``."""
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


@dataclass(frozen=True)
class SindyModel:
    xi: np.ndarray
    spec: LibrarySpec
    solver: str
    hyperparameters: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.xi.shape[0]

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.xi))

    def equations(self, precision: int = 6) -> list[str]:
        names = self.spec.names(self.m)
        out = []
        for p, row in enumerate(self.xi):
            terms = [f"{v:+.{precision}g} {names[j]}" for j, v in enumerate(row) if v != 0]
            out.append(f"dc{p + 1}/dt = " + (" ".join(terms) if terms else "0"))
        return out

    def to_dict(self) -> dict:
        return {"library": self.spec.to_dict(),
                "feature_names": self.spec.names(self.m),
                "solver": self.solver,
                "hyperparameters": self.hyperparameters,
                "xi": self.xi.tolist(),
                "diagnostics": self.diagnostics}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SindyModel":
        d = json.loads(text)
        return cls(np.array(d["xi"], dtype=float), LibrarySpec.from_dict(d["library"]),
                   d["solver"], d.get("hyperparameters", {}), d.get("diagnostics", {}))


def model_rhs(model: SindyModel, c: np.ndarray) -> np.ndarray:
    """``Xi @ Theta(c)`` for one coefficient vector (or columnwise for a matrix)."""
    return model.xi @ build_library(c, model.spec)


@dataclass(frozen=True)
class _Design:
    """Regression data with exact duplicate library rows merged.

    ``theta`` holds the distinct rows (unit-norm when normalising), ``scale``
    their original norms and ``owner[j]`` the distinct row that library row
    ``j`` maps to.
    """

    theta: np.ndarray
    cdot: np.ndarray
    scale: np.ndarray
    owner: np.ndarray

    def expand(self, coef: np.ndarray) -> np.ndarray:
        """Back to original units and library layout, duplicates sharing equally."""
        counts = np.bincount(self.owner, minlength=self.theta.shape[0])
        per_row = coef / self.scale[None, :] / counts[None, :]
        return per_row[:, self.owner]


def _prepare(theta: np.ndarray, cdot: np.ndarray, normalize: bool) -> _Design:
    theta = np.asarray(theta, dtype=float)
    cdot = np.atleast_2d(np.asarray(cdot, dtype=float))
    if theta.ndim != 2 or theta.shape[1] != cdot.shape[1]:
        raise ValueError(f"library {theta.shape} and derivatives {cdot.shape} are not aligned")
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(cdot))):
        raise ValueError("non-finite values in regression data")
    d, k = theta.shape
    if d >= k:
        warnings.warn(f"library size d={d} is not below the sample count K'={k}",
                      RuntimeWarning, stacklevel=3)
    first: dict[bytes, int] = {}
    owner = np.empty(d, dtype=int)
    keep = []
    for j in range(d):
        key = theta[j].tobytes()
        if key not in first:
            first[key] = len(keep)
            keep.append(j)
        owner[j] = first[key]
    distinct = theta[keep]
    if normalize:
        scale = np.linalg.norm(distinct, axis=1)
        scale[scale == 0] = 1.0
    else:
        scale = np.ones(len(keep))
    return _Design(distinct / scale[:, None], cdot, scale, owner)


def _residual(theta, cdot, xi) -> float:
    return float(np.linalg.norm(cdot - xi @ theta))


def _ridge_fit(a: np.ndarray, y: np.ndarray, alpha: float, row: int) -> np.ndarray:
    """Least squares ``min |a x - y|^2 + alpha |x|^2`` (``a`` is K' x n)."""
    n = a.shape[1]
    if n == 0:
        return np.zeros(0)
    if alpha > 0:
        a = np.vstack([a, np.sqrt(alpha) * np.eye(n)])
        y = np.concatenate([y, np.zeros(n)])
    x, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if alpha == 0 and rank < n:
        raise RankDeficiencyError(row, int(rank), n)
    return x


def solve_stlsq(theta: np.ndarray, cdot: np.ndarray, threshold: float = DEFAULT_THRESHOLD,
                alpha: float = 0.0, max_sweeps: int = 20, normalize: bool = True,
                spec: LibrarySpec | None = None) -> SindyModel:
    """Sequentially thresholded least squares, one coefficient row at a time.

    Each sweep zeroes the active coefficients whose magnitude is below
    ``threshold`` and refits the survivors. Thresholds and ``alpha`` act on
    unit-norm library rows when ``normalize`` is set; the returned ``xi`` is
    in the original units. Library rows that are exactly equal (``c1*c2`` and
    ``c2*c1``) are fitted as one function and share its coefficient equally.
    """
    design = _prepare(theta, cdot, normalize)
    theta_n, cdot = design.theta, design.cdot
    d = theta_n.shape[0]
    m = cdot.shape[0]
    xi = np.zeros((m, d))
    sweeps, converged = [], []
    for p in range(m):
        active = np.ones(d, dtype=bool)
        coef = np.zeros(d)
        coef[active] = _ridge_fit(theta_n[active].T, cdot[p], alpha, p)
        done = False
        n_sweeps = 0
        for n_sweeps in range(1, max_sweeps + 1):
            keep = active & (np.abs(coef) >= threshold)
            if np.array_equal(keep, active):
                done = True
                break
            active = keep
            coef = np.zeros(d)
            coef[active] = _ridge_fit(theta_n[active].T, cdot[p], alpha, p)
        xi[p] = coef
        sweeps.append(n_sweeps)
        converged.append(done)
    xi = design.expand(xi)
    diagnostics = {"residual": _residual(theta, cdot, xi), "nnz": int(np.count_nonzero(xi)),
                   "sweeps": sweeps, "converged": all(converged)}
    return SindyModel(xi, spec or LibrarySpec(), "stlsq",
                      {"threshold": threshold, "alpha": alpha, "max_sweeps": max_sweeps,
                       "normalize": normalize}, diagnostics)


def solve_sr3(theta: np.ndarray, cdot: np.ndarray, gamma: float = DEFAULT_GAMMA,
              kappa: float = 1.0, max_iter: int = 10000, tol: float = 1e-10,
              normalize: bool = True, unbias: bool = False,
              spec: LibrarySpec | None = None) -> SindyModel:
    """Sparse relaxed regularized regression with an L1 penalty.

    Alternates ``Xi = argmin 1/2|Cdot - Xi Theta|^2 + kappa/2 |Xi - W|^2`` with
    ``W = soft_threshold(Xi, gamma / kappa)``, starting from the least-squares
    fit, until ``W`` moves less than ``tol`` (max-norm). The sparse ``W`` is
    returned. ``unbias=True`` refits ordinary least squares on its support.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    design = _prepare(theta, cdot, normalize)
    theta_n, cdot = design.theta, design.cdot
    d = theta_n.shape[0]
    gram = theta_n @ theta_n.T
    rhs = cdot @ theta_n.T
    step = np.linalg.inv(gram + kappa * np.eye(d))
    xi_full = np.linalg.lstsq(theta_n.T, cdot.T, rcond=None)[0].T
    w = soft_threshold(xi_full, gamma / kappa)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        xi_full = (rhs + kappa * w) @ step
        w_new = soft_threshold(xi_full, gamma / kappa)
        change = np.max(np.abs(w_new - w)) if w.size else 0.0
        w = w_new
        if change < tol:
            converged = True
            break
    if unbias:
        for p in range(w.shape[0]):
            support = w[p] != 0
            if support.any():
                w[p, support] = np.linalg.lstsq(theta_n[support].T, cdot[p], rcond=None)[0]
    objective = (0.5 * np.linalg.norm(cdot - xi_full @ theta_n) ** 2
                 + gamma * np.abs(w).sum() + 0.5 * kappa * np.linalg.norm(xi_full - w) ** 2)
    xi = design.expand(w)
    diagnostics = {"residual": _residual(theta, cdot, xi), "nnz": int(np.count_nonzero(xi)),
                   "iterations": it, "converged": converged,
                   "relaxed_objective": float(objective)}
    if not converged:
        warnings.warn(f"SR3 did not converge in {max_iter} iterations", RuntimeWarning,
                      stacklevel=2)
    return SindyModel(xi, spec or LibrarySpec(), "sr3",
                      {"gamma": gamma, "kappa": kappa, "max_iter": max_iter, "tol": tol,
                       "normalize": normalize, "unbias": unbias}, diagnostics)


def solve(c: np.ndarray, dt: float, spec: LibrarySpec, solver: str = "sr3",
          **hyper) -> SindyModel:
    """Differentiate ``c`` (m x K), build the library and run ``solver``."""
    deriv = central_difference(c, dt)
    theta = build_library(deriv.c_aligned, spec)
    if solver == "sr3":
        return solve_sr3(theta, deriv.cdot, spec=spec, **hyper)
    if solver == "stlsq":
        return solve_stlsq(theta, deriv.cdot, spec=spec, **hyper)
    raise ValueError(f"unknown solver {solver!r}")

