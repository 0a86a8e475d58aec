"""Proper orthogonal decomposition of snapshot matrices."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PodBasis",
    "thin_svd",
    "select_modes",
    "fit_pod",
    "project",
    "reconstruct",
]


def _fix_signs(u: np.ndarray, vt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # largest-magnitude entry of each left vector made positive (first one on ties)
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, vt * signs[:, None]


def thin_svd(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``X = U diag(s) V^T`` with ``r = min(N, K)`` columns.

    Singular values come back in descending order. Signs are fixed so that
    the largest-magnitude entry of every left singular vector is positive,
    which makes the factors a deterministic function of ``X``.

    Returns
    -------
    U : (N, r) ndarray
    s : (r,) ndarray
    V : (K, r) ndarray
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("thin_svd expects a matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("snapshot matrix has non-finite entries")
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    u, vt = _fix_signs(u, vt)
    return u, s, vt.T


def select_modes(sigma: np.ndarray, m: int | None = None,
                 energy_eps: float | None = None) -> int:
    """Number of modes to keep: a fixed count, or an energy criterion.

    With ``energy_eps`` the result is the smallest ``m`` for which the first
    ``m`` squared singular values hold at least ``1 - energy_eps`` of the
    total.
    """
    sigma = np.asarray(sigma, dtype=float)
    if (m is None) == (energy_eps is None):
        raise ValueError("give exactly one of m or energy_eps")
    if np.any(np.diff(sigma) > 0):
        raise ValueError("singular values must be nonincreasing")
    r = sigma.size
    if m is not None:
        if m < 1:
            raise ValueError("m must be >= 1")
        return min(int(m), r)
    if not 0.0 < energy_eps < 1.0:
        raise ValueError(f"energy_eps={energy_eps} must lie in (0, 1)")
    energy = np.cumsum(sigma ** 2)
    total = energy[-1]
    if total == 0:
        return 1
    return int(np.searchsorted(energy, (1.0 - energy_eps) * total, side="left") + 1)


@dataclass(frozen=True)
class PodBasis:
    """Agitation modes ``Y`` (N x m) plus the full singular spectrum."""

    modes: np.ndarray
    sigma: np.ndarray
    mean: np.ndarray | None = None
    dt: float | None = None
    num_snapshots: int | None = None

    @property
    def m(self) -> int:
        return self.modes.shape[1]

    @property
    def n(self) -> int:
        return self.modes.shape[0]

    @property
    def t_obs(self) -> float | None:
        if self.dt is None or self.num_snapshots is None:
            return None
        return (self.num_snapshots - 1) * self.dt

    def energy_fraction(self) -> float:
        total = float(np.sum(self.sigma ** 2))
        return 1.0 if total == 0 else float(np.sum(self.sigma[: self.m] ** 2) / total)

    def to_text(self) -> str:
        """JSON header line, then ``[modes]`` and ``[sigma]`` CSV blocks."""
        header = {"N": self.n, "K": self.num_snapshots, "m": self.m, "dt": self.dt,
                  "t_obs": self.t_obs, "centered": self.mean is not None}
        out = io.StringIO()
        out.write("# " + json.dumps(header, sort_keys=True) + "\n")
        out.write("[modes]\n")
        for row in self.modes:
            out.write(",".join(f"{v:.17g}" for v in row) + "\n")
        out.write("[sigma]\n")
        out.write(",".join(f"{v:.17g}" for v in self.sigma) + "\n")
        if self.mean is not None:
            out.write("[mean]\n")
            out.write(",".join(f"{v:.17g}" for v in self.mean) + "\n")
        return out.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "PodBasis":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# "):
            raise ValueError("basis file must start with a JSON header line")
        header = json.loads(lines[0][2:])
        blocks: dict[str, list[list[float]]] = {}
        current = None
        for ln in lines[1:]:
            ln = ln.strip()
            if not ln:
                continue
            if ln.startswith("[") and ln.endswith("]"):
                current = ln[1:-1]
                blocks[current] = []
            elif current is None:
                raise ValueError("data before the first block marker")
            else:
                blocks[current].append([float(v) for v in ln.split(",")])
        modes = np.array(blocks["modes"]).reshape(header["N"], header["m"])
        sigma = np.array(blocks["sigma"][0])
        mean = np.array(blocks["mean"][0]) if "mean" in blocks else None
        return cls(modes, sigma, mean, header["dt"], header["K"])


def fit_pod(x: np.ndarray, m: int | None = None, energy_eps: float | None = None,
            center: bool = False, dt: float | None = None) -> PodBasis:
    """Agitation modes of the snapshot matrix ``x`` (N x K).

    Snapshots are used as they are; ``center=True`` subtracts the temporal
    mean first and stores it on the basis.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("snapshot matrix must be N x K with K >= 2")
    mean = x.mean(axis=1) if center else None
    u, s, _ = thin_svd(x - mean[:, None] if center else x)
    keep = select_modes(s, m=m, energy_eps=energy_eps)
    return PodBasis(u[:, :keep].copy(), s, mean, dt, x.shape[1])


def project(basis: PodBasis, x: np.ndarray) -> np.ndarray:
    """Coefficients ``Y^T x`` for a state vector or an N x K snapshot matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != basis.n:
        raise ValueError(f"state dimension {x.shape[0]} does not match basis ({basis.n})")
    if basis.mean is not None:
        x = x - (basis.mean if x.ndim == 1 else basis.mean[:, None])
    return basis.modes.T @ x


def reconstruct(basis: PodBasis, c: np.ndarray) -> np.ndarray:
    """States ``Y c`` from a coefficient vector or an m x K coefficient matrix."""
    c = np.asarray(c, dtype=float)
    if c.shape[0] != basis.m:
        raise ValueError(f"coefficient dimension {c.shape[0]} does not match m={basis.m}")
    x = basis.modes @ c
    if basis.mean is not None:
        x = x + (basis.mean if x.ndim == 1 else basis.mean[:, None])
    return x
