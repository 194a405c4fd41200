"""PCA backed by a cyclic Jacobi symmetric eigensolver.

Each sweep visits every (p, q) pair once. Pairs are scheduled with the
round-robin tournament ordering, so each round consists of disjoint pairs
whose rotations commute and are applied together.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .types import HsiCube


class JacobiConvergenceError(RuntimeError):
    pass


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """n-1 rounds (n even) of n/2 disjoint pairs covering all pairs once."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                ps.append(min(a, b))
                qs.append(max(a, b))
        rounds.append((np.array(ps, dtype=np.int64), np.array(qs, dtype=np.int64)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def off_diagonal_norm(a: np.ndarray) -> float:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def jacobi_eigh(a: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100):
    """Eigenpairs of symmetric ``a`` (unsorted); columns of V are eigenvectors.

    Converged when the off-diagonal Frobenius norm is below ``tol * |trace|``.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got {a.shape}")
    if not np.allclose(a, a.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    threshold = tol * abs(np.trace(a))
    rounds = _round_robin(n) if n > 1 else []
    for sweep in range(max_sweeps + 1):
        if off_diagonal_norm(a) <= threshold:
            return np.diag(a).copy(), v, sweep
        if sweep == max_sweeps:
            break
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            with np.errstate(over="ignore", divide="ignore"):
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            t[theta == 0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * rp - s[:, None] * rq
            a[q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = cp * c - cq * s
            a[:, q] = cp * s + cq * c
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
    raise JacobiConvergenceError(
        f"Jacobi did not converge in {max_sweeps} sweeps "
        f"(off-diagonal norm {off_diagonal_norm(a):.3e} > {threshold:.3e})")


@dataclass
class PcaModel:
    mean: np.ndarray          # [B]
    components: np.ndarray    # [k, B], orthonormal rows
    eigenvalues: np.ndarray   # [k], non-increasing

    @property
    def bands(self) -> int:
        return self.mean.shape[0]

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def transform_pixels(self, px: np.ndarray, k: int | None = None) -> np.ndarray:
        k = self.k if k is None else k
        if not 1 <= k <= self.k:
            raise ValueError(f"k={k} outside [1, {self.k}]")
        if px.shape[-1] != self.bands:
            raise ValueError(f"band mismatch: model has {self.bands}, data has {px.shape[-1]}")
        return (px - self.mean) @ self.components[:k].T

    def inverse_pixels(self, scores: np.ndarray) -> np.ndarray:
        k = scores.shape[-1]
        return scores @ self.components[:k] + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "components": self.components.tolist(),
                "eigenvalues": self.eigenvalues.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        return cls(np.asarray(d["mean"], dtype=np.float64),
                   np.asarray(d["components"], dtype=np.float64),
                   np.asarray(d["eigenvalues"], dtype=np.float64))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "PcaModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def pca_fit(pixels: np.ndarray, k: int, tol: float = 1e-10, max_sweeps: int = 100) -> PcaModel:
    x = np.asarray(pixels, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("pca_fit needs an N x B matrix with N > 1")
    b = x.shape[1]
    if not 1 <= k <= b:
        raise ValueError(f"k={k} outside [1, {b}]")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (x.shape[0] - 1)
    vals, vecs, _ = jacobi_eigh(cov, tol=tol, max_sweeps=max_sweeps)
    order = np.argsort(-vals, kind="stable")[:k]
    comps = vecs[:, order].T.copy()
    rows = np.arange(k)
    signs = np.sign(comps[rows, np.abs(comps).argmax(axis=1)])
    comps *= signs[:, None]
    return PcaModel(mean, comps, vals[order])


def pca_transform(cube: HsiCube, model: PcaModel, k: int | None = None) -> HsiCube:
    if cube.bands != model.bands:
        raise ValueError(f"band mismatch: model has {model.bands}, cube has {cube.bands}")
    scores = model.transform_pixels(cube.pixels().astype(np.float64), k)
    out = scores.T.reshape(-1, cube.height, cube.width)
    return HsiCube(out.astype(cube.data.dtype))
