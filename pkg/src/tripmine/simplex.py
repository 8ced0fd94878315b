"""Nelder-Mead simplex minimizer."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    n_evals: int
    converged: bool


def nelder_mead(func, x0, step=0.5, xtol=1e-8, max_evals=10_000,
                alpha=1.0, gamma=2.0, rho=0.5, sigma=0.5) -> SimplexResult:
    """Minimize ``func`` from ``x0``.

    Stops when every vertex lies within ``xtol`` (max-norm) of the best vertex,
    or after ``max_evals`` objective calls.  Non-finite objective values are
    treated as +inf so the simplex walks away from them.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    n_evals = 0

    def f(x):
        nonlocal n_evals
        n_evals += 1
        v = func(x)
        return v if np.isfinite(v) else np.inf

    pts = np.vstack([x0] + [x0 + step * np.eye(dim)[i] for i in range(dim)])
    vals = np.array([f(p) for p in pts])

    while True:
        order = np.argsort(vals, kind="stable")
        pts, vals = pts[order], vals[order]
        if np.max(np.abs(pts[1:] - pts[0])) < xtol:
            return SimplexResult(pts[0].copy(), float(vals[0]), n_evals, True)
        if n_evals >= max_evals:
            return SimplexResult(pts[0].copy(), float(vals[0]), n_evals, False)

        centroid = pts[:-1].mean(axis=0)
        xr = centroid + alpha * (centroid - pts[-1])
        fr = f(xr)
        if vals[0] <= fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                pts[-1], vals[-1] = xe, fe
            else:
                pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-1]:
            xc = centroid + rho * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                pts[-1], vals[-1] = xc, fc
                continue
        else:
            xc = centroid + rho * (pts[-1] - centroid)
            fc = f(xc)
            if fc < vals[-1]:
                pts[-1], vals[-1] = xc, fc
                continue
        # shrink toward the best vertex
        pts[1:] = pts[0] + sigma * (pts[1:] - pts[0])
        vals[1:] = [f(p) for p in pts[1:]]
