"""Hausdorff dimension of planar GL carpets and the uniform-fibre criterion."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import GLSpec, LevelSystem, levels_for
from .moran import gl_profile
from .variational import TINY, OptimizeOptions, entropy

UNIFORM_TOL = 1e-10


@dataclass
class FibreReport:
    is_uniform: bool
    residuals: tuple
    values: tuple


@dataclass
class HausdorffResult:
    value: float
    p: np.ndarray
    converged: bool
    spread: float


def _planar_levels(spec) -> LevelSystem:
    if isinstance(spec, LevelSystem):
        levels = spec
    elif isinstance(spec, GLSpec):
        levels = levels_for(spec)
    else:
        raise TypeError("planar GL carpet required")
    if levels.depth != 2:
        raise ValueError(f"only defined for d = 2, got d = {levels.depth}")
    return levels


def column_marginal(p2, spec) -> np.ndarray:
    """q_i = sum over the cells of column i."""
    levels = _planar_levels(spec)
    p2 = np.asarray(p2, dtype=float)
    return np.bincount(levels.parents[1], weights=p2, minlength=len(levels.symbols[0]))


def hausdorff_objective(p, levels: LevelSystem) -> float:
    p = np.asarray(p, dtype=float)
    logs = levels.log_ratios[1]
    chi1 = float(-p @ logs[:, 0])
    chi2 = float(-p @ logs[:, 1])
    q = np.bincount(levels.parents[1], weights=p, minlength=len(levels.symbols[0]))
    return entropy(p) / chi2 + (1 - chi1 / chi2) * entropy(q) / chi1


def _objective_and_gradient(p: np.ndarray, levels: LevelSystem):
    logs = levels.log_ratios[1]
    parents = levels.parents[1]
    q = np.bincount(parents, weights=p, minlength=len(levels.symbols[0]))
    a, h = entropy(p), entropy(q)
    b = float(-p @ logs[:, 1])
    c = float(-p @ logs[:, 0])
    value = a / b + h / c - h / b
    da = -(np.log(np.maximum(p, TINY)) + 1.0)
    dh = -(np.log(np.maximum(q, TINY)) + 1.0)[parents]
    db = -logs[:, 1]
    dc = -logs[:, 0]
    grad = da / b - a * db / b**2 + dh / c - h * dc / c**2 - dh / b + h * db / b**2
    return value, grad


def _ascend(p: np.ndarray, levels: LevelSystem, options: OptimizeOptions):
    value, g = _objective_and_gradient(p, levels)
    eta = options.step
    for it in range(options.max_iter):
        kkt = float(np.max(p * np.abs(g - p @ g)))
        if kkt <= options.kkt_tol:
            return p, value, True
        while True:
            z = np.log(np.maximum(p, TINY)) + eta * (g - g.max())
            w = np.exp(z - z.max())
            cand = w / w.sum()
            cval = hausdorff_objective(cand, levels)
            if cval >= value or eta < 1e-14:
                break
            eta *= 0.5
        if cval < value or np.array_equal(cand, p):
            return p, value, kkt <= options.kkt_tol * 100
        p = cand
        value, g = _objective_and_gradient(p, levels)
        eta = min(eta * 1.5, 1e6)
    return p, value, False


def hausdorff_dim_2d(spec, options: OptimizeOptions | None = None) -> HausdorffResult:
    """Maximise the planar Hausdorff variational objective by multi-start exponentiated gradient."""
    options = options or OptimizeOptions()
    levels = _planar_levels(spec)
    size = len(levels.symbols[1])
    starts = [np.full(size, 1.0 / size)]
    for r in range(options.restarts):
        rng = np.random.default_rng([options.seed, r])
        starts.append(rng.dirichlet(np.ones(size)))
    runs = [_ascend(p0, levels, options) for p0 in starts]
    best = max(runs, key=lambda r: r[1])
    values = [r[1] for r in runs]
    return HausdorffResult(best[1], best[0], best[2], max(values) - min(values))


def _simplex_grid(size: int, steps: int) -> np.ndarray:
    """All points of the simplex with coordinates in multiples of 1/steps."""
    if size == 1:
        return np.ones((1, 1))
    pts = []

    def rec(prefix, left, k):
        if k == size - 1:
            pts.append(prefix + [left])
            return
        for c in range(left + 1):
            rec(prefix + [c], left - c, k + 1)

    rec([], steps, 0)
    return np.asarray(pts, dtype=float) / steps


def _batch_objective(P: np.ndarray, levels: LevelSystem) -> np.ndarray:
    logs = levels.log_ratios[1]
    parents = levels.parents[1]
    ncol = len(levels.symbols[0])
    Q = np.zeros((P.shape[0], ncol))
    for k, par in enumerate(parents):
        Q[:, par] += P[:, k]
    with np.errstate(divide="ignore", invalid="ignore"):
        H = -np.sum(np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0), axis=1)
        Hq = -np.sum(np.where(Q > 0, Q * np.log(np.where(Q > 0, Q, 1.0)), 0.0), axis=1)
    chi1 = -(P @ logs[:, 0])
    chi2 = -(P @ logs[:, 1])
    return H / chi2 + (1 - chi1 / chi2) * Hq / chi1


def hausdorff_dim_2d_grid(spec, resolution: float = 1e-2, refine_to: float = 1e-4,
                          max_cells: int = 4) -> tuple:
    """Grid-search oracle on the cell simplex: coarse grid, then local refinement.

    Independent of any gradient information; restricted to small alphabets.
    """
    levels = _planar_levels(spec)
    size = len(levels.symbols[1])
    if size > max_cells:
        raise ValueError(f"grid oracle limited to {max_cells} cells, got {size}")
    steps = round(1 / resolution)
    grid = _simplex_grid(size, steps)
    vals = _batch_objective(grid, levels)
    k = int(np.argmax(vals))
    best_p, best_v = grid[k], float(vals[k])
    h = resolution
    while h > refine_to:
        h_new = h / 10
        # local lattice of radius h around the incumbent
        span = np.arange(-10, 11) * h_new
        axes = [span] * (size - 1)
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, size - 1)
        cand = np.empty((mesh.shape[0], size))
        cand[:, :-1] = best_p[:-1] + mesh
        cand[:, -1] = 1 - cand[:, :-1].sum(axis=1)
        cand = cand[np.all(cand >= 0, axis=1)]
        vals = _batch_objective(cand, levels)
        k = int(np.argmax(vals))
        if vals[k] > best_v:
            best_p, best_v = cand[k], float(vals[k])
        h = h_new
    return best_v, best_p


def uniform_fibre_check(spec) -> FibreReport:
    """Per-column residual of sum_j ratio(i,j)**(s_2 - s_1) - 1."""
    if not isinstance(spec, GLSpec) or spec.dimension != 2:
        raise ValueError("uniform fibre check needs a planar GL carpet")
    prof = gl_profile(spec)
    s1, s2 = prof.values
    levels = levels_for(spec)
    terms = np.exp((s2 - s1) * levels.log_ratios[1][:, 1])
    sums = np.bincount(levels.parents[1], weights=terms, minlength=len(levels.symbols[0]))
    res = tuple(float(x - 1.0) for x in sums)
    return FibreReport(all(abs(r) <= UNIFORM_TOL for r in res), res, (s1, s2))


def mcmullen_dimension(column_counts, columns: int, rows: int) -> float:
    """Closed form log_m sum_j t_j**(log m / log n) for an m-by-n grid carpet."""
    return math.log(sum(t ** (math.log(columns) / math.log(rows)) for t in column_counts)) / math.log(columns)
