"""Moran-type dimension equations solved by bisection.

Every equation here has a left-hand side that is strictly decreasing in its
unknown, so plain bisection on a bracket is enough and never fails.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .model import BaranskiSpec, GLSpec, LevelSystem, SelfSimilarSpec, SpongeSpec, levels_for, validate

XTOL = 1e-14
MAX_ITER = 200
DEFAULT_MAX_PERMUTATION_DIM = 8


class InvalidSpecError(ValueError):
    def __init__(self, report):
        self.report = report
        lines = "; ".join(v.message for v in report.violations[:5])
        super().__init__(f"spec fails validation: {lines}")


class PermutationBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class DimensionProfile:
    values: tuple
    permutation: tuple
    per_permutation: dict | None = field(default=None, compare=False)

    @property
    def box_dimension(self) -> float:
        return self.values[-1]

    # packing dimension coincides with the box dimension for these sponges
    packing_dimension = box_dimension


def bisect_decreasing(f: Callable[[float], float], lo: float, hi: float,
                      xtol: float = XTOL, max_iter: int = MAX_ITER) -> float:
    """Root of a strictly decreasing ``f`` with ``f(lo) >= 0``; ``hi`` is widened as needed."""
    if f(lo) <= 0:
        return lo
    step = max(hi - lo, 1.0)
    while f(hi) > 0:
        lo, hi = hi, hi + step
        step *= 2
    for _ in range(max_iter):
        if hi - lo <= xtol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def similarity_dimension(ratios: Sequence[float]) -> float:
    """Unique s >= 0 with sum(r**s) == 1."""
    logs = np.log(np.asarray([float(r) for r in ratios], dtype=float))
    if logs.size == 0 or np.any(logs >= 0):
        raise ValueError("ratios must be a non-empty list of values in (0,1)")
    return bisect_decreasing(lambda s: logsumexp(s * logs), 0.0, 1.0)


def exponents_from_values(values: Sequence[float]) -> np.ndarray:
    """(s_1, s_2 - s_1, ..., s_n - s_{n-1})."""
    v = np.asarray(values, dtype=float)
    return np.diff(v, prepend=0.0)


def level_equation_log(levels: LevelSystem, n: int, values: Sequence[float]) -> float:
    """log of the left-hand side of the level-n equation at (s_1, ..., s_n)."""
    e = exponents_from_values(values[:n])
    return float(logsumexp(levels.log_ratios[n - 1] @ e))


def solve_levels(levels: LevelSystem) -> tuple:
    values = []
    for n in range(1, levels.depth + 1):
        lower = values[-1] if values else 0.0

        def f(s, n=n):
            return level_equation_log(levels, n, values + [s])

        values.append(bisect_decreasing(f, lower, float(n)))
    return tuple(values)


def _require_valid(spec: SpongeSpec) -> None:
    report = validate(spec)
    if not report.ok:
        raise InvalidSpecError(report)


def gl_profile(spec: GLSpec | SelfSimilarSpec, check: bool = True) -> DimensionProfile:
    """Solve the nested Moran equations of a GL sponge (or a self-similar set)."""
    if check:
        _require_valid(spec)
    levels = levels_for(spec)
    return DimensionProfile(solve_levels(levels), tuple(levels.coords))


def baranski_dimension(spec: BaranskiSpec, check: bool = True,
                       max_dim: int = DEFAULT_MAX_PERMUTATION_DIM, workers: int = 1) -> DimensionProfile:
    """Sweep all coordinate orderings and keep the largest top value.

    Ties within 1e-12 go to the lexicographically smallest permutation.
    """
    if check:
        _require_valid(spec)
    d = spec.dimension
    if d > max_dim:
        raise PermutationBudgetError(
            f"{d}! orderings exceed the permutation budget (d <= {max_dim}); raise max_dim to force"
        )
    perms = list(itertools.permutations(range(1, d + 1)))

    def solve(sigma):
        return solve_levels(levels_for(spec, sigma))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(solve, perms))
    else:
        results = [solve(p) for p in perms]
    best = 0
    for k in range(1, len(perms)):
        if results[k][-1] > results[best][-1] + 1e-12:
            best = k
    table = {p: r[-1] for p, r in zip(perms, results)}
    return DimensionProfile(results[best], perms[best], table)


def dimension_profile(spec: SpongeSpec, **kwargs) -> DimensionProfile:
    if isinstance(spec, BaranskiSpec):
        return baranski_dimension(spec, **kwargs)
    return gl_profile(spec, **{k: v for k, v in kwargs.items() if k == "check"})


def residuals(levels: LevelSystem, values: Sequence[float]) -> list:
    """|LHS - 1| for each equation at the given values."""
    return [abs(math.exp(level_equation_log(levels, n, values)) - 1.0) for n in range(1, levels.depth + 1)]
