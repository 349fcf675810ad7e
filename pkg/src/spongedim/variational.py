"""Entropy / Lyapunov-exponent machinery and the variational box-dimension formula.

Type profiles are stored level-first: ``profile.blocks[n-1]`` is the
probability vector on level n.  Logs are natural logs throughout.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import BaranskiSpec, LevelSystem, SpongeSpec, levels_for
from .moran import DimensionProfile, exponents_from_values

logger = logging.getLogger(__name__)

PROB_TOL = 1e-12
TINY = 1e-300


@dataclass(frozen=True)
class TypeProfile:
    blocks: tuple
    supports: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(np.asarray(b, dtype=float) for b in self.blocks))

    @property
    def depth(self) -> int:
        return len(self.blocks)

    @property
    def empty(self) -> tuple:
        """Blocks with no mass at all (zero-length blocks of an approximate cube)."""
        return tuple(bool(b.sum() == 0) for b in self.blocks)

    def top_first(self) -> tuple:
        """Blocks listed top level first, (p_d; ...; p_1)."""
        return tuple(reversed(self.blocks))

    def distance(self, other: "TypeProfile") -> float:
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.blocks, other.blocks))

    def flat(self) -> np.ndarray:
        return np.concatenate(self.blocks)

    def validate(self, levels: LevelSystem | None = None) -> None:
        for n, b in enumerate(self.blocks, start=1):
            if np.any(b < 0) or abs(b.sum() - 1.0) > PROB_TOL:
                raise ValueError(f"block {n} is not a probability vector")
            if levels is not None and b.shape != (len(levels.symbols[n - 1]),):
                raise ValueError(f"block {n} has {b.size} entries, level has {len(levels.symbols[n - 1])}")


@dataclass(frozen=True)
class StoppingConstants:
    values: tuple


def as_levels(spec_or_levels, sigma=None) -> LevelSystem:
    if isinstance(spec_or_levels, LevelSystem):
        return spec_or_levels
    return levels_for(spec_or_levels, sigma)


def entropy(p) -> float:
    """Shannon entropy in nats with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def lyapunov(p_m, n: int, spec_or_levels, m: int | None = None, sigma=None) -> float:
    """chi_n(p_m): expected -log of the coordinate-n ratio under a level-m vector.

    ``m`` defaults to the deepest level whose support size matches ``p_m``.
    """
    levels = as_levels(spec_or_levels, sigma)
    p_m = np.asarray(p_m, dtype=float)
    if m is None:
        m = _level_of(p_m, levels)
    elif p_m.size != len(levels.symbols[m - 1]):
        raise ValueError(f"vector of length {p_m.size} does not live on level {m}")
    if not 1 <= n <= m:
        raise ValueError(f"coordinate {n} must lie in 1..{m}")
    return float(-p_m @ levels.log_ratios[m - 1][:, n - 1])


def _level_of(p: np.ndarray, levels: LevelSystem) -> int:
    matches = [m for m in range(1, levels.depth + 1) if len(levels.symbols[m - 1]) == p.size]
    if not matches:
        raise ValueError(f"vector of length {p.size} matches no level support {levels.sizes()}")
    return matches[-1]


def lyapunov_table(P: TypeProfile, levels: LevelSystem) -> np.ndarray:
    """a[n-1, m-1] = chi_n(p_m) for n <= m (zeros below the diagonal)."""
    d = levels.depth
    a = np.zeros((d, d))
    for m in range(d):
        a[: m + 1, m] = -P.blocks[m] @ levels.log_ratios[m]
    return a


def _constants_from_table(a: np.ndarray) -> np.ndarray:
    d = a.shape[0]
    C = np.zeros(d)
    for n in range(d - 1, -1, -1):
        if a[n, n] <= 0:
            raise ZeroDivisionError(f"zero Lyapunov exponent in coordinate {n + 1}")
        C[n] = (1.0 - C[n + 1:] @ a[n, n + 1:]) / a[n, n]
    return C


def stopping_constants(P: TypeProfile, spec_or_levels, sigma=None) -> StoppingConstants:
    """C_d = 1/chi_d(p_d), then downward: C_n = (1 - sum_{m>n} C_m chi_n(p_m)) / chi_n(p_n)."""
    levels = as_levels(spec_or_levels, sigma)
    return StoppingConstants(tuple(_constants_from_table(lyapunov_table(P, levels))))


def objective(P: TypeProfile, spec_or_levels, sigma=None) -> float:
    """sum_n C_n(P) H(p_n)."""
    levels = as_levels(spec_or_levels, sigma)
    C = _constants_from_table(lyapunov_table(P, levels))
    return float(sum(c * entropy(b) for c, b in zip(C, P.blocks)))


def objective_and_gradient(P: TypeProfile, spec_or_levels, sigma=None):
    """Objective and its gradient in the ambient coordinates of every block.

    The gradient is taken with the blocks treated as free positive vectors
    (entropy extended as -sum p log p); reverse accumulation through the
    downward recursion for the constants.
    """
    levels = as_levels(spec_or_levels, sigma)
    d = levels.depth
    a = lyapunov_table(P, levels)
    C = _constants_from_table(a)
    H = np.array([entropy(b) for b in P.blocks])
    value = float(C @ H)

    # total derivative of the objective with respect to each C_n, C_k depends on C_n for k < n
    Cbar = np.zeros(d)
    for n in range(d):
        Cbar[n] = H[n] - sum(Cbar[k] * a[k, n] / a[k, k] for k in range(n))

    abar = np.zeros((d, d))
    for k in range(d):
        abar[k, k] = -Cbar[k] * C[k] / a[k, k]
        for m in range(k + 1, d):
            abar[k, m] = -Cbar[k] * C[m] / a[k, k]

    grads = []
    for m in range(d):
        p = P.blocks[m]
        g = -(levels.log_ratios[m][:, : m + 1] @ abar[: m + 1, m])
        g = g - C[m] * (np.log(np.maximum(p, TINY)) + 1.0)
        grads.append(g)
    return value, tuple(grads)


def numerical_gradient(P: TypeProfile, spec_or_levels, h: float = 1e-6, sigma=None) -> tuple:
    """Central finite differences of :func:`objective` in ambient coordinates."""
    levels = as_levels(spec_or_levels, sigma)
    grads = []
    for m, b in enumerate(P.blocks):
        g = np.zeros_like(b)
        for i in range(b.size):
            up = [x.copy() for x in P.blocks]
            dn = [x.copy() for x in P.blocks]
            up[m][i] += h
            dn[m][i] -= h
            g[i] = (objective(TypeProfile(up), levels) - objective(TypeProfile(dn), levels)) / (2 * h)
        grads.append(g)
    return tuple(grads)


def dominant_type(spec_or_levels, profile: DimensionProfile | Sequence[float], sigma=None) -> TypeProfile:
    """Closed-form maximiser: p_n(i) = prod_l ratio_l(i)**(s_l - s_{l-1})."""
    if isinstance(profile, DimensionProfile):
        if sigma is None and isinstance(spec_or_levels, BaranskiSpec):
            sigma = profile.permutation
        values = profile.values
    else:
        values = tuple(profile)
    levels = as_levels(spec_or_levels, sigma)
    if len(values) != levels.depth:
        raise ValueError(f"profile has {len(values)} values, spec has {levels.depth} levels")
    e = exponents_from_values(values)
    blocks = tuple(np.exp(levels.log_ratios[n] @ e[: n + 1]) for n in range(levels.depth))
    return TypeProfile(blocks, levels.symbols)


def evaluate_ly_formula(spec_or_levels, P: TypeProfile, sigma=None) -> float:
    """Entropy-over-Lyapunov expansion of the objective, written out for d = 2 and d = 3."""
    levels = as_levels(spec_or_levels, sigma)
    d = levels.depth
    if d not in (2, 3):
        raise ValueError(f"explicit Lyapunov form is only written out for d = 2 or 3, got {d}")

    def chi(n, m):
        return float(-P.blocks[m - 1] @ levels.log_ratios[m - 1][:, n - 1])

    H = [None] + [entropy(b) for b in P.blocks]
    if d == 2:
        return H[2] / chi(2, 2) + (1 - chi(1, 2) / chi(2, 2)) * H[1] / chi(1, 1)
    top = 1 - chi(2, 3) / chi(3, 3)
    return (H[3] / chi(3, 3)
            + top * H[2] / chi(2, 2)
            + (1 - chi(1, 3) / chi(3, 3) - top * chi(1, 2) / chi(2, 2)) * H[1] / chi(1, 1))


# --------------------------------------------------------------------------- optimisation


@dataclass
class OptimizeOptions:
    restarts: int = 8
    seed: int = 0
    max_iter: int = 5000
    kkt_tol: float = 1e-10
    stall_tol: float = 1e-8
    step: float = 0.5
    warm_start: bool = True
    workers: int = 1


@dataclass
class RestartResult:
    start: str
    value: float
    profile: TypeProfile
    iterations: int
    converged: bool
    kkt: float


@dataclass
class OptimizeResult:
    profile: TypeProfile
    value: float
    converged: bool
    restarts: list = field(default_factory=list)

    @property
    def spread(self) -> float:
        vals = [r.value for r in self.restarts]
        return max(vals) - min(vals) if vals else 0.0


def kkt_residual(P: TypeProfile, grads) -> float:
    """Largest p_i |g_i - <p, g>| over blocks: zero exactly at interior stationary points."""
    worst = 0.0
    for p, g in zip(P.blocks, grads):
        worst = max(worst, float(np.max(p * np.abs(g - p @ g))))
    return worst


def _eg_step(P: TypeProfile, grads, eta: float) -> TypeProfile:
    blocks = []
    for p, g in zip(P.blocks, grads):
        z = np.log(np.maximum(p, TINY)) + eta * (g - g.max())
        z -= z.max()
        w = np.exp(z)
        blocks.append(w / w.sum())
    return TypeProfile(blocks, P.supports)


def ascend(P: TypeProfile, levels: LevelSystem, options: OptimizeOptions):
    """Exponentiated-gradient ascent with backtracking; returns (P, value, iters, converged, kkt).

    Stops once the KKT residual is below ``options.kkt_tol`` or no step
    improves the objective any more (float resolution reached).
    """
    value, grads = objective_and_gradient(P, levels)
    kkt = kkt_residual(P, grads)
    eta = options.step
    flat = 0
    it = 0
    for it in range(options.max_iter):
        if kkt <= options.kkt_tol:
            return P, value, it, True, kkt
        while True:
            cand = _eg_step(P, grads, eta)
            cval = objective(cand, levels)
            if cval >= value or eta < 1e-16:
                break
            eta *= 0.5
        if cval < value:
            break
        flat = flat + 1 if cval - value <= 4e-16 * abs(value) else 0
        P = cand
        value, grads = objective_and_gradient(P, levels)
        kkt = kkt_residual(P, grads)
        if flat >= 25:
            break
        eta = min(eta * 1.5, 1e6)
    return P, value, it + 1, kkt <= options.stall_tol, kkt


def random_profile(levels: LevelSystem, rng: np.random.Generator, alpha: float = 1.0) -> TypeProfile:
    return TypeProfile(tuple(rng.dirichlet(np.full(len(s), alpha)) for s in levels.symbols), levels.symbols)


def maximize_objective(spec_or_levels, options: OptimizeOptions | None = None, sigma=None,
                       profile: DimensionProfile | None = None) -> OptimizeResult:
    """Numerically maximise the variational objective over the product of simplices.

    Starts from the closed-form dominant type (when ``options.warm_start``)
    plus ``options.restarts`` random interior points, each with its own
    seeded generator.  The best value wins; values within 1e-9 are broken by
    the lexicographically smallest flattened profile.
    """
    options = options or OptimizeOptions()
    levels = as_levels(spec_or_levels, sigma)
    starts = []
    if options.warm_start:
        if profile is None:
            from .moran import solve_levels
            profile = DimensionProfile(solve_levels(levels), levels.coords)
        starts.append(("dominant", dominant_type(levels, profile)))
    for r in range(options.restarts):
        rng = np.random.default_rng([options.seed, r])
        starts.append((f"random-{r}", random_profile(levels, rng)))

    def run(item):
        name, P0 = item
        P, value, iters, ok, kkt = ascend(P0, levels, options)
        if not ok:
            logger.warning("restart %s stopped after %d iterations (kkt %.3g)", name, iters, kkt)
        return RestartResult(name, value, P, iters, ok, kkt)

    if options.workers > 1:
        with ThreadPoolExecutor(options.workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(s) for s in starts]

    best = results[0]
    for r in results[1:]:
        if r.value > best.value + 1e-9:
            best = r
        elif abs(r.value - best.value) <= 1e-9 and tuple(r.profile.flat()) < tuple(best.profile.flat()):
            best = r
    return OptimizeResult(best.profile, best.value, best.converged, results)


def bedford_mcmullen_constants(ratios: Sequence[float]) -> tuple:
    """Stopping constants when every map shares the diagonal ratios ``ratios`` (decreasing)."""
    inv = [1.0 / abs(math.log(r)) for r in ratios]
    return tuple(inv[n] - inv[n + 1] for n in range(len(inv) - 1)) + (inv[-1],)
