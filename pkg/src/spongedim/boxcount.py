"""Exact symbolic box counting with approximate cubes.

An approximate cube at scale delta is a word read in blocks: first symbols
of the full alphabet until the earliest coordinate reaches delta, then
symbols projected onto the coordinates still running, and so on until every
coordinate has stopped.  Cubes are counted by block composition: the words
of a block with symbol counts ``c`` that stop exactly at their last symbol
``j`` number ``multinomial(c - e_j)``, and everything downstream depends only
on ``c``.  Counts are exact integers.
"""
from __future__ import annotations

import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .model import BaranskiSpec, GLSpec, SelfSimilarSpec, SpongeSpec, levels_for, project_alphabet
from .typecount import coordinate_ratio, coordinate_ratios, make_scale, multinomial, parse_delta, sigma_order
from .variational import TypeProfile, dominant_type, entropy, stopping_constants

DEFAULT_BUDGET = 10**8


class BudgetExceeded(RuntimeError):
    def __init__(self, message: str, work: int, partial_total: int | None = None):
        self.work = work
        self.partial_total = partial_total
        super().__init__(message)


def default_budget() -> int:
    env = os.environ.get("SPONGEDIM_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


@dataclass(frozen=True)
class CubeRecord:
    blocks: tuple  # top level first; empty tuples for zero-length blocks
    stoppings: tuple  # L for coordinates 1..d
    sigma: tuple
    tie: bool


@dataclass
class CountReport:
    delta: object
    total: int
    per_sigma: dict
    ties: int
    per_type: dict | None = None
    dominant_type: tuple | None = None
    dominant_count: int | None = None

    def to_dict(self) -> dict:
        out = {
            "delta": _render_delta(self.delta),
            "total": str(self.total),
            "per_sigma": {",".join(map(str, s)): str(n) for s, n in sorted(self.per_sigma.items())},
            "ties": str(self.ties),
        }
        if self.per_type is not None:
            out["per_type"] = [
                {"sigma": list(k[0]), "type": _render_blocks(k[1]), "count": str(n)}
                for k, n in sorted(self.per_type.items(), key=lambda kv: _sort_key(kv[0]))
            ]
            out["dominant_type"] = {
                "sigma": list(self.dominant_type[0]),
                "type": _render_blocks(self.dominant_type[1]),
                "count": str(self.dominant_count),
            }
        else:
            out["per_type"] = None
            out["dominant_type"] = None
        return out


def _render_delta(delta):
    return str(delta) if not isinstance(delta, float) else delta


def _render_blocks(blocks):
    return [list(b) if b is not None else [] for b in blocks]


def _sort_key(key):
    sigma, blocks = key
    return sigma, tuple(b if b is not None else () for b in blocks)


# --------------------------------------------------------------------------- engine


class _Counter:
    """Shared machinery for one spec at one scale."""

    def __init__(self, spec: SpongeSpec, delta, budget: int | None = None):
        self.spec = spec
        self.delta = parse_delta(delta)
        self.budget = default_budget() if budget is None else budget
        self.work = 0
        if isinstance(spec, SelfSimilarSpec):
            self.d = 1
        else:
            self.d = spec.dimension
        self.scales = [make_scale(coordinate_ratios(spec, n), self.delta) for n in range(1, self.d + 1)]
        self.zero = tuple(0 if s.exact else 0.0 for s in self.scales)
        self._alphabets = {}
        self._phases = {}
        self._counts = {}

    def tick(self, k: int = 1) -> None:
        self.work += k
        if self.work > self.budget:
            raise BudgetExceeded(
                f"enumeration work exceeded the budget of {self.budget} units", self.work
            )

    def alphabet(self, running: tuple) -> tuple:
        """(symbols, weights) for the symbols that drive the coordinates in ``running``."""
        if running in self._alphabets:
            return self._alphabets[running]
        spec = self.spec
        if isinstance(spec, SelfSimilarSpec):
            symbols = list(range(1, len(spec.ratios) + 1))
            weights = [(self.scales[0].weights[spec.ratios[s - 1]],) for s in symbols]
        elif isinstance(spec, GLSpec):
            n = len(running)
            if running != tuple(range(1, n + 1)):
                raise RuntimeError(
                    f"coordinates {running} still running; the GL coordinate ordering is violated"
                )
            symbols = spec.index_set(n)
            weights = [
                tuple(self.scales[c - 1].weights[spec.ratio_of(s[:c])] for c in running) for s in symbols
            ]
        else:
            symbols = project_alphabet(spec.alphabet, running)
            if len(running) == 1:
                symbols = [(s,) for s in symbols]
            weights = [
                tuple(self.scales[c - 1].weights[spec.ratio(c, s[k])] for k, c in enumerate(running))
                for s in symbols
            ]
        result = (tuple(symbols), tuple(weights))
        self._alphabets[running] = result
        return result

    def reached(self, running: tuple, W: tuple) -> tuple:
        return tuple(c for c, w in zip(running, W) if self.scales[c - 1].reached(w))

    def phase(self, running: tuple, W: tuple) -> dict:
        """Block compositions ending the current block.

        Returns {counts: (multiplicity, stopped coordinates, totals of the
        coordinates still running)}.
        """
        key = (running, W)
        if key in self._phases:
            return self._phases[key]
        symbols, weights = self.alphabet(running)
        A = len(symbols)
        R = len(running)
        out = {}

        def totals(counts):
            acc = list(W)
            for j, c in enumerate(counts):
                if c:
                    w = weights[j]
                    for r in range(R):
                        acc[r] += c * w[r]
            return acc

        def close(prefix: tuple):
            for j in range(A):
                c = list(prefix)
                c[j] += 1
                c = tuple(c)
                if c in out:
                    continue
                acc = totals(c)
                stopped = self.reached(running, acc)
                if stopped:
                    rest = tuple(a for a, coord in zip(acc, running) if coord not in stopped)
                    out[c] = (stopped, rest)

        def rec(j: int, acc: list, prefix: tuple):
            self.tick()
            if j == A:
                close(prefix)
                return
            cnt = 0
            cur = acc
            while True:
                rec(j + 1, cur, prefix + (cnt,))
                cnt += 1
                cur = [a + cnt * w for a, w in zip(acc, weights[j])]
                if self.reached(running, cur):
                    break

        rec(0, list(W), ())
        # only words whose last symbol triggers the stop belong to the block
        result = {}
        for c, (stopped, rest) in out.items():
            mult = 0
            for j in range(A):
                if c[j] == 0:
                    continue
                prev = list(c)
                prev[j] -= 1
                if not self.reached(running, totals(prev)):
                    mult += multinomial(tuple(prev))
            result[c] = (mult, stopped, rest)
        self._phases[key] = result
        return result

    def count(self, running: tuple, W: tuple) -> Counter:
        """Counter of stop-event sequences -> number of cubes."""
        key = (running, W)
        if key in self._counts:
            return self._counts[key]
        res = Counter()
        for c, (mult, stopped, rest) in self.phase(running, W).items():
            if not mult:
                continue
            remaining = tuple(x for x in running if x not in stopped)
            if not remaining:
                res[(stopped,)] += mult
                continue
            for seq, n in self.count(remaining, rest).items():
                res[(stopped,) + seq] += mult * n
        self._counts[key] = res
        return res

    def histogram(self, running: tuple, W: tuple):
        """Yield (stop events, block compositions keyed by running set, multiplicity)."""
        for c, (mult, stopped, rest) in self.phase(running, W).items():
            if not mult:
                continue
            remaining = tuple(x for x in running if x not in stopped)
            here = ((running, c),)
            if not remaining:
                yield (stopped,), here, mult
                continue
            for seq, blocks, n in self.histogram(remaining, rest):
                yield (stopped,) + seq, here + blocks, mult * n

    def sigma_of(self, events: tuple) -> tuple:
        sigma = []
        for ev in reversed(events):
            sigma.extend(sorted(ev))
        return tuple(sigma)

    def type_key(self, events: tuple, blocks: tuple) -> tuple:
        by_size = {len(r): c for r, c in blocks}
        return self.sigma_of(events), tuple(by_size.get(n) for n in range(self.d, 0, -1))


def count_cubes(spec: SpongeSpec, delta, types: bool = False, budget: int | None = None) -> CountReport:
    """Exact number of delta-approximate cubes, split by ordering class and optionally by type."""
    eng = _Counter(spec, delta, budget)
    start = tuple(range(1, eng.d + 1))
    if not types:
        try:
            seqs = eng.count(start, eng.zero)
        except BudgetExceeded as exc:
            raise BudgetExceeded(str(exc), exc.work, None) from None
        per_sigma = Counter()
        ties = 0
        for seq, n in seqs.items():
            per_sigma[eng.sigma_of(seq)] += n
            if any(len(ev) > 1 for ev in seq):
                ties += n
        return CountReport(eng.delta, sum(seqs.values()), dict(per_sigma), ties)

    per_type = Counter()
    per_sigma = Counter()
    ties = 0
    total = 0
    try:
        for events, blocks, n in eng.histogram(start, eng.zero):
            key = eng.type_key(events, blocks)
            per_type[key] += n
            per_sigma[key[0]] += n
            if any(len(ev) > 1 for ev in events):
                ties += n
            total += n
    except BudgetExceeded as exc:
        raise BudgetExceeded(str(exc), exc.work, total) from None
    best = max(per_type.items(), key=lambda kv: (kv[1], _neg_key(kv[0])))
    return CountReport(eng.delta, total, dict(per_sigma), ties, dict(per_type), best[0], best[1])


def _neg_key(key):
    # max() with ties resolved toward the lexicographically smallest key
    sigma, blocks = key
    flat = list(sigma) + [x for b in blocks if b is not None for x in b]
    return tuple(-x for x in flat)


def iter_cubes(spec: SpongeSpec, delta, budget: int | None = None) -> Iterator[CubeRecord]:
    """Stream every approximate cube, built symbol by symbol."""
    eng = _Counter(spec, delta, budget)
    d = eng.d

    def rec(running, W, pos, done_blocks, current, stops):
        symbols, weights = eng.alphabet(running)
        for s, w in zip(symbols, weights):
            eng.tick()
            acc = tuple(a + b for a, b in zip(W, w))
            stopped = eng.reached(running, acc)
            block = current + (s,)
            if not stopped:
                yield from rec(running, acc, pos + 1, done_blocks, block, stops)
                continue
            new_stops = dict(stops)
            for c in stopped:
                new_stops[c] = pos + 1
            remaining = tuple(c for c in running if c not in stopped)
            # blocks for the levels skipped by a simultaneous stop are empty
            skipped = ((),) * (len(stopped) - 1)
            blocks = done_blocks + (block,) + skipped
            if not remaining:
                L = tuple(new_stops[c] for c in range(1, d + 1))
                sigma, tie = sigma_order(L)
                yield CubeRecord(blocks, L, sigma, tie)
                continue
            rest = tuple(a for a, c in zip(acc, running) if c not in stopped)
            yield from rec(remaining, rest, pos + 1, blocks, (), new_stops)

    yield from rec(tuple(range(1, d + 1)), eng.zero, 0, (), (), {})


def block_supports(spec: SpongeSpec, sigma: Sequence[int]) -> tuple:
    """Supports of the blocks of a sigma-ordered cube, level 1 first, in sorted-coordinate order."""
    eng = _Counter(spec, "1/2", budget=1)
    supports = []
    for n in range(1, eng.d + 1):
        running = tuple(sorted(sigma[:n]))
        supports.append(eng.alphabet(running)[0])
    return tuple(supports)


def cube_type(cube: CubeRecord, spec: SpongeSpec, delta=None) -> TypeProfile:
    """Empirical multidimensional type of a cube, level 1 first.

    Baranski blocks are re-expressed on the sigma-ordered projected
    alphabets used by the variational machinery; empty blocks become zero
    vectors (see ``TypeProfile.empty``).
    """
    d = len(cube.stoppings)
    if len(cube.blocks) != d:
        raise ValueError("malformed cube: block count does not match dimension")
    levels = levels_for(spec, cube.sigma) if isinstance(spec, BaranskiSpec) else levels_for(spec)
    blocks = []
    for n in range(1, d + 1):
        raw = cube.blocks[d - n]
        support = levels.symbols[n - 1]
        vec = np.zeros(len(support))
        if raw:
            pos = {s: k for k, s in enumerate(support)}
            running = tuple(sorted(cube.sigma[:n]))
            for s in raw:
                vec[pos[_to_sigma_order(s, running, cube.sigma[:n], spec)]] += 1
            vec /= len(raw)
        blocks.append(vec)
    return TypeProfile(tuple(blocks), levels.symbols)


def _to_sigma_order(symbol, running, sigma_prefix, spec):
    if isinstance(spec, SelfSimilarSpec):
        return (symbol,)
    if isinstance(spec, GLSpec):
        return symbol
    sym = symbol if isinstance(symbol, tuple) else (symbol,)
    by_coord = dict(zip(running, sym))
    return tuple(by_coord[c] for c in sigma_prefix)


def key_to_profile(spec: SpongeSpec, key) -> TypeProfile:
    """Type-histogram key -> TypeProfile on the sigma-ordered supports (level 1 first)."""
    sigma, blocks = key
    d = len(blocks)
    levels = levels_for(spec, sigma) if isinstance(spec, BaranskiSpec) else levels_for(spec)
    supports = block_supports(spec, sigma)
    out = []
    for n in range(1, d + 1):
        counts = blocks[d - n]
        vec = np.zeros(len(levels.symbols[n - 1]))
        if counts is not None and sum(counts):
            pos = {s: k for k, s in enumerate(levels.symbols[n - 1])}
            running = tuple(sorted(sigma[:n]))
            for s, c in zip(supports[n - 1], counts):
                vec[pos[_to_sigma_order(s, running, sigma[:n], spec)]] += c
            vec /= vec.sum()
        out.append(vec)
    return TypeProfile(tuple(out), levels.symbols)


# --------------------------------------------------------------------------- fits and reports


@dataclass
class EmpiricalFit:
    slope: float
    table: list  # (delta, N, log N / -log delta)
    residual: float


def empirical_dimension(spec: SpongeSpec, deltas: Sequence, budget: int | None = None) -> EmpiricalFit:
    """Least-squares slope of log N_delta against -log delta."""
    if len(deltas) < 3:
        raise ValueError("need at least three scales")
    rows = []
    for delta in deltas:
        rep = count_cubes(spec, delta, budget=budget)
        x = -math.log(rep.delta)
        rows.append((rep.delta, rep.total, math.log(rep.total) / x, x, math.log(rep.total)))
    x = np.array([r[3] for r in rows])
    y = np.array([r[4] for r in rows])
    slope = float(np.polyfit(x, y, 1)[0])
    table = [(r[0], r[1], r[2]) for r in rows]
    residual = max(abs(r[2] - slope) for r in rows)
    return EmpiricalFit(slope, table, residual)


@dataclass
class DominantClassReport:
    delta: object
    key: tuple
    count: int
    total: int
    n_types: int
    profile: TypeProfile
    distance: float | None
    ratio: float
    box_dimension: float
    sandwich_ok: bool
    growth_value: float | None = None
    growth_lower_ok: bool | None = None
    growth_upper_ok: bool | None = None
    details: dict = field(default_factory=dict)


def dominant_class_report(spec: SpongeSpec, delta, budget: int | None = None) -> DominantClassReport:
    """Largest type class at scale delta, compared against the closed-form dominant type."""
    from .moran import dimension_profile

    rep = count_cubes(spec, delta, types=True, budget=budget)
    key, count = rep.dominant_type, rep.dominant_count
    prof = dimension_profile(spec)
    P = key_to_profile(spec, key)
    x = -math.log(rep.delta)
    n_types = len(rep.per_type)
    sandwich = count <= rep.total <= count * n_types
    distance = None
    value = lower_ok = upper_ok = None
    if not any(P.empty):
        sigma = key[0] if isinstance(spec, BaranskiSpec) else None
        levels = levels_for(spec, sigma) if sigma else levels_for(spec)
        if not isinstance(spec, BaranskiSpec) or tuple(sigma) == tuple(prof.permutation):
            distance = P.distance(dominant_type(levels, prof.values))
        C = stopping_constants(P, levels).values
        value = float(sum(c * entropy(b) for c, b in zip(C, P.blocks)))
        poly = sum(levels.sizes())
        logc = math.log(count)
        upper_ok = logc <= value * x + 1e-9
        lower_ok = logc >= value * x - poly * math.log(x) - 1e-9
    return DominantClassReport(
        rep.delta, key, count, rep.total, n_types, P, distance, math.log(count) / x,
        prof.box_dimension, sandwich, value, lower_ok, upper_ok,
    )
