"""Method-of-types combinatorics and delta-stoppings.

Type-class sizes are exact Python integers.  Stopping comparisons run on
integer exponents whenever a coordinate's ratios are exact fractions that
are all integer powers of one common base; otherwise on float log sums with
a 1e-12 tolerance that counts near-equality as having reached the scale.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

STOP_TOL = 1e-12
DEFAULT_TYPE_CAP = 10**7
_FACTOR_LIMIT = 10**12


class CapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class LevelType:
    counts: tuple

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def size(self) -> int:
        return len(self.counts)

    def frequencies(self) -> tuple:
        n = self.n
        return tuple(Fraction(c, n) for c in self.counts)

    def as_vector(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n

    def entropy(self) -> float:
        n = self.n
        return -sum(c / n * math.log(c / n) for c in self.counts if c)


def type_of(word: Sequence[int], alphabet_size: int) -> LevelType:
    if not word:
        raise ValueError("word must be non-empty")
    counts = [0] * alphabet_size
    for s in word:
        if not 1 <= s <= alphabet_size:
            raise ValueError(f"symbol {s} out of range 1..{alphabet_size}")
        counts[s - 1] += 1
    return LevelType(tuple(counts))


def number_of_types(n: int, alphabet_size: int) -> int:
    return math.comb(n + alphabet_size - 1, alphabet_size - 1)


def compositions(n: int, parts: int):
    """All tuples of ``parts`` non-negative integers summing to ``n`` (lexicographically descending)."""
    if parts == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in compositions(n - first, parts - 1):
            yield (first,) + rest


def enumerate_types(n: int, alphabet_size: int, cap: int = DEFAULT_TYPE_CAP) -> list:
    if n < 1 or alphabet_size < 1:
        raise ValueError("need n >= 1 and alphabet size >= 1")
    if number_of_types(n, alphabet_size) > cap:
        raise CapExceeded(f"{number_of_types(n, alphabet_size)} types exceed the cap {cap}")
    return [LevelType(c) for c in compositions(n, alphabet_size)]


@lru_cache(maxsize=4096)
def multinomial(counts: tuple) -> int:
    """n! / prod(c!) computed exactly as a product of binomials."""
    total, result = 0, 1
    for c in counts:
        total += c
        result *= math.comb(total, c)
    return result


def type_class_size(t: LevelType) -> int:
    return multinomial(tuple(t.counts))


def entropy_bounds_exact(t: LevelType) -> tuple:
    """Check (n+1)^-N e^{nH} <= #T <= e^{nH} in exact integer arithmetic.

    e^{nH} = n^n / prod c^c, so both sides reduce to integer comparisons.
    Returns (lower_ok, upper_ok).
    """
    n, N = t.n, t.size
    size = type_class_size(t)
    denom = 1
    for c in t.counts:
        denom *= c**c
    upper_ok = size * denom <= n**n
    lower_ok = n**n <= size * denom * (n + 1) ** N
    return lower_ok, upper_ok


def entropy_bounds_float(t: LevelType) -> tuple:
    """Float bounds ((n+1)^-N e^{nH}, e^{nH}), rounded outward by a few ulps."""
    n, N = t.n, t.size
    nh = n * t.entropy()
    upper = math.exp(nh)
    lower = math.exp(nh - N * math.log(n + 1))
    for _ in range(4):
        upper = math.nextafter(upper, math.inf)
        lower = math.nextafter(lower, 0.0)
    return lower, upper


# --------------------------------------------------------------------------- scales


def _factor(n: int) -> dict:
    out = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _exponent_vector(x: Fraction) -> dict:
    v = dict(_factor(x.numerator))
    for p, e in _factor(x.denominator).items():
        v[p] = v.get(p, 0) - e
    return v


def common_base(ratios: Iterable) -> tuple | None:
    """(base, exponents) with every ratio == base**k_i, k_i positive ints; None if no lattice.

    Only exact rationals qualify; floats always return None.
    """
    ratios = list(ratios)
    if not ratios or not all(isinstance(r, (Fraction, int)) for r in ratios):
        return None
    ratios = [Fraction(r) for r in ratios]
    if any(max(r.numerator, r.denominator) > _FACTOR_LIMIT for r in ratios):
        return None
    vecs = [_exponent_vector(r) for r in ratios]
    primes = sorted(set().union(*vecs))
    rows = [[v.get(p, 0) for p in primes] for v in vecs]
    if any(not any(row) for row in rows):
        return None
    h = 0
    for e in rows[0]:
        h = math.gcd(h, e)
    direction = [e // h for e in rows[0]]
    pivot = next(j for j, e in enumerate(direction) if e)
    mults = []
    for row in rows:
        m = row[pivot] // direction[pivot]
        if [m * e for e in direction] != row:
            return None
        mults.append(m)
    g = 0
    for m in mults:
        g = math.gcd(g, m)
    if mults[0] < 0:
        g = -g
    ks = [m // g for m in mults]
    if any(k <= 0 for k in ks):
        return None
    base = Fraction(1)
    for p, e in zip(primes, direction):
        base *= Fraction(p) ** (e * g)
    return base, ks


@dataclass(frozen=True)
class CoordinateScale:
    """Stopping arithmetic for one coordinate at one scale.

    ``weight(r)`` maps a ratio to an additive weight; a running total has
    reached the scale once ``total >= threshold - tol``.
    """

    weights: dict  # ratio -> weight
    threshold: object
    tol: float
    exact: bool

    def reached(self, total) -> bool:
        return total >= self.threshold - self.tol


def make_scale(ratios: Iterable, delta) -> CoordinateScale:
    ratios = list(dict.fromkeys(ratios))
    delta_exact = _as_fraction(delta)
    lattice = common_base(ratios) if delta_exact is not None else None
    if lattice is not None:
        base, ks = lattice
        # smallest K with base**K <= delta
        K = max(0, math.floor(math.log(delta_exact) / math.log(base)) - 2)
        while base**K > delta_exact:
            K += 1
        while K > 0 and base ** (K - 1) <= delta_exact:
            K -= 1
        return CoordinateScale({r: k for r, k in zip(ratios, ks)}, K, 0, True)
    return CoordinateScale({r: -math.log(r) for r in ratios}, -math.log(delta), STOP_TOL, False)


def _as_fraction(x) -> Fraction | None:
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    return None


def parse_delta(x) -> Fraction | float:
    """Scales given as strings are read exactly ("1/16", "0.25"); floats stay floats."""
    if isinstance(x, str):
        f = Fraction(x.strip())
    elif isinstance(x, (Fraction, int)):
        f = Fraction(x)
    else:
        f = float(x)
    if not 0 < f < 1:
        raise ValueError(f"scale must lie in (0,1), got {x!r}")
    return f


def coordinate_ratio(spec, symbol, n: int = 1):
    """Contraction ratio of ``symbol`` in coordinate ``n``.

    Symbols are integers for self-similar specs and index tuples otherwise
    (GL prefixes of length >= n, or full Baranski tuples).
    """
    from .model import BaranskiSpec, GLSpec, SelfSimilarSpec

    if isinstance(spec, SelfSimilarSpec):
        if n != 1:
            raise ValueError("self-similar sets have a single coordinate")
        s = symbol[0] if isinstance(symbol, tuple) else symbol
        return spec.ratios[s - 1]
    if isinstance(spec, GLSpec):
        return spec.ratio_of(tuple(symbol[:n]))
    if isinstance(spec, BaranskiSpec):
        return spec.ratio(n, symbol[n - 1])
    raise TypeError(f"not a sponge spec: {type(spec).__name__}")


def coordinate_ratios(spec, n: int = 1) -> list:
    """Every ratio that can occur in coordinate ``n``."""
    from .model import BaranskiSpec, GLSpec, SelfSimilarSpec

    if isinstance(spec, SelfSimilarSpec):
        return list(spec.ratios)
    if isinstance(spec, GLSpec):
        return [m.ratios[n - 1] for m in spec.maps]
    if isinstance(spec, BaranskiSpec):
        return list(spec.axes[n - 1])
    raise TypeError(f"not a sponge spec: {type(spec).__name__}")


def delta_stopping(spec, word: Iterable, delta, n: int = 1) -> int:
    """Smallest L with prod of the coordinate-n ratios of ``word[:L]`` <= delta.

    ``word`` may be any iterable, including an endless generator.
    """
    scale = make_scale(coordinate_ratios(spec, n), parse_delta(delta))
    total = 0
    for L, s in enumerate(word, start=1):
        total += scale.weights[coordinate_ratio(spec, s, n)]
        if scale.reached(total):
            return L
    raise ValueError("word exhausted before reaching the scale")


def sigma_order(stoppings: Sequence[int]) -> tuple:
    """Order coordinates by decreasing stopping level; ties go to the smaller coordinate.

    Returns (sigma, tie) with sigma 1-based: sigma[0] is the coordinate that
    stops last.
    """
    sigma = tuple(sorted(range(1, len(stoppings) + 1), key=lambda c: (-stoppings[c - 1], c)))
    tie = len(set(stoppings)) < len(stoppings)
    return sigma, tie


def block_counts(block: Sequence, support: Sequence) -> tuple:
    pos = {s: k for k, s in enumerate(support)}
    counts = [0] * len(support)
    for s in block:
        counts[pos[s]] += 1
    return tuple(counts)


def iter_words(alphabet: Sequence, length: int):
    return itertools.product(alphabet, repeat=length)
