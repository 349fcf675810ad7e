"""Sponge specifications: self-similar sets, Gatzouras-Lalley and Baranski sponges.

Index tuples are 1-based throughout.  Ratios and translations keep whatever
numeric type they were built with; the file parser produces ``Fraction``
values so that exact lattice arithmetic stays available downstream.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Iterable, Sequence, Union

import numpy as np

Number = Union[Fraction, float, int]
Index = tuple  # tuple[int, ...]

COSC_TOL = 1e-12


class SpecError(ValueError):
    """Raised for malformed or out-of-range sponge descriptions."""


def _check_ratio(r, where: str) -> None:
    if not isinstance(r, Real) or not (0 < r < 1):
        raise SpecError(f"ratio out of range (0,1): {r!r} at {where}")


@dataclass(frozen=True)
class SelfSimilarSpec:
    ratios: tuple

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(self.ratios))
        if not self.ratios:
            raise SpecError("self-similar spec needs at least one ratio")
        for k, r in enumerate(self.ratios):
            _check_ratio(r, f"ratios[{k}]")

    @property
    def dimension(self) -> int:
        return 1

    kind = "self-similar"


@dataclass(frozen=True)
class GLMap:
    index: Index
    ratios: tuple
    translations: tuple

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(int(i) for i in self.index))
        object.__setattr__(self, "ratios", tuple(self.ratios))
        object.__setattr__(self, "translations", tuple(self.translations))


@dataclass(frozen=True)
class GLSpec:
    dimension: int
    maps: tuple

    kind = "gatzouras-lalley"

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        d = self.dimension
        if d < 1:
            raise SpecError(f"dimension must be >= 1, got {d}")
        if not self.maps:
            raise SpecError("GL spec needs at least one map")
        for k, m in enumerate(self.maps):
            if not (len(m.index) == len(m.ratios) == len(m.translations) == d):
                raise SpecError(
                    f"dimension mismatch in maps[{k}]: declared d={d}, got index "
                    f"{len(m.index)}, ratios {len(m.ratios)}, translations {len(m.translations)}"
                )
            for c, r in enumerate(m.ratios):
                _check_ratio(r, f"maps[{k}].ratios[{c}]")
            if any(i < 1 for i in m.index):
                raise SpecError(f"index entries are 1-based, got {m.index} in maps[{k}]")

    def index_set(self, n: int) -> list:
        """Sorted distinct prefixes of length ``n`` (the set I_n)."""
        return sorted({project_prefix(m.index, n) for m in self.maps})

    def ratio_of(self, prefix: Index):
        """Contraction ratio in coordinate ``len(prefix)`` for a prefix."""
        n = len(prefix)
        for m in self.maps:
            if m.index[:n] == prefix:
                return m.ratios[n - 1]
        raise KeyError(prefix)


@dataclass(frozen=True)
class BaranskiSpec:
    dimension: int
    axes: tuple  # axes[n] = ratios of the base IFS in coordinate n+1
    alphabet: tuple

    kind = "baranski"

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(tuple(a) for a in self.axes))
        object.__setattr__(self, "alphabet", tuple(tuple(int(i) for i in t) for t in self.alphabet))
        d = self.dimension
        if len(self.axes) != d:
            raise SpecError(f"dimension mismatch: declared d={d}, got {len(self.axes)} axes")
        for n, axis in enumerate(self.axes):
            if not axis:
                raise SpecError(f"axis {n + 1} has no ratios")
            for k, r in enumerate(axis):
                _check_ratio(r, f"axes[{n}].ratios[{k}]")
        for k, t in enumerate(self.alphabet):
            if len(t) != d:
                raise SpecError(f"dimension mismatch: alphabet[{k}] has length {len(t)}, expected {d}")

    def translation(self, n: int, i: int):
        """Forced translation t_{n,i} of the i-th map on axis n (both 1-based)."""
        return sum(self.axes[n - 1][: i - 1], type(self.axes[n - 1][0])(0))

    def ratio(self, n: int, i: int):
        return self.axes[n - 1][i - 1]


SpongeSpec = Union[SelfSimilarSpec, GLSpec, BaranskiSpec]


def project_prefix(index: Sequence[int], ell: int) -> Index:
    """First ``ell`` entries of ``index``."""
    if not 1 <= ell <= len(index):
        raise ValueError(f"prefix length {ell} out of range for index of length {len(index)}")
    return tuple(index[:ell])


def project_alphabet(alphabet: Iterable[Sequence[int]], coords: Sequence[int]) -> list:
    """Distinct restrictions of the tuples in ``alphabet`` to ``coords`` (1-based).

    The order of ``coords`` is kept inside each tuple; a single coordinate
    yields plain integers.
    """
    coords = tuple(coords)
    if not coords:
        raise ValueError("coordinate subset must be non-empty")
    if len(coords) == 1:
        c = coords[0] - 1
        return sorted({t[c] for t in alphabet})
    return sorted({tuple(t[c - 1] for c in coords) for t in alphabet})


# --------------------------------------------------------------------------- validation


@dataclass(frozen=True)
class Violation:
    kind: str
    indices: tuple
    message: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def add(self, kind: str, indices, message: str) -> None:
        self.violations.append(Violation(kind, tuple(indices), message))

    def __bool__(self):
        return self.ok


def validate(spec: SpongeSpec) -> ValidationReport:
    """Check every structural invariant; violations are returned, not raised."""
    report = ValidationReport()
    if isinstance(spec, SelfSimilarSpec):
        for k, r in enumerate(spec.ratios):
            if not 0 < r < 1:
                report.add("ratio", (k + 1,), f"ratio {r} not in (0,1)")
    elif isinstance(spec, GLSpec):
        _validate_gl(spec, report)
    elif isinstance(spec, BaranskiSpec):
        _validate_baranski(spec, report)
    else:
        raise TypeError(f"not a sponge spec: {type(spec).__name__}")
    return report


def _validate_gl(spec: GLSpec, report: ValidationReport) -> None:
    d = spec.dimension
    maps = spec.maps

    seen = {}
    for m in maps:
        if m.index in seen:
            report.add("duplicate", (m.index,), f"index {m.index} appears more than once")
        seen[m.index] = m

    # coordinate n of a map may only depend on its length-n prefix
    for n in range(1, d + 1):
        groups = {}
        for m in maps:
            groups.setdefault(m.index[:n], []).append(m)
        for prefix, members in groups.items():
            first = members[0]
            for other in members[1:]:
                if (other.ratios[n - 1] != first.ratios[n - 1]
                        or other.translations[n - 1] != first.translations[n - 1]):
                    report.add(
                        "prefix", (first.index, other.index),
                        f"maps {first.index} and {other.index} share prefix {prefix} "
                        f"but differ in coordinate {n}",
                    )

    for n in range(1, d + 1):
        parents = {m.index[: n - 1] for m in maps}
        for parent in sorted(parents):
            children = sorted({m.index[n - 1] for m in maps if m.index[: n - 1] == parent})
            if children != list(range(1, len(children) + 1)):
                report.add(
                    "tree", (parent,),
                    f"children of prefix {parent} are {children}, expected 1..{len(children)}",
                )

    for m in maps:
        for n in range(1, d):
            if not m.ratios[n] < m.ratios[n - 1]:
                report.add(
                    "ordering", (m.index,),
                    f"coordinate ordering fails at {m.index}: ratio {m.ratios[n]} in coordinate "
                    f"{n + 1} is not below {m.ratios[n - 1]} in coordinate {n}",
                )
                break

    for m in maps:
        for n in range(d):
            t, r = m.translations[n], m.ratios[n]
            if t < -COSC_TOL or t + r > 1 + COSC_TOL:
                report.add(
                    "containment", (m.index,),
                    f"image of {m.index} leaves the unit cube in coordinate {n + 1}",
                )
                break

    boxes = [
        (m.index, [(float(t), float(t + r)) for t, r in zip(m.translations, m.ratios)])
        for m in maps
    ]
    for (ia, ba), (ib, bb) in itertools.combinations(boxes, 2):
        if _interiors_overlap(ba, bb):
            report.add("cosc", (ia, ib), f"open images of {ia} and {ib} intersect")


def _interiors_overlap(a, b, tol: float = COSC_TOL) -> bool:
    return all(max(lo1, lo2) < min(hi1, hi2) - tol for (lo1, hi1), (lo2, hi2) in zip(a, b))


def _validate_baranski(spec: BaranskiSpec, report: ValidationReport) -> None:
    for n, axis in enumerate(spec.axes, start=1):
        total = sum(axis)
        if total > 1 + (0 if isinstance(total, Fraction) else COSC_TOL):
            report.add("axis-sum", (n,), f"axis {n} ratios sum exceeds 1 ({float(total):.12g})")
    if not spec.alphabet:
        report.add("alphabet", (), "alphabet is empty")
    seen = set()
    for t in spec.alphabet:
        if t in seen:
            report.add("duplicate", (t,), f"alphabet entry {t} appears more than once")
        seen.add(t)
        for n, i in enumerate(t, start=1):
            if not 1 <= i <= len(spec.axes[n - 1]):
                report.add("range", (t,), f"entry {t}: symbol {i} out of range on axis {n}")


# --------------------------------------------------------------------------- level systems


@dataclass(frozen=True)
class LevelSystem:
    """Nested index sets with per-coordinate log ratios.

    ``symbols[n-1]`` lists the index set of level n, ``log_ratios[n-1]`` is an
    array of shape (#symbols, n) whose column l holds log of the contraction
    ratio in (ordered) coordinate l+1, and ``parents[n-1]`` maps each level-n
    symbol to the position of its length-(n-1) prefix in level n-1.
    ``coords`` records which original coordinate each level adds.
    """

    symbols: tuple
    log_ratios: tuple
    parents: tuple
    coords: tuple

    @property
    def depth(self) -> int:
        return len(self.symbols)

    def sizes(self) -> tuple:
        return tuple(len(s) for s in self.symbols)


def _build_levels(full, ratio_of, coords) -> LevelSystem:
    d = len(coords)
    symbols, logs, parents = [], [], []
    for n in range(1, d + 1):
        syms = sorted({t[:n] for t in full})
        arr = np.array([[math.log(ratio_of(s, ell)) for ell in range(1, n + 1)] for s in syms], dtype=float)
        symbols.append(tuple(syms))
        logs.append(arr)
        if n == 1:
            parents.append(np.zeros(len(syms), dtype=int))
        else:
            pos = {s: k for k, s in enumerate(symbols[n - 2])}
            parents.append(np.array([pos[s[: n - 1]] for s in syms], dtype=int))
    return LevelSystem(tuple(symbols), tuple(logs), tuple(parents), tuple(coords))


def levels_for(spec: SpongeSpec, sigma: Sequence[int] | None = None) -> LevelSystem:
    """Level system of a spec; Baranski specs need a coordinate ordering ``sigma``."""
    if isinstance(spec, SelfSimilarSpec):
        full = [(k,) for k in range(1, len(spec.ratios) + 1)]
        return _build_levels(full, lambda s, ell: spec.ratios[s[0] - 1], (1,))
    if isinstance(spec, GLSpec):
        by_prefix = {}
        for m in spec.maps:
            for n in range(1, spec.dimension + 1):
                by_prefix.setdefault(m.index[:n], m.ratios[n - 1])
        full = [m.index for m in spec.maps]
        return _build_levels(full, lambda s, ell: by_prefix[s[:ell]], tuple(range(1, spec.dimension + 1)))
    if isinstance(spec, BaranskiSpec):
        if sigma is None:
            sigma = tuple(range(1, spec.dimension + 1))
        sigma = tuple(sigma)
        if sorted(sigma) != list(range(1, spec.dimension + 1)):
            raise ValueError(f"{sigma} is not a permutation of 1..{spec.dimension}")
        full = [tuple(t[c - 1] for c in sigma) for t in spec.alphabet]
        return _build_levels(full, lambda s, ell: spec.ratio(sigma[ell - 1], s[ell - 1]), sigma)
    raise TypeError(f"not a sponge spec: {type(spec).__name__}")


# --------------------------------------------------------------------------- generators


def random_gl_spec(rng: np.random.Generator, dimension: int, max_maps: int = 12,
                   max_children: int = 3) -> GLSpec:
    """Random valid GL sponge built as nested, packed cuboids.

    Siblings are laid side by side in their own coordinate, which gives the
    COSC; each child ratio is drawn strictly below its parent's ratio.
    """
    while True:
        nodes = {(): None}
        frontier = [()]
        info = {}
        for n in range(1, dimension + 1):
            new_frontier = []
            for parent in frontier:
                k = int(rng.integers(2 if n == 1 else 1, max_children + 1))
                cap = 1.0 if n == 1 else info[parent][0]
                raw = rng.uniform(0.2, 1.0, size=k)
                total = rng.uniform(0.5, 1.0)
                rs = raw / raw.sum() * total
                rs = np.minimum(rs, cap * rng.uniform(0.4, 0.95, size=k))
                t = 0.0
                for j, r in enumerate(rs, start=1):
                    child = parent + (j,)
                    info[child] = (float(r), t)
                    t += float(r)
                    new_frontier.append(child)
            frontier = new_frontier
        if len(frontier) <= max_maps:
            break
    maps = [
        GLMap(leaf, tuple(info[leaf[:n]][0] for n in range(1, dimension + 1)),
              tuple(info[leaf[:n]][1] for n in range(1, dimension + 1)))
        for leaf in frontier
    ]
    return GLSpec(dimension, tuple(maps))
