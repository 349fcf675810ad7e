import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.optimize import brentq

from spongedim.model import BaranskiSpec, GLMap, GLSpec, SelfSimilarSpec, levels_for, random_gl_spec
from spongedim.moran import (
    InvalidSpecError, PermutationBudgetError, baranski_dimension, bisect_decreasing,
    dimension_profile, gl_profile, residuals, similarity_dimension,
)


def brute_levels(spec):
    """Nested equations solved straight from the map list with scipy's brentq."""
    d = spec.dimension
    values = []
    for n in range(1, d + 1):
        prefixes = {}
        for m in spec.maps:
            prefixes.setdefault(m.index[:n], [float(r) for r in m.ratios[:n]])

        def f(s):
            vals = values + [s]
            exps = [vals[0]] + [vals[k] - vals[k - 1] for k in range(1, n)]
            return sum(math.prod(r ** x for r, x in zip(rs, exps)) for rs in prefixes.values()) - 1

        lo = values[-1] if values else 0.0
        values.append(brentq(f, lo, lo + 5, xtol=1e-15) if f(lo) > 0 else lo)
    return values


def test_bisection_finds_root_and_widens_bracket():
    assert bisect_decreasing(lambda x: 7.5 - x, 0.0, 1.0) == pytest.approx(7.5, abs=1e-12)
    assert bisect_decreasing(lambda x: -x, 0.0, 1.0) == 0.0


@pytest.mark.parametrize("ratios,expected", [
    ((0.5, 0.5), 1.0),
    ((0.5, 0.25, 0.25), 1.0),
    ((1 / 3, 1 / 3), math.log(2) / math.log(3)),
    ((0.2,) * 4, math.log(4) / math.log(5)),
])
def test_similarity_dimension(ratios, expected):
    assert similarity_dimension(ratios) == pytest.approx(expected, abs=1e-12)


def test_similarity_dimension_rejects_bad_ratios():
    with pytest.raises(ValueError):
        similarity_dimension([])
    with pytest.raises(ValueError):
        similarity_dimension([0.5, 1.0])


def test_self_similar_spec_profile():
    prof = gl_profile(SelfSimilarSpec((F(1, 2), F(1, 4), F(1, 4))))
    assert prof.values == pytest.approx((1.0,), abs=1e-12)


def test_gl_closed_forms(gl_a, gl_u, gl_3):
    assert gl_profile(gl_a).values == pytest.approx((1, 1 + math.log(1.5) / math.log(4)), abs=1e-12)
    assert gl_profile(gl_u).values == pytest.approx((1, 1.5), abs=1e-12)
    s2 = 1 + math.log(1.5) / math.log(3)
    assert gl_profile(gl_3).values == pytest.approx((1, s2, s2 + math.log(4 / 3) / math.log(4)), abs=1e-12)


def test_packing_equals_box(gl_a):
    prof = gl_profile(gl_a)
    assert prof.packing_dimension == prof.box_dimension


@pytest.mark.parametrize("seed", range(15))
def test_random_gl_against_brentq(seed):
    spec = random_gl_spec(np.random.default_rng(seed), 1 + seed % 3)
    ours = gl_profile(spec).values
    assert ours == pytest.approx(brute_levels(spec), abs=1e-11)
    assert max(residuals(levels_for(spec), ours)) < 1e-12
    # the profile is non-decreasing in n
    assert all(b >= a - 1e-15 for a, b in zip(ours, ours[1:]))


def test_invalid_spec_is_refused():
    bad = GLSpec(2, (GLMap((1, 1), (0.25, 0.5), (0, 0)),))
    with pytest.raises(InvalidSpecError):
        gl_profile(bad)


def test_baranski_corpus(bar_a):
    prof = baranski_dimension(bar_a)
    assert prof.permutation == (1, 2)
    assert prof.box_dimension == pytest.approx(1 + math.log(1.5) / math.log(3), abs=1e-12)
    assert prof.per_permutation[(2, 1)] == pytest.approx(1.0, abs=1e-12)


def test_full_product_alphabet_gives_full_dimension():
    axes = ((F(1, 2), F(1, 2)), (F(1, 3), F(1, 3), F(1, 3)), (F(1, 2), F(1, 4), F(1, 4)))
    alphabet = tuple((i, j, k) for i in (1, 2) for j in (1, 2, 3) for k in (1, 2, 3))
    prof = baranski_dimension(BaranskiSpec(3, axes, alphabet))
    assert prof.box_dimension == pytest.approx(3.0, abs=1e-12)
    # every ordering ties, so the smallest permutation is reported
    assert prof.permutation == (1, 2, 3)


def test_baranski_copy_of_gl_carpet(gl_a):
    spec = BaranskiSpec(2, ((F(1, 2),) * 2, (F(1, 4),) * 4), ((1, 1), (2, 1), (2, 2)))
    prof = baranski_dimension(spec)
    assert prof.permutation == (1, 2)
    assert prof.box_dimension == pytest.approx(gl_profile(gl_a).box_dimension, abs=1e-12)


def test_permutation_budget():
    d = 3
    spec = BaranskiSpec(d, ((0.5, 0.5),) * d, ((1,) * d,))
    with pytest.raises(PermutationBudgetError):
        baranski_dimension(spec, max_dim=2)


def test_threads_do_not_change_answer(bar_a):
    assert baranski_dimension(bar_a, workers=2) == baranski_dimension(bar_a)


def test_dispatch(gl_a, bar_a):
    assert dimension_profile(gl_a) == gl_profile(gl_a)
    assert dimension_profile(bar_a).permutation == (1, 2)
