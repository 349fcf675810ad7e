import math
from collections import Counter
from fractions import Fraction as F

import numpy as np
import pytest

from spongedim.boxcount import (
    BudgetExceeded, count_cubes, cube_type, default_budget, dominant_class_report,
    empirical_dimension, iter_cubes, key_to_profile,
)
from spongedim.model import GLMap, GLSpec, SelfSimilarSpec, validate
from spongedim.moran import gl_profile
from spongedim.variational import dominant_type


def brute_cubes(spec, delta):
    """Distinct approximate cubes straight from the definition.

    Words over the full map alphabet are grown until every coordinate's
    running ratio product is <= delta; the cube of a word is, per coordinate,
    the coordinate-relevant part of its first L_n symbols.
    """
    delta = F(delta)
    if isinstance(spec, SelfSimilarSpec):
        letters = [((k,), (r,)) for k, r in enumerate(spec.ratios, start=1)]
        d = 1
    elif isinstance(spec, GLSpec):
        d = spec.dimension
        letters = [(m.index, m.ratios) for m in spec.maps]
    else:
        d = spec.dimension
        letters = [(t, tuple(spec.ratio(n + 1, t[n]) for n in range(d))) for t in spec.alphabet]

    def part(symbol, n):
        # GL coordinate n is decided by the length-n prefix, other kinds by entry n
        return symbol[:n] if isinstance(spec, GLSpec) else symbol[n - 1]

    cubes = set()

    def grow(word, prods, stops):
        if len(stops) == d:
            cubes.add(tuple(tuple(part(w, n) for w in word[: stops[n]]) for n in range(1, d + 1)))
            return
        for sym, ratios in letters:
            new = [p * r for p, r in zip(prods, ratios)]
            st = dict(stops)
            for n in range(1, d + 1):
                if n not in st and new[n - 1] <= delta:
                    st[n] = len(word) + 1
            grow(word + [sym], new, st)

    grow([], [F(1)] * d, {})
    return cubes


GL_TIES = GLSpec(2, (
    GLMap((1, 1), (F(1, 2), F(1, 4)), (0, 0)),
    GLMap((2, 1), (F(1, 4), F(1, 8)), (F(1, 2), 0)),
    GLMap((2, 2), (F(1, 4), F(1, 16)), (F(1, 2), F(1, 2))),
))


@pytest.mark.parametrize("name,delta", [
    ("gl_a", "1/4"), ("gl_a", "1/16"), ("gl_a", "1/32"),
    ("gl_u", "1/16"), ("gl_3", "1/12"), ("gl_3", "1/30"),
    ("bar_a", "1/3"), ("bar_a", "1/10"), ("bar_a", "1/27"),
])
def test_counts_match_definition(name, delta, request):
    spec = request.getfixturevalue(name)
    brute = brute_cubes(spec, delta)
    assert count_cubes(spec, delta).total == len(brute)
    assert sum(1 for _ in iter_cubes(spec, delta)) == len(brute)


@pytest.mark.parametrize("delta", ["1/4", "1/8", "1/64", "1/100"])
def test_counts_with_simultaneous_stops(delta):
    brute = brute_cubes(GL_TIES, delta)
    rep = count_cubes(GL_TIES, delta, types=True)
    assert rep.total == len(brute) == sum(1 for _ in iter_cubes(GL_TIES, delta))
    assert rep.ties == sum(1 for c in iter_cubes(GL_TIES, delta) if c.tie)


def test_simultaneous_stop_is_flagged():
    assert validate(GL_TIES).ok
    cubes = [c for c in iter_cubes(GL_TIES, "1/4") if c.tie]
    assert cubes and all(c.stoppings == (1, 1) for c in cubes)
    assert count_cubes(GL_TIES, "1/4").ties == len(cubes)


def test_self_similar_counts():
    spec = SelfSimilarSpec((F(1, 2), F(1, 2)))
    for k in range(1, 11):
        assert count_cubes(spec, F(1, 2**k)).total == 2**k
    spec = SelfSimilarSpec((F(1, 2), F(1, 4), F(1, 4)))
    assert count_cubes(spec, "1/8").total == len(brute_cubes(spec, "1/8"))


def test_float_ratios_match_definition():
    spec = SelfSimilarSpec((0.3, 0.45))
    rep = count_cubes(spec, 0.01)
    assert rep.total == len(brute_cubes(SelfSimilarSpec((F(3, 10), F(9, 20))), F(1, 100)))


def test_gl_a_law(gl_a):
    for k in range(1, 9):
        assert count_cubes(gl_a, F(1, 4**k)).total == 6**k
    assert count_cubes(gl_a, "0.25").total == 6


def test_gl_u_law(gl_u):
    for k in range(1, 7):
        assert count_cubes(gl_u, F(1, 4**k)).total == 8**k


def test_per_sigma_and_types_sum_to_total(bar_a, gl_3):
    for spec, delta in ((bar_a, "1/50"), (gl_3, "1/144")):
        rep = count_cubes(spec, delta, types=True)
        assert sum(rep.per_sigma.values()) == rep.total
        assert sum(rep.per_type.values()) == rep.total
        assert count_cubes(spec, delta).total == rep.total


def test_histogram_matches_streamed_cubes(bar_a):
    rep = count_cubes(bar_a, "1/20", types=True)
    seen = Counter()
    for cube in iter_cubes(bar_a, "1/20"):
        seen[(cube.sigma, tuple(np.round(b, 12).tobytes() for b in cube_type(cube, bar_a).blocks))] += 1
    hist = Counter()
    for key, n in rep.per_type.items():
        P = key_to_profile(bar_a, key)
        hist[(key[0], tuple(np.round(b, 12).tobytes() for b in P.blocks))] += n
    assert seen == hist


def test_baranski_at_one_third(bar_a):
    cubes = list(iter_cubes(bar_a, "1/3"))
    assert len(cubes) == 6
    assert all(c.stoppings == (2, 1) and c.sigma == (1, 2) and not c.tie for c in cubes)


def test_cube_type_example(gl_a):
    cube = next(c for c in iter_cubes(gl_a, "1/16")
                if c.blocks == (((1, 1), (2, 2)), ((2,), (1,))))
    assert cube.stoppings == (4, 2)
    P = cube_type(cube, gl_a)
    np.testing.assert_allclose(P.blocks[1], [0.5, 0, 0.5])
    np.testing.assert_allclose(P.blocks[0], [0.5, 0.5])


def test_empirical_slopes(gl_a, gl_u):
    fit = empirical_dimension(gl_a, [F(1, 4**k) for k in range(1, 7)])
    assert fit.slope == pytest.approx(math.log(6) / math.log(4), abs=1e-12)
    assert fit.residual < 1e-12
    fit = empirical_dimension(gl_u, [F(1, 4**k) for k in range(1, 7)])
    assert fit.slope == pytest.approx(1.5, abs=1e-12)
    fit = empirical_dimension(SelfSimilarSpec((F(1, 2), F(1, 2))), [F(1, 2**k) for k in range(1, 11)])
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        empirical_dimension(gl_a, ["1/4", "1/16"])


def test_dominant_class_gl_a(gl_a):
    rep = dominant_class_report(gl_a, F(1, 4**6))
    assert rep.count == 1800
    assert rep.total == 6**6
    assert rep.key == ((1, 2), ((2, 2, 2), (3, 3)))
    assert rep.sandwich_ok
    assert rep.distance < 1e-12
    assert rep.profile.distance(dominant_type(gl_a, gl_profile(gl_a))) < 1e-12
    assert rep.growth_lower_ok and rep.growth_upper_ok


def test_dominant_class_small_scale(gl_a):
    rep = count_cubes(gl_a, "1/4", types=True)
    assert len(rep.per_type) == 6 and rep.dominant_count == 1


def test_dominant_class_self_similar():
    rep = count_cubes(SelfSimilarSpec((F(1, 2), F(1, 2))), F(1, 2**10), types=True)
    assert rep.dominant_type == ((1,), ((5, 5),))
    assert rep.dominant_count == 252


def test_budget(gl_a, monkeypatch):
    with pytest.raises(BudgetExceeded):
        count_cubes(gl_a, F(1, 4**8), types=True, budget=100)
    monkeypatch.setenv("SPONGEDIM_BUDGET", "12345")
    assert default_budget() == 12345


def test_report_document_is_json_ready(gl_a):
    import json
    doc = count_cubes(gl_a, "1/16", types=True).to_dict()
    assert json.loads(json.dumps(doc)) == doc
    assert doc["total"] == "36"
