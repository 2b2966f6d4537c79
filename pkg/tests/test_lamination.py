import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_reduce, slots_cross, triangles_hit
from planar_homotopy.lamination import (TriangulationError, cancellation_lamination, check_triangulation,
                                        circle_point, extend_filling, format_triangulation, homogeneous,
                                        ideal_triangulation, loop_lamination, parse_points)
from planar_homotopy.quotient import QuotientError, build_run_graph, random_loop
from planar_homotopy.raster import Raster
from planar_homotopy.scenes import carpet_raster


def trivial_word(rng, max_len=40, gens=4):
    """Random word reducing to 1: insert cancelling pairs at random places."""
    w: list[int] = []
    while len(w) + 2 <= max_len and rng.random() < 0.9:
        x = int(rng.integers(1, gens + 1)) * (1 if rng.random() < 0.5 else -1)
        i = int(rng.integers(0, len(w) + 1))
        w[i:i] = [x, -x]
    return w


class TestCirclePoints:
    @pytest.mark.parametrize("u", [Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(5, 7)])
    def test_on_unit_circle(self, u):
        x, y = circle_point(u)
        assert x * x + y * y == 1
        X, Y, W = homogeneous(u)
        assert (Fraction(X, W), Fraction(Y, W)) == (x, y) and W > 0

    def test_quarter_points(self):
        assert circle_point(Fraction(1, 2)) == (1, 0)
        assert circle_point(Fraction(0)) == (-1, 0)

    def test_monotone_angle(self):
        us = [Fraction(i, 97) for i in range(1, 97)]
        angles = [math.atan2(float(y), float(x)) % (2 * math.pi) for x, y in map(circle_point, us)]
        start = math.pi
        unwrapped = [(a - start) % (2 * math.pi) for a in angles]
        assert unwrapped == sorted(unwrapped)


class TestTriangulation:
    def test_square(self):
        tri = ideal_triangulation([0, Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)])
        assert len(tri.triangles) == 2
        assert check_triangulation(tri).passed

    def test_insertion_order_kept(self):
        tri = ideal_triangulation([Fraction(1, 2), Fraction(1, 8), Fraction(3, 4), Fraction(1, 3)])
        assert tri.triangles[0] == (1, 0, 2)
        assert 3 in tri.triangles[1] and tri.prefix(3) == tri.triangles[:1]

    @pytest.mark.parametrize("params,msg", [([0, Fraction(1, 2)], "need at least 3"),
                                            ([0, Fraction(1, 2), 1], "distinct")])
    def test_errors(self, params, msg):
        with pytest.raises(TriangulationError, match=msg):
            ideal_triangulation(params)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(0, 2 ** 20 - 1), min_size=3, max_size=25, unique=True), st.integers(0, 999))
    def test_every_interior_point_covered_once(self, ints, seed):
        tri = ideal_triangulation([Fraction(i, 2 ** 20) for i in ints])
        chk = check_triangulation(tri)
        assert chk.passed
        pts = [(float(x), float(y)) for x, y in tri.points()]
        tris = [[pts[v] for v in t] for t in tri.triangles]
        rng = np.random.default_rng(seed)
        hull = [pts[i] for i in sorted(range(len(pts)), key=lambda i: tri.params[i])]
        for _ in range(30):
            w = rng.dirichlet(np.ones(len(hull)))
            p = (float(w @ [h[0] for h in hull]), float(w @ [h[1] for h in hull]))
            # a random convex combination of the hull is inside it, almost surely off every edge
            assert triangles_hit(p, tris) == 1
        # areas add up to the hull's, in floats
        area = lambda poly: abs(sum(a[0] * b[1] - b[0] * a[1] for a, b in zip(poly, poly[1:] + poly[:1])))
        assert math.isclose(sum(area(t) for t in tris), area(hull), rel_tol=1e-9, abs_tol=1e-12)

    def test_format_and_parse(self):
        assert parse_points("# pts\n1/4\n0.5\n\n7/4\n") == [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]
        text = format_triangulation(ideal_triangulation([0, Fraction(1, 3), Fraction(2, 3)]))
        assert text.splitlines()[0] == "points=3 triangles=1"
        assert "point index=1 u=1/3" in text and text.endswith("triangle 0 1 2\n")
        with pytest.raises(TriangulationError):
            parse_points("x")


class TestLamination:
    def test_single_pair(self):
        lam = cancellation_lamination([1, -1])
        assert lam.pairs == [(0, 1)] and lam.gap_classes == [[0], [1]]

    def test_nested(self):
        lam = cancellation_lamination([1, 2, -2, -1])
        assert lam.pairs == [(0, 3), (1, 2)] and lam.gap_classes == [[0], [1, 3], [2]]
        assert all(lam.checks.values())

    def test_side_by_side(self):
        lam = cancellation_lamination([1, -1, 2, -2])
        assert lam.gap_classes == [[0, 2], [1], [3]]

    def test_separate_visits_stay_separate(self):
        # gaps 1 and 3 both sit over vertex x, but no chord joins them
        lam = cancellation_lamination([1, -1, 1, -1])
        assert lam.gap_classes == [[0, 2], [1], [3]]

    def test_empty_word(self):
        lam = cancellation_lamination([])
        assert lam.size == 0 and lam.checks["filling"]

    def test_nontrivial_rejected(self):
        with pytest.raises(QuotientError, match="not nullhomotopic"):
            cancellation_lamination([1, 2, -1, -2])

    def test_report_lines(self):
        lines = cancellation_lamination([1, -1]).lines()
        assert lines[0] == "lamination letters=2 pairs=1 gap_classes=2"
        assert "property=noncrossing pass" in lines

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_random_trivial_words(self, seed):
        w = trivial_word(np.random.default_rng(seed))
        lam = cancellation_lamination(w)
        assert all(lam.checks.values()), lam.checks
        # each class sits over one vertex of the tree, and a noncrossing matching of
        # n letters splits the n gaps into n/2 + 1 blocks
        n = len(w)
        prefix = [tuple(naive_reduce(w[:j])) for j in range(max(n, 1))]
        assert all(len({prefix[g] for g in cls}) == 1 for cls in lam.gap_classes)
        assert len(lam.gap_classes) == (n // 2 + 1 if n else 1)
        assert sorted(g for cls in lam.gap_classes for g in cls) == list(range(max(n, 1)))
        slots = lam.element_slots()
        assert not any(slots_cross(a, b) for i, a in enumerate(slots) for b in slots[i + 1:])
        assert sum(len(s) for s in slots) == 2 * max(n, 1) - (0 if n else 1)


@pytest.fixture(scope="module")
def carpet():
    return carpet_raster(2, 7)


class TestFilling:
    def test_trivial_loops_extend(self, carpet):
        g = build_run_graph(carpet)
        rng = np.random.default_rng(4)
        done = 0
        for _ in range(40):
            loop = random_loop(carpet, rng, waypoints=2)
            try:
                lam = loop_lamination(g, loop)
            except QuotientError:
                continue
            disk = extend_filling(carpet, loop, lam, g)
            assert disk.passed, disk.lines()[0]
            done += 1
        assert done > 0

    def test_back_and_forth_loop(self):
        m = Raster.from_cells(3, [(2, c) for c in range(2, 6)])
        loop = [(2, 2), (2, 3), (2, 4), (2, 5), (2, 4), (2, 3)]
        g = build_run_graph(m)
        lam = loop_lamination(g, loop)
        assert lam.size == 6 and len(lam.pairs) == 3
        disk = extend_filling(m, loop, lam, g)
        assert disk.passed and disk.lines()[0].startswith("extension vertices=")

    def test_constant_loop(self):
        m = Raster.from_cells(3, [(2, 2)])
        lam = loop_lamination(build_run_graph(m), [(2, 2)])
        assert extend_filling(m, [(2, 2)], lam).passed

    def test_mismatched_lamination(self):
        m = Raster.from_cells(3, [(2, c) for c in range(2, 6)])
        loop = [(2, 2), (2, 3), (2, 4), (2, 5), (2, 4), (2, 3)]
        with pytest.raises(QuotientError, match="decomposition mismatch"):
            extend_filling(m, loop, cancellation_lamination([1, -1]))
