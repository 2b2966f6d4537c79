from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planar_homotopy.characterize import (AT_MOST_1, EQUALS_2, FAIL, PASS, condition1, condition2,
                                          homotopy_dimension_verdict, peano_continuum_check, peano_domain_check)
from planar_homotopy.raster import Raster
from planar_homotopy.scenes import Scene, builtin_scene, carpet_raster, peano_continuum_from_scene
from planar_homotopy.sequences import NOT_NULL, NULL


@pytest.fixture(scope="module")
def sierpinski():
    return builtin_scene("sierpinski", 2, 8)


@pytest.fixture(scope="module")
def filled():
    return builtin_scene("sierpinski_filled_hole", 2, 8)


def scene_from(fine: Raster, points, name="planted"):
    coarse = fine.coarsen()
    return Scene(name, {coarse.k: coarse, fine.k: fine}, {0: list(points)}, [coarse.k, fine.k], coarse.k)


def center(k, r, c):
    n = 1 << k
    return Fraction(2 * c + 1, 2 * n), Fraction(2 * r + 1, 2 * n)


def teeth(k):
    """Topologist's comb: a base bar with teeth accumulating on a limit tooth at x = 1/2."""
    n = 1 << k
    g = np.zeros((n, n), dtype=bool)
    g[3 * n // 4, n // 2:7 * n // 8] = True
    g[n // 4:3 * n // 4, n // 2] = True
    m = 2
    while (n >> m) >= 2:
        g[n // 4:3 * n // 4, n // 2 + (n >> m)] = True
        m += 1
    return Raster(k, g)


def slits(k):
    n = 1 << k
    g = np.ones((n, n), dtype=bool)
    m = 2
    while (n >> m) >= 2:
        g[n // 4:3 * n // 4, n // 2 + (n >> m)] = False
        m += 1
    return Raster(k, g)


def holes(k):
    """Open square minus a shrinking row of closed squares."""
    n = 1 << k
    g = np.ones((n, n), dtype=bool)
    for m in range(1, 4):
        s = n >> (m + 2)
        g[n // 2 - s // 2:n // 2 + s // 2, n >> m:(n >> m) + s] = False
    return Raster(k, g)


class TestCondition1:
    def test_sierpinski_passes(self, sierpinski):
        assert condition1(sierpinski).verdict == PASS

    def test_filled_hole_witness_is_central_hole(self, filled):
        rep = condition1(filled)
        assert rep.verdict == FAIL and len(rep.witnesses) == 1
        r0, r1, c0, c1 = rep.witnesses[0]["bbox"]
        n = 256
        assert n / 3 - 2 <= r0 <= r1 <= 2 * n / 3 + 2 and n / 3 - 2 <= c0 <= c1 <= 2 * n / 3 + 2
        assert rep.lines[-1].startswith("cond1 witness first_cell=")

    def test_empty_bad_set(self):
        s = scene_from(Raster.empty(5), [])
        assert condition1(s).verdict == PASS

    def test_infinity_flag_off(self):
        s = scene_from(Raster.empty(5), [])
        s.infinity = False
        assert condition1(s).verdict == FAIL

    def test_puncturing_the_hole_repairs_it(self, filled):
        s = Scene(filled.name, filled.bad, dict(filled.punctures), filled.ladder, filled.k_min)
        s.punctures[9] = [(Fraction(1, 2) + Fraction(1, 512), Fraction(1, 2) + Fraction(1, 512))]
        assert condition1(s).verdict == PASS


class TestCondition2:
    def test_sierpinski(self, sierpinski):
        assert condition2(sierpinski).verdict == PASS

    def test_comb_one_sided_witness_left_of_limit(self):
        s = builtin_scene("comb_one_sided", 2, 8)
        rep = condition2(s)
        assert rep.verdict == FAIL and rep.witnesses
        members = [m for w in rep.witnesses for m in w["members"]]
        assert members and all(m["bbox"][3] <= 128 for m in members)

    def test_comb_two_sided(self):
        assert condition2(builtin_scene("comb_two_sided", 2, 8)).verdict == PASS

    def test_needs_two_scales(self, sierpinski):
        s = Scene("x", {8: sierpinski.bad[8]}, sierpinski.punctures, [8], 8)
        with pytest.raises(ValueError):
            condition2(s)

    def test_probe_lines(self, sierpinski):
        rep = condition2(sierpinski, [0.5, 0.25])
        assert all(line.startswith("cond2 probe=") for line in rep.lines)


class TestVerdict:
    def test_sierpinski(self, sierpinski):
        v = homotopy_dimension_verdict(sierpinski)
        assert v.verdict == AT_MOST_1
        assert v.report_lines()[-1] == "VERDICT=at-most-1"

    def test_filled_hole(self, filled):
        assert homotopy_dimension_verdict(filled).verdict == EQUALS_2

    def test_comb_one_sided(self):
        assert homotopy_dimension_verdict(builtin_scene("comb_one_sided", 2, 8)).verdict == EQUALS_2

    def test_bouquet(self):
        s = builtin_scene("finite_punctures", 3, 6)
        assert homotopy_dimension_verdict(s).verdict == AT_MOST_1

    def test_report_notes_surrogates(self, sierpinski):
        lines = homotopy_dimension_verdict(sierpinski).report_lines()
        assert lines[0] == "scene=sierpinski" and "dyadic squares" in lines[1]


@st.composite
def planted_scenes(draw):
    k = 5
    n = 1 << k
    fine = np.zeros((n, n), dtype=bool)
    for _ in range(draw(st.integers(1, 4))):
        r0, c0 = draw(st.integers(2, n - 10)), draw(st.integers(2, n - 10))
        s = draw(st.integers(4, 8))
        fine[r0, c0:c0 + s + 1] = fine[r0 + s, c0:c0 + s + 1] = True
        fine[r0:r0 + s + 1, c0] = fine[r0:r0 + s + 1, c0 + s] = True
    free = np.argwhere(~fine)
    picks = draw(st.lists(st.integers(0, len(free) - 1), max_size=4, unique=True))
    pts = [center(k, *free[i]) for i in picks]
    extra = free[draw(st.integers(0, len(free) - 1))]
    return scene_from(Raster(k, fine), pts), center(k, *extra)


class TestMonotonicity:
    @settings(max_examples=25, deadline=None)
    @given(planted_scenes())
    def test_adding_a_puncture(self, data):
        scene, extra = data
        more = Scene(scene.name, scene.bad, {0: scene.punctures[0] + [extra]}, scene.ladder, scene.k_min)
        if condition1(scene).verdict == PASS:
            assert condition1(more).verdict == PASS
        sched = [0.5, 0.25, 0.125]
        before = [v for _, v, _ in _probes(scene, sched)]
        after = [v for _, v, _ in _probes(more, sched)]
        for a, b in zip(before, after):
            if a.verdict == NULL:
                assert b.verdict != NOT_NULL

    @settings(max_examples=25, deadline=None)
    @given(planted_scenes())
    def test_cond1_failure_means_equals_2(self, data):
        scene, _ = data
        if condition1(scene).verdict == FAIL:
            assert homotopy_dimension_verdict(scene).verdict == EQUALS_2


def _probes(scene, sched):
    from planar_homotopy.characterize import default_probe_scales, probe_verdicts
    masks = {k: ~scene.bad[k].cells for k in scene.ladder}
    puncts = {k: scene.puncture_mask(k) for k in scene.ladder}
    return list(probe_verdicts(masks, scene.ladder, default_probe_scales(scene.ladder), sched, 8, puncts))


class TestPeanoChecks:
    def test_full_square(self):
        lad = [Raster.full(5), Raster.full(6)]
        assert peano_continuum_check(lad).passed and peano_domain_check(lad).passed

    def test_carpet(self):
        assert peano_continuum_check([carpet_raster(2, 7), carpet_raster(2, 8)]).passed

    def test_carpet_continuum_from_scene(self):
        m = peano_continuum_from_scene(builtin_scene("sierpinski", 2, 9), 9)
        assert peano_continuum_check([m.coarsen(), m]).passed

    def test_topologist_comb_fails_intersections(self):
        rep = peano_continuum_check([teeth(7), teeth(8)])
        assert rep.verdicts["1'"] == FAIL and rep.witnesses["1'"]

    def test_square_minus_shrinking_squares(self):
        assert peano_domain_check([holes(7), holes(8)]).passed

    def test_square_minus_accumulating_slits(self):
        rep = peano_domain_check([slits(7), slits(8)])
        assert not rep.passed and rep.witnesses["2"]

    def test_needs_distinct_resolutions(self):
        with pytest.raises(ValueError):
            peano_domain_check([Raster.full(5), Raster.full(5)])
