import re
from fractions import Fraction

import numpy as np
import pytest

from oracles import flood_fill
from planar_homotopy.raster import Raster, label_components
from planar_homotopy.scenes import (BUILTIN_NAMES, Scene, SceneError, builtin_scene, comb_columns, format_scene,
                                    parse_scene, peano_continuum_from_scene, read_scene, render_svg, svg_text,
                                    validate_scene, write_scene)


def census(scene: Scene):
    """Complement components of the finest bad raster (outer one joined to infinity) and
    how many punctures each holds, by plain flood fill."""
    k = scene.finest
    grid = (~scene.bad[k].cells).tolist()
    comps = flood_fill(grid, 8, infinity=True)
    cells = scene.puncture_cells(k)
    return [sum((r, c) in comp for r, c in cells) for comp in comps]


class TestBuiltins:
    @pytest.mark.parametrize("depth", [1, 2, 3])
    def test_sierpinski_hole_census(self, depth):
        s = builtin_scene("sierpinski", depth, 9 if depth < 3 else 10)
        holes = (8 ** depth - 1) // 7
        assert len(s.puncture_points()) == holes and s.total_punctures() == holes + 1
        per_comp = census(s)
        assert len(per_comp) == holes + 1
        # outer component holds infinity only, every hole exactly one puncture
        assert sorted(per_comp) == [0] + [1] * holes

    def test_filled_hole_omits_center(self):
        s = builtin_scene("sierpinski_filled_hole", 2, 8)
        assert len(s.puncture_points()) == 8
        per_comp = census(s)
        assert per_comp.count(0) == 2       # outer (infinity) and the central hole

    def test_finite_punctures(self):
        s = builtin_scene("finite_punctures", 3, 6)
        assert not s.bad[6].cells.any()
        assert s.total_punctures() == 4

    def test_comb_two_sided(self):
        k = 8
        s = builtin_scene("comb_two_sided", 2, k)
        mid, right, left, top, bottom = comb_columns(k)
        n = 1 << k
        assert [c - mid for c in right] == [n >> (2 + m) for m in range(len(right))]
        cols = s.bad[k].cells[top:bottom + 1].all(axis=0)
        assert set(np.flatnonzero(cols)) == {mid, *right, *left}
        xs = {int(x * n) for x, _ in s.puncture_points()}
        walls = sorted([mid, *right, *left])
        for a, b in zip(walls, walls[1:]):
            assert any(a < x < b for x in xs)

    def test_comb_one_sided_right_only(self):
        s = builtin_scene("comb_one_sided", 2, 8)
        assert all(x > Fraction(1, 2) for x, _ in s.puncture_points())

    @pytest.mark.parametrize("name", BUILTIN_NAMES)
    def test_deterministic(self, name):
        a, b = builtin_scene(name, 2, 8), builtin_scene(name, 2, 8)
        assert format_scene(a) == format_scene(b)

    def test_unknown_name(self):
        with pytest.raises(SceneError, match="unknown scene"):
            builtin_scene("klein_bottle", 1, 8)

    @pytest.mark.parametrize("depth,k", [(7, 8), (2, 13), (2, 1)])
    def test_bounds(self, depth, k):
        with pytest.raises(SceneError):
            builtin_scene("sierpinski", depth, k)


def parameter_grid():
    for name in BUILTIN_NAMES:
        for depth in range(0, 4):
            for k in (6, 8, 10):
                yield name, depth, k


class TestValidate:
    def test_builtin_grid_passes(self):
        built = 0
        for name, depth, k in parameter_grid():
            try:
                s = builtin_scene(name, depth, k)
            except SceneError:
                continue
            built += 1
            rec = validate_scene(s)
            assert rec.passed, (name, depth, k, [c.name for c in rec.failed()])
        assert built >= 40

    def test_block_fails_dimension(self):
        s = builtin_scene("sierpinski", 1, 6)
        fine = s.bad[6].cells.copy()
        fine[10:12, 10:12] = True
        bad = {6: Raster(6, fine), 5: Raster(6, fine).coarsen()}
        rec = validate_scene(Scene("x", bad, s.punctures, s.ladder, s.k_min))
        chk = rec.check("dimension")
        assert not chk.passed and chk.witness is not None

    def test_puncture_on_bad_cell(self):
        s = builtin_scene("sierpinski", 1, 6)
        r, c = np.argwhere(s.bad[6].cells)[0]
        p = (Fraction(2 * c + 1, 128), Fraction(2 * r + 1, 128))
        scene = Scene("x", s.bad, {0: [p]}, s.ladder, s.k_min)
        assert not validate_scene(scene).check("disjointness").passed

    def test_refinement_mismatch(self):
        s = builtin_scene("sierpinski", 1, 6)
        bad = dict(s.bad)
        bad[5] = Raster.empty(5)
        assert not validate_scene(Scene("x", bad, s.punctures, s.ladder, s.k_min)).check("refinement").passed

    def test_far_deep_puncture_fails_accumulation(self):
        s = builtin_scene("sierpinski", 1, 6)
        pts = dict(s.punctures)
        pts[2] = [(Fraction(1, 2) + Fraction(1, 128), Fraction(1, 2) + Fraction(1, 128))]
        assert not validate_scene(Scene("x", s.bad, pts, s.ladder, s.k_min)).check("accumulation").passed


class TestPeanoContinuum:
    def test_single_finite_puncture(self):
        s = builtin_scene("finite_punctures", 1, 5)
        m = peano_continuum_from_scene(s, 5)
        assert m.count() == 32 * 32 - 9
        assert len(label_components(m.complement(False), 4)) == 1

    def test_sierpinski_depth1(self):
        s = builtin_scene("sierpinski", 1, 6)
        m = peano_continuum_from_scene(s, 6)
        assert not (s.bad[6].cells & ~m.cells).any()
        assert len(flood_fill((~m.cells).tolist(), 4)) == 1

    def test_filled_hole_has_no_hole(self):
        s = builtin_scene("sierpinski_filled_hole", 1, 6)
        m = peano_continuum_from_scene(s, 6)
        assert m.cells.all()

    def test_too_coarse(self):
        s = builtin_scene("finite_punctures", 1, 4)
        s.punctures[0].append((s.punctures[0][0][0] + Fraction(2, 16), s.punctures[0][0][1]))
        with pytest.raises(SceneError, match="resolution too coarse"):
            peano_continuum_from_scene(s, 4)


class TestFiles:
    @pytest.mark.parametrize("name", BUILTIN_NAMES)
    def test_round_trip(self, name, tmp_path):
        s = builtin_scene(name, 2, 8)
        path = tmp_path / "s.phs"
        write_scene(s, path)
        back = read_scene(path)
        assert format_scene(back) == path.read_text()
        assert back.ladder == s.ladder and back.puncture_points() == s.puncture_points()

    def test_layout(self):
        text = format_scene(builtin_scene("finite_punctures", 1, 4))
        lines = text.splitlines()
        assert lines[0].startswith("PH-SCENE") and lines[1] == "ladder=3,4"
        assert "punctures depth=0" in lines and lines[-1] == "infinity=1"
        assert re.fullmatch(r"\d+/2\^\d+ \d+/2\^\d+", lines[lines.index("punctures depth=0") + 1])

    @pytest.mark.parametrize("text", ["", "PH-SCENE\nnope\n", "PH-SCENE\nladder=2\nPH-RASTER k=3 inf=0\n"])
    def test_malformed(self, text):
        with pytest.raises(SceneError):
            parse_scene(text)


class TestSvg:
    def test_empty_frame_only(self):
        text = svg_text(Raster.empty(3))
        assert text.count("<rect") == 1 and "<circle" not in text

    def test_one_rect_per_cell(self, tmp_path):
        s = builtin_scene("sierpinski", 2, 7)
        path = render_svg(s, tmp_path / "s.svg")
        text = path.read_text()
        assert text.count("<rect") == s.bad[7].count() + 1
        assert text.count("<circle") == 9
        assert render_svg(s, tmp_path / "t.svg").read_text() == text

    def test_rejects_other_objects(self, tmp_path):
        with pytest.raises(TypeError):
            render_svg(42, tmp_path / "x.svg")
