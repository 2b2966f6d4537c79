"""Scenes: a bad set given at several resolutions, a truncated puncture set, and a ladder.

Builtin scenes are drawn at the finest ladder resolution and OR-coarsened, so the
family is refinement-consistent by construction.  Punctures are dyadic points
(cell centers at the finest resolution) grouped by the depth at which they first
appear; the point at infinity is carried as a flag.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import ndimage

from .raster import Raster, RasterFormatError, format_raster, parse_raster_lines

BUILTIN_NAMES = (
    "sierpinski",
    "sierpinski_filled_hole",
    "earring_circle",
    "comb_two_sided",
    "comb_one_sided",
    "finite_punctures",
)
MAX_DEPTH = 6
MAX_K = 12
SCENE_HEADER = "PH-SCENE"

Point = tuple[Fraction, Fraction]


class SceneError(ValueError):
    pass


@dataclass
class Scene:
    name: str
    bad: dict[int, Raster]
    punctures: dict[int, list[Point]]
    ladder: list[int]
    k_min: int
    depth: int = 0
    infinity: bool = True

    @property
    def finest(self) -> int:
        return self.ladder[-1]

    @property
    def max_depth(self) -> int:
        return max(self.punctures, default=0)

    def puncture_points(self, depth: int | None = None) -> list[Point]:
        """Finite punctures of every depth up to ``depth`` (default: all)."""
        limit = self.max_depth if depth is None else depth
        return [p for d in sorted(self.punctures) if d <= limit for p in self.punctures[d]]

    def bad_at(self, k: int) -> Raster:
        if k in self.bad:
            return self.bad[k]
        finer = [j for j in self.ladder if j > k]
        if not finer:
            raise SceneError(f"resolution k={k} is finer than the scene ladder {self.ladder}")
        r = self.bad[min(finer)]
        while r.k > k:
            r = r.coarsen()
        return r

    def puncture_cells(self, k: int, depth: int | None = None) -> list[tuple[int, int]]:
        n = 1 << k
        out = []
        for x, y in self.puncture_points(depth):
            out.append((min(int(y * n), n - 1), min(int(x * n), n - 1)))
        return out

    def puncture_mask(self, k: int, depth: int | None = None) -> np.ndarray:
        n = 1 << k
        m = np.zeros((n, n), dtype=bool)
        for r, c in self.puncture_cells(k, depth):
            m[r, c] = True
        return m

    def total_punctures(self) -> int:
        return len(self.puncture_points()) + int(self.infinity)


# -- drawing helpers --------------------------------------------------------------

def _idx(v: Fraction, n: int) -> int:
    return min(int(v * n), n - 1)


def _draw_hseg(grid, y, x0, x1):
    n = grid.shape[0]
    grid[_idx(y, n), _idx(x0, n):_idx(x1, n) + 1] = True


def _draw_vseg(grid, x, y0, y1):
    n = grid.shape[0]
    grid[_idx(y0, n):_idx(y1, n) + 1, _idx(x, n)] = True


def _draw_square_loop(grid, x0, y0, x1, y1):
    _draw_hseg(grid, y0, x0, x1)
    _draw_hseg(grid, y1, x0, x1)
    _draw_vseg(grid, x0, y0, y1)
    _draw_vseg(grid, x1, y0, y1)


def _center_point(k: int, row: int, col: int) -> Point:
    den = 1 << (k + 1)
    return Fraction(2 * col + 1, den), Fraction(2 * row + 1, den)


def sierpinski_holes(depth: int) -> list[tuple[int, tuple[Fraction, Fraction, Fraction, Fraction]]]:
    """(level, (x0, y0, x1, y1)) of every carpet hole down to ``depth``, in generation order."""
    holes = []
    squares = [(Fraction(0), Fraction(0), Fraction(1))]
    for level in range(1, depth + 1):
        nxt = []
        for x, y, s in squares:
            t = s / 3
            holes.append((level, (x + t, y + t, x + 2 * t, y + 2 * t)))
            for i in range(3):
                for j in range(3):
                    if (i, j) != (1, 1):
                        nxt.append((x + j * t, y + i * t, t))
        squares = nxt
    return holes


def carpet_raster(depth: int, k: int) -> Raster:
    """Solid Sierpinski carpet of the given depth: cells whose centers avoid every open hole."""
    n = 1 << k
    centers = (np.arange(n) + 0.5) / n
    solid = np.ones((n, n), dtype=bool)
    for _, (x0, y0, x1, y1) in sierpinski_holes(depth):
        cols = (centers > float(x0)) & (centers < float(x1))
        rows = (centers > float(y0)) & (centers < float(y1))
        solid[np.ix_(rows, cols)] = False
    return Raster(k, solid)


def _coarsen_ladder(fine: Raster, ladder: list[int]) -> dict[int, Raster]:
    out = {fine.k: fine}
    r = fine
    for k in sorted(ladder, reverse=True)[1:]:
        while r.k > k:
            r = r.coarsen()
        out[k] = r
    return out


def _require(cond: bool, what: str):
    if not cond:
        raise SceneError(f"resolution too coarse: {what}")


def _sierpinski(depth: int, k: int, fill_center: bool):
    n = 1 << k
    grid = np.zeros((n, n), dtype=bool)
    punctures: dict[int, list[Point]] = {}
    for level, (x0, y0, x1, y1) in sierpinski_holes(depth):
        _require((x1 - x0) * n >= 12, f"depth-{level} holes need k > {k}")
        _draw_square_loop(grid, x0, y0, x1, y1)
        if fill_center and level == 1:
            continue
        r, c = _idx(y0, n) + 2, _idx(x0, n) + 2
        punctures.setdefault(level, []).append(_center_point(k, r, c))
    return grid, punctures


def _earring(depth: int, k: int):
    n = 1 << k
    grid = np.zeros((n, n), dtype=bool)
    q = Fraction(1, 4)
    _draw_square_loop(grid, q, q, 3 * q, 3 * q)
    punctures: dict[int, list[Point]] = {0: [_center_point(k, _idx(q, n) + 2, _idx(3 * q, n) - 2)]}
    sizes = [q / (1 << m) for m in range(depth + 1)]
    for m, s in enumerate(sizes):
        nxt = sizes[m + 1] if m + 1 < len(sizes) else None
        _require((s / 4 if nxt else s) * n >= 6, f"earring loop {m} needs k > {k}")
        x0, y0, y1 = q - s, Fraction(1, 2) - s / 2, Fraction(1, 2) + s / 2
        _draw_square_loop(grid, x0, y0, q, y1)
        r, c = _idx(y1, n) - 2, _idx(x0, n) + 2
        punctures.setdefault(m + 1, []).append(_center_point(k, r, c))
    return grid, punctures


def comb_columns(k: int) -> tuple[int, list[int], list[int], int, int]:
    """(limit column, right teeth, left teeth, top row, bottom row) of the comb at resolution k.

    Teeth sit at offsets 2^-(2+m) from the limit arc x = 1/2 and are kept while they are
    at least two cells from it, so one free column always separates neighbors.
    """
    n = 1 << k
    mid = n // 2
    offsets = []
    m = 0
    while (n >> (2 + m)) >= 2:
        offsets.append(n >> (2 + m))
        m += 1
    return mid, [mid + o for o in offsets], [mid - o for o in offsets], n // 4, (3 * n) // 4


def _comb(k: int, sides: tuple[str, ...]):
    n = 1 << k
    _require(k >= 4, "comb needs k >= 4")
    grid = np.zeros((n, n), dtype=bool)
    mid, right, left, top, bottom = comb_columns(k)
    grid[bottom, left[0]:right[0] + 1] = True
    for c in [mid] + right + left:
        grid[top:bottom + 1, c] = True
    punctures: dict[int, list[Point]] = {}
    for side, teeth in (("right", right), ("left", left)):
        if side not in sides:
            continue
        walls = teeth + [mid]
        for depth, (a, b) in enumerate(zip(walls[:-1], walls[1:]), start=1):
            a, b = min(a, b), max(a, b)
            # walls sit on even columns, so a+1 merges into the wall when coarsened
            lo, hi = (a + 2 if b - a >= 4 else a + 1), b - 1
            cols = sorted({lo, hi})
            for r in range(top + 2, bottom - 1, 4):
                for c in cols:
                    punctures.setdefault(depth, []).append(_center_point(k, r, c))
    return grid, punctures


def _finite(depth: int, k: int):
    n = 1 << k
    _require(n >= 4 * (depth + 1), f"{depth} punctures need k > {k}")
    pts = []
    for i in range(depth):
        idx = (n * (i + 1)) // (depth + 1)
        pts.append(_center_point(k, idx, idx))
    return np.zeros((n, n), dtype=bool), ({0: pts} if pts else {})


def builtin_scene(name: str, depth: int, k: int) -> Scene:
    """Build one of the builtin scenes at finest resolution ``k`` with ladder [k-1, k].

    Comb scenes resolve every tooth the resolution allows; ``depth`` only bounds-checks there.
    """
    if name not in BUILTIN_NAMES:
        raise SceneError(f"unknown scene {name!r}; expected one of {', '.join(BUILTIN_NAMES)}")
    if not 0 <= depth <= MAX_DEPTH:
        raise SceneError(f"depth must lie in [0, {MAX_DEPTH}], got {depth}")
    if not 2 <= k <= MAX_K:
        raise SceneError(f"k must lie in [2, {MAX_K}], got {k}")
    ladder = [k - 1, k]
    k_min = k - 1
    if name == "sierpinski":
        grid, punct = _sierpinski(depth, k, fill_center=False)
    elif name == "sierpinski_filled_hole":
        if depth < 1:
            raise SceneError("sierpinski_filled_hole needs depth >= 1")
        grid, punct = _sierpinski(depth, k, fill_center=True)
    elif name == "earring_circle":
        grid, punct = _earring(depth, k)
    elif name == "comb_two_sided":
        grid, punct = _comb(k, ("right", "left"))
        k_min = k
    elif name == "comb_one_sided":
        grid, punct = _comb(k, ("right",))
        k_min = k
    else:
        grid, punct = _finite(depth, k)
    bad = _coarsen_ladder(Raster(k, grid), ladder)
    return Scene(name, bad, punct, ladder, k_min, depth=depth)


# -- validation -------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    witness: object = None
    detail: str = ""


@dataclass
class SceneVerdictRecord:
    scene: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_scene(scene: Scene) -> SceneVerdictRecord:
    rec = SceneVerdictRecord(scene.name)
    ladder = scene.ladder

    ok = bool(ladder) and ladder == sorted(set(ladder)) and all(k in scene.bad for k in ladder)
    rec.checks.append(Check("ladder", ok, None if ok else ladder))

    witness = None
    for lo, hi in zip(ladder[:-1], ladder[1:]):
        coarse = scene.bad[hi]
        while coarse.k > lo:
            coarse = coarse.coarsen()
        diff = np.argwhere(coarse.cells != scene.bad[lo].cells)
        if len(diff):
            witness = (lo, int(diff[0][0]), int(diff[0][1]))
            break
    rec.checks.append(Check("refinement", witness is None, witness))

    witness = None
    for k in ladder:
        if k >= scene.k_min:
            w = scene.bad[k].block_witness()
            if w is not None:
                witness = (k, *w)
                break
    rec.checks.append(Check("dimension", witness is None, witness, "2x2 occupied block"))

    pts = scene.puncture_points()
    seen, witness = set(), None
    for p in pts:
        if p in seen:
            witness = p
            break
        seen.add(p)
    rec.checks.append(Check("distinct", witness is None, witness))

    witness = next((p for p in pts if not (0 < p[0] < 1 and 0 < p[1] < 1)), None)
    rec.checks.append(Check("inside", witness is None, witness))

    witness = None
    for k in ladder:
        if k < scene.k_min:
            continue
        bad = scene.bad[k].cells
        for p, (r, c) in zip(pts, scene.puncture_cells(k)):
            if bad[r, c]:
                witness = (k, p)
                break
        if witness:
            break
    rec.checks.append(Check("disjointness", witness is None, witness))

    fine = scene.bad[scene.finest]
    witness = None
    fresh = [p for d in sorted(scene.punctures) if d >= 1 for p in scene.punctures[d]]
    if fresh:
        if not fine.cells.any():
            witness = fresh[0]
        else:
            dist = ndimage.distance_transform_cdt(~fine.cells, metric="chessboard")
            n = fine.n
            for x, y in fresh:
                if dist[_idx(y, n), _idx(x, n)] > 2:
                    witness = (x, y)
                    break
    rec.checks.append(Check("accumulation", witness is None, witness, "deeper punctures lie near the bad set"))
    return rec


# -- derived continuum ---------------------------------------------------------------

def peano_continuum_from_scene(scene: Scene, k: int) -> Raster:
    """Square minus a 3x3 open block around each finite puncture; the point at infinity
    removes everything outside the unit square."""
    bad = scene.bad_at(k)
    n = 1 << k
    cells = scene.puncture_cells(k)
    for i, (r, c) in enumerate(cells):
        for r2, c2 in cells[i + 1:]:
            if max(abs(r - r2), abs(c - c2)) < 3:
                raise SceneError("resolution too coarse: punctures closer than 3 cells")
    m = np.ones((n, n), dtype=bool)
    for r, c in cells:
        m[max(r - 1, 0):r + 2, max(c - 1, 0):c + 2] = False
    if (bad.cells & ~m).any():
        raise SceneError("resolution too coarse: puncture neighborhood meets the bad set")
    return Raster(k, m, includes_infinity=not scene.infinity)


# -- file format ---------------------------------------------------------------------

def _fmt_frac(v: Fraction) -> str:
    den = v.denominator
    if den & (den - 1) == 0:
        return f"{v.numerator}/2^{den.bit_length() - 1}"
    return f"{v.numerator}/{den}"


def _parse_frac(tok: str) -> Fraction:
    num, _, den = tok.partition("/")
    if not den:
        return Fraction(int(num))
    if den.startswith("2^"):
        return Fraction(int(num), 1 << int(den[2:]))
    return Fraction(int(num), int(den))


def format_scene(scene: Scene) -> str:
    out = [f"{SCENE_HEADER} name={scene.name} depth={scene.depth} k_min={scene.k_min}",
           "ladder=" + ",".join(str(k) for k in scene.ladder)]
    for k in scene.ladder:
        out.append(format_raster(scene.bad[k]).rstrip("\n"))
    for d in sorted(scene.punctures):
        out.append(f"punctures depth={d}")
        out.extend(f"{_fmt_frac(x)} {_fmt_frac(y)}" for x, y in scene.punctures[d])
    out.append(f"infinity={int(scene.infinity)}")
    return "\n".join(out) + "\n"


def parse_scene(text: str) -> Scene:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(SCENE_HEADER):
        raise SceneError("missing PH-SCENE header")
    try:
        head = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
        if not lines[1].startswith("ladder="):
            raise SceneError("expected ladder= line")
        ladder = [int(t) for t in lines[1][len("ladder="):].split(",")]
        i = 2
        bad = {}
        for k in ladder:
            r, i = parse_raster_lines(lines, i)
            if r.k != k:
                raise SceneError(f"raster k={r.k} does not match ladder entry {k}")
            bad[k] = r
        punctures: dict[int, list[Point]] = {}
        infinity = True
        depth = None
        while i < len(lines):
            line = lines[i].strip()
            i += 1
            if not line:
                continue
            if line.startswith("punctures depth="):
                depth = int(line.split("=", 1)[1])
                punctures.setdefault(depth, [])
            elif line.startswith("infinity="):
                infinity = line.split("=", 1)[1] == "1"
            else:
                if depth is None:
                    raise SceneError(f"puncture line before any depth header: {line!r}")
                xs, ys = line.split()
                punctures[depth].append((_parse_frac(xs), _parse_frac(ys)))
        return Scene(head.get("name", "scene"), bad, punctures, ladder,
                     int(head.get("k_min", ladder[0])), depth=int(head.get("depth", 0)),
                     infinity=infinity)
    except (ValueError, IndexError, ZeroDivisionError, RasterFormatError) as exc:
        if isinstance(exc, SceneError):
            raise
        raise SceneError(f"malformed scene file: {exc}") from exc


def write_scene(scene: Scene, path) -> None:
    Path(path).write_text(format_scene(scene))


def read_scene(path) -> Scene:
    return parse_scene(Path(path).read_text())


# -- SVG ---------------------------------------------------------------------------

def svg_text(raster: Raster, punctures: list[Point] = (), cell_px: int = 4,
             overlays: list[tuple[Raster, str]] = ()) -> str:
    """One rect per occupied cell, punctures as circles; coordinates in cell units."""
    n = raster.n
    size = n * cell_px
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {n} {n}">',
           f'<rect x="0" y="0" width="{n}" height="{n}" fill="white" stroke="black" stroke-width="0.1"/>']
    for layer, colour in overlays:
        for r, c in layer.occupied():
            out.append(f'<rect x="{c}" y="{r}" width="1" height="1" fill="{colour}"/>')
    for r, c in raster.occupied():
        out.append(f'<rect x="{c}" y="{r}" width="1" height="1" fill="black"/>')
    for x, y in punctures:
        out.append(f'<circle cx="{float(x * n):.6g}" cy="{float(y * n):.6g}" r="0.5" fill="red"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_svg(obj, path) -> Path:
    """Write a scene (finest bad raster plus punctures) or a bare raster as SVG."""
    if isinstance(obj, Scene):
        text = svg_text(obj.bad[obj.finest], obj.puncture_points())
    elif isinstance(obj, Raster):
        text = svg_text(obj)
    else:
        raise TypeError(f"cannot render {type(obj).__name__}")
    path = Path(path)
    path.write_text(text)
    return path
