"""Ideal triangulations of circle point sets, and laminations of trivial loops.

Circle points are exact: a parameter u in [0, 1) is sent to a rational point of the
unit circle by a monotone rational map, so cyclic order is preserved and every
orientation test is done in Fractions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .quotient import QuotientError, RunGraph, build_run_graph, check_loop, edge_letters, node_walk, reduce_word
from .raster import Raster

Point = tuple[Fraction, Fraction]
COVERAGE_TOLERANCE_CELLS = 2


class TriangulationError(ValueError):
    pass


def circle_point(u) -> Point:
    """Exact point of the unit circle for the parameter u in [0, 1), counterclockwise from (-1, 0)."""
    u = Fraction(u) % 1
    if u == 0:
        return Fraction(-1), Fraction(0)
    t = (u - Fraction(1, 2)) / (u * (1 - u))
    d = 1 + t * t
    return (1 - t * t) / d, 2 * t / d


def homogeneous(u) -> tuple[int, int, int]:
    """Integer (X, Y, W), W > 0, with circle_point(u) == (X/W, Y/W)."""
    u = Fraction(u) % 1
    if u == 0:
        return -1, 0, 1
    a, b = u.numerator, u.denominator
    p, q = (2 * a - b) * b, 2 * a * (b - a)
    return q * q - p * p, 2 * p * q, q * q + p * p


def orient(a, b, c) -> int:
    """Sign of the turn a -> b -> c; points are homogeneous integer triples with W > 0."""
    v = (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
         + a[2] * (b[0] * c[1] - b[1] * c[0]))
    return (v > 0) - (v < 0)


@dataclass
class IdealTriangulation:
    params: list[Fraction]                   # circle parameters in insertion order
    triangles: list[tuple[int, int, int]]    # indices into params, in insertion order

    def points(self) -> list[Point]:
        return [circle_point(u) for u in self.params]

    def homogeneous_points(self) -> list[tuple[int, int, int]]:
        return [homogeneous(u) for u in self.params]

    def prefix(self, j: int) -> list[tuple[int, int, int]]:
        """Triangles present once the first ``j`` points are in."""
        if j < 3:
            return []
        return self.triangles[:j - 2]


def ideal_triangulation(params: Sequence) -> IdealTriangulation:
    """Insert the points one at a time; each new point p lands between two consecutive
    vertices r, s of the current polygon and contributes the triangle p r s."""
    us = [Fraction(u) % 1 for u in params]
    if len(us) < 3:
        raise TriangulationError("hull is not a disk: need at least 3 points")
    if len(set(us)) != len(us):
        raise TriangulationError("points must be distinct")
    first = sorted(range(3), key=lambda i: us[i])
    tris = [tuple(first)]
    ring = list(first)                        # current polygon, counterclockwise by parameter
    for p in range(3, len(us)):
        vals = [us[i] for i in ring]
        pos = int(np.searchsorted(np.array(vals, dtype=object), us[p]))
        r, s = ring[pos - 1], ring[pos % len(ring)]
        tris.append((r, p, s))
        ring.insert(pos, p)
    return IdealTriangulation(us, tris)


def _ccw(tri, pts):
    a, b, c = (pts[i] for i in tri)
    return (tri if orient(a, b, c) > 0 else (tri[0], tri[2], tri[1]))


def interiors_disjoint(t1, t2, pts) -> bool:
    """Exact test: some edge of one triangle has the other triangle on its closed far side."""
    t1, t2 = _ccw(t1, pts), _ccw(t2, pts)
    for a, b in ((t1, t2), (t2, t1)):
        for i in range(3):
            p, q = pts[a[i]], pts[a[(i + 1) % 3]]
            if all(orient(p, q, pts[v]) <= 0 for v in b):
                return True
    return False


def polygon_area2(pts: Sequence[Point]) -> Fraction:
    s = Fraction(0)
    for (x0, y0), (x1, y1) in zip(pts, list(pts[1:]) + [pts[0]]):
        s += x0 * y1 - x1 * y0
    return s


@dataclass
class TriangulationCheck:
    count_ok: bool
    disjoint_ok: bool
    covers_hull: bool
    prefix_ok: bool

    @property
    def passed(self) -> bool:
        return self.count_ok and self.disjoint_ok and self.covers_hull and self.prefix_ok


def check_triangulation(tri: IdealTriangulation) -> TriangulationCheck:
    """Exact checks.  The prefix of j - 2 triangles must use only the first j points; with
    pairwise disjoint interiors that makes it a triangulation of those points, since any
    j - 2 such triangles in a convex j-gon already fill it."""
    hom = tri.homogeneous_points()
    n = len(hom)
    count_ok = len(tri.triangles) == n - 2
    disjoint = all(interiors_disjoint(a, b, hom)
                   for i, a in enumerate(tri.triangles) for b in tri.triangles[i + 1:])
    pts = tri.points()
    hull = sorted(range(n), key=lambda i: tri.params[i])
    area = sum(abs(polygon_area2([pts[v] for v in t])) for t in tri.triangles)
    covers = area == polygon_area2([pts[i] for i in hull])
    prefix_ok = all(max(t) < j + 3 for j, t in enumerate(tri.triangles))
    return TriangulationCheck(count_ok, disjoint, covers, prefix_ok)


def format_triangulation(tri: IdealTriangulation) -> str:
    lines = [f"points={len(tri.params)} triangles={len(tri.triangles)}"]
    for i, u in enumerate(tri.params):
        lines.append(f"point index={i} u={u}")
    for t in tri.triangles:
        lines.append(f"triangle {t[0]} {t[1]} {t[2]}")
    return "\n".join(lines) + "\n"


def parse_points(text: str) -> list[Fraction]:
    """One circle parameter per line (a rational such as 3/7 or 0.25, taken mod 1)."""
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(Fraction(line) % 1)
        except (ValueError, ZeroDivisionError):
            raise TriangulationError(f"line {lineno}: expected a rational circle parameter") from None
    return out


# -- laminations --------------------------------------------------------------------
#
# A loop with N letters is drawn on the circle as 2N arcs of equal parameter length:
# gap j (dwelling at the vertex before letter j) then letter j.  Cancelling letters i<j
# fold onto each other, giving the chords {letter i at s, letter j at 1-s}; gaps whose
# prefixes reduce to the same vertex of the tracking tree form one element.

@dataclass
class Lamination:
    letters: list[int]
    pairs: list[tuple[int, int]]
    gap_classes: list[list[int]]
    vertices: list[tuple[int, ...]]           # reduced prefix word for each gap
    checks: dict[str, bool] = field(default_factory=dict)
    coverage: float = 0.0
    samples: int = 0
    tolerance: float = 0.0

    @property
    def size(self) -> int:
        return len(self.letters)

    def gap_arc(self, j: int) -> tuple[Fraction, Fraction]:
        n = max(self.size, 1)
        return Fraction(2 * j, 2 * n), Fraction(2 * j + 1, 2 * n) if self.size else Fraction(1)

    def letter_arc(self, i: int) -> tuple[Fraction, Fraction]:
        n = self.size
        return Fraction(2 * i + 1, 2 * n), Fraction(2 * i + 2, 2 * n)

    def element_slots(self) -> list[set[int]]:
        """Each element as the set of arc slots it touches (gap j = 2j, letter i = 2i+1)."""
        out = [{2 * i + 1, 2 * j + 1} for i, j in self.pairs]
        out += [{2 * g for g in cls} for cls in self.gap_classes]
        return out

    def lines(self) -> list[str]:
        out = [f"lamination letters={self.size} pairs={len(self.pairs)} gap_classes={len(self.gap_classes)}"]
        for i, j in self.pairs:
            out.append(f"pair {i} {j}")
        for cls in self.gap_classes:
            out.append("class " + " ".join(str(g) for g in cls))
        for name in ("constant", "noncrossing", "filling"):
            out.append(f"property={name} {'pass' if self.checks.get(name) else 'fail'}")
        out.append(f"filling coverage={self.coverage:.6f} samples={self.samples} "
                   f"tolerance_cells={COVERAGE_TOLERANCE_CELLS}")
        return out


def _match(letters: Sequence[int]) -> list[tuple[int, int]] | None:
    stack: list[int] = []
    pairs = []
    for j, x in enumerate(letters):
        if stack and letters[stack[-1]] == -x:
            pairs.append((stack.pop(), j))
        else:
            stack.append(j)
    return None if stack else sorted(pairs)


def _interleaved(a: set[int], b: set[int]) -> bool:
    """Two disjoint slot sets interleave when b is not confined to one gap between a's slots."""
    sa = sorted(a)
    if len(sa) < 2 or not b:
        return False
    sides = set()
    for x in b:
        k = int(np.searchsorted(sa, x)) % len(sa)
        sides.add(k)
    return len(sides) > 1


def cancellation_lamination(letters: Sequence[int], sample_cells: int = 48) -> Lamination:
    """Lamination of the circle from the cancellation of a word that reduces to 1."""
    letters = [int(x) for x in letters]
    pairs = _match(letters)
    if pairs is None or reduce_word(letters):
        raise QuotientError("loop not nullhomotopic in M'")
    n = len(letters)
    vertices = [reduce_word(letters[:j]) for j in range(n)] if n else [()]
    parent = list(range(max(n, 1)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in pairs:
        for a, b in ((i, (j + 1) % n), (i + 1, j)):
            ra, rb = find(a % n), find(b % n)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    classes: dict[int, list[int]] = {}
    for g in range(max(n, 1)):
        classes.setdefault(find(g), []).append(g)
    lam = Lamination(letters, pairs, [classes[r] for r in sorted(classes)], vertices)

    constant = all(len({vertices[g] for g in cls}) == 1 for cls in lam.gap_classes)
    for i, j in pairs:
        ends_i = {vertices[i], vertices[(i + 1) % n]}
        ends_j = {vertices[j], vertices[(j + 1) % n]}
        constant &= ends_i == ends_j
    slots = lam.element_slots()
    noncrossing = all(not _interleaved(a, b) and not _interleaved(b, a)
                      for x, a in enumerate(slots) for b in slots[x + 1:])
    lam.coverage, lam.samples, lam.tolerance = filling_coverage(lam, sample_cells)
    lam.checks = {"constant": constant, "noncrossing": noncrossing, "filling": lam.coverage >= 1.0}
    return lam


def _xy(u) -> np.ndarray:
    """Float version of circle_point for an array of parameters, shape (m, 2)."""
    u = np.mod(np.asarray(u, dtype=float), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (u - 0.5) / (u * (1 - u))
        d = 1 + t * t
        out = np.stack([(1 - t * t) / d, 2 * t / d], axis=-1)
    out[u == 0] = (-1.0, 0.0)
    return out


def _arc_points(a: Fraction, b: Fraction) -> np.ndarray:
    count = max(6, int(np.ceil(96 * float(b - a))))
    return _xy(float(a) + (float(b) - float(a)) * np.arange(count + 1) / count)


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from points p (m, 2) to segments a-b (s, 2); returns (m, s)."""
    ab = b - a
    denom = np.maximum((ab * ab).sum(axis=1), 1e-30)
    t = np.clip(((p[:, None, :] - a[None]) * ab[None]).sum(axis=2) / denom[None], 0.0, 1.0)
    q = a[None] + t[..., None] * ab[None]
    return np.sqrt(((p[:, None, :] - q) ** 2).sum(axis=2))


def _polygon_distance(p: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Zero inside the convex polygon (counterclockwise), else distance to its boundary."""
    a, b = poly, np.roll(poly, -1, axis=0)
    cross = ((b - a)[None, :, 0] * (p[:, None, 1] - a[None, :, 1])
             - (b - a)[None, :, 1] * (p[:, None, 0] - a[None, :, 0]))
    inside = (cross >= -1e-12).all(axis=1)
    d = _segment_distance(p, a, b).min(axis=1)
    return np.where(inside, 0.0, d)


def filling_coverage(lam: Lamination, sample_cells: int = 48, chords: int = 32) -> tuple[float, int, float]:
    """Fraction of disk sample cells within tolerance of some element hull."""
    w = 2.0 / sample_cells
    tol = COVERAGE_TOLERANCE_CELLS * w
    c = -1 + w * (np.arange(sample_cells) + 0.5)
    xx, yy = np.meshgrid(c, c)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    pts = pts[(pts ** 2).sum(axis=1) <= 1.0]
    best = np.full(len(pts), np.inf)

    def update(dist_fn):
        open_ = best > tol
        if open_.any():
            best[open_] = np.minimum(best[open_], dist_fn(pts[open_]))

    for cls in lam.gap_classes:
        hull = np.concatenate([_arc_points(*lam.gap_arc(g)) for g in cls])
        order = np.argsort(np.arctan2(hull[:, 1] - hull[:, 1].mean(), hull[:, 0] - hull[:, 0].mean()))
        update(lambda p, h=hull[order]: _polygon_distance(p, h))
    ss = np.arange(chords + 1) / chords
    for i, j in lam.pairs:
        (a0, a1), (b0, b1) = (tuple(map(float, lam.letter_arc(x))) for x in (i, j))
        ends_a, ends_b = _xy(a0 + (a1 - a0) * ss), _xy(b1 - (b1 - b0) * ss)
        update(lambda p, ea=ends_a, eb=ends_b: _segment_distance(p, ea, eb).min(axis=1))
    return float((best <= tol).mean()) if len(pts) else 1.0, len(pts), tol


def loop_lamination(g: RunGraph, loop: Sequence[tuple[int, int]], sample_cells: int = 48) -> Lamination:
    return cancellation_lamination(edge_letters(g, loop), sample_cells)


# -- filling the disk -----------------------------------------------------------------

@dataclass
class DiskMap:
    assignments: list[tuple[str, Fraction, tuple[int, int], int]]   # element, u, image cell, node
    triangles: list[tuple[str, tuple[int, int, int]]]
    max_image_diameter: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.max_image_diameter <= self.bound

    def lines(self) -> list[str]:
        out = [f"extension vertices={len(self.assignments)} triangles={len(self.triangles)} "
               f"max_image_diameter={self.max_image_diameter:.6f} bound={self.bound:.6f} "
               f"continuity={'pass' if self.passed else 'fail'}"]
        for el, u, (r, c), node in self.assignments:
            out.append(f"vertex element={el} u={u} image={c},{r} node={node}")
        return out


def _stretches(g: RunGraph, loop) -> list[list[tuple[int, int]]]:
    """Loop cells grouped by node dwell, aligned with the walk's gaps."""
    nodes = [int(g.projection[r, c]) for r, c in loop]
    if len(set(nodes)) == 1:
        return [list(loop)]
    start = next(t for t in range(len(nodes)) if nodes[t] != nodes[t - 1])
    cells = list(loop[start:]) + list(loop[:start])
    ns = nodes[start:] + nodes[:start]
    out = [[cells[0]]]
    for cell, a, b in zip(cells[1:], ns, ns[1:]):
        if a != b:
            out.append([cell])
        else:
            out[-1].append(cell)
    # gap 0 is the dwell holding loop[0]; when that dwell wraps around it comes out last
    return out if start == 0 else out[-1:] + out[:-1]


def extend_filling(m: Raster, loop, lam: Lamination, graph: RunGraph | None = None,
                   bound: float | None = None) -> DiskMap:
    """Vertex images for each element's triangulation, read off the loop.

    Every vertex of a gap class must land in the class's single run, and both ends of a
    chord family in the runs at the ends of its edge; otherwise the lamination does not
    belong to this loop.  ``bound`` caps the image diameter of each triangle (default:
    the tallest run's length).
    """
    g = build_run_graph(m) if graph is None else graph
    loop = check_loop(m, loop)
    stretches = _stretches(g, loop)
    walk = node_walk(g, loop)
    n = lam.size
    if (n == 0) != (len(walk) <= 1) or (n and len(stretches) != n):
        raise QuotientError("decomposition mismatch: lamination and loop have different lengths")
    if bound is None:
        bound = float((g.runs[:, 2] - g.runs[:, 1]).max() + 1) / m.n if g.node_count else 0.0
    assignments, triangles = [], []
    worst = 0.0
    for ci, cls in enumerate(lam.gap_classes):
        name = f"class{ci}"
        verts: list[tuple[Fraction, tuple[int, int]]] = []
        for gap in cls:
            a, b = lam.gap_arc(gap)
            cells = stretches[gap] if n else stretches[0]
            verts.append((a, cells[0]))
            if n == 0 or len(cls) == 1:
                verts.append(((a + b) / 2, cells[len(cells) // 2]))
            verts.append((b, cells[-1]))
        if n == 0:
            verts = [(Fraction(0), loop[0]), (Fraction(1, 3), loop[0]), (Fraction(2, 3), loop[0])]
        nodes = {int(g.projection[c]) for _, c in verts}
        if len(nodes) != 1:
            raise QuotientError(f"decomposition mismatch: element {name} spans runs {sorted(nodes)}")
        node = nodes.pop()
        seen = {}
        for u, cell in verts:
            seen.setdefault(u % 1, cell)
        us = sorted(seen)
        for u in us:
            assignments.append((name, u, seen[u], node))
        if len(us) >= 3:
            tri = ideal_triangulation(us)
            for t in tri.triangles:
                imgs = np.array([seen[us[v]] for v in t], dtype=float)
                d = float(np.sqrt(((imgs[:, None] - imgs[None]) ** 2).sum(axis=2)).max()) / m.n
                worst = max(worst, d)
                triangles.append((name, t))
        elif len(us) == 2:
            a, b = (np.array(seen[u], dtype=float) for u in us)
            worst = max(worst, float(np.hypot(*(a - b))) / m.n)
    for pi, (i, j) in enumerate(lam.pairs):
        name = f"pair{pi}"
        ends = [(stretches[i][-1], stretches[(i + 1) % n][0]), (stretches[j][-1], stretches[(j + 1) % n][0])]
        # letter i leaves run u for run v; letter j comes back from v to u
        start_nodes = {int(g.projection[ends[0][0]]), int(g.projection[ends[1][1]])}
        end_nodes = {int(g.projection[ends[0][1]]), int(g.projection[ends[1][0]])}
        if len(start_nodes) != 1 or len(end_nodes) != 1:
            raise QuotientError(f"decomposition mismatch: chord family {name} joins different runs")
        (a0, a1), (b0, b1) = lam.letter_arc(i), lam.letter_arc(j)
        for u, cell in ((a0, ends[0][0]), (a1, ends[0][1]), (b0, ends[1][0]), (b1, ends[1][1])):
            assignments.append((name, u % 1, cell, int(g.projection[cell])))
        for p, q in ((ends[0][0], ends[1][1]), (ends[0][1], ends[1][0])):
            worst = max(worst, float(np.hypot(p[0] - q[0], p[1] - q[1])) / m.n)
    return DiskMap(assignments, triangles, worst, bound)
