"""Vertical decomposition of a planar continuum M and its quotient graph M'.

Every maximal vertical run of M-cells is one point of M'.  Runs in neighbouring columns
that touch horizontally are joined by an edge, so M' is a graph (the run graph).  Loops
in M get two words: one from signed crossings of vertical cuts placed over M's holes,
and one from the projected walk in the run graph.  Both groups are free, so a word is
empty exactly when its loop is nullhomotopic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from .raster import Raster, hausdorff_distance

Cell = tuple[int, int]
_EIGHT = np.ones((3, 3), dtype=bool)


class QuotientError(ValueError):
    pass


# -- adjusting M --------------------------------------------------------------------

def vertical_boundary_runs(m: Raster) -> np.ndarray:
    """Lengths, in cells, of the maximal vertical runs of boundary cells."""
    b = m.boundary().cells
    return _run_lengths(b)


def _run_lengths(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask, ((1, 1), (0, 0)))
    d = np.diff(padded.astype(np.int8), axis=0)
    starts = np.argwhere(d.T == 1)
    ends = np.argwhere(d.T == -1)
    return ends[:, 1] - starts[:, 1]


def deverticalize(m: Raster, eps: float, refine: int = 3) -> Raster:
    """Break up vertical boundary segments of length >= eps.

    Each refined row has its horizontal runs trimmed at both ends by a row-dependent
    amount (a sawtooth in 0..A-1 with steps one coarse cell tall), so vertical sides
    become staircases.  Returns ``m`` itself when it is already generic.
    """
    if not m.cells.any():
        raise QuotientError("deverticalize needs a nonempty set")
    if eps < 2 * m.width:
        raise QuotientError(f"epsilon below resolution: eps={eps} < 2 cell widths ({2 * m.width})")
    runs = vertical_boundary_runs(m)
    if not len(runs) or runs.max() * m.width < eps:
        return m
    f = 1 << refine
    if m.k + refine > 14:
        raise QuotientError("epsilon below resolution: refined raster too large")
    fine = m
    for _ in range(refine):
        fine = fine.refine()
    amp = f // 2 - 1
    cells = fine.cells.copy()
    n = cells.shape[0]
    for i in range(n):
        s = (i // f) % amp
        if not s:
            continue
        row = cells[i]
        padded = np.concatenate(([False], row, [False]))
        d = np.diff(padded.astype(np.int8))
        for a, b in zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)):
            row[a:a + s] = False
            row[max(b - s, a):b] = False
    out = Raster(fine.k, cells, m.includes_infinity)
    if (vertical_boundary_runs(out).max() * out.width >= eps
            or hausdorff_distance(out, fine) > eps):
        raise QuotientError("epsilon below resolution: shear could not break the vertical runs")
    return out


# -- run graph ------------------------------------------------------------------------

@dataclass
class RunGraph:
    k: int
    runs: np.ndarray            # (nodes, 3): column, top row, bottom row (inclusive)
    edges: np.ndarray           # (edges, 2): node pairs, smaller id first, sorted
    projection: np.ndarray      # cell -> node, -1 off M

    @property
    def node_count(self) -> int:
        return len(self.runs)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def node_of(self, cell: Cell) -> int:
        return int(self.projection[cell])

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(a), int(b)): i for i, (a, b) in enumerate(self.edges)}


def build_run_graph(m: Raster) -> RunGraph:
    """Runs numbered column by column, top run first."""
    cells = m.cells
    t = cells.T                                  # row of t = column of m
    above = np.zeros_like(t)
    above[:, 1:] = t[:, :-1]
    starts = t & ~above
    ids = np.cumsum(starts.ravel()).reshape(t.shape) - 1
    proj = np.where(t, ids, -1).T.copy()
    cols, tops = np.nonzero(starts)
    below = np.zeros_like(t)
    below[:, :-1] = t[:, 1:]
    _, bottoms = np.nonzero(t & ~below)
    runs = np.stack([cols, tops, bottoms], axis=1) if len(cols) else np.zeros((0, 3), np.int64)
    pair = cells[:, :-1] & cells[:, 1:]
    a = proj[:, :-1][pair]
    b = proj[:, 1:][pair]
    if len(a):
        edges = np.unique(np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1), axis=0)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return RunGraph(m.k, runs.astype(np.int64), edges.astype(np.int64), proj.astype(np.int64))


@dataclass
class UscReport:
    passed: bool
    pairs_checked: int
    witness: dict | None = None

    def lines(self) -> list[str]:
        w = "-" if self.witness is None else ";".join(f"{k}={v}" for k, v in sorted(self.witness.items()))
        return [f"usc pairs={self.pairs_checked} witness={w} verdict={'pass' if self.passed else 'fail'}"]


def usc_probe(ladder: Sequence[Raster]) -> UscReport:
    """Runs at each finer resolution must land inside single runs one level up.

    For every fine run the coarse cells under it are compared: they must all belong to
    one coarse run.  Pairs of fine runs landing in the same coarse cells are counted as
    checked pairs.  A ladder that is not 2x2-OR refinement consistent is malformed.
    """
    rs = sorted(ladder, key=lambda r: r.k)
    if len(rs) < 2:
        raise QuotientError("usc probe needs at least two resolutions")
    pairs = 0
    for coarse, fine in zip(rs, rs[1:]):
        if fine.k != coarse.k + 1:
            raise QuotientError(f"malformed ladder: resolutions {coarse.k} and {fine.k} are not consecutive")
        if fine.coarsen() != coarse:
            diff = np.argwhere(fine.coarsen().cells != coarse.cells)[0]
            raise QuotientError(f"malformed ladder: k={coarse.k} disagrees with coarsened k={fine.k} "
                                f"at {diff[0]},{diff[1]}")
        cg, fg = build_run_graph(coarse), build_run_graph(fine)
        landing: dict[tuple[int, int], int] = {}
        for node, (c, r0, r1) in enumerate(fg.runs):
            targets = np.unique(cg.projection[r0 // 2:r1 // 2 + 1, c // 2])
            if len(targets) != 1 or targets[0] < 0:
                return UscReport(False, pairs, {"k": int(fine.k), "run": int(node), "column": int(c),
                                                "rows": f"{r0}-{r1}"})
            for cr in range(r0 // 2, r1 // 2 + 1):
                key = (cr, int(c) // 2)
                if key in landing:
                    pairs += 1
                    if landing[key] != targets[0]:
                        return UscReport(False, pairs, {"k": int(fine.k), "cell": f"{key[0]},{key[1]}"})
                landing[key] = int(targets[0])
    return UscReport(True, pairs)


# -- words ---------------------------------------------------------------------------

def reduce_word(letters: Sequence[int]) -> tuple[int, ...]:
    out: list[int] = []
    for x in letters:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


@dataclass(frozen=True)
class LoopWord:
    letters: tuple[int, ...]
    base: Cell | None = None

    @property
    def empty(self) -> bool:
        return not self.letters

    def __str__(self) -> str:
        return format_word(self.letters)


def letter_name(x: int) -> str:
    g = abs(x) - 1
    name = chr(ord("a") + g) if g < 26 else f"g{g}"
    return name if x > 0 else name + "^-1"


def format_word(letters: Sequence[int]) -> str:
    return " ".join(letter_name(x) for x in letters) if letters else "1"


def check_loop(m: Raster, loop: Sequence[Cell]) -> list[Cell]:
    """Validate a closed 4-connected cell path inside m."""
    pts = [(int(r), int(c)) for r, c in loop]
    if not pts:
        raise QuotientError("loop is empty")
    n = m.n
    for r, c in pts:
        if not (0 <= r < n and 0 <= c < n) or not m.cells[r, c]:
            raise QuotientError(f"loop leaves M at {r},{c}")
    for a, b in zip(pts, pts[1:] + pts[:1]):
        if abs(a[0] - b[0]) + abs(a[1] - b[1]) > 1:
            raise QuotientError(f"loop jumps from {a[0]},{a[1]} to {b[0]},{b[1]}")
    return pts


# -- cuts over holes -----------------------------------------------------------------

@dataclass
class Cut:
    hole: int
    column: int          # cut runs along the line between columns x and x + 1
    top: int             # crossings count for rows top..bottom inclusive
    bottom: int
    target: int          # hole index the cut ends on, -1 for the unbounded side


@dataclass
class Holes:
    labels: np.ndarray   # complement label per cell, 0 on M
    bounded: list[int]   # complement labels of the bounded holes, in label order
    cuts: list[Cut] = field(default_factory=list)


def find_holes(m: Raster) -> Holes:
    lab, count = ndimage.label(~m.cells, _EIGHT)
    edge = set(np.unique(np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]])).tolist())
    return Holes(lab, [i for i in range(1, count + 1) if i not in edge])


def _cut_from(m: np.ndarray, lab: np.ndarray, h: int, x: int) -> Cut | None:
    rows = np.flatnonzero((lab[:, x] == h) & (lab[:, x + 1] == h))
    if not len(rows):
        return None
    r = int(rows[0]) - 1
    bottom = r
    while r >= 0 and m[r, x] and m[r, x + 1]:
        r -= 1
    if r < 0:
        target = 0
    else:
        hits = {int(lab[r, x]), int(lab[r, x + 1])} - {0}
        if h in hits:
            return None
        target = min(hits)
    if bottom < r + 1:
        return None
    return Cut(h, x, r + 1, bottom, target)


def assign_cuts(m: Raster, holes: Holes | None = None, rng: np.random.Generator | None = None) -> Holes:
    """One vertical cut per bounded hole, upward to another hole or to the outside.

    Columns are distinct, and the cut graph must be a forest rooted at the outside.
    Without ``rng`` the leftmost valid column is used; with it, a random valid one.
    """
    holes = find_holes(m) if holes is None else holes
    index = {h: i for i, h in enumerate(holes.bounded)}
    used: set[int] = set()
    cuts: list[Cut] = []
    for h in holes.bounded:
        xs = np.flatnonzero(((holes.labels[:, :-1] == h) & (holes.labels[:, 1:] == h)).any(axis=0))
        order = list(xs) if rng is None else list(rng.permutation(xs))
        chosen = None
        for x in order:
            if int(x) in used:
                continue
            cut = _cut_from(m.cells, holes.labels, h, int(x))
            if cut is not None:
                chosen = cut
                break
        if chosen is None:
            raise QuotientError(f"hole {index[h]} has no vertical cut to the outside")
        used.add(chosen.column)
        cuts.append(chosen)
    target = {c.hole: c.target for c in cuts}
    for c in cuts:
        seen, h = set(), c.hole
        while h in target:
            if h in seen:
                raise QuotientError("cuts form a cycle; reassign columns")
            seen.add(h)
            h = target[h]
    for c in cuts:
        c.hole = index[c.hole]
        c.target = index.get(c.target, -1)
    holes.cuts = cuts
    return holes


def loop_word_in_M(m: Raster, loop: Sequence[Cell], holes: Holes | None = None) -> LoopWord:
    """Reduced word of signed cut crossings; generator i+1 belongs to hole i.

    Crossing a cut right to left counts +1, so a counterclockwise loop around hole a
    (rows growing downward, so counterclockwise passes over the top leftward) reads "a".
    """
    pts = check_loop(m, loop)
    if holes is None:
        holes = assign_cuts(m)
    elif holes.bounded and not holes.cuts:
        holes = assign_cuts(m, holes)
    by_col: dict[int, list[Cut]] = {}
    for c in holes.cuts:
        by_col.setdefault(c.column, []).append(c)
    letters = []
    for (r0, c0), (r1, c1) in zip(pts, pts[1:] + pts[:1]):
        if r0 != r1 or c0 == c1:
            continue
        x, sign = (c0, -1) if c1 == c0 + 1 else (c1, 1)
        for cut in by_col.get(x, ()):
            if cut.top <= r0 <= cut.bottom:
                letters.append(sign * (cut.hole + 1))
    return LoopWord(reduce_word(letters), pts[0])


# -- projection into M' ---------------------------------------------------------------

@dataclass
class SpanningTree:
    parent: np.ndarray           # -1 at roots
    generators: dict[tuple[int, int], int]    # non-tree edge -> generator (1-based)


def spanning_tree(g: RunGraph) -> SpanningTree:
    """Canonical BFS forest: roots are the smallest unvisited nodes, neighbours in id order."""
    nn = g.node_count
    parent = np.full(nn, -1, dtype=np.int64)
    if not nn:
        return SpanningTree(parent, {})
    a, b = g.edges[:, 0], g.edges[:, 1]
    adj = coo_matrix((np.ones(2 * len(a)), (np.concatenate([a, b]), np.concatenate([b, a]))),
                     shape=(nn, nn)).tocsr()
    adj.sort_indices()
    seen = np.zeros(nn, dtype=bool)
    tree_edges = set()
    for root in range(nn):
        if seen[root]:
            continue
        order, pred = breadth_first_order(adj, root, directed=False, return_predecessors=True)
        seen[order] = True
        for v in order[1:]:
            parent[v] = pred[v]
            tree_edges.add((min(v, pred[v]), max(v, pred[v])))
    gens = {}
    for u, v in g.edges.tolist():
        if (u, v) not in tree_edges:
            gens[(u, v)] = len(gens) + 1
    return SpanningTree(parent, gens)


def node_walk(g: RunGraph, loop: Sequence[Cell]) -> list[int]:
    """Nodes visited by the loop, consecutive repeats collapsed (cyclically)."""
    nodes = [int(g.projection[r, c]) for r, c in loop]
    if any(x < 0 for x in nodes):
        raise QuotientError("loop leaves M")
    walk = [x for i, x in enumerate(nodes) if i == 0 or x != nodes[i - 1]]
    while len(walk) > 1 and walk[-1] == walk[0]:
        walk.pop()
    return walk


def project_loop_and_word(g: RunGraph, loop: Sequence[Cell], tree: SpanningTree | None = None) -> LoopWord:
    tree = spanning_tree(g) if tree is None else tree
    walk = node_walk(g, loop)
    letters = []
    for u, v in zip(walk, walk[1:] + walk[:1]):
        if u == v:
            continue
        gen = tree.generators.get((min(u, v), max(u, v)))
        if gen is not None:
            letters.append(gen if u < v else -gen)
    return LoopWord(reduce_word(letters), tuple(int(x) for x in loop[0]) if len(loop) else None)


def edge_letters(g: RunGraph, loop: Sequence[Cell]) -> list[int]:
    """The projected walk as directed-edge letters: +(e+1) along edge e=(u<v), -(e+1) back."""
    idx = g.edge_index()
    walk = node_walk(g, loop)
    out = []
    for u, v in zip(walk, walk[1:] + walk[:1]):
        if u != v:
            e = idx[(min(u, v), max(u, v))]
            out.append(e + 1 if u < v else -(e + 1))
    return out


@dataclass
class InjectivityRecord:
    word_m: LoopWord
    word_mp: LoopWord
    consistent: bool

    def line(self) -> str:
        return (f"word_M={self.word_m} word_Mprime={self.word_mp} "
                f"consistent={'yes' if self.consistent else 'no'}")


def injectivity_probe(m: Raster, loop: Sequence[Cell], graph: RunGraph | None = None,
                      holes: Holes | None = None, tree: SpanningTree | None = None) -> InjectivityRecord:
    """Both words empty or both nonempty; anything else is a counterexample."""
    g = build_run_graph(m) if graph is None else graph
    wm = loop_word_in_M(m, loop, holes)
    wp = project_loop_and_word(g, loop, tree)
    return InjectivityRecord(wm, wp, wm.empty == wp.empty)


# -- loops ----------------------------------------------------------------------------

def _grid_graph(mask: np.ndarray):
    n = mask.shape[0]
    idx = np.arange(n * n).reshape(n, n)
    rows, cols = [], []
    for a, b in ((mask[:, :-1] & mask[:, 1:], (idx[:, :-1], idx[:, 1:])),
                 (mask[:-1, :] & mask[1:, :], (idx[:-1, :], idx[1:, :]))):
        rows.append(b[0][a])
        cols.append(b[1][a])
    r, c = np.concatenate(rows), np.concatenate(cols)
    return coo_matrix((np.ones(2 * len(r)), (np.concatenate([r, c]), np.concatenate([c, r]))),
                      shape=(n * n, n * n)).tocsr()


def shortest_cell_path(m: Raster, a: Cell, b: Cell, graph=None) -> list[Cell]:
    n = m.n
    adj = _grid_graph(m.cells) if graph is None else graph
    _, pred = breadth_first_order(adj, a[0] * n + a[1], directed=False, return_predecessors=True)
    path = [b[0] * n + b[1]]
    while path[-1] != a[0] * n + a[1]:
        p = pred[path[-1]]
        if p < 0:
            raise QuotientError(f"no path from {a} to {b} inside M")
        path.append(p)
    return [divmod(int(x), n) for x in path[::-1]]


def random_loop(m: Raster, rng: np.random.Generator, waypoints: int = 4, base: Cell | None = None,
                graph=None) -> list[Cell]:
    """Closed loop through random cells of M's largest component, joined by shortest paths."""
    lab, count = ndimage.label(m.cells)
    sizes = np.bincount(lab.ravel())[1:]
    comp = np.argwhere(lab == (int(np.argmax(sizes)) + 1)) if count else np.zeros((0, 2), int)
    if not len(comp):
        raise QuotientError("M is empty")
    adj = _grid_graph(m.cells) if graph is None else graph
    start = tuple(int(v) for v in (base if base is not None else comp[rng.integers(len(comp))]))
    stops = [start] + [tuple(int(v) for v in comp[rng.integers(len(comp))]) for _ in range(waypoints)] + [start]
    loop: list[Cell] = [start]
    for a, b in zip(stops, stops[1:]):
        loop += shortest_cell_path(m, a, b, adj)[1:]
    if len(loop) > 1 and loop[-1] == loop[0]:
        loop.pop()
    return loop


def format_loop(loop: Sequence[Cell]) -> str:
    """``x,y;x,y;...`` with x the column and y the row."""
    return ";".join(f"{c},{r}" for r, c in loop)


def parse_loops(text: str) -> list[list[Cell]]:
    loops = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            pts = [tuple(int(v) for v in tok.split(",")) for tok in line.split(";") if tok.strip()]
        except ValueError:
            raise QuotientError(f"line {lineno}: expected x,y;x,y;...") from None
        if any(len(p) != 2 for p in pts):
            raise QuotientError(f"line {lineno}: expected x,y pairs")
        loops.append([(y, x) for x, y in pts])
    return loops


def concatenate(a: Sequence[Cell], b: Sequence[Cell]) -> list[Cell]:
    """Loop a followed by loop b; both must start at the same cell."""
    if tuple(a[0]) != tuple(b[0]):
        raise QuotientError("loops must share a basepoint")
    return list(a) + list(b)

