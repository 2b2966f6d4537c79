"""Tile the complement of the bad set with staged, punctured Peano domains.

Each stage lays a dyadic grid over the active open set, splits it into per-square
pieces, attaches the unpunctured pieces to punctured neighbours through grid-path
trees, and hands the punctured leftovers to the next, finer stage.  Every claim the
construction relies on is executed as a check and logged.

Geometry lives at the scene's finest resolution.  The active open set is a zone map:
cells with zone -1 are outside it, and cells of different zones are never adjacent
(the residual handed to the next stage is a union of piece interiors, which the old
grid lines keep apart).  Null-sequence checks compare each family with its 2x
coarsened image.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .characterize import AT_MOST_1, FAIL, PASS, default_probe_scales, homotopy_dimension_verdict, probe_verdicts
from .raster import Component, Raster, closed_diameter, format_raster, label_regions, parse_raster_lines
from .scenes import Scene
from .sequences import INCONCLUSIVE, NOT_NULL, NULL, default_schedule, null_sequence_verdict

MIN_MESH_CELLS = 4
OUTER = -1  # stands for the element outside the unit square
SLACK_CELLS = 3
_CROSS = ndimage.generate_binary_structure(2, 1)


class TilerError(ValueError):
    def __init__(self, message: str, claim: str | None = None, witness=None):
        super().__init__(message)
        self.claim = claim
        self.witness = witness


@dataclass
class ClaimCheck:
    stage: int
    claim: str
    status: str
    detail: str = ""

    def line(self) -> str:
        return f"claim={self.claim} stage={self.stage} status={self.status} {self.detail}".rstrip()


@dataclass
class GridStage:
    index: int
    mesh: Fraction
    side: int
    offset: tuple[int, int]
    squares: np.ndarray
    skeleton: np.ndarray
    zones: np.ndarray
    k: int
    outer_element: bool

    @property
    def active(self) -> np.ndarray:
        return self.zones >= 0

    @property
    def square_count(self) -> int:
        return int(len(np.unique(self.squares[self.active]))) if self.active.any() else 0


@dataclass
class Classification:
    pieces: np.ndarray          # per-square piece label per cell, -1 outside the active set
    piece_count: int
    punctured: np.ndarray       # bool per piece
    groups: np.ndarray          # label of the unpunctured group (component of the union) per cell
    group_count: int
    group_touches_border: np.ndarray
    outer_punctured: bool
    zones: np.ndarray
    checks: list[ClaimCheck] = field(default_factory=list)

    @property
    def unpunctured_pieces(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(~self.punctured)]


@dataclass
class Arc:
    cells: list[int]       # flat indices, from the attaching cell q to the target
    group: int
    piece: int
    tree: int


@dataclass
class Tree:
    puncture: int
    piece: int
    cells: set[int]
    arcs: list[int] = field(default_factory=list)


@dataclass
class AttachmentForest:
    arcs: list[Arc]
    trees: list[Tree]
    attachments: dict[int, int]          # group -> tree index, or OUTER
    thickened: list[np.ndarray]          # flat cell arrays, one per tree
    checks: list[ClaimCheck] = field(default_factory=list)


@dataclass
class Domain:
    stage: int
    cells: np.ndarray                    # flat indices
    punctures: list[tuple[int, int]]
    contains_infinity: bool = False
    core: np.ndarray | None = None
    groups: list[int] = field(default_factory=list)
    extras: int = 0
    diameter: float = 0.0


@dataclass
class PeanoTiling:
    k: int
    domains: list[Domain]
    residual: np.ndarray
    checks: list[ClaimCheck] = field(default_factory=list)
    coverage: list[float] = field(default_factory=list)
    stages: list[GridStage] = field(default_factory=list)
    residual_zones: np.ndarray | None = None

    def domain_mask(self, i: int) -> np.ndarray:
        n = 1 << self.k
        m = np.zeros(n * n, dtype=bool)
        m[self.domains[i].cells] = True
        return m.reshape(n, n)

    def label_map(self) -> np.ndarray:
        n = 1 << self.k
        out = np.full(n * n, -1, dtype=np.int64)
        for i, d in enumerate(self.domains):
            out[d.cells] = i
        return out.reshape(n, n)

    def report_lines(self) -> list[str]:
        lines = [f"k={self.k} domains={len(self.domains)} residual_cells={int(self.residual.sum())}"]
        for i, c in enumerate(self.coverage, start=1):
            lines.append(f"coverage stage={i} value={c:.6f}")
        for i, d in enumerate(self.domains):
            lines.append(f"domain index={i} stage={d.stage} cells={len(d.cells)} "
                         f"punctures={_format_punctures(d)} diameter={d.diameter:.6f}")
        lines += [c.line() for c in self.checks]
        return lines


# -- helpers ----------------------------------------------------------------------

def _coarsen_or(mask: np.ndarray) -> np.ndarray:
    n = mask.shape[0] // 2
    return mask.reshape(n, 2, n, 2).any(axis=(1, 3))


def _coarsen_and(mask: np.ndarray) -> np.ndarray:
    n = mask.shape[0] // 2
    return mask.reshape(n, 2, n, 2).all(axis=(1, 3))


def _flat_cells(cells: np.ndarray, n: int) -> np.ndarray:
    return cells[:, 0] * n + cells[:, 1]


def _members(labels: np.ndarray, count: int) -> list[np.ndarray]:
    """Flat cell indices of each label 0..count-1."""
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    srt = flat[order]
    starts = np.searchsorted(srt, np.arange(count))
    ends = np.searchsorted(srt, np.arange(count), side="right")
    return [order[a:b] for a, b in zip(starts, ends)]


def _zones_from(active) -> np.ndarray:
    return np.where(active, 0, -1) if active.dtype == bool else active


def _coarsen_zones(zones: np.ndarray) -> np.ndarray:
    """A coarse cell keeps its zone when all four fine cells share it."""
    n = zones.shape[0] // 2
    blk = zones.reshape(n, 2, n, 2)
    same = (blk == blk[:, :1, :, :1]).all(axis=(1, 3))
    first = blk[:, 0, :, 0]
    return np.where(same & (first >= 0), first, -1)


def _diam_flat(flat: np.ndarray, k: int) -> float:
    n = 1 << k
    return closed_diameter(Component(0, np.column_stack([flat // n, flat % n]), k))


def _two_scale_null(members: Sequence[np.ndarray], k: int, schedule) -> tuple[str, str]:
    """Null-consistency of a family of flat-index cell sets against its coarsened image."""
    if not members:
        return PASS, "members=0"
    n = 1 << k
    fine = [_diam_flat(m, k) for m in members]
    coarse = []
    for m in members:
        cells = np.unique(np.column_stack([(m // n) // 2, (m % n) // 2]), axis=0)
        coarse.append(closed_diameter(Component(0, cells, k - 1)))
    v = null_sequence_verdict([coarse, fine], schedule, [SLACK_CELLS / (1 << (k - 1)), SLACK_CELLS / n])
    status = {NULL: PASS, NOT_NULL: FAIL, INCONCLUSIVE: INCONCLUSIVE}[v.verdict]
    return status, f"members={len(members)} max_diameter={max(fine):.6f}"


def _probe_status(fine: np.ndarray, coarse: np.ndarray, k: int, schedule, scales,
                  punct_fine=None, punct_coarse=None, zones=None) -> tuple[str, str]:
    masks = {k - 1: coarse, k: fine}
    puncts = {k - 1: punct_coarse, k: punct_fine} if punct_fine is not None else None
    zmap = {k - 1: zones[0], k: zones[1]} if zones is not None else None
    tally = {NULL: 0, NOT_NULL: 0, INCONCLUSIVE: 0}
    witness = ""
    for probe, v, _ in probe_verdicts(masks, [k - 1, k], scales, schedule, 4, puncts, zmap):
        tally[v.verdict] += 1
        if v.verdict != NULL and not witness:
            witness = f" first={probe.scale}/{probe.row}/{probe.col}"
    status = FAIL if tally[NOT_NULL] else INCONCLUSIVE if tally[INCONCLUSIVE] else PASS
    return status, f"probes={sum(tally.values())} not_null={tally[NOT_NULL]}{witness}"


def _record(checks: list[ClaimCheck], stage: int, claim: str, status: str, detail: str, witness=None):
    checks.append(ClaimCheck(stage, claim, status, detail))
    if status == FAIL:
        raise TilerError(f"claim ({claim}) failed at stage {stage}: {detail}", claim, witness)


def _format_punctures(d: Domain) -> str:
    pts = [f"{r},{c}" for r, c in d.punctures]
    if d.contains_infinity:
        pts.append("inf")
    return ";".join(pts) if pts else "-"


def enumerate_punctures(scene: Scene, k: int) -> list[int]:
    """Finite punctures in a fixed order (depth, then listing order), as flat cells."""
    n = 1 << k
    seen, out = set(), []
    for r, c in scene.puncture_cells(k):
        f = r * n + c
        if f not in seen:
            seen.add(f)
            out.append(f)
    return out


# -- Step 1 -----------------------------------------------------------------------

def _skeleton_lines(n: int, side: int, off: int) -> np.ndarray:
    idx = np.arange(n)
    pos = (idx - off) % side
    return (pos == 0) | (pos == side - 1) | (idx == 0) | (idx == n - 1)


def impose_grid(scene: Scene, stage: int, mesh, active: np.ndarray | None = None,
                punctures: np.ndarray | None = None) -> GridStage:
    """Lay a grid of ``mesh``-sided squares, shifted so no grid-line cell holds a puncture.

    Grid-line cells are the first and last row and column of every square.  The first
    row shift and first column shift that work are taken, trying even shifts before
    odd ones.  ``active`` is a boolean mask
    or a zone map; it defaults to the complement of the bad set.
    """
    k = scene.finest
    n = 1 << k
    mesh = Fraction(mesh)
    if mesh <= 0 or mesh.numerator != 1 or mesh.denominator & (mesh.denominator - 1):
        raise TilerError(f"mesh must be a dyadic 1/2^j, got {mesh}")
    if stage >= 1 and mesh > Fraction(1, stage):
        raise TilerError(f"mesh {mesh} exceeds 1/{stage}")
    side = mesh * n
    if side.denominator != 1 or side < MIN_MESH_CELLS:
        raise TilerError("resolution too coarse for mesh")
    side = int(side)
    zones = _zones_from(~scene.bad_at(k).cells if active is None else np.asarray(active))
    if punctures is None:
        punctures = scene.puncture_mask(k)
    pr, pc = np.nonzero(punctures & (zones >= 0))

    def first_shift(coords):
        # even shifts first, so the grid also sits on cell boundaries one level coarser
        for off in list(range(0, side, 2)) + list(range(1, side, 2)):
            if not _skeleton_lines(n, side, off)[coords].any():
                return off
        return None

    dr, dc = first_shift(pr), first_shift(pc)
    if dr is None or dc is None:
        raise TilerError("resolution too coarse for mesh")
    blocks = n // side + 1
    rb = (np.arange(n) - dr) // side + 1
    cb = (np.arange(n) - dc) // side + 1
    squares = rb[:, None] * blocks + cb[None, :]
    skeleton = _skeleton_lines(n, side, dr)[:, None] | _skeleton_lines(n, side, dc)[None, :]
    return GridStage(stage, mesh, side, (dr, dc), squares, skeleton, zones.copy(), k,
                     outer_element=(stage <= 1))


# -- Step 2 -----------------------------------------------------------------------

def _pieces(zones: np.ndarray, squares: np.ndarray) -> tuple[np.ndarray, int]:
    """Label per-square components of the active set (4-adjacency, zones kept apart)."""
    k = zones.shape[0].bit_length() - 1
    active = zones >= 0
    ids = np.where(active, zones.astype(np.int64) * (int(squares.max()) + 1) + squares, -1)
    fam = label_regions(Raster(k, active), 4, ids)
    return fam.labels, len(fam)


def _punctured_pieces(pieces: np.ndarray, count: int, punct: np.ndarray) -> np.ndarray:
    hit = pieces[punct & (pieces >= 0)]
    return np.bincount(hit, minlength=count) > 0


def _unpunctured_groups(pieces, punctured, zones, outer_unpunctured: bool):
    """Components of the union of unpunctured pieces; with an unpunctured outer element,
    everything touching the border joins one group through it."""
    n = pieces.shape[0]
    unp = (pieces >= 0) & ~punctured[np.maximum(pieces, 0)]
    fam = label_regions(Raster(n.bit_length() - 1, unp), 4, zones)
    groups, count = fam.labels, len(fam)
    border = np.zeros((n, n), dtype=bool)
    border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
    touches = np.zeros(count, dtype=bool)
    touches[np.unique(groups[border & unp])] = True
    if outer_unpunctured and touches.any():
        first = int(np.flatnonzero(touches)[0])
        remap = np.arange(count)
        remap[touches] = first
        _, remap = np.unique(remap, return_inverse=True)
        groups[unp] = remap[groups[unp]]
        count = int(remap.max()) + 1 if count else 0
        t2 = np.zeros(count, dtype=bool)
        t2[remap[touches]] = True
        touches = t2
    return groups, count, touches


def classify_components(stage: GridStage, scene: Scene, punct: np.ndarray | None = None,
                        schedule=None) -> Classification:
    """Per-square pieces, the unpunctured groups, and claims (iii) and (iv)."""
    k = stage.k
    punct = scene.puncture_mask(k) if punct is None else punct
    punct = punct & stage.active
    schedule = default_schedule(k) if schedule is None else schedule
    outer_punctured = stage.outer_element and scene.infinity
    outer_unpunctured = stage.outer_element and not scene.infinity
    pieces, count = _pieces(stage.zones, stage.squares)
    punctured = _punctured_pieces(pieces, count, punct)
    groups, gcount, touches = _unpunctured_groups(pieces, punctured, stage.zones, outer_unpunctured)
    cls = Classification(pieces, count, punctured, groups, gcount, touches, outer_punctured, stage.zones)

    # (iii): the unpunctured groups, recomputed on the coarse grid, hold the same large members
    fine_members = _members(groups, gcount)
    cz = _coarsen_zones(stage.zones)
    cp, ccount = _pieces(cz, stage.squares[::2, ::2])
    cpunct = _punctured_pieces(cp, ccount, _coarsen_or(punct))
    cg, cgcount, _ = _unpunctured_groups(cp, cpunct, cz, outer_unpunctured)
    fine_d = [_diam_flat(m, k) for m in fine_members]
    coarse_d = [_diam_flat(m, k - 1) for m in _members(cg, cgcount)]
    v = null_sequence_verdict([coarse_d, fine_d], schedule, [SLACK_CELLS / (1 << (k - 1)), SLACK_CELLS / (1 << k)])
    status = {NULL: PASS, NOT_NULL: FAIL, INCONCLUSIVE: INCONCLUSIVE}[v.verdict]
    _record(cls.checks, stage.index, "iii", status, f"groups={gcount} coarse_groups={cgcount}")

    # (iv): each group borders a punctured piece (or the punctured outer element)
    bad = []
    for g in range(gcount):
        if outer_punctured and touches[g]:
            continue
        if _attachment(fine_members[g], pieces, punctured, stage.zones) is None:
            bad.append(g)
    if bad:
        m = fine_members[bad[0]]
        n = 1 << k
        witness = {"group": bad[0], "cells": len(m), "first_cell": (int(m[0] // n), int(m[0] % n))}
        _record(cls.checks, stage.index, "iv", FAIL,
                f"unattached_groups={len(bad)} first_cell={witness['first_cell'][0]},{witness['first_cell'][1]}",
                witness)
    _record(cls.checks, stage.index, "iv", PASS, f"groups={gcount}")
    return cls


# -- Step 3 -----------------------------------------------------------------------

_DIRS = ((0, 1), (1, 0), (0, -1), (-1, 0))


def _attachment(flat: np.ndarray, pieces: np.ndarray, punctured: np.ndarray, zones: np.ndarray):
    """Longest straight run of shared edges between a group and one punctured piece of
    the same zone.

    Returns (piece, q) where q is the piece-side cell at the middle of the run, or None.
    """
    n = pieces.shape[0]
    runs = {}
    rows, cols = flat // n, flat % n
    for d, (dr, dc) in enumerate(_DIRS):
        r2, c2 = rows + dr, cols + dc
        ok = (r2 >= 0) & (r2 < n) & (c2 >= 0) & (c2 < n)
        r1, c1, r2, c2 = rows[ok], cols[ok], r2[ok], c2[ok]
        lab = pieces[r2, c2]
        sel = (lab >= 0) & punctured[np.maximum(lab, 0)] & (zones[r2, c2] == zones[r1, c1])
        for a, b, x, y, l in zip(r1[sel].tolist(), c1[sel].tolist(), r2[sel].tolist(), c2[sel].tolist(),
                                 lab[sel].tolist()):
            line, pos = (b, a) if dc else (a, b)   # run along the shared grid line
            runs.setdefault((l, d, line), []).append((pos, x * n + y))
    best = None
    for (l, d, line), items in sorted(runs.items()):
        items.sort()
        start = 0
        for i in range(1, len(items) + 1):
            if i == len(items) or items[i][0] != items[i - 1][0] + 1:
                run = items[start:i]
                key = (-len(run), l, d, line, run[0][0])
                if best is None or key < best[0]:
                    best = (key, l, run[len(run) // 2][1])
                start = i
    if best is None:
        return None
    return best[1], best[2]


def _shortest_path(start: int, allowed: set[int], targets: set[int], n: int) -> list[int] | None:
    if start in targets:
        return [start]
    prev = {start: -1}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        r, c = divmod(cur, n)
        for dr, dc in _DIRS:
            rr, cc = r + dr, c + dc
            if not (0 <= rr < n and 0 <= cc < n):
                continue
            nxt = rr * n + cc
            if nxt in prev:
                continue
            if nxt in targets:
                path = [nxt]
                while cur != -1:
                    path.append(cur)
                    cur = prev[cur]
                return path[::-1]
            if nxt in allowed:
                prev[nxt] = cur
                queue.append(nxt)
    return None


def grow_forest(stage: GridStage, scene: Scene, cls: Classification, punct: np.ndarray | None = None,
                forced: Sequence[int] = (), schedule=None) -> AttachmentForest:
    """Attach every unpunctured group to a tree grown inside a punctured piece.

    Arcs are shortest grid paths that leave the grid lines right after their attaching
    cell and stop at the first puncture or earlier arc cell of the same piece.
    ``forced`` punctures get a tree even when no arc reaches them.
    """
    k = stage.k
    n = 1 << k
    punct = (scene.puncture_mask(k) if punct is None else punct) & stage.active
    schedule = default_schedule(k) if schedule is None else schedule
    pieces_flat = cls.pieces.ravel()
    skel_flat = stage.skeleton.ravel()
    punct_flat = set(np.flatnonzero(punct.ravel()).tolist())
    arcs: list[Arc] = []
    trees: list[Tree] = []
    owner: dict[int, int] = {}      # cell -> tree index
    attachments: dict[int, int] = {}
    checks: list[ClaimCheck] = []
    piece_cells: dict[int, np.ndarray] = {}

    def cells_of(piece):
        if piece not in piece_cells:
            piece_cells[piece] = np.flatnonzero(pieces_flat == piece)
        return piece_cells[piece]

    def tree_for(cell, piece):
        if cell in owner:
            return owner[cell]
        trees.append(Tree(cell, piece, {cell}))
        owner[cell] = len(trees) - 1
        return owner[cell]

    for g, flat in enumerate(_members(cls.groups, cls.group_count)):
        if cls.outer_punctured and cls.group_touches_border[g]:
            attachments[g] = OUTER
            continue
        att = _attachment(flat, cls.pieces, cls.punctured, cls.zones)
        if att is None:
            raise TilerError("attachment target unreachable", "iv", {"group": g})
        piece, q = att
        pc = cells_of(piece)
        in_piece = set(pc.tolist())
        allowed = {c for c in in_piece if not skel_flat[c]}
        targets = ({c for c in in_piece if c in punct_flat} | {c for c in in_piece if c in owner})
        path = _shortest_path(q, allowed, targets, n)
        if path is None:
            raise TilerError("attachment target unreachable", "vi", {"group": g, "q": divmod(q, n)})
        end = path[-1]
        t = owner[end] if end in owner else tree_for(end, piece)
        arcs.append(Arc(path, g, piece, t))
        trees[t].arcs.append(len(arcs) - 1)
        for c in path:
            owner[c] = t
            trees[t].cells.add(c)
        attachments[g] = t

    for f in forced:
        if f not in owner and punct.ravel()[f]:
            tree_for(f, int(pieces_flat[f]))

    # checks on arcs and trees
    off_skeleton = all(not skel_flat[c] for a in arcs for c in a.cells[1:])
    _record(checks, stage.index, "arcs-avoid-grid", PASS if off_skeleton else FAIL, f"arcs={len(arcs)}")
    status, detail = _two_scale_null([np.asarray(a.cells) for a in arcs], k, schedule)
    _record(checks, stage.index, "v", status, detail)
    tails = _tail_diameters(arcs, k)
    mono = all(a >= b - 1e-12 for a, b in zip(tails, tails[1:]))
    in_square = all(len({int(stage.squares.ravel()[c]) for c in t.cells}) == 1 for t in trees)
    one_puncture = all(sum(1 for c in t.cells if c in punct_flat) == 1 for t in trees)
    _record(checks, stage.index, "vi", PASS if (mono and in_square and one_puncture) else FAIL,
            f"trees={len(trees)} tail_max={tails[0] if tails else 0:.6f} "
            f"single_square={int(in_square)} one_puncture={int(one_puncture)}")
    status, detail = _two_scale_null([np.fromiter(t.cells, dtype=np.int64) for t in trees], k, schedule)
    _record(checks, stage.index, "v-trees", status, detail)

    thickened = _thicken(trees, cls.pieces, punct_flat, k)
    return AttachmentForest(arcs, trees, attachments, thickened, checks)


def _tail_diameters(arcs: list[Arc], k: int) -> list[float]:
    """Largest component diameter of arcs[j:] for each j."""
    if not arcs:
        return []
    parent = list(range(len(arcs)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    where: dict[int, int] = {}
    comp_cells: dict[int, list[int]] = {}
    out = [0.0] * len(arcs)
    best = 0.0
    for j in range(len(arcs) - 1, -1, -1):
        comp_cells[j] = list(arcs[j].cells)
        for c in arcs[j].cells:
            if c in where:
                a, b = find(where[c]), find(j)
                if a != b:
                    parent[a] = b
                    comp_cells[b] += comp_cells.pop(a)
            where[c] = j
        root = find(j)
        best = max(best, _diam_flat(np.asarray(comp_cells[root]), k))
        out[j] = best
    return out


def _thicken(trees: list[Tree], pieces: np.ndarray, punct_flat: set[int], k: int) -> list[np.ndarray]:
    """Grow each tree by its 4-neighbours inside its piece, larger trees first, never
    taking another tree's cells or another puncture."""
    n = 1 << k
    pieces_flat = pieces.ravel()
    taken = {c for t in trees for c in t.cells}
    order = sorted(range(len(trees)), key=lambda i: (-_diam_flat(np.fromiter(trees[i].cells, np.int64), k), i))
    out: list[np.ndarray] = [np.zeros(0, np.int64)] * len(trees)
    for i in order:
        t = trees[i]
        grown = set(t.cells)
        for c in t.cells:
            r, col = divmod(c, n)
            for dr, dc in _DIRS:
                rr, cc = r + dr, col + dc
                if 0 <= rr < n and 0 <= cc < n:
                    x = rr * n + cc
                    if pieces_flat[x] == t.piece and x not in taken and x not in punct_flat:
                        grown.add(x)
                        taken.add(x)
        out[i] = np.array(sorted(grown), dtype=np.int64)
    return out


# -- Steps 4 to 6 -----------------------------------------------------------------

def assemble_domains(stage: GridStage, scene: Scene, forest: AttachmentForest, cls: Classification,
                     punct: np.ndarray | None = None, schedule=None) -> PeanoTiling:
    """Carve cores out of their pieces, attach the groups and the new unpunctured
    leftovers, and return this stage's domains plus the punctured residual."""
    k = stage.k
    n = 1 << k
    punct = (scene.puncture_mask(k) if punct is None else punct) & stage.active
    schedule = default_schedule(k) if schedule is None else schedule
    checks: list[ClaimCheck] = []
    core_id = np.full(n * n, -1, dtype=np.int64)
    for i, cells in enumerate(forest.thickened):
        core_id[cells] = i
    piece_cells = _members(cls.pieces, cls.piece_count)
    carved = sorted({t.piece for t in forest.trees})
    residual = np.full(n * n, -1, dtype=np.int64)
    zone = 0
    for p in np.flatnonzero(cls.punctured):
        if p not in carved:
            residual[piece_cells[p]] = zone
            zone += 1

    extras: list[list[np.ndarray]] = [[] for _ in forest.trees]
    leftovers = []
    punct_flat = punct.ravel()
    core2d = core_id.reshape(n, n)
    for p in carved:
        cells = piece_cells[p]
        cells = cells[core_id[cells] < 0]
        if not len(cells):
            continue
        r, c = cells // n, cells % n
        r0, c0 = r.min(), c.min()
        box = np.zeros((r.max() - r0 + 1, c.max() - c0 + 1), dtype=bool)
        box[r - r0, c - c0] = True
        lab, count = ndimage.label(box, _CROSS)
        ids = lab[r - r0, c - c0]
        for j, flat in enumerate(_members(ids - 1, count)):
            flat = cells[flat]
            if punct_flat[flat].any():
                residual[flat] = zone
                zone += 1
                continue
            leftovers.append(flat)
            extras[_adjacent_core(flat, core2d)].append(flat)

    status, detail = _two_scale_null(leftovers, k, schedule)
    _record(checks, stage.index, "vii", status, detail)

    domains: list[Domain] = []
    group_cells = _members(cls.groups, cls.group_count)
    groups_of: dict[int, list[int]] = {}
    for g, t in forest.attachments.items():
        groups_of.setdefault(t, []).append(g)
    for i, t in enumerate(forest.trees):
        parts = [forest.thickened[i]] + [group_cells[g] for g in groups_of.get(i, [])] + extras[i]
        cells = np.unique(np.concatenate(parts))
        domains.append(Domain(stage.index, cells, [divmod(t.puncture, n)], False, forest.thickened[i],
                              sorted(groups_of.get(i, [])), len(extras[i])))
    if OUTER in groups_of:
        gs = sorted(groups_of[OUTER])
        cells = np.unique(np.concatenate([group_cells[g] for g in gs]))
        domains.append(Domain(stage.index, cells, [], True, None, gs, 0))
    elif stage.outer_element and scene.infinity:
        domains.append(Domain(stage.index, np.zeros(0, np.int64), [], True, None, [], 0))
    for d in domains:
        d.diameter = _diam_flat(d.cells, k) if len(d.cells) else 0.0
        if not scene.infinity and len(d.cells) and _touches_border(d.cells, n):
            d.contains_infinity = d.contains_infinity or any(cls.group_touches_border[g] for g in d.groups)

    _check_domains(domains, stage, k, schedule, checks)
    res = residual.reshape(n, n)
    _check_residual(res, punct, zone, stage, k, schedule, checks)
    return PeanoTiling(k, domains, res >= 0, checks, residual_zones=res)


def _touches_border(flat: np.ndarray, n: int) -> bool:
    r, c = flat // n, flat % n
    return bool(((r == 0) | (r == n - 1) | (c == 0) | (c == n - 1)).any())


def _adjacent_core(flat: np.ndarray, core: np.ndarray) -> int:
    """Core sharing the most edges with the cell set (lowest index on ties)."""
    n = core.shape[0]
    r, c = flat // n, flat % n
    counts: dict[int, int] = {}
    for dr, dc in _DIRS:
        rr, cc = r + dr, c + dc
        ok = (rr >= 0) & (rr < n) & (cc >= 0) & (cc < n)
        for x in core[rr[ok], cc[ok]].tolist():
            if x >= 0:
                counts[x] = counts.get(x, 0) + 1
    if not counts:
        raise TilerError("leftover piece touches no core", "vii")
    return min(counts, key=lambda c: (-counts[c], c))


def _check_domains(domains: list[Domain], stage: GridStage, k: int, schedule, checks: list[ClaimCheck]):
    n = 1 << k
    owned = np.zeros(n * n, dtype=np.int64)
    for d in domains:
        owned[d.cells] += 1
    disjoint = bool((owned <= 1).all())
    punctured = all(d.punctures or d.contains_infinity for d in domains)
    _record(checks, stage.index, "domains-disjoint", PASS if disjoint else FAIL, f"domains={len(domains)}")
    _record(checks, stage.index, "domains-punctured", PASS if punctured else FAIL, f"domains={len(domains)}")
    bounded = [d for d in domains if not d.contains_infinity]
    worst = max((d.diameter for d in bounded), default=0.0)
    ok = stage.index < 1 or worst <= 1.0 / stage.index + 1e-12
    _record(checks, stage.index, "diameter", PASS if ok else FAIL,
            f"max={worst:.6f} bound={1.0 / max(stage.index, 1):.6f}")

    # (viii): each domain passes the probe test for Peano domains
    scales = default_probe_scales([k - 1, k])
    statuses, worst_detail = [], ""
    for i, d in enumerate(domains):
        if not len(d.cells):
            continue
        m = np.zeros(n * n, dtype=bool)
        m[d.cells] = True
        m = m.reshape(n, n)
        status, detail = _probe_status(m, _coarsen_or(m), k, schedule, scales)
        statuses.append(status)
        if status != PASS and not worst_detail:
            worst_detail = f" first_domain={i} {detail}"
    status = FAIL if FAIL in statuses else INCONCLUSIVE if INCONCLUSIVE in statuses else PASS
    _record(checks, stage.index, "viii", status, f"domains={len(statuses)}{worst_detail}")


def _check_residual(zones: np.ndarray, punct: np.ndarray, count: int, stage: GridStage, k: int, schedule,
                    checks: list[ClaimCheck]):
    res = zones >= 0
    hit = set(np.unique(zones[punct & res]).tolist())
    unpunctured = [j for j in range(count) if j not in hit]
    status1 = PASS if not unpunctured else FAIL
    cz = _coarsen_zones(zones)
    status2, detail2 = _probe_status(res, cz >= 0, k, schedule, default_probe_scales([k - 1, k]),
                                     punct & res, _coarsen_or(punct & res), (cz, zones))
    status = FAIL if FAIL in (status1, status2) else INCONCLUSIVE if INCONCLUSIVE in (status1, status2) else PASS
    _record(checks, stage.index, "ix", status,
            f"components={count} unpunctured={len(unpunctured)} condition2={status2} {detail2}")


# -- Step 7 -----------------------------------------------------------------------

def default_mesh(stage: int) -> Fraction:
    return Fraction(1, 1 << (stage + 1))


def run_stages(scene: Scene, stages: int, schedule=None, check_verdict: bool = True) -> PeanoTiling:
    """Run ``stages`` rounds of the construction and log every claim check."""
    if stages < 1:
        raise TilerError("need at least one stage")
    if check_verdict:
        verdict = homotopy_dimension_verdict(scene)
        if verdict.verdict != AT_MOST_1:
            witness = (verdict.cond1.witnesses or verdict.cond2.witnesses or [None])[0]
            raise TilerError("scene is not homotopically 1-dimensional", None, witness)
    k = scene.finest
    n = 1 << k
    schedule = default_schedule(k) if schedule is None else schedule
    punct_all = scene.puncture_mask(k)
    order = enumerate_punctures(scene, k)
    active = ~scene.bad_at(k).cells
    trivial = bool(active.all())
    zones = _zones_from(active)
    base = active & ~punct_all
    total = int(base.sum())
    covered = np.zeros((n, n), dtype=bool)
    result = PeanoTiling(k, [], active.copy())
    for i in range(1, stages + 1):
        grid = impose_grid(scene, i, default_mesh(i), zones, punct_all)
        punct = punct_all & grid.active
        cls = classify_components(grid, scene, punct, schedule)
        if trivial:
            # empty bad set: every puncture gets its own domain at once (bouquet of circles)
            forced = order
        else:
            forced = [order[i - 1]] if i - 1 < len(order) else []
        forest = grow_forest(grid, scene, cls, punct, forced, schedule)
        tiling = assemble_domains(grid, scene, forest, cls, punct, schedule)
        result.checks += cls.checks + forest.checks + tiling.checks
        result.domains += tiling.domains
        result.stages.append(grid)
        for d in tiling.domains:
            covered.ravel()[d.cells] = True
        # (x): the i-th puncture sits in a domain of some stage <= i
        if i - 1 < len(order):
            p = order[i - 1]
            found = any(p in set(d.cells.tolist()) for d in result.domains)
            _record(result.checks, i, "x", PASS if found else FAIL, f"puncture={p // n},{p % n}")
        else:
            _record(result.checks, i, "x", PASS, "no puncture scheduled")
        cov = float((covered & base).sum() / total) if total else 1.0
        result.coverage.append(cov)
        mono = all(a <= b + 1e-15 for a, b in zip(result.coverage, result.coverage[1:]))
        _record(result.checks, i, "xi", PASS if mono else FAIL, f"coverage={cov:.6f}")
        zones = tiling.residual_zones
        result.residual = tiling.residual
        result.residual_zones = zones
        if not tiling.residual.any():
            # nothing left; later stages are empty but still logged
            used = set(np.concatenate([d.cells for d in result.domains]).tolist())
            for j in range(i + 1, stages + 1):
                result.coverage.append(cov)
                for claim in ("iii", "iv", "v", "vi", "vii", "viii", "ix"):
                    result.checks.append(ClaimCheck(j, claim, PASS, "empty stage"))
                if j - 1 < len(order):
                    p = order[j - 1]
                    _record(result.checks, j, "x", PASS if p in used else FAIL, f"puncture={p // n},{p % n}")
                else:
                    _record(result.checks, j, "x", PASS, "no puncture scheduled")
                result.checks.append(ClaimCheck(j, "xi", PASS, f"coverage={cov:.6f}"))
            break
    status, detail = _two_scale_null([d.cells for d in result.domains if len(d.cells) and not d.contains_infinity],
                                     k, schedule)
    _record(result.checks, stages, "domains-null", status, detail)
    return result


CLAIMS = ("iii", "iv", "v", "vi", "vii", "viii", "ix", "x", "xi")


def missing_claims(tiling: PeanoTiling, stages: int) -> list[tuple[int, str]]:
    """(stage, claim) pairs that have no logged check; a valid run has none."""
    logged = {(c.stage, c.claim) for c in tiling.checks}
    return [(i, c) for i in range(1, stages + 1) for c in CLAIMS if (i, c) not in logged]


# -- file format ------------------------------------------------------------------

TILING_HEADER = "PH-TILING"


def format_tiling(tiling: PeanoTiling, scene_name: str = "") -> str:
    n = 1 << tiling.k
    lines = [f"{TILING_HEADER} scene={scene_name or '-'} k={tiling.k} domains={len(tiling.domains)}"]
    for i, d in enumerate(tiling.domains):
        lines.append(f"domain stage={d.stage} punctures={_format_punctures(d)}")
        m = np.zeros(n * n, dtype=bool)
        m[d.cells] = True
        lines += format_raster(Raster(tiling.k, m.reshape(n, n))).splitlines()
    return "\n".join(lines) + "\n"


def parse_tiling(text: str) -> PeanoTiling:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(TILING_HEADER):
        raise ValueError("missing PH-TILING header")
    fields = dict(t.split("=", 1) for t in lines[0].split()[1:])
    k = int(fields["k"])
    domains = []
    i = 1
    while i < len(lines):
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        if not line.startswith("domain "):
            raise ValueError(f"line {i + 1}: expected a domain block")
        f = dict(t.split("=", 1) for t in line.split()[1:])
        raster, i = parse_raster_lines(lines, i + 1)
        pts, inf = [], False
        for tok in f.get("punctures", "-").split(";"):
            if tok == "inf":
                inf = True
            elif tok != "-":
                r, c = tok.split(",")
                pts.append((int(r), int(c)))
        cells = np.flatnonzero(raster.cells.ravel())
        domains.append(Domain(int(f["stage"]), cells, pts, inf))
    n = 1 << k
    return PeanoTiling(k, domains, np.zeros((n, n), dtype=bool))


def write_tiling(tiling: PeanoTiling, path, scene_name: str = "") -> None:
    Path(path).write_text(format_tiling(tiling, scene_name))
