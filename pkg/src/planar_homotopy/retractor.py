"""One-dimensional spines for punctured domains.

A spine is the domain's boundary plus, for every puncture but the root, a small square
circle around it and a shortest arc from that circle out to the boundary.  The domain
minus its punctures deformation-retracts onto it: each region left over holds exactly
one puncture.

Boundaries are drawn one cell per boundary edge so that neighbouring domains agree on
where their common boundary lies.  An edge touching a closed cell (the bad set, or
anything no domain covers) is drawn on that cell; otherwise it is drawn on the upper or
left cell of the pair.
"""
from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .raster import Raster, format_raster

Cell = tuple[int, int]
_CROSS = ndimage.generate_binary_structure(2, 1)
_DIRS = ((-1, 0), (0, -1), (0, 1), (1, 0))
# Chebyshev gaps: puncture to boundary (ring plus one free cell), and puncture to puncture
MIN_BOUNDARY_GAP = 3
MIN_SEPARATION = 4


class SpineError(ValueError):
    pass


@dataclass
class Region:
    cells: np.ndarray             # (m, 2) row/col
    puncture: Cell | None         # None marks the point at infinity


@dataclass
class Spine:
    skeleton: Raster
    boundary: Raster
    regions: list[Region]
    radial_arcs: list[list[Cell]]
    puncture_circles: list[list[Cell]]
    root: Cell | None
    absorbed: int = 0             # puncture-free pockets folded into the skeleton

    def region_of(self, cell: Cell) -> int:
        for i, reg in enumerate(self.regions):
            if ((reg.cells[:, 0] == cell[0]) & (reg.cells[:, 1] == cell[1])).any():
                return i
        return -1


def boundary_cells(u: np.ndarray, closed: np.ndarray | None = None, open_frame: bool = False) -> np.ndarray:
    """One cell per boundary edge of ``u``, chosen canonically."""
    closed = np.zeros_like(u) if closed is None else closed & ~u
    out = np.zeros_like(u)
    for axis in (0, 1):
        lo = (slice(None, -1), slice(None)) if axis == 0 else (slice(None), slice(None, -1))
        hi = (slice(1, None), slice(None)) if axis == 0 else (slice(None), slice(1, None))
        edge = u[lo] ^ u[hi]
        on_hi = edge & u[lo] & closed[hi]
        out[lo] |= edge & ~on_hi
        out[hi] |= on_hi
    if not open_frame:
        frame = np.zeros_like(u)
        frame[0, :] = frame[-1, :] = frame[:, 0] = frame[:, -1] = True
        out |= frame & u
    return out


def _has_block(mask: np.ndarray) -> Cell | None:
    blocks = mask[:-1, :-1] & mask[1:, :-1] & mask[:-1, 1:] & mask[1:, 1:]
    hit = np.argwhere(blocks)
    return (int(hit[0][0]), int(hit[0][1])) if len(hit) else None


def _block_near(mask: np.ndarray, r: int, c: int) -> bool:
    n = mask.shape[0]
    for r0 in (r - 1, r):
        for c0 in (c - 1, c):
            if 0 <= r0 < n - 1 and 0 <= c0 < n - 1 and mask[r0:r0 + 2, c0:c0 + 2].all():
                return True
    return False


def _ring(p: Cell) -> list[Cell]:
    r, c = p
    return [(r + dr, c + dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if dr or dc]


def _check_preconditions(u: np.ndarray, boundary: np.ndarray, punctures: list[Cell], root: Cell | None):
    n = u.shape[0]
    blocked = boundary | ~u
    for p in punctures:
        r, c = p
        if not (0 <= r < n and 0 <= c < n) or not u[r, c]:
            raise SpineError(f"puncture {r},{c} is not inside the domain")
        if p == root:
            if boundary[r, c]:
                raise SpineError(f"resolution too coarse: root puncture {r},{c} lies on the boundary")
            continue
        g = MIN_BOUNDARY_GAP - 1
        if r - g < 0 or c - g < 0 or r + g >= n or c + g >= n or blocked[r - g:r + g + 1, c - g:c + g + 1].any():
            raise SpineError(f"resolution too coarse: puncture {r},{c} within {g} cells of the boundary")
    for i, p in enumerate(punctures):
        for q in punctures[i + 1:]:
            if max(abs(p[0] - q[0]), abs(p[1] - q[1])) < MIN_SEPARATION:
                raise SpineError(f"resolution too coarse: punctures {p[0]},{p[1]} and {q[0]},{q[1]} "
                                 f"closer than {MIN_SEPARATION} cells")


def _radial_arc(u, skel, ring: list[Cell], targets: np.ndarray, avoid: np.ndarray) -> list[Cell] | None:
    """Shortest 4-path from the ring to a cell touching ``targets``, keeping clear of
    ``avoid`` except at its last cell and never closing a 2x2 block."""
    n = u.shape[0]
    prev: dict[Cell, Cell | None] = {}
    queue = deque()
    for cell in ring:
        prev[cell] = None
        queue.append(cell)
    while queue:
        cur = queue.popleft()
        for dr, dc in _DIRS:
            y = (cur[0] + dr, cur[1] + dc)
            if y in prev or not (0 <= y[0] < n and 0 <= y[1] < n) or not u[y] or skel[y]:
                continue
            prev[y] = cur
            touches = any(0 <= y[0] + a < n and 0 <= y[1] + b < n and targets[y[0] + a, y[1] + b]
                          for a, b in _DIRS)
            if touches:
                path = []
                node: Cell | None = y
                while node is not None and node not in ring:
                    path.append(node)
                    node = prev[node]
                trial = skel.copy()
                for cell in path:
                    trial[cell] = True
                if not any(_block_near(trial, *cell) for cell in path):
                    return path[::-1]
                continue
            if not avoid[y]:
                queue.append(y)
    return None


def build_spine(u: Raster | np.ndarray, punctures: Sequence[Cell], closed: Raster | np.ndarray | None = None,
                infinity: bool = False, open_frame: bool | None = None) -> Spine:
    """Spine of the domain ``u`` punctured at ``punctures`` (and at infinity if asked).

    The root puncture, around which no circle is drawn, is infinity when it is a
    puncture and the first listed puncture otherwise.  ``closed`` marks cells outside
    the domain that take the boundary edges they share with it (the bad set, uncovered
    cells).  ``open_frame`` says the domain continues past the unit square (it
    defaults to ``infinity``).
    """
    mask = u.cells if isinstance(u, Raster) else np.asarray(u, dtype=bool)
    k = int(np.log2(mask.shape[0]))
    closed_m = None if closed is None else (closed.cells if isinstance(closed, Raster) else np.asarray(closed, bool))
    open_frame = infinity if open_frame is None else open_frame
    pts = [(int(r), int(c)) for r, c in punctures]
    if not pts and not infinity:
        raise SpineError("a spine needs at least one puncture")
    root = None if infinity else pts[0]
    bnd = boundary_cells(mask, closed_m, open_frame)
    _check_preconditions(mask, bnd, pts, root)
    if (w := _has_block(bnd)) is not None:
        raise SpineError(f"resolution too coarse: boundary has a filled 2x2 block at {w[0]},{w[1]}")

    skel = bnd.copy()
    others = [p for p in pts if p != root]
    circles = [_ring(p) for p in others]
    for ring in circles:
        for cell in ring:
            skel[cell] = True
    connected = bnd.copy()
    fence = np.zeros_like(mask)
    if root is not None:
        fence[max(root[0] - 1, 0):root[0] + 2, max(root[1] - 1, 0):root[1] + 2] = True
    arcs: list[list[Cell]] = []
    for p, ring in zip(others, circles):
        own = np.zeros_like(mask)
        for cell in ring:
            own[cell] = True
        if not connected.any():
            # nothing to attach to yet (open frame, no boundary): the circle stands alone
            arcs.append([])
            connected |= own
            continue
        avoid = ndimage.binary_dilation(skel & ~own, structure=np.ones((3, 3), bool)) | fence
        path = _radial_arc(mask, skel, ring, connected, avoid)
        if path is None:
            raise SpineError(f"resolution too coarse: no radial arc from puncture {p[0]},{p[1]}")
        arcs.append(path)
        for cell in path:
            skel[cell] = True
        connected |= own
        for cell in path:
            connected[cell] = True

    regions, absorbed = _regions(mask, skel, pts, infinity)
    if (w := _has_block(skel)) is not None:
        raise SpineError(f"resolution too coarse: skeleton has a filled 2x2 block at {w[0]},{w[1]}")
    return Spine(Raster(k, skel), Raster(k, bnd), regions, arcs, circles, root, absorbed)


def _regions(mask, skel, pts, infinity) -> tuple[list[Region], int]:
    """Label the regions, folding puncture-free pockets into the skeleton when that keeps
    it thin.  Mutates ``skel``."""
    absorbed = 0
    while True:
        lab, count = ndimage.label(mask & ~skel, _CROSS)
        owner: dict[int, list[Cell]] = {}
        for p in pts:
            if lab[p] == 0:
                raise SpineError(f"puncture {p[0]},{p[1]} fell on the skeleton")
            owner.setdefault(int(lab[p]), []).append(p)
        free = [i for i in range(1, count + 1) if i not in owner]
        if infinity and free:
            # the infinity region: the free region touching the frame, else the largest
            sizes = ndimage.sum_labels(np.ones_like(lab), lab, free)
            edge = set(np.unique(np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]])).tolist())
            ranked = sorted(zip(free, sizes), key=lambda t: (t[0] not in edge, -t[1], t[0]))
            owner[ranked[0][0]] = [None]
            free = [i for i in free if i != ranked[0][0]]
        if not free:
            break
        for i in free:
            cells = np.argwhere(lab == i)
            trial = skel.copy()
            trial[cells[:, 0], cells[:, 1]] = True
            if any(_block_near(trial, int(r), int(c)) for r, c in cells):
                r, c = cells[0]
                raise SpineError(f"resolution too coarse: puncture-free region at {r},{c} is not thin")
            skel[:] = trial
            absorbed += 1
    regions = []
    for i in sorted(owner, key=lambda j: (owner[j][0] is not None, owner[j][0] or (-1, -1))):
        if len(owner[i]) != 1:
            a, b = owner[i][0], owner[i][1]
            raise SpineError(f"punctures {a} and {b} share a region")
        regions.append(Region(np.argwhere(lab == i), owner[i][0]))
    return regions, absorbed


# -- union over a tiling ----------------------------------------------------------

@dataclass
class SpineUnionReport:
    passed: bool
    witness: Cell | None
    spines: list[Spine | None]
    failures: list[tuple[int, str]] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"spines built={sum(s is not None for s in self.spines)} failed={len(self.failures)}"]
        out += [f"spine domain={i} error={msg}" for i, msg in self.failures]
        w = "-" if self.witness is None else f"{self.witness[0]},{self.witness[1]}"
        out.append(f"spine-union block={w} verdict={'pass' if self.passed else 'fail'}")
        return out


def _domain_spine(args):
    mask, pts, bad, infinity, open_frame = args
    try:
        return build_spine(mask, pts, bad, infinity=infinity, open_frame=open_frame), None
    except SpineError as exc:
        return None, str(exc)


def spine_union_dimension_check(tiling, scene, workers: int = 1) -> SpineUnionReport:
    """Build every domain's spine and test that their union with the bad set stays thin.

    A domain whose spine cannot be built contributes its boundary alone and is listed
    as a failure.
    """
    k = tiling.k
    bad = scene.bad_at(k).cells
    takers = bad | (tiling.label_map() < 0)
    jobs, index = [], []
    for i, d in enumerate(tiling.domains):
        if len(d.cells):
            index.append(i)
            jobs.append((tiling.domain_mask(i), d.punctures, takers, d.contains_infinity and scene.infinity,
                         d.contains_infinity))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(_domain_spine, jobs))
    else:
        results = [_domain_spine(j) for j in jobs]
    union = bad.copy()
    spines: list[Spine | None] = [None] * len(tiling.domains)
    failures = []
    for i, (mask, _, _, _, open_frame), (spine, err) in zip(index, jobs, results):
        spines[i] = spine
        if spine is None:
            failures.append((i, err))
            union |= boundary_cells(mask, takers, open_frame)
        else:
            union |= spine.skeleton.cells
    witness = _has_block(union)
    return SpineUnionReport(witness is None and not failures, witness, spines, failures)


def format_spines(spines: Sequence[Spine | None]) -> str:
    lines = []
    for i, s in enumerate(spines):
        if s is None:
            continue
        lines.append(f"spine domain={i}")
        lines += format_raster(s.skeleton).splitlines()
    return "\n".join(lines) + ("\n" if lines else "")
