"""Dyadic bit-grid rasters on the unit square, plus the single outer cell of the sphere.

Cell ``(row, col)`` at resolution ``k`` is the half-open square
``[col/2^k, (col+1)/2^k) x [row/2^k, (row+1)/2^k)``; row 0 is the top row.
All lengths are measured between cell centers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

HEADER = "PH-RASTER"
EXACT_DIAMETER_LIMIT = 10_000


class RasterFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Raster:
    k: int
    cells: np.ndarray
    includes_infinity: bool = False

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"negative resolution {self.k}")
        n = 1 << self.k
        cells = np.asarray(self.cells, dtype=bool)
        if cells.shape != (n, n):
            raise ValueError(f"bitmap shape {cells.shape} does not match k={self.k}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def empty(cls, k: int, includes_infinity: bool = False) -> "Raster":
        n = 1 << k
        return cls(k, np.zeros((n, n), dtype=bool), includes_infinity)

    @classmethod
    def full(cls, k: int) -> "Raster":
        n = 1 << k
        return cls(k, np.ones((n, n), dtype=bool))

    @classmethod
    def from_cells(cls, k: int, cells: Iterable[tuple[int, int]], includes_infinity=False) -> "Raster":
        n = 1 << k
        grid = np.zeros((n, n), dtype=bool)
        for r, c in cells:
            grid[r, c] = True
        return cls(k, grid, includes_infinity)

    @property
    def n(self) -> int:
        return 1 << self.k

    @property
    def width(self) -> float:
        return 1.0 / self.n

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return (self.k == other.k and self.includes_infinity == other.includes_infinity
                and np.array_equal(self.cells, other.cells))

    def __hash__(self):
        return hash((self.k, self.includes_infinity, self.cells.tobytes()))

    def __repr__(self):
        return f"Raster(k={self.k}, occupied={self.count()}, inf={int(self.includes_infinity)})"

    def count(self) -> int:
        return int(self.cells.sum())

    def is_empty(self) -> bool:
        return not self.cells.any() and not self.includes_infinity

    def occupied(self) -> np.ndarray:
        """(N, 2) array of occupied (row, col) indices in row-major order."""
        return np.argwhere(self.cells)

    def centers(self) -> np.ndarray:
        """(N, 2) array of occupied cell centers as (x, y)."""
        rc = self.occupied()
        return np.column_stack([(rc[:, 1] + 0.5) / self.n, (rc[:, 0] + 0.5) / self.n])

    def with_cells(self, cells: np.ndarray) -> "Raster":
        return Raster(self.k, cells, self.includes_infinity)

    def complement(self, includes_infinity: bool | None = None) -> "Raster":
        inf = (not self.includes_infinity) if includes_infinity is None else includes_infinity
        return Raster(self.k, ~self.cells, inf)

    def __or__(self, other: "Raster") -> "Raster":
        _same_k(self, other)
        return Raster(self.k, self.cells | other.cells, self.includes_infinity or other.includes_infinity)

    def __and__(self, other: "Raster") -> "Raster":
        _same_k(self, other)
        return Raster(self.k, self.cells & other.cells, self.includes_infinity and other.includes_infinity)

    def __sub__(self, other: "Raster") -> "Raster":
        _same_k(self, other)
        return Raster(self.k, self.cells & ~other.cells, self.includes_infinity and not other.includes_infinity)

    def coarsen(self) -> "Raster":
        """2x2 OR coarsening to resolution k - 1."""
        if self.k == 0:
            raise ValueError("cannot coarsen below k=0")
        m = self.n // 2
        c = self.cells.reshape(m, 2, m, 2).any(axis=(1, 3))
        return Raster(self.k - 1, c, self.includes_infinity)

    def refine(self) -> "Raster":
        """Each cell becomes its four children."""
        c = np.repeat(np.repeat(self.cells, 2, axis=0), 2, axis=1)
        return Raster(self.k + 1, c, self.includes_infinity)

    def dilate(self, radius: int = 1) -> "Raster":
        """Chebyshev dilation by ``radius`` cells."""
        if radius <= 0:
            return self
        grown = ndimage.binary_dilation(self.cells, structure=np.ones((3, 3), bool), iterations=radius)
        return self.with_cells(grown)

    def boundary(self) -> "Raster":
        """Occupied cells with a 4-neighbor outside the set (or on the square's edge)."""
        padded = np.pad(self.cells, 1, constant_values=False)
        interior = (padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
        return self.with_cells(self.cells & ~interior)

    def block_witness(self) -> tuple[int, int] | None:
        """Top-left cell of the first fully occupied 2x2 block, row-major."""
        c = self.cells
        blocks = c[:-1, :-1] & c[1:, :-1] & c[:-1, 1:] & c[1:, 1:]
        hits = np.argwhere(blocks)
        if len(hits) == 0:
            return None
        return int(hits[0][0]), int(hits[0][1])

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """(row, col) of the half-open cell containing point (x, y)."""
        n = self.n
        return min(int(np.floor(y * n)), n - 1), min(int(np.floor(x * n)), n - 1)


def _same_k(a: Raster, b: Raster):
    if a.k != b.k:
        raise ValueError(f"resolution mismatch: {a.k} != {b.k}")


def cell_center(k: int, row: int, col: int) -> tuple[float, float]:
    n = 1 << k
    return (col + 0.5) / n, (row + 0.5) / n


# -- components -----------------------------------------------------------------

@dataclass(eq=False)
class Component:
    label: int
    cells: np.ndarray
    k: int
    includes_infinity: bool = False
    punctures: int = 0

    @property
    def size(self) -> int:
        return len(self.cells)

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        """(row_min, row_max, col_min, col_max), inclusive."""
        r, c = self.cells[:, 0], self.cells[:, 1]
        return int(r.min()), int(r.max()), int(c.min()), int(c.max())

    @cached_property
    def diameter(self) -> float:
        return diameter(self)

    def mask(self) -> np.ndarray:
        n = 1 << self.k
        m = np.zeros((n, n), dtype=bool)
        if len(self.cells):
            m[self.cells[:, 0], self.cells[:, 1]] = True
        return m

    def raster(self) -> Raster:
        return Raster(self.k, self.mask(), self.includes_infinity)

    def __repr__(self):
        return (f"Component(label={self.label}, size={self.size}, "
                f"inf={int(self.includes_infinity)}, punctures={self.punctures})")


@dataclass
class ComponentFamily:
    source: Raster
    adjacency: int
    members: list[Component]
    labels: np.ndarray
    edge_adjacency: set[tuple[int, int]] = field(default_factory=set)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i) -> Component:
        return self.members[i]

    @property
    def infinity_label(self) -> int | None:
        for m in self.members:
            if m.includes_infinity:
                return m.label
        return None

    def label_at(self, row: int, col: int) -> int:
        return int(self.labels[row, col])

    def neighbors(self, label: int) -> list[int]:
        out = set()
        for a, b in self.edge_adjacency:
            if a == label:
                out.add(b)
            elif b == label:
                out.add(a)
        return sorted(out)


def _neighbor_offsets(adjacency: int):
    if adjacency == 4:
        return [(0, 1), (1, 0)]
    if adjacency == 8:
        return [(0, 1), (1, 0), (1, 1), (1, -1)]
    raise ValueError(f"adjacency must be 4 or 8, got {adjacency}")


def _shifted_pairs(mask: np.ndarray, dr: int, dc: int):
    """Flat index pairs (a, b) of occupied cells with b = a + (dr, dc)."""
    n_r, n_c = mask.shape
    r0, r1 = 0, n_r - dr
    c0, c1 = max(0, -dc), n_c - max(0, dc)
    a = mask[r0:r1, c0:c1]
    b = mask[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
    rows, cols = np.nonzero(a & b)
    rows = rows + r0
    cols = cols + c0
    return rows * n_c + cols, (rows + dr) * n_c + (cols + dc)


def label_regions(raster: Raster, adjacency: int = 4, regions: np.ndarray | None = None) -> ComponentFamily:
    """Label connected components, optionally never joining cells of different regions.

    ``regions`` is an integer array the shape of the grid; two cells may only be joined
    when their region ids agree. With ``raster.includes_infinity`` every boundary cell is
    joined to one abstract outer cell. Labels are dense and ordered by first row-major hit;
    an outer component with no occupied cells comes last.
    """
    mask = raster.cells
    n = raster.n
    total = n * n
    src, dst = [], []
    for dr, dc in _neighbor_offsets(adjacency):
        a, b = _shifted_pairs(mask, dr, dc)
        if regions is not None:
            flat = regions.ravel()
            keep = flat[a] == flat[b]
            a, b = a[keep], b[keep]
        src.append(a)
        dst.append(b)
    inf_node = total
    if raster.includes_infinity:
        edge = np.zeros_like(mask)
        edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
        bnd = np.flatnonzero((edge & mask).ravel())
        src.append(bnd)
        dst.append(np.full(len(bnd), inf_node))
    a = np.concatenate(src) if src else np.zeros(0, int)
    b = np.concatenate(dst) if dst else np.zeros(0, int)
    size = total + 1
    graph = coo_matrix((np.ones(len(a), dtype=np.int8), (a, b)), shape=(size, size))
    _, raw = connected_components(graph, directed=False)

    occ = np.flatnonzero(mask.ravel())
    relabel: dict[int, int] = {}
    for idx in occ:
        r = raw[idx]
        if r not in relabel:
            relabel[r] = len(relabel)
    if raster.includes_infinity and raw[inf_node] not in relabel:
        relabel[raw[inf_node]] = len(relabel)

    labels = np.full(total, -1, dtype=np.int64)
    if len(occ):
        labels[occ] = np.fromiter((relabel[r] for r in raw[occ]), dtype=np.int64, count=len(occ))
    labels = labels.reshape(n, n)

    order = np.argsort(labels.ravel(), kind="stable")
    sorted_labels = labels.ravel()[order]
    starts = np.searchsorted(sorted_labels, np.arange(len(relabel)))
    ends = np.searchsorted(sorted_labels, np.arange(len(relabel)), side="right")
    inf_label = relabel.get(raw[inf_node]) if raster.includes_infinity else None
    members = []
    for lab in range(len(relabel)):
        flat = order[starts[lab]:ends[lab]]
        cells = np.column_stack([flat // n, flat % n]) if len(flat) else np.zeros((0, 2), int)
        members.append(Component(lab, cells, raster.k, includes_infinity=(lab == inf_label)))

    fam = ComponentFamily(raster, adjacency, members, labels)
    fam.edge_adjacency = _edge_pairs(labels)
    return fam


def _edge_pairs(labels: np.ndarray) -> set[tuple[int, int]]:
    pairs = set()
    for x, y in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        sel = (x >= 0) & (y >= 0) & (x != y)
        for a, b in zip(x[sel].tolist(), y[sel].tolist()):
            pairs.add((min(a, b), max(a, b)))
    return pairs


def label_components(raster: Raster, adjacency: int = 4) -> ComponentFamily:
    return label_regions(raster, adjacency)


# -- metric ---------------------------------------------------------------------

def _max_pairwise(points: np.ndarray, chunk: int = 2048) -> float:
    best = 0.0
    for i in range(0, len(points), chunk):
        block = points[i:i + chunk]
        d = ((block[:, None, :] - points[None, :, :]) ** 2).sum(-1)
        best = max(best, float(d.max()))
    return best ** 0.5


def _row_extremes(cells: np.ndarray) -> np.ndarray:
    # every convex-hull vertex is a leftmost or rightmost cell of its row
    order = np.lexsort((cells[:, 1], cells[:, 0]))
    cells = cells[order]
    rows, start = np.unique(cells[:, 0], return_index=True)
    lo = np.minimum.reduceat(cells[:, 1], start)
    hi = np.maximum.reduceat(cells[:, 1], start)
    return np.concatenate([np.column_stack([rows, lo]), np.column_stack([rows, hi])])


def _hull(points: np.ndarray) -> np.ndarray:
    """Convex-hull vertices by the monotone chain (integer-exact)."""
    pts = sorted(set(map(tuple, points.tolist())))
    if len(pts) <= 2:
        return np.asarray(pts, dtype=float)

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and ((out[-1][0] - out[-2][0]) * (p[1] - out[-2][1])
                                     - (out[-1][1] - out[-2][1]) * (p[0] - out[-2][0])) <= 0:
                out.pop()
            out.append(p)
        return out[:-1]

    return np.asarray(half(pts) + half(pts[::-1]), dtype=float)


def _cells_and_k(component):
    if hasattr(component, "cells"):
        return np.asarray(component.cells), getattr(component, "k", None)
    return np.asarray(component), None


def _hull_diameter(points: np.ndarray) -> float:
    return _max_pairwise(points.astype(float) if len(points) <= 64 else _hull(points))


def diameter(component, exact_limit: int = EXACT_DIAMETER_LIMIT) -> float:
    """Largest cell-center distance within a component (or an (N, 2) cell array).

    Small sets are compared pairwise.  Larger ones go through the leftmost and
    rightmost cell of each row, which contain every convex-hull vertex, and then
    through the hull itself.
    """
    cells, k = _cells_and_k(component)
    if len(cells) == 0:
        raise ValueError("empty set has no diameter")
    if len(cells) <= min(exact_limit, 256):
        d = _max_pairwise(cells.astype(float))
    else:
        d = _hull_diameter(_row_extremes(cells))
    return d / (1 << k) if k is not None else d


_CORNERS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int64)


def closed_diameter(component) -> float:
    """Diameter of the union of the closed cells (corner to corner).

    Unlike the center distance this does not creep up with resolution, so an aligned
    shape measures the same at every k.
    """
    cells, k = _cells_and_k(component)
    if len(cells) == 0:
        raise ValueError("empty set has no diameter")
    pts = cells if len(cells) <= 16 else _row_extremes(cells)
    corners = (pts.astype(np.int64)[:, None, :] + _CORNERS[None]).reshape(-1, 2)
    d = _hull_diameter(corners)
    return d / (1 << k) if k is not None else d


def diameter_pairwise(component) -> float:
    """Brute-force diameter over all cell pairs."""
    cells, k = _cells_and_k(component)
    if len(cells) == 0:
        raise ValueError("empty set has no diameter")
    d = _max_pairwise(cells.astype(float))
    return d / (1 << k) if k is not None else d


class ProbeSquare(NamedTuple):
    scale: int
    row: int
    col: int

    def rect(self, k: int) -> tuple[int, int, int, int]:
        """Half-open index rectangle (r0, r1, c0, c1) at resolution k."""
        if k < self.scale:
            raise ValueError(f"probe scale {self.scale} finer than resolution {k}")
        s = 1 << (k - self.scale)
        return self.row * s, (self.row + 1) * s, self.col * s, (self.col + 1) * s

    @property
    def side(self) -> float:
        return 1.0 / (1 << self.scale)


def probe_disks(k_min: int, k_max: int) -> list[ProbeSquare]:
    """All dyadic squares at scales k_min..k_max; scale, then row, then column order."""
    if k_min > k_max:
        raise ValueError("k_min must not exceed k_max")
    return [ProbeSquare(j, r, c) for j in range(k_min, k_max + 1)
            for r in range(1 << j) for c in range(1 << j)]


def hausdorff_distance(a: Raster, b: Raster) -> float:
    _same_k(a, b)
    if not a.cells.any() or not b.cells.any():
        raise ValueError("Hausdorff undefined on empty set")
    pa, pb = a.centers(), b.centers()
    d_ab = cKDTree(pb).query(pa)[0].max()
    d_ba = cKDTree(pa).query(pb)[0].max()
    return float(max(d_ab, d_ba))


# -- file format ----------------------------------------------------------------

def format_raster(r: Raster) -> str:
    lines = [f"{HEADER} k={r.k} inf={int(r.includes_infinity)}"]
    table = np.array(["0", "1"])
    lines.extend("".join(row) for row in table[r.cells.astype(int)])
    return "\n".join(lines) + "\n"


def parse_raster_lines(lines: list[str], start: int = 0) -> tuple[Raster, int]:
    """Parse one PH-RASTER block beginning at ``lines[start]``; returns (raster, next index)."""
    try:
        head = lines[start].split()
    except IndexError:
        raise RasterFormatError("missing PH-RASTER header") from None
    if not head or head[0] != HEADER:
        raise RasterFormatError(f"expected {HEADER} header, got {lines[start]!r}")
    fields = dict(tok.split("=", 1) for tok in head[1:] if "=" in tok)
    try:
        k = int(fields["k"])
        inf = fields.get("inf", "0")
    except (KeyError, ValueError):
        raise RasterFormatError(f"bad raster header {lines[start]!r}") from None
    if inf not in ("0", "1") or not 0 <= k <= 14:
        raise RasterFormatError(f"bad raster header {lines[start]!r}")
    n = 1 << k
    body = lines[start + 1:start + 1 + n]
    if len(body) != n or any(len(row) != n or set(row) - {"0", "1"} for row in body):
        raise RasterFormatError(f"raster body must be {n} lines of {n} 0/1 characters")
    cells = np.array([[ch == "1" for ch in row] for row in body], dtype=bool).reshape(n, n)
    return Raster(k, cells, inf == "1"), start + 1 + n


def read_raster(path: str | Path) -> Raster:
    lines = Path(path).read_text().splitlines()
    r, _ = parse_raster_lines(lines)
    return r


def write_raster(r: Raster, path: str | Path) -> None:
    Path(path).write_text(format_raster(r))
