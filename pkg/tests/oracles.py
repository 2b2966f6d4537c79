"""Independent brute-force oracles, written without numpy/scipy shortcuts."""
from __future__ import annotations

import itertools
import math
from collections import deque

FOUR = ((0, 1), (1, 0), (0, -1), (-1, 0))
EIGHT = FOUR + ((1, 1), (1, -1), (-1, 1), (-1, -1))


def flood_fill(grid, adjacency=4, infinity=False):
    """Components of the occupied cells as a list of frozensets, first row-major hit first.

    With ``infinity`` every occupied border cell touches one outer node.
    """
    n = len(grid)
    steps = FOUR if adjacency == 4 else EIGHT
    seen = [[False] * n for _ in range(n)]
    comps = []
    border_comp = None
    for r in range(n):
        for c in range(n):
            if not grid[r][c] or seen[r][c]:
                continue
            comp = set()
            queue = deque([(r, c)])
            seen[r][c] = True
            while queue:
                y, x = queue.popleft()
                comp.add((y, x))
                for dy, dx in steps:
                    v, u = y + dy, x + dx
                    if 0 <= v < n and 0 <= u < n and grid[v][u] and not seen[v][u]:
                        seen[v][u] = True
                        queue.append((v, u))
            on_border = any(y in (0, n - 1) or x in (0, n - 1) for y, x in comp)
            if infinity and on_border:
                if border_comp is None:
                    border_comp = len(comps)
                    comps.append(comp)
                else:
                    comps[border_comp] |= comp
            else:
                comps.append(comp)
    return [frozenset(c) for c in comps]


def max_center_distance(cells):
    cells = list(cells)
    best = 0.0
    for (a, b), (c, d) in itertools.combinations(cells, 2):
        best = max(best, math.hypot(a - c, b - d))
    return best


def hausdorff(cells_a, cells_b):
    def one_way(p, q):
        return max(min(math.hypot(a - c, b - d) for c, d in q) for a, b in p)
    return max(one_way(cells_a, cells_b), one_way(cells_b, cells_a))


def vertical_runs(grid):
    """[(col, top, bottom)] column by column, top first."""
    n = len(grid)
    runs = []
    for c in range(n):
        r = 0
        while r < n:
            if grid[r][c]:
                top = r
                while r + 1 < n and grid[r + 1][c]:
                    r += 1
                runs.append((c, top, r))
            r += 1
    return runs


def run_merge_counts(grid):
    """Node and edge counts of the run graph: runs in neighbouring columns sharing a row."""
    runs = vertical_runs(grid)
    edges = set()
    for i, (c1, t1, b1) in enumerate(runs):
        for j, (c2, t2, b2) in enumerate(runs):
            if c2 == c1 + 1 and max(t1, t2) <= min(b1, b2):
                edges.add((i, j))
    return len(runs), len(edges)


def naive_reduce(word):
    """Cancel adjacent inverse pairs until none remain."""
    w = list(word)
    changed = True
    while changed:
        changed = False
        for i in range(len(w) - 1):
            if w[i] == -w[i + 1]:
                del w[i:i + 2]
                changed = True
                break
    return tuple(w)


def slots_cross(a, b):
    """Two disjoint sets of circle slots cross when some x<u<y<v alternates between them."""
    for x in a:
        for y in a:
            if x >= y:
                continue
            inside = [u for u in b if x < u < y]
            outside = [u for u in b if u < x or u > y]
            if inside and outside:
                return True
    return False


def triangles_hit(point, triangles):
    """How many triangles (float vertex triples) contain the point strictly inside."""
    px, py = point
    hits = 0
    for (ax, ay), (bx, by), (cx, cy) in triangles:
        d1 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        d2 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
        d3 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
        if (d1 > 0 and d2 > 0 and d3 > 0) or (d1 < 0 and d2 < 0 and d3 < 0):
            hits += 1
    return hits
