"""Finite surrogates for convergence of set sequences and for null sequences.

"All but finitely many" has no meaning on finite data.  Here a family is taken to be
null-consistent when, for every threshold in the schedule, the number of members at
least that large is the same at the two finest resolutions (a desk-scale surrogate).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .raster import ProbeSquare, Raster, diameter, hausdorff_distance, label_components

SURROGATE_NOTE = "desk-scale surrogate: counts stabilised across the two finest scales"

NULL = "null-consistent"
NOT_NULL = "not-null"
INCONCLUSIVE = "inconclusive"


@dataclass
class SetSequence:
    items: list[Raster]
    provenance: str = ""

    def __post_init__(self):
        if not self.items:
            raise ValueError("set sequence must be nonempty")
        ks = {r.k for r in self.items}
        if len(ks) != 1:
            raise ValueError(f"items must share one resolution, got {sorted(ks)}")

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    @property
    def k(self) -> int:
        return self.items[0].k


def lim_inf_lim_sup(seq: SetSequence, tail: int = 0, radius: int = 1) -> tuple[Raster, Raster]:
    """Finite-tail lim-inf and lim-sup.

    A cell is in the lim-inf when its ``radius``-cell neighborhood meets every item from
    ``tail`` on, and in the lim-sup when it meets at least half of them (rounded up).
    Both are restricted to the union of the tail items, so a constant sequence is its
    own limit.
    """
    if not 0 <= tail < len(seq):
        raise ValueError(f"tail {tail} out of range for {len(seq)} items")
    items = seq.items[tail:]
    hits = np.zeros(items[0].cells.shape, dtype=np.int32)
    support = np.zeros(items[0].cells.shape, dtype=bool)
    for it in items:
        hits += it.dilate(radius).cells
        support |= it.cells
    need = math.ceil(len(items) / 2)
    k = seq.k
    return Raster(k, (hits == len(items)) & support), Raster(k, (hits >= need) & support)


def _meets(item: Raster, square: ProbeSquare) -> bool:
    r0, r1, c0, c1 = square.rect(item.k)
    return bool(item.cells[r0:r1, c0:c1].any())


def diagonal_subsequence(seq: SetSequence, basis: Sequence[ProbeSquare]) -> list[int]:
    """Per-basis filtering followed by diagonalisation.

    Stage j keeps, of the previous stage's indices, whichever of {items missing
    basis[j]} and {items meeting basis[j]} is larger (ties favour missing, as in the
    classical argument).  Position m of the result is the m-th index of stage m + 1,
    so every position from j on decides basis[j] the same way.
    """
    if not basis:
        raise ValueError("basis must be nonempty")
    stages = []
    current = list(range(len(seq)))
    for sq in basis:
        miss = [i for i in current if not _meets(seq[i], sq)]
        meet = [i for i in current if i not in set(miss)]
        current = miss if len(miss) >= len(meet) else meet
        stages.append(current)
    out = []
    m = 0
    while True:
        stage = stages[min(m, len(stages) - 1)]
        if m >= len(stage):
            break
        out.append(stage[m])
        m += 1
    return out


@dataclass
class LimitReport:
    nonempty: bool | None
    connected: bool | None
    diameter_ok: bool | None
    witness: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v is not False for v in (self.nonempty, self.connected, self.diameter_ok))


def limit_properties(seq: SetSequence, limit: Raster, eps: float) -> LimitReport:
    """Check the standard properties a limit inherits from its sequence.

    Each property is asserted only when its hypothesis holds for every item; ``None``
    marks a property whose hypothesis failed.
    """
    w = limit.width
    items = seq.items
    witness = {}
    all_nonempty = all(it.cells.any() for it in items)
    nonempty = bool(limit.cells.any()) if all_nonempty else None
    if nonempty is False:
        witness["nonempty"] = "limit has no cells"

    connected = None
    if all(len(label_components(it, 8)) == 1 for it in items if it.cells.any()) and all_nonempty:
        fam = label_components(limit, 8)
        connected = len(fam) == 1
        if not connected:
            witness["connected"] = len(fam)

    diameter_ok = None
    if all_nonempty and all(_raster_diameter(it) >= eps for it in items):
        d = _raster_diameter(limit) if limit.cells.any() else 0.0
        diameter_ok = d >= eps - 2 * w
        if not diameter_ok:
            witness["diameter"] = d
    return LimitReport(nonempty, connected, diameter_ok, witness)


def _raster_diameter(r: Raster) -> float:
    return diameter(r.occupied()) / r.n


def hausdorff_steps(seq: SetSequence, indices: Sequence[int]) -> list[float]:
    return [hausdorff_distance(seq[a], seq[b]) for a, b in zip(indices[:-1], indices[1:])]


# -- null sequences ----------------------------------------------------------------

@dataclass
class NullVerdict:
    schedule: list[float]
    counts: list[list[int]]
    verdict: str
    witness: int | None = None
    witness_eps: float | None = None
    note: str = SURROGATE_NOTE

    def lines(self) -> list[str]:
        out = [f"eps={format_eps(e)} counts={','.join(str(c) for c in cs)}"
               for e, cs in zip(self.schedule, self.counts)]
        out.append(f"verdict={self.verdict}")
        return out

    def serialize(self) -> str:
        return "\n".join(self.lines()) + "\n"


def format_eps(e: float) -> str:
    f = Fraction(e).limit_denominator(1 << 20)
    if f.numerator == 1 and f.denominator & (f.denominator - 1) == 0:
        return f"1/{f.denominator}"
    return f"{float(e):.6g}"


def parse_null_verdict(text: str) -> NullVerdict:
    schedule, counts, verdict = [], [], None
    for line in text.splitlines():
        if line.startswith("eps="):
            e, c = line.split()
            num = e[4:]
            schedule.append(float(Fraction(num)))
            body = c[len("counts="):]
            counts.append([int(t) for t in body.split(",")] if body else [])
        elif line.startswith("verdict="):
            verdict = line[len("verdict="):]
    if verdict not in (NULL, NOT_NULL, INCONCLUSIVE):
        raise ValueError(f"bad verdict line in {text!r}")
    return NullVerdict(schedule, counts, verdict)


def default_schedule(k: int) -> list[float]:
    return [2.0 ** -j for j in range(1, max(k - 2, 1) + 1)]


def null_sequence_verdict(families: Sequence[Sequence[float]], schedule: Sequence[float],
                          slack: Sequence[float] | None = None) -> NullVerdict:
    """Classify per-scale diameter multisets (coarsest scale first).

    null-consistent: every threshold's count agrees on the two finest scales.
    not-null: some threshold's count grows strictly across every scale; the witness is
    the index, at the finest scale, of the largest member above that threshold.
    Otherwise inconclusive.

    ``slack`` gives each scale a diameter tolerance (for example a few cell widths).
    Counts then agree when each side's count at eps is covered by the other side's
    count at eps minus the other side's slack, and growth only counts as persistent
    when the finer count beats the coarser count taken at eps minus its slack.  With no
    slack both tests reduce to plain count comparison.
    """
    if len(families) < 2:
        raise ValueError("need at least two scales")
    sched = [float(e) for e in schedule]
    if not sched or any(e <= 0 for e in sched) or any(a <= b for a, b in zip(sched, sched[1:])):
        raise ValueError("schedule must be positive and strictly decreasing")
    tol = [0.0] * len(families) if slack is None else [float(t) for t in slack]
    if len(tol) != len(families) or any(t < 0 for t in tol):
        raise ValueError("slack needs one nonnegative entry per scale")
    arrays = [np.sort(np.asarray(f, dtype=float)) for f in families]

    def count(i: int, e: float) -> int:
        return int(len(arrays[i]) - np.searchsorted(arrays[i], e, side="left"))

    counts = [[count(i, e) for i in range(len(arrays))] for e in sched]
    a, b = len(arrays) - 2, len(arrays) - 1
    if all(count(b, e) <= count(a, e - tol[a]) and count(a, e) <= count(b, e - tol[b]) for e in sched):
        return NullVerdict(sched, counts, NULL)
    for e, cs in zip(sched, counts):
        if all(cs[i + 1] > count(i, e - tol[i]) for i in range(len(arrays) - 1)):
            finest = np.asarray(families[-1], dtype=float)
            return NullVerdict(sched, counts, NOT_NULL, witness=int(np.argmax(finest)), witness_eps=e)
    return NullVerdict(sched, counts, INCONCLUSIVE)
