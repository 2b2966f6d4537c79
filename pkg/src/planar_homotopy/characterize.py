"""Decide the two characterisation conditions, plus the Peano continuum / Peano domain criteria.

Probe disks are dyadic squares.  Each probe square is labeled on its own, so components
never leak from one probe into the next.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .raster import Component, ProbeSquare, Raster, closed_diameter, label_components
from .scenes import Scene
from .sequences import INCONCLUSIVE, NOT_NULL, NULL, SURROGATE_NOTE, default_schedule, null_sequence_verdict

PASS, FAIL = "pass", "fail"
AT_MOST_1, EQUALS_2 = "at-most-1", "equals-2"
PROBE_NOTE = "probe disks are dyadic squares"
# diameter tolerance, in cells, for the coarse-vs-fine comparison: coarsening can move
# a boundary by one cell on each side
SLACK_CELLS = 3


@dataclass
class ConditionReport:
    condition: str
    verdict: str
    witnesses: list[dict] = field(default_factory=list)
    lines: list[str] = field(default_factory=list)
    scale_data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS


@dataclass
class DimensionVerdict:
    scene: str
    cond1: ConditionReport
    cond2: ConditionReport
    verdict: str

    def report_lines(self) -> list[str]:
        out = [f"scene={self.scene}", f"note={SURROGATE_NOTE}; {PROBE_NOTE}"]
        out += self.cond1.lines
        out.append(f"condition=1 verdict={self.cond1.verdict}")
        out += self.cond2.lines
        out.append(f"condition=2 verdict={self.cond2.verdict}")
        out.append(f"VERDICT={self.verdict}")
        return out


def _describe(comp, k: int, **extra) -> dict:
    r0, r1, c0, c1 = comp.bbox if comp.size else (-1, -1, -1, -1)
    d = {"k": k, "label": comp.label, "size": comp.size, "bbox": (r0, r1, c0, c1),
         "infinity": comp.includes_infinity}
    if comp.size:
        d["first_cell"] = (int(comp.cells[0][0]), int(comp.cells[0][1]))
        d["diameter"] = comp.diameter
    d.update(extra)
    return d


def _puncture_counts(labels: np.ndarray, punct: np.ndarray, size: int) -> np.ndarray:
    hit = labels[punct]
    hit = hit[hit >= 0]
    return np.bincount(hit, minlength=size)


def condition1(scene: Scene, k: int | None = None, depth: int | None = None) -> ConditionReport:
    """Every component of the sphere minus the bad set holds a puncture."""
    k = scene.finest if k is None else k
    bad = scene.bad_at(k)
    fam = label_components(bad.complement(includes_infinity=True), 8)
    counts = _puncture_counts(fam.labels, scene.puncture_mask(k, depth), len(fam))
    witnesses = []
    for comp in fam:
        comp.punctures = int(counts[comp.label]) + int(comp.includes_infinity and scene.infinity)
        if comp.punctures == 0:
            witnesses.append(_describe(comp, k, kind="unpunctured component"))
    verdict = PASS if not witnesses else FAIL
    lines = [f"cond1 k={k} components={len(fam)} unpunctured={len(witnesses)}"]
    for w in witnesses:
        lines.append(f"cond1 witness first_cell={w['first_cell'][0]},{w['first_cell'][1]} size={w['size']}")
    return ConditionReport("1", verdict, witnesses, lines, {"k": k, "components": len(fam)})


def default_probe_scales(ladder: Sequence[int]) -> range:
    return range(0, max(ladder[0] - 4, 0) + 1)


_STRUCTURE = {4: ndimage.generate_binary_structure(2, 1), 8: np.ones((3, 3), dtype=bool)}


def _window_labels(win: np.ndarray, adjacency: int, zones: np.ndarray | None):
    """Yield label arrays for a window; with zones, cells of different zones never join."""
    if zones is None:
        lab, _ = ndimage.label(win, _STRUCTURE[adjacency])
        yield lab
        return
    for z in np.unique(zones[win]):
        lab, _ = ndimage.label(win & (zones == z), _STRUCTURE[adjacency])
        yield lab


def probe_family(mask: np.ndarray, k: int, scale: int, adjacency: int,
                 punct: np.ndarray | None = None,
                 zones: np.ndarray | None = None) -> dict[ProbeSquare, list[tuple[float, Component]]]:
    """Unpunctured components of ``mask`` inside each probe square at ``scale``.

    Returns probe -> list of (diameter, component), diameters taken over closed cells.
    Only probes meeting the mask are visited, so sparse masks are cheap.  ``zones``
    (an integer array) keeps cells of different zones apart.
    """
    if adjacency not in _STRUCTURE:
        raise ValueError(f"adjacency must be 4 or 8, got {adjacency}")
    s = 1 << (k - scale)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    out: dict[ProbeSquare, list] = {}
    if not len(rows):
        return out
    for pr in range(rows[0] // s, rows[-1] // s + 1):
        for pc in range(cols[0] // s, cols[-1] // s + 1):
            sl = np.s_[pr * s:(pr + 1) * s, pc * s:(pc + 1) * s]
            win = mask[sl]
            if not win.any():
                continue
            members = []
            for lab in _window_labels(win, adjacency, None if zones is None else zones[sl]):
                hit = set(np.unique(lab[punct[sl] & win]).tolist()) if punct is not None else set()
                for idx, box in enumerate(ndimage.find_objects(lab), start=1):
                    if box is None or idx in hit:
                        continue
                    local = np.argwhere(lab[box] == idx)
                    local[:, 0] += box[0].start + pr * s
                    local[:, 1] += box[1].start + pc * s
                    comp = Component(len(members), local, k)
                    members.append((closed_diameter(comp), comp))
            if members:
                out[ProbeSquare(scale, pr, pc)] = members
    return out


def probe_verdicts(masks: dict[int, np.ndarray], ladder: Sequence[int], scales, schedule,
                   adjacency: int, puncts: dict[int, np.ndarray] | None = None,
                   zones: dict[int, np.ndarray] | None = None):
    """Yield (probe, NullVerdict, finest-scale members) for every probe in canonical order."""
    for scale in scales:
        per_k = [probe_family(masks[k], k, scale, adjacency, puncts[k] if puncts else None,
                              zones[k] if zones else None)
                 for k in ladder]
        for row in range(1 << scale):
            for col in range(1 << scale):
                probe = ProbeSquare(scale, row, col)
                fams = [[d for d, _ in pk.get(probe, [])] for pk in per_k]
                v = null_sequence_verdict(fams, schedule, [SLACK_CELLS / (1 << k) for k in ladder])
                yield probe, v, per_k[-1].get(probe, [])


def summarise_probes(tag: str, results, k_fine: int) -> tuple[str, list[dict], list[str], dict]:
    lines, witnesses = [], []
    tally = {NULL: 0, NOT_NULL: 0, INCONCLUSIVE: 0}
    for probe, v, members in results:
        tally[v.verdict] += 1
        counts = ";".join(",".join(str(c) for c in cs) for cs in v.counts)
        lines.append(f"{tag} probe={probe.scale}/{probe.row}/{probe.col} verdict={v.verdict} counts={counts}")
        if v.verdict == NOT_NULL:
            big = sorted((m for m in members if m[0] >= v.witness_eps), key=lambda m: -m[0])
            witnesses.append({"kind": "not-null family", "probe": tuple(probe), "eps": v.witness_eps,
                              "counts": v.counts,
                              "members": [_describe(c, k_fine) for _, c in big[:8]]})
    if tally[NOT_NULL]:
        verdict = FAIL
    elif tally[INCONCLUSIVE]:
        verdict = INCONCLUSIVE
    else:
        verdict = PASS
    return verdict, witnesses, lines, tally


def condition2(scene: Scene, schedule: Sequence[float] | None = None, depth: int | None = None,
               probe_scales: Sequence[int] | None = None) -> ConditionReport:
    """Unpunctured components of probe-minus-bad-set form a null sequence, for every probe."""
    if len(scene.ladder) < 2:
        raise ValueError("condition 2 needs at least two resolutions")
    schedule = default_schedule(scene.finest) if schedule is None else list(schedule)
    scales = default_probe_scales(scene.ladder) if probe_scales is None else probe_scales
    masks = {k: ~scene.bad[k].cells for k in scene.ladder}
    puncts = {k: scene.puncture_mask(k, depth) for k in scene.ladder}
    results = probe_verdicts(masks, scene.ladder, scales, schedule, 8, puncts)
    verdict, witnesses, lines, tally = summarise_probes("cond2", results, scene.finest)
    return ConditionReport("2", verdict, witnesses, lines, {"schedule": schedule, "tally": tally})


def homotopy_dimension_verdict(scene: Scene, schedule: Sequence[float] | None = None,
                               depth: int | None = None) -> DimensionVerdict:
    c1 = condition1(scene, depth=depth)
    c2 = condition2(scene, schedule, depth=depth)
    if c1.verdict == FAIL or c2.verdict == FAIL:
        verdict = EQUALS_2
    elif c1.passed and c2.passed:
        verdict = AT_MOST_1
    else:
        verdict = INCONCLUSIVE
    return DimensionVerdict(scene.name, c1, c2, verdict)


@dataclass
class CriterionReport:
    verdicts: dict[str, str]
    witnesses: dict[str, list[dict]]
    lines: list[str]

    @property
    def passed(self) -> bool:
        return all(v == PASS for v in self.verdicts.values())


def _ladder(rasters: Sequence[Raster]) -> tuple[list[int], dict[int, Raster]]:
    if len(rasters) < 2:
        raise ValueError("need at least two resolutions")
    by_k = {r.k: r for r in rasters}
    if len(by_k) != len(rasters):
        raise ValueError("ladder resolutions must be distinct")
    return sorted(by_k), by_k


def peano_continuum_check(ladder_rasters: Sequence[Raster], schedule=None, probe_scales=None) -> CriterionReport:
    """Complement components (8-adjacent) and intersection components (4-adjacent) of
    every probe square form null-consistent ladders."""
    ladder, by_k = _ladder(ladder_rasters)
    schedule = default_schedule(ladder[-1]) if schedule is None else schedule
    scales = default_probe_scales(ladder) if probe_scales is None else probe_scales
    verdicts, witnesses, lines = {}, {}, []
    for name, masks, adj in (("1", {k: ~by_k[k].cells for k in ladder}, 8),
                             ("1'", {k: by_k[k].cells for k in ladder}, 4)):
        v, w, ls, _ = summarise_probes(f"crit{name}", probe_verdicts(masks, ladder, scales, schedule, adj), ladder[-1])
        verdicts[name], witnesses[name] = v, w
        lines += ls + [f"criterion={name} verdict={v}"]
    return CriterionReport(verdicts, witnesses, lines)


def peano_domain_check(ladder_rasters: Sequence[Raster], schedule=None, probe_scales=None) -> CriterionReport:
    """Components of open-set-inside-probe form null-consistent ladders for every probe."""
    ladder, by_k = _ladder(ladder_rasters)
    schedule = default_schedule(ladder[-1]) if schedule is None else schedule
    scales = default_probe_scales(ladder) if probe_scales is None else probe_scales
    masks = {k: by_k[k].cells for k in ladder}
    v, w, ls, _ = summarise_probes("dom", probe_verdicts(masks, ladder, scales, schedule, 4), ladder[-1])
    return CriterionReport({"2": v}, {"2": w}, ls + [f"criterion=2 verdict={v}"])
