"""``planar-homotopy`` command line.

Exit codes: 0 pass, 1 fail, 2 inconclusive, 3 usage or I/O error.  Reports are
``key=value`` lines written to ``--report`` (or stdout) and are byte-identical for a
fixed ``--seed``.  ``PH_THREADS`` caps worker threads.
"""
from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .characterize import AT_MOST_1, EQUALS_2, FAIL, homotopy_dimension_verdict
from .lamination import (check_triangulation, extend_filling, format_triangulation, ideal_triangulation,
                         loop_lamination, parse_points)
from .quotient import (QuotientError, build_run_graph, check_loop, find_holes, format_loop, injectivity_probe,
                       parse_loops, random_loop, spanning_tree)
from .raster import HEADER as RASTER_HEADER
from .raster import Raster, RasterFormatError, parse_raster_lines, read_raster
from .scenes import BUILTIN_NAMES, SCENE_HEADER, SceneError, builtin_scene, read_scene, render_svg, svg_text
from .scenes import validate_scene, write_scene
from .sequences import INCONCLUSIVE
from .tiler import TILING_HEADER, TilerError, parse_tiling, run_stages, write_tiling
from .retractor import format_spines, spine_union_dimension_check

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def threads() -> int:
    raw = os.environ.get("PH_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        raise UsageError(f"PH_THREADS must be an integer, got {raw!r}") from None


def _schedule(text: str | None) -> list[float] | None:
    if not text:
        return None
    try:
        return [float(Fraction(t)) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad schedule {text!r}; expected fractions like 1/2,1/4") from None


def _emit(lines: list[str], path: str | None) -> None:
    text = "\n".join(lines) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _exit_for(statuses) -> int:
    statuses = set(statuses)
    if FAIL in statuses or "no" in statuses:
        return EXIT_FAIL
    if INCONCLUSIVE in statuses:
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


# -- commands -------------------------------------------------------------------------

def cmd_scene(a) -> int:
    scene = builtin_scene(a.name, a.depth, a.k)
    write_scene(scene, a.out)
    if a.svg:
        render_svg(scene, a.svg)
    if a.png:
        from .plotting import plot_scene
        plot_scene(scene, a.png)
    rec = validate_scene(scene)
    lines = [f"scene={scene.name} ladder={','.join(map(str, scene.ladder))} "
             f"punctures={len(scene.puncture_points())} infinity={int(scene.infinity)}"]
    lines += [f"check={c.name} status={'pass' if c.passed else 'fail'}" for c in rec.checks]
    _emit(lines, a.report)
    return EXIT_PASS if rec.passed else EXIT_FAIL


def cmd_check(a) -> int:
    scene = read_scene(a.scene)
    verdict = homotopy_dimension_verdict(scene, _schedule(a.schedule), depth=a.depth)
    _emit(verdict.report_lines(), a.report)
    if a.svg:
        render_svg(scene, a.svg)
    if a.png:
        from .plotting import plot_check
        plot_check(scene, verdict, a.png)
    return {AT_MOST_1: EXIT_PASS, EQUALS_2: EXIT_FAIL}.get(verdict.verdict, EXIT_INCONCLUSIVE)


def cmd_tile(a) -> int:
    scene = read_scene(a.scene)
    try:
        tiling = run_stages(scene, a.stages, _schedule(a.schedule))
    except TilerError as exc:
        if exc.claim is None and exc.witness is not None:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAIL
        raise
    write_tiling(tiling, a.out, scene.name)
    union = spine_union_dimension_check(tiling, scene, workers=threads())
    if a.spines:
        Path(a.spines).write_text(format_spines(union.spines))
    lines = [f"scene={scene.name} stages={a.stages}"] + tiling.report_lines() + union.lines()
    _emit(lines, a.report)
    if a.svg:
        n = 1 << tiling.k
        Path(a.svg).write_text(svg_text(scene.bad_at(tiling.k), scene.puncture_points(),
                                        overlays=[(Raster(tiling.k, tiling.label_map() >= 0), "#9ecae1"),
                                                  (_skeleton(union.spines, n, tiling.k), "#636363")]))
    if a.png:
        from .plotting import plot_tiling
        plot_tiling(tiling, scene, a.png, union.spines)
    return _exit_for([c.status for c in tiling.checks] + ([] if union.passed else [FAIL]))


def _skeleton(spines, n: int, k: int) -> Raster:
    cells = np.zeros((n, n), dtype=bool)
    for s in spines:
        if s is not None:
            cells |= s.skeleton.cells
    return Raster(k, cells)


def cmd_quotient(a) -> int:
    m = read_raster(a.raster)
    loops = parse_loops(Path(a.loops).read_text()) if a.loops else []
    rng = np.random.default_rng(a.seed)
    g = build_run_graph(m)
    if a.random:
        loops += [random_loop(m, rng) for _ in range(a.random)]
    holes = find_holes(m)
    tree = spanning_tree(g)
    lines = [f"raster k={m.k} cells={m.count()} nodes={g.node_count} edges={g.edge_count} "
             f"holes={len(holes.bounded)} generators_Mprime={len(tree.generators)} seed={a.seed}"]
    statuses = []
    for i, loop in enumerate(loops):
        loop = check_loop(m, loop)
        rec = injectivity_probe(m, loop, g, holes, tree)
        statuses.append("yes" if rec.consistent else "no")
        lines.append(f"loop index={i} length={len(loop)} {rec.line()}")
        if a.show_loops:
            lines.append(f"loop index={i} cells={format_loop(loop)}")
        if rec.word_mp.empty:
            lam = loop_lamination(g, loop)
            ext = extend_filling(m, loop, lam, g)
            lines += lam.lines() + ext.lines()
            statuses += ["pass" if all(lam.checks.values()) and ext.passed else FAIL]
    ok = sum(s == "yes" for s in statuses)
    lines.append(f"loops={len(loops)} consistent={ok}")
    lines.append("note=no counterexample found is the strongest finite verdict")
    code = _exit_for(statuses)
    lines.append(f"VERDICT={'pass' if code == EXIT_PASS else 'fail'}")
    _emit(lines, a.report)
    if a.png:
        from .plotting import plot_raster
        plot_raster(m, a.png, f"k={m.k}  {len(loops)} loops", loops[:10])
    return code


def _random_points(count: int, rng) -> list[Fraction]:
    denom = 1 << 20
    picks = rng.choice(denom - 1, size=count, replace=False) + 1
    return [Fraction(int(p), denom) for p in picks]


def cmd_triangulate(a) -> int:
    if a.points:
        params = parse_points(Path(a.points).read_text())
    elif a.random:
        params = _random_points(a.random, np.random.default_rng(a.seed))
    else:
        raise UsageError("triangulate needs --points or --random")
    tri = ideal_triangulation(params)
    chk = check_triangulation(tri)
    lines = format_triangulation(tri).splitlines()
    lines.append(f"check count={_pf(chk.count_ok)} disjoint={_pf(chk.disjoint_ok)} "
                 f"cover={_pf(chk.covers_hull)} prefix={_pf(chk.prefix_ok)}")
    lines.append(f"VERDICT={_pf(chk.passed)}")
    _emit(lines, a.report)
    if a.png:
        from .plotting import plot_triangulation
        plot_triangulation(tri, a.png)
    return EXIT_PASS if chk.passed else EXIT_FAIL


def _pf(ok: bool) -> str:
    return "pass" if ok else "fail"


def cmd_render(a) -> int:
    text = Path(a.input).read_text()
    head = text.split(None, 1)[0] if text.strip() else ""
    if head == SCENE_HEADER:
        scene = read_scene(a.input)
        if a.svg:
            render_svg(scene, a.svg)
        if a.png:
            from .plotting import plot_scene
            plot_scene(scene, a.png)
    elif head == TILING_HEADER:
        tiling = parse_tiling(text)
        r = Raster(tiling.k, tiling.label_map() >= 0)
        if a.svg:
            render_svg(r, a.svg)
        if a.png:
            from .plotting import plot_raster
            plot_raster(r, a.png, f"{len(tiling.domains)} domains")
    elif head == RASTER_HEADER:
        r, _ = parse_raster_lines(text.splitlines())
        if a.svg:
            render_svg(r, a.svg)
        if a.png:
            from .plotting import plot_raster
            plot_raster(r, a.png)
    else:
        raise UsageError(f"{a.input}: unrecognised file (expected {SCENE_HEADER}, {TILING_HEADER} or {RASTER_HEADER})")
    return EXIT_PASS


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="planar-homotopy", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("scene", help="build a builtin scene file")
    s.add_argument("--name", required=True, choices=BUILTIN_NAMES)
    s.add_argument("--depth", type=int, default=2)
    s.add_argument("--k", type=int, default=8)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scene)

    s = sub.add_parser("check", help="decide homotopy dimension of a scene")
    s.add_argument("--scene", required=True)
    s.add_argument("--schedule")
    s.add_argument("--depth", type=int)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("tile", help="run the staged tiling and build spines")
    s.add_argument("--scene", required=True)
    s.add_argument("--stages", type=int, default=3)
    s.add_argument("--schedule")
    s.add_argument("--out", required=True)
    s.add_argument("--spines", help="write spine skeletons as PH-RASTER blocks")
    s.set_defaults(func=cmd_tile)

    s = sub.add_parser("quotient", help="probe loop words in M and its run-graph quotient")
    s.add_argument("--raster", required=True)
    s.add_argument("--loops")
    s.add_argument("--random", type=int, default=0, help="add this many random loops")
    s.add_argument("--show-loops", action="store_true")
    s.set_defaults(func=cmd_quotient)

    s = sub.add_parser("triangulate", help="ideal triangulation of circle points")
    s.add_argument("--points")
    s.add_argument("--random", type=int, default=0)
    s.set_defaults(func=cmd_triangulate)

    s = sub.add_parser("render", help="draw a scene, tiling or raster file")
    s.add_argument("--input", required=True)
    s.set_defaults(func=cmd_render)

    for name, s in sub.choices.items():
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--png", help="also write a matplotlib PNG figure")
        if name != "render":
            s.add_argument("--report")
        if name in ("scene", "check", "tile", "render"):
            s.add_argument("--svg")
    return p


def main(argv=None) -> int:
    try:
        a = build_parser().parse_args(argv)
        if not 0 <= a.seed < 2 ** 64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        return a.func(a)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, RasterFormatError, SceneError, TilerError, QuotientError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
