"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from domains import fat_domain  # noqa: E402
from oracles import flood_fill, run_merge_counts  # noqa: E402
from planar_homotopy.characterize import FAIL, PASS, condition1, condition2  # noqa: E402
from planar_homotopy.cli import main  # noqa: E402
from planar_homotopy.lamination import cancellation_lamination, check_triangulation, ideal_triangulation  # noqa: E402
from planar_homotopy.quotient import (assign_cuts, build_run_graph, concatenate, find_holes,  # noqa: E402
                                      injectivity_probe, loop_word_in_M, random_loop, reduce_word, spanning_tree)
from planar_homotopy.raster import Raster, label_components, write_raster  # noqa: E402
from planar_homotopy.retractor import build_spine  # noqa: E402
from planar_homotopy.scenes import builtin_scene, carpet_raster, comb_columns  # noqa: E402
from planar_homotopy.tiler import missing_claims, run_stages  # noqa: E402

pytestmark = pytest.mark.acceptance

RESULTS: dict[int, tuple[bool, str]] = {}
SEED = 20240917


def _check_report(scene_name: str, tmp: Path) -> tuple[int, list[str], float]:
    scene = tmp / f"{scene_name}.phs"
    report = tmp / f"{scene_name}.txt"
    main(["scene", "--name", scene_name, "--depth", "2", "--k", "8", "--out", str(scene),
          "--report", str(tmp / "validation.txt")])
    t0 = time.perf_counter()
    rc = main(["check", "--scene", str(scene), "--report", str(report)])
    return rc, report.read_text().splitlines(), time.perf_counter() - t0


def criterion_1() -> str:
    with tempfile.TemporaryDirectory() as d:
        rc_f, lines_f, t_f = _check_report("sierpinski_filled_hole", Path(d))
        rc_s, lines_s, t_s = _check_report("sierpinski", Path(d))
    assert lines_f[-1] == "VERDICT=equals-2" and rc_f == 1, lines_f[-1]
    assert lines_s[-1] == "VERDICT=at-most-1" and rc_s == 0, lines_s[-1]
    wit = [l for l in lines_f if l.startswith("cond1 witness")]
    assert len(wit) == 1, wit
    fields = dict(tok.split("=") for tok in wit[0].split()[2:])
    r, c = map(int, fields["first_cell"].split(","))
    n = 256
    assert n / 3 <= r <= n / 2 and n / 3 <= c <= n / 2, (r, c)
    assert int(fields["size"]) >= (n // 3 - 4) ** 2, fields["size"]     # the whole central hole
    assert t_f < 10 and t_s < 10, (t_f, t_s)
    return f"filled_hole=equals-2 witness={r},{c} size={fields['size']} ({t_f:.2f}s); sierpinski=at-most-1 ({t_s:.2f}s)"


def criterion_2() -> str:
    t0 = time.perf_counter()
    one = builtin_scene("comb_one_sided", 2, 8)
    two = builtin_scene("comb_two_sided", 2, 8)
    rep1 = condition2(one)
    c1_two, c2_two = condition1(two), condition2(two)
    elapsed = time.perf_counter() - t0
    assert rep1.verdict == FAIL and rep1.witnesses
    limit = comb_columns(8)[0]
    for w in rep1.witnesses:
        assert all(m["bbox"][3] < limit for m in w["members"])      # left of the limit arc
        gaps = sorted({limit - m["bbox"][2] for m in w["members"]})
        assert len(gaps) >= 3 and gaps[0] <= 2, gaps                  # closing in on it
    assert c1_two.verdict == PASS and c2_two.verdict == PASS
    assert elapsed < 10, elapsed
    return f"comb_one_sided cond2=fail ({len(rep1.witnesses)} families on x=1/2); comb_two_sided pass ({elapsed:.2f}s)"


def criterion_3() -> str:
    t0 = time.perf_counter()
    scene = builtin_scene("sierpinski", 2, 8)
    t = run_stages(scene, 3)
    elapsed = time.perf_counter() - t0
    assert missing_claims(t, 3) == []
    assert all(c.status == PASS for c in t.checks), [c for c in t.checks if c.status != PASS]
    n = 1 << t.k
    owned = np.zeros(n * n, dtype=int)
    for d in t.domains:
        owned[d.cells] += 1
        assert d.punctures or d.contains_infinity
        if not d.contains_infinity:
            assert d.diameter <= 1 / d.stage + 1e-12, (d.stage, d.diameter)
    assert owned.max() <= 1
    assert all(a <= b for a, b in zip(t.coverage, t.coverage[1:])), t.coverage
    assert elapsed < 60, elapsed
    cov = ",".join(f"{c:.4f}" for c in t.coverage)
    return f"claims={len(t.checks)} all pass, domains={len(t.domains)} coverage={cov} ({elapsed:.2f}s)"


def criterion_4() -> str:
    rng = np.random.default_rng(SEED)
    sizes = []
    for _ in range(50):
        mask, pts = fat_domain(rng)
        s = build_spine(mask, pts)
        assert sorted(r.puncture for r in s.regions) == sorted(pts)
        sk = s.skeleton.cells
        assert not (sk[:-1, :-1] & sk[1:, :-1] & sk[:-1, 1:] & sk[1:, 1:]).any()
        sizes.append(len(pts))
    return f"50/50 domains (punctures per domain {min(sizes)}..{max(sizes)})"


def criterion_5() -> str:
    m = carpet_raster(2, 7)
    rng = np.random.default_rng(SEED)
    g = build_run_graph(m)
    holes, tree = assign_cuts(m), spanning_tree(g)
    loops = [random_loop(m, rng) for _ in range(200)]
    consistent = sum(injectivity_probe(m, l, g, holes, tree).consistent for l in loops)
    assert consistent == 200, consistent
    base = tuple(int(v) for v in np.argwhere(m.cells)[0])
    for _ in range(100):
        a, b = random_loop(m, rng, base=base), random_loop(m, rng, base=base)
        wa, wb = loop_word_in_M(m, a, holes), loop_word_in_M(m, b, holes)
        assert loop_word_in_M(m, concatenate(a, b), holes).letters == reduce_word(wa.letters + wb.letters)
    empties = [loop_word_in_M(m, l, holes).empty for l in loops]
    for i in range(5):
        h = assign_cuts(m, find_holes(m), np.random.default_rng(SEED + i + 1))
        assert [loop_word_in_M(m, l, h).empty for l in loops] == empties
    return f"consistent=200/200, 100 concatenations multiplicative, emptiness stable over 5 cut sets ({sum(empties)} trivial loops)"


def criterion_6() -> str:
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    ok = 0
    for n in range(3, 41):
        for _ in range(10):
            picks = rng.choice(2 ** 20 - 1, size=n, replace=False) + 1
            tri = ideal_triangulation([Fraction(int(p), 2 ** 20) for p in picks])
            chk = check_triangulation(tri)
            ok += chk.count_ok and chk.disjoint_ok and chk.prefix_ok and chk.covers_hull
    elapsed = time.perf_counter() - t0
    assert ok == 380, ok
    assert elapsed < 5, elapsed
    return f"380/380 cases ({elapsed:.2f}s)"


def criterion_7() -> str:
    rng = np.random.default_rng(SEED)
    worst = 1.0
    for _ in range(100):
        w: list[int] = []
        target = int(rng.integers(0, 21)) * 2
        while len(w) < target:
            x = int(rng.integers(1, 5)) * (1 if rng.random() < 0.5 else -1)
            i = int(rng.integers(0, len(w) + 1))
            w[i:i] = [x, -x]
        lam = cancellation_lamination(w)
        assert lam.checks["constant"] and lam.checks["noncrossing"], (w, lam.checks)
        worst = min(worst, lam.coverage)
    assert worst >= 1.0, worst
    return f"100/100 words constant+noncrossing, min filling coverage={worst:.4f} at 2-cell tolerance"


def criterion_8() -> str:
    rng = np.random.default_rng(SEED)
    for i in range(1000):
        k = int(rng.integers(1, 7))
        grid = rng.random((1 << k, 1 << k)) < rng.uniform(0.1, 0.9)
        adj = 4 if i % 2 else 8
        fam = label_components(Raster(k, grid), adj)
        got = sorted(frozenset(map(tuple, c.cells.tolist())) for c in fam)
        want = sorted(flood_fill(grid.tolist(), adj))
        assert got == want, (k, adj)
    for _ in range(200):
        k = int(rng.integers(1, 7))
        grid = rng.random((1 << k, 1 << k)) < rng.uniform(0.1, 0.9)
        g = build_run_graph(Raster(k, grid))
        assert (g.node_count, g.edge_count) == run_merge_counts(grid.tolist())
    return "labeling 1000/1000, run graph 200/200"


def criterion_9() -> str:
    with tempfile.TemporaryDirectory() as d:
        d = Path(d)
        write_raster(carpet_raster(2, 6), d / "m.txt")
        commands = {
            "scene": ["scene", "--name", "comb_two_sided", "--depth", "2", "--k", "8", "--out", "{o}.phs",
                      "--svg", "{o}.svg"],
            "check": ["check", "--scene", "{d}/scene.phs"],
            "tile": ["tile", "--scene", "{d}/scene.phs", "--stages", "2", "--out", "{o}.tiling"],
            "quotient": ["quotient", "--raster", "{d}/m.txt", "--random", "10", "--seed", "7"],
            "triangulate": ["triangulate", "--random", "25", "--seed", "7"],
            "render": ["render", "--input", "{d}/scene.phs", "--svg", "{o}.svg"],
        }
        main(["scene", "--name", "sierpinski", "--depth", "2", "--k", "8", "--out", str(d / "scene.phs"),
              "--report", str(d / "validation.txt")])
        for name, cmd in commands.items():
            outputs = []
            for run in range(2):
                o = d / f"{name}{run}"
                argv = [c.format(d=d, o=o) for c in cmd]
                if name != "render":
                    argv += ["--report", f"{o}.report"]
                main(argv)
                outputs.append({p.suffix: p.read_bytes() for p in d.glob(f"{name}{run}.*")})
            assert outputs[0] and outputs[0] == outputs[1], name
    return f"{len(commands)} commands byte-identical across two runs"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 10)}


def run(i: int) -> tuple[bool, str]:
    try:
        detail = CRITERIA[i]()
        RESULTS[i] = (True, detail)
    except AssertionError as exc:
        RESULTS[i] = (False, f"assertion: {exc}")
    return RESULTS[i]


def line(i: int) -> str:
    ok, detail = RESULTS[i]
    return f"criterion {i}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.parametrize("i", list(CRITERIA))
def test_criterion(i):
    ok, detail = run(i)
    print(line(i))
    assert ok, detail


if __name__ == "__main__":
    for i in CRITERIA:
        run(i)
        print(line(i), flush=True)
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
