import itertools
import random

import pytest
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

import oracles
from sfcq import curves
from sfcq.curves import (BUILTIN_NAMES, BudgetError, Region, Rule, ScanningOrder, Step, TilingError,
                         Transform, builtin, cell_region, compare, format_curve_file, parse_curve_file,
                         point_address, polyline, serpentine, validate)
from sfcq.exact import ParseError, R2, R3, to_float

POLYGONAL = [n for n in BUILTIN_NAMES if n != "gosper"]


def test_catalog_shapes():
    h = builtin("hilbert")
    assert len(h.rules) == 1 and h.rules[h.root].n == 4 and h.unit.area == 1
    gp = builtin("gp")
    assert gp.rules[gp.root].n == 9
    assert all(t.b == 0 and t.c == 0 for t in gp.transforms())
    sk = builtin("sierpinski-knopp")
    assert sk.unit.area == 1
    with pytest.raises(KeyError):
        builtin("peano-x")


def test_balanced_gp_is_stretched_gp():
    b = builtin("balanced-gp")
    xs = sorted({to_float(v[0]) for v in b.unit.vertices})
    ys = sorted({to_float(v[1]) for v in b.unit.vertices})
    assert xs == pytest.approx([0, 3 ** 0.5]) and ys == [0, 1]
    assert b.unit.area == R3
    # same traversal as GP after undoing the stretch
    gp_line = polyline(builtin("gp"), 2)
    b_line = polyline(b, 2)
    assert [c for x, y in b_line for c in (to_float(x) / 3 ** 0.5, to_float(y))] == pytest.approx(
        [c for x, y in gp_line for c in (to_float(x), to_float(y))])


@pytest.mark.parametrize("code,name", [("000000000", "gp"), ("111111111", "coil"),
                                       ("110110110", "meurthe"), ("101010101", "luxburg2")])
def test_serpentine_calibration(code, name):
    a, b = serpentine(code), builtin(name)
    assert [s.transform for s in a.rules[a.root].steps] == [s.transform for s in b.rules[b.root].steps]


def test_serpentine_rejects_bad_codes():
    with pytest.raises(ValueError):
        serpentine("00000000")
    with pytest.raises(ValueError):
        serpentine("000000002")


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtins_tile(name):
    order = builtin(name)
    report = validate(order, 1)
    assert report.ok, str(report)


def test_validate_detects_shifted_child():
    h = builtin("hilbert")
    steps = list(h.rules["H"].steps)
    t = steps[0].transform
    steps[0] = Step(Transform(t.a, t.b, t.c, t.d, t.tx + mpq(1, 100), t.ty, t.reversed), "H")
    bad = ScanningOrder("bad", {"H": Rule("H", tuple(steps))}, "H", h.unit)
    report = validate(bad)
    assert not report.ok
    # the shifted quarter square overlaps its right neighbour cell 3 in a 1/100 x 1/2 strip
    assert report.max_overlap["H"] == mpq(1, 200)


def test_cell_region_examples():
    h = builtin("hilbert")
    assert cell_region(h, ()) == h.unit
    assert cell_region(h, (0,)).area == mpq(1, 4)
    gp = builtin("gp")
    c = cell_region(gp, (0, 0))
    assert c.area == mpq(1, 81)
    xs = {v[0] for v in c.vertices}
    ys = {v[1] for v in c.vertices}
    assert xs == {0, mpq(1, 9)} and ys == {0, mpq(1, 9)}
    with pytest.raises(ValueError):
        cell_region(h, (4,))


def test_cell_regions_match_independent_expansion():
    for name in ("hilbert", "gp", "beta-omega", "sierpinski-knopp"):
        order = builtin(name)
        for t, addr in oracles.expand(order, 2):
            mine = cell_region(order, addr)
            theirs = oracles.cell_vertices(order, t)
            assert sorted((to_float(x), to_float(y)) for x, y in mine.vertices) == pytest.approx(
                sorted((float(x), float(y)) for x, y in theirs))


def test_polyline_examples():
    h1 = polyline(builtin("hilbert"), 1)
    assert h1 == [(mpq(1, 4), mpq(1, 4)), (mpq(1, 4), mpq(3, 4)), (mpq(3, 4), mpq(3, 4)), (mpq(3, 4), mpq(1, 4))]
    gp1 = polyline(builtin("gp"), 1)
    assert len(gp1) == 9
    assert [p[0] for p in gp1[:3]] == [mpq(1, 6)] * 3
    assert [p[1] for p in gp1[:6]] == [mpq(1, 6), mpq(1, 2), mpq(5, 6), mpq(5, 6), mpq(1, 2), mpq(1, 6)]
    h2 = polyline(builtin("hilbert"), 2)
    assert len(h2) == 16 and len(set(h2)) == 16
    for p, q in zip(h2, h2[1:]):
        assert max(abs(p[0] - q[0]), abs(p[1] - q[1])) == mpq(1, 4)
    assert len(polyline(builtin("gp"), 2)) == 81
    assert len(polyline(builtin("sierpinski-knopp"), 3)) == 64
    with pytest.raises(BudgetError):
        polyline(builtin("gp"), 7, budget=1000)


def _shares_edge(p, q):
    pv = {(to_float(x), to_float(y)) for x, y in p.vertices}
    qv = {(to_float(x), to_float(y)) for x, y in q.vertices}
    common = {a for a in pv if any(abs(a[0] - b[0]) < 1e-12 and abs(a[1] - b[1]) < 1e-12 for b in qv)}
    return len(common) >= 2


@pytest.mark.parametrize("name", ["hilbert", "gp", "coil", "meurthe", "luxburg2", "r-order",
                                  "serpentine-011010110", "balanced-gp"])
def test_connectivity(name):
    order = builtin(name)
    cells = [order.unit.transformed(t) for t, _, _ in curves._cells(order, 3)]
    for p, q in zip(cells, cells[1:]):
        assert _shares_edge(p, q)


@pytest.mark.parametrize("name", POLYGONAL)
def test_polyline_visits_each_cell_once(name):
    order = builtin(name)
    pts = polyline(order, 2)
    assert len(set(pts)) == len(pts)


@pytest.mark.parametrize("name", ["hilbert", "gp", "sierpinski-knopp", "beta-omega", "balanced-gp"])
def test_compare_matches_address_order(name):
    order = builtin(name)
    cells = oracles.expand(order, 2)
    cents = []
    for t, addr in cells:
        region = cell_region(order, addr)
        cents.append((region.centroid, addr))
    rnd = random.Random(5)
    for (p, ap), (q, aq) in rnd.sample(list(itertools.combinations(cents, 2)), 60):
        expect = "before" if ap < aq else "after"
        assert compare(order, p, q, 6) == expect


def test_compare_examples():
    h = builtin("hilbert")
    p = (mpq(1, 3), mpq(1, 5))
    assert compare(h, p, p, 8) == "undecided"
    assert compare(h, (0, 0), (1, 0), 1) == "before"
    gp = builtin("gp")
    p, q = (mpq(1, 2), mpq(1, 9)), (mpq(1, 2), mpq(2, 9))
    # both points sit on horizontal cell borders, which belong to the cell above
    where = {}
    for t, addr in oracles.expand(gp, 2):
        verts = oracles.cell_vertices(gp, t)
        x0, x1, y0, y1 = oracles.box_of(verts)
        for name, pt in (("p", p), ("q", q)):
            if x0 <= oracles.sym(pt[0]) < x1 and y0 <= oracles.sym(pt[1]) < y1:
                where[name] = addr
    assert where["p"][0] == where["q"][0] == 5
    assert compare(gp, p, q, 2) == ("before" if where["p"] < where["q"] else "after")
    with pytest.raises(ValueError):
        compare(h, (2, 0), (0, 0))


def test_boundary_tie_break():
    h = builtin("hilbert")
    # the vertical line x = 1/2 belongs to the right-hand cells, y = 1/2 to the upper ones
    assert point_address(h, (mpq(1, 2), mpq(1, 4)), 1) == [3]
    assert point_address(h, (mpq(1, 4), mpq(1, 2)), 1) == [1]
    assert point_address(h, (1, 1), 1) == [2]


coords = st.fractions(min_value=0, max_value=1, max_denominator=64).map(lambda f: mpq(f.numerator, f.denominator))


@given(coords, coords)
def test_point_address_cell_contains_point(x, y):
    for name in ("hilbert", "gp", "beta-omega"):
        order = builtin(name)
        addr = point_address(order, (x, y), 4)
        assert cell_region(order, addr).contains((x, y))


@given(coords, coords, coords, coords)
def test_compare_antisymmetric(a, b, c, d):
    order = builtin("hilbert")
    r1 = compare(order, (a, b), (c, d), 10)
    r2 = compare(order, (c, d), (a, b), 10)
    assert {r1, r2} in ({"before", "after"}, {"undecided"})


def test_transform_algebra():
    t = Transform(mpq(1, 2), 0, 0, mpq(-1, 2), mpq(1, 3), 1, True)
    u = Transform(0, R2, -R2, 0, 1, 0)
    ident = t.compose(t.inverse())
    assert ident.key()[:6] == Transform.identity().key()[:6]
    p = (mpq(1, 5), mpq(2, 7))
    assert t.compose(u).apply(p) == t.apply(u.apply(p))
    assert (t.compose(u)).det == t.det * u.det


def test_curve_file_roundtrip():
    for name in ("hilbert", "beta-omega", "balanced-gp", "sierpinski-knopp"):
        order = builtin(name)
        again = parse_curve_file(format_curve_file(order))
        assert again.root == order.root
        for r in order.rules:
            assert again.rules[r].steps == order.rules[r].steps


HILBERT_FILE = """\
# Hilbert order
curve my-hilbert
unit 0 0 1 0 1 1 0 1
rule H n=4
step 0: m 0 1/2 1/2 0 t 0 0 child H rev 0
step 1: m 1/2 0 0 1/2 t 0 1/2 child H rev 0
step 2: m 1/2 0 0 1/2 t 1/2 1/2 child H rev 0
step 3: m 0 -1/2 -1/2 0 t 1 1/2 child H rev 0
"""


def test_parse_hilbert_file_matches_builtin():
    order = parse_curve_file(HILBERT_FILE)
    assert order.name == "my-hilbert"
    assert [s.transform for s in order.rules["H"].steps] == [s.transform for s in builtin("hilbert").rules["H"].steps]


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_curve_file("curve empty\nunit 0 0 1 0 1 1 0 1\n")
    with pytest.raises(ParseError) as err:
        parse_curve_file(HILBERT_FILE.replace("t 1/2 1/2", "t 1/2 1/2x"))
    assert err.value.line == 7
    with pytest.raises(ParseError):
        parse_curve_file(HILBERT_FILE.replace("child H rev 0\nstep 3", "child K rev 0\nstep 3"))
    short = "\n".join(HILBERT_FILE.splitlines()[:-1]).replace("n=4", "n=3") + "\n"
    with pytest.raises(TilingError):
        parse_curve_file(short)


def test_area_sum_eight_ninths_is_a_tiling_error():
    lines = ["curve partial", "rule S n=8"]
    third = "1/3"
    k = 0
    for i in range(3):
        for j in range(3):
            if (i, j) == (2, 2):
                continue
            lines.append(f"step {k}: m {third} 0 0 {third} t {i}/3 {j}/3 child S rev 0")
            k += 1
    with pytest.raises(TilingError) as err:
        parse_curve_file("\n".join(lines) + "\n")
    assert err.value.report.area_sums["S"] == mpq(8, 9)


def test_region_checks():
    with pytest.raises(ValueError):
        Region([(0, 0), (1, 0), (2, 0)])
    sq = Region([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert sq.contains((1, 1)) and not sq.owns((1, mpq(1, 2)))
