import json
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

import oracles
from sfcq.curves import UnsupportedError, builtin, point_address, polyline
from sfcq.measures import Box
from sfcq.packer import (layout_json, normalize_points, pack_blocks, read_points_csv, simulate_queries,
                         sort_points)
from sfcq.sampling import estimate_average


def _oracle_key(order, p, depth):
    """Address digits of ``p`` by plain-fraction descent over the oracle's rule expansion."""
    def frac(v):
        return Fraction(int(v.p), int(v.q))

    unit = [(frac(x), frac(y)) for x, y in oracles.unit_vertices(order)]
    maps = {}
    for name, rule in order.rules.items():
        maps[name] = [(tuple(frac(v) for v in oracles.affine(s.transform)), s.child, s.transform.reversed)
                      for s in rule.steps]
    rule, rev, q = order.root, False, p
    out = []
    for _ in range(depth):
        kids = maps[rule][::-1] if rev else maps[rule]
        for i, (t, child, r) in enumerate(kids):
            a, b, c, d, tx, ty = t
            xs = [a * x + b * y + tx for x, y in unit]
            ys = [c * x + d * y + ty for x, y in unit]
            # axis-parallel square cells: left and bottom edges belong to the cell
            if min(xs) <= q[0] < max(xs) and min(ys) <= q[1] < max(ys):
                det = a * d - b * c
                qx, qy = q[0] - tx, q[1] - ty
                q = ((d * qx - b * qy) / det, (a * qy - c * qx) / det)
                out.append(i)
                rule, rev = child, rev != r
                break
        else:
            raise AssertionError(f"{p} not located")
    return out


def test_single_point():
    assert sort_points(builtin("hilbert"), [(mpq(1, 3), mpq(1, 7))]) == [0]
    assert sort_points(builtin("hilbert"), []) == []


def test_hilbert_centroids_restored():
    h = builtin("hilbert")
    cents = polyline(h, 1)
    shuffled = [cents[i] for i in (2, 0, 3, 1)]
    perm = sort_points(h, shuffled)
    assert [shuffled[i] for i in perm] == cents


def test_gp_random_points_match_address_oracle():
    gp = builtin("gp")
    rnd = random.Random(2024)
    pts = [(Fraction(rnd.randrange(10 ** 6), 10 ** 6), Fraction(rnd.randrange(10 ** 6), 10 ** 6))
           for _ in range(1000)]
    keys = [(_oracle_key(gp, p, 12), i) for i, p in enumerate(pts)]
    expect = [i for _, i in sorted(keys)]
    assert sort_points(gp, [(mpq(x), mpq(y)) for x, y in pts]) == expect


def test_boundary_points_sort_exactly():
    h = builtin("hilbert")
    # points on cell borders at several levels, where float descent cannot decide
    pts = [(mpq(1, 2), mpq(1, 2)), (mpq(1, 4), mpq(1, 2)), (mpq(1, 2), mpq(1, 4)), (0, 0), (1, 0),
           (mpq(1, 2), 0), (mpq(3, 8), mpq(5, 8))]
    perm = sort_points(h, pts)
    addrs = [point_address(h, p, 20) for p in pts]
    assert [addrs[i] for i in perm] == sorted(addrs)


def test_duplicates_keep_input_order():
    p = (mpq(1, 3), mpq(2, 3))
    assert sort_points(builtin("gp"), [p, p, p]) == [0, 1, 2]


def test_points_outside_rejected():
    with pytest.raises(ValueError):
        sort_points(builtin("hilbert"), [(2, 0), (0, 0)])


def test_one_block_when_few_points():
    pts = [(mpq(1, 5), mpq(1, 3)), (mpq(3, 5), mpq(1, 9)), (mpq(1, 2), mpq(4, 5))]
    layout = pack_blocks(builtin("hilbert"), pts, 10)
    assert len(layout.blocks) == 1
    assert layout.blocks[0][1] == Box(mpq(1, 5), mpq(3, 5), mpq(1, 9), mpq(4, 5))


def test_gp_centroids_pack_into_columns():
    gp = builtin("gp")
    cents = polyline(gp, 1)
    layout = pack_blocks(gp, cents[::-1], 3)
    assert len(layout.blocks) == 3
    for col, (_, box) in enumerate(layout.blocks):
        assert box.xmin == box.xmax == mpq(2 * col + 1, 6)
        assert (box.ymin, box.ymax) == (mpq(1, 6), mpq(5, 6))
    assert layout.total_area == 0
    assert layout.total_perimeter == 3 * 2 * mpq(2, 3)
    with pytest.raises(ValueError):
        pack_blocks(gp, cents, 0)


coord = st.fractions(min_value=0, max_value=1, max_denominator=1000).map(lambda f: mpq(f.numerator, f.denominator))


@given(st.lists(st.tuples(coord, coord), min_size=1, max_size=40, unique=True), st.integers(1, 7))
def test_blocks_partition_and_boxes_are_minimal(pts, b):
    layout = pack_blocks(builtin("hilbert"), pts, b)
    assert len(layout.blocks) == math.ceil(len(pts) / b)
    seen = sorted(i for idx, _ in layout.blocks for i in idx)
    assert seen == list(range(len(pts)))
    for idx, box in layout.blocks:
        assert len(idx) <= b
        xs = [pts[i][0] for i in idx]
        ys = [pts[i][1] for i in idx]
        assert box == Box(min(xs), max(xs), min(ys), max(ys))


@given(st.lists(st.tuples(coord, coord), min_size=2, max_size=30, unique=True), st.randoms())
def test_reordering_input_keeps_blocks(pts, rnd):
    order = builtin("beta-omega")
    a = pack_blocks(order, pts, 4)
    shuffled = pts[:]
    rnd.shuffle(shuffled)
    b = pack_blocks(order, shuffled, 4)
    assert [{pts[i] for i in idx} for idx, _ in a.blocks] == [{shuffled[i] for i in idx} for idx, _ in b.blocks]


def test_whole_square_block_point_queries():
    layout = pack_blocks(builtin("hilbert"), [(0, 0), (1, 1)], 2)
    stats = simulate_queries(layout, "point", 500, seed=1)
    assert stats.mean == 1 and stats.stddev == 0


def _random_layout(order, n, b, seed):
    rng = np.random.default_rng(seed)
    pts = [(mpq(int(x), 10 ** 6), mpq(int(y), 10 ** 6)) for x, y in rng.integers(0, 10 ** 6, (n, 2))]
    return pack_blocks(order, pts, b)


def test_point_queries_estimate_total_area():
    layout = _random_layout(builtin("hilbert"), 2000, 20, 5)
    stats = simulate_queries(layout, "point", 20000, seed=9)
    assert abs(stats.mean - float(layout.total_area)) <= 3 * stats.stderr


def test_line_queries_follow_perimeters():
    a = _random_layout(builtin("hilbert"), 2000, 20, 5)
    b = _random_layout(builtin("z-order"), 2000, 20, 5)
    sa = simulate_queries(a, "line", 40000, seed=3)
    sb = simulate_queries(b, "line", 40000, seed=3)
    # a random line of this family meets a convex set with probability perimeter / (pi * sqrt2)
    for s, lay in ((sa, a), (sb, b)):
        assert abs(s.mean - float(lay.total_perimeter) / (math.pi * math.sqrt(2))) <= 3 * s.stderr
    ratio = sa.mean / sb.mean
    assert ratio == pytest.approx(float(a.total_perimeter / b.total_perimeter), rel=0.05)


def test_dense_points_match_sampling_prediction():
    h = builtin("hilbert")
    layout = _random_layout(h, 10 ** 5, 100, 1)
    pred = estimate_average(h, "aba", samples=20, m_min=1000, m_max=1000, seed=1).mean
    assert float(layout.total_area) == pytest.approx(pred, rel=0.10)


def test_determinism_of_json():
    a = _random_layout(builtin("gp"), 300, 7, 4)
    b = _random_layout(builtin("gp"), 300, 7, 4)
    assert json.dumps(layout_json(a)) == json.dumps(layout_json(b))
    qa = simulate_queries(a, "line", 1000, seed=8)
    qb = simulate_queries(b, "line", 1000, seed=8)
    assert qa.to_json() == qb.to_json()


def test_simulate_errors():
    layout = pack_blocks(builtin("hilbert"), [(0, 0)], 1)
    with pytest.raises(ValueError):
        simulate_queries(layout, "point", 0)
    with pytest.raises(ValueError):
        simulate_queries(layout, "disc", 10)


def test_normalize_points():
    pts = [(10, 20), (14, 21), (12, 22)]
    out = normalize_points(builtin("hilbert"), pts)
    assert out == [(0, 0), (1, mpq(1, 4)), (mpq(1, 2), mpq(1, 2))]
    out = normalize_points(builtin("balanced-gp"), [(0, 0), (2, 1)])
    assert out == [(0, 0), (1, mpq(1, 2))]
    with pytest.raises(UnsupportedError):
        normalize_points(builtin("sierpinski-knopp"), pts)


def test_read_points_csv():
    pts = read_points_csv("x,y\n0.5,0.25\n\n1/3,1\n")
    assert pts == [(mpq(1, 2), mpq(1, 4)), (mpq(1, 3), 1)]
    assert read_points_csv("0.1,0.2\n") == [(mpq(1, 10), mpq(1, 5))]
    with pytest.raises(ValueError):
        read_points_csv("x,y\n1,a\n")
    with pytest.raises(ValueError):
        read_points_csv("1\n")
