import random

import numpy as np
import pytest
import sympy as sp
from gmpy2 import mpq

import oracles
from sfcq.curves import BudgetError, UnsupportedError, builtin
from sfcq.exact import to_float
from sfcq.measures import MeasureId
from sfcq.probe import base_probes, compute_worst, grid_oracle, refine, supported_measures


def _inverse(t):
    a, b, c, d, tx, ty = t
    det = a * d - b * c
    ia, ib, ic, id_ = d / det, -b / det, -c / det, a / det
    return (ia, ib, ic, id_, -(ia * tx + ib * ty), -(ic * tx + id_ * ty))


def _position(addr, n):
    return sum(sp.Rational(d, n ** (k + 1)) for k, d in enumerate(addr))


def test_base_probe_counts():
    assert len(base_probes(builtin("hilbert"))) == 6
    assert len(base_probes(builtin("gp"))) == 36
    assert all(p.depth == 1 for p in base_probes(builtin("hilbert")))
    # every rule of a multi-rule order contributes its own base probes
    assert len(base_probes(builtin("beta-omega"))) > 6


def test_hilbert_b02_canonical_form():
    h = builtin("hilbert")
    cells = dict((addr, t) for t, addr in oracles.expand(h, 1))
    p = base_probes(h, MeasureId.WBA)[1]
    assert (p.area, p.degenerate) == (1, False)
    inv0 = _inverse(cells[(0,)])
    mid = [oracles.apply(inv0, v) for v in oracles.cell_vertices(h, cells[(1,)])]
    x0, x1, y0, y1 = oracles.box_of(mid)
    sup = [to_float(p.sup[k]) for k in (0, 2, 4, 6)]
    assert sup == pytest.approx([float(x1), float(y1), float(-x0), float(-y0)])
    omega = oracles.compose(inv0, cells[(2,)])
    assert [to_float(v) for v in p.omega] == pytest.approx([float(v) for v in omega])


def test_refine_area_matches_cell_enumeration():
    h = builtin("hilbert")
    b03 = base_probes(h)[2]
    assert b03.area == 2
    child = refine(b03, 0, 0)
    # cells 01 .. 23 at depth 2: eleven cells of the front cell 00's size
    assert child.area == 11
    assert child.depth == 2


def test_degenerate_probe_children():
    h = builtin("hilbert")
    b01 = base_probes(h)[0]
    assert b01.degenerate
    child = refine(b01, 3, 0)
    assert child.degenerate and child.area == 0
    assert not refine(b01, 2, 0).degenerate


def test_refine_rejects_bad_digits():
    p = base_probes(builtin("hilbert"))[0]
    with pytest.raises(ValueError):
        refine(p, 4, 0)


@pytest.mark.parametrize("name", ["hilbert", "gp", "sierpinski-knopp"])
def test_random_refinements_match_oracle(name):
    order = builtin(name)
    n = order.rules[order.root].n
    depth = 3 if n == 4 else 2
    cells = dict((addr, t) for t, addr in oracles.expand(order, depth + 1))
    unit = oracles.unit_vertices(order)
    base = base_probes(order, MeasureId.WBA)
    pairs = [(i, k) for i in range(n) for k in range(i + 1, n)]
    rnd = random.Random(3)
    for _ in range(25):
        idx = rnd.randrange(len(base))
        p = base[idx]
        fa, ta = [pairs[idx][0]], [pairs[idx][1]]
        for _ in range(depth):
            i, j = rnd.randrange(n), rnd.randrange(n)
            child = refine(p, i, j)
            if not p.degenerate:
                assert child.area > p.area
            p = child
            fa.append(i)
            ta.append(j)
        size = sp.Rational(1, n ** len(fa))
        expect = (_position(ta, n) - _position(fa, n) - size) / size
        assert p.area == mpq(int(expect.p), int(expect.q))
        inv_front = _inverse(cells[tuple(fa)])
        omega = oracles.compose(inv_front, cells[tuple(ta)])
        assert [to_float(v) for v in p.omega] == pytest.approx([float(v) for v in omega], abs=1e-12)
        between = [a for a in cells if tuple(fa) < a < tuple(ta)]
        if between:
            pts = [oracles.apply(inv_front, oracles.apply(cells[a], v)) for a in between for v in unit]
            x0, x1, y0, y1 = oracles.box_of(pts)
            sup = [to_float(p.sup[k]) for k in (0, 2, 4, 6)]
            assert sup == pytest.approx([float(x1), float(y1), float(-x0), float(-y0)], abs=1e-12)


def test_supported_measures():
    assert supported_measures(builtin("gosper")) == [MeasureId.WL2]
    assert len(supported_measures(builtin("hilbert"))) == 7
    assert len(supported_measures(builtin("sierpinski-knopp"))) == 7
    with pytest.raises(UnsupportedError):
        compute_worst(builtin("gosper"), MeasureId.WBA)
    with pytest.raises(ValueError):
        compute_worst(builtin("hilbert"), MeasureId.ABA)


def test_hilbert_wl2_quick():
    r = compute_worst(builtin("hilbert"), "wl2", gap=1e-2)
    assert r.converged and not r.unbounded_suspected
    assert r.lower <= 6 <= r.upper
    assert r.upper_f - r.lower_f <= 1e-2
    j = r.to_json()
    assert set(j) >= {"curve", "measure", "lower", "upper", "converged", "unbounded_suspected",
                      "probes_explored", "queue_peak", "wall_ms"}


def test_determinism():
    a = compute_worst(builtin("gp"), "wbp", gap=1e-2)
    b = compute_worst(builtin("gp"), "wbp", gap=1e-2)
    assert (a.lower, a.upper, a.probes_explored, a.queue_peak) == (b.lower, b.upper, b.probes_explored,
                                                                  b.queue_peak)


def test_z_order_unbounded():
    r = compute_worst(builtin("z-order"), "wba", gap=1e-3)
    assert r.unbounded_suspected and not r.converged
    assert r.lower_f > 100


def test_budget_exhaustion_is_not_converged():
    r = compute_worst(builtin("gp"), "wba", gap=1e-6, max_probes=200)
    assert not r.converged
    assert r.lower <= r.upper


def test_grid_oracle_hand_value():
    assert grid_oracle(builtin("hilbert"), "wl2", 1) == mpq(8, 3)


def test_grid_oracle_matches_float_brute_force():
    for name, measure in [("hilbert", "wl2"), ("hilbert", "wba"), ("gp", "wl-inf"), ("sierpinski-knopp", "wbp"),
                          ("beta-omega", "wl1")]:
        order = builtin(name)
        depth = 2
        v = to_float(grid_oracle(order, measure, depth))
        assert v == pytest.approx(oracles.brute_worst_float(order, measure, depth), rel=1e-9)


@pytest.mark.parametrize("name,measure,upper", [("hilbert", "wl2", 6.001), ("gp", "wba", 2.0001),
                                                ("hilbert", "wba", 2.401), ("beta-omega", "wl-inf", 5.001)])
def test_grid_oracle_sequence_below_upper_bound(name, measure, upper):
    order = builtin(name)
    n = order.rules[order.root].n
    prev = 0
    for k in range(1, 6 if n == 4 else 4):
        v = grid_oracle(order, measure, k)
        assert v >= prev
        assert to_float(v) <= upper
        prev = v
    assert to_float(grid_oracle(builtin("gp"), "wba", 2)) >= 1


def test_grid_oracle_budget():
    with pytest.raises(BudgetError):
        grid_oracle(builtin("gp"), "wl2", 5)


def _start_points(order, depth):
    """Float start point of every depth-``depth`` subcurve, plus the curve's end point."""
    out = []

    def rec(t, rule, rev, k):
        if k == 0:
            out.append(oracles.apply(t, (1.0, 0.0) if rev else (0.0, 0.0)))
            return
        steps = list(order.rules[rule].steps)
        for st in reversed(steps) if rev else steps:
            f = tuple(to_float(v) for v in (st.transform.a, st.transform.b, st.transform.c, st.transform.d,
                                             st.transform.tx, st.transform.ty))
            rec(oracles.compose(t, f), st.child, rev != st.transform.reversed, k - 1)

    rec((1.0, 0.0, 0.0, 1.0, 0.0, 0.0), order.root, False, depth)
    out.append((1.0, 0.0))
    return np.array(out)


def test_gosper_vertex_pairs_stay_below_certified_upper():
    # subcurve start points lie on the limit curve, so every pair gives a valid lower bound
    g = builtin("gosper")
    pts = _start_points(g, 4)
    n = len(pts) - 1
    steps = np.hypot(*(pts[1:] - pts[:-1]).T)
    assert steps == pytest.approx(7 ** -2)
    area = to_float(g.unit.area)
    best = max((((pts[i + 1:] - pts[i]) ** 2).sum(1) / (np.arange(1, n - i + 1) * area / n)).max()
               for i in range(n))
    # already above 6.4 at this depth
    assert best > 6.4
    assert best <= compute_worst(g, "wl2", gap=0.05).upper_f
