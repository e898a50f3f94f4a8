"""Certified worst-case measures by probe refinement.

A probe stands for every curve section that starts in a *front* cell, runs
through a fixed *midsection* and ends in a *tail* cell.  Probes are kept in
canonical form (front = the unit region), so a probe is described by the front
and tail rule states, the tail map ``omega``, and a summary of the midsection
(its area as a fraction of the unit region, plus its support vector for
extent-based measures).  Refining a probe splits front and tail into their
children; the search below processes probes first-in first-out and keeps
``lower <= worst value <= max upper over the queue``.

Search decisions (pruning, convergence) are taken in double precision with a
relative safety margin of ``1e-9``; the reported end points are recomputed
exactly.
"""
from __future__ import annotations

import heapq
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from gmpy2 import mpq

from . import _support
from .curves import (
    FractalTile,
    Region,
    ScanningOrder,
    Transform,
    UnsupportedError,
    _cells,
)
from .exact import ExactScalar, RationalInterval, as_exact, enclose, format_scalar, to_float
from .measures import (
    INF,
    MeasureId,
    Metric,
    pair_numerator,
    pair_numerator_f,
    set_numerator,
    set_numerator_f,
)

__all__ = [
    "Probe",
    "MeasureInterval",
    "ProbeSpace",
    "base_probes",
    "refine",
    "compute_worst",
    "grid_oracle",
    "supported_measures",
]

_MARGIN = 1e-9
_R2F, _R3F, _R6F = math.sqrt(2.0), math.sqrt(3.0), math.sqrt(6.0)


def _f(x) -> float:
    if isinstance(x, ExactScalar):
        return float(x.a) + float(x.b) * _R2F + float(x.c) * _R3F + float(x.d) * _R6F
    return float(x)


def _sup_f(sup):
    return [0.0 if v is None else _f(v) for v in sup]


def _abs(x):
    return -x if x < 0 else x


def _sgn(x) -> int:
    return (x > 0) - (x < 0)


# -- affine maps as plain tuples (a, b, c, d, tx, ty) ---------------------------------

def _compose(s, o):
    a, b, c, d, tx, ty = s
    oa, ob, oc, od, otx, oty = o
    return (a * oa + b * oc, a * ob + b * od, c * oa + d * oc, c * ob + d * od,
            a * otx + b * oty + tx, c * otx + d * oty + ty)


def _apply(t, p):
    return (t[0] * p[0] + t[1] * p[1] + t[4], t[2] * p[0] + t[3] * p[1] + t[5])


def _tuple(t: Transform):
    return (t.a, t.b, t.c, t.d, t.tx, t.ty)


def _inverse(t):
    a, b, c, d, tx, ty = t
    det = a * d - b * c
    ia, ib, ic, id_ = d / det, -b / det, -c / det, a / det
    return (ia, ib, ic, id_, -(ia * tx + ib * ty), -(ic * tx + id_ * ty))


# support-vector transport: h'(k) = s * h(perm[k]) + n_k . t for uniform signed permutations
_NORMALS = _support.NORMALS


def _perm_for(signs):
    sa, sb, sc, sd = signs
    out = []
    for nx, ny in _NORMALS:
        vx, vy = sa * nx + sc * ny, sb * nx + sd * ny
        out.append(_NORMALS.index((vx, vy)))
    return tuple(out)


_PERMS = {}
for _m in (((1, 0), (0, 1)), ((-1, 0), (0, 1)), ((1, 0), (0, -1)), ((-1, 0), (0, -1)),
           ((0, 1), (1, 0)), ((0, -1), (1, 0)), ((0, 1), (-1, 0)), ((0, -1), (-1, 0))):
    _k = (_m[0][0], _m[0][1], _m[1][0], _m[1][1])
    _PERMS[_k] = _perm_for(_k)


def _map_support(t, sup):
    """Support vector of ``t(X)`` from that of ``X``; ``t`` must be axis-aligned."""
    if sup is None:
        return None
    a, b, c, d, tx, ty = t
    key = (_sgn(a), _sgn(b), _sgn(c), _sgn(d))
    perm = _PERMS[key]
    if b == 0:
        sx, sy = _abs(a), _abs(d)
    else:
        sx, sy = _abs(c), _abs(b)
    if sx == sy:
        s = sx
        h = [sup[p] for p in perm]
        if h[1] is None:
            return (s * h[0] + tx, None, s * h[2] + ty, None, s * h[4] - tx, None, s * h[6] - ty, None)
        return (s * h[0] + tx, s * h[1] + tx + ty, s * h[2] + ty, s * h[3] - tx + ty,
                s * h[4] - tx, s * h[5] - tx - ty, s * h[6] - ty, s * h[7] + tx - ty)
    # non-uniform axis scaling: x' depends on one source axis with factor |A^T e|
    mx = _abs(a) + _abs(b)
    my = _abs(c) + _abs(d)
    return (mx * sup[perm[0]] + tx, None, my * sup[perm[2]] + ty, None,
            mx * sup[perm[4]] - tx, None, my * sup[perm[6]] - ty, None)


def _union(*sups):
    return _support.union(*sups)


# -- frames -----------------------------------------------------------------------------

def _classify(t: Transform) -> set:
    out = set()
    if t.is_axis_aligned():
        out.add("axis")
    if t.is_dihedral():
        out.add("dihedral")
    if t.is_similarity():
        out.add("similarity")
    return out


_NEEDS = {
    MeasureId.WL2: "similarity",
    MeasureId.WL_INF: "dihedral",
    MeasureId.WL1: "dihedral",
    MeasureId.WBP: "dihedral",
    MeasureId.WOA: "dihedral",
    MeasureId.WOP: "dihedral",
    MeasureId.WBA: "axis",
}

_WHY = {
    "similarity": "its subregion maps are not similarities, so Euclidean ratios are not preserved",
    "dihedral": "its subregion maps are not uniform scalings composed with square symmetries",
    "axis": "its subregion maps rotate axis-parallel boxes",
}


def _unsupported_reason(order: ScanningOrder, measure: MeasureId) -> str | None:
    if isinstance(order.unit, FractalTile):
        if measure is not MeasureId.WL2:
            return (f"{measure.value} is not available for {order.name}: its cells have fractal "
                    "boundaries and are rotated by irrational angles; only wl2 is rotation invariant")
        return None
    kinds = None
    for t in order.transforms():
        c = _classify(t)
        kinds = c if kinds is None else kinds & c
    need = _NEEDS[measure]
    if need not in kinds:
        return f"{measure.value} is not invariant under the maps of {order.name}: {_WHY[need]}"
    return None


def supported_measures(order: ScanningOrder) -> list:
    from .measures import WORST_CASE
    return [m for m in WORST_CASE if _unsupported_reason(order, m) is None]


def _rect_frame(order: ScanningOrder):
    """``(x0, y0, w, h)`` if the unit region is a non-square axis-parallel rectangle."""
    unit = order.unit
    if not isinstance(unit, Region) or len(unit.vertices) != 4:
        return None
    xs = sorted({v[0] for v in unit.vertices}, key=to_float)
    ys = sorted({v[1] for v in unit.vertices}, key=to_float)
    if len(xs) != 2 or len(ys) != 2:
        return None
    w, h = xs[1] - xs[0], ys[1] - ys[0]
    if w == h:
        return None
    return xs[0], ys[0], w, h


def _solve_chain(eqs):
    """Solve ``x_u = a_u + b_u * x_next(u)`` where every chain ends in a cycle."""
    sol = {}
    for start in eqs:
        path = []
        u = start
        pos = {}
        while u not in sol and u not in pos:
            pos[u] = len(path)
            path.append(u)
            u = eqs[u][2]
        if u not in sol:
            cyc = path[pos[u]:]
            # x_c = A + B x_c around the cycle
            A, B = mpq(0), mpq(1)
            for v in reversed(cyc):
                a, b, _ = eqs[v]
                A, B = a + b * A, b * B
            sol[u] = A / (1 - B)
            for v in reversed(cyc[1:]):
                a, b, nxt = eqs[v]
                sol[v] = a + b * sol[nxt]
            path = path[:pos[u]]
        for v in reversed(path):
            a, b, nxt = eqs[v]
            sol[v] = a + b * sol[nxt]
    return sol


# -- probes -----------------------------------------------------------------------------

class Probe:
    """Canonical probe: front = unit region in state ``front``; tail = ``omega``(unit) in state ``tail``."""

    __slots__ = ("space", "front_state", "tail_state", "omega", "omega_f", "det", "area", "sup",
                 "depth", "upper_f", "key")

    def __init__(self, space, fs, ts, omega, det, area, sup, depth):
        self.space = space
        self.front_state = fs
        self.tail_state = ts
        self.omega = omega
        self.omega_f = tuple(_f(v) for v in omega)
        self.det = det
        self.area = area
        self.sup = sup
        self.depth = depth
        self.upper_f = None
        if space.track_support:
            self.key = (fs, ts, omega, area, sup)
        else:
            self.key = (fs, ts, omega, area)

    @property
    def front(self) -> tuple:
        return self.space.states[self.front_state]

    @property
    def tail(self) -> tuple:
        return self.space.states[self.tail_state]

    @property
    def degenerate(self) -> bool:
        return self.area == 0

    @property
    def omega_transform(self) -> Transform:
        return Transform(*self.omega, reversed=self.tail[1])

    def __repr__(self):
        return (f"Probe(front={self.front}, tail={self.tail}, area={format_scalar(self.area)}, "
                f"depth={self.depth})")


@dataclass
class MeasureInterval:
    curve: str
    measure: str
    lower: object
    upper: object
    converged: bool
    unbounded_suspected: bool
    probes_explored: int
    queue_peak: int
    wall_ms: float = 0.0
    gap: float = 0.0
    derived: dict = field(default_factory=dict)

    @property
    def lower_f(self) -> float:
        return _f(self.lower)

    @property
    def upper_f(self) -> float:
        return math.inf if self.upper is INF else _f(self.upper)

    @property
    def width(self) -> float:
        return self.upper_f - self.lower_f

    def contains(self, value, tol=0.0) -> bool:
        v = _f(value)
        return self.lower_f - tol <= v <= self.upper_f + tol

    def to_json(self) -> dict:
        def num(x):
            return "inf" if x is INF else round(_f(x), 6)

        out = {
            "curve": self.curve,
            "measure": self.measure,
            "lower": _floor4(self.lower),
            "upper": "inf" if self.upper is INF else _ceil4(self.upper),
            "converged": self.converged,
            "unbounded_suspected": self.unbounded_suspected,
            "probes_explored": self.probes_explored,
            "queue_peak": self.queue_peak,
            "wall_ms": round(self.wall_ms, 1),
            "lower_exact": format_scalar(self.lower),
            "upper_exact": "inf" if self.upper is INF else format_scalar(self.upper),
        }
        for k, (lo, hi) in self.derived.items():
            out[k] = {"lower": num(lo), "upper": num(hi)}
        return out


def _floor4(x) -> float:
    return math.floor(_f(x) * 10000) / 10000


def _ceil4(x) -> float:
    return math.ceil(_f(x) * 10000 - 1e-9) / 10000


class ProbeSpace:
    """Precomputed per-state data for probe refinement of one (order, measure)."""

    def __init__(self, order: ScanningOrder, measure: MeasureId, candidate_level: int = 0):
        measure = MeasureId(measure)
        if not measure.is_worst_case:
            raise ValueError(f"{measure.value} is an average measure")
        reason = _unsupported_reason(order, measure)
        if reason:
            raise UnsupportedError(reason)
        self.order = order
        self.measure = measure
        self.locality = measure.is_locality
        self.fractal = isinstance(order.unit, FractalTile)
        self.track_support = not self.locality
        self.diagonals = measure.uses_octagon

        # octagon hulls do not survive the stretch, so those measures stay in true coordinates
        rect = None if self.fractal or self.diagonals else _rect_frame(order)
        if rect is not None:
            x0, y0, w, h = rect
            # conjugate into the unit square; true coordinates are (w x, h y)
            s = (w, 0, 0, h, x0, y0)
            s_inv = _inverse(s)
            conj = lambda t: _compose(s_inv, _compose(_tuple(t), s))  # noqa: E731
            unit_vertices = [(mpq(0), mpq(0)), (mpq(1), mpq(0)), (mpq(1), mpq(1)), (mpq(0), mpq(1))]
            self.metric = Metric(w, h)
            unit_area_frame = mpq(1)
        else:
            conj = _tuple
            self.metric = Metric()
            if self.fractal:
                unit_vertices = []
                unit_area_frame = order.unit.area
            else:
                unit_vertices = list(order.unit.vertices)
                unit_area_frame = order.unit.area
        self.area_true = unit_area_frame * self.metric.area_factor
        self.area_true_f = _f(self.area_true)
        self.sx_f, self.sy_f = _f(self.metric.sx), _f(self.metric.sy)
        self.unit_vertices = unit_vertices

        # oriented rule states
        self.states = []
        index = {}
        for r in order.reachable():
            for rev in (False, True):
                index[(r, rev)] = len(self.states)
                self.states.append((r, rev))
        self.index = index
        unit_sup = _support.of_points(unit_vertices, self.diagonals) if unit_vertices else None
        self.unit_sup = unit_sup
        self.kids = []      # per state: list of (tau, tau_inv, child_state, det)
        self.suf_area = []
        self.pre_area = []
        self.suf_sup = []
        self.pre_sup = []
        for (r, rev) in self.states:
            kids = []
            for t, child, crev in order.children(r, rev):
                tau = conj(t)
                det = _abs(tau[0] * tau[3] - tau[1] * tau[2])
                kids.append((tau, _inverse(tau), index[(child, crev)], det))
            self.kids.append(kids)
            n = len(kids)
            suf_a, pre_a = [mpq(0)] * n, [mpq(0)] * n
            suf_s, pre_s = [None] * n, [None] * n
            acc_a, acc_s = mpq(0), None
            for i in range(n):
                pre_a[i], pre_s[i] = acc_a, acc_s
                acc_a = acc_a + kids[i][3]
                if self.track_support:
                    acc_s = _union(acc_s, _map_support(kids[i][0], unit_sup))
            acc_a, acc_s = mpq(0), None
            for i in reversed(range(n)):
                suf_a[i], suf_s[i] = acc_a, acc_s
                acc_a = acc_a + kids[i][3]
                if self.track_support:
                    acc_s = _union(acc_s, _map_support(kids[i][0], unit_sup))
            self.suf_area.append(suf_a)
            self.pre_area.append(pre_a)
            self.suf_sup.append(suf_s)
            self.pre_sup.append(pre_s)

        self._init_candidates(candidate_level)
        if self.fractal:
            self._init_discs()

    # -- candidate points with exact curve parameters ------------------------------------
    def _init_candidates(self, level: int):
        """Per state: points the curve passes with their (latest / earliest) parameter."""
        late, early = [], []
        if self.fractal:
            pts = self.order.unit.curve_points
            step = 7 if level == 0 else 1
            base = [(p, t) for i, (t, p) in enumerate(pts) if i % step == 0]
            for (r, rev) in self.states:
                cand = [(p, 1 - t if rev else t) for p, t in base]
                late.append(cand)
                early.append(cand)
        else:
            verts = self.unit_vertices
            vidx = {v: i for i, v in enumerate(verts)}
            eqs_late, eqs_early = {}, {}
            for s, kids in enumerate(self.kids):
                start = mpq(0)
                hits = []
                for tau, tinv, cs, det in kids:
                    for vi, v in enumerate(verts):
                        pre = _apply(tinv, v)
                        if pre in vidx:
                            hits.append((vi, start, det, cs, vidx[pre]))
                    start = start + det
                for vi in range(len(verts)):
                    mine = [h for h in hits if h[0] == vi]
                    if not mine:
                        raise ValueError("a unit-region corner is not a corner of any subregion")
                    _, a, b, cs, pv = mine[-1]
                    eqs_late[(s, vi)] = (a, b, (cs, pv))
                    _, a, b, cs, pv = mine[0]
                    eqs_early[(s, vi)] = (a, b, (cs, pv))
            tl, te = _solve_chain(eqs_late), _solve_chain(eqs_early)
            for s in range(len(self.states)):
                late.append([(verts[vi], tl[(s, vi)]) for vi in range(len(verts))])
                early.append([(verts[vi], te[(s, vi)]) for vi in range(len(verts))])
        self.late = late
        self.early = early
        self.late_f = [[((_f(p[0]), _f(p[1])), _f(t)) for p, t in c] for c in late]
        self.early_f = [[((_f(p[0]), _f(p[1])), _f(t)) for p, t in c] for c in early]
        self.vert_f = [(_f(x), _f(y)) for x, y in self.unit_vertices]

    def _init_discs(self):
        tile = self.order.unit
        self.disc_r = tile.radius
        # seven sub-discs of radius R/sqrt7 around the subtile centres
        self.sub_centres = [_apply(_tuple(st.transform), tile.center)
                            for st in self.order.rules[self.order.root].steps]
        self.sub_centres_f = np.array([(_f(x), _f(y)) for x, y in self.sub_centres])
        self.sub_r_f = _f(tile.radius) / math.sqrt(7.0)
        self.sub_r_hi = (RationalInterval(tile.radius) / enclose(ExactScalar(7), 80).sqrt(80)).hi

    # -- probes --------------------------------------------------------------------------
    def base_probes(self) -> list:
        out = []
        for r in self.order.reachable():
            s = self.index[(r, False)]
            kids = self.kids[s]
            for i in range(len(kids)):
                tau_i, inv_i, cs_i, det_i = kids[i]
                area = mpq(0)
                sup = None
                for k in range(i + 1, len(kids)):
                    tau_k, _, cs_k, det_k = kids[k]
                    omega = _compose(inv_i, tau_k)
                    out.append(Probe(self, cs_i, cs_k, omega, det_k / det_i, area / det_i,
                                     _map_support(inv_i, sup) if self.track_support else None, 1))
                    area = area + det_k
                    if self.track_support:
                        sup = _union(sup, _map_support(tau_k, self.unit_sup))
        return out

    def refine(self, p: Probe, i: int, j: int) -> Probe:
        fk = self.kids[p.front_state]
        tk = self.kids[p.tail_state]
        if not (0 <= i < len(fk) and 0 <= j < len(tk)):
            raise ValueError(f"invalid refinement digits ({i}, {j})")
        tau_i, inv_i, cs_i, det_i = fk[i]
        tau_j, _, cs_j, det_j = tk[j]
        omega = _compose(inv_i, _compose(p.omega, tau_j))
        area = (self.suf_area[p.front_state][i] + p.area + p.det * self.pre_area[p.tail_state][j]) / det_i
        sup = None
        if self.track_support:
            sup = _map_support(inv_i, _union(self.suf_sup[p.front_state][i], p.sup,
                                             _map_support(p.omega, self.pre_sup[p.tail_state][j])))
        return Probe(self, cs_i, cs_j, omega, p.det * det_j / det_i, area, sup, p.depth + 1)

    # -- bounds in double precision --------------------------------------------------------
    def upper_f(self, p: Probe) -> float:
        """Upper bound on the measure over the probe's sections, inflated by the safety margin."""
        if p.area == 0:
            return math.inf
        den = _f(p.area) * self.area_true_f
        m = self.measure
        if self.fractal:
            return self._disc_upper_f(p) / den * (1 + _MARGIN) + _MARGIN
        if self.locality:
            o = p.omega_f
            best = 0.0
            tail = [(o[0] * x + o[1] * y + o[4], o[2] * x + o[3] * y + o[5]) for x, y in self.vert_f]
            for x0, y0 in self.vert_f:
                for x1, y1 in tail:
                    v = pair_numerator_f(m, x1 - x0, y1 - y0, self.sx_f, self.sy_f)
                    if v > best:
                        best = v
        else:
            outer = _union(self.unit_sup, p.sup, _map_support(p.omega, self.unit_sup))
            best = set_numerator_f(m, _sup_f(outer), self.sx_f, self.sy_f)
        return best / den * (1 + _MARGIN) + _MARGIN

    def _disc_upper_f(self, p: Probe) -> float:
        o = p.omega_f
        c = self.sub_centres_f
        tc = np.stack([o[0] * c[:, 0] + o[1] * c[:, 1] + o[4], o[2] * c[:, 0] + o[3] * c[:, 1] + o[5]], 1)
        d = np.sqrt(((c[:, None, :] - tc[None, :, :]) ** 2).sum(-1)).max()
        scale = math.sqrt(abs(o[0] * o[3] - o[1] * o[2]))
        r = d + self.sub_r_f * (1 + scale)
        return r * r

    def lower_candidate_f(self, p: Probe):
        """Best concrete section found from candidate points: ``(value, (front idx, tail idx))``."""
        o = p.omega_f
        area = _f(p.area)
        det = _f(p.det)
        m = self.measure
        best, arg = -1.0, None
        supf = None if p.sup is None else _sup_f(p.sup)
        for a, ((x0, y0), t0) in enumerate(self.late_f[p.front_state]):
            for b, ((qx, qy), t1) in enumerate(self.early_f[p.tail_state]):
                den = (1 - t0) + area + det * t1
                if den <= 0:
                    continue
                x1 = o[0] * qx + o[1] * qy + o[4]
                y1 = o[2] * qx + o[3] * qy + o[5]
                if self.locality:
                    num = pair_numerator_f(m, x1 - x0, y1 - y0, self.sx_f, self.sy_f)
                else:
                    s = _support.union_points(supf, ((x0, y0), (x1, y1)), self.diagonals) \
                        if supf is not None else _support.of_points(((x0, y0), (x1, y1)), self.diagonals)
                    num = set_numerator_f(m, s, self.sx_f, self.sy_f)
                v = num / (den * self.area_true_f)
                if v > best:
                    best, arg = v, (a, b)
        return best, arg

    # -- exact bounds ------------------------------------------------------------------
    def lower_exact(self, p: Probe, arg):
        a, b = arg
        (x0, y0), t0 = self.late[p.front_state][a]
        q, t1 = self.early[p.tail_state][b]
        x1, y1 = _apply(p.omega, q)
        den = ((1 - t0) + p.area + p.det * t1) * self.area_true
        if self.locality:
            num = pair_numerator(self.measure, x1 - x0, y1 - y0, self.metric)
        else:
            s = _support.union_points(p.sup, ((x0, y0), (x1, y1)), self.diagonals)
            num = set_numerator(self.measure, s, self.metric)
        return num / den

    def upper_exact(self, p: Probe):
        """Exact upper bound (an outward-rounded rational for fractal tiles)."""
        if p.area == 0:
            return INF
        den = p.area * self.area_true
        if self.fractal:
            return self._disc_upper_exact(p, den)
        if self.locality:
            best = None
            for v in self.unit_vertices:
                for w in self.unit_vertices:
                    x1, y1 = _apply(p.omega, w)
                    num = pair_numerator(self.measure, x1 - v[0], y1 - v[1], self.metric)
                    if best is None or num > best:
                        best = num
        else:
            outer = _union(self.unit_sup, p.sup, _map_support(p.omega, self.unit_sup))
            best = set_numerator(self.measure, outer, self.metric)
        return best / den

    def _disc_upper_exact(self, p: Probe, den):
        bits = 80
        o = p.omega
        scale = enclose(_abs(o[0] * o[3] - o[1] * o[2]), bits).sqrt(bits)
        rad = RationalInterval(self.sub_r_hi) * (scale + 1)
        best = None
        for c in self.sub_centres:
            for c2 in self.sub_centres:
                x1, y1 = _apply(o, c2)
                d2 = (x1 - c[0]) ** 2 + (y1 - c[1]) ** 2
                d = enclose(d2, bits).sqrt(bits) + rad
                hi = (d * d).hi
                if best is None or hi > best:
                    best = hi
        return (RationalInterval(best) / enclose(den, bits)).rounded(bits).hi


def _check_order(order):
    if not isinstance(order, ScanningOrder):
        raise TypeError("expected a ScanningOrder")


def base_probes(order: ScanningOrder, measure=MeasureId.WL2) -> list:
    """Canonical base probes of every reachable rule (front child i, tail child k > i)."""
    _check_order(order)
    return ProbeSpace(order, MeasureId(measure)).base_probes()


def refine(probe: Probe, i: int, j: int) -> Probe:
    return probe.space.refine(probe, i, j)


# -- search ------------------------------------------------------------------------------

def compute_worst(
    order: ScanningOrder,
    measure,
    gap: float = 1e-3,
    max_probes: int = 2_000_000,
    max_queue: int = 5_000_000,
    cap: float = 100.0,
    time_limit: float | None = None,
    progress=None,
) -> MeasureInterval:
    """Interval ``[lower, upper]`` containing the worst-case value of ``measure``.

    Stops when ``upper - lower <= gap`` (converged), when the lower bound
    exceeds ``cap`` (the measure is then suspected unbounded), or when the
    probe or queue budget runs out.
    """
    _check_order(order)
    t_start = time.perf_counter()
    measure = MeasureId(measure)
    space = ProbeSpace(order, measure)

    lower = None
    lower_f = -math.inf
    lower_lo = -math.inf

    queue = deque()
    heap = []            # (-upper_f, seq, probe)
    alive = set()
    degenerate_alive = 0
    seen = set()
    seq = 0
    explored = 0
    peak = 0
    unbounded = False
    stop_reason = None

    def offer(p: Probe):
        nonlocal lower, lower_f, lower_lo, seq, degenerate_alive, unbounded
        if p.key in seen:
            return
        u = space.upper_f(p)
        if u < lower_lo:
            return
        seen.add(p.key)
        v, arg = space.lower_candidate_f(p)
        if arg is not None and v > lower_f * (1 - 1e-12):
            exact = space.lower_exact(p, arg)
            if lower is None or exact > lower:
                lower = exact
                lower_f = _f(exact)
                lower_lo = lower_f * (1 - 1e-12)
                if lower_f > cap:
                    unbounded = True
        p.upper_f = u
        seq += 1
        queue.append((seq, p))
        if u == math.inf:
            degenerate_alive += 1
        else:
            heapq.heappush(heap, (-u, seq, p))
            alive.add(seq)

    def current_upper() -> float:
        if degenerate_alive:
            return math.inf
        while heap and heap[0][1] not in alive:
            heapq.heappop(heap)
        return -heap[0][0] if heap else -math.inf

    for p in space.base_probes():
        offer(p)

    while True:
        peak = max(peak, len(queue))
        up = current_upper()
        if unbounded:
            stop_reason = "unbounded"
            break
        if lower is not None and up - lower_f <= gap * (1 - 1e-6):
            stop_reason = "converged"
            break
        if not queue:
            stop_reason = "converged"
            break
        if explored >= max_probes or len(queue) > max_queue:
            stop_reason = "budget"
            break
        if time_limit is not None and time.perf_counter() - t_start > time_limit:
            stop_reason = "budget"
            break
        s, p = queue.popleft()
        if p.upper_f == math.inf:
            degenerate_alive -= 1
        else:
            alive.discard(s)
        if p.upper_f < lower_lo:
            continue
        explored += 1
        if progress is not None and explored % 10000 == 0:
            progress(explored, len(queue), lower_f, up)
        nf = len(space.kids[p.front_state])
        nt = len(space.kids[p.tail_state])
        for i in range(nf):
            for j in range(nt):
                offer(space.refine(p, i, j))

    # exact upper bound over the live queue
    if degenerate_alive:
        upper = INF
    else:
        upper = _exact_queue_max(space, heap, alive)
        if upper is None:
            upper = lower
        elif lower is not None and upper < lower:
            upper = lower
    converged = False
    if stop_reason == "converged" and upper is not INF and lower is not None:
        converged = (upper - lower) <= as_exact(mpq(gap)) if not isinstance(upper, float) else False
        if not converged:
            # exact width marginally above the float estimate; report honestly
            converged = _f(upper) - _f(lower) <= gap * (1 + 1e-6)
    result = MeasureInterval(
        curve=order.name,
        measure=measure.value,
        lower=lower if lower is not None else mpq(0),
        upper=upper,
        converged=converged,
        unbounded_suspected=unbounded,
        probes_explored=explored,
        queue_peak=peak,
        wall_ms=(time.perf_counter() - t_start) * 1000,
        gap=gap,
    )
    if space.fractal and measure is MeasureId.WL2:
        # the tile is rotation invariant enough for these identities to hold
        result.derived = {
            MeasureId.WL_INF.value: (result.lower, result.upper),
            MeasureId.WL1.value: (2 * result.lower, INF if result.upper is INF else 2 * result.upper),
        }
    return result


def _exact_queue_max(space: ProbeSpace, heap, alive):
    """Exact maximum of the upper bounds of live probes, using the float values as guides."""
    entries = sorted((e for e in heap if e[1] in alive), key=lambda e: e[0])
    best = None
    for negu, _, p in entries:
        u_hi = -negu
        if best is not None and _f(best) > u_hi:
            break
        v = space.upper_exact(p)
        if best is None or v > best:
            best = v
    return best


# -- brute-force oracle --------------------------------------------------------------------

def grid_oracle(order: ScanningOrder, measure, depth: int, budget: int = 1 << 12):
    """Largest measure ratio over sections made of consecutive depth-``depth`` cells.

    Set measures use the exact cell union.  Locality measures take the
    farthest vertex pair of the first and last cell over the area of all
    cells from the first to the last; every point of a cell lies on the curve,
    so some true section has at least this ratio.  Either way the result is a
    lower bound on the worst case.
    """
    measure = MeasureId(measure)
    if not measure.is_worst_case:
        raise ValueError(f"{measure.value} is an average measure")
    reason = _unsupported_reason(order, measure)
    if reason:
        raise UnsupportedError(reason)
    if isinstance(order.unit, FractalTile):
        raise UnsupportedError("grid oracle needs a polygonal unit region")
    cells = list(_cells(order, depth, budget))
    rect = None if measure.uses_octagon else _rect_frame(order)
    metric = Metric(rect[2], rect[3]) if rect else Metric()
    # work in true coordinates; the metric only enters through the rectangle frame
    if rect:
        x0, y0, w, h = rect
        to_frame = Transform(1 / w, 0, 0, 1 / h, -x0 / w, -y0 / h)
        regions = [order.unit.transformed(to_frame.compose(t)) for t, _, _ in cells]
    else:
        regions = [order.unit.transformed(t) for t, _, _ in cells]
    areas = [r.area for r in regions]
    n = len(regions)
    diag = measure.uses_octagon
    sx, sy = _f(metric.sx), _f(metric.sy)
    cum = np.concatenate([[0.0], np.cumsum([_f(a) for a in areas])]) * sx * sy
    best_f = -1.0
    best_pairs = []
    if measure.is_locality:
        verts = np.array([[(_f(x), _f(y)) for x, y in r.vertices] for r in regions])
        for a in range(n):
            dx = np.abs(verts[a:, None, :, 0] - verts[a, :, None, 0]) * sx
            dy = np.abs(verts[a:, None, :, 1] - verts[a, :, None, 1]) * sy
            if measure is MeasureId.WL2:
                num = dx * dx + dy * dy
            elif measure is MeasureId.WL_INF:
                num = np.maximum(dx, dy) ** 2
            else:
                num = (dx + dy) ** 2
            num = num.reshape(len(num), -1).max(axis=1)
            val = num / (cum[a + 1:] - cum[a])
            k = int(np.argmax(val))
            best_pairs.append((val[k], a, a + k))
    else:
        sups = np.array([[_f(v) for v in r.support(True)] for r in regions])
        for a in range(n):
            acc = np.maximum.accumulate(sups[a:], axis=0)
            w = acc[:, 0] + acc[:, 4]
            h = acc[:, 2] + acc[:, 6]
            if measure is MeasureId.WBA:
                num = w * h * sx * sy
            elif measure is MeasureId.WBP:
                num = (sx * w + sy * h) ** 2 / 4
            else:
                c = (acc[:, 0] + acc[:, 2] - acc[:, 1]) ** 2 + (acc[:, 4] + acc[:, 2] - acc[:, 3]) ** 2 \
                    + (acc[:, 4] + acc[:, 6] - acc[:, 5]) ** 2 + (acc[:, 0] + acc[:, 6] - acc[:, 7]) ** 2
                cs = (acc[:, 0] + acc[:, 2] - acc[:, 1]) + (acc[:, 4] + acc[:, 2] - acc[:, 3]) \
                    + (acc[:, 4] + acc[:, 6] - acc[:, 5]) + (acc[:, 0] + acc[:, 6] - acc[:, 7])
                if measure is MeasureId.WOA:
                    num = sx * sx * (w * h - c / 2)
                else:
                    num = (sx * (2 * (w + h) + (_R2F - 2) * cs)) ** 2 / 16
            val = num / (cum[a + 1:] - cum[a])
            k = int(np.argmax(val))
            best_pairs.append((val[k], a, a + k))
    best_f = max(v for v, _, _ in best_pairs)
    best = None
    for v, a, b in best_pairs:
        if v < best_f * (1 - 1e-9) - 1e-12:
            continue
        area = sum(areas[a:b + 1], mpq(0)) * metric.area_factor
        if measure.is_locality:
            num = max(pair_numerator(measure, q[0] - p[0], q[1] - p[1], metric)
                      for p in regions[a].vertices for q in regions[b].vertices)
        else:
            sup = _support.union(*(r.support(True) for r in regions[a:b + 1]))
            num = set_numerator(measure, sup, metric)
        val = num / area
        if best is None or val > best:
            best = val
    return best
