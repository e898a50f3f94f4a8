"""Average total measures over random subdivisions of a curve.

A subdivision cuts the curve at ``m - 1`` points of the area parameter.  For
each section we need the bounding box, the bounding octagon and the L-infinity
and L1 diameters; all of them follow from the section's support in the eight
directions at multiples of 45 degrees.

Two code paths exist:

* :func:`section_summary` is exact and works one section at a time.
* The lattice engine (:class:`Lattice`) works in floats on whole arrays of
  sections.  Cut points live on the grid of depth-``K`` cells, so every
  section is an exact union of cells and only float rounding remains.  It needs
  orders whose maps are similarities with a rotation by a multiple of 45
  degrees and whose subregions all hold the same share of the area.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from gmpy2 import mpq

from . import _support
from .curves import FractalTile, ScanningOrder, Transform, UnsupportedError
from .exact import to_float
from .measures import AVERAGE, Box, MeasureId, Octagon

__all__ = [
    "Lattice",
    "SectionSummaryInterval",
    "Totals",
    "AverageEstimate",
    "locate",
    "section_summary",
    "total_stats",
    "sample_subdivision",
    "estimate_average",
    "estimate_averages",
]

DEFAULT_TOL = 1e-6
_R2 = math.sqrt(2.0)


# -- exact path ------------------------------------------------------------------

def _fraction(t):
    if isinstance(t, float):
        return mpq(Fraction(t))
    return mpq(t)


def _polygonal(order: ScanningOrder):
    if isinstance(order.unit, FractalTile):
        raise UnsupportedError(f"{order.name}: average measures need a polygonal unit region")


def locate(order: ScanningOrder, t, depth: int) -> list:
    """Address of the depth-``depth`` cell whose share of the area parameter holds ``t``.

    A ``t`` on the border between two cells goes to the later one; ``t = 1``
    lands in the very last cell.
    """
    t = _fraction(t)
    if not 0 <= t <= 1:
        raise ValueError(f"area parameter {t} outside [0, 1]")
    rule, rev = order.root, False
    out = []
    for _ in range(depth):
        kids = order.children(rule, rev)
        lo = mpq(0)
        for i, (tau, child, crev) in enumerate(kids):
            share = abs(_rational(tau.det))
            if t < lo + share or i == len(kids) - 1:
                break
            lo += share
        out.append(i)
        t = min((t - lo) / share, mpq(1))
        rule, rev = child, crev
    return out


def _rational(x):
    """Rational value of an exact scalar, for cell area shares."""
    if hasattr(x, "is_rational"):
        if not x.is_rational():
            raise UnsupportedError("irrational area share")
        return mpq(x.coords[0])
    return mpq(x)


@dataclass(frozen=True)
class SectionSummaryInterval:
    """Inner and outer enclosures of one section's hulls.

    ``inner`` hulls cover only cells known to lie in the section; ``outer``
    hulls add the partly covered boundary cells.  Either may be ``None`` for
    the inner side of a very short section.
    """

    area: object
    box: tuple
    oct: tuple
    diam_inf: tuple
    diam_1: tuple


def _diams(sup):
    if sup is None:
        return 0, 0
    w, h = _support.extents(sup)
    d1 = max(sup[1] + sup[5], sup[3] + sup[7])
    return max(w, h), d1


def section_summary(order: ScanningOrder, s, t, tol=DEFAULT_TOL) -> SectionSummaryInterval:
    """Exact hull enclosures of the section between area parameters ``s < t``.

    ``tol`` bounds the box perimeter of every boundary cell left unresolved,
    relative to the unit region's perimeter.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _polygonal(order)
    s, t = _fraction(s), _fraction(t)
    if not 0 <= s < t <= 1:
        raise ValueError("need 0 <= s < t <= 1")
    unit = order.unit
    limit = mpq(Fraction(tol)) / 2
    inner = outer = None

    def visit(tr: Transform, rule, rev, lo, size, scale):
        nonlocal inner, outer
        hi = lo + size
        if hi <= s or lo >= t:
            return
        if s <= lo and hi <= t:
            sup = unit.transformed(tr).support()
            inner = _support.union(inner, sup)
            outer = _support.union(outer, sup)
            return
        # the cell's box perimeter relative to the unit's shrinks with its linear scale
        if scale <= limit:
            outer = _support.union(outer, unit.transformed(tr).support())
            return
        pos = lo
        for tau, child, crev in order.children(rule, rev):
            share = _rational(tau.det)
            share = -share if share < 0 else share
            visit(tr.compose(tau), child, crev, pos, size * share, scale * _linear_scale(tau))
            pos += size * share

    visit(Transform.identity(), order.root, False, mpq(0), mpq(1), mpq(1))
    area = (t - s) * unit.area
    boxes = tuple(None if x is None else Box.from_support(x) for x in (inner, outer))
    octs = tuple(None if x is None else Octagon(x) for x in (inner, outer))
    di, do = _diams(inner), _diams(outer)
    return SectionSummaryInterval(area, boxes, octs, (di[0], do[0]), (di[1], do[1]))


def _linear_scale(tau: Transform):
    """A rational upper bound on the map's stretch factor (exact for axis-parallel maps)."""
    vals = [abs(to_float(v)) for v in (tau.a, tau.b, tau.c, tau.d)]
    bound = max(vals[0] + vals[1], vals[2] + vals[3])
    return mpq(Fraction(bound * (1 + 1e-12)))


# -- lattice engine -------------------------------------------------------------------

_NORM = np.array([(math.cos(k * math.pi / 4), math.sin(k * math.pi / 4)) for k in range(8)])


def _d8_matrix(eps: int, r: int) -> np.ndarray:
    c, s = math.cos(r * math.pi / 4), math.sin(r * math.pi / 4)
    rot = np.array([[c, -s], [s, c]])
    return rot if eps == 1 else rot @ np.diag([1.0, -1.0])


# group element g = r + 8 * (eps == -1) acts on direction indices by j -> eps * j + r
_G_EPS = np.array([1] * 8 + [-1] * 8)
_G_ROT = np.array(list(range(8)) * 2)
_G_MAT = np.array([_d8_matrix(int(e), int(r)) for e, r in zip(_G_EPS, _G_ROT)])
_G_COMP = np.array(
    [[(int(_G_EPS[g] * _G_ROT[h] + _G_ROT[g]) % 8) + 8 * (_G_EPS[g] * _G_EPS[h] == -1)
      for h in range(16)] for g in range(16)]
)
_G_PERM = np.array([[(int(_G_EPS[g]) * (k - int(_G_ROT[g]))) % 8 for k in range(8)] for g in range(16)])


def _classify_d8(tau: Transform):
    m = np.array([[to_float(tau.a), to_float(tau.b)], [to_float(tau.c), to_float(tau.d)]])
    scale = math.sqrt(abs(np.linalg.det(m)))
    for g in range(16):
        if np.allclose(m / scale, _G_MAT[g], atol=1e-12):
            return scale, g
    return None


def _sup_f(sup) -> np.ndarray:
    """Exact support vector (unnormalised diagonals) to normalised floats."""
    out = np.array([to_float(v) for v in sup])
    out[1::2] /= _R2
    return out


class Lattice:
    """Float engine for hulls of cell ranges at a fixed depth ``K``.

    Section ``[a, b)`` in cell indices at depth ``K`` is the union of cells
    ``a .. b-1``.  For every level the engine keeps the maps of the cells that
    hold the first and last cell, and adds the hulls of whole subregions lying
    strictly between them, taken from per-state prefix/suffix tables.
    """

    def __init__(self, order: ScanningOrder, tol: float = DEFAULT_TOL):
        _polygonal(order)
        if tol <= 0:
            raise ValueError("tol must be positive")
        self.order = order
        states = [(order.root, False)]
        index = {states[0]: 0}
        rows = []
        n = None
        k = 0
        while k < len(states):
            kids = order.children(*states[k])
            if n is None:
                n = len(kids)
            if len(kids) != n:
                raise UnsupportedError(f"{order.name}: rules with different numbers of subregions")
            row = []
            for tau, child, crev in kids:
                if _rational(abs(tau.det)) != mpq(1, n):
                    raise UnsupportedError(f"{order.name}: subregions of unequal area")
                cls = _classify_d8(tau)
                if cls is None:
                    raise UnsupportedError(f"{order.name}: maps are not similarities in 45-degree steps")
                st = (child, crev)
                if st not in index:
                    index[st] = len(states)
                    states.append(st)
                row.append((index[st], cls[0], cls[1], to_float(tau.tx), to_float(tau.ty), tau))
            rows.append(row)
            k += 1
        self.n = n
        ns = len(states)
        self.child_state = np.array([[r[0] for r in row] for row in rows])
        self.child_scale = np.array([[r[1] for r in row] for row in rows])
        self.child_g = np.array([[r[2] for r in row] for row in rows])
        self.child_tx = np.array([[r[3] for r in row] for row in rows])
        self.child_ty = np.array([[r[4] for r in row] for row in rows])

        self.unit_sup = _sup_f(order.unit.support())
        self.unit_area = to_float(order.unit.area)
        w = self.unit_sup[0] + self.unit_sup[4]
        h = self.unit_sup[2] + self.unit_sup[6]
        self.unit_perimeter = 2 * (w + h)

        kid_sup = np.array([[_sup_f(order.unit.transformed(r[5]).support()) for r in row] for row in rows])
        neg = np.full(8, -np.inf)
        self.suf = np.full((ns, n, 8), -np.inf)
        self.pre = np.full((ns, n, 8), -np.inf)
        self.mid = np.full((ns, n, n, 8), -np.inf)
        for s in range(ns):
            acc = neg
            for i in range(n - 1, -1, -1):
                self.suf[s, i] = acc
                acc = np.maximum(acc, kid_sup[s, i])
            acc = neg
            for i in range(n):
                self.pre[s, i] = acc
                acc = np.maximum(acc, kid_sup[s, i])
            for i in range(n):
                acc = neg
                for j in range(i + 1, n):
                    self.mid[s, i, j] = acc
                    acc = np.maximum(acc, kid_sup[s, j])

        # cells shrink by sqrt(n) per level in linear size; resolve to tol/2 of the unit
        depth = max(1, math.ceil(2 * math.log(2 / tol) / math.log(n)))
        if n ** depth >= 2 ** 62:
            raise ValueError(f"tol {tol} needs more than 2^62 cells")
        self.depth = depth
        self.cells = n ** depth
        self.tol = tol

    def _map(self, s, g, tx, ty, sup):
        """Supports of ``sup`` (rows) under the maps ``p -> s * g(p) + t``."""
        rows = np.arange(len(s))[:, None]
        out = s[:, None] * sup[rows, _G_PERM[g]]
        return out + _NORM[None, :, 0] * tx[:, None] + _NORM[None, :, 1] * ty[:, None]

    def _descend(self, state, s, g, tx, ty, d):
        ctx = self.child_tx[state, d]
        cty = self.child_ty[state, d]
        mat = _G_MAT[g]
        ntx = tx + s * (mat[:, 0, 0] * ctx + mat[:, 0, 1] * cty)
        nty = ty + s * (mat[:, 1, 0] * ctx + mat[:, 1, 1] * cty)
        return (self.child_state[state, d], s * self.child_scale[state, d],
                _G_COMP[g, self.child_g[state, d]], ntx, nty)

    def supports(self, first, last) -> np.ndarray:
        """Normalised 8-direction supports of the cell ranges ``first[i] ..= last[i]``."""
        first = np.asarray(first, dtype=np.int64)
        last = np.asarray(last, dtype=np.int64)
        if np.any(first > last) or np.any(first < 0) or np.any(last >= self.cells):
            raise ValueError("bad cell range")
        m = len(first)
        acc = np.full((m, 8), -np.inf)
        zero_state = np.zeros(m, dtype=np.int64)
        a = (zero_state, np.ones(m), np.zeros(m, dtype=np.int64), np.zeros(m), np.zeros(m))
        e = a
        split = np.zeros(m, dtype=bool)
        p = self.cells
        for _ in range(self.depth):
            p //= self.n
            da = (first // p) % self.n
            de = (last // p) % self.n
            if split.any():
                after = self._map(*a[1:], self.suf[a[0], da])
                before = self._map(*e[1:], self.pre[e[0], de])
                both = np.maximum(after, before)
                acc = np.where(split[:, None], np.maximum(acc, both), acc)
            fresh = ~split & (da != de)
            if fresh.any():
                between = self._map(*a[1:], self.mid[a[0], da, de])
                acc = np.where(fresh[:, None], np.maximum(acc, between), acc)
                split |= fresh
            a = self._descend(*a, da)
            e = self._descend(*e, de)
        unit = np.broadcast_to(self.unit_sup, (m, 8))
        acc = np.maximum(acc, self._map(*a[1:], unit))
        return np.maximum(acc, self._map(*e[1:], unit))

    def index_of(self, t) -> Fraction:
        return Fraction(t) * self.cells


def _quantities(sup: np.ndarray) -> dict:
    """Per-section hull quantities from normalised supports (``-inf`` rows count as empty)."""
    empty = ~np.isfinite(sup[:, 0])
    sup = np.where(empty[:, None], 0.0, sup)
    w = sup[:, 0] + sup[:, 4]
    h = sup[:, 2] + sup[:, 6]
    diag = sup[:, 1::2] * _R2
    cuts = np.stack([
        sup[:, 0] + sup[:, 2] - diag[:, 0],
        sup[:, 4] + sup[:, 2] - diag[:, 1],
        sup[:, 4] + sup[:, 6] - diag[:, 2],
        sup[:, 0] + sup[:, 6] - diag[:, 3],
    ], axis=1)
    return {
        "box_area": w * h,
        "box_perimeter": 2 * (w + h),
        "oct_area": w * h - (cuts * cuts).sum(axis=1) / 2,
        "oct_perimeter": 2 * (w + h) + (_R2 - 2) * cuts.sum(axis=1),
        "diam_inf": np.maximum(w, h),
        "diam_1": np.maximum(diag[:, 0] + diag[:, 2], diag[:, 1] + diag[:, 3]),
    }


_KEYS = ("box_area", "box_perimeter", "oct_area", "oct_perimeter", "diam_inf", "diam_1")


@dataclass(frozen=True)
class Totals:
    """Sums over the ``m`` sections of a subdivision, each as a ``(lo, hi)`` interval."""

    m: int
    unit_area: float
    box_area: tuple
    box_perimeter: tuple
    oct_area: tuple
    oct_perimeter: tuple
    diam_inf: tuple
    diam_1: tuple

    def value(self, measure: MeasureId, side: int = 1) -> float:
        """Normalised sample value of an average measure from the chosen side of each interval."""
        measure = MeasureId(measure)
        a, m = self.unit_area, self.m
        if measure is MeasureId.ABA:
            return self.box_area[side] / a
        if measure is MeasureId.AOA:
            return self.oct_area[side] / a
        if measure is MeasureId.ABP:
            return (self.box_perimeter[side] / (4 * math.sqrt(m * a))) ** 2
        if measure is MeasureId.AD_INF:
            return (self.diam_inf[side] / math.sqrt(m * a)) ** 2
        if measure is MeasureId.AD1:
            return (self.diam_1[side] / math.sqrt(m * a)) ** 2
        raise ValueError(f"{measure.value} is not an average measure")


def _totals(lat: Lattice, inner, outer, m: int) -> Totals:
    qo = _quantities(lat.supports(*outer))
    if inner is outer:
        qi = qo
    else:
        first, last = inner
        ok = first <= last
        qi = {k: np.zeros(m) for k in _KEYS}
        if ok.any():
            part = _quantities(lat.supports(first[ok], last[ok]))
            for k in _KEYS:
                qi[k][ok] = part[k]
    return Totals(m, lat.unit_area, **{k: (float(qi[k].sum()), float(qo[k].sum())) for k in _KEYS})


def _bounds_from_indices(bounds) -> tuple:
    bounds = np.asarray(bounds, dtype=np.int64)
    return bounds[:-1], bounds[1:] - 1


def total_stats(order: ScanningOrder, cuts, tol: float = DEFAULT_TOL, lattice: Lattice | None = None) -> Totals:
    """Totals over the sections between consecutive ``cuts`` (strictly increasing, inside (0, 1))."""
    lat = lattice or _lattice(order, tol)
    cuts = [Fraction(c) for c in cuts]
    if any(c <= 0 or c >= 1 for c in cuts) or any(x >= y for x, y in zip(cuts, cuts[1:])):
        raise ValueError("cuts must be strictly increasing inside (0, 1)")
    scaled = [c * lat.cells for c in cuts]
    down = [0] + [math.floor(x) for x in scaled] + [lat.cells]
    up = [0] + [math.ceil(x) for x in scaled] + [lat.cells]
    m = len(cuts) + 1
    outer = (np.array(down[:-1], dtype=np.int64), np.array(up[1:], dtype=np.int64) - 1)
    if down == up:
        return _totals(lat, outer, outer, m)
    inner = (np.array(up[:-1], dtype=np.int64), np.array(down[1:], dtype=np.int64) - 1)
    return _totals(lat, inner, outer, m)


_LATTICES: dict = {}


def _lattice(order: ScanningOrder, tol: float) -> Lattice:
    key = (id(order), tol)
    lat = _LATTICES.get(key)
    if lat is None or lat.order is not order:
        lat = _LATTICES[key] = Lattice(order, tol)
    return lat


# -- sampling ------------------------------------------------------------------------

def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_subdivision(order: ScanningOrder, index: int, seed: int, m_min: int, m_max: int,
                       tol: float = DEFAULT_TOL) -> Totals:
    """Totals of the ``index``-th random subdivision of the seeded stream.

    ``m`` is drawn log-uniformly from ``[m_min, m_max]``; the ``m - 1`` cuts are
    distinct uniform points of the depth-``K`` cell grid, so the totals are exact
    up to float rounding.
    """
    if not 1 <= m_min <= m_max:
        raise ValueError("need 1 <= m_min <= m_max")
    lat = _lattice(order, tol)
    rng = _rng(seed, index)
    m = int(round(math.exp(rng.uniform(math.log(m_min), math.log(m_max)))))
    m = min(max(m, m_min), m_max, lat.cells)
    cuts = np.unique(rng.integers(1, lat.cells, size=m - 1))
    while len(cuts) < m - 1:
        extra = rng.integers(1, lat.cells, size=m - 1 - len(cuts))
        cuts = np.unique(np.concatenate([cuts, extra]))
    bounds = np.concatenate([[0], cuts, [lat.cells]])
    rng_ = _bounds_from_indices(bounds)
    return _totals(lat, rng_, rng_, m)


@dataclass
class AverageEstimate:
    curve: str
    measure: MeasureId
    mean: float
    stddev: float
    samples: int
    m_min: int
    m_max: int
    seed: int
    values: list = field(default_factory=list, repr=False)

    @property
    def m_range(self) -> tuple:
        return self.m_min, self.m_max

    def to_json(self) -> dict:
        return {
            "curve": self.curve,
            "measure": self.measure.value,
            "mean": round(self.mean, 4),
            "stddev": round(self.stddev, 4),
            "samples": self.samples,
            "m_min": self.m_min,
            "m_max": self.m_max,
            "seed": self.seed,
        }


def estimate_averages(order: ScanningOrder, measures, samples: int = 100, m_min: int = 500,
                      m_max: int = 18000, seed: int = 0, tol: float = DEFAULT_TOL) -> dict:
    """:func:`estimate_average` for several measures over the same subdivisions."""
    measures = [MeasureId.parse(x) if isinstance(x, str) else MeasureId(x) for x in measures]
    for measure in measures:
        if measure not in AVERAGE:
            raise ValueError(f"{measure.value} is not an average measure")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    totals = [sample_subdivision(order, i, seed, m_min, m_max, tol) for i in range(samples)]
    out = {}
    for measure in measures:
        values = [t.value(measure) for t in totals]
        std = float(np.std(values, ddof=1)) if samples > 1 else 0.0
        out[measure] = AverageEstimate(order.name, measure, math.fsum(values) / samples, std,
                                       samples, m_min, m_max, seed, values)
    return out


def estimate_average(order: ScanningOrder, measure, samples: int = 100, m_min: int = 500,
                     m_max: int = 18000, seed: int = 0, tol: float = DEFAULT_TOL) -> AverageEstimate:
    """Mean and standard deviation of an average measure over seeded random subdivisions.

    Each sample gets its own generator derived from ``(seed, index)``, so any
    subset of samples can be recomputed independently.  The square in the
    perimeter and diameter measures is applied per sample.
    """
    return next(iter(estimate_averages(order, [measure], samples, m_min, m_max, seed, tol).values()))
