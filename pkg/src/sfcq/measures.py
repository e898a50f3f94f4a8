"""Locality measures of curve sections and their bound evaluators.

Worst-case measures compare one section's extent with its area:

=======  ==============================================
wl-inf   squared L-infinity distance of the end points
wl2      squared Euclidean distance of the end points
wl1      squared L1 distance of the end points
wba      bounding-box area
wbp      bounding-box perimeter squared, divided by 16
woa      bounding-octagon area
wop      bounding-octagon perimeter squared, over 16
=======  ==============================================

each divided by the section's area.  The average ids (``aba``, ``abp``,
``aoa``, ``ad-inf``, ``ad1``) are handled by :mod:`sfcq.sampling`.

Geometry may live in a stretched frame: a :class:`Metric` ``(sx, sy)`` says
that true coordinates are ``(sx * x, sy * y)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from . import _support
from .exact import R2, ExactScalar, as_exact, to_float

__all__ = [
    "MeasureId",
    "WORST_CASE",
    "AVERAGE",
    "Box",
    "Octagon",
    "SectionGeometry",
    "Metric",
    "hull_box",
    "hull_oct",
    "mu_bounds",
    "exact_section_measure",
    "INF",
]

INF = math.inf


class MeasureId(str, enum.Enum):
    WL_INF = "wl-inf"
    WL2 = "wl2"
    WL1 = "wl1"
    WBA = "wba"
    WBP = "wbp"
    WOA = "woa"
    WOP = "wop"
    ABA = "aba"
    ABP = "abp"
    AOA = "aoa"
    AD_INF = "ad-inf"
    AD1 = "ad1"

    @classmethod
    def parse(cls, text: str) -> "MeasureId":
        key = text.strip().lower().replace("_", "-").replace("∞", "-inf")
        key = {"wlinf": "wl-inf", "wl-infinity": "wl-inf", "adinf": "ad-inf"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown measure {text!r}") from None

    @property
    def is_worst_case(self) -> bool:
        return self in WORST_CASE

    @property
    def is_locality(self) -> bool:
        return self in (MeasureId.WL_INF, MeasureId.WL2, MeasureId.WL1)

    @property
    def uses_octagon(self) -> bool:
        return self in (MeasureId.WOA, MeasureId.WOP, MeasureId.AOA)

    @property
    def label(self) -> str:
        return {"wl-inf": "WL∞", "ad-inf": "AD∞"}.get(self.value, self.value.upper())


WORST_CASE = (MeasureId.WL_INF, MeasureId.WL2, MeasureId.WL1, MeasureId.WBA,
              MeasureId.WBP, MeasureId.WOA, MeasureId.WOP)
AVERAGE = (MeasureId.ABA, MeasureId.ABP, MeasureId.AOA, MeasureId.AD_INF, MeasureId.AD1)


@dataclass(frozen=True)
class Box:
    xmin: object
    xmax: object
    ymin: object
    ymax: object

    def __post_init__(self):
        if self.xmin > self.xmax or self.ymin > self.ymax:
            raise ValueError("empty box")

    @property
    def width(self):
        return self.xmax - self.xmin

    @property
    def height(self):
        return self.ymax - self.ymin

    @property
    def area(self):
        return self.width * self.height

    @property
    def perimeter(self):
        return 2 * (self.width + self.height)

    @classmethod
    def from_support(cls, sup) -> "Box":
        return cls(-sup[4], sup[0], -sup[6], sup[2])


@dataclass(frozen=True)
class Octagon:
    """Offsets for the eight normals at multiples of 45 degrees.

    Diagonal offsets are stored as ``max(+-x +- y)``, i.e. multiplied by sqrt2.
    """

    offsets: tuple

    @property
    def box(self) -> Box:
        return Box.from_support(self.offsets)

    @property
    def area(self):
        w, h = _support.extents(self.offsets)
        return w * h - sum(c * c for c in _support.corner_cuts(self.offsets)) / 2

    @property
    def perimeter(self):
        w, h = _support.extents(self.offsets)
        return 2 * (w + h) + (R2 - 2) * sum(_support.corner_cuts(self.offsets))


@dataclass(frozen=True)
class SectionGeometry:
    """What the bound evaluators know about one curve section or probe midsection.

    ``front`` and ``tail`` are the regions where sections start and end (probe
    use); ``start`` and ``end`` are actual end points (single-section use).
    """

    area: object
    box: Box | None = None
    oct: Octagon | None = None
    front: object = None
    tail: object = None
    start: tuple | None = None
    end: tuple | None = None


def _points_of(items):
    pts = []
    for it in items:
        if hasattr(it, "vertices"):
            pts.extend(it.vertices)
        else:
            pts.append(tuple(it))
    if not pts:
        raise ValueError("hull of an empty set")
    return pts


def hull_box(items) -> Box:
    """Smallest axis-parallel box around points and/or regions."""
    return Box.from_support(_support.of_points(_points_of(items), diagonals=False))


def hull_oct(items) -> Octagon:
    """Smallest octagon with sides at multiples of 45 degrees around points and/or regions."""
    return Octagon(_support.of_points(_points_of(items)))


# -- numerators ------------------------------------------------------------------

@dataclass(frozen=True)
class Metric:
    sx: object = 1
    sy: object = 1

    @property
    def uniform(self) -> bool:
        return self.sx == self.sy

    @property
    def area_factor(self):
        return self.sx * self.sy


IDENTITY = Metric()


def set_numerator(measure: MeasureId, sup, metric: Metric = IDENTITY):
    """Extent term of a set-based measure, in true units, from a support vector."""
    w, h = _support.extents(sup)
    sx, sy = metric.sx, metric.sy
    if measure is MeasureId.WBA:
        return sx * sy * w * h
    if measure is MeasureId.WBP:
        s = sx * w + sy * h
        return s * s / 4
    s = sx
    cuts = _support.corner_cuts(sup)
    if measure is MeasureId.WOA:
        return s * s * (w * h - sum(c * c for c in cuts) / 2)
    if measure is MeasureId.WOP:
        p = s * (2 * (w + h) + (R2 - 2) * sum(cuts))
        return p * p / 16
    raise ValueError(f"{measure.value} is not a set measure")


def pair_numerator(measure: MeasureId, dx, dy, metric: Metric = IDENTITY):
    """Squared distance term of a locality measure."""
    dx = metric.sx * (dx if dx >= 0 else -dx)
    dy = metric.sy * (dy if dy >= 0 else -dy)
    if measure is MeasureId.WL2:
        return dx * dx + dy * dy
    if measure is MeasureId.WL_INF:
        m = dx if dx >= dy else dy
        return m * m
    if measure is MeasureId.WL1:
        s = dx + dy
        return s * s
    raise ValueError(f"{measure.value} is not a locality measure")


_R2F = math.sqrt(2.0)


def set_numerator_f(measure: MeasureId, sup, sx: float = 1.0, sy: float = 1.0) -> float:
    """Float version of :func:`set_numerator` (``sup`` holds floats)."""
    w = sup[0] + sup[4]
    h = sup[2] + sup[6]
    if measure is MeasureId.WBA:
        return sx * sy * w * h
    if measure is MeasureId.WBP:
        s = sx * w + sy * h
        return s * s / 4
    h0, h1, h2, h3, h4, h5, h6, h7 = sup
    c1, c3, c5, c7 = h0 + h2 - h1, h4 + h2 - h3, h4 + h6 - h5, h0 + h6 - h7
    if measure is MeasureId.WOA:
        return sx * sx * (w * h - (c1 * c1 + c3 * c3 + c5 * c5 + c7 * c7) / 2)
    p = sx * (2 * (w + h) + (_R2F - 2) * (c1 + c3 + c5 + c7))
    return p * p / 16


def pair_numerator_f(measure: MeasureId, dx: float, dy: float, sx: float = 1.0, sy: float = 1.0) -> float:
    dx = abs(dx) * sx
    dy = abs(dy) * sy
    if measure is MeasureId.WL2:
        return dx * dx + dy * dy
    if measure is MeasureId.WL_INF:
        m = max(dx, dy)
        return m * m
    s = dx + dy
    return s * s


# -- public bound evaluators ---------------------------------------------------------

def _region_area(r):
    return r.area


def mu_bounds(measure: MeasureId, geom: SectionGeometry, metric: Metric = IDENTITY):
    """``(lower, upper)`` on the worst section starting in ``front`` and ending in ``tail``.

    Every such section contains the midsection and lies inside
    ``front + mid + tail``; the lower bound is the value of one concrete
    section (far end points, whole front and tail counted as area).
    """
    measure = MeasureId(measure)
    if geom.front is None or geom.tail is None:
        raise ValueError("probe bounds need front and tail regions")
    af = metric.area_factor
    total = (_region_area(geom.front) + geom.area + _region_area(geom.tail)) * af
    mid = geom.area * af
    if measure.is_locality:
        best = max(
            pair_numerator(measure, p[0] - q[0], p[1] - q[1], metric)
            for p in geom.front.vertices for q in geom.tail.vertices
        )
        return best / total, (best / mid if mid != 0 else INF)
    if geom.area == 0:
        mid_sup = None
    else:
        mid_sup = geom.oct.offsets if geom.oct is not None else _box_support(geom.box)
    if measure.uses_octagon and (mid_sup is not None and mid_sup[1] is None):
        raise ValueError("octagon measures need the midsection octagon")
    diag = measure.uses_octagon
    outer = _support.union(mid_sup, geom.front.support(diag), geom.tail.support(diag))
    upper = set_numerator(measure, outer, metric) / mid if mid != 0 else INF
    if mid_sup is None:
        return as_exact(0), upper
    lower = set_numerator(measure, mid_sup, metric) / total
    return lower, upper


def _box_support(box: Box):
    return (box.xmax, None, box.ymax, None, -box.xmin, None, -box.ymin, None)


def exact_section_measure(measure: MeasureId, geom: SectionGeometry, metric: Metric = IDENTITY):
    """Measure ratio of one concrete section."""
    measure = MeasureId(measure)
    if geom.area == 0:
        raise ZeroDivisionError("section has zero area")
    denom = geom.area * metric.area_factor
    if measure.is_locality:
        if geom.start is None or geom.end is None:
            raise ValueError("locality measures need the section's end points")
        (x0, y0), (x1, y1) = geom.start, geom.end
        return pair_numerator(measure, x1 - x0, y1 - y0, metric) / denom
    if measure.uses_octagon:
        if geom.oct is None:
            raise ValueError("octagon measures need the section's octagon")
        sup = geom.oct.offsets
    else:
        sup = geom.oct.offsets if geom.oct is not None else _box_support(geom.box)
    return set_numerator(measure, sup, metric) / denom


def value_to_float(x) -> float:
    if x is INF:
        return math.inf
    if isinstance(x, ExactScalar):
        return to_float(x)
    return float(x)
