"""Sort points along a scanning order, pack them into blocks and simulate queries.

Points are exact rationals.  Sorting uses address keys: a vectorised float
descent settles every level where a point lies clearly inside one subregion,
and all other points, and all ties left after the key depth, go through the
exact comparator in :mod:`sfcq.curves`.
"""
from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from gmpy2 import mpq

from .curves import FractalTile, ScanningOrder, UnsupportedError, _Locator, compare
from .exact import to_float
from .measures import Box, hull_box
from .sampling import _rng

__all__ = [
    "BlockLayout",
    "QueryStats",
    "normalize_points",
    "sort_points",
    "pack_blocks",
    "simulate_queries",
    "read_points_csv",
    "layout_json",
]

MAX_DEPTH = 64


def _rect(unit) -> tuple | None:
    """``(xmin, ymin, xmax, ymax)`` if the unit region is an axis-parallel rectangle."""
    if isinstance(unit, FractalTile) or len(unit.vertices) != 4:
        return None
    xs = sorted({v[0] for v in unit.vertices})
    ys = sorted({v[1] for v in unit.vertices})
    if len(xs) != 2 or len(ys) != 2:
        return None
    return xs[0], ys[0], xs[1], ys[1]


def normalize_points(order: ScanningOrder, pts) -> list:
    """Map the data's bounding square onto the unit region by one scale and a shift.

    The square's lower-left corner goes to the unit's lower-left corner and its
    side to the shorter side of the unit rectangle, so nothing is stretched.
    """
    pts = [(mpq(x), mpq(y)) for x, y in pts]
    if not pts:
        return []
    rect = _rect(order.unit)
    if rect is None:
        raise UnsupportedError(f"{order.name}: normalisation needs a rectangular unit region")
    ux0, uy0, ux1, uy1 = rect
    w, h = ux1 - ux0, uy1 - uy0
    ux0, uy0, target = _rect_exact((ux0, uy0, w if to_float(w) <= to_float(h) else h))
    x0 = min(p[0] for p in pts)
    y0 = min(p[1] for p in pts)
    side = max(max(p[0] for p in pts) - x0, max(p[1] for p in pts) - y0)
    if side == 0:
        side = mpq(1)
    s = target / side
    return [(ux0 + (x - x0) * s, uy0 + (y - y0) * s) for x, y in pts]


def _rect_exact(rect):
    out = []
    for v in rect:
        if hasattr(v, "is_rational"):
            if not v.is_rational():
                raise UnsupportedError("normalisation needs a rational corner and shorter side")
            out.append(mpq(v.coords[0]))
        else:
            out.append(mpq(v))
    return out


# -- sorting ----------------------------------------------------------------------

class _FloatDescent:
    """Per-state child polygons in float, for guarded vectorised point location."""

    def __init__(self, order: ScanningOrder):
        if isinstance(order.unit, FractalTile):
            raise UnsupportedError(f"{order.name}: point location needs a polygonal unit region")
        states = [(order.root, False)]
        index = {states[0]: 0}
        rows = []
        k = 0
        while k < len(states):
            row = []
            for tau, child, crev in order.children(*states[k]):
                st = (child, crev)
                if st not in index:
                    index[st] = len(states)
                    states.append(st)
                row.append((index[st], tau))
            rows.append(row)
            k += 1
        self.states = states
        self.n = max(len(r) for r in rows)
        nv = len(order.unit.vertices)
        ns = len(states)
        self.child_state = np.zeros((ns, self.n), dtype=np.int64)
        self.inv = np.zeros((ns, self.n, 2, 3))
        self.normals = np.zeros((ns, self.n, nv, 2))
        # absent children (rules with fewer subregions) never contain anything
        self.offsets = np.full((ns, self.n, nv), np.inf)
        growth = 1.0
        for s, row in enumerate(rows):
            for i, (cs, tau) in enumerate(row):
                self.child_state[s, i] = cs
                inv = tau.inverse()
                self.inv[s, i] = [[to_float(inv.a), to_float(inv.b), to_float(inv.tx)],
                                  [to_float(inv.c), to_float(inv.d), to_float(inv.ty)]]
                growth = max(growth, float(np.abs(self.inv[s, i, :, :2]).sum(axis=1).max()))
                verts = [tuple(map(to_float, v)) for v in order.unit.transformed(tau).vertices]
                for e, (p, q) in enumerate(zip(verts, verts[1:] + verts[:1])):
                    nx, ny = q[1] - p[1], p[0] - q[0]
                    ln = math.hypot(nx, ny)
                    # inward normal of a counter-clockwise polygon
                    self.normals[s, i, e] = (-nx / ln, -ny / ln)
                    self.offsets[s, i, e] = -(nx * p[0] + ny * p[1]) / ln
        self.growth = growth

    def digits(self, xs: np.ndarray, ys: np.ndarray, depth: int):
        """Digit matrix and a per-point flag telling whether every digit was certain."""
        m = len(xs)
        out = np.zeros((m, depth), dtype=np.int64)
        sure = np.ones(m, dtype=bool)
        state = np.zeros(m, dtype=np.int64)
        x, y = xs.copy(), ys.copy()
        eps = 1e-12
        for level in range(depth):
            nrm = self.normals[state]
            margin = (nrm[..., 0] * x[:, None, None] + nrm[..., 1] * y[:, None, None]
                      - self.offsets[state]).min(axis=2)
            inside = margin > eps
            hit = inside.any(axis=1)
            sure &= hit
            d = np.where(hit, inside.argmax(axis=1), 0)
            out[:, level] = d
            t = self.inv[state, d]
            x, y = (t[:, 0, 0] * x + t[:, 0, 1] * y + t[:, 0, 2],
                    t[:, 1, 0] * x + t[:, 1, 1] * y + t[:, 1, 2])
            state = self.child_state[state, d]
            eps *= self.growth * 1.01
            if eps > 1e-4:
                return out[:, :level + 1], sure
        return out, sure


def sort_points(order: ScanningOrder, pts, max_depth: int = MAX_DEPTH) -> list:
    """Permutation putting ``pts`` in scanning order (stable; exact ties keep input order)."""
    n = len(pts)
    if n <= 1:
        return list(range(n))
    pts = [(mpq(x), mpq(y)) for x, y in pts]
    unit = order.unit
    for p in pts:
        if not unit.contains(p):
            raise ValueError(f"point ({float(p[0])}, {float(p[1])}) lies outside the unit region")
    fd = _FloatDescent(order)
    key_depth = min(max_depth, max(1, int(62 / math.log2(fd.n))))
    xs = np.array([float(p[0]) for p in pts])
    ys = np.array([float(p[1]) for p in pts])
    digits, sure = fd.digits(xs, ys, key_depth)
    key_depth = digits.shape[1]
    if not sure.all():
        loc = _Locator(order)
        for i in np.flatnonzero(~sure):
            digits[i] = loc.digits(pts[i], key_depth)[0]
    keys = np.zeros(n, dtype=np.int64)
    for level in range(key_depth):
        keys = keys * fd.n + digits[:, level]
    perm = np.lexsort((np.arange(n), keys))
    out = [int(i) for i in perm]
    if key_depth >= max_depth:
        return out
    # ties at the key depth: order them with the exact comparator
    sorted_keys = keys[perm]
    start = 0
    for end in range(1, n + 1):
        if end == n or sorted_keys[end] != sorted_keys[start]:
            if end - start > 1:
                out[start:end] = sorted(out[start:end], key=functools.cmp_to_key(
                    lambda i, j: _cmp(order, pts, i, j, max_depth)))
            start = end
    return out


def _cmp(order, pts, i, j, max_depth):
    r = compare(order, pts[i], pts[j], max_depth)
    if r == "before":
        return -1
    if r == "after":
        return 1
    return (i > j) - (i < j)


# -- packing -------------------------------------------------------------------------

@dataclass
class BlockLayout:
    blocks: list
    block_size: int
    n: int

    @property
    def boxes(self) -> list:
        return [b for _, b in self.blocks]

    @property
    def total_area(self):
        return sum((b.area for b in self.boxes), mpq(0))

    @property
    def total_perimeter(self):
        return sum((b.perimeter for b in self.boxes), mpq(0))


def pack_blocks(order: ScanningOrder, pts, block_size: int, max_depth: int = MAX_DEPTH) -> BlockLayout:
    """Consecutive runs of ``block_size`` points in scanning order, with their exact boxes."""
    if block_size < 1:
        raise ValueError("block size must be >= 1")
    pts = [(mpq(x), mpq(y)) for x, y in pts]
    perm = sort_points(order, pts, max_depth)
    blocks = []
    for k in range(0, len(perm), block_size):
        idx = perm[k:k + block_size]
        blocks.append((idx, hull_box([pts[i] for i in idx])))
    return BlockLayout(blocks, block_size, len(pts))


def layout_json(layout: BlockLayout) -> dict:
    return {
        "n": layout.n,
        "B": layout.block_size,
        "blocks": [
            {"count": len(idx), "xmin": float(b.xmin), "ymin": float(b.ymin),
             "xmax": float(b.xmax), "ymax": float(b.ymax)}
            for idx, b in layout.blocks
        ],
        "total_area": float(layout.total_area),
        "total_perimeter": float(layout.total_perimeter),
    }


# -- query simulation -----------------------------------------------------------------

@dataclass(frozen=True)
class QueryStats:
    kind: str
    count: int
    mean: float
    stddev: float
    seed: int

    @property
    def stderr(self) -> float:
        return self.stddev / math.sqrt(self.count)

    def to_json(self) -> dict:
        return {"kind": self.kind, "count": self.count, "mean": self.mean,
                "stddev": self.stddev, "seed": self.seed}


def simulate_queries(layout: BlockLayout, kind: str, count: int, seed: int = 0,
                     region: Box | None = None, chunk: int = 4096) -> QueryStats:
    """Average number of blocks whose box a random query hits.

    Point queries are uniform in ``region`` (default the unit square).  Line
    queries pick a uniform direction in ``[0, pi)`` and a signed distance from
    the region's centre, uniform in plus or minus half its diagonal.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if kind not in ("point", "line"):
        raise ValueError(f"unknown query kind {kind!r}")
    region = region or Box(0, 1, 0, 1)
    rx0, rx1, ry0, ry1 = (float(v) for v in (region.xmin, region.xmax, region.ymin, region.ymax))
    boxes = np.array([[float(b.xmin), float(b.ymin), float(b.xmax), float(b.ymax)] for b in layout.boxes])
    rng = _rng(seed, 0)
    hits = np.zeros(count)
    cx, cy = (rx0 + rx1) / 2, (ry0 + ry1) / 2
    half_diag = math.hypot(rx1 - rx0, ry1 - ry0) / 2
    for start in range(0, count, chunk):
        k = min(chunk, count - start)
        if kind == "point":
            qx = rng.uniform(rx0, rx1, k)
            qy = rng.uniform(ry0, ry1, k)
            inside = ((boxes[None, :, 0] <= qx[:, None]) & (qx[:, None] <= boxes[None, :, 2])
                      & (boxes[None, :, 1] <= qy[:, None]) & (qy[:, None] <= boxes[None, :, 3]))
        else:
            theta = rng.uniform(0.0, math.pi, k)
            r = rng.uniform(-half_diag, half_diag, k)
            nx, ny = np.cos(theta)[:, None], np.sin(theta)[:, None]
            # projections of the box corners onto the normal, relative to the centre
            px = np.stack([(boxes[:, 0] - cx), (boxes[:, 2] - cx)])
            py = np.stack([(boxes[:, 1] - cy), (boxes[:, 3] - cy)])
            lo = np.minimum(nx * px[0], nx * px[1]) + np.minimum(ny * py[0], ny * py[1])
            hi = np.maximum(nx * px[0], nx * px[1]) + np.maximum(ny * py[0], ny * py[1])
            inside = (lo <= r[:, None]) & (r[:, None] <= hi)
        hits[start:start + k] = inside.sum(axis=1)
    std = float(hits.std(ddof=1)) if count > 1 else 0.0
    return QueryStats(kind, count, float(hits.mean()), std, seed)


# -- I/O ---------------------------------------------------------------------------------

def _number(text: str):
    return mpq(Fraction(text.strip()))


def read_points_csv(text: str) -> list:
    """Exact points from ``x,y`` CSV text; a non-numeric first row is taken as a header."""
    out = []
    for k, row in enumerate(csv.reader(io.StringIO(text))):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 2:
            raise ValueError(f"row {k + 1}: expected x,y")
        try:
            out.append((_number(row[0]), _number(row[1])))
        except ValueError:
            if k == 0 and not out:
                continue
            raise ValueError(f"row {k + 1}: bad coordinates {row[:2]!r}") from None
    return out

