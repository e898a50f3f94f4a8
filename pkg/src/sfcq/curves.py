"""Scanning orders defined by recursive subdivision rules.

A :class:`ScanningOrder` is a set of named :class:`Rule` objects.  Each rule
subdivides the unit region into ordered subregions; step ``i`` maps the unit
region onto subregion ``i`` with an affine :class:`Transform` and names the
rule that orders the inside of that subregion.  A transform may carry a
reversal flag, meaning the subregion is traversed backwards; reversal composes
by XOR along a path.
"""
from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field
from importlib import resources

from gmpy2 import mpq

from . import _support
from .exact import (
    ExactScalar,
    ParseError,
    R3,
    as_exact,
    enclose,
    format_scalar,
    parse_scalar,
    sign,
    to_float,
)

__all__ = [
    "Transform",
    "Region",
    "FractalTile",
    "Step",
    "Rule",
    "ScanningOrder",
    "TilingReport",
    "BUILTIN_NAMES",
    "builtin",
    "serpentine",
    "validate",
    "cell_region",
    "cell_transform",
    "compare",
    "point_address",
    "polyline",
    "parse_curve_file",
    "format_curve_file",
    "UnsupportedError",
    "BudgetError",
]


class UnsupportedError(ValueError):
    """Operation not available for this order or measure."""


class BudgetError(RuntimeError):
    """A configured size budget would be exceeded."""


def _abs(x):
    return -x if x < 0 else x


class Transform:
    """Affine map ``p -> A p + t`` with ``A = [[a, b], [c, d]]``, plus a reversal flag."""

    __slots__ = ("a", "b", "c", "d", "tx", "ty", "reversed", "_sup_map", "_key")

    def __init__(self, a, b, c, d, tx=0, ty=0, reversed=False):
        self.a, self.b, self.c, self.d = (_coerce(v) for v in (a, b, c, d))
        self.tx, self.ty = _coerce(tx), _coerce(ty)
        self.reversed = bool(reversed)
        self._sup_map = None
        self._key = None

    @classmethod
    def identity(cls) -> "Transform":
        return cls(1, 0, 0, 1, 0, 0)

    def key(self) -> tuple:
        if self._key is None:
            self._key = (self.a, self.b, self.c, self.d, self.tx, self.ty, self.reversed)
        return self._key

    def __eq__(self, o):
        return isinstance(o, Transform) and self.key() == o.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        vals = ", ".join(format_scalar(v) for v in (self.a, self.b, self.c, self.d, self.tx, self.ty))
        return f"Transform({vals}, reversed={self.reversed})"

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    def apply(self, p):
        x, y = p
        return (self.a * x + self.b * y + self.tx, self.c * x + self.d * y + self.ty)

    def compose(self, other: "Transform") -> "Transform":
        """``self o other`` (apply ``other`` first)."""
        a, b, c, d = self.a, self.b, self.c, self.d
        return Transform(
            a * other.a + b * other.c,
            a * other.b + b * other.d,
            c * other.a + d * other.c,
            c * other.b + d * other.d,
            a * other.tx + b * other.ty + self.tx,
            c * other.tx + d * other.ty + self.ty,
            self.reversed != other.reversed,
        )

    def inverse(self) -> "Transform":
        det = self.det
        if det == 0:
            raise ZeroDivisionError("singular transform")
        a, b, c, d = self.d / det, -self.b / det, -self.c / det, self.a / det
        return Transform(
            a, b, c, d,
            -(a * self.tx + b * self.ty),
            -(c * self.tx + d * self.ty),
            self.reversed,
        )

    def without_reversal(self) -> "Transform":
        if not self.reversed:
            return self
        return Transform(self.a, self.b, self.c, self.d, self.tx, self.ty, False)

    # -- shape classes -------------------------------------------------------
    def is_axis_aligned(self) -> bool:
        """Maps axis-parallel boxes to axis-parallel boxes."""
        return (self.b == 0 and self.c == 0) or (self.a == 0 and self.d == 0)

    def is_dihedral(self) -> bool:
        """Uniform scaling times a symmetry of the square (preserves the 8 octagon normals)."""
        if self.b == 0 and self.c == 0:
            return _abs(self.a) == _abs(self.d)
        if self.a == 0 and self.d == 0:
            return _abs(self.b) == _abs(self.c)
        return False

    def is_similarity(self) -> bool:
        return self.a == self.d and self.b == -self.c or self.a == -self.d and self.b == self.c

    def support_map(self):
        """Per target direction ``k``: ``(source direction, multiplier)`` or ``None``.

        With it, ``sup'[k] = mult * sup[src] + n_k . t``.
        """
        if self._sup_map is None:
            if not self.is_axis_aligned():
                raise UnsupportedError("support vectors need an axis-aligned transform")
            out = []
            for nx, ny in _support.NORMALS:
                vx = self.a * nx + self.c * ny
                vy = self.b * nx + self.d * ny
                ax, ay = _abs(vx), _abs(vy)
                if vx == 0 or vy == 0 or ax == ay:
                    m = ax if ax >= ay else ay
                    ux = 0 if vx == 0 else (1 if vx > 0 else -1)
                    uy = 0 if vy == 0 else (1 if vy > 0 else -1)
                    out.append((_support.NORMALS.index((ux, uy)), m))
                else:
                    out.append(None)
            self._sup_map = tuple(out)
        return self._sup_map

    def map_support(self, sup):
        if sup is None:
            return None
        tx, ty = self.tx, self.ty
        offs = (tx, tx + ty, ty, ty - tx, -tx, -tx - ty, -ty, tx - ty)
        out = []
        for k, entry in enumerate(self.support_map()):
            if entry is None:
                out.append(None)
                continue
            v = sup[entry[0]]
            out.append(None if v is None else entry[1] * v + offs[k])
        return tuple(out)


def _coerce(v):
    if isinstance(v, ExactScalar):
        return v.a if v.is_rational() else v
    return mpq(v)


# -- regions ------------------------------------------------------------------

class Region:
    """Convex polygon, vertices counterclockwise."""

    def __init__(self, vertices):
        verts = [(_coerce(x), _coerce(y)) for x, y in vertices]
        if len(verts) < 3:
            raise ValueError("a region needs at least three vertices")
        a2 = _signed_area2(verts)
        if a2 == 0:
            raise ValueError("a region needs positive area")
        if a2 < 0:
            verts.reverse()
        self.vertices = tuple(verts)

    def __repr__(self):
        return f"Region({[(to_float(x), to_float(y)) for x, y in self.vertices]})"

    def __eq__(self, o):
        return isinstance(o, Region) and self.vertices == o.vertices

    def __hash__(self):
        return hash(self.vertices)

    @functools.cached_property
    def area(self):
        return _signed_area2(self.vertices) / 2

    @functools.cached_property
    def centroid(self):
        v = self.vertices
        cx = cy = 0
        a2 = 0
        for i in range(len(v)):
            x0, y0 = v[i]
            x1, y1 = v[(i + 1) % len(v)]
            cr = x0 * y1 - x1 * y0
            a2 += cr
            cx += (x0 + x1) * cr
            cy += (y0 + y1) * cr
        return (cx / (3 * a2), cy / (3 * a2))

    @property
    def center(self):
        return self.centroid

    def support(self, diagonals: bool = True):
        return _support.of_points(self.vertices, diagonals)

    def transformed(self, t: Transform) -> "Region":
        return Region([t.apply(p) for p in self.vertices])

    def _edges(self):
        v = self.vertices
        for i in range(len(v)):
            x0, y0 = v[i]
            x1, y1 = v[(i + 1) % len(v)]
            # outward normal of a counterclockwise edge
            yield (x0, y0), (y1 - y0, x0 - x1)

    def contains(self, p) -> bool:
        """Closed containment."""
        return all(nx * (p[0] - x0) + ny * (p[1] - y0) <= 0 for (x0, y0), (nx, ny) in self._edges())

    def owns(self, p) -> bool:
        """Half-open containment used for tie-breaking between neighbouring regions.

        Boundaries with an interior above them (horizontal and diagonal bottom
        edges) belong to the region; vertical edges belong to the region on
        their right.
        """
        for (x0, y0), (nx, ny) in self._edges():
            s = nx * (p[0] - x0) + ny * (p[1] - y0)
            if s > 0:
                return False
            if s == 0 and not (ny < 0 or (ny == 0 and nx < 0)):
                return False
        return True


def _signed_area2(v):
    s = 0
    for i in range(len(v)):
        x0, y0 = v[i]
        x1, y1 = v[(i + 1) % len(v)]
        s += x0 * y1 - x1 * y0
    return s


def clip_convex(subject, clip) -> list:
    """Sutherland-Hodgman intersection of two convex CCW vertex lists."""
    out = list(subject)
    n = len(clip)
    for i in range(n):
        if not out:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay

        def side(p):
            return ex * (p[1] - ay) - ey * (p[0] - ax)

        inp, out = out, []
        for j in range(len(inp)):
            p, q = inp[j], inp[(j + 1) % len(inp)]
            sp, sq = side(p), side(q)
            if sp >= 0:
                out.append(p)
            if (sp > 0 and sq < 0) or (sp < 0 and sq > 0):
                t = sp / (sp - sq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def overlap_area(r1: Region, r2: Region):
    pts = clip_convex(r1.vertices, r2.vertices)
    if len(pts) < 3:
        return mpq(0)
    return _abs(_signed_area2(pts)) / 2


class FractalTile:
    """Unit region with fractal boundary, known through bounding data.

    ``curve_points`` are exact points on the curve with their area parameter,
    ``center``/``radius`` give a disc containing the tile, and ``box`` is a
    conservative polygon used wherever a polygon is required.
    """

    def __init__(self, area, center, radius, curve_points, subcenters=()):
        self.area = area
        self.center = center
        self.radius = mpq(radius)
        self.curve_points = tuple(curve_points)
        self.subcenters = tuple(subcenters)
        cx, cy = center
        r = self.radius
        self.box = Region([(cx - r, cy - r), (cx + r, cy - r), (cx + r, cy + r), (cx - r, cy + r)])

    @property
    def vertices(self):
        return self.box.vertices

    @property
    def centroid(self):
        return self.center

    def support(self, diagonals: bool = True):
        return self.box.support(diagonals)

    def transformed(self, t: Transform) -> Region:
        return self.box.transformed(t)


# -- rule systems ---------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    transform: Transform
    child: str


@dataclass(frozen=True)
class Rule:
    name: str
    steps: tuple

    @property
    def n(self) -> int:
        return len(self.steps)


@dataclass
class ScanningOrder:
    name: str
    rules: dict
    root: str
    unit: object
    mode: str = "exact"
    description: str = ""
    _children_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.root not in self.rules:
            raise ValueError(f"root rule {self.root!r} is not defined")
        for rule in self.rules.values():
            if not rule.steps:
                raise ValueError(f"rule {rule.name!r} has no steps")
            for st in rule.steps:
                if st.child not in self.rules:
                    raise ValueError(f"rule {rule.name!r} refers to unknown rule {st.child!r}")

    @property
    def unit_area(self):
        return self.unit.area

    def children(self, rule: str, rev: bool = False) -> tuple:
        """Subregions of ``(rule, rev)`` in traversal order.

        Each entry is ``(transform, child_rule, child_rev)``; the transform's own
        reversal flag is the step's and ``child_rev`` already folds in ``rev``.
        """
        key = (rule, rev)
        out = self._children_cache.get(key)
        if out is None:
            steps = self.rules[rule].steps
            seq = reversed(steps) if rev else steps
            out = tuple((st.transform, st.child, rev != st.transform.reversed) for st in seq)
            self._children_cache[key] = out
        return out

    def reachable(self) -> list:
        seen, stack = [self.root], [self.root]
        while stack:
            for st in self.rules[stack.pop()].steps:
                if st.child not in seen:
                    seen.append(st.child)
                    stack.append(st.child)
        return seen

    def transforms(self):
        for r in self.reachable():
            for st in self.rules[r].steps:
                yield st.transform


# -- builtin catalog ------------------------------------------------------------

BUILTIN_NAMES = (
    "gp",
    "balanced-gp",
    "hilbert",
    "z-order",
    "sierpinski-knopp",
    "gosper",
    "r-order",
    "coil",
    "meurthe",
    "luxburg2",
    "serpentine-011010110",
    "beta-omega",
)

_H = mpq(1, 2)
_UNIT_SQUARE = ((0, 0), (1, 0), (1, 1), (0, 1))
_SWAP = ((0, 1), (1, 0))


def _matmul(m, n):
    return tuple(
        tuple(sum(m[i][k] * n[k][j] for k in range(2)) for j in range(2)) for i in range(2)
    )


def _square_cell(x0, y0, s, m, reversed=False) -> Transform:
    """Map the unit square onto the cell ``[x0, x0+s] x [y0, y0+s]``.

    ``m`` is a signed permutation acting about the square's centre.
    """
    (a, b), (c, d) = m
    s = mpq(s)
    tx = x0 + s * (_H - (a * _H + b * _H))
    ty = y0 + s * (_H - (c * _H + d * _H))
    return Transform(s * a, s * b, s * c, s * d, tx, ty, reversed)


_D4 = tuple(
    m
    for m in (
        ((1, 0), (0, 1)), ((-1, 0), (0, 1)), ((1, 0), (0, -1)), ((-1, 0), (0, -1)),
        ((0, 1), (1, 0)), ((0, -1), (1, 0)), ((0, 1), (-1, 0)), ((0, -1), (-1, 0)),
    )
)


def _corner_maps(start, end, base_start=(0, 0), base_end=(1, 0)):
    """Square symmetries taking base_start -> start and base_end -> end (corners of [0,1]^2)."""
    out = []
    for m in _D4:
        t = _square_cell(0, 0, 1, m)
        if t.apply(base_start) == tuple(map(mpq, start)) and t.apply(base_end) == tuple(map(mpq, end)):
            out.append(m)
    return out


def _serpentine_rule(code: str) -> Rule:
    steps = []
    third = mpq(1, 3)
    for k in range(9):
        col = k // 3
        row = k % 3 if col % 2 == 0 else 2 - k % 3
        m = ((-1 if row % 2 else 1, 0), (0, -1 if col % 2 else 1))
        if code[k] == "1":
            m = _matmul(m, _SWAP)
        steps.append(Step(_square_cell(col * third, row * third, third, m), "S"))
    return Rule("S", tuple(steps))


def serpentine(code: str) -> ScanningOrder:
    """Serpentine order on the 3x3 grid selected by a 9-digit orientation code.

    Cells are visited column by column (up, down, up).  Digit ``i`` refers to
    the ``i``-th visited cell: ``0`` keeps the parent's orientation (the cell's
    curve leaves its entry corner along the column), ``1`` transposes it (the
    curve leaves along the row).  ``000000000`` is GP order, ``111111111``
    coil order.
    """
    code = code.replace(" ", "")
    if len(code) != 9 or set(code) - {"0", "1"}:
        raise ValueError(f"serpentine code must be 9 binary digits, got {code!r}")
    return ScanningOrder(
        f"serpentine-{code}", {"S": _serpentine_rule(code)}, "S", Region(_UNIT_SQUARE),
        description=f"Serpentine {code[:3]} {code[3:6]} {code[6:]}",
    )


def _hilbert() -> ScanningOrder:
    steps = (
        Step(_square_cell(0, 0, _H, _SWAP), "H"),
        Step(_square_cell(0, _H, _H, _D4[0]), "H"),
        Step(_square_cell(_H, _H, _H, _D4[0]), "H"),
        Step(_square_cell(_H, 0, _H, ((0, -1), (-1, 0))), "H"),
    )
    return ScanningOrder("hilbert", {"H": Rule("H", steps)}, "H", Region(_UNIT_SQUARE),
                         description="Hilbert order")


def _z_order() -> ScanningOrder:
    steps = tuple(
        Step(_square_cell(x, y, _H, _D4[0]), "Z") for x, y in ((0, 0), (_H, 0), (0, _H), (_H, _H))
    )
    return ScanningOrder("z-order", {"Z": Rule("Z", steps)}, "Z", Region(_UNIT_SQUARE),
                         description="Z-order (Lebesgue / Morton)")


def _r_order() -> ScanningOrder:
    # curve runs from the lower-left to the lower-right corner; each cell likewise
    # from one corner to an adjacent one.
    cells = [
        ((0, 0), (0, 0), (0, 1)),
        ((0, 1), (0, 0), (0, 1)),
        ((0, 2), (0, 0), (1, 0)),
        ((1, 2), (0, 0), (1, 0)),
        ((2, 2), (0, 0), (1, 0)),
        ((2, 1), (1, 1), (0, 1)),
        ((1, 1), (1, 1), (1, 0)),
        ((1, 0), (1, 1), (1, 0)),
        ((2, 0), (0, 0), (1, 0)),
    ]
    third = mpq(1, 3)
    steps = []
    for (col, row), start, end in cells:
        (m,) = _corner_maps(start, end)
        steps.append(Step(_square_cell(col * third, row * third, third, m), "R"))
    return ScanningOrder("r-order", {"R": Rule("R", tuple(steps))}, "R", Region(_UNIT_SQUARE),
                         description="R-order (Wunderlich's Meander)")


def _balanced_gp() -> ScanningOrder:
    gp = _serpentine_rule("000000000")
    steps = []
    for st in gp.steps:
        t = st.transform
        # conjugate by the horizontal stretch diag(sqrt3, 1); t has no swap part
        steps.append(Step(Transform(t.a, 0, 0, t.d, t.tx * R3, t.ty, t.reversed), "S"))
    unit = Region([(0, 0), (R3, 0), (R3, 1), (0, 1)])
    return ScanningOrder("balanced-gp", {"S": Rule("S", tuple(steps))}, "S", unit,
                         description="balanced GP order (GP stretched horizontally by sqrt3)")


def _sierpinski() -> ScanningOrder:
    # Right isosceles triangle with its hypotenuse on the x-axis, expanded by one
    # level so that all rotations are multiples of 90 degrees.
    h = _H
    steps = (
        Step(Transform(h, 0, 0, h, 0, 0), "T"),
        Step(Transform(0, -h, h, 0, 1, 0), "T"),
        Step(Transform(0, h, -h, 0, 1, 1), "T"),
        Step(Transform(h, 0, 0, h, 1, 0), "T"),
    )
    unit = Region([(0, 0), (2, 0), (1, 1)])
    return ScanningOrder("sierpinski-knopp", {"T": Rule("T", steps)}, "T", unit,
                         description="Sierpinski-Knopp order (one level expanded)")


def _cmul(p, q):
    return (p[0] * q[0] - p[1] * q[1], p[0] * q[1] + p[1] * q[0])


def _gosper_steps():
    half_r3 = R3 * _H
    unit_dirs = {0: (mpq(1), mpq(0)), 1: (_H, half_r3), -1: (_H, -half_r3),
                 -2: (-_H, -half_r3), -3: (mpq(-1), mpq(0))}
    # A -> A-B--B+A++AA+B- : headings in units of 60 degrees, B = reversed A
    headings = (0, -1, -3, -2, 0, 0, 1)
    rev = (False, True, True, False, False, False, True)
    mult = (mpq(5, 14), R3 / 14)
    z = [(mpq(0), mpq(0))]
    for h in headings:
        e = _cmul(unit_dirs[h], mult)
        z.append((z[-1][0] + e[0], z[-1][1] + e[1]))
    steps = []
    for k in range(7):
        (x0, y0), (x1, y1) = z[k], z[k + 1]
        if rev[k]:
            dx, dy, tx, ty = x0 - x1, y0 - y1, x1, y1
        else:
            dx, dy, tx, ty = x1 - x0, y1 - y0, x0, y0
        steps.append(Step(Transform(dx, -dy, dy, dx, tx, ty, rev[k]), "G"))
    return tuple(steps), z


def _gosper() -> ScanningOrder:
    steps, _ = _gosper_steps()
    rule = Rule("G", steps)
    # the tile is a Gosper island around a hexagon with vertices 0 and 1
    center = (_H, -R3 / 6)
    # points of the curve with their area parameter, two levels deep
    pts = {}
    for i, (ti, _) in enumerate((st.transform, st.child) for st in steps):
        for j, st in enumerate(steps):
            t = ti.compose(st.transform)
            # the curve of a reversed cell starts at the image of 1
            s0, s1 = ((1, 0), (0, 0)) if t.reversed else ((0, 0), (1, 0))
            pts[mpq(7 * i + j, 49)] = t.apply(s0)
            pts[mpq(7 * i + j + 1, 49)] = t.apply(s1)
    subcenters = []
    for st in steps:
        for st2 in steps:
            subcenters.append(st.transform.compose(st2.transform).apply(center))
    radius = _gosper_radius(steps, center)
    tile = FractalTile(R3 / 2, center, radius, sorted(pts.items()), subcenters)
    return ScanningOrder("gosper", {"G": rule}, "G", tile, mode="interval",
                         description="Gosper flowsnake order")


def _gosper_radius(steps, center):
    # The tile lies in the disc D(center, R) whenever
    # max_k |f_k(center) - center| + R / sqrt7 <= R  (the IFS maps the disc into itself).
    dmax2 = max(
        (st.transform.apply(center)[0] - center[0]) ** 2 + (st.transform.apply(center)[1] - center[1]) ** 2
        for st in steps
    )
    d_hi = enclose(dmax2, 80).sqrt(80).hi
    r7_lo = enclose(ExactScalar(7), 80).sqrt(80).lo
    # R >= d / (1 - 1/sqrt7), rounded up to a short dyadic rational
    bound = d_hi / (1 - 1 / r7_lo)
    scale = 1 << 12
    return mpq(-(-bound.numerator * scale // bound.denominator), scale)


def _load_data(name: str) -> ScanningOrder:
    text = resources.files("sfcq.data").joinpath(f"{name}.sfc").read_text()
    return parse_curve_file(text)


_ALIASES = {
    "gp": lambda: _renamed(serpentine("000000000"), "gp", "GP order (Peano)"),
    "coil": lambda: _renamed(serpentine("111111111"), "coil", "coil order"),
    "meurthe": lambda: _renamed(serpentine("110110110"), "meurthe", "Meurthe order"),
    "luxburg2": lambda: _renamed(serpentine("101010101"), "luxburg2", "Luxburg variation 2"),
    "serpentine-011010110": lambda: serpentine("011010110"),
    "balanced-gp": _balanced_gp,
    "hilbert": _hilbert,
    "z-order": _z_order,
    "sierpinski-knopp": _sierpinski,
    "gosper": _gosper,
    "r-order": _r_order,
    "beta-omega": lambda: _load_data("beta_omega"),
}


def _renamed(order: ScanningOrder, name: str, description: str) -> ScanningOrder:
    order.name = name
    order.description = description
    return order


@functools.lru_cache(maxsize=None)
def builtin(name: str) -> ScanningOrder:
    """Look up a catalog order by its stable name (see :data:`BUILTIN_NAMES`)."""
    try:
        make = _ALIASES[name]
    except KeyError:
        raise KeyError(f"unknown curve {name!r}; choose from {', '.join(BUILTIN_NAMES)}") from None
    return make()


# -- validation -----------------------------------------------------------------

@dataclass
class TilingReport:
    """Exact tiling checks, per rule (``depth == 1``) or over depth-``k`` cells."""

    ok: bool
    area_sums: dict
    max_overlap: dict
    contained: dict
    overlap_checked: bool = True
    messages: list = field(default_factory=list)

    def __str__(self):
        lines = [f"tiling {'ok' if self.ok else 'FAILED'}"]
        for name in self.area_sums:
            lines.append(
                f"  {name}: area sum {format_scalar(self.area_sums[name])}, "
                f"max overlap {format_scalar(self.max_overlap[name])}, "
                f"inside parent {self.contained[name]}"
            )
        lines.extend(f"  {m}" for m in self.messages)
        return "\n".join(lines)


def _pairwise_max_overlap(regions) -> object:
    worst = mpq(0)
    boxes = [r.support(diagonals=False) for r in regions]
    order = sorted(range(len(regions)), key=lambda i: to_float(-boxes[i][4]))
    for pos, i in enumerate(order):
        bi = boxes[i]
        for j in order[pos + 1:]:
            bj = boxes[j]
            if -bj[4] >= bi[0]:
                break
            # boxes overlapping only along an edge cannot hide a positive-area overlap
            if -bj[6] >= bi[2] or -bi[6] >= bj[2]:
                continue
            ov = overlap_area(regions[i], regions[j])
            if ov > worst:
                worst = ov
    return worst


def validate(order: ScanningOrder, depth: int = 1) -> TilingReport:
    """Check that subregions tile their parent exactly.

    With ``depth == 1`` every rule is checked on its own; with larger depth the
    depth-``k`` cells of the root are checked against the unit region.
    """
    area_sums, overlaps, contained, msgs = {}, {}, {}, []
    unit = order.unit
    fractal = isinstance(unit, FractalTile)
    if depth == 1:
        groups = {name: [(st.transform, st.child) for st in order.rules[name].steps]
                  for name in order.reachable()}
    else:
        groups = {f"{order.root}@depth{depth}": [(t, None) for t, *_ in _cells(order, depth)]}
    for name, items in groups.items():
        total = sum((_abs(t.det) for t, _ in items), mpq(0))
        area_sums[name] = total
        if fractal:
            overlaps[name] = mpq(0)
            contained[name] = True
            continue
        regions = [unit.transformed(t) for t, _ in items]
        overlaps[name] = _pairwise_max_overlap(regions)
        contained[name] = all(unit.contains(p) for r in regions for p in r.vertices)
    if fractal:
        msgs.append("fractal unit region: only the area sum is checked")
    ok = all(v == 1 for v in area_sums.values()) and all(v == 0 for v in overlaps.values()) \
        and all(contained.values())
    return TilingReport(ok, area_sums, overlaps, contained, overlap_checked=not fractal, messages=msgs)


# -- cells, points, polylines ------------------------------------------------------

def _cells(order: ScanningOrder, depth: int, budget: int | None = None):
    """Yield ``(transform, rule, rev)`` for all depth-``depth`` cells in scanning order."""
    count = 1
    for _ in range(depth):
        count *= max(r.n for r in order.rules.values())
    if budget is not None and count > budget:
        raise BudgetError(f"{count} cells exceed the budget of {budget}")

    def rec(t, rule, rev, k):
        if k == 0:
            yield t, rule, rev
            return
        for tau, child, crev in order.children(rule, rev):
            yield from rec(t.compose(tau), child, crev, k - 1)

    yield from rec(Transform.identity(), order.root, False, depth)


def cell_transform(order: ScanningOrder, addr) -> tuple:
    """Composite transform, rule and orientation of the cell with address ``addr``."""
    t, rule, rev = Transform.identity(), order.root, False
    for digit in addr:
        kids = order.children(rule, rev)
        if not 0 <= digit < len(kids):
            raise ValueError(f"digit {digit} invalid for rule {rule!r} with {len(kids)} subregions")
        tau, rule, rev = kids[digit]
        t = t.compose(tau)
    return t, rule, rev


def cell_region(order: ScanningOrder, addr):
    """Region ``C(addr)``: the unit region mapped along the address path."""
    t, _, _ = cell_transform(order, addr)
    return order.unit.transformed(t)


def _check_point(order, p):
    if isinstance(order.unit, FractalTile):
        raise UnsupportedError(f"{order.name}: point location needs a polygonal unit region")
    if not order.unit.contains(p):
        raise ValueError(f"point {p} lies outside the unit region of {order.name}")


def _child_of(order, rule, rev, p):
    kids = order.children(rule, rev)
    for i, (tau, child, crev) in enumerate(kids):
        if order.unit.transformed(tau).owns(p):
            return i
    # on the outer boundary (top or right side): fall back to closed containment
    for i, (tau, child, crev) in enumerate(kids):
        if order.unit.transformed(tau).contains(p):
            return i
    raise ValueError(f"point {p} not located in any subregion of rule {rule!r}")


class _Locator:
    """Point location with per-(rule, orientation) cached child regions."""

    def __init__(self, order: ScanningOrder):
        self.order = order
        self._kids = {}

    def kids(self, rule, rev):
        key = (rule, rev)
        out = self._kids.get(key)
        if out is None:
            out = []
            for tau, child, crev in self.order.children(rule, rev):
                out.append((self.order.unit.transformed(tau), tau.inverse(), child, crev))
            self._kids[key] = out
        return out

    def digits(self, p, depth: int, start=None):
        """Address digits of ``p``; also returns the state for continuing deeper."""
        rule, rev, q = start if start else (self.order.root, False, p)
        out = []
        for _ in range(depth):
            kids = self.kids(rule, rev)
            idx = None
            for i, (reg, _, _, _) in enumerate(kids):
                if reg.owns(q):
                    idx = i
                    break
            if idx is None:
                for i, (reg, _, _, _) in enumerate(kids):
                    if reg.contains(q):
                        idx = i
                        break
            if idx is None:
                raise ValueError(f"point {p} not located in rule {rule!r}")
            _, inv, rule, rev = kids[idx]
            q = inv.apply(q)
            out.append(idx)
        return out, (rule, rev, q)


def point_address(order: ScanningOrder, p, depth: int) -> list:
    """Digits of the depth-``depth`` cell that owns point ``p`` (with tie-breaking)."""
    p = (_coerce(p[0]), _coerce(p[1]))
    _check_point(order, p)
    return _Locator(order).digits(p, depth)[0]


def compare(order: ScanningOrder, p, q, max_depth: int = 64) -> str:
    """``'before'``, ``'after'`` or ``'undecided'`` for points ``p`` and ``q``."""
    p = (_coerce(p[0]), _coerce(p[1]))
    q = (_coerce(q[0]), _coerce(q[1]))
    _check_point(order, p)
    _check_point(order, q)
    loc = _Locator(order)
    sp = sq = None
    for _ in range(max_depth):
        (dp,), sp = loc.digits(p, 1, sp)
        (dq,), sq = loc.digits(q, 1, sq)
        if dp != dq:
            return "before" if dp < dq else "after"
    return "undecided"


def polyline(order: ScanningOrder, depth: int, budget: int = 1 << 20) -> list:
    """Centres of all depth-``depth`` cells in scanning order."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    c = order.unit.center
    return [t.apply(c) for t, _, _ in _cells(order, depth, budget)]


# -- curve files --------------------------------------------------------------------

_STEP_RE = re.compile(
    r"^step\s+(?P<idx>\d+)\s*:\s*m\s+(?P<m>\S+\s+\S+\s+\S+\s+\S+)\s+t\s+(?P<t>\S+\s+\S+)"
    r"\s+child\s+(?P<child>\S+)\s+rev\s+(?P<rev>[01])\s*$"
)


def _scalar_at(tok, line_no, col):
    try:
        return parse_scalar(tok)
    except ParseError as e:
        raise ParseError(f"bad scalar {tok!r}: {e}", col + e.pos, line_no) from None


def parse_curve_file(text: str, check: bool = True) -> ScanningOrder:
    """Parse the line-oriented ``.sfc`` format and validate the tiling.

    Scalars are written without internal whitespace (``1/3*r3+1``).
    """
    name = None
    unit = None
    root = None
    rules: dict = {}
    current = None
    expected = 0
    description = ""
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split()[0]
        if head == "curve":
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ParseError("curve needs a name", 0, line_no)
            name = parts[1].strip()
        elif head == "description":
            description = line.split(None, 1)[1] if len(line.split(None, 1)) > 1 else ""
        elif head == "unit":
            toks = line.split()[1:]
            if len(toks) < 6 or len(toks) % 2:
                raise ParseError("unit needs an even number (>= 6) of coordinates", 0, line_no)
            vals = [_scalar_at(t, line_no, raw.find(t)) for t in toks]
            unit = Region([(vals[i], vals[i + 1]) for i in range(0, len(vals), 2)])
        elif head == "root":
            root = line.split()[1]
        elif head == "rule":
            m = re.match(r"^rule\s+(\S+)\s+n\s*=\s*(\d+)$", line)
            if not m:
                raise ParseError("expected 'rule NAME n=K'", 0, line_no)
            if current is not None and len(rules[current]) != expected:
                raise ParseError(f"rule {current!r} has {len(rules[current])} steps, expected {expected}", 0, line_no)
            current, expected = m.group(1), int(m.group(2))
            if current in rules:
                raise ParseError(f"duplicate rule {current!r}", 0, line_no)
            rules[current] = []
            root = root or current
        elif head == "step":
            if current is None:
                raise ParseError("step outside a rule block", 0, line_no)
            m = _STEP_RE.match(line)
            if not m:
                raise ParseError("expected 'step IDX: m a b c d t tx ty child NAME rev 0|1'", 0, line_no)
            if int(m.group("idx")) != len(rules[current]):
                raise ParseError(f"step index {m.group('idx')} out of sequence", 0, line_no)
            mv = [_scalar_at(t, line_no, raw.find(t)) for t in m.group("m").split()]
            tv = [_scalar_at(t, line_no, raw.find(t)) for t in m.group("t").split()]
            rules[current].append(
                Step(Transform(*mv, *tv, reversed=m.group("rev") == "1"), m.group("child"))
            )
        else:
            raise ParseError(f"unknown directive {head!r}", 0, line_no)
    if current is not None and len(rules[current]) != expected:
        raise ParseError(f"rule {current!r} has {len(rules[current])} steps, expected {expected}", 0)
    if not rules:
        raise ParseError("no rules defined", 0)
    if unit is None:
        unit = Region(_UNIT_SQUARE)
    for r, steps in rules.items():
        for st in steps:
            if st.child not in rules:
                raise ParseError(f"rule {r!r} refers to unknown rule {st.child!r}", 0)
    order = ScanningOrder(name or "custom", {k: Rule(k, tuple(v)) for k, v in rules.items()}, root, unit,
                          description=description)
    if check:
        report = validate(order)
        if not report.ok:
            raise TilingError(report)
    return order


class TilingError(ValueError):
    def __init__(self, report: TilingReport):
        super().__init__(str(report))
        self.report = report


def _tok(x) -> str:
    return format_scalar(x).replace(" ", "")


def format_curve_file(order: ScanningOrder) -> str:
    if isinstance(order.unit, FractalTile):
        raise UnsupportedError("fractal unit regions cannot be written as .sfc")
    out = [f"curve {order.name}"]
    if order.description:
        out.append(f"description {order.description}")
    out.append("unit " + " ".join(f"{_tok(x)} {_tok(y)}" for x, y in order.unit.vertices))
    out.append(f"root {order.root}")
    for rule in order.rules.values():
        out.append(f"rule {rule.name} n={rule.n}")
        for i, st in enumerate(rule.steps):
            t = st.transform
            out.append(
                f"step {i}: m {_tok(t.a)} {_tok(t.b)} {_tok(t.c)} {_tok(t.d)} "
                f"t {_tok(t.tx)} {_tok(t.ty)} child {st.child} rev {int(t.reversed)}"
            )
    return "\n".join(out) + "\n"
