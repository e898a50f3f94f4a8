"""Exact arithmetic in Q(sqrt2, sqrt3) and rational interval arithmetic.

Every coordinate, area and measure value of the polygonal curves lives in the
field Q(sqrt2, sqrt3).  Elements are stored as four rationals ``(a, b, c, d)``
meaning ``a + b*r2 + c*r3 + d*r6``; the basis is linearly independent over Q,
so the representation is canonical.

Plain rationals are represented by :class:`gmpy2.mpq` and mix freely with
:class:`ExactScalar`.
"""
from __future__ import annotations

import re
from functools import lru_cache
from math import isqrt

from gmpy2 import mpq

__all__ = [
    "ExactScalar",
    "RationalInterval",
    "ParseError",
    "Q",
    "R2",
    "R3",
    "R6",
    "arith",
    "as_exact",
    "enclose",
    "parse_scalar",
    "format_scalar",
    "sign",
    "to_float",
]

_RATIONAL_TYPES = (int, type(mpq(0)))


def Q(num, den=1):
    """Shorthand for an exact rational."""
    return mpq(num, den)


@lru_cache(maxsize=None)
def _sqrt_enclosure(n: int, bits: int) -> tuple:
    # floor(sqrt(n) * 2^bits) / 2^bits <= sqrt(n) < that + 2^-bits
    lo = isqrt(n << (2 * bits))
    scale = mpq(1, 1 << bits)
    return mpq(lo) * scale, mpq(lo + 1) * scale


class ExactScalar:
    """Element ``a + b*sqrt2 + c*sqrt3 + d*sqrt6`` of Q(sqrt2, sqrt3)."""

    __slots__ = ("a", "b", "c", "d", "_hash")

    def __init__(self, a=0, b=0, c=0, d=0):
        self.a = mpq(a)
        self.b = mpq(b)
        self.c = mpq(c)
        self.d = mpq(d)
        self._hash = None

    # -- structure -------------------------------------------------------
    @property
    def coords(self) -> tuple:
        return (self.a, self.b, self.c, self.d)

    def is_rational(self) -> bool:
        return not (self.b or self.c or self.d)

    def is_zero(self) -> bool:
        return not (self.a or self.b or self.c or self.d)

    def __repr__(self) -> str:
        return f"ExactScalar({format_scalar(self)!r})"

    def __str__(self) -> str:
        return format_scalar(self)

    def __hash__(self) -> int:
        if self._hash is None:
            if self.is_rational():
                self._hash = hash(self.a)
            else:
                self._hash = hash((self.a, self.b, self.c, self.d))
        return self._hash

    def __float__(self) -> float:
        return to_float(self)

    def __bool__(self) -> bool:
        return not self.is_zero()

    # -- field operations ------------------------------------------------
    def __add__(self, o):
        if isinstance(o, ExactScalar):
            return ExactScalar(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
        if isinstance(o, _RATIONAL_TYPES):
            return ExactScalar(self.a + o, self.b, self.c, self.d)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return ExactScalar(-self.a, -self.b, -self.c, -self.d)

    def __pos__(self):
        return self

    def __sub__(self, o):
        if isinstance(o, ExactScalar):
            return ExactScalar(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
        if isinstance(o, _RATIONAL_TYPES):
            return ExactScalar(self.a - o, self.b, self.c, self.d)
        return NotImplemented

    def __rsub__(self, o):
        if isinstance(o, _RATIONAL_TYPES):
            return ExactScalar(o - self.a, -self.b, -self.c, -self.d)
        return NotImplemented

    def __mul__(self, o):
        if isinstance(o, _RATIONAL_TYPES):
            return ExactScalar(self.a * o, self.b * o, self.c * o, self.d * o)
        if not isinstance(o, ExactScalar):
            return NotImplemented
        a1, b1, c1, d1 = self.a, self.b, self.c, self.d
        a2, b2, c2, d2 = o.a, o.b, o.c, o.d
        return ExactScalar(
            a1 * a2 + 2 * b1 * b2 + 3 * c1 * c2 + 6 * d1 * d2,
            a1 * b2 + b1 * a2 + 3 * (c1 * d2 + d1 * c2),
            a1 * c2 + c1 * a2 + 2 * (b1 * d2 + d1 * b2),
            a1 * d2 + d1 * a2 + b1 * c2 + c1 * b2,
        )

    __rmul__ = __mul__

    def inverse(self) -> "ExactScalar":
        if self.is_zero():
            raise ZeroDivisionError("division by zero in Q(sqrt2, sqrt3)")
        # y * sigma2(y) has no sqrt2/sqrt6 part; then multiply by its sqrt3-conjugate.
        s2 = ExactScalar(self.a, -self.b, self.c, -self.d)
        z = self * s2
        s3 = ExactScalar(z.a, 0, -z.c, 0)
        norm = z.a * z.a - 3 * z.c * z.c
        return (s2 * s3) * (1 / norm)

    def __truediv__(self, o):
        if isinstance(o, _RATIONAL_TYPES):
            if o == 0:
                raise ZeroDivisionError("division by zero in Q(sqrt2, sqrt3)")
            inv = 1 / mpq(o)
            return ExactScalar(self.a * inv, self.b * inv, self.c * inv, self.d * inv)
        if isinstance(o, ExactScalar):
            return self * o.inverse()
        return NotImplemented

    def __rtruediv__(self, o):
        if isinstance(o, _RATIONAL_TYPES):
            return self.inverse() * o
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        out, base = ExactScalar(1), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- ordering --------------------------------------------------------
    def __eq__(self, o):
        if isinstance(o, ExactScalar):
            return self.coords == o.coords
        if isinstance(o, _RATIONAL_TYPES):
            return self.is_rational() and self.a == o
        if isinstance(o, float):
            return self.is_rational() and self.a == o
        return NotImplemented

    def _cmp(self, o) -> int:
        if isinstance(o, float):
            if o == float("inf"):
                return -1
            if o == float("-inf"):
                return 1
            o = mpq(o)
        return sign(self - o)

    def __lt__(self, o):
        return self._cmp(o) < 0

    def __le__(self, o):
        return self._cmp(o) <= 0

    def __gt__(self, o):
        return self._cmp(o) > 0

    def __ge__(self, o):
        return self._cmp(o) >= 0

    def __abs__(self):
        return -self if sign(self) < 0 else self


R2 = ExactScalar(0, 1, 0, 0)
R3 = ExactScalar(0, 0, 1, 0)
R6 = ExactScalar(0, 0, 0, 1)


def as_exact(x) -> ExactScalar:
    if isinstance(x, ExactScalar):
        return x
    return ExactScalar(x)


def arith(x, y, op: str):
    """Apply ``op`` in {'add', 'sub', 'mul', 'div'} to two field elements."""
    x, y = as_exact(x), as_exact(y)
    if op == "add":
        return x + y
    if op == "sub":
        return x - y
    if op == "mul":
        return x * y
    if op == "div":
        return x / y
    raise ValueError(f"unknown operation {op!r}")


def _interval_eval(x: ExactScalar, bits: int) -> tuple:
    lo, hi = x.a, x.a
    for coef, n in ((x.b, 2), (x.c, 3), (x.d, 6)):
        if coef:
            r_lo, r_hi = _sqrt_enclosure(n, bits)
            if coef > 0:
                lo += coef * r_lo
                hi += coef * r_hi
            else:
                lo += coef * r_hi
                hi += coef * r_lo
    return lo, hi


def sign(x) -> int:
    """Certified sign of a field element (or rational).

    Zero is decided on the coordinates; otherwise the enclosures of the square
    roots are tightened until the value's interval excludes zero.
    """
    if isinstance(x, _RATIONAL_TYPES):
        return (x > 0) - (x < 0)
    if not (x.b or x.c or x.d):
        return (x.a > 0) - (x.a < 0)
    bits = 64
    while True:
        lo, hi = _interval_eval(x, bits)
        if lo > 0:
            return 1
        if hi < 0:
            return -1
        bits *= 2


def to_float(x) -> float:
    if isinstance(x, _RATIONAL_TYPES):
        return float(x)
    if isinstance(x, float):
        return x
    lo, hi = _interval_eval(x, 64)
    return float((lo + hi) / 2)


def enclose(x, bits: int) -> "RationalInterval":
    """Rational interval of width <= 2**-bits * max(1, |x|) containing ``x``."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    x = as_exact(x)
    if x.is_rational():
        return RationalInterval(x.a, x.a)
    target = mpq(1, 1 << bits)
    k = bits + 4
    while True:
        lo, hi = _interval_eval(x, k)
        mag = max(abs(lo), abs(hi), mpq(1))
        if hi - lo <= target * mag:
            return RationalInterval(lo, hi)
        k += 8


class RationalInterval:
    """Closed interval ``[lo, hi]`` with rational endpoints.

    Arithmetic is exact on the endpoints, so results enclose the real result of
    the same expression.  :meth:`rounded` widens outward to dyadic endpoints to
    keep denominators small.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = mpq(lo)
        hi = lo if hi is None else mpq(hi)
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        self.lo, self.hi = lo, hi

    def __repr__(self) -> str:
        return f"RationalInterval({float(self.lo)!r}, {float(self.hi)!r})"

    def __eq__(self, o):
        return isinstance(o, RationalInterval) and (self.lo, self.hi) == (o.lo, o.hi)

    def __hash__(self):
        return hash((self.lo, self.hi))

    @staticmethod
    def _coerce(o):
        if isinstance(o, RationalInterval):
            return o
        if isinstance(o, ExactScalar):
            return enclose(o, 96)
        return RationalInterval(o)

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def mid(self):
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        if isinstance(x, RationalInterval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def __add__(self, o):
        o = self._coerce(o)
        return RationalInterval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self):
        return RationalInterval(-self.hi, -self.lo)

    def __sub__(self, o):
        o = self._coerce(o)
        return RationalInterval(self.lo - o.hi, self.hi - o.lo)

    def __rsub__(self, o):
        return self._coerce(o) - self

    def __mul__(self, o):
        o = self._coerce(o)
        p = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return RationalInterval(min(p), max(p))

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = self._coerce(o)
        if o.lo <= 0 <= o.hi:
            raise ZeroDivisionError("interval divisor contains zero")
        return self * RationalInterval(1 / o.hi, 1 / o.lo)

    def __rtruediv__(self, o):
        return self._coerce(o) / self

    def sqrt(self, bits: int = 64) -> "RationalInterval":
        if self.lo < 0:
            raise ValueError("sqrt of interval with negative part")
        scale = 1 << bits
        lo = self.lo * scale * scale
        hi = self.hi * scale * scale
        # floor/ceil of sqrt on the scaled integer bounds
        lo_i = isqrt(int(lo.numerator // lo.denominator))
        hi_f = -(-hi.numerator // hi.denominator)
        hi_i = isqrt(int(hi_f))
        if hi_i * hi_i < hi_f:
            hi_i += 1
        return RationalInterval(mpq(lo_i, scale), mpq(hi_i, scale))

    def rounded(self, bits: int = 64) -> "RationalInterval":
        scale = 1 << bits
        lo = self.lo * scale
        hi = self.hi * scale
        lo_i = lo.numerator // lo.denominator
        hi_i = -(-hi.numerator // hi.denominator)
        return RationalInterval(mpq(lo_i, scale), mpq(hi_i, scale))


# -- text form ------------------------------------------------------------

class ParseError(ValueError):
    """Malformed scalar or curve-file text; ``pos`` is a 0-based offset."""

    def __init__(self, message: str, pos: int = 0, line: int | None = None):
        where = f"line {line}, " if line is not None else ""
        super().__init__(f"{message} ({where}position {pos})")
        self.pos = pos
        self.line = line


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<rad>r[236])|(?P<op>[-+*]))")
_RADICALS = {"r2": 1, "r3": 2, "r6": 3}


def parse_scalar(text: str) -> ExactScalar:
    """Parse ``1/3*r3 + 1``-style text into an :class:`ExactScalar`."""
    tokens = []
    pos = 0
    stripped = text.rstrip()
    while pos < len(stripped):
        m = _TOKEN.match(stripped, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {stripped[pos:pos + 1]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    if not tokens:
        raise ParseError("empty scalar expression", 0)

    coords = [mpq(0)] * 4
    i = 0

    def term(i, negate):
        neg = negate
        if i < len(tokens) and tokens[i][0] == "op" and tokens[i][1] == "-":
            neg = not neg
            i += 1
        if i >= len(tokens):
            raise ParseError("expected a term", len(stripped))
        kind, val, p = tokens[i]
        if kind == "num":
            coef = mpq(val)
            i += 1
            slot = 0
            if i < len(tokens) and tokens[i][1] == "*":
                if i + 1 >= len(tokens) or tokens[i + 1][0] != "rad":
                    raise ParseError("expected radical after '*'", tokens[i][2])
                slot = _RADICALS[tokens[i + 1][1]]
                i += 2
        elif kind == "rad":
            coef, slot = mpq(1), _RADICALS[val]
            i += 1
        else:
            raise ParseError(f"unexpected {val!r}", p)
        coords[slot] += -coef if neg else coef
        return i

    i = term(i, False)
    while i < len(tokens):
        kind, val, p = tokens[i]
        if kind != "op" or val not in "+-":
            raise ParseError(f"expected '+' or '-', got {val!r}", p)
        i = term(i + 1, val == "-")
    return ExactScalar(*coords)


def _fmt_q(q) -> str:
    q = mpq(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def format_scalar(x) -> str:
    """Canonical text form; ``parse_scalar(format_scalar(x)) == x``."""
    x = as_exact(x)
    parts = []
    for coef, rad in zip(x.coords, ("", "r2", "r3", "r6")):
        if not coef:
            continue
        neg = coef < 0
        mag = -coef if neg else coef
        if rad:
            body = rad if mag == 1 else f"{_fmt_q(mag)}*{rad}"
        else:
            body = _fmt_q(mag)
        if not parts:
            if neg:
                body = f"-{body}" if not rad or mag != 1 else f"-1*{rad}"
            parts.append(body)
        else:
            parts.append(("- " if neg else "+ ") + body)
    return " ".join(parts) if parts else "0"
