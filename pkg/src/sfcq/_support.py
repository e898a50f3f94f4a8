"""Support-function vectors: extents of a planar set in eight fixed directions.

``sup[k] = max over the set of n_k . p`` for the unnormalised normals
``n_k`` at angles ``k * 45deg``.  Entries 0, 2, 4, 6 give the bounding box,
all eight give the bounding octagon.  Diagonal entries are stored without the
1/sqrt2 normalisation, so they stay rational for rational points.

A diagonal entry may be ``None`` when only the box is tracked.
"""
from __future__ import annotations

NORMALS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
AXES = (0, 2, 4, 6)


def point_support(p, diagonals: bool = True) -> tuple:
    x, y = p
    if diagonals:
        return (x, x + y, y, y - x, -x, -x - y, -y, x - y)
    return (x, None, y, None, -x, None, -y, None)


def union(*sups):
    """Support of a union; ``None`` stands for the empty set."""
    out = None
    for s in sups:
        if s is None:
            continue
        if out is None:
            out = s
            continue
        out = tuple(
            None if (u is None or v is None) else (u if u >= v else v)
            for u, v in zip(out, s)
        )
    return out


def union_points(sup, points, diagonals: bool = True):
    return union(sup, *(point_support(p, diagonals) for p in points))


def of_points(points, diagonals: bool = True):
    return union(*(point_support(p, diagonals) for p in points))


def extents(sup) -> tuple:
    """``(width, height)`` of the bounding box."""
    return sup[0] + sup[4], sup[2] + sup[6]


def corner_cuts(sup) -> tuple:
    """Leg lengths of the four right-isosceles corners the octagon cuts off."""
    h0, h1, h2, h3, h4, h5, h6, h7 = sup
    return (h0 + h2 - h1, h4 + h2 - h3, h4 + h6 - h5, h0 + h6 - h7)
