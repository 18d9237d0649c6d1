"""Tensor-product B-splines on local knot vectors.

A bivariate function is described by two local knot vectors of lengths
``p1 + 2`` and ``p2 + 2`` plus a positive rational weight.  Univariate
values use the Cox--de Boor recursion on half-open spans ``[k_i,
k_{i+1})``; an optional closure coordinate makes the evaluation
left-continuous there, which is how the top domain edge is handled.

The support queries (`has_support_on`, `has_minimal_support`,
`find_refining_split`) implement the containment tests between a
function's knot mesh and an LR mesh: every knot line must be covered by
a mesh run of at least the knot multiplicity, and minimal support
additionally forbids any mesh line that crosses the full support at a
higher multiplicity than the function's own knots there.
"""

from __future__ import annotations

import bisect
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .dyadic import DyadicCoord, dyadic
from .mesh import Mesh, Rect

__all__ = [
    "KnotVectorError",
    "local_knot_vector",
    "TensorBSpline",
    "univariate_values",
    "univariate_derivatives",
    "evaluate",
    "evaluate_gradient",
    "insert_knot",
    "has_support_on",
    "has_minimal_support",
    "find_refining_split",
]


class KnotVectorError(ValueError):
    """A local knot vector violates its invariants."""


def local_knot_vector(values) -> tuple[DyadicCoord, ...]:
    """Coerce and validate a local knot vector of degree ``len - 2``.

    Requires at least 3 entries (degree >= 1), nondecreasing values,
    first < last, and no value repeated more than degree + 1 times.
    """
    if type(values) is tuple and all(type(v) is DyadicCoord for v in values):
        return _validated(values)
    return _validated(tuple(dyadic(v) for v in values))


@lru_cache(maxsize=200_000)
def _validated(vec: tuple[DyadicCoord, ...]) -> tuple[DyadicCoord, ...]:
    """Validation body of ``local_knot_vector``, memoized per vector.

    The same local vector recurs across every function in a row or
    column of a tensor mesh, so caching turns the per-function check
    into a hash lookup.  Failures raise and are therefore never cached.
    """
    if len(vec) < 3:
        raise KnotVectorError(f"knot vector needs at least 3 entries, got {len(vec)}")
    p = len(vec) - 2
    for a, b in zip(vec, vec[1:]):
        if b < a:
            raise KnotVectorError(f"knot vector is not nondecreasing: {a} > {b}")
    if not vec[0] < vec[-1]:
        raise KnotVectorError("knot vector must span a nonempty interval")
    for value, mult in Counter(vec).items():
        if mult > p + 1:
            raise KnotVectorError(
                f"knot {value} has multiplicity {mult} > degree + 1 = {p + 1}"
            )
    return vec


@dataclass(frozen=True, slots=True)
class TensorBSpline:
    """A bivariate B-spline on local knot vectors with a rational weight."""

    xknots: tuple[DyadicCoord, ...]
    yknots: tuple[DyadicCoord, ...]
    weight: Fraction = field(default=Fraction(1))

    def __post_init__(self) -> None:
        xv = local_knot_vector(self.xknots)
        if xv is not self.xknots:
            object.__setattr__(self, "xknots", xv)
        yv = local_knot_vector(self.yknots)
        if yv is not self.yknots:
            object.__setattr__(self, "yknots", yv)
        w = self.weight
        if type(w) is not Fraction:
            w = Fraction(w)
            object.__setattr__(self, "weight", w)
        if w <= 0:
            raise KnotVectorError(f"weight must be positive, got {w}")

    @property
    def degrees(self) -> tuple[int, int]:
        return (len(self.xknots) - 2, len(self.yknots) - 2)

    @property
    def key(self) -> tuple[tuple[DyadicCoord, ...], tuple[DyadicCoord, ...]]:
        """Identity of the function: its pair of knot vectors."""
        return (self.xknots, self.yknots)

    @property
    def support(self) -> Rect:
        return Rect(self.xknots[0], self.xknots[-1], self.yknots[0], self.yknots[-1])

    def knots(self, direction: int) -> tuple[DyadicCoord, ...]:
        return self.xknots if direction == 1 else self.yknots


# -- univariate evaluation --------------------------------------------------


@lru_cache(maxsize=300_000)
def _float_knots(knots: tuple[DyadicCoord, ...]) -> np.ndarray:
    arr = np.array([float(k) for k in knots])
    arr.flags.writeable = False
    return arr


def univariate_values(knots, t, close_at: float | None = None) -> np.ndarray:
    """Cox--de Boor values of the B-spline on ``knots`` at points ``t``.

    Spans are half-open; where ``t`` equals ``close_at`` (a knot value,
    typically the top of the domain) the left-limit value is returned
    instead, so a space evaluated over a closed domain sums correctly on
    the top edges.
    """
    v = _float_knots(tuple(knots)) if not isinstance(knots, np.ndarray) else knots
    t = np.asarray(t, dtype=float)
    p = v.size - 2
    layers = [
        ((v[i] <= t) & (t < v[i + 1])).astype(float) for i in range(p + 1)
    ]
    if close_at is not None and v[0] < close_at <= v[-1]:
        i = int(np.searchsorted(v, close_at, side="left"))
        if i >= 1 and v[i] == close_at:
            layers[i - 1] = layers[i - 1] + (t == close_at)
    for d in range(1, p + 1):
        for i in range(p + 1 - d):
            acc = np.zeros_like(t)
            den1 = v[i + d] - v[i]
            if den1 > 0.0:
                acc = (t - v[i]) / den1 * layers[i]
            den2 = v[i + d + 1] - v[i + 1]
            if den2 > 0.0:
                acc = acc + (v[i + d + 1] - t) / den2 * layers[i + 1]
            layers[i] = acc
    return layers[0]


def univariate_derivatives(knots, t, close_at: float | None = None) -> np.ndarray:
    """First derivative of the B-spline on ``knots`` at points ``t``."""
    v = _float_knots(tuple(knots)) if not isinstance(knots, np.ndarray) else knots
    t = np.asarray(t, dtype=float)
    p = v.size - 2
    out = np.zeros_like(t)
    den1 = v[p] - v[0]
    if den1 > 0.0:
        out = univariate_values(v[:-1], t, close_at) / den1
    den2 = v[p + 1] - v[1]
    if den2 > 0.0:
        out = out - univariate_values(v[1:], t, close_at) / den2
    return p * out


def evaluate(b: TensorBSpline, point) -> float:
    """Weighted value at one point, closed at the function's own last knots."""
    x, y = float(point[0]), float(point[1])
    vx = univariate_values(b.xknots, np.array([x]), close_at=float(b.xknots[-1]))
    vy = univariate_values(b.yknots, np.array([y]), close_at=float(b.yknots[-1]))
    return float(b.weight) * float(vx[0]) * float(vy[0])


def evaluate_gradient(b: TensorBSpline, point) -> tuple[float, float]:
    """Weighted gradient at one point, same closure as :func:`evaluate`."""
    x, y = float(point[0]), float(point[1])
    xs, ys = np.array([x]), np.array([y])
    cx, cy = float(b.xknots[-1]), float(b.yknots[-1])
    w = float(b.weight)
    vx = float(univariate_values(b.xknots, xs, close_at=cx)[0])
    vy = float(univariate_values(b.yknots, ys, close_at=cy)[0])
    dx = float(univariate_derivatives(b.xknots, xs, close_at=cx)[0])
    dy = float(univariate_derivatives(b.yknots, ys, close_at=cy)[0])
    return (w * dx * vy, w * vx * dy)


# -- knot insertion ---------------------------------------------------------


def insert_knot(b: TensorBSpline, direction: int, z):
    """Split ``b`` at ``z`` in ``direction`` into two weighted children.

    Returns ``((alpha1, b1), (alpha2, b2))`` where ``b = alpha1*b1' +
    alpha2*b2'`` for the unweighted children; the returned children carry
    the parent weight multiplied into the coefficients, so the weighted
    sum of the children replaces the parent exactly.  The coefficients
    are exact rationals.
    """
    if direction not in (1, 2):
        raise KnotVectorError(f"direction must be 1 or 2, got {direction}")
    z = dyadic(z)
    v = b.knots(direction)
    p = len(v) - 2
    if not (v[0] < z < v[-1]):
        raise KnotVectorError(
            f"insertion point {z} must lie strictly inside the span "
            f"[{v[0]}, {v[-1]}]"
        )
    i = bisect.bisect_right(v, z)
    augmented = v[:i] + (z,) + v[i:]
    if augmented.count(z) > p + 1:
        raise KnotVectorError(
            f"inserting {z} exceeds multiplicity {p + 1} in {tuple(map(str, v))}"
        )

    if z >= v[p]:
        alpha1 = Fraction(1)
    else:
        alpha1 = (z.fraction - v[0].fraction) / (v[p].fraction - v[0].fraction)
    if z <= v[1]:
        alpha2 = Fraction(1)
    else:
        alpha2 = (v[p + 1].fraction - z.fraction) / (v[p + 1].fraction - v[1].fraction)

    def child(vec, alpha):
        if direction == 1:
            return TensorBSpline(vec, b.yknots, b.weight * alpha)
        return TensorBSpline(b.xknots, vec, b.weight * alpha)

    return (
        (alpha1, child(augmented[:-1], alpha1)),
        (alpha2, child(augmented[1:], alpha2)),
    )


# -- support against a mesh -------------------------------------------------


def _knot_multiplicities(vec) -> list[tuple[DyadicCoord, int]]:
    out: list[tuple[DyadicCoord, int]] = []
    for v in vec:
        if out and out[-1][0] == v:
            out[-1] = (v, out[-1][1] + 1)
        else:
            out.append((v, 1))
    return out


def has_support_on(b: TensorBSpline, mesh: Mesh) -> bool:
    """True when every knot line of ``b`` is covered by mesh runs of
    at least the knot multiplicity."""
    for direction in (1, 2):
        vec = b.knots(direction)
        cross = b.knots(2 if direction == 1 else 1)
        c_lo, c_hi = cross[0], cross[-1]
        for value, mult in _knot_multiplicities(vec):
            run = mesh.covering_run(direction, value, c_lo, c_hi)
            if run is None or run[2] < mult:
                return False
    return True


def find_refining_split(b: TensorBSpline, mesh: Mesh):
    """First mesh line that crosses the support above the knot multiplicity.

    Scans direction 1 then 2, positions ascending, and returns
    ``(direction, position, deficit)`` where ``deficit`` is the covering
    run's multiplicity minus the function's knot multiplicity there;
    ``None`` when the function has minimal support.  Assumes
    ``has_support_on(b, mesh)``.
    """
    for direction in (1, 2):
        vec = b.knots(direction)
        cross = b.knots(2 if direction == 1 else 1)
        c_lo, c_hi = cross[0], cross[-1]
        mults = dict(_knot_multiplicities(vec))
        positions = mesh.positions(direction)
        i0 = bisect.bisect_right(positions, vec[0])
        i1 = bisect.bisect_left(positions, vec[-1])
        for pos in positions[i0:i1]:
            run = mesh.covering_run(direction, pos, c_lo, c_hi)
            if run is None:
                continue
            deficit = run[2] - mults.get(pos, 0)
            if deficit > 0:
                return (direction, pos, deficit)
    return None


def has_minimal_support(b: TensorBSpline, mesh: Mesh) -> bool:
    """Support containment with equality: no mesh line crosses the
    support at higher multiplicity than the function's knots."""
    return has_support_on(b, mesh) and find_refining_split(b, mesh) is None
