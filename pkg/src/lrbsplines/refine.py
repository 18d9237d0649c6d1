"""Refinement to non-nested supports (the ``n2s2`` strategy).

Two B-splines are *nested* when one's support sits inside the other's
in the strong sense below; nested pairs are exactly what breaks local
linear independence of LR B-splines on open meshes.  This module
provides the pair tests, the one-directional tensor expansions that
remove a nested pair by extending knot lines across the outer support,
and the pipeline that alternates structured refinement with expansion
sweeps so every produced space has pairwise non-nested supports -- and
with it, local linear independence and partition of unity with unit
weights.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .bspline import TensorBSpline, has_minimal_support
from .space import (
    Key,
    LRSpace,
    SpaceError,
    _insert_pieces,
    structured_refine,
)

__all__ = [
    "is_nested_knotwise",
    "is_nested_meshwise",
    "nested_map",
    "one_directional_expansion",
    "tensor_expansion",
    "central_span",
    "diagonal_marker",
    "point_marker",
    "RefinementTrace",
    "n2s_pipeline",
]


# -- nestedness -------------------------------------------------------------


def _vector_nested(vi, vo) -> bool:
    """Direction-wise nestedness of local knot vectors (inner vs outer).

    Inside the inner's span the inner must repeat every knot at least as
    often as the outer; outside the outer's open span (boundary included)
    the inner must not exceed the outer's multiplicities.  Together these
    confine the inner's support and regularity inside the outer's.
    """
    ci, co = Counter(vi), Counter(vo)
    for z in ci.keys() | co.keys():
        if vi[0] < z < vi[-1] and ci[z] < co[z]:
            return False
        if not (vo[0] < z < vo[-1]) and ci[z] > co[z]:
            return False
    return True


def is_nested_knotwise(inner: TensorBSpline, outer: TensorBSpline) -> bool:
    """Nestedness decided from the knot vectors alone."""
    if inner.key == outer.key:
        return False
    return _vector_nested(inner.xknots, outer.xknots) and _vector_nested(
        inner.yknots, outer.yknots
    )


def is_nested_meshwise(inner: TensorBSpline, outer: TensorBSpline, mesh) -> bool:
    """Nestedness decided from the supports on a common mesh.

    Requires support containment and, on every side where the two
    support rectangles coincide, at least the inner's knot multiplicity
    on the outer.  Both functions must have minimal support on ``mesh``;
    on such pairs this agrees with :func:`is_nested_knotwise`.
    """
    for b in (inner, outer):
        if not has_minimal_support(b, mesh):
            raise SpaceError(
                "meshwise nestedness requires minimal support on the mesh"
            )
    if inner.key == outer.key:
        return False
    si, so = inner.support, outer.support
    if not so.contains_rect(si):
        return False

    def mult(vec, value) -> int:
        return sum(1 for v in vec if v == value)

    sides = (
        (si.x_min == so.x_min, inner.xknots, outer.xknots, si.x_min),
        (si.x_max == so.x_max, inner.xknots, outer.xknots, si.x_max),
        (si.y_min == so.y_min, inner.yknots, outer.yknots, si.y_min),
        (si.y_max == so.y_max, inner.yknots, outer.yknots, si.y_max),
    )
    for coincide, vi, vo, value in sides:
        if coincide and mult(vi, value) > mult(vo, value):
            return False
    return True


def _support_bounds(functions: dict, keys) -> np.ndarray:
    out = np.empty((len(keys), 4))
    for i, key in enumerate(keys):
        out[i] = functions[key].support.float_bounds()
    return out


def _pairs_with(functions: dict, keys, bounds: np.ndarray, b: TensorBSpline):
    """Exact nested pairs between ``b`` and the listed functions.

    Returns (outers_of_b, inners_of_b) as key lists.  A cheap bounding-
    box containment prefilter (exact, since dyadics are exact floats)
    keeps the exact knotwise test to a handful of candidates.
    """
    x0, x1, y0, y1 = b.support.float_bounds()
    contains_b = (
        (bounds[:, 0] <= x0)
        & (bounds[:, 1] >= x1)
        & (bounds[:, 2] <= y0)
        & (bounds[:, 3] >= y1)
    )
    inside_b = (
        (bounds[:, 0] >= x0)
        & (bounds[:, 1] <= x1)
        & (bounds[:, 2] >= y0)
        & (bounds[:, 3] <= y1)
    )
    outers = [
        keys[i]
        for i in np.flatnonzero(contains_b)
        if is_nested_knotwise(b, functions[keys[i]])
    ]
    inners = [
        keys[i]
        for i in np.flatnonzero(inside_b)
        if is_nested_knotwise(functions[keys[i]], b)
    ]
    return outers, inners


def nested_map(space: LRSpace) -> dict:
    """Map each function with nested functions to their sorted keys.

    Functions without nested functions do not appear, so a space with
    pairwise non-nested supports maps to ``{}``.
    """
    keys = space.sorted_keys()
    bounds = _support_bounds(space.functions, keys)
    out: dict[Key, tuple] = {}
    for key in keys:
        b = space.functions[key]
        _, inners = _pairs_with(space.functions, keys, bounds, b)
        if inners:
            out[key] = tuple(sorted(inners))
    return out


# -- expansions -------------------------------------------------------------


def _inners_scan(space: LRSpace, b: TensorBSpline) -> list:
    keys = space.sorted_keys()
    bounds = _support_bounds(space.functions, keys)
    _, inners = _pairs_with(space.functions, keys, bounds, b)
    return inners


def _one_directional_pieces(b: TensorBSpline, inners, direction: int):
    cross = b.knots(2 if direction == 1 else 1)
    values = set(b.knots(direction))
    for f in inners:
        values.update(f.knots(direction))
    return [(direction, v, cross[0], cross[-1]) for v in sorted(values)]


def one_directional_expansion(space: LRSpace, outer_key, direction: int) -> LRSpace:
    """Extend the knot lines of a function and its nested functions in one
    direction across the outer support.

    All direction-``direction`` knot values of the outer function and of
    every function nested under it are completed across the outer
    support's cross-extent at multiplicity one (only uncovered gaps are
    inserted), and the space is regenerated.  Returns the space
    unchanged when every such line already spans the support.  Raises
    when the function has no nested functions.
    """
    b = space.functions.get(outer_key)
    if b is None:
        raise SpaceError(f"function {outer_key} is not in the space")
    inner_keys = _inners_scan(space, b)
    if not inner_keys:
        raise SpaceError("expansion requires a function with nested functions")
    inners = [space.functions[k] for k in inner_keys]
    return _insert_pieces(space, _one_directional_pieces(b, inners, direction))


def tensor_expansion(space: LRSpace, outer_key) -> LRSpace:
    """Extend every meshline crossing the support across it, both directions.

    The heavier alternative to :func:`one_directional_expansion`: the
    mesh restricted to the support becomes a tensor mesh, so no nested
    pair involving the region survives.  Returns the space unchanged
    when the restriction is already tensorized.
    """
    b = space.functions.get(outer_key)
    if b is None:
        raise SpaceError(f"function {outer_key} is not in the space")
    mesh = space.mesh
    pieces = []
    for direction in (1, 2):
        vec = b.knots(direction)
        cross = b.knots(2 if direction == 1 else 1)
        c_lo, c_hi = cross[0], cross[-1]
        for pos in mesh.positions(direction):
            if not (vec[0] < pos < vec[-1]):
                continue
            touches = any(
                r_lo < c_hi and c_lo < r_hi
                for r_lo, r_hi, _ in mesh.runs_at(direction, pos)
            )
            if touches:
                pieces.append((direction, pos, c_lo, c_hi))
    return _insert_pieces(space, pieces)


def central_span(b: TensorBSpline) -> tuple[float, float, float, float]:
    """Bounds ``(x_lo, x_hi, y_lo, y_hi)`` of the central knot span of ``b``.

    Each local knot vector of degree p spans p + 1 consecutive knot
    intervals; the function attains its maximum inside the middle one,
    which is therefore the natural footprint to test against a feature
    when deciding whether to refine.  Where knots repeat, the central
    span collapses to zero width and the half-open box [x_lo, x_hi) x
    [y_lo, y_hi) is empty, so markers built on it never select functions
    centred on the boundary.
    """
    p1, p2 = b.degrees
    cx = (p1 + 1) // 2
    cy = (p2 + 1) // 2
    return (
        float(b.xknots[cx]),
        float(b.xknots[cx + 1]),
        float(b.yknots[cy]),
        float(b.yknots[cy + 1]),
    )


def diagonal_marker(b: TensorBSpline) -> bool:
    """Marker: the half-open central span meets the diagonal y = x."""
    x0, x1, y0, y1 = central_span(b)
    return max(x0, y0) < min(x1, y1)


def point_marker(points) -> "callable":
    """Build a marker selecting functions whose half-open central span
    contains one of the given points.

    The half-open convention [x_lo, x_hi) x [y_lo, y_hi) assigns a point
    sitting exactly on a knot line to the functions centred on its upper
    side, so each point marks a bounded cluster of functions rather than
    everything whose support merely touches it.
    """
    pts = tuple((float(px), float(py)) for px, py in points)

    def marker(b: TensorBSpline) -> bool:
        x0, x1, y0, y1 = central_span(b)
        return any(x0 <= px < x1 and y0 <= py < y1 for px, py in pts)

    return marker


# -- the pipeline -----------------------------------------------------------


@dataclass
class RefinementTrace:
    """One record per expansion: iteration, outer key, direction, and the
    function count afterwards."""

    records: list = field(default_factory=list)

    def append(self, **fields) -> None:
        self.records.append(dict(fields))

    def __len__(self) -> int:
        return len(self.records)


class _NestedTracker:
    """Incrementally maintained nested-pair relation of a space.

    Whether two functions are nested depends only on their knot vectors,
    so pairs between surviving functions never change; updates only have
    to handle removed and added functions.
    """

    def __init__(self, space: LRSpace):
        self.by_outer: dict[Key, set] = {}
        self.by_inner: dict[Key, set] = {}
        keys = space.sorted_keys()
        bounds = _support_bounds(space.functions, keys)
        for key in keys:
            b = space.functions[key]
            _, inners = _pairs_with(space.functions, keys, bounds, b)
            for ik in inners:
                self._add(ik, key)

    def _add(self, inner_key, outer_key) -> None:
        self.by_outer.setdefault(outer_key, set()).add(inner_key)
        self.by_inner.setdefault(inner_key, set()).add(outer_key)

    def _drop(self, key) -> None:
        for outer in self.by_inner.pop(key, ()):
            peers = self.by_outer.get(outer)
            if peers is not None:
                peers.discard(key)
                if not peers:
                    del self.by_outer[outer]
        for inner in self.by_outer.pop(key, ()):
            peers = self.by_inner.get(inner)
            if peers is not None:
                peers.discard(key)
                if not peers:
                    del self.by_inner[inner]

    def update(self, old_functions: dict, space: LRSpace) -> None:
        removed = old_functions.keys() - space.functions.keys()
        added = space.functions.keys() - old_functions.keys()
        for key in removed:
            self._drop(key)
        if not added:
            return
        keys = space.sorted_keys()
        bounds = _support_bounds(space.functions, keys)
        for key in sorted(added):
            b = space.functions[key]
            outers, inners = _pairs_with(space.functions, keys, bounds, b)
            for ok in outers:
                self._add(key, ok)
            for ik in inners:
                self._add(ik, key)

    def has_pairs(self) -> bool:
        return bool(self.by_outer)

    def select_outer(self) -> Key:
        """The outer with the largest support area, ties broken by the
        lexicographically smallest knot vectors.

        Expanding wide outers first resolves whole regions of nested
        pairs at once and keeps the final spaces close to the minimal
        hierarchically graded ones; the tie-break makes the pipeline
        fully deterministic.
        """

        def rank(key: Key):
            xv, yv = key
            area = (xv[-1].fraction - xv[0].fraction) * (
                yv[-1].fraction - yv[0].fraction
            )
            return (-area, key)

        return min(self.by_outer, key=rank)

    def inners_of(self, outer_key) -> list:
        return sorted(self.by_outer[outer_key])


def _total_runs(mesh) -> int:
    return sum(
        len(mesh.runs_at(d, pos)) for d in (1, 2) for pos in mesh.positions(d)
    )


def n2s_pipeline(
    space: LRSpace,
    marker,
    iterations: int,
    *,
    parity: str = "odd-vertical",
    expansion: str = "one-directional",
    start_index: int = 1,
) -> tuple[LRSpace, RefinementTrace]:
    """Alternate structured refinement with expansion sweeps.

    Per iteration ``i``: mark functions with ``marker`` (selecting none
    is an error), structured-refine them, then expand outers of nested
    pairs one at a time -- smallest support corner first -- in a single
    direction (vertical on odd ``i`` under the default parity,
    horizontal on even; ``parity="odd-horizontal"`` flips this,
    ``expansion="full"`` substitutes two-directional tensor expansions)
    until no nested pair remains.  The sweep provably terminates; a
    generous cap on the expansion count (the mesh's meshline-run total)
    turns a violation into a diagnostic ``RuntimeError``.

    ``start_index`` numbers the first iteration, so a run can be
    continued level by level with the same alternation as one long run.

    Returns the refined space and a trace with one record per expansion.
    """
    if iterations < 0:
        raise SpaceError(f"iterations must be >= 0, got {iterations}")
    if parity not in ("odd-vertical", "odd-horizontal"):
        raise SpaceError(f"unknown parity {parity!r}")
    if expansion not in ("one-directional", "full"):
        raise SpaceError(f"unknown expansion mode {expansion!r}")

    trace = RefinementTrace()
    for i in range(start_index, start_index + iterations):
        marked = [k for k in space.sorted_keys() if marker(space.functions[k])]
        if not marked:
            raise SpaceError(f"marker selected no functions at iteration {i}")
        space = structured_refine(space, marked)

        odd = i % 2 == 1
        if parity == "odd-vertical":
            direction = 1 if odd else 2
        else:
            direction = 2 if odd else 1

        tracker = _NestedTracker(space)
        cap = _total_runs(space.mesh)
        count = 0
        while tracker.has_pairs():
            outer_key = tracker.select_outer()
            outer = space.functions[outer_key]
            if expansion == "one-directional":
                inners = [space.functions[k] for k in tracker.inners_of(outer_key)]
                new_space = _insert_pieces(
                    space, _one_directional_pieces(outer, inners, direction)
                )
            else:
                new_space = tensor_expansion(space, outer_key)
            if new_space is space:
                raise RuntimeError(
                    f"expansion at iteration {i} made no progress on a nested "
                    f"pair; the mesh violates the interior-multiplicity-1 "
                    f"assumption of the strategy"
                )
            count += 1
            if count > cap:
                raise RuntimeError(
                    f"expansion count exceeded the termination cap {cap} at "
                    f"iteration {i}"
                )
            tracker.update(space.functions, new_space)
            space = new_space
            trace.append(
                iter=i,
                outer=outer_key,
                dir=direction,
                n_functions_after=space.n_functions,
            )
    return space, trace
