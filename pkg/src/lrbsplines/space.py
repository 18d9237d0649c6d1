"""LR B-spline spaces: generation by knot insertion and diagnostics.

A space couples a mesh with the set of B-splines of minimal support on
it, keyed by their knot vectors and carrying exact rational weights.
Whenever meshlines are added, functions that lose minimal support are
replaced by their knot-insertion children until the set is stable; the
resulting set is independent of the order in which lines are added or
functions are processed, and the weights accumulate exactly.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import replace
from fractions import Fraction

import numpy as np

from .bspline import (
    TensorBSpline,
    find_refining_split,
    has_minimal_support,
    insert_knot,
    local_knot_vector,
    univariate_values,
)
from .dyadic import DyadicCoord, dyadic, midpoint
from .mesh import Element, Mesh, MeshError, Split, insert_split, is_tensorized

__all__ = [
    "SpaceError",
    "LRSpace",
    "function_key",
    "initial_space",
    "apply_split",
    "structured_refine",
    "element_support_count",
    "element_support_table",
    "is_locally_linearly_independent",
    "partition_of_unity_defect",
    "evaluate_space",
    "collocation_rank",
    "collocation_points",
]

#: A function key: the pair of knot vectors.
Key = tuple[tuple[DyadicCoord, ...], tuple[DyadicCoord, ...]]


class SpaceError(ValueError):
    """A space-level operation violates its contract."""


def function_key(xknots, yknots) -> Key:
    """Normalize two knot vectors into a function key."""
    return (local_knot_vector(xknots), local_knot_vector(yknots))


class LRSpace:
    """A mesh plus its minimal-support B-splines, keyed by knot vectors.

    Treat instances as immutable; operations return new spaces.
    """

    __slots__ = ("mesh", "functions")

    def __init__(self, mesh: Mesh, functions: dict):
        self.mesh = mesh
        self.functions = functions

    @property
    def n_functions(self) -> int:
        return len(self.functions)

    def sorted_keys(self) -> list[Key]:
        return sorted(self.functions)

    def validate(self) -> None:
        """Check the space invariants; raises SpaceError on violation."""
        p1, p2 = self.mesh.bidegree
        for key, b in self.functions.items():
            if b.degrees != (p1, p2):
                raise SpaceError(f"function {key} has degrees {b.degrees}, mesh {self.mesh.bidegree}")
            if b.key != key:
                raise SpaceError(f"function stored under foreign key {key}")
            if not has_minimal_support(b, self.mesh):
                raise SpaceError(f"function {key} lacks minimal support")

    def __eq__(self, other) -> bool:
        if not isinstance(other, LRSpace):
            return NotImplemented
        return self.mesh == other.mesh and self.functions == other.functions

    def __repr__(self) -> str:
        return f"<LRSpace {self.mesh.domain} bidegree {self.mesh.bidegree}: {self.n_functions} functions>"


# -- construction -----------------------------------------------------------


def initial_space(mesh: Mesh) -> LRSpace:
    """All tensor-product B-splines of an open tensor mesh, weight one."""
    if not (is_tensorized(mesh, 1) and is_tensorized(mesh, 2)):
        raise SpaceError("initial space requires a tensor mesh")
    p1, p2 = mesh.bidegree

    def global_vector(direction: int, degree: int):
        out = []
        f_lo, f_hi = mesh.domain.interval(direction)
        for pos in mesh.positions(direction):
            mult = mesh.runs_at(direction, pos)[0][2]
            if pos in (f_lo, f_hi) and mult != degree + 1:
                raise SpaceError(
                    f"initial space requires an open mesh; boundary at {pos} "
                    f"has multiplicity {mult}, expected {degree + 1}"
                )
            out.extend([pos] * mult)
        return out

    gx = global_vector(1, p1)
    gy = global_vector(2, p2)
    x_windows = [tuple(gx[i : i + p1 + 2]) for i in range(len(gx) - p1 - 1)]
    y_windows = [tuple(gy[j : j + p2 + 2]) for j in range(len(gy) - p2 - 1)]
    one = Fraction(1)
    functions = {}
    for xv in x_windows:
        for yv in y_windows:
            functions[(xv, yv)] = TensorBSpline(xv, yv, one)
    return LRSpace(mesh, functions)


# -- the generation fixpoint ------------------------------------------------


def _fixpoint(mesh: Mesh, functions: dict, dirty) -> bool:
    """Replace functions lacking minimal support by their knot-insertion
    children until stable.  Mutates ``functions``; returns whether
    anything changed.  Coinciding children merge by adding weights, so
    the result is independent of processing order."""
    heap = sorted(set(dirty))
    changed = False
    while heap:
        key = heapq.heappop(heap)
        b = functions.get(key)
        if b is None:
            continue
        hit = find_refining_split(b, mesh)
        if hit is None:
            continue
        direction, pos, _deficit = hit
        (_, child1), (_, child2) = insert_knot(b, direction, pos)
        del functions[key]
        changed = True
        for child in (child1, child2):
            k = child.key
            old = functions.get(k)
            if old is None:
                functions[k] = child
                heapq.heappush(heap, k)
            else:
                functions[k] = replace(old, weight=old.weight + child.weight)
    return changed


def _overlapping_keys(functions: dict, direction: int, pos, lo, hi) -> list:
    """Functions whose support the segment (direction, pos, [lo, hi]) crosses."""
    out = []
    for key, b in functions.items():
        vec = b.knots(direction)
        cross = b.knots(2 if direction == 1 else 1)
        if vec[0] < pos < vec[-1] and cross[0] < hi and lo < cross[-1]:
            out.append(key)
    return out


def _uncovered_gaps(mesh: Mesh, direction: int, pos, lo, hi):
    """Subintervals of [lo, hi] not covered by runs at (direction, pos)."""
    gaps = []
    current = lo
    for r_lo, r_hi, _ in mesh.runs_at(direction, pos):
        if r_hi <= current or r_lo >= hi:
            continue
        if r_lo > current:
            gaps.append((current, r_lo))
        if r_hi > current:
            current = r_hi
        if current >= hi:
            break
    if current < hi:
        gaps.append((current, hi))
    return gaps


def _insert_pieces(space: LRSpace, pieces) -> LRSpace:
    """Insert meshline pieces (gap-decomposed against the evolving mesh)
    and run one generation fixpoint.  ``pieces`` are (direction, pos,
    lo, hi) requests at multiplicity one."""
    mesh = space.mesh
    inserted = []
    for direction, pos, lo, hi in sorted(set(pieces)):
        for g_lo, g_hi in _uncovered_gaps(mesh, direction, pos, lo, hi):
            mesh = insert_split(mesh, Split(direction, pos, g_lo, g_hi, 1))
            inserted.append((direction, pos, g_lo, g_hi))
    if not inserted:
        return space
    functions = dict(space.functions)
    dirty: set = set()
    for direction, pos, g_lo, g_hi in inserted:
        dirty.update(_overlapping_keys(space.functions, direction, pos, g_lo, g_hi))
    _fixpoint(mesh, functions, dirty)
    return LRSpace(mesh, functions)


def apply_split(space: LRSpace, split: Split) -> LRSpace:
    """Insert one split and regenerate.  The split must be insertable on
    the mesh and must refine at least one function."""
    mesh = insert_split(space.mesh, split)
    functions = dict(space.functions)
    dirty = _overlapping_keys(functions, split.direction, split.fixed, split.lo, split.hi)
    if not _fixpoint(mesh, functions, dirty):
        raise SpaceError(
            f"split at direction-{split.direction} position {split.fixed} "
            f"refines no function in the space"
        )
    return LRSpace(mesh, functions)


def structured_refine(space: LRSpace, marked) -> LRSpace:
    """Halve every knot span of the marked functions across their supports.

    For each marked function and each direction, meshlines are inserted
    at the midpoints of consecutive distinct knots, spanning the full
    support cross-extent, at multiplicity one.  Only the uncovered gaps
    are added; one generation fixpoint then restores minimal support.
    """
    marked_keys = list(marked)
    if not marked_keys:
        raise SpaceError("no functions marked for refinement")
    pieces = []
    for key in marked_keys:
        b = space.functions.get(key if isinstance(key, tuple) else key.key)
        if b is None:
            raise SpaceError(f"marked function {key} is not in the space")
        for direction in (1, 2):
            vec = b.knots(direction)
            cross = b.knots(2 if direction == 1 else 1)
            distinct = sorted(set(vec))
            for a, c in zip(distinct, distinct[1:]):
                pieces.append((direction, midpoint(a, c), cross[0], cross[-1]))
    refined = _insert_pieces(space, pieces)
    if refined is space:
        raise SpaceError("marked functions are already refined (no new meshlines)")
    return refined


# -- diagnostics ------------------------------------------------------------


def element_support_count(space: LRSpace, element: Element) -> int:
    """Number of functions whose support contains the element."""
    rect = element.rect
    return sum(1 for b in space.functions.values() if b.support.contains_rect(rect))


def _bounds_arrays(functions: dict, keys) -> np.ndarray:
    out = np.empty((len(keys), 4))
    for i, key in enumerate(keys):
        out[i] = functions[key].support.float_bounds()
    return out


def element_support_table(space: LRSpace):
    """Per element, the indices (into ``space.sorted_keys()``) of the
    functions supported on it.  Vectorized with chunking so it stays
    usable on large tensor spaces."""
    keys = space.sorted_keys()
    fb = _bounds_arrays(space.functions, keys)
    elems = space.mesh.elements()
    eb = np.array([e.rect.float_bounds() for e in elems])
    table = []
    chunk = max(1, int(4e6 // max(len(keys), 1)))
    for start in range(0, len(elems), chunk):
        sub = eb[start : start + chunk]
        mask = (
            (fb[None, :, 0] <= sub[:, None, 0])
            & (fb[None, :, 1] >= sub[:, None, 1])
            & (fb[None, :, 2] <= sub[:, None, 2])
            & (fb[None, :, 3] >= sub[:, None, 3])
        )
        for row in mask:
            table.append(np.flatnonzero(row))
    return keys, table


def is_locally_linearly_independent(space: LRSpace) -> bool:
    """True when every element carries exactly (p1+1)(p2+1) functions.

    On open LR meshes this characterizes local linear independence of
    the generated functions.
    """
    p1, p2 = space.mesh.bidegree
    expected = (p1 + 1) * (p2 + 1)
    _, table = element_support_table(space)
    return all(len(row) == expected for row in table)


def evaluate_space(space: LRSpace, coefficients: dict, xs, ys) -> np.ndarray:
    """Evaluate ``sum_k c_k B_k`` (unweighted basis) on a grid.

    ``xs`` and ``ys`` are sorted 1-D arrays; the result has shape
    ``(len(xs), len(ys))`` with entry [i, j] at point (xs[i], ys[j]).
    Evaluation is half-open with closure on the domain's top edges.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    out = np.zeros((xs.size, ys.size))
    dom = space.mesh.domain
    top_x, top_y = float(dom.x_max), float(dom.y_max)
    for key in space.sorted_keys():
        c = coefficients[key]
        if c == 0.0:
            continue
        b = space.functions[key]
        x0, x1, y0, y1 = b.support.float_bounds()
        i0 = int(np.searchsorted(xs, x0, side="left"))
        i1 = int(np.searchsorted(xs, x1, side="right"))
        j0 = int(np.searchsorted(ys, y0, side="left"))
        j1 = int(np.searchsorted(ys, y1, side="right"))
        if i0 >= i1 or j0 >= j1:
            continue
        vx = univariate_values(b.xknots, xs[i0:i1], close_at=top_x if x1 == top_x else None)
        vy = univariate_values(b.yknots, ys[j0:j1], close_at=top_y if y1 == top_y else None)
        out[i0:i1, j0:j1] += c * np.outer(vx, vy)
    return out


def partition_of_unity_defect(space: LRSpace, samples: int = 64, use_weights: bool = True) -> float:
    """``max |1 - sum_k c_k B_k|`` on a uniform grid, with ``c_k`` the
    stored weights or all ones."""
    dom = space.mesh.domain
    xs = np.linspace(float(dom.x_min), float(dom.x_max), samples)
    ys = np.linspace(float(dom.y_min), float(dom.y_max), samples)
    if use_weights:
        coeffs = {k: float(b.weight) for k, b in space.functions.items()}
    else:
        coeffs = {k: 1.0 for k in space.functions}
    total = evaluate_space(space, coeffs, xs, ys)
    return float(np.max(np.abs(total - 1.0)))


def collocation_points(space: LRSpace, seed: int = 0) -> np.ndarray:
    """Default collocation points: per element, the midpoint plus four
    jittered interior points, topped up until the count exceeds the
    function count with margin.  Deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    elems = space.mesh.elements()
    need = max(space.n_functions, math.ceil(1.2 * space.n_functions))
    per_element = 5
    if per_element * len(elems) < need:
        per_element = math.ceil(need / len(elems))
    pts = []
    for e in elems:
        x0, x1, y0, y1 = e.rect.float_bounds()
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        wx, wy = x1 - x0, y1 - y0
        pts.append((cx, cy))
        for _ in range(per_element - 1):
            u, v = rng.uniform(-0.4, 0.4, size=2)
            pts.append((cx + u * wx * 0.8, cy + v * wy * 0.8))
    return np.array(pts)


def collocation_rank(space: LRSpace, points=None, seed: int = 0) -> int:
    """Numerical rank of the collocation matrix of the (unweighted)
    functions at the points; singular values below ``1e-9 * sigma_max``
    count as zero.  Positive weights only rescale columns, so the rank
    matches the weighted basis."""
    if points is None:
        points = collocation_points(space, seed=seed)
    points = np.asarray(points, dtype=float)
    if points.shape[0] < space.n_functions:
        raise SpaceError(
            f"{points.shape[0]} collocation points cannot resolve "
            f"{space.n_functions} functions"
        )
    a = np.empty((points.shape[0], space.n_functions))
    for j, key in enumerate(space.sorted_keys()):
        b = space.functions[key]
        vx = univariate_values(b.xknots, points[:, 0], close_at=float(b.xknots[-1]))
        vy = univariate_values(b.yknots, points[:, 1], close_at=float(b.yknots[-1]))
        a[:, j] = vx * vy
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > 1e-9 * s[0]))
