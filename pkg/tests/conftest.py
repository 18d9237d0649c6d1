"""Shared fixtures: hand-checked reference meshes and spaces.

The geometric fixtures are small meshes whose element counts, function
counts, minimal-support verdicts, nesting relations and collocation ranks
were worked out by hand; the tests pin those numbers.  Coordinates are
integers or dyadic fractions so every constructor is exact.
"""
from __future__ import annotations

import random

import pytest

from lrbsplines.dyadic import dyadic
from lrbsplines.mesh import Mesh, Rect, Split, _build_mesh, make_initial_mesh
from lrbsplines.space import (
    LRSpace,
    apply_split,
    initial_space,
    structured_refine,
)
from lrbsplines.refine import n2s_pipeline


def build_mesh(bounds, bidegree, lines, *, require_open=True, boundary=True):
    """Assemble a mesh from (direction, fixed, lo, hi[, mult]) tuples.

    Coerces plain numbers to dyadic coordinates and, when ``boundary``
    is set, adds the four domain edges at full multiplicity so fixtures
    only have to list their interior lines.
    """
    domain = Rect.from_bounds(bounds)
    p1, p2 = bidegree
    items = []
    for line in lines:
        direction, fixed, lo, hi = line[:4]
        mult = line[4] if len(line) > 4 else 1
        items.append((direction, dyadic(fixed), dyadic(lo), dyadic(hi), mult))
    if boundary:
        x0, x1, y0, y1 = bounds
        items.append((1, dyadic(x0), dyadic(y0), dyadic(y1), p1 + 1))
        items.append((1, dyadic(x1), dyadic(y0), dyadic(y1), p1 + 1))
        items.append((2, dyadic(y0), dyadic(x0), dyadic(x1), p2 + 1))
        items.append((2, dyadic(y1), dyadic(x0), dyadic(x1), p2 + 1))
    return _build_mesh(domain, bidegree, items, require_open=require_open)


def key_of(xvals, yvals):
    """A function key from plain numeric knot tuples."""
    return (
        tuple(dyadic(v) for v in xvals),
        tuple(dyadic(v) for v in yvals),
    )


def apply_splits(space, quads):
    """Fold ``apply_split`` over (direction, fixed, lo, hi) tuples."""
    for direction, fixed, lo, hi in quads:
        space = apply_split(space, Split.make(direction, fixed, lo, hi))
    return space


def flood_fill_elements(mesh: Mesh):
    """Brute-force element extraction used as an oracle.

    Builds the fine grid of all line positions, merges neighbouring fine
    cells whose shared edge is not covered by a meshline, checks each
    connected component is a rectangle, and returns the set of rectangle
    corner tuples.
    """
    xs = sorted(mesh.positions(1))
    ys = sorted(mesh.positions(2))
    nx, ny = len(xs) - 1, len(ys) - 1

    def covered(direction, pos, lo, hi):
        for r_lo, r_hi, _ in mesh.runs_at(direction, pos):
            if r_lo <= lo and hi <= r_hi:
                return True
        return False

    parent = list(range(nx * ny))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for i in range(nx):
        for j in range(ny):
            if i + 1 < nx and not covered(1, xs[i + 1], ys[j], ys[j + 1]):
                union(i * ny + j, (i + 1) * ny + j)
            if j + 1 < ny and not covered(2, ys[j + 1], xs[i], xs[i + 1]):
                union(i * ny + j, i * ny + j + 1)

    groups = {}
    for i in range(nx):
        for j in range(ny):
            groups.setdefault(find(i * ny + j), []).append((i, j))
    rects = set()
    for cells in groups.values():
        i_lo = min(c[0] for c in cells)
        i_hi = max(c[0] for c in cells)
        j_lo = min(c[1] for c in cells)
        j_hi = max(c[1] for c in cells)
        assert len(cells) == (i_hi - i_lo + 1) * (j_hi - j_lo + 1), (
            "flood fill produced a non-rectangular element"
        )
        rects.add((xs[i_lo], xs[i_hi + 1], ys[j_lo], ys[j_hi + 1]))
    return rects


def random_subset_marker(rng, fraction=0.25):
    """A marker selecting a random nonempty subset of the space.

    The subset is drawn per space via a shared ``random.Random``; the
    pipeline calls the marker once per function, so the draw happens on
    first use per space (functions are visited in sorted-key order).
    """
    chosen = {}

    def marker(b):
        key = b.key
        if key not in chosen:
            chosen[key] = rng.random() < fraction
        return chosen[key]

    return marker


def random_pipeline_space(seed, iterations=2, n_cells=2, bidegree=(2, 2)):
    """A small space produced by a randomized refinement pipeline run."""
    rng = random.Random(seed)
    space = initial_space(make_initial_mesh((0, 1, 0, 1), bidegree, n_cells))
    for i in range(1, iterations + 1):
        keys = space.sorted_keys()
        n_mark = rng.randint(1, max(1, len(keys) // 6))
        marked = set(rng.sample(keys, n_mark))
        space, _ = n2s_pipeline(
            space, lambda b: b.key in marked, 1, start_index=i
        )
    return space


# -- illustrative fixtures ---------------------------------------------------


@pytest.fixture(scope="session")
def mixed_mesh():
    """A (2,2) mesh on [0,10]^2 with several partial lines; used for
    support and minimal-support checks."""
    return build_mesh(
        (0, 10, 0, 10),
        (2, 2),
        [
            (2, 2, 0, 10),
            (2, 8, 0, 10),
            (1, 6, 0, 10),
            (1, 8, 0, 10),
            (2, 6, 0, 8),
            (1, 2, 2, 10),
            (2, 7, 0, 6),
            (1, 4, 0, 8),
            (1, 5, 2, 10),
        ],
    )


@pytest.fixture(scope="session")
def rank_deficient_space():
    """A (2,2) space on [1,9]x[1,7] whose collocation matrix has rank
    n - 1: locally linearly *dependent* despite spanning checks passing
    elementwise.  Lines are inserted full-width first so every partial
    span decomposes into whole element traversals."""
    space = initial_space(
        _build_mesh(
            Rect.from_bounds((1, 9, 1, 7)),
            (2, 2),
            [
                (1, dyadic(1), dyadic(1), dyadic(7), 3),
                (1, dyadic(9), dyadic(1), dyadic(7), 3),
                (2, dyadic(1), dyadic(1), dyadic(9), 3),
                (2, dyadic(7), dyadic(1), dyadic(9), 3),
            ],
        )
    )
    return apply_splits(
        space,
        [
            (1, 2, 1, 7),
            (1, 3, 1, 7),
            (1, 6, 1, 7),
            (1, 8, 1, 7),
            (2, 2, 1, 9),
            (2, 4, 1, 9),
            (2, 6, 1, 9),
            (2, 3, 3, 9),
            (1, 7, 2, 6),
            (2, 5, 1, 7),
            (1, 4, 1, 5),
            (1, 5, 2, 7),
        ],
    )


@pytest.fixture(scope="session")
def two_stage_dependent_space():
    """A (4,4) space on [0,9]^2 that loses local linear independence
    after two structured refinements: the first stage splits a mirrored
    pair of coarse functions, the second splits two of their fine
    children whose supports overlap near the centre, and the resulting
    400 functions have collocation rank 398."""
    space = initial_space(make_initial_mesh((0, 9, 0, 9), (4, 4), 9))
    stage_one = [
        key_of((0, 1, 2, 3, 4, 5), (4, 5, 6, 7, 8, 9)),
        key_of((4, 5, 6, 7, 8, 9), (0, 1, 2, 3, 4, 5)),
    ]
    space = structured_refine(space, stage_one)
    stage_two = [
        key_of((2.5, 3, 3.5, 4, 4.5, 5), (4, 4.5, 5, 5.5, 6, 6.5)),
        key_of((4, 4.5, 5, 5.5, 6, 6.5), (2.5, 3, 3.5, 4, 4.5, 5)),
    ]
    for key in stage_two:
        assert key in space.functions
    return structured_refine(space, stage_two)


@pytest.fixture(scope="session")
def boundary_mult_mesh():
    """A non-open (2,2) mesh on [0,6]^2 (left edge multiplicity 2) used
    for the nestedness definitions."""
    return build_mesh(
        (0, 6, 0, 6),
        (2, 2),
        [
            (1, 0, 0, 6, 2),
            (1, 6, 0, 6, 3),
            (2, 0, 0, 6, 3),
            (2, 6, 0, 6, 3),
            (1, 2, 0, 6),
            (1, 4, 0, 6),
            (2, 2, 0, 6),
            (2, 4, 0, 6),
            (1, 3, 0, 4),
            (2, 3, 0, 4),
        ],
        require_open=False,
        boundary=False,
    )


@pytest.fixture(scope="session")
def expansion_fixture():
    """Space on [0,6]^2 with one wide function nested over four finer
    ones; one-directional expansion must insert exactly x=1 and x=3 over
    the full height."""
    space = initial_space(make_initial_mesh((0, 6, 0, 6), (2, 2), 3))
    return apply_splits(
        space,
        [(1, 1, 2, 6), (1, 3, 2, 6), (2, 3, 0, 4), (2, 5, 0, 4)],
    )


@pytest.fixture(scope="session")
def running_example():
    """The two-stage refinement of the 4x4 (2,2) space on [0,1]^2:
    structured-only stages (dependent at stage two) and the pipeline
    stages (independent).  Returns a dict of the four spaces."""
    base = initial_space(make_initial_mesh((0, 1, 0, 1), (2, 2), 4))
    key1 = key_of((0, 0.25, 0.5, 0.75), (0.25, 0.5, 0.75, 1))
    key2 = key_of((0.25, 0.375, 0.5, 0.625), (0.375, 0.5, 0.625, 0.75))

    stage_b = structured_refine(base, [key1])
    stage_d = structured_refine(stage_b, [key2])

    pipe_1, trace_1 = n2s_pipeline(
        base, lambda b: b.key == key1, 1, start_index=1
    )
    pipe_2, trace_2 = n2s_pipeline(
        pipe_1, lambda b: b.key == key2, 1, start_index=2
    )
    return {
        "base": base,
        "key1": key1,
        "key2": key2,
        "structured_1": stage_b,
        "structured_2": stage_d,
        "pipeline_1": pipe_1,
        "pipeline_2": pipe_2,
        "trace_1": trace_1,
        "trace_2": trace_2,
    }
