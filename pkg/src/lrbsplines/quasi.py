"""Polynomial-reproducing quasi-interpolation on LR B-spline spaces.

Each coefficient is computed locally: a function's knot vectors span a
small tensor space once the boundary knots are raised to full
multiplicity, and interpolating the target at the Greville points of
that local space determines the coefficient of the original function.
The collocation matrix is a tensor product of two univariate ones, each
nonsingular because Greville points interlace their knot vector, so the
local problem is always solvable.  Every local problem reproduces
polynomials up to the bidegree, hence so does the assembled operator;
combined with the unweighted basis this makes the scheme exact on
polynomials on spaces with unit weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bspline import TensorBSpline, univariate_values
from .dyadic import DyadicCoord
from .mesh import Mesh, _build_mesh, make_initial_mesh
from .refine import central_span
from .space import LRSpace, SpaceError, evaluate_space, initial_space

__all__ = [
    "LocalTensorSpace",
    "local_tensor_space",
    "tensor_qi_coefficient",
    "lr_qi",
    "qi_max_error",
    "three_peaks",
    "three_peaks_marker",
    "three_peaks_spaces",
    "tensor_space_for_level",
]


@dataclass(frozen=True)
class LocalTensorSpace:
    """The tensor space spanned by one function's knots, boundary raised
    to full multiplicity.  ``origin`` keys the function it was built for,
    which is always among ``basis``."""

    origin: tuple
    mesh: Mesh
    basis: tuple[TensorBSpline, ...]


def _raised_vector(vec, degree: int) -> list[DyadicCoord]:
    """Global knot vector over the distinct values of ``vec`` with the
    boundary multiplicities raised to ``degree + 1``."""
    out: list[DyadicCoord] = [vec[0]] * (degree + 1)
    for v in vec[1:]:
        if v != vec[0] and v != vec[-1]:
            out.append(v)
    out.extend([vec[-1]] * (degree + 1))
    return out


def local_tensor_space(b: TensorBSpline) -> LocalTensorSpace:
    """Tensor space on the support of ``b`` containing ``b`` itself."""
    p1, p2 = b.degrees
    gx = _raised_vector(b.xknots, p1)
    gy = _raised_vector(b.yknots, p2)
    domain = b.support

    def dedup(vec):
        out = []
        for v in vec:
            if not out or out[-1][0] != v:
                out.append([v, 1])
            else:
                out[-1][1] += 1
        return out

    items = []
    for x, mult in dedup(gx):
        items.append((1, x, domain.y_min, domain.y_max, mult))
    for y, mult in dedup(gy):
        items.append((2, y, domain.x_min, domain.x_max, mult))
    mesh = _build_mesh(domain, (p1, p2), items)

    basis = []
    for i in range(len(gx) - p1 - 1):
        xv = tuple(gx[i : i + p1 + 2])
        for j in range(len(gy) - p2 - 1):
            yv = tuple(gy[j : j + p2 + 2])
            basis.append(TensorBSpline(xv, yv))
    lts = LocalTensorSpace(b.key, mesh, tuple(basis))
    if all(f.key != b.key for f in basis):
        raise SpaceError(f"local tensor space does not contain {b.key}")
    return lts


def _univariate_collocation(windows, degree: int, close_at: float):
    """Greville nodes and collocation matrix of one direction's local basis.

    ``windows`` lists the consecutive length-(degree+2) knot windows of
    the raised vector.  Each window's Greville point is the mean of its
    interior knots; these interlace the knots, so the matrix is
    nonsingular.
    """
    nodes = np.array(
        [
            sum(float(v) for v in vec[1 : degree + 1]) / degree
            for vec in windows
        ]
    )
    matrix = np.empty((len(windows), len(windows)))
    for j, vec in enumerate(windows):
        matrix[:, j] = univariate_values(vec, nodes, close_at=close_at)
    return nodes, matrix


def tensor_qi_coefficient(lts: LocalTensorSpace, f) -> float:
    """Coefficient of the origin function for interpolating ``f``.

    Interpolates ``f`` at the tensor grid of Greville points of the
    local space and reads off the origin's coefficient.  The collocation
    matrix factors into two univariate ones, solved back to back.
    """
    p1, p2 = lts.mesh.bidegree
    origin_x, origin_y = lts.origin
    gx = _raised_vector(list(origin_x), p1)
    gy = _raised_vector(list(origin_y), p2)
    x_windows = [tuple(gx[i : i + p1 + 2]) for i in range(len(gx) - p1 - 1)]
    y_windows = [tuple(gy[j : j + p2 + 2]) for j in range(len(gy) - p2 - 1)]
    dom = lts.mesh.domain
    xs, mx = _univariate_collocation(x_windows, p1, float(dom.x_max))
    ys, my = _univariate_collocation(y_windows, p2, float(dom.y_max))

    grid_x, grid_y = np.meshgrid(xs, ys, indexing="ij")
    values = np.asarray(f(grid_x, grid_y), dtype=float)
    if values.shape != (len(xs), len(ys)):
        raise SpaceError(
            f"interpolation data has shape {values.shape}, "
            f"expected {(len(xs), len(ys))}"
        )
    try:
        coeffs = np.linalg.solve(mx, values)
        coeffs = np.linalg.solve(my, coeffs.T).T
    except np.linalg.LinAlgError as exc:  # pragma: no cover - Greville
        raise SpaceError(f"singular local collocation matrix: {exc}") from exc
    return float(coeffs[x_windows.index(origin_x), y_windows.index(origin_y)])


def lr_qi(space: LRSpace, f) -> dict:
    """Quasi-interpolation coefficients for every function of the space.

    The result pairs with the *unweighted* basis: evaluate with
    ``evaluate_space(space, coefficients, ...)``.
    """
    return {
        key: tensor_qi_coefficient(local_tensor_space(b), f)
        for key, b in sorted(space.functions.items())
    }


def qi_max_error(space: LRSpace, coefficients: dict, f, grid: int = 150) -> float:
    """Max pointwise error of the quasi-interpolant on a uniform grid."""
    dom = space.mesh.domain
    xs = np.linspace(float(dom.x_min), float(dom.x_max), grid)
    ys = np.linspace(float(dom.y_min), float(dom.y_max), grid)
    u = evaluate_space(space, coefficients, xs, ys)
    grid_x, grid_y = np.meshgrid(xs, ys, indexing="ij")
    return float(np.max(np.abs(u - np.asarray(f(grid_x, grid_y), dtype=float))))


# -- the three-peaks benchmark ----------------------------------------------

_PEAKS = ((0.3, 0.3), (-0.3, -0.3), (0.0, 0.0))


def three_peaks(x, y):
    """Sum of three sharp exponential peaks on [-1, 1]^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = 0.0
    for px, py in _PEAKS:
        out = out + np.exp(-np.sqrt((10 * x - 10 * px) ** 2 + (10 * y - 10 * py) ** 2))
    return (2.0 / 3.0) * out


def three_peaks_marker(b: TensorBSpline) -> bool:
    """Marker: the half-open central knot span contains one of the peaks."""
    x0, x1, y0, y1 = central_span(b)
    return any(x0 <= px < x1 and y0 <= py < y1 for px, py in _PEAKS)


def tensor_space_for_level(level: int, bidegree=(2, 2), bounds=(-1, 1, -1, 1)) -> LRSpace:
    """Uniform tensor space whose smallest elements match the given level
    (cell width ``2**-level`` on the default domain)."""
    n = 2 ** (level + 1)
    return initial_space(make_initial_mesh(bounds, bidegree, (n, n)))


def three_peaks_spaces(
    max_level: int,
    bidegree=(2, 2),
    *,
    parity: str = "odd-vertical",
    expansion: str = "one-directional",
) -> list[LRSpace]:
    """Adaptive spaces for levels 1..max_level of the peaks benchmark.

    Level 1 is the open 4x4 tensor space on [-1, 1]^2; each further level
    runs one pipeline iteration marking the functions whose support
    contains a peak.  Iteration indices continue across levels, so the
    expansion direction alternates exactly as in one long run.
    """
    from .refine import n2s_pipeline

    space = initial_space(make_initial_mesh((-1, 1, -1, 1), bidegree, (4, 4)))
    spaces = [space]
    for level in range(2, max_level + 1):
        space, _ = n2s_pipeline(
            space,
            three_peaks_marker,
            1,
            parity=parity,
            expansion=expansion,
            start_index=level - 1,
        )
        spaces.append(space)
    return spaces
