"""Isogeometric Galerkin discretization of the Poisson problem.

Solves ``-Δu = f`` on the mesh domain (identity geometry) with Dirichlet
data, using the space's functions as the basis.  Assembly requires local
linear independence -- every element must carry exactly (p1+1)(p2+1)
functions -- which the non-nested refinement strategy guarantees, and
which also makes all weights one, so the unweighted basis is used
throughout.  Boundary coefficients come from univariate Greville-point
interpolation of the trace, edge by edge; element integrals use
(p+1)-point Gauss--Legendre per direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss
from scipy.sparse.linalg import spsolve

from .bspline import univariate_derivatives, univariate_values
from .mesh import make_initial_mesh
from .refine import central_span, n2s_pipeline
from .space import (
    LRSpace,
    SpaceError,
    element_support_table,
    evaluate_space,
    initial_space,
)

__all__ = [
    "NumericsError",
    "GalerkinSystem",
    "ErrorReport",
    "assemble",
    "impose_dirichlet",
    "solve",
    "error_norms",
    "layer_solution",
    "layer_rhs",
    "layer_marker",
    "mark_by_layer",
    "adaptive_solve",
    "LAYER_CENTER",
    "LAYER_RADIUS",
]


class NumericsError(RuntimeError):
    """A linear-algebra step failed its accuracy contract."""


@dataclass
class GalerkinSystem:
    """Stiffness matrix and load vector over the space's sorted keys.

    ``dirichlet`` maps boundary function keys to prescribed coefficients
    once :func:`impose_dirichlet` has run.
    """

    keys: tuple
    stiffness: sp.csr_matrix
    load: np.ndarray
    dirichlet: dict | None = None


def _composite_rule(lo: float, hi: float, nodes, weights, resolution):
    """Gauss points and weights on [lo, hi], subdivided so each sub-cell
    is no wider than ``resolution`` (one cell when resolution is None)."""
    if resolution is None:
        cells = 1
    else:
        cells = max(1, math.ceil((hi - lo) / resolution - 1e-12))
    edges = np.linspace(lo, hi, cells + 1)
    half = 0.5 * np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    pts = (np.outer(half, nodes) + mids[:, None]).ravel()
    wts = np.outer(half, weights).ravel()
    return pts, wts


def assemble(space: LRSpace, f, *, load_resolution: float | None = None) -> GalerkinSystem:
    """Galerkin stiffness and load for ``-Δu = f`` on the space.

    The stiffness uses (p+1)^2 Gauss-Legendre points per element, which
    integrates its piecewise-polynomial entries exactly.  The load
    integrand carries ``f`` and is generally not polynomial; when
    ``load_resolution`` is given, the load integral subdivides each
    element into sub-cells no wider than that resolution so sharp data
    is integrated honestly rather than sampled at a handful of points.

    Rejects spaces with overloaded elements (more supported functions
    than (p1+1)(p2+1)): assembly is defined for locally linearly
    independent spaces only.
    """
    p1, p2 = space.mesh.bidegree
    expected = (p1 + 1) * (p2 + 1)
    keys, table = element_support_table(space)
    for row, element in zip(table, space.mesh.elements()):
        if len(row) != expected:
            raise SpaceError(
                f"element {element.rect} carries {len(row)} functions, "
                f"expected {expected}; assembly requires local linear "
                f"independence"
            )
    functions = [space.functions[k] for k in keys]

    gauss_x, weights_x = leggauss(p1 + 1)
    gauss_y, weights_y = leggauss(p2 + 1)
    n = len(keys)
    load = np.zeros(n)
    rows_acc, cols_acc, vals_acc = [], [], []

    for row, element in zip(table, space.mesh.elements()):
        x0, x1, y0, y1 = element.rect.float_bounds()
        hx, hy = 0.5 * (x1 - x0), 0.5 * (y1 - y0)
        xs = x0 + hx * (gauss_x + 1.0)
        ys = y0 + hy * (gauss_y + 1.0)
        wq = np.outer(weights_x * hx, weights_y * hy).ravel()

        n_loc = len(row)
        vals = np.empty((n_loc, xs.size * ys.size))
        grad_x = np.empty_like(vals)
        grad_y = np.empty_like(vals)
        for a, idx in enumerate(row):
            b = functions[idx]
            vx = univariate_values(b.xknots, xs)
            vy = univariate_values(b.yknots, ys)
            dx = univariate_derivatives(b.xknots, xs)
            dy = univariate_derivatives(b.yknots, ys)
            vals[a] = np.outer(vx, vy).ravel()
            grad_x[a] = np.outer(dx, vy).ravel()
            grad_y[a] = np.outer(vx, dy).ravel()

        local = (grad_x * wq) @ grad_x.T + (grad_y * wq) @ grad_y.T

        if load_resolution is None:
            grid_x, grid_y = np.meshgrid(xs, ys, indexing="ij")
            fq = np.asarray(f(grid_x, grid_y), dtype=float).ravel()
            load[row] += vals @ (wq * fq)
        else:
            lx, lwx = _composite_rule(x0, x1, gauss_x, weights_x, load_resolution)
            ly, lwy = _composite_rule(y0, y1, gauss_y, weights_y, load_resolution)
            lw = np.outer(lwx, lwy).ravel()
            grid_x, grid_y = np.meshgrid(lx, ly, indexing="ij")
            fq = np.asarray(f(grid_x, grid_y), dtype=float).ravel()
            lvals = np.empty((n_loc, lx.size * ly.size))
            for a, idx in enumerate(row):
                b = functions[idx]
                lvals[a] = np.outer(
                    univariate_values(b.xknots, lx), univariate_values(b.yknots, ly)
                ).ravel()
            load[row] += lvals @ (lw * fq)

        rows_acc.append(np.repeat(row, n_loc))
        cols_acc.append(np.tile(row, n_loc))
        vals_acc.append(local.ravel())

    stiffness = sp.coo_matrix(
        (np.concatenate(vals_acc), (np.concatenate(rows_acc), np.concatenate(cols_acc))),
        shape=(n, n),
    ).tocsr()
    stiffness = (stiffness + stiffness.T) * 0.5
    return GalerkinSystem(tuple(keys), stiffness, load)


def _edge_descriptors(space: LRSpace):
    """The four domain edges: (direction of the fixed coordinate, value,
    is_lower_side), in a fixed processing order."""
    dom = space.mesh.domain
    return (
        (1, dom.x_min, True),
        (1, dom.x_max, False),
        (2, dom.y_min, True),
        (2, dom.y_max, False),
    )


def impose_dirichlet(system: GalerkinSystem, space: LRSpace, u_dirichlet) -> GalerkinSystem:
    """Interpolate the boundary data and pin the edge functions.

    Per edge, the functions with full knot multiplicity there form a
    univariate B-spline basis in the running coordinate; their
    coefficients interpolate ``u_dirichlet`` at the Greville points.  A
    corner function's first Greville point is the corner itself, so the
    two edges sharing it assign the same value.  Returns a new system
    with the ``dirichlet`` map filled.
    """
    p1, p2 = space.mesh.bidegree
    dom = space.mesh.domain
    dirichlet: dict = {}
    for direction, value, is_lower in _edge_descriptors(space):
        degree = p1 if direction == 1 else p2
        cross_top = float(dom.y_max if direction == 1 else dom.x_max)
        edge = []
        for key in space.sorted_keys():
            vec = key[0] if direction == 1 else key[1]
            pinned = vec[degree] == value if is_lower else vec[1] == value
            if pinned:
                edge.append(key)
        if not edge:
            raise SpaceError(f"no functions pinned to the edge at {value}")
        edge.sort(key=lambda k: k[1] if direction == 1 else k[0])
        cross_vectors = [k[1] if direction == 1 else k[0] for k in edge]
        nodes = np.array(
            [
                sum(float(v) for v in vec[1 : degree + 1]) / degree
                for vec in cross_vectors
            ]
        )
        matrix = np.empty((len(edge), len(edge)))
        for j, vec in enumerate(cross_vectors):
            matrix[:, j] = univariate_values(vec, nodes, close_at=cross_top)
        if direction == 1:
            rhs = np.asarray(u_dirichlet(float(value) * np.ones_like(nodes), nodes), dtype=float)
        else:
            rhs = np.asarray(u_dirichlet(nodes, float(value) * np.ones_like(nodes)), dtype=float)
        coeffs = np.linalg.solve(matrix, rhs)
        for key, c in zip(edge, coeffs):
            dirichlet[key] = float(c)
    return GalerkinSystem(system.keys, system.stiffness, system.load, dirichlet)


def solve(system: GalerkinSystem) -> dict:
    """Solve the reduced symmetric system; returns key -> coefficient.

    Verifies the relative residual of the interior solve is at most
    1e-10 and raises :class:`NumericsError` otherwise.
    """
    if system.dirichlet is None:
        raise SpaceError("impose Dirichlet data before solving")
    keys = system.keys
    index = {k: i for i, k in enumerate(keys)}
    coeffs = np.zeros(len(keys))
    pinned = np.zeros(len(keys), dtype=bool)
    for key, value in system.dirichlet.items():
        coeffs[index[key]] = value
        pinned[index[key]] = True
    interior = np.flatnonzero(~pinned)
    boundary = np.flatnonzero(pinned)

    k_ii = system.stiffness[interior][:, interior]
    k_ib = system.stiffness[interior][:, boundary]
    rhs = system.load[interior] - k_ib @ coeffs[boundary]
    u = spsolve(k_ii.tocsc(), rhs)

    reference = np.linalg.norm(rhs)
    residual = np.linalg.norm(k_ii @ u - rhs)
    # "not <=" rather than ">" so a NaN residual (singular matrix) also raises.
    if not residual <= 1e-10 * max(reference, 1.0):
        raise NumericsError(
            f"interior solve residual {residual:.3e} exceeds tolerance "
            f"relative to {reference:.3e}"
        )
    coeffs[interior] = u
    return {key: float(c) for key, c in zip(keys, coeffs)}


@dataclass
class ErrorReport:
    """Discretization-error summary on a sampling grid."""

    n_functions: int
    linf: float
    l2: float


def error_norms(space: LRSpace, coefficients: dict, u_exact, grid=(500, 500)) -> ErrorReport:
    """Max and cell-averaged L2 errors of ``sum c_k B_k`` on a uniform grid."""
    nx, ny = (grid, grid) if isinstance(grid, int) else grid
    dom = space.mesh.domain
    xs = np.linspace(float(dom.x_min), float(dom.x_max), nx)
    ys = np.linspace(float(dom.y_min), float(dom.y_max), ny)
    u_h = evaluate_space(space, coefficients, xs, ys)
    grid_x, grid_y = np.meshgrid(xs, ys, indexing="ij")
    err = u_h - np.asarray(u_exact(grid_x, grid_y), dtype=float)
    area = float(dom.x_max - dom.x_min) * float(dom.y_max - dom.y_min)
    return ErrorReport(
        n_functions=space.n_functions,
        linf=float(np.max(np.abs(err))),
        l2=float(math.sqrt(np.mean(err**2) * area)),
    )


# -- the interior-layer benchmark -------------------------------------------

LAYER_CENTER = (1.25, -0.25)
LAYER_RADIUS = math.pi / 3
_LAYER_SLOPE = 100.0


def layer_solution(x, y):
    """Sharp circular interior layer: ``atan(100 (r - pi/3))``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x - LAYER_CENTER[0], y - LAYER_CENTER[1])
    return np.arctan(_LAYER_SLOPE * (r - LAYER_RADIUS))


def layer_rhs(x, y):
    """``-Δ`` of :func:`layer_solution` (the layer circle misses the
    domain corner region, so ``r`` stays well away from zero)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x - LAYER_CENTER[0], y - LAYER_CENTER[1])
    s = _LAYER_SLOPE
    t = s * (r - LAYER_RADIUS)
    du = s / (1.0 + t**2)
    d2u = -2.0 * s**2 * t / (1.0 + t**2) ** 2
    return -(d2u + du / r)


def layer_marker(b) -> bool:
    """Marker: the central knot span straddles the layer circle."""
    x0, x1, y0, y1 = central_span(b)
    if not (x0 < x1 and y0 < y1):
        return False
    cx, cy = LAYER_CENTER
    dx = max(x0 - cx, 0.0, cx - x1)
    dy = max(y0 - cy, 0.0, cy - y1)
    d_min = math.hypot(dx, dy)
    d_max = max(
        math.hypot(x - cx, y - cy) for x in (x0, x1) for y in (y0, y1)
    )
    return d_min <= LAYER_RADIUS <= d_max


def mark_by_layer(space: LRSpace, center=LAYER_CENTER, radius=LAYER_RADIUS) -> list:
    """Keys of functions whose support straddles the circle."""
    cx, cy = center
    out = []
    for key in space.sorted_keys():
        x0, x1, y0, y1 = space.functions[key].support.float_bounds()
        dx = max(x0 - cx, 0.0, cx - x1)
        dy = max(y0 - cy, 0.0, cy - y1)
        d_min = math.hypot(dx, dy)
        d_max = max(math.hypot(x - cx, y - cy) for x in (x0, x1) for y in (y0, y1))
        if d_min <= radius <= d_max:
            out.append(key)
    return out


def adaptive_solve(
    levels: int,
    bidegree=(2, 2),
    *,
    grid=(500, 500),
    strategies=("tensor", "n2s2"),
    parity: str = "odd-vertical",
    expansion: str = "one-directional",
) -> list[dict]:
    """Solve the layer problem per level and strategy; returns CSV-ready rows.

    Tensor level L uses 2^L x 2^L uniform cells on [0, 1]^2; the adaptive
    strategy starts from the level-2 (4x4) space and runs one pipeline
    iteration per further level with the layer marker.  The load is
    integrated at the finest level's resolution on every mesh so coarse
    solves are honest Galerkin solutions rather than aliasing artifacts.
    Rows carry strategy, level, n_functions, linf, l2.
    """
    resolution = 2.0 ** -levels

    def run(space: LRSpace) -> ErrorReport:
        system = assemble(space, layer_rhs, load_resolution=resolution)
        system = impose_dirichlet(system, space, layer_solution)
        coefficients = solve(system)
        return error_norms(space, coefficients, layer_solution, grid=grid)

    rows = []
    if "tensor" in strategies:
        for level in range(2, levels + 1):
            space = initial_space(
                make_initial_mesh((0, 1, 0, 1), bidegree, 2**level)
            )
            report = run(space)
            rows.append(
                {
                    "strategy": "tensor",
                    "level": level,
                    "n_functions": report.n_functions,
                    "linf": report.linf,
                    "l2": report.l2,
                }
            )
    if "n2s2" in strategies:
        space = initial_space(make_initial_mesh((0, 1, 0, 1), bidegree, 4))
        for level in range(2, levels + 1):
            if level > 2:
                space, _ = n2s_pipeline(
                    space,
                    layer_marker,
                    1,
                    parity=parity,
                    expansion=expansion,
                    start_index=level - 2,
                )
            report = run(space)
            rows.append(
                {
                    "strategy": "n2s2",
                    "level": level,
                    "n_functions": report.n_functions,
                    "linf": report.linf,
                    "l2": report.l2,
                }
            )
    return rows
