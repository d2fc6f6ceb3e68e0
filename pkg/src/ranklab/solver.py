"""Finite-difference Newton solver for F(D2u, Du, u, x) = 0 on a box.

Dirichlet data on the box boundary, dimensions 1..3, at most 64 points
per axis.  Second derivatives use the standard central stencils (4-point
cross for mixed terms), so the discretization is second-order consistent
and quadratics are reproduced exactly.  The Jacobian is assembled
analytically from the operator's first derivatives composed with the
stencil weights; linear systems are solved by a sparse direct solve, and
the Newton step is halved until the residual decreases and the iterate
stays inside the operator's validity region.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InputError, SolverError
from .fields import BoxDomain, GridField, ScalarField
from .operators import Operator

MAX_POINTS_PER_AXIS = 64


@dataclass(frozen=True)
class DiscreteProblem:
    """Operator + box grid + Dirichlet boundary data + initial guess.

    ``boundary`` and ``guess`` may be scalar fields or callables mapping
    an (N, n) array of points to N values.
    """

    op: Operator
    box: BoxDomain
    boundary: object
    guess: object

    def __post_init__(self):
        if not 1 <= self.box.n <= 3:
            raise InputError("solver supports dimensions 1..3")
        if self.box.grid_per_axis > MAX_POINTS_PER_AXIS:
            raise InputError(f"at most {MAX_POINTS_PER_AXIS} points per axis")
        self.box.uniform_spacing()


@dataclass(frozen=True)
class SolveResult:
    field: GridField
    residual_norms: list
    achieved_residual: float
    converged: bool
    iterations: int


def _evaluate(source, points: np.ndarray) -> np.ndarray:
    if isinstance(source, ScalarField):
        return source.value_batch(points)
    values = np.asarray(source(points), dtype=float)
    if values.shape != (points.shape[0],):
        raise InputError("boundary/guess callable must return one value per point")
    return values


def _grid_geometry(box: BoxDomain):
    n = box.n
    g = box.grid_per_axis
    dims = (g,) * n
    h = box.uniform_spacing()
    pts = box.grid_points().reshape(dims + (n,))
    interior = tuple(slice(1, g - 1) for _ in range(n))
    return n, g, dims, h, pts, interior


def _interior_states(vals: np.ndarray, h: float, n: int, interior):
    """D2u, Du at interior nodes by central differences (vectorized)."""
    core = vals[interior]
    shape = core.shape
    du = np.empty(shape + (n,))
    d2 = np.empty(shape + (n, n))

    def shifted(offsets):
        sl = tuple(
            slice(1 + o, vals.shape[axis] - 1 + o) for axis, o in enumerate(offsets)
        )
        return vals[sl]

    zero = (0,) * n
    for a in range(n):
        plus = tuple(1 if i == a else 0 for i in range(n))
        minus = tuple(-1 if i == a else 0 for i in range(n))
        du[..., a] = (shifted(plus) - shifted(minus)) / (2 * h)
        d2[..., a, a] = (shifted(plus) - 2 * core + shifted(minus)) / h**2
    for a, b in combinations(range(n), 2):
        pp = tuple(1 if i in (a, b) else 0 for i in range(n))
        mm = tuple(-1 if i in (a, b) else 0 for i in range(n))
        pm = tuple(1 if i == a else (-1 if i == b else 0) for i in range(n))
        mp = tuple(-1 if i == a else (1 if i == b else 0) for i in range(n))
        cross = (shifted(pp) + shifted(mm) - shifted(pm) - shifted(mp)) / (4 * h**2)
        d2[..., a, b] = cross
        d2[..., b, a] = cross
    return d2, du, core


def assemble_residual(prob: DiscreteProblem, vals: np.ndarray):
    """Residual F at interior nodes and the sparse Jacobian wrt interior values.

    ``vals`` is the full grid array (boundary entries included and treated
    as fixed).  A node where the operator's validity region is violated is
    reported with its multi-index.
    """
    n, g, dims, h, pts, interior = _grid_geometry(prob.box)
    vals = np.asarray(vals, dtype=float).reshape(dims)
    d2, du, core = _interior_states(vals, h, n, interior)
    x = pts[interior]
    flat = lambda arr: arr.reshape(-1, *arr.shape[len(dims):])
    a_flat, p_flat, u_flat, x_flat = flat(d2), flat(du), core.ravel(), flat(x)

    ok = np.asarray(prob.op.is_valid(a_flat, p_flat, u_flat, x_flat))
    if not ok.all():
        bad = int(np.argmin(ok))
        idx = np.unravel_index(bad, tuple(d - 2 for d in dims))
        raise SolverError(
            f"operator validity violated at interior node {tuple(i + 1 for i in idx)}"
        )
    f, fab, fp, fu = prob.op.jet1_batch(a_flat, p_flat, u_flat, x_flat)
    residual = np.asarray(f, dtype=float).ravel()

    inner_dims = tuple(d - 2 for d in dims)
    n_int = int(np.prod(inner_dims))
    inner_index = np.arange(n_int).reshape(inner_dims)
    strides = np.array([int(np.prod(dims[i + 1:])) for i in range(n)])
    inner_multi = np.stack(np.unravel_index(np.arange(n_int), inner_dims), axis=1) + 1
    full_flat_index = inner_multi @ strides

    rows, cols, data = [], [], []

    def add_offset(offset: np.ndarray, coeff: np.ndarray) -> None:
        neighbor_multi = inner_multi + offset
        is_interior = ((neighbor_multi >= 1) & (neighbor_multi <= np.array(dims) - 2)).all(axis=1)
        if not is_interior.any():
            return
        ncols = inner_index[tuple((neighbor_multi[is_interior] - 1).T)]
        rows.append(np.arange(n_int)[is_interior])
        cols.append(ncols)
        data.append(coeff[is_interior])

    center_coeff = np.asarray(fu, dtype=float).ravel().copy()
    for a in range(n):
        plus = np.zeros(n, dtype=int); plus[a] = 1
        minus = -plus
        add_offset(plus, fp[:, a] / (2 * h) + fab[:, a, a] / h**2)
        add_offset(minus, -fp[:, a] / (2 * h) + fab[:, a, a] / h**2)
        center_coeff -= 2.0 * fab[:, a, a] / h**2
    for a, b in combinations(range(n), 2):
        w = 2.0 * fab[:, a, b] / (4 * h**2)  # ab and ba entries both contribute
        for sa, sb, sign in ((1, 1, 1.0), (-1, -1, 1.0), (1, -1, -1.0), (-1, 1, -1.0)):
            off = np.zeros(n, dtype=int); off[a] = sa; off[b] = sb
            add_offset(off, sign * w)
    add_offset(np.zeros(n, dtype=int), center_coeff)

    jac = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_int, n_int),
    ).tocsr()
    return residual, jac, full_flat_index


def initial_values(prob: DiscreteProblem) -> np.ndarray:
    """Full grid values: guess in the interior, boundary data on the boundary."""
    n, g, dims, h, pts, interior = _grid_geometry(prob.box)
    flat_pts = pts.reshape(-1, n)
    vals = _evaluate(prob.guess, flat_pts).reshape(dims)
    boundary_mask = np.zeros(dims, dtype=bool)
    boundary_mask[...] = True
    boundary_mask[interior] = False
    bpts = flat_pts[boundary_mask.ravel()]
    vals[boundary_mask] = _evaluate(prob.boundary, bpts)
    return vals


def newton_solve(
    prob: DiscreteProblem,
    damping: float = 1.0,
    max_iter: int = 30,
    tol: float = 1e-10,
) -> SolveResult:
    """Damped Newton iteration to max-norm residual <= tol.

    The step is repeatedly halved until the residual norm decreases and
    the iterate stays valid; thirty failed halvings abort with
    ``SolverError``.  The returned grid field is tagged with the achieved
    residual through the result record.
    """
    n, g, dims, h, pts, interior = _grid_geometry(prob.box)
    vals = initial_values(prob)
    residual, jac, _ = assemble_residual(prob, vals)
    norms = [float(np.abs(residual).max())]

    iterations = 0
    while norms[-1] > tol and iterations < max_iter:
        delta = spla.spsolve(jac, -residual)
        inner_dims = tuple(d - 2 for d in dims)
        step = damping
        accepted = False
        for _ in range(30):
            cand = vals.copy()
            cand[interior] += step * delta.reshape(inner_dims)
            try:
                res_new, jac_new, _ = assemble_residual(prob, cand)
            except SolverError:
                step *= 0.5
                continue
            if float(np.abs(res_new).max()) < norms[-1]:
                vals, residual, jac = cand, res_new, jac_new
                norms.append(float(np.abs(residual).max()))
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise SolverError(
                f"Newton line search failed after 30 halvings at residual {norms[-1]:.3g}"
            )
        iterations += 1

    converged = norms[-1] <= tol
    if not converged:
        raise SolverError(
            f"Newton did not reach tolerance {tol:g} in {max_iter} iterations "
            f"(residual {norms[-1]:.3g})"
        )
    origin = prob.box.center - prob.box.half_width
    field = GridField(vals, h, origin)
    return SolveResult(
        field=field,
        residual_norms=norms,
        achieved_residual=norms[-1],
        converged=converged,
        iterations=iterations,
    )
