"""Scalar fields on box domains with derivatives up to fourth order.

Three field variants are supported:

* ``PolynomialField`` -- coefficients over graded-lexicographic monomials
  (total degree <= 8); all jets are exact up to rounding.
* analytic builtins -- the radial distance field ``|x|`` and quadratic
  fields, with closed-form jets.
* ``GridField`` -- lattice samples with uniform spacing; jets come from
  central differences (second-order consistent), fourth derivatives use
  the 5-point-per-axis stencil, and off-lattice queries are refused
  rather than interpolated.

The module also provides discrete least-squares polynomial fitting with a
sup-norm deviation report (the measured stand-in for a smooth-approximation
error), and a deterministic "genericity" perturbation that splits repeated
Hessian eigenvalues and enforces positivity.

File formats
------------
Polynomial field file: one line per term, ``e1 ... en  coefficient``
(exponents then the coefficient, 17 significant digits).  Grid field file:
header ``n h dim1 ... dimn origin1 ... originn`` followed by row-major
values, one per line.  Both round-trip bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement, permutations

import numpy as np

from .errors import InputError
from .symmat import symmetrize

MAX_POLY_DEGREE = 8

# ---------------------------------------------------------------------------
# domains and jets


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box with a uniform sampling grid.

    ``grid_per_axis`` points per axis, endpoints included; grid points are
    enumerated row-major (first axis slowest).
    """

    center: np.ndarray
    half_width: np.ndarray
    grid_per_axis: int

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        half_width = np.atleast_1d(np.asarray(self.half_width, dtype=float))
        if half_width.shape == (1,) and center.shape[0] > 1:
            half_width = np.repeat(half_width, center.shape[0])
        if center.shape != half_width.shape:
            raise InputError("center and half_width dimensions disagree")
        if not (half_width > 0).all():
            raise InputError("half_width entries must be positive")
        if self.grid_per_axis < 3:
            raise InputError("grid_per_axis must be at least 3")
        center.flags.writeable = False
        half_width.flags.writeable = False
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_width", half_width)

    @property
    def n(self) -> int:
        return self.center.shape[0]

    def axes(self) -> list[np.ndarray]:
        return [
            np.linspace(c - w, c + w, self.grid_per_axis)
            for c, w in zip(self.center, self.half_width)
        ]

    def grid_points(self) -> np.ndarray:
        """All grid points as an (N, n) array in row-major order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def spacing(self) -> np.ndarray:
        return 2.0 * self.half_width / (self.grid_per_axis - 1)

    def uniform_spacing(self) -> float:
        h = self.spacing()
        if not np.allclose(h, h[0], rtol=1e-12, atol=0):
            raise InputError("box grid spacing differs between axes")
        return float(h[0])

    def diameter(self) -> float:
        return 2.0 * float(np.linalg.norm(self.half_width))

    def shrink(self, factor: float) -> "BoxDomain":
        return BoxDomain(self.center, self.half_width * factor, self.grid_per_axis)

    def min_distance_to_origin(self) -> float:
        gap = np.maximum(0.0, np.abs(self.center) - self.half_width)
        return float(np.linalg.norm(gap))


@dataclass(frozen=True)
class Jet4:
    """Value and derivatives up to order four of a scalar field at a point."""

    x: np.ndarray
    u: float
    du: np.ndarray
    d2u: np.ndarray
    d3u: np.ndarray
    d4u: np.ndarray


@dataclass(frozen=True)
class JetBatch:
    """Stacked jets at many points; ``d3``/``d4`` may be omitted (None)."""

    x: np.ndarray
    u: np.ndarray
    du: np.ndarray
    d2: np.ndarray
    d3: np.ndarray | None = None
    d4: np.ndarray | None = None

    def jet(self, i: int) -> Jet4:
        if self.d3 is None or self.d4 is None:
            raise InputError("batch was computed without third/fourth derivatives")
        return Jet4(
            x=self.x[i],
            u=float(self.u[i]),
            du=self.du[i],
            d2u=self.d2[i],
            d3u=self.d3[i],
            d4u=self.d4[i],
        )


def _index_combos(n: int, order: int):
    return list(combinations_with_replacement(range(n), order))


def _combo_to_beta(combo, n: int) -> tuple[int, ...]:
    beta = [0] * n
    for i in combo:
        beta[i] += 1
    return tuple(beta)


# ---------------------------------------------------------------------------
# field base class


class ScalarField:
    """Base class: immutable scalar field with queryable jets."""

    n: int

    def deriv_batch(self, points: np.ndarray, beta: tuple[int, ...]) -> np.ndarray:
        """Partial derivative with multi-index ``beta`` at each row of ``points``."""
        raise NotImplementedError

    def value(self, x) -> float:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return float(self.deriv_batch(x, (0,) * self.n)[0])

    def value_batch(self, points: np.ndarray) -> np.ndarray:
        return self.deriv_batch(np.asarray(points, dtype=float), (0,) * self.n)

    def jets_batch(self, points: np.ndarray, order: int = 4) -> JetBatch:
        """Stacked jets of the requested order at each row of ``points``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        npts, n = points.shape
        if n != self.n:
            raise InputError(f"points have dimension {n}, field has {self.n}")
        u = self.deriv_batch(points, (0,) * n)
        du = np.empty((npts, n))
        for i in range(n):
            du[:, i] = self.deriv_batch(points, _combo_to_beta((i,), n))
        tensors = {1: du}
        for m in range(2, order + 1):
            t = np.zeros((npts,) + (n,) * m)
            for combo in _index_combos(n, m):
                vals = self.deriv_batch(points, _combo_to_beta(combo, n))
                for perm in set(permutations(combo)):
                    t[(slice(None),) + perm] = vals
            tensors[m] = t
        return JetBatch(
            x=points,
            u=u,
            du=du,
            d2=tensors[2],
            d3=tensors.get(3),
            d4=tensors.get(4),
        )

    def jet4(self, x) -> Jet4:
        x = np.asarray(x, dtype=float)
        return self.jets_batch(x[None, :], order=4).jet(0)

    def hessian_batch(self, points: np.ndarray) -> np.ndarray:
        return self.jets_batch(points, order=2).d2

    def validate_box(self, box: BoxDomain) -> None:
        """Raise InputError unless ``box`` lies strictly inside the validity region."""
        if box.n != self.n:
            raise InputError("box dimension does not match field dimension")


# ---------------------------------------------------------------------------
# polynomial fields


def monomial_exponents(n: int, degree: int) -> np.ndarray:
    """Exponent tuples of all monomials in n variables of total degree <= degree.

    Graded lexicographic order: ascending total degree, ties broken by the
    exponent tuple compared left to right.  This is the canonical
    coefficient order used by :func:`fit_polynomial` and the file format.
    """
    if degree < 0:
        raise InputError("degree must be non-negative")
    out = []
    for deg in range(degree + 1):
        out.extend(_compositions(n, deg))
    return np.array(out, dtype=int).reshape(-1, n)


def _compositions(n: int, total: int):
    if n == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(n - 1, total - first):
            yield (first,) + rest


class PolynomialField(ScalarField):
    """Polynomial in raw coordinates, stored as exponent rows + coefficients."""

    def __init__(self, n: int, exponents, coefficients, declared_box: BoxDomain | None = None):
        exponents = np.asarray(exponents, dtype=int).reshape(-1, n)
        coefficients = np.asarray(coefficients, dtype=float).reshape(-1)
        if exponents.shape[0] != coefficients.shape[0]:
            raise InputError("exponent rows and coefficients disagree in length")
        if exponents.size and exponents.min() < 0:
            raise InputError("negative exponent")
        if exponents.size and exponents.sum(axis=1).max() > MAX_POLY_DEGREE:
            raise InputError(f"polynomial degree exceeds {MAX_POLY_DEGREE}")
        if not np.isfinite(coefficients).all():
            raise InputError("non-finite polynomial coefficient")
        self.n = n
        # canonical order, merged duplicates, zeros dropped
        terms: dict[tuple[int, ...], float] = {}
        for e, c in zip(map(tuple, exponents), coefficients):
            terms[e] = terms.get(e, 0.0) + float(c)
        keys = sorted(terms, key=lambda e: (sum(e), e))
        keys = [k for k in keys if terms[k] != 0.0]
        self.exponents = np.array(keys, dtype=int).reshape(-1, n)
        self.coefficients = np.array([terms[k] for k in keys], dtype=float)
        self.exponents.flags.writeable = False
        self.coefficients.flags.writeable = False
        self.declared_box = declared_box
        self._deriv_tables: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}

    @property
    def degree(self) -> int:
        if self.exponents.size == 0:
            return 0
        return int(self.exponents.sum(axis=1).max())

    def terms(self) -> dict[tuple[int, ...], float]:
        return {tuple(e): float(c) for e, c in zip(self.exponents, self.coefficients)}

    def __add__(self, other: "PolynomialField") -> "PolynomialField":
        if other.n != self.n:
            raise InputError("polynomial dimensions disagree")
        merged = self.terms()
        for e, c in other.terms().items():
            merged[e] = merged.get(e, 0.0) + c
        return PolynomialField.from_terms(self.n, merged, declared_box=self.declared_box)

    @staticmethod
    def from_terms(
        n: int, terms: dict[tuple[int, ...], float], declared_box: BoxDomain | None = None
    ) -> "PolynomialField":
        if not terms:
            return PolynomialField(n, np.zeros((0, n), dtype=int), [], declared_box)
        exps = list(terms.keys())
        coefs = [terms[e] for e in exps]
        return PolynomialField(n, exps, coefs, declared_box)

    def _table(self, beta: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        table = self._deriv_tables.get(beta)
        if table is not None:
            return table
        beta_arr = np.asarray(beta, dtype=int)
        keep = (self.exponents >= beta_arr).all(axis=1)
        exps = self.exponents[keep] - beta_arr
        coefs = self.coefficients[keep].copy()
        for i, b in enumerate(beta):
            e = self.exponents[keep][:, i]
            for k in range(b):
                coefs *= e - k
        table = (exps, coefs)
        self._deriv_tables[beta] = table
        return table

    def deriv_batch(self, points: np.ndarray, beta: tuple[int, ...]) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        exps, coefs = self._table(tuple(beta))
        if coefs.size == 0:
            return np.zeros(points.shape[0])
        mono = np.prod(points[:, None, :] ** exps[None, :, :], axis=2)
        return mono @ coefs


def quadratic_terms(h: np.ndarray, shift: np.ndarray | None = None) -> dict[tuple[int, ...], float]:
    """Terms of q(x) = (x-shift)^T h (x-shift) / 2 expanded in raw coordinates."""
    h = symmetrize(h)
    n = h.shape[0]
    terms: dict[tuple[int, ...], float] = {}

    def bump(e: tuple[int, ...], c: float) -> None:
        if c != 0.0:
            terms[e] = terms.get(e, 0.0) + c

    shift = np.zeros(n) if shift is None else np.asarray(shift, dtype=float)
    zero = (0,) * n
    for i in range(n):
        ei = tuple(2 if k == i else 0 for k in range(n))
        li = tuple(1 if k == i else 0 for k in range(n))
        bump(ei, 0.5 * h[i, i])
        bump(li, -h[i, i] * shift[i])
        bump(zero, 0.5 * h[i, i] * shift[i] ** 2)
    for i in range(n):
        for j in range(i + 1, n):
            eij = tuple(1 if k in (i, j) else 0 for k in range(n))
            li = tuple(1 if k == i else 0 for k in range(n))
            lj = tuple(1 if k == j else 0 for k in range(n))
            bump(eij, h[i, j])
            bump(li, -h[i, j] * shift[j])
            bump(lj, -h[i, j] * shift[i])
            bump(zero, h[i, j] * shift[i] * shift[j])
    return terms


# ---------------------------------------------------------------------------
# analytic builtins


class QuadraticField(ScalarField):
    """u(x) = x^T H x / 2 with a constant symmetric H (exact jets everywhere)."""

    def __init__(self, h: np.ndarray):
        self.h = symmetrize(h)
        self.h.flags.writeable = False
        self.n = self.h.shape[0]

    def deriv_batch(self, points: np.ndarray, beta: tuple[int, ...]) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        order = sum(beta)
        if order == 0:
            return 0.5 * np.einsum("pi,ij,pj->p", points, self.h, points)
        if order == 1:
            i = beta.index(1)
            return points @ self.h[i]
        if order == 2:
            idx = [k for k, b in enumerate(beta) for _ in range(b)]
            return np.full(points.shape[0], self.h[idx[0], idx[1]])
        return np.zeros(points.shape[0])


class RadialDistanceField(ScalarField):
    """u(x) = |x|, valid away from the origin.

    The Hessian (I - xhat xhat^T)/|x| has a single zero eigenvalue in the
    radial direction and eigenvalue 1/|x| with multiplicity n-1; the field
    is convex but its null direction turns from point to point.
    """

    def __init__(self, n: int):
        if n < 2:
            raise InputError("radial field needs dimension >= 2")
        self.n = n

    def _radii(self, points: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(points, axis=1)
        if (r < 1e-12).any():
            raise InputError("radial field queried at the origin")
        return r

    def deriv_batch(self, points: np.ndarray, beta: tuple[int, ...]) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        order = sum(beta)
        r = self._radii(points)
        idx = [k for k, b in enumerate(beta) for _ in range(b)]
        x = points
        if order == 0:
            return r
        if order == 1:
            (i,) = idx
            return x[:, i] / r
        if order == 2:
            i, j = idx
            return (float(i == j) - x[:, i] * x[:, j] / r**2) / r
        if order == 3:
            i, j, k = idx
            d = lambda a, b: float(a == b)
            return (
                -(d(i, j) * x[:, k] + d(i, k) * x[:, j] + d(j, k) * x[:, i]) / r**3
                + 3.0 * x[:, i] * x[:, j] * x[:, k] / r**5
            )
        if order == 4:
            i, j, k, l = idx
            d = lambda a, b: float(a == b)
            t1 = -(d(i, j) * d(k, l) + d(i, k) * d(j, l) + d(j, k) * d(i, l)) / r**3
            t2 = (
                3.0
                * (
                    d(i, j) * x[:, k] * x[:, l]
                    + d(i, k) * x[:, j] * x[:, l]
                    + d(i, l) * x[:, j] * x[:, k]
                    + d(j, k) * x[:, i] * x[:, l]
                    + d(j, l) * x[:, i] * x[:, k]
                    + d(k, l) * x[:, i] * x[:, j]
                )
                / r**5
            )
            t3 = -15.0 * x[:, i] * x[:, j] * x[:, k] * x[:, l] / r**7
            return t1 + t2 + t3
        return np.zeros(points.shape[0])

    def validate_box(self, box: BoxDomain) -> None:
        super().validate_box(box)
        if box.min_distance_to_origin() <= 0.0:
            raise InputError("box for the radial field must exclude the origin")


# ---------------------------------------------------------------------------
# grid fields

# per-axis central-difference stencils, all second-order consistent
_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


class GridField(ScalarField):
    """Lattice samples with uniform spacing h; jets by central differences.

    Queries are restricted to lattice points; derivative queries
    additionally require two cells of margin to the lattice boundary
    (enough for every stencil up to fourth order).  No interpolation is
    performed.
    """

    def __init__(self, values: np.ndarray, h: float, origin):
        values = np.asarray(values, dtype=float)
        origin = np.atleast_1d(np.asarray(origin, dtype=float))
        if values.ndim != origin.shape[0]:
            raise InputError("origin dimension does not match value array rank")
        if h <= 0:
            raise InputError("grid spacing must be positive")
        if not np.isfinite(values).all():
            raise InputError("grid field has non-finite values")
        values = values.copy()
        values.flags.writeable = False
        origin.flags.writeable = False
        self.values = values
        self.h = float(h)
        self.origin = origin
        self.n = origin.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    def to_indices(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        rel = (points - self.origin) / self.h
        idx = np.rint(rel)
        if not np.allclose(rel, idx, rtol=0, atol=1e-8):
            raise InputError("grid field queried off-lattice (no interpolation)")
        idx = idx.astype(int)
        if (idx < 0).any() or (idx >= np.array(self.dims)).any():
            raise InputError("grid field queried outside the lattice")
        return idx

    def deriv_batch(self, points: np.ndarray, beta: tuple[int, ...]) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        idx = self.to_indices(points)
        order = sum(beta)
        if order > 0:
            margin = 2
            upper = np.array(self.dims) - margin
            if (idx < margin).any() or (idx >= upper).any():
                raise InputError("derivative stencil leaves the lattice (need 2-cell margin)")
        if order > 4:
            return np.zeros(points.shape[0])
        out = np.zeros(points.shape[0])
        axis_stencils = [_STENCILS[b] for b in beta]
        for offsets_weights in _stencil_product(axis_stencils):
            offsets, weight = offsets_weights
            shifted = idx + np.asarray(offsets, dtype=int)
            out += weight * self.values[tuple(shifted.T)]
        return out / self.h**order

    def interior_mask(self, points: np.ndarray, margin: int = 2) -> np.ndarray:
        idx = self.to_indices(points)
        upper = np.array(self.dims) - margin
        return ((idx >= margin) & (idx < upper)).all(axis=1)


def _stencil_product(axis_stencils):
    combos = [((), 1.0)]
    for offsets, weights in axis_stencils:
        combos = [
            (prev + (o,), w_prev * w)
            for prev, w_prev in combos
            for o, w in zip(offsets, weights)
        ]
    return combos


# ---------------------------------------------------------------------------
# builtin catalog


def _convex_poly_terms(n: int, seed: int, degree: int) -> dict[tuple[int, ...], float]:
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n, n))
    quad = raw.T @ raw / n + 0.5 * np.eye(n)
    terms = quadratic_terms(quad)
    power = 2 * max(1, degree // 2)
    if power > degree:
        power = degree if degree % 2 == 0 else degree - 1
    for _ in range(n):
        a = rng.standard_normal(n)
        a /= np.linalg.norm(a)
        beta = float(rng.uniform(0.1, 0.5))
        for comp in _compositions(n, power):
            coef = beta * math.factorial(power)
            for ai, ei in zip(a, comp):
                coef *= ai**ei / math.factorial(ei)
            terms[comp] = terms.get(comp, 0.0) + coef
    return terms


def builtin_field(name: str, n: int, params=()) -> ScalarField:
    """Construct a catalog field by name.

    Names
    -----
    ``radial_r``            u = |x| (no parameters)
    ``quadratic``           params = diagonal Hessian entries (length n)
    ``rank1``               params = (c,), u = c x_1^2 / 2
    ``convex_poly``         params = (seed, degree): random convex polynomial
    ``custom``              params = iterable of (e1, ..., en, coefficient) rows
    """
    params = list(params)
    if name == "radial_r":
        return RadialDistanceField(n)
    if name == "quadratic":
        if len(params) != n:
            raise InputError(f"quadratic field needs {n} diagonal entries, got {len(params)}")
        return QuadraticField(np.diag(np.asarray(params, dtype=float)))
    if name == "rank1":
        if len(params) != 1:
            raise InputError("rank1 field takes a single coefficient")
        h = np.zeros((n, n))
        h[0, 0] = float(params[0])
        return QuadraticField(h)
    if name == "convex_poly":
        if len(params) != 2:
            raise InputError("convex_poly takes (seed, degree)")
        seed, degree = int(params[0]), int(params[1])
        if not 2 <= degree <= MAX_POLY_DEGREE:
            raise InputError(f"convex_poly degree must be in 2..{MAX_POLY_DEGREE}")
        box = BoxDomain(np.zeros(n), np.ones(n), 9)
        return PolynomialField.from_terms(n, _convex_poly_terms(n, seed, degree), declared_box=box)
    if name == "custom":
        rows = [list(map(float, row)) for row in params]
        if any(len(row) != n + 1 for row in rows):
            raise InputError("custom field rows must be (e1, ..., en, coefficient)")
        exps = [[int(v) for v in row[:n]] for row in rows]
        coefs = [row[n] for row in rows]
        return PolynomialField(n, exps, coefs)
    raise InputError(
        f"unknown builtin field {name!r}; known: radial_r, quadratic, rank1, convex_poly, custom"
    )


# ---------------------------------------------------------------------------
# polynomial fitting


@dataclass(frozen=True)
class FitReport:
    """Sup-norm deviations of the fit, max over the sample grid.

    ``deviations[m]`` is the largest absolute entry of the m-th derivative
    of (P - u) over the sampled points, for m = 0..3.  For grid-backed
    fields the derivative scan is restricted to lattice-interior points.
    """

    degree: int
    n_samples: int
    deviations: tuple[float, float, float, float]
    rank: int
    condition: float


def fit_polynomial(
    f: ScalarField, box: BoxDomain, degree: int
) -> tuple[PolynomialField, FitReport]:
    """Least-squares polynomial fit of ``f`` over the box sample grid.

    The normal system is solved in box-centered scaled coordinates for
    conditioning and the coefficients are expanded back to raw
    coordinates, so the returned field is portable (its file form does not
    reference the box).
    """
    if not 0 <= degree <= MAX_POLY_DEGREE:
        raise InputError(f"fit degree must be in 0..{MAX_POLY_DEGREE}")
    if box.grid_per_axis < degree + 2:
        raise InputError(
            f"sample grid too small for degree {degree}: "
            f"need at least {degree + 2} points per axis"
        )
    f.validate_box(box)
    n = box.n
    pts = box.grid_points()
    scaled = (pts - box.center) / box.half_width
    exps = monomial_exponents(n, degree)
    vand = np.prod(scaled[:, None, :] ** exps[None, :, :], axis=2)
    y = f.value_batch(pts)
    coef, _, rank, sv = np.linalg.lstsq(vand, y, rcond=None)
    if rank < exps.shape[0]:
        raise InputError(
            "rank-deficient fit system; increase the sample grid or lower the degree"
        )
    terms: dict[tuple[int, ...], float] = {}
    for e, c in zip(exps, coef):
        if c == 0.0:
            continue
        for raw_e, raw_c in _expand_scaled_monomial(e, box.center, box.half_width):
            terms[raw_e] = terms.get(raw_e, 0.0) + c * raw_c
    poly = PolynomialField.from_terms(n, terms, declared_box=box)

    mask = np.ones(pts.shape[0], dtype=bool)
    if isinstance(f, GridField):
        mask = f.interior_mask(pts)
    sample = pts[mask]
    jp = poly.jets_batch(sample, order=3)
    jf = f.jets_batch(sample, order=3)
    deviations = (
        float(np.abs(jp.u - jf.u).max()),
        float(np.abs(jp.du - jf.du).max()),
        float(np.abs(jp.d2 - jf.d2).max()),
        float(np.abs(jp.d3 - jf.d3).max()),
    )
    cond = float(sv[0] / sv[-1]) if sv.size else 1.0
    report = FitReport(
        degree=degree,
        n_samples=int(pts.shape[0]),
        deviations=deviations,
        rank=int(rank),
        condition=cond,
    )
    return poly, report


def _expand_scaled_monomial(e, center, width):
    """Expand prod_i ((x_i - c_i)/w_i)^{e_i} into raw-coordinate terms."""
    parts = [((), 1.0)]
    for i, ei in enumerate(e):
        axis_terms = []
        scale = width[i] ** (-int(ei))
        for k in range(int(ei) + 1):
            axis_terms.append((k, math.comb(int(ei), k) * (-center[i]) ** (int(ei) - k) * scale))
        parts = [
            (prev + (k,), c_prev * c) for prev, c_prev in parts for k, c in axis_terms
        ]
    return parts


# ---------------------------------------------------------------------------
# genericity perturbation

PERTURBATION_SEED = 0x0D157


def perturb_to_distinct(
    poly: PolynomialField, box: BoxDomain, tau: float, seed: int = PERTURBATION_SEED
) -> PolynomialField:
    """Split repeated Hessian eigenvalues and enforce positivity.

    Adds tau times a fixed diagonal quadratic with distinct coefficients
    plus a small seeded random positive-definite quadratic; if the
    smallest sampled Hessian eigenvalue over the box grid is still <= 0,
    adds enough multiples of tau * |x - center|^2 to push it positive.
    tau = 0 returns the field unchanged.
    """
    if tau < 0:
        raise InputError("perturbation magnitude must be non-negative")
    if tau == 0.0:
        return poly
    n = poly.n
    eps = 0.1 * np.arange(1, n + 1) / n
    diag = 2.0 * tau * np.arange(1, n + 1) * eps
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n, n))
    w = raw.T @ raw + 0.1 * np.eye(n)
    w *= 0.02 / np.linalg.norm(w, 2)
    hess_pert = np.diag(diag) + tau * w
    perturbed = poly + PolynomialField.from_terms(n, quadratic_terms(hess_pert))
    lam_min = float(np.linalg.eigvalsh(perturbed.hessian_batch(box.grid_points())).min())
    if lam_min <= 0.0:
        k = math.floor(-lam_min / (2.0 * tau)) + 1
        bump = quadratic_terms(2.0 * k * tau * np.eye(n), shift=box.center)
        perturbed = perturbed + PolynomialField.from_terms(n, bump)
    return perturbed


# ---------------------------------------------------------------------------
# file formats


def save_polynomial_field(poly: PolynomialField, path) -> None:
    lines = []
    for e, c in zip(poly.exponents, poly.coefficients):
        lines.append(" ".join(str(int(v)) for v in e) + "  " + format(c, ".17g"))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def load_polynomial_field(path) -> PolynomialField:
    exps, coefs = [], []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 2:
                raise InputError(f"{path}:{lineno}: expected exponents and a coefficient")
            exps.append([int(v) for v in parts[:-1]])
            coefs.append(float(parts[-1]))
    if not exps:
        raise InputError(f"{path}: empty polynomial file")
    n = len(exps[0])
    if any(len(e) != n for e in exps):
        raise InputError(f"{path}: inconsistent exponent lengths")
    return PolynomialField(n, exps, coefs)


def save_grid_field(grid: GridField, path) -> None:
    header = [str(grid.n), format(grid.h, ".17g")]
    header += [str(d) for d in grid.dims]
    header += [format(o, ".17g") for o in grid.origin]
    lines = [" ".join(header)]
    lines.extend(format(v, ".17g") for v in grid.values.ravel())
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_grid_field(path) -> GridField:
    with open(path, "r", encoding="ascii") as fh:
        content = [line.strip() for line in fh if line.strip()]
    if not content:
        raise InputError(f"{path}: empty grid file")
    head = content[0].split()
    try:
        n = int(head[0])
        h = float(head[1])
        dims = tuple(int(v) for v in head[2 : 2 + n])
        origin = [float(v) for v in head[2 + n : 2 + 2 * n]]
    except (IndexError, ValueError) as exc:
        raise InputError(f"{path}: malformed grid header") from exc
    if len(dims) != n or len(origin) != n:
        raise InputError(f"{path}: grid header inconsistent with dimension {n}")
    expected = int(np.prod(dims))
    values = np.array([float(v) for v in content[1:]], dtype=float)
    if values.size != expected:
        raise InputError(f"{path}: expected {expected} values, found {values.size}")
    return GridField(values.reshape(dims), h, origin)
