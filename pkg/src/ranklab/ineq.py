"""Differential-inequality and regularity audits for the eigenvalue sum.

Central object: for a polynomial field P with positive distinct Hessian
eigenvalues at a point, the triangular-weighted sum Q of the smallest
``level`` eigenvalues, together with its gradient and Hessian assembled
from the simple-eigenvalue perturbation formulas.  The Hessian is
computed twice -- once as the naive sum of eigenvalue Hessians and once
in the cancelled three-term form in which offsetting contributions of
pairs inside the low block are merged -- and the two must agree; this is
a built-in dual-route self-check.

The audits measure, at desk scale, the chain of inequalities behind the
constant-rank property:

* ``differential_inequality_audit`` fits the smallest constant C with
  trace(Fab . d2Q) <= C (|dQ| + Q) over a box, after fitting u by a
  polynomial and splitting its Hessian spectrum; it also evaluates two
  proof-step gaps at every unmasked point (``form_bound_gap``: the
  structural-form bound on the separated high-block terms;
  ``pair_bound_gap``: the ellipticity lower bound on mixed low-block
  third derivatives).
* ``semiconcavity_audit`` checks the chord inequality of Q with the
  explicit constant K = Lip(h) * max|D3 P| * diam(box).
* ``gradient_bound_audit`` measures |dQ|^{1 + 1/alpha} against sup Q on
  the inner half box.
* ``harnack_audit`` mollifies a nonnegative grid function by bump
  kernels of several radii and reports normalized mean-to-inf ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, InputError, PreconditionError
from .fields import BoxDomain, PolynomialField, ScalarField
from .operators import Operator, OperatorJet, OperatorState, operator_jet, rotate_operator_jet
from .symmat import (
    default_gap_threshold,
    eigsum_lipschitz,
    hessian_eigen_jet,
    weighted_eigsum,
    weighted_eigsum_batch,
)

C_GRID = tuple(0.5 * 2.0**i for i in range(12))  # 0.5, 1, 2, ..., 1024


# ---------------------------------------------------------------------------
# jets of the weighted eigenvalue sum


@dataclass(frozen=True)
class EigsumJet:
    """Value/gradient/Hessian of the weighted eigenvalue sum at a point.

    ``gradient`` and ``hessian`` are in original coordinates.  When the
    Hessian spectrum has a gap below the degeneracy threshold the point
    is masked: the value is still reported but the derivatives are NaN.
    """

    x: np.ndarray
    level: int
    value: float
    gradient: np.ndarray
    hessian: np.ndarray
    masked: bool
    gap_min: float


def _eigsum_weights(level: int) -> np.ndarray:
    return np.arange(level, 0, -1, dtype=float)


def _cancelled_hessian(lam, t3, t4, level: int) -> np.ndarray:
    """Three-term form of the eigsum Hessian, eigenframe coordinates."""
    n = lam.shape[0]
    w = _eigsum_weights(level)
    out = np.einsum("j,jjab->ab", w, t4[:level, :level])
    for j in range(level):
        for m in range(j + 1, level):
            out += 2.0 * (m - j) * np.outer(t3[m, :, j], t3[m, :, j]) / (lam[j] - lam[m])
    for j in range(level):
        for m in range(level, n):
            out += 2.0 * w[j] * np.outer(t3[m, :, j], t3[m, :, j]) / (lam[j] - lam[m])
    return 0.5 * (out + out.T)


def _naive_hessian(lam, t3, t4, level: int) -> np.ndarray:
    n = lam.shape[0]
    w = _eigsum_weights(level)
    out = np.einsum("j,jjab->ab", w, t4[:level, :level])
    for j in range(level):
        for m in range(n):
            if m == j:
                continue
            out += 2.0 * w[j] * np.outer(t3[m, :, j], t3[m, :, j]) / (lam[j] - lam[m])
    return 0.5 * (out + out.T)


def eigsum_jet(
    field: ScalarField, x, level: int, gap_threshold: float | None = None
) -> EigsumJet:
    """Jet of the weighted eigenvalue sum of the Hessian field at ``x``.

    The Hessian of the sum is assembled both naively and in the cancelled
    three-term form; disagreement beyond 1e-9 relative raises
    ``ConsistencyError`` (it would indicate a bug, not bad data).
    """
    x = np.asarray(x, dtype=float)
    jet = field.jet4(x)
    hej = hessian_eigen_jet(jet.d2u, jet.d3u, jet.d4u, gap_threshold)
    lam = hej.eigenvalues
    value = weighted_eigsum(lam, level)
    gaps = np.diff(lam)
    gap_min = float(gaps.min()) if gaps.size else float("inf")
    if hej.gap_flags.any():
        nan_vec = np.full(lam.shape[0], np.nan)
        nan_mat = np.full((lam.shape[0],) * 2, np.nan)
        return EigsumJet(x, level, value, nan_vec, nan_mat, True, gap_min)
    w = _eigsum_weights(level)
    grad_eig = np.einsum("j,jja->a", w, hej.d3[:level, :level])
    hess_cancelled = _cancelled_hessian(lam, hej.d3, hej.d4, level)
    hess_naive = _naive_hessian(lam, hej.d3, hej.d4, level)
    scale = max(1.0, float(np.abs(hess_naive).max()))
    if np.abs(hess_cancelled - hess_naive).max() > 1e-9 * scale:
        raise ConsistencyError(
            "cancelled and naive eigsum Hessians disagree beyond 1e-9 relative"
        )
    v = hej.frame
    return EigsumJet(
        x=x,
        level=level,
        value=value,
        gradient=v @ grad_eig,
        hessian=v @ hess_cancelled @ v.T,
        masked=False,
        gap_min=gap_min,
    )


# ---------------------------------------------------------------------------
# twice-differentiated equation residual


def _dd_residual_terms(oj: OperatorJet, du, d2, t3, t4, j: int) -> float:
    """Second derivative of x -> F(D2u, Du, u, x) along coordinate j of the
    frame in which all tensors are expressed."""
    r = np.einsum("ab,ab->", oj.fab, t4[:, :, j, j])
    r += float(oj.fp @ t3[:, j, j])
    r += oj.fu * d2[j, j]
    r += np.einsum("abrs,ab,rs->", oj.fabrs, t3[:, :, j], t3[:, :, j])
    r += float(d2[:, j] @ oj.fpp @ d2[:, j])
    r += oj.fuu * du[j] ** 2
    r += oj.fxx[j, j]
    r += 2.0 * np.einsum("abr,ab,r->", oj.fab_pr, t3[:, :, j], d2[:, j])
    r += 2.0 * np.einsum("ab,ab->", oj.fab_u, t3[:, :, j]) * du[j]
    r += 2.0 * np.einsum("ab,ab->", oj.fab_xr[:, :, j], t3[:, :, j])
    r += 2.0 * float(oj.fpu @ d2[:, j]) * du[j]
    r += 2.0 * float(oj.fpx[:, j] @ d2[:, j])
    r += 2.0 * oj.fux[j] * du[j]
    return float(r)


def equation_residual_vector(
    op: Operator, field: ScalarField, x, frame: np.ndarray | None = None
) -> np.ndarray:
    """Residuals of the twice-differentiated equation along each direction.

    Differentiating F(D2u, Du, u, x) = 0 twice along a fixed direction
    yields a thirteen-term identity in the jets of u and the second-order
    jet of F; for an exact solution every component vanishes.  ``frame``
    (orthonormal columns) selects the differentiation directions; default
    is the coordinate frame.
    """
    x = np.asarray(x, dtype=float)
    jet = field.jet4(x)
    state = OperatorState(a=jet.d2u, p=jet.du, u=jet.u, x=x)
    oj = operator_jet(op, state)
    du, d2, t3, t4 = jet.du, jet.d2u, jet.d3u, jet.d4u
    if frame is not None:
        r = np.asarray(frame, dtype=float)
        oj = rotate_operator_jet(oj, r)
        du = r.T @ du
        d2 = r.T @ d2 @ r
        t3 = np.einsum("ijk,ia,jb,kc->abc", t3, r, r, r, optimize=True)
        t4 = np.einsum("ijkl,ia,jb,kc,ld->abcd", t4, r, r, r, r, optimize=True)
    n = x.shape[0]
    return np.array([_dd_residual_terms(oj, du, d2, t3, t4, j) for j in range(n)])


def twice_differentiated_residual(
    op: Operator, field: ScalarField, x, j: int, frame: np.ndarray | None = None
) -> float:
    """Single component of :func:`equation_residual_vector`."""
    return float(equation_residual_vector(op, field, x, frame)[j])


# ---------------------------------------------------------------------------
# the differential-inequality audit


@dataclass(frozen=True)
class AuditSample:
    """Per-point diagnostics of the differential-inequality audit."""

    x: np.ndarray
    value: float
    grad_norm: float
    trace_term: float
    form_bound_gap: float
    pair_bound_gap: float
    equation_residuals: np.ndarray
    masked: bool


@dataclass(frozen=True)
class AuditResult:
    samples: list
    level: int
    fit_degree: int
    tau: float
    fitted_c: float
    slack_quantiles: dict
    masked_fraction: float
    valid: bool
    fit_deviations: tuple
    form_bound_gap_min: float
    pair_bound_gap_min: float
    equation_residual_max: float
    perturbed: PolynomialField
    tau_zero: float


def _star_and_bounds(ojr: OperatorJet, lam, du_eig, t3, level: int):
    """Separated high-block terms (*) and their structural-form bound.

    Returns (form_bound_gap, pair_bound_gap): the first is the final
    bound minus (*), the second is the ellipticity lower bound gap for
    mixed low-block third derivatives.  Both are >= 0 (up to rounding)
    whenever the operator is elliptic and passes the convexity form.
    """
    n = lam.shape[0]
    big = slice(level, n)
    w = _eigsum_weights(level)

    star = 0.0
    bound = 0.0
    for j in range(level):
        xj = t3[big, big, j]
        s1 = np.einsum("abrs,ab,rs->", ojr.fabrs[big, big, big, big], xj, xj)
        s1 += ojr.fuu * du_eig[j] ** 2
        s1 += ojr.fxx[j, j]
        s1 += 2.0 * np.einsum("ab,ab->", ojr.fab_u[big, big], xj) * du_eig[j]
        s1 += 2.0 * np.einsum("ab,ab->", ojr.fab_xr[big, big, j], xj)
        s1 += 2.0 * ojr.fux[j] * du_eig[j]
        star -= w[j] * float(s1)
        for m in range(level, n):
            quad = float(t3[m, big, j] @ ojr.fab[big, big] @ t3[m, big, j])
            bound += 2.0 * w[j] * quad / (lam[m] - lam[j])
    form_bound_gap = bound - star

    lhs = 0.0
    for j in range(level):
        for m in range(j + 1, level):
            quad = float(t3[m, :, j] @ ojr.fab @ t3[m, :, j])
            lhs += 2.0 * (m - j) * quad / (lam[m] - lam[j])
    c_ell = float(np.linalg.eigvalsh(ojr.fab)[0])
    q_val = weighted_eigsum(lam, level)
    mixed = 0.0
    for a in range(level):
        for b in range(a + 1, level):
            mixed += float(np.sum(t3[a, b, :] ** 2))
    rhs = c_ell * mixed / q_val if q_val > 0 else 0.0
    pair_bound_gap = lhs - rhs
    return float(form_bound_gap), float(pair_bound_gap)


def _fit_constant(trace_terms, grads, values, slack_tol: float):
    """Smallest catalog constant whose max slack clears the tolerance."""
    base = np.abs(grads) + values
    chosen = C_GRID[-1]
    for c in C_GRID:
        if float((trace_terms - c * base).max()) <= slack_tol:
            chosen = c
            break
    slack = trace_terms - chosen * base
    quantiles = {
        "q50": float(np.quantile(slack, 0.50)),
        "q90": float(np.quantile(slack, 0.90)),
        "q99": float(np.quantile(slack, 0.99)),
        "max": float(slack.max()),
    }
    return chosen, quantiles


def differential_inequality_audit(
    op: Operator,
    u: ScalarField,
    box: BoxDomain,
    level: int,
    fit_degree: int,
    tau: float,
    tau_zero: float | None = None,
    gap_threshold: float | None = None,
    slack_tol: float = 1e-6,
    solution_tol: float = 1e-6,
    seed: int | None = None,
) -> AuditResult:
    """Run the fit -> perturb -> per-point audit pipeline on a solution field.

    Preconditions verified up front: u solves the equation on the box
    (max |F| <= solution_tol), u is convex up to -tau_zero, and ``level``
    does not exceed the null dimension k = n - max observed rank.
    """
    from .fields import fit_polynomial, perturb_to_distinct, PERTURBATION_SEED

    u.validate_box(box)
    pts = box.grid_points()
    n = box.n
    ju = u.jets_batch(pts, order=2)
    f_vals = np.asarray(op.value(ju.d2, ju.du, ju.u, pts), dtype=float)
    worst = int(np.argmax(np.abs(f_vals)))
    if abs(f_vals[worst]) > solution_tol:
        raise PreconditionError(
            f"field does not solve the equation on the box: |F| = {abs(f_vals[worst]):.3g} "
            f"at x = {pts[worst].tolist()}"
        )
    eigvals = np.linalg.eigvalsh(0.5 * (ju.d2 + np.swapaxes(ju.d2, -1, -2)))
    if tau_zero is None:
        tau_zero = 1e-8 * max(1.0, float(eigvals.max()))
    if float(eigvals.min()) < -tau_zero:
        raise PreconditionError(
            f"field is not convex on the box (eigenvalue {eigvals.min():.3g})"
        )
    ranks = (eigvals > tau_zero).sum(axis=1)
    k = n - int(ranks.max())
    if level > k:
        raise PreconditionError(
            f"audit level {level} exceeds the null dimension k = {k} of the solution"
        )

    poly0, fit_report = fit_polynomial(u, box, fit_degree)
    if seed is None:
        seed = PERTURBATION_SEED
    perturbed = perturb_to_distinct(poly0, box, tau, seed)

    jp = perturbed.jets_batch(pts, order=4)
    samples: list[AuditSample] = []
    trace_terms, grad_norms, values = [], [], []
    gap_mins, pair_mins = [], []
    eq_max = 0.0
    masked_count = 0

    for i in range(pts.shape[0]):
        hej = hessian_eigen_jet(
            0.5 * (jp.d2[i] + jp.d2[i].T), jp.d3[i], jp.d4[i], gap_threshold
        )
        lam = hej.eigenvalues
        q_val = weighted_eigsum(lam, level)
        if hej.gap_flags.any():
            masked_count += 1
            samples.append(
                AuditSample(
                    x=pts[i],
                    value=q_val,
                    grad_norm=float("nan"),
                    trace_term=float("nan"),
                    form_bound_gap=float("nan"),
                    pair_bound_gap=float("nan"),
                    equation_residuals=np.full(n, np.nan),
                    masked=True,
                )
            )
            continue
        w = _eigsum_weights(level)
        grad_eig = np.einsum("j,jja->a", w, hej.d3[:level, :level])
        hess_eig = _cancelled_hessian(lam, hej.d3, hej.d4, level)
        hess_naive = _naive_hessian(lam, hej.d3, hej.d4, level)
        if np.abs(hess_eig - hess_naive).max() > 1e-9 * max(1.0, np.abs(hess_naive).max()):
            raise ConsistencyError("eigsum Hessian self-check failed during audit")

        state = OperatorState(
            a=0.5 * (jp.d2[i] + jp.d2[i].T), p=jp.du[i], u=float(jp.u[i]), x=pts[i]
        )
        oj = operator_jet(op, state)
        ojr = rotate_operator_jet(oj, hej.frame)
        du_eig = hej.frame.T @ jp.du[i]
        d2_eig = np.diag(lam)

        trace_term = float(np.einsum("ab,ab->", ojr.fab, hess_eig))
        form_gap, pair_gap = _star_and_bounds(ojr, lam, du_eig, hej.d3, level)
        eq_res = np.array(
            [_dd_residual_terms(ojr, du_eig, d2_eig, hej.d3, hej.d4, j) for j in range(n)]
        )
        eq_max = max(eq_max, float(np.abs(eq_res).max()))

        grad_norm = float(np.linalg.norm(grad_eig))
        samples.append(
            AuditSample(
                x=pts[i],
                value=q_val,
                grad_norm=grad_norm,
                trace_term=trace_term,
                form_bound_gap=form_gap,
                pair_bound_gap=pair_gap,
                equation_residuals=eq_res,
                masked=False,
            )
        )
        trace_terms.append(trace_term)
        grad_norms.append(grad_norm)
        values.append(q_val)
        gap_mins.append(form_gap)
        pair_mins.append(pair_gap)

    if not trace_terms:
        raise PreconditionError("every grid point is masked; perturbation too small")
    fitted_c, quantiles = _fit_constant(
        np.array(trace_terms), np.array(grad_norms), np.array(values), slack_tol
    )
    masked_fraction = masked_count / len(samples)
    return AuditResult(
        samples=samples,
        level=level,
        fit_degree=fit_degree,
        tau=tau,
        fitted_c=fitted_c,
        slack_quantiles=quantiles,
        masked_fraction=masked_fraction,
        valid=masked_fraction <= 0.20,
        fit_deviations=fit_report.deviations,
        form_bound_gap_min=float(min(gap_mins)),
        pair_bound_gap_min=float(min(pair_mins)),
        equation_residual_max=eq_max,
        perturbed=perturbed,
        tau_zero=float(tau_zero),
    )


# ---------------------------------------------------------------------------
# semi-concavity chord audit


@dataclass(frozen=True)
class SemiconcavityReport:
    max_violation: float
    chord_constant: float
    pairs: int


def semiconcavity_audit(
    field: ScalarField, level: int, box: BoxDomain, pairs: int, seed: int = 0
) -> SemiconcavityReport:
    """Chord inequality of the weighted eigenvalue sum over random segments.

    For points x, y in the box and t in (0, 1) the semi-concavity of
    Q(z) = h(D2 field(z)) gives

        (1-t) Q(x) + t Q(y) <= Q(x_t) + K t (1-t) |y - x|^2

    with K = Lip(h) * max|D3 field| * diam(box).  Returns the largest
    left-minus-right value; anything above rounding noise is a violation.
    Q itself needs no spectral gap, so degenerate points participate.
    """
    field.validate_box(box)
    n = box.n
    grid = box.grid_points()
    d3 = field.jets_batch(grid, order=3).d3
    max_d3 = float(np.sqrt(np.einsum("pijk,pijk->p", d3, d3)).max())
    k_const = eigsum_lipschitz(n, level) * max_d3 * box.diameter()

    rng = np.random.default_rng(seed)
    x = box.center + rng.uniform(-1.0, 1.0, size=(pairs, n)) * box.half_width
    y = box.center + rng.uniform(-1.0, 1.0, size=(pairs, n)) * box.half_width
    t = rng.uniform(0.05, 0.95, size=pairs)
    xt = (1.0 - t)[:, None] * x + t[:, None] * y

    stacked = np.concatenate([x, y, xt], axis=0)
    hess = field.hessian_batch(stacked)
    lam = np.linalg.eigvalsh(0.5 * (hess + np.swapaxes(hess, -1, -2)))
    q_all = weighted_eigsum_batch(lam, level)
    qx, qy, qt = q_all[:pairs], q_all[pairs : 2 * pairs], q_all[2 * pairs :]
    sep2 = np.sum((y - x) ** 2, axis=1)
    violation = (1.0 - t) * qx + t * qy - qt - k_const * t * (1.0 - t) * sep2
    return SemiconcavityReport(
        max_violation=float(violation.max()), chord_constant=float(k_const), pairs=pairs
    )


# ---------------------------------------------------------------------------
# gradient bound audit


@dataclass(frozen=True)
class GradientBoundReport:
    c_fit: float
    violation: float
    sup_value: float
    max_grad_power: float
    unmasked: int
    alpha: float


def gradient_bound_audit(
    field: ScalarField,
    level: int,
    box: BoxDomain,
    alpha: float = 1.0,
    c_cap: float | None = None,
    gap_threshold: float | None = None,
) -> GradientBoundReport:
    """Measure max |dQ|^{1+1/alpha} against sup Q on the inner half box.

    ``c_fit`` is the smallest constant making the bound hold on the
    sampled points.  When ``c_cap`` is given, ``violation`` is the excess
    of the gradient power over ``c_cap * sup Q`` (zero when the bound
    holds).  alpha = 1 is exact for polynomial fields; grid-sampled
    fields must supply their own Holder exponent.
    """
    if not 0.0 < alpha <= 1.0:
        raise InputError("alpha must lie in (0, 1]")
    inner = box.shrink(0.5)
    pts = inner.grid_points()
    jets = field.jets_batch(pts, order=3)
    d2 = 0.5 * (jets.d2 + np.swapaxes(jets.d2, -1, -2))
    lam, frames = np.linalg.eigh(d2)
    sup_value = float(weighted_eigsum_batch(lam, level).max())

    if gap_threshold is None:
        norms = np.linalg.norm(d2, axis=(1, 2))
        thresholds = 1e-6 * np.maximum(1.0, norms)
    else:
        thresholds = np.full(pts.shape[0], float(gap_threshold))
    gaps = np.diff(lam, axis=1).min(axis=1)
    unmasked = gaps > thresholds
    if not unmasked.any():
        raise PreconditionError("no unmasked points on the inner half box")

    t3 = np.einsum("pijk,pia,pjb,pkc->pabc", jets.d3, frames, frames, frames, optimize=True)
    w = _eigsum_weights(level)
    grad = np.einsum("j,pjja->pa", w, t3[:, :level, :level, :])
    grad_norms = np.linalg.norm(grad, axis=1)
    power = 1.0 + 1.0 / alpha
    max_grad_power = float((grad_norms[unmasked] ** power).max())

    if sup_value > 0:
        c_fit = max_grad_power / sup_value
    else:
        c_fit = 0.0 if max_grad_power == 0.0 else float("inf")
    violation = 0.0
    if c_cap is not None:
        violation = max(0.0, max_grad_power - c_cap * sup_value)
    return GradientBoundReport(
        c_fit=float(c_fit),
        violation=float(violation),
        sup_value=sup_value,
        max_grad_power=max_grad_power,
        unmasked=int(unmasked.sum()),
        alpha=alpha,
    )


# ---------------------------------------------------------------------------
# mollified Harnack experiment


@dataclass(frozen=True)
class HarnackReport:
    ratios: dict
    source_norm: float
    q: float


def _bump_kernel(radius_cells: int, ndim: int) -> np.ndarray:
    """Normalized discrete bump kernel supported on |z| < radius (in cells)."""
    r = radius_cells
    axes = [np.arange(-r + 1, r)] * ndim
    mesh = np.meshgrid(*axes, indexing="ij")
    dist2 = sum(m.astype(float) ** 2 for m in mesh) / r**2
    kernel = np.zeros_like(dist2)
    inside = dist2 < 1.0
    kernel[inside] = np.exp(-1.0 / (1.0 - dist2[inside]))
    total = kernel.sum()
    if total <= 0:
        raise InputError("empty mollification kernel")
    return kernel / total


def _mollify(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Convolution on the valid interior (no padding)."""
    ndim = values.ndim
    out_shape = tuple(v - k + 1 for v, k in zip(values.shape, kernel.shape))
    if any(s <= 0 for s in out_shape):
        raise InputError("grid too coarse for the mollification radius")
    out = np.zeros(out_shape)
    for offset in np.ndindex(kernel.shape):
        weight = kernel[offset]
        if weight == 0.0:
            continue
        slices = tuple(slice(o, o + s) for o, s in zip(offset, out_shape))
        out += weight * values[slices]
    return out


def harnack_audit(
    values: np.ndarray,
    source: np.ndarray,
    h: float,
    q: float = 0.5,
    eps_cells: tuple = (2, 4, 8),
    inner_fraction: float = 0.5,
) -> HarnackReport:
    """Normalized mean-to-inf ratios of mollified nonnegative grid data.

    For each radius ``c`` (in cells; the physical radius is c*h) the data
    are mollified by a discrete bump kernel and the ratio

        (mean over B' of v^q)^(1/q) / (inf over B' of v + |source|_{L^n} + 1e-12)

    is reported, with B' the central ``inner_fraction`` sub-box clipped to
    the mollifiable interior.  ``source`` is the nonnegative L^n forcing
    term (dimension n = values.ndim).
    """
    values = np.asarray(values, dtype=float)
    source = np.asarray(source, dtype=float)
    if values.shape != source.shape:
        raise InputError("values and source grids must have the same shape")
    if float(values.min()) < -1e-10:
        raise InputError(f"values must be >= -1e-10, found {values.min():.3g}")
    values = np.maximum(values, 0.0)
    if (source < 0).any():
        raise InputError("source must be non-negative (pass its positive part)")
    ndim = values.ndim
    source_norm = float((np.sum(source**ndim) * h**ndim) ** (1.0 / ndim))

    ratios: dict[int, float] = {}
    for c in eps_cells:
        c = int(c)
        if c < 2:
            raise InputError("mollification radius must span at least 2 cells")
        kernel = _bump_kernel(c, ndim)
        core = _mollify(values, kernel)
        margin = c - 1
        sel = []
        for dim_full, dim_core in zip(values.shape, core.shape):
            lo_inner = int(math.floor((dim_full - 1) * (0.5 - inner_fraction / 2)))
            hi_inner = int(math.ceil((dim_full - 1) * (0.5 + inner_fraction / 2))) + 1
            lo = max(lo_inner - margin, 0)
            hi = min(hi_inner - margin, dim_core)
            if hi <= lo:
                raise InputError("grid too coarse: inner box vanishes after mollification")
            sel.append(slice(lo, hi))
        region = core[tuple(sel)]
        mean_pow = float(np.mean(region**q) ** (1.0 / q))
        ratios[c] = mean_pow / (float(region.min()) + source_norm + 1e-12)
    return HarnackReport(ratios=ratios, source_norm=source_norm, q=q)
