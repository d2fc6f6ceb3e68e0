"""Hessian rank diagnostics across a box domain.

``rank_map`` samples the Hessian spectrum of a convex field on the box
grid and classifies eigenvalues against a zero cutoff; ``rank_verdict``
decides whether the rank is constant and, when the null spaces agree to
within a principal-angle tolerance, extracts the common fixed null
directions.  ``fixed_direction_certificate`` measures, at a single point,
the third-derivative identities that force the null space of a convex
solution to be locally constant when the operator's strict convexity
bound holds:

* residual (a): third derivatives with two indices inside the null block
  must vanish for any convex C^3 field;
* residual (b): third derivatives with the derivative direction in the
  null block and both matrix indices outside vanish exactly when the
  strict lower bound eta > 0 is available -- a positive (b) at a
  constant-rank point is the counterexample signature;
* residual (c): the Hessian identity for the (identically zero) sum of
  the k smallest eigenvalues, traced against the ellipticity weights Fab.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, PreconditionError
from .fields import BoxDomain, ScalarField
from .operators import Operator, OperatorState, operator_jet
from .symmat import _fix_signs, symmetrize

DEFAULT_THETA_TOL = 1e-6


def default_tau_zero(max_eigenvalue: float) -> float:
    """Zero cutoff for Hessian eigenvalues: 1e-8 * max(1, largest eigenvalue)."""
    return 1e-8 * max(1.0, float(max_eigenvalue))


@dataclass(frozen=True)
class RankSample:
    """Spectrum of the Hessian at one grid point.

    ``null_basis`` has orthonormal columns spanning the eigenvectors with
    eigenvalue <= tau_zero; ``rank + null_basis.shape[1] == n``.
    """

    x: np.ndarray
    eigenvalues: np.ndarray
    rank: int
    null_basis: np.ndarray


@dataclass(frozen=True)
class RankVerdict:
    constant: bool
    min_rank: int
    max_rank: int
    fixed_null_directions: np.ndarray  # (n, k) columns, empty (n, 0) when none
    max_principal_angle: float


def rank_map(
    f: ScalarField, box: BoxDomain, tau_zero: float | None = None
) -> tuple[list[RankSample], float]:
    """Rank samples at every box grid point, row-major.

    The field is first scanned for convexity: if any Hessian eigenvalue
    drops below -tau_zero the map is refused with the witness point.
    Returns the samples and the tau_zero actually used.
    """
    f.validate_box(box)
    pts = box.grid_points()
    hess = f.hessian_batch(pts)
    hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
    eigvals, frames = np.linalg.eigh(hess)
    if tau_zero is None:
        tau_zero = default_tau_zero(float(eigvals.max()))
    lam_min = float(eigvals.min())
    if lam_min < -tau_zero:
        i = int(np.argmin(eigvals[:, 0]))
        raise PreconditionError(
            f"field is not convex on the box: eigenvalue {lam_min:.6g} < -{tau_zero:.3g} "
            f"at x = {pts[i].tolist()}"
        )
    samples = []
    for i in range(pts.shape[0]):
        frame = _fix_signs(frames[i])
        null_cols = eigvals[i] <= tau_zero
        samples.append(
            RankSample(
                x=pts[i],
                eigenvalues=eigvals[i],
                rank=int((~null_cols).sum()),
                null_basis=frame[:, null_cols],
            )
        )
    return samples, float(tau_zero)


def principal_angles(b0: np.ndarray, b1: np.ndarray) -> np.ndarray:
    """Canonical angles between the column spans of two orthonormal bases."""
    if b0.shape[1] == 0 or b1.shape[1] == 0:
        return np.zeros(0)
    sv = np.linalg.svd(b0.T @ b1, compute_uv=False)
    return np.arccos(np.clip(sv, -1.0, 1.0))


def rank_verdict(
    samples: list[RankSample], theta_tol: float = DEFAULT_THETA_TOL
) -> RankVerdict:
    """Constancy of rank and, when null spaces agree, the fixed directions.

    Null spaces are compared pairwise against the first sample through
    principal angles; when the largest angle stays below ``theta_tol`` the
    common directions are read off as the dominant eigenvectors of the
    averaged null-space projector.
    """
    if not samples:
        raise InputError("rank verdict needs at least one sample")
    ranks = [s.rank for s in samples]
    min_rank, max_rank = min(ranks), max(ranks)
    n = samples[0].x.shape[0]
    constant = min_rank == max_rank
    if not constant:
        return RankVerdict(False, min_rank, max_rank, np.zeros((n, 0)), float("nan"))
    k = n - min_rank
    if k == 0:
        return RankVerdict(True, min_rank, max_rank, np.zeros((n, 0)), 0.0)
    b0 = samples[0].null_basis
    max_angle = 0.0
    projector = np.zeros((n, n))
    for s in samples:
        angles = principal_angles(b0, s.null_basis)
        if angles.size:
            max_angle = max(max_angle, float(angles.max()))
        projector += s.null_basis @ s.null_basis.T
    projector /= len(samples)
    if max_angle <= theta_tol:
        w, v = np.linalg.eigh(symmetrize(projector))
        directions = _fix_signs(v[:, ::-1][:, :k])
    else:
        directions = np.zeros((n, 0))
    return RankVerdict(True, min_rank, max_rank, directions, max_angle)


@dataclass(frozen=True)
class CertificateReport:
    """Third-derivative residuals at one point (see module docstring)."""

    x: np.ndarray
    k: int
    eigenvalues: np.ndarray
    residual_null_block: float       # (a): |u_pqi|, p,q in the null block
    residual_cross_block: float      # (b): |u_pqi|, i null, p,q in the positive block
    residual_eigsum_identity: float  # (c): |Fab . R_ab| for the zero eigenvalue sum
    r_matrix_norm: float


def fixed_direction_certificate(
    op: Operator, f: ScalarField, x, tau_zero: float
) -> CertificateReport:
    """Measure the fixed-null-direction identities for ``f`` at ``x``.

    Preconditions: the Hessian at ``x`` has k eigenvalues <= tau_zero and
    a strict spectral gap eigenvalue_{k+1} > 10 * tau_zero.  For k = 0 the
    report is trivially zero.  The ellipticity weights Fab are evaluated
    at a positive definite regularization A + mu I of the Hessian with
    mu = 10 * tau_zero, matching the limit used to evaluate the strict
    convexity bound at a degenerate solution state.
    """
    x = np.asarray(x, dtype=float)
    jet = f.jet4(x)
    d2 = symmetrize(jet.d2u)
    lam, frame = np.linalg.eigh(d2)
    frame = _fix_signs(frame)
    n = lam.shape[0]
    k = int((lam <= tau_zero).sum())
    if k == n:
        raise PreconditionError(
            f"all eigenvalues at x = {x.tolist()} are below tau_zero; no spectral gap"
        )
    if k > 0 and lam[k] <= 10.0 * tau_zero:
        raise PreconditionError(
            f"spectral gap too small at x = {x.tolist()}: "
            f"eigenvalue {lam[k]:.3g} <= 10 * tau_zero = {10 * tau_zero:.3g}"
        )
    if k == 0:
        return CertificateReport(x, 0, lam, 0.0, 0.0, 0.0, 0.0)

    t3 = np.einsum("ijk,ia,jb,kc->abc", jet.d3u, frame, frame, frame, optimize=True)
    t4 = np.einsum("ijkl,ia,jb,kc,ld->abcd", jet.d4u, frame, frame, frame, frame, optimize=True)

    res_a = float(np.abs(t3[:k, :k, :]).max())
    res_b = float(np.abs(t3[k:, k:, :k]).max())

    r_mat = np.einsum("jjab->ab", t4[:k, :k])
    for j in range(k):
        for m in range(k, n):
            r_mat = r_mat - 2.0 * np.outer(t3[m, :, j], t3[m, :, j]) / lam[m]
    r_mat = symmetrize(r_mat)

    mu = 10.0 * tau_zero
    state = OperatorState(a=d2 + mu * np.eye(n), p=jet.du, u=jet.u, x=x)
    fab = operator_jet(op, state).fab
    fab_rot = frame.T @ fab @ frame
    res_c = float(abs(np.einsum("ab,ab->", fab_rot, r_mat)))
    return CertificateReport(
        x=x,
        k=k,
        eigenvalues=lam,
        residual_null_block=res_a,
        residual_cross_block=res_b,
        residual_eigsum_identity=res_c,
        r_matrix_norm=float(np.linalg.norm(r_mat)),
    )
