"""Dense symmetric-matrix spectral core.

Everything downstream leans on three ingredients implemented here:

* a deterministic eigendecomposition of small dense symmetric matrices,
* the triangular-weighted sum of the smallest ``level`` eigenvalues

      h(A) = level * lambda_1 + (level-1) * lambda_2 + ... + 1 * lambda_level,

  which is concave and Lipschitz on the space of symmetric matrices, and
* first/second derivative formulas for a simple eigenvalue of a Hessian
  field, expressed in the eigenframe of the Hessian at a point:

      d lambda_j / d a        = T3[j, j, a]
      d^2 lambda_j / da db    = T4[j, j, a, b]
                                + 2 * sum_{m != j} T3[m, a, j] * T3[m, b, j]
                                      / (lambda_j - lambda_m)

  where T3, T4 are the third/fourth derivative tensors of the underlying
  scalar field rotated into the eigenframe.

Matrices are plain ``numpy`` arrays; the module only supports the desk
scale n <= 8 and uses dense O(n^3) decompositions throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEigenvalueError, InputError

MAX_DIM = 8


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return the exactly symmetric part (a + a.T)/2 as a float array."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"expected a square matrix, got shape {a.shape}")
    return 0.5 * (a + a.T)


def check_symmetric(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate that ``a`` is square, exactly symmetric and finite."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"{name} must be square, got shape {a.shape}")
    if not (2 <= a.shape[0] <= MAX_DIM):
        raise InputError(f"{name} dimension {a.shape[0]} outside supported range 2..{MAX_DIM}")
    if not np.isfinite(a).all():
        raise InputError(f"{name} has non-finite entries")
    if not np.array_equal(a, a.T):
        raise InputError(f"{name} is not exactly symmetric; use symmetrize() first")
    return a


def default_gap_threshold(a: np.ndarray) -> float:
    """Degeneracy threshold below which adjacent eigenvalues count as repeated."""
    return 1e-6 * max(1.0, float(np.linalg.norm(a)))


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigendecomposition with a deterministic frame.

    Attributes
    ----------
    eigenvalues : (n,) ndarray
        Ascending eigenvalues.
    frame : (n, n) ndarray
        Orthonormal eigenvectors as columns, sign-fixed so that each
        column's largest-magnitude component is non-negative.
    gap_min : float
        Smallest gap between adjacent eigenvalues.
    """

    eigenvalues: np.ndarray
    frame: np.ndarray
    gap_min: float

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        v = self.frame
        return v @ np.diag(self.eigenvalues) @ v.T


def _fix_signs(frame: np.ndarray) -> np.ndarray:
    # First occurrence of the largest-magnitude component decides the sign.
    idx = np.argmax(np.abs(frame), axis=0)
    signs = np.sign(frame[idx, np.arange(frame.shape[1])])
    signs[signs == 0] = 1.0
    return frame * signs


def sym_eigh(a: np.ndarray) -> Spectrum:
    """Eigendecomposition of a symmetric matrix with a deterministic frame.

    Bitwise-identical input produces bitwise-identical output; the only
    freedom LAPACK leaves (eigenvector signs) is removed by making the
    largest-magnitude component of each eigenvector non-negative.
    """
    a = check_symmetric(a, "input matrix")
    w, v = np.linalg.eigh(a)
    v = _fix_signs(v)
    gaps = np.diff(w)
    gap_min = float(gaps.min()) if gaps.size else float("inf")
    return Spectrum(eigenvalues=w, frame=v, gap_min=gap_min)


def weighted_eigsum(eigenvalues: np.ndarray, level: int) -> float:
    """Triangular-weighted sum of the ``level`` smallest eigenvalues.

    With ascending eigenvalues lambda_1 <= ... <= lambda_n this is

        sum_{j=1}^{level} (level + 1 - j) * lambda_j,

    i.e. the smallest eigenvalue carries the largest weight.  As a matrix
    function it is concave and Lipschitz; as a function of a point in a
    Hessian field it is semi-concave.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    n = eigenvalues.shape[-1]
    if not 1 <= level <= n:
        raise InputError(f"level {level} outside 1..{n}")
    weights = np.arange(level, 0, -1, dtype=float)
    return float(eigenvalues[..., :level] @ weights)


def weighted_eigsum_batch(eigenvalues: np.ndarray, level: int) -> np.ndarray:
    """Vectorized :func:`weighted_eigsum` over a stack of ascending spectra."""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    n = eigenvalues.shape[-1]
    if not 1 <= level <= n:
        raise InputError(f"level {level} outside 1..{n}")
    weights = np.arange(level, 0, -1, dtype=float)
    return eigenvalues[..., :level] @ weights


def eigsum_lipschitz(n: int, level: int) -> float:
    """Frobenius-norm Lipschitz constant level*(level+1)/2 * sqrt(n) of the weighted sum."""
    return 0.5 * level * (level + 1) * float(np.sqrt(n))


@dataclass(frozen=True)
class HessianEigenJet:
    """Point-local spectral data of a Hessian field, in the eigenframe.

    ``d3`` and ``d4`` are the third/fourth derivative tensors of the
    scalar field rotated into the eigenframe of its Hessian at the point,
    so ``d3[j, j, a]`` is the eigenframe derivative of eigenvalue j in
    direction a (valid while eigenvalue j is simple).

    Attributes
    ----------
    eigenvalues : (n,) ndarray
    frame : (n, n) ndarray
        Columns are the eigenframe directions in original coordinates.
    d3 : (n, n, n) ndarray
    d4 : (n, n, n, n) ndarray
    gap_threshold : float
    gap_flags : (n, n) ndarray of bool
        ``gap_flags[j, m]`` is True iff j != m and the (j, m) eigenvalue
        gap is below ``gap_threshold``.
    """

    eigenvalues: np.ndarray
    frame: np.ndarray
    d3: np.ndarray
    d4: np.ndarray
    gap_threshold: float
    gap_flags: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def is_simple(self, j: int) -> bool:
        return not bool(self.gap_flags[j].any())


def hessian_eigen_jet(
    d2: np.ndarray,
    d3: np.ndarray,
    d4: np.ndarray,
    gap_threshold: float | None = None,
) -> HessianEigenJet:
    """Rotate third/fourth derivative tensors into the Hessian eigenframe.

    Parameters
    ----------
    d2, d3, d4
        Hessian, third and fourth derivative tensors of a scalar field at
        a point, in original coordinates (fully symmetric).
    gap_threshold
        Degeneracy cutoff; defaults to ``default_gap_threshold(d2)``.
    """
    d2 = check_symmetric(d2, "hessian")
    spec = sym_eigh(d2)
    if gap_threshold is None:
        gap_threshold = default_gap_threshold(d2)
    v = spec.frame
    d3r = np.einsum("ijk,ia,jb,kc->abc", np.asarray(d3, float), v, v, v, optimize=True)
    d4r = np.einsum("ijkl,ia,jb,kc,ld->abcd", np.asarray(d4, float), v, v, v, v, optimize=True)
    lam = spec.eigenvalues
    gaps = np.abs(lam[:, None] - lam[None, :])
    flags = gaps < gap_threshold
    np.fill_diagonal(flags, False)
    return HessianEigenJet(
        eigenvalues=lam,
        frame=v,
        d3=d3r,
        d4=d4r,
        gap_threshold=float(gap_threshold),
        gap_flags=flags,
    )


def _require_simple(jet: HessianEigenJet, j: int) -> None:
    if not 0 <= j < jet.n:
        raise InputError(f"eigenvalue index {j} outside 0..{jet.n - 1}")
    if not jet.is_simple(j):
        raise DegenerateEigenvalueError(
            f"eigenvalue {j} is within {jet.gap_threshold:g} of a neighbor; "
            "derivative formulas for simple eigenvalues do not apply"
        )


def eigenvalue_gradient(jet: HessianEigenJet, j: int) -> np.ndarray:
    """Gradient of the j-th ascending eigenvalue, in eigenframe coordinates.

    Multiply by ``jet.frame`` to express the gradient in original
    coordinates.
    """
    _require_simple(jet, j)
    return jet.d3[j, j, :].copy()


def eigenvalue_hessian(jet: HessianEigenJet, j: int) -> np.ndarray:
    """Hessian of the j-th ascending eigenvalue, in eigenframe coordinates.

    Conjugate with ``jet.frame`` to express it in original coordinates.
    """
    _require_simple(jet, j)
    lam = jet.eigenvalues
    n = jet.n
    out = jet.d4[j, j, :, :].copy()
    for m in range(n):
        if m == j:
            continue
        out += 2.0 * np.outer(jet.d3[m, :, j], jet.d3[m, :, j]) / (lam[j] - lam[m])
    return 0.5 * (out + out.T)


def midpoint_concavity_defect(
    n: int, level: int, trials: int, seed: int = 0, scale: float = 1.0
) -> float:
    """Max midpoint-concavity defect of the weighted eigenvalue sum.

    Draws ``trials`` random symmetric pairs (A, B) and returns the largest
    value of h((A+B)/2 evaluated as a chord defect)

        h_mid - (h(A) + h(B)) / 2

    with the sign flipped so that a *positive* return value means a
    concavity violation.  For a genuinely concave h this is bounded by
    floating-point noise.
    """
    rng = np.random.default_rng(seed)
    raw_a = rng.standard_normal((trials, n, n)) * scale
    raw_b = rng.standard_normal((trials, n, n)) * scale
    a = 0.5 * (raw_a + np.transpose(raw_a, (0, 2, 1)))
    b = 0.5 * (raw_b + np.transpose(raw_b, (0, 2, 1)))
    wa = np.linalg.eigvalsh(a)
    wb = np.linalg.eigvalsh(b)
    wm = np.linalg.eigvalsh(0.5 * (a + b))
    ha = weighted_eigsum_batch(wa, level)
    hb = weighted_eigsum_batch(wb, level)
    hm = weighted_eigsum_batch(wm, level)
    defect = 0.5 * (ha + hb) - hm
    return float(defect.max())
