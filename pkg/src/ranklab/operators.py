"""Fully nonlinear operators F(A, p, u, x) and their structural convexity forms.

An operator enters the lab through its second-order jet: the value F and
all first and second partial derivatives with respect to the symmetric
matrix slot A, the gradient slot p, the scalar slot u and the position x.
Derivatives with respect to A use the full-contraction convention

    d/dt F(A + tX) = sum_{a,b} Fab[a, b] * X[a, b],

so for F = log det A the matrix Fab is A^{-1} exactly.

From a jet the module assembles the quadratic form in (X, Z, Y),

    B(X, Z, Y) = Fabrs X X + 2 Fab Ainv X X + Fxx Z Z
                 - 2 Fab_u X Y - 2 Fab_x X Z + 2 Fux Y Z + Fuu Y^2,

whose non-negativity at every valid state is equivalent to local convexity
of (A, u, x) -> F(A^{-1}, p, u, x).  ``form_spectrum`` diagonalizes the
form on orthonormal coordinates (off-diagonal X entries carry sqrt(2)
weights so |X| means the Frobenius norm), ``strict_eta`` computes the
largest eta with B >= eta |X|^2 by eliminating (Z, Y) through a Schur
complement, and ``direct_convexity_check`` probes convexity by brute-force
midpoint sampling, independent of the form assembly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .symmat import check_symmetric, symmetrize


@dataclass(frozen=True)
class OperatorState:
    """Evaluation point (A, p, u, x) of an operator."""

    a: np.ndarray
    p: np.ndarray
    u: float
    x: np.ndarray

    def __post_init__(self):
        a = check_symmetric(np.asarray(self.a, dtype=float), "state matrix A")
        p = np.asarray(self.p, dtype=float).reshape(-1)
        x = np.asarray(self.x, dtype=float).reshape(-1)
        if p.shape[0] != a.shape[0] or x.shape[0] != a.shape[0]:
            raise InputError("state vector dimensions do not match A")
        if not (np.isfinite(p).all() and np.isfinite(x).all() and math.isfinite(self.u)):
            raise InputError("state has non-finite entries")
        for arr in (a, p, x):
            arr.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class OperatorJet:
    """Value and first/second derivatives of F at a state, plus A^{-1}."""

    state: OperatorState
    f: float
    fab: np.ndarray        # dF/dA, symmetric (n, n)
    fp: np.ndarray         # dF/dp, (n,)
    fu: float
    fx: np.ndarray         # dF/dx, (n,)
    fabrs: np.ndarray      # d2F/dA dA, (n, n, n, n)
    fab_pr: np.ndarray     # d2F/dA dp, (n, n, n)
    fab_u: np.ndarray      # d2F/dA du, (n, n)
    fab_xr: np.ndarray     # d2F/dA dx, (n, n, n)
    fpp: np.ndarray        # (n, n)
    fpu: np.ndarray        # (n,)
    fpx: np.ndarray        # (n, n), index order (p_a, x_b)
    fuu: float
    fux: np.ndarray        # (n,)
    fxx: np.ndarray        # (n, n)
    ainv: np.ndarray

    @property
    def n(self) -> int:
        return self.state.n

    def validate(self, tol: float = 1e-10) -> None:
        n = self.n
        scale = max(1.0, float(np.abs(self.fabrs).max()), float(np.abs(self.fab).max()))
        if np.abs(self.fab - self.fab.T).max() > tol * scale:
            raise InputError("Fab not symmetric")
        for mat, name in ((self.fpp, "Fpp"), (self.fxx, "Fxx"), (self.fab_u, "Fab_u")):
            if np.abs(mat - mat.T).max() > tol * scale:
                raise InputError(f"{name} not symmetric")
        t = self.fabrs
        for swapped in (t.transpose(1, 0, 2, 3), t.transpose(0, 1, 3, 2), t.transpose(2, 3, 0, 1)):
            if np.abs(t - swapped).max() > tol * scale:
                raise InputError("Fabrs pair symmetry violated")
        if np.abs(self.ainv @ self.state.a - np.eye(n)).max() > 1e-10 * max(
            1.0, float(np.abs(self.ainv).max()) * float(np.abs(self.state.a).max())
        ):
            raise InputError("Ainv is not the inverse of the state matrix")


def _zeros_jet_parts(n: int) -> dict:
    return {
        "fp": np.zeros(n),
        "fu": 0.0,
        "fx": np.zeros(n),
        "fabrs": np.zeros((n, n, n, n)),
        "fab_pr": np.zeros((n, n, n)),
        "fab_u": np.zeros((n, n)),
        "fab_xr": np.zeros((n, n, n)),
        "fpp": np.zeros((n, n)),
        "fpu": np.zeros(n),
        "fpx": np.zeros((n, n)),
        "fuu": 0.0,
        "fux": np.zeros(n),
        "fxx": np.zeros((n, n)),
    }


def _safe_inv(a: np.ndarray) -> np.ndarray:
    try:
        ainv = np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:
        raise InputError("state matrix A is singular") from exc
    if not np.isfinite(ainv).all():
        raise InputError("state matrix A is numerically singular")
    return ainv


class Operator:
    """Base class for catalog operators.

    ``value`` accepts batched arguments (leading dimensions broadcast);
    ``analytic_jet`` returns the full second-order jet at a single state
    or None if the operator only supports the finite-difference fallback.
    """

    name: str = "operator"
    elliptic: bool = True
    convex: bool = True

    def value(self, a, p, u, x):
        raise NotImplementedError

    def analytic_jet(self, state: OperatorState) -> OperatorJet | None:
        return None

    def jet1_batch(self, a, p, u, x):
        """(F, Fab, Fp, Fu) with leading batch dimensions (used by the solver)."""
        raise NotImplementedError

    def is_valid(self, a, p, u, x) -> np.ndarray:
        """Boolean validity mask over leading batch dimensions."""
        a = np.asarray(a, dtype=float)
        return np.ones(a.shape[:-2], dtype=bool)

    def describe(self) -> str:
        return self.name


class TraceLaplace(Operator):
    """F = tr A - c (the Poisson operator in disguise)."""

    def __init__(self, c: float):
        self.c = float(c)
        self.name = f"trace_laplace(c={self.c:g})"

    def value(self, a, p, u, x):
        a = np.asarray(a, dtype=float)
        return np.einsum("...ii->...", a) - self.c

    def analytic_jet(self, state: OperatorState) -> OperatorJet:
        n = state.n
        return OperatorJet(
            state=state,
            f=float(self.value(state.a, state.p, state.u, state.x)),
            fab=np.eye(n),
            ainv=_safe_inv(state.a),
            **_zeros_jet_parts(n),
        )

    def jet1_batch(self, a, p, u, x):
        a = np.asarray(a, dtype=float)
        n = a.shape[-1]
        f = self.value(a, p, u, x)
        fab = np.broadcast_to(np.eye(n), a.shape).copy()
        fp = np.zeros(a.shape[:-1])
        fu = np.zeros(a.shape[:-2])
        return f, fab, fp, fu


class LogDet(Operator):
    """F = log det A - c, valid on positive definite A."""

    def __init__(self, c: float):
        self.c = float(c)
        self.name = f"logdet(c={self.c:g})"

    def value(self, a, p, u, x):
        a = np.asarray(a, dtype=float)
        sign, logabs = np.linalg.slogdet(a)
        if np.any(sign <= 0):
            raise InputError("logdet operator evaluated at non-positive-definite A")
        return logabs - self.c

    def analytic_jet(self, state: OperatorState) -> OperatorJet:
        n = state.n
        ainv = _safe_inv(state.a)
        parts = _zeros_jet_parts(n)
        parts["fabrs"] = -0.5 * (
            np.einsum("ar,bs->abrs", ainv, ainv) + np.einsum("as,br->abrs", ainv, ainv)
        )
        return OperatorJet(
            state=state,
            f=float(self.value(state.a, state.p, state.u, state.x)),
            fab=symmetrize(ainv),
            ainv=ainv,
            **parts,
        )

    def jet1_batch(self, a, p, u, x):
        a = np.asarray(a, dtype=float)
        f = self.value(a, p, u, x)
        fab = np.linalg.inv(a)
        fab = 0.5 * (fab + np.swapaxes(fab, -1, -2))
        fp = np.zeros(a.shape[:-1])
        fu = np.zeros(a.shape[:-2])
        return f, fab, fp, fu

    def is_valid(self, a, p, u, x) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        return np.linalg.eigvalsh(a)[..., 0] > 0


class InverseTraceGeneral(Operator):
    """F = alpha u + beta |x| - gamma / tr A, valid where tr A > 0.

    alpha = 0, beta = 1, gamma = n - 1 reproduces the radial operator whose
    exact solution is u = |x|; alpha = 1, beta = 0, gamma = 1 is the
    Korevaar-Lewis operator u - 1/tr A.  Both satisfy the convexity
    condition with equality in the X direction A itself, so they pass the
    non-strict test and fail every strict lower bound.
    """

    def __init__(self, alpha: float, beta: float, gamma: float | None, name: str | None = None):
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.gamma = None if gamma is None else float(gamma)
        self.name = name or (
            f"inverse_trace_general(alpha={self.alpha:g},beta={self.beta:g},gamma={self.gamma:g})"
        )

    def _gamma(self, n: int) -> float:
        return float(n - 1) if self.gamma is None else self.gamma

    def value(self, a, p, u, x):
        a = np.asarray(a, dtype=float)
        x = np.asarray(x, dtype=float)
        t = np.einsum("...ii->...", a)
        if np.any(t <= 0):
            raise InputError("inverse-trace operator evaluated at non-positive trace")
        out = -self._gamma(a.shape[-1]) / t
        if self.alpha != 0.0:
            out = out + self.alpha * np.asarray(u, dtype=float)
        if self.beta != 0.0:
            out = out + self.beta * np.linalg.norm(x, axis=-1)
        return out

    def analytic_jet(self, state: OperatorState) -> OperatorJet:
        n = state.n
        gamma = self._gamma(n)
        t = float(np.trace(state.a))
        if t <= 0:
            raise InputError("inverse-trace operator evaluated at non-positive trace")
        eye = np.eye(n)
        parts = _zeros_jet_parts(n)
        parts["fu"] = self.alpha
        parts["fabrs"] = (-2.0 * gamma / t**3) * np.einsum("ab,rs->abrs", eye, eye)
        if self.beta != 0.0:
            r = float(np.linalg.norm(state.x))
            if r < 1e-12:
                raise InputError("radial term evaluated at the origin")
            xhat = state.x / r
            parts["fx"] = self.beta * xhat
            parts["fxx"] = self.beta * (eye - np.outer(xhat, xhat)) / r
        return OperatorJet(
            state=state,
            f=float(self.value(state.a, state.p, state.u, state.x)),
            fab=(gamma / t**2) * eye,
            ainv=_safe_inv(state.a),
            **parts,
        )

    def jet1_batch(self, a, p, u, x):
        a = np.asarray(a, dtype=float)
        n = a.shape[-1]
        f = self.value(a, p, u, x)
        t = np.einsum("...ii->...", a)
        fab = (self._gamma(n) / t**2)[..., None, None] * np.eye(n)
        fp = np.zeros(a.shape[:-1])
        fu = np.full(a.shape[:-2], self.alpha)
        return f, fab, fp, fu

    def is_valid(self, a, p, u, x) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        ok = np.einsum("...ii->...", a) > 0
        if self.beta != 0.0:
            ok = ok & (np.linalg.norm(np.asarray(x, dtype=float), axis=-1) > 1e-9)
        return ok


class NegTrace(Operator):
    """F = -tr A: deliberately non-elliptic and non-convex (negative control)."""

    elliptic = False
    convex = False
    name = "neg_trace"

    def value(self, a, p, u, x):
        a = np.asarray(a, dtype=float)
        return -np.einsum("...ii->...", a)

    def analytic_jet(self, state: OperatorState) -> OperatorJet:
        n = state.n
        return OperatorJet(
            state=state,
            f=float(self.value(state.a, state.p, state.u, state.x)),
            fab=-np.eye(n),
            ainv=_safe_inv(state.a),
            **_zeros_jet_parts(n),
        )

    def jet1_batch(self, a, p, u, x):
        a = np.asarray(a, dtype=float)
        n = a.shape[-1]
        f = self.value(a, p, u, x)
        fab = np.broadcast_to(-np.eye(n), a.shape).copy()
        return f, fab, np.zeros(a.shape[:-1]), np.zeros(a.shape[:-2])


def make_operator(name: str, params=()) -> Operator:
    """Instantiate a catalog operator by name and parameter list."""
    params = list(params)
    if name == "trace_laplace":
        if len(params) != 1:
            raise InputError("trace_laplace takes one parameter (c)")
        return TraceLaplace(params[0])
    if name == "logdet":
        if len(params) != 1:
            raise InputError("logdet takes one parameter (c)")
        return LogDet(params[0])
    if name == "radial_inverse_trace":
        if params:
            raise InputError("radial_inverse_trace takes no parameters")
        return InverseTraceGeneral(0.0, 1.0, None, name="radial_inverse_trace")
    if name == "korevaar_lewis":
        if params:
            raise InputError("korevaar_lewis takes no parameters")
        return InverseTraceGeneral(1.0, 0.0, 1.0, name="korevaar_lewis")
    if name == "inverse_trace_general":
        if len(params) != 3:
            raise InputError("inverse_trace_general takes (alpha, beta, gamma)")
        return InverseTraceGeneral(*params)
    if name == "neg_trace":
        if params:
            raise InputError("neg_trace takes no parameters")
        return NegTrace()
    raise InputError(
        f"unknown operator {name!r}; known: trace_laplace, logdet, radial_inverse_trace, "
        "korevaar_lewis, inverse_trace_general, neg_trace"
    )


CATALOG = ("trace_laplace", "logdet", "radial_inverse_trace", "korevaar_lewis",
           "inverse_trace_general")


# ---------------------------------------------------------------------------
# jets: analytic with finite-difference fallback

FD_STEP_FIRST = 1e-4
FD_STEP_SECOND = 1e-3


def operator_jet(op: Operator, state: OperatorState) -> OperatorJet:
    """Second-order jet of ``op`` at ``state`` (analytic when available)."""
    jet = op.analytic_jet(state)
    if jet is None:
        jet = operator_jet_fd(op, state)
    jet.validate()
    return jet


def _sym_dirs(n: int) -> list[np.ndarray]:
    dirs = []
    for a in range(n):
        for b in range(a, n):
            e = np.zeros((n, n))
            e[a, b] = e[b, a] = 1.0
            dirs.append(e)
    return dirs


def operator_jet_fd(
    op: Operator,
    state: OperatorState,
    step1: float = FD_STEP_FIRST,
    step2: float = FD_STEP_SECOND,
) -> OperatorJet:
    """Full second-order jet by central finite differences.

    Steps are scaled by the state magnitude.  This is the generic fallback
    and the cross-check oracle for the analytic builtin jets.
    """
    n = state.n
    scale = max(
        1.0,
        float(np.linalg.norm(state.a)),
        float(np.linalg.norm(state.p)),
        abs(state.u),
        float(np.linalg.norm(state.x)),
    )
    h1 = step1 * scale
    h2 = step2 * scale

    def val(da=None, dp=None, du=0.0, dx=None) -> float:
        a = state.a + (0 if da is None else da)
        p = state.p + (0 if dp is None else dp)
        x = state.x + (0 if dx is None else dx)
        return float(op.value(symmetrize(a), p, state.u + du, x))

    f0 = val()
    sym_dirs = _sym_dirs(n)

    def dir_kwargs(kind: str, payload):
        if kind == "a":
            return {"da": payload}
        if kind == "p":
            return {"dp": payload}
        if kind == "u":
            return {"du": payload}
        return {"dx": payload}

    kinds: list[tuple[str, object]] = [("a", d) for d in sym_dirs]
    kinds += [("p", np.eye(n)[i]) for i in range(n)]
    kinds += [("u", 1.0)]
    kinds += [("x", np.eye(n)[i]) for i in range(n)]

    def first(kind, payload):
        plus = val(**dir_kwargs(kind, _scaled(payload, h1)))
        minus = val(**dir_kwargs(kind, _scaled(payload, -h1)))
        return (plus - minus) / (2 * h1)

    def second(kind1, pay1, kind2, pay2):
        if kind1 == kind2 and _same_payload(pay1, pay2):
            plus = val(**dir_kwargs(kind1, _scaled(pay1, h2)))
            minus = val(**dir_kwargs(kind1, _scaled(pay1, -h2)))
            return (plus - 2 * f0 + minus) / h2**2
        kw_pp = _merge(dir_kwargs(kind1, _scaled(pay1, h2)), dir_kwargs(kind2, _scaled(pay2, h2)))
        kw_pm = _merge(dir_kwargs(kind1, _scaled(pay1, h2)), dir_kwargs(kind2, _scaled(pay2, -h2)))
        kw_mp = _merge(dir_kwargs(kind1, _scaled(pay1, -h2)), dir_kwargs(kind2, _scaled(pay2, h2)))
        kw_mm = _merge(dir_kwargs(kind1, _scaled(pay1, -h2)), dir_kwargs(kind2, _scaled(pay2, -h2)))
        return (val(**kw_pp) - val(**kw_pm) - val(**kw_mp) + val(**kw_mm)) / (4 * h2**2)

    # first derivatives
    pairs = [(a, b) for a in range(n) for b in range(a, n)]
    mult = {pair: (1.0 if pair[0] == pair[1] else 2.0) for pair in pairs}
    fab = np.zeros((n, n))
    for (a, b), d in zip(pairs, sym_dirs):
        g = first("a", d) / mult[(a, b)]
        fab[a, b] = fab[b, a] = g
    fp = np.array([first("p", np.eye(n)[i]) for i in range(n)])
    fu = first("u", 1.0)
    fx = np.array([first("x", np.eye(n)[i]) for i in range(n)])

    # second derivatives
    fabrs = np.zeros((n, n, n, n))
    for i, ((a, b), d1) in enumerate(zip(pairs, sym_dirs)):
        for (r, s), d2 in list(zip(pairs, sym_dirs))[i:]:
            g = second("a", d1, "a", d2) / (mult[(a, b)] * mult[(r, s)])
            for aa, bb in ((a, b), (b, a)):
                for rr, ss in ((r, s), (s, r)):
                    fabrs[aa, bb, rr, ss] = g
                    fabrs[rr, ss, aa, bb] = g
    fab_pr = np.zeros((n, n, n))
    fab_u = np.zeros((n, n))
    fab_xr = np.zeros((n, n, n))
    for (a, b), d in zip(pairs, sym_dirs):
        for r in range(n):
            g = second("a", d, "p", np.eye(n)[r]) / mult[(a, b)]
            fab_pr[a, b, r] = fab_pr[b, a, r] = g
            g = second("a", d, "x", np.eye(n)[r]) / mult[(a, b)]
            fab_xr[a, b, r] = fab_xr[b, a, r] = g
        g = second("a", d, "u", 1.0) / mult[(a, b)]
        fab_u[a, b] = fab_u[b, a] = g
    fpp = np.zeros((n, n))
    fpx = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if j >= i:
                fpp[i, j] = fpp[j, i] = second("p", np.eye(n)[i], "p", np.eye(n)[j])
            fpx[i, j] = second("p", np.eye(n)[i], "x", np.eye(n)[j])
    fpu = np.array([second("p", np.eye(n)[i], "u", 1.0) for i in range(n)])
    fux = np.array([second("u", 1.0, "x", np.eye(n)[i]) for i in range(n)])
    fuu = second("u", 1.0, "u", 1.0)
    fxx = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            fxx[i, j] = fxx[j, i] = second("x", np.eye(n)[i], "x", np.eye(n)[j])

    return OperatorJet(
        state=state,
        f=f0,
        fab=symmetrize(fab),
        fp=fp,
        fu=fu,
        fx=fx,
        fabrs=fabrs,
        fab_pr=fab_pr,
        fab_u=symmetrize(fab_u),
        fab_xr=fab_xr,
        fpp=symmetrize(fpp),
        fpu=fpu,
        fpx=fpx,
        fuu=fuu,
        fux=fux,
        fxx=symmetrize(fxx),
        ainv=_safe_inv(state.a),
    )


def _scaled(payload, h):
    if isinstance(payload, float):
        return payload * h
    return payload * h


def _same_payload(p1, p2) -> bool:
    if isinstance(p1, float) and isinstance(p2, float):
        return p1 == p2
    if isinstance(p1, np.ndarray) and isinstance(p2, np.ndarray):
        return p1 is p2 or np.array_equal(p1, p2)
    return False


def _merge(kw1: dict, kw2: dict) -> dict:
    out = dict(kw1)
    for key, value in kw2.items():
        if key in out:
            out[key] = out[key] + value
        else:
            out[key] = value
    return out


def rotate_operator_jet(jet: OperatorJet, r: np.ndarray) -> OperatorJet:
    """Express the jet in the orthonormal frame whose columns are ``r``.

    All tensor slots (A-indices, p-indices, x-indices) rotate together, so
    identities that contract operator derivatives against field jets stay
    valid when both sides are rotated into the same frame.
    """
    r = np.asarray(r, dtype=float)
    rot2 = lambda m: r.T @ m @ r
    state = OperatorState(
        a=symmetrize(rot2(jet.state.a)),
        p=r.T @ jet.state.p,
        u=jet.state.u,
        x=r.T @ jet.state.x,
    )
    return OperatorJet(
        state=state,
        f=jet.f,
        fab=symmetrize(rot2(jet.fab)),
        fp=r.T @ jet.fp,
        fu=jet.fu,
        fx=r.T @ jet.fx,
        fabrs=np.einsum("ijkl,ia,jb,kc,ld->abcd", jet.fabrs, r, r, r, r, optimize=True),
        fab_pr=np.einsum("ijk,ia,jb,kc->abc", jet.fab_pr, r, r, r, optimize=True),
        fab_u=symmetrize(rot2(jet.fab_u)),
        fab_xr=np.einsum("ijk,ia,jb,kc->abc", jet.fab_xr, r, r, r, optimize=True),
        fpp=symmetrize(rot2(jet.fpp)),
        fpu=r.T @ jet.fpu,
        fpx=rot2(jet.fpx),
        fuu=jet.fuu,
        fux=r.T @ jet.fux,
        fxx=symmetrize(rot2(jet.fxx)),
        ainv=symmetrize(rot2(jet.ainv)),
    )


# ---------------------------------------------------------------------------
# the structural quadratic form


def convexity_form(jet: OperatorJet, x_mat: np.ndarray, z: np.ndarray, y: float) -> float:
    """Evaluate the seven-term structural quadratic form at (X, Z, Y)."""
    x_mat = symmetrize(np.asarray(x_mat, dtype=float))
    z = np.asarray(z, dtype=float).reshape(-1)
    t1 = np.einsum("abrs,ab,rs->", jet.fabrs, x_mat, x_mat)
    t2 = 2.0 * np.einsum("ar,bs,ab,rs->", jet.fab, jet.ainv, x_mat, x_mat)
    t3 = float(z @ jet.fxx @ z)
    t4 = -2.0 * float(np.einsum("ab,ab->", jet.fab_u, x_mat)) * y
    t5 = -2.0 * float(np.einsum("abr,ab,r->", jet.fab_xr, x_mat, z))
    t6 = 2.0 * float(jet.fux @ z) * y
    t7 = jet.fuu * y * y
    return float(t1 + t2 + t3 + t4 + t5 + t6 + t7)


def _sym_coord_basis(n: int) -> np.ndarray:
    """Orthonormal basis of Sym(n) for the Frobenius inner product, stacked (nx, n, n)."""
    mats = []
    for a in range(n):
        for b in range(a, n):
            e = np.zeros((n, n))
            if a == b:
                e[a, a] = 1.0
            else:
                e[a, b] = e[b, a] = 1.0 / math.sqrt(2.0)
            mats.append(e)
    return np.stack(mats)


def sym_to_coords(x_mat: np.ndarray) -> np.ndarray:
    """Coordinates of a symmetric matrix in the sqrt(2)-weighted basis."""
    n = x_mat.shape[0]
    out = []
    for a in range(n):
        for b in range(a, n):
            out.append(x_mat[a, a] if a == b else math.sqrt(2.0) * x_mat[a, b])
    return np.array(out)


def coords_to_sym(c: np.ndarray, n: int) -> np.ndarray:
    x_mat = np.zeros((n, n))
    k = 0
    for a in range(n):
        for b in range(a, n):
            if a == b:
                x_mat[a, a] = c[k]
            else:
                x_mat[a, b] = x_mat[b, a] = c[k] / math.sqrt(2.0)
            k += 1
    return x_mat


@dataclass(frozen=True)
class FormSpectrum:
    """Assembled structural form on orthonormal (X, Z, Y) coordinates."""

    dimension: int
    matrix: np.ndarray
    min_eigenvalue: float
    minimizer_x: np.ndarray
    minimizer_z: np.ndarray
    minimizer_y: float
    eta: float
    eta_witness_x: np.ndarray | None
    eta_status: str


def assemble_form_matrix(jet: OperatorJet) -> np.ndarray:
    """Symmetric matrix of the structural form on (X, Z, Y) coordinates."""
    n = jet.n
    basis = _sym_coord_basis(n)
    nx = basis.shape[0]
    m_xx = np.einsum("abrs,kab,lrs->kl", jet.fabrs, basis, basis, optimize=True)
    m_xx += 2.0 * np.einsum("ar,bs,kab,lrs->kl", jet.fab, jet.ainv, basis, basis, optimize=True)
    m_xx = 0.5 * (m_xx + m_xx.T)
    m_xz = -np.einsum("abr,kab->kr", jet.fab_xr, basis, optimize=True)
    m_xy = -np.einsum("ab,kab->k", jet.fab_u, basis, optimize=True)
    dim = nx + n + 1
    m = np.zeros((dim, dim))
    m[:nx, :nx] = m_xx
    m[:nx, nx : nx + n] = m_xz
    m[nx : nx + n, :nx] = m_xz.T
    m[:nx, -1] = m_xy
    m[-1, :nx] = m_xy
    m[nx : nx + n, nx : nx + n] = jet.fxx
    m[nx : nx + n, -1] = jet.fux
    m[-1, nx : nx + n] = jet.fux
    m[-1, -1] = jet.fuu
    return m


def form_spectrum(jet: OperatorJet) -> FormSpectrum:
    """Diagonalize the structural form and compute the strict constant.

    The state matrix A must be positive definite, matching the domain on
    which the form characterizes convexity.
    """
    if np.linalg.eigvalsh(jet.state.a)[0] <= 0:
        raise InputError("form requested at a state with non-positive-definite A")
    n = jet.n
    nx = n * (n + 1) // 2
    m = assemble_form_matrix(jet)
    w, v = np.linalg.eigh(m)
    vec = v[:, 0]
    eta, witness, status = _strict_eta_from_matrix(m, nx, n)
    return FormSpectrum(
        dimension=m.shape[0],
        matrix=m,
        min_eigenvalue=float(w[0]),
        minimizer_x=coords_to_sym(vec[:nx], n),
        minimizer_z=vec[nx : nx + n].copy(),
        minimizer_y=float(vec[-1]),
        eta=eta,
        eta_witness_x=witness,
        eta_status=status,
    )


def _strict_eta_from_matrix(m: np.ndarray, nx: int, n: int):
    m_xx = m[:nx, :nx]
    m_xw = m[:nx, nx:]
    m_ww = m[nx:, nx:]
    scale = max(1.0, float(np.abs(m).max()))
    w_eigs, w_vecs = np.linalg.eigh(m_ww)
    if w_eigs[0] < -1e-10 * scale:
        # the (Z, Y) block alone is unbounded below: no eta can work
        return float("-inf"), None, "zy_block_indefinite"
    pinv = np.linalg.pinv(m_ww, rcond=1e-12, hermitian=True)
    residual = m_xw.T - m_ww @ (pinv @ m_xw.T)
    if np.abs(residual).max() > 1e-8 * scale:
        return float("-inf"), None, "zy_block_inconsistent"
    schur = m_xx - m_xw @ pinv @ m_xw.T
    schur = 0.5 * (schur + schur.T)
    eigs, vecs = np.linalg.eigh(schur)
    witness = coords_to_sym(vecs[:, 0], n)
    return float(eigs[0]), witness, "ok"


def strict_eta(jet: OperatorJet):
    """Largest eta with form >= eta |X|^2; (-inf, None, status) when none exists.

    Returns (eta, witness_x, status): the witness is a unit-Frobenius-norm
    symmetric matrix achieving the minimum of the reduced form.
    """
    spectrum = form_spectrum(jet)
    return spectrum.eta, spectrum.eta_witness_x, spectrum.eta_status


# ---------------------------------------------------------------------------
# brute-force convexity probe


@dataclass(frozen=True)
class ConvexityCheck:
    max_violation: float
    witness: tuple | None
    trials: int


def direct_convexity_check(
    op: Operator, p: np.ndarray, sampler, trials: int, seed: int = 0
) -> ConvexityCheck:
    """Max midpoint-convexity defect of G(A, u, x) = F(A^{-1}, p, u, x).

    ``sampler(rng)`` must return a G-space point (A, u, x) with A positive
    definite inside the operator's validity region.  A positive return
    value certifies a convexity violation at the witness pair; for a
    convex operator the result is bounded by floating-point noise.
    """
    rng = np.random.default_rng(seed)
    p = np.asarray(p, dtype=float)
    worst = -math.inf
    witness = None

    def g(a, u, x) -> float:
        return float(op.value(_safe_inv(symmetrize(a)), p, u, x))

    for _ in range(trials):
        a1, u1, x1 = sampler(rng)
        a2, u2, x2 = sampler(rng)
        mid = g(0.5 * (a1 + a2), 0.5 * (u1 + u2), 0.5 * (np.asarray(x1) + np.asarray(x2)))
        violation = mid - 0.5 * (g(a1, u1, x1) + g(a2, u2, x2))
        if violation > worst:
            worst = violation
            witness = ((a1, u1, x1), (a2, u2, x2))
    return ConvexityCheck(max_violation=float(worst), witness=witness, trials=trials)


def random_valid_state(op: Operator, n: int, rng: np.random.Generator) -> OperatorState:
    """Random state in the operator's validity region (PD matrix, x away from 0)."""
    for _ in range(100):
        raw = rng.standard_normal((n, n))
        a = symmetrize(raw.T @ raw / n + np.diag(rng.uniform(0.2, 1.0, size=n)))
        p = rng.standard_normal(n)
        u = float(rng.standard_normal())
        x = rng.standard_normal(n)
        norm = np.linalg.norm(x)
        if norm < 1e-9:
            continue
        x = x * (rng.uniform(0.7, 2.5) / norm)
        if op.is_valid(a, p, u, x):
            return OperatorState(a=a, p=p, u=u, x=x)
    raise InputError(f"could not sample a valid state for {op.name}")


def neighborhood_sampler(state: OperatorState, rho: float = 0.02):
    """Sampler of G-space points near the G-image of ``state``.

    The operator's convexity form at ``state`` speaks about the Hessian of
    G at (A^{-1}, u, x); this sampler draws positive definite matrices and
    scalars in a ball of relative radius ``rho`` around that point.
    """
    a0 = _safe_inv(state.a)
    lam_min = float(np.linalg.eigvalsh(a0)[0])
    if lam_min <= 0:
        raise InputError("neighborhood sampler needs a positive definite G-point")
    step = rho * min(1.0, lam_min)

    def sample(rng: np.random.Generator):
        da = rng.standard_normal(a0.shape)
        da = 0.5 * (da + da.T)
        da *= step / max(1.0, np.linalg.norm(da))
        du = float(rng.normal(scale=rho))
        dx = rng.normal(scale=rho, size=state.x.shape)
        return a0 + da, state.u + du, state.x + dx

    return sample
