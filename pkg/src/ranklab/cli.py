"""Scenario runner and command-line entry point.

A scenario is a strict TOML file naming a domain box, a field (builtin,
file-backed, or solved on the fly), an operator, and an ordered list of
checks.  ``run_scenario`` executes the checks, writes summary.json /
audit.jsonl / rankmap.csv / meta.json into the output directory and
returns the process exit code:

* 0 -- every check passed,
* 2 -- a numerical property was violated (summary names the first failure),
* 3 -- input or precondition error (bad config, unmet hypothesis).

Repeated runs of the same config produce byte-identical summary.json;
timestamps live in meta.json only.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__, reports
from .errors import ConsistencyError, InputError, PreconditionError, RankLabError, SolverError
from .fields import BoxDomain, GridField, builtin_field, load_grid_field, load_polynomial_field
from .ineq import (
    differential_inequality_audit,
    equation_residual_vector,
    gradient_bound_audit,
    harnack_audit,
    semiconcavity_audit,
)
from .operators import (
    OperatorState,
    direct_convexity_check,
    form_spectrum,
    make_operator,
    neighborhood_sampler,
    operator_jet,
)
from .rank import default_tau_zero, fixed_direction_certificate, rank_map, rank_verdict
from .solver import DiscreteProblem, newton_solve

CHECK_NAMES = (
    "convexity",
    "ellipticity",
    "rank",
    "fixed_directions",
    "inequality",
    "semiconcavity",
    "gradient_bound",
    "harnack",
    "solution_identity",
)

_ROOT_KEYS = {
    "name", "checks", "domain", "field", "operator", "tolerances", "ineq", "ladder",
    "harnack", "fixed_directions", "semiconcavity", "solution_identity", "convexity",
    "output",
}
_SECTION_KEYS = {
    "domain": {"center", "half_width", "grid", "seed"},
    "field": {
        "kind", "name", "params", "path",
        "boundary_name", "boundary_params", "guess_name", "guess_params", "tol", "max_iter",
    },
    "operator": {"name", "params"},
    "tolerances": {
        "tau_zero", "delta_gap", "form_tol", "slack_tol", "theta_tol", "cert_tol",
        "solution_tol",
    },
    "ineq": {"level", "alpha", "q99_tol", "max_masked"},
    "ladder": {"fit_degrees", "tau"},
    "harnack": {"q", "eps_cells", "spread_tol"},
    "fixed_directions": {"points", "strict_threshold"},
    "semiconcavity": {"pairs", "tol"},
    "solution_identity": {"points", "tol"},
    "convexity": {"states", "trials"},
    "output": {"dir"},
}


def _check_keys(table: dict, allowed: set, where: str) -> None:
    for key in table:
        if key not in allowed:
            raise InputError(f"unknown key {key!r} in {where}")


class Scenario:
    """Parsed, validated scenario configuration."""

    def __init__(self, raw: dict, base_dir: Path):
        _check_keys(raw, _ROOT_KEYS, "scenario root")
        for section, keys in _SECTION_KEYS.items():
            if section in raw:
                if not isinstance(raw[section], dict):
                    raise InputError(f"[{section}] must be a table")
                _check_keys(raw[section], keys, f"[{section}]")
        try:
            self.name = str(raw["name"])
            dom = raw["domain"]
            self.center = np.atleast_1d(np.asarray(dom["center"], dtype=float))
            self.half_width = dom.get("half_width", 0.5)
            self.grid = int(dom["grid"])
            self.seed = int(dom.get("seed", 0))
            self.field_cfg = dict(raw["field"])
            self.op_cfg = dict(raw["operator"])
        except KeyError as exc:
            raise InputError(f"missing required scenario key: {exc}") from exc
        self.n = self.center.shape[0]
        checks = raw.get("checks", [])
        if not isinstance(checks, list):
            raise InputError("'checks' must be a list")
        for c in checks:
            if c not in CHECK_NAMES:
                raise InputError(f"unknown check {c!r}; known: {', '.join(CHECK_NAMES)}")
        self.checks = list(checks)

        tol = raw.get("tolerances", {})
        self.tau_zero = float(tol.get("tau_zero", 0.0)) or None
        self.delta_gap = float(tol.get("delta_gap", 0.0)) or None
        self.form_tol = float(tol.get("form_tol", 1e-8))
        self.slack_tol = float(tol.get("slack_tol", 1e-6))
        self.theta_tol = float(tol.get("theta_tol", 1e-6))
        self.cert_tol = float(tol.get("cert_tol", 1e-7))
        self.solution_tol = float(tol.get("solution_tol", 1e-6))

        ineq = raw.get("ineq", {})
        self.level = int(ineq.get("level", 1))
        self.alpha = float(ineq.get("alpha", 1.0))
        self.q99_tol = float(ineq.get("q99_tol", 1e-4))
        self.max_masked = float(ineq.get("max_masked", 0.05))

        ladder = raw.get("ladder", {})
        self.fit_degrees = [int(d) for d in ladder.get("fit_degrees", [4, 5, 6])]
        self.taus = [float(t) for t in ladder.get("tau", [1e-2, 1e-3, 1e-4])]
        if len(self.fit_degrees) != len(self.taus):
            raise InputError("[ladder] fit_degrees and tau must have equal length")

        har = raw.get("harnack", {})
        self.harnack_q = float(har.get("q", 0.5))
        self.eps_cells = [int(c) for c in har.get("eps_cells", [2, 4, 8])]
        self.harnack_spread = float(har.get("spread_tol", 4.0))

        fd = raw.get("fixed_directions", {})
        self.cert_points = int(fd.get("points", 50))
        self.strict_threshold = float(fd.get("strict_threshold", 1e-6))

        sc = raw.get("semiconcavity", {})
        self.sc_pairs = int(sc.get("pairs", 2000))
        self.sc_tol = float(sc.get("tol", 1e-8))

        si = raw.get("solution_identity", {})
        self.si_points = int(si.get("points", 200))
        self.si_tol = float(si.get("tol", 1e-8))

        cv = raw.get("convexity", {})
        self.cv_states = int(cv.get("states", 20))
        self.cv_trials = int(cv.get("trials", 40))

        out = raw.get("output", {})
        self.out_dir = Path(out.get("dir", f"out/{self.name}"))
        self.base_dir = base_dir

        for dependent in ("semiconcavity", "gradient_bound", "harnack"):
            if dependent in self.checks and "inequality" not in self.checks:
                raise InputError(f"check {dependent!r} requires the 'inequality' check")
        if "fixed_directions" in self.checks and "rank" not in self.checks:
            raise InputError("check 'fixed_directions' requires the 'rank' check")

    def box(self) -> BoxDomain:
        return BoxDomain(self.center, np.asarray(self.half_width, dtype=float), self.grid)


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise InputError(f"{path}: TOML parse error: {exc}") from exc
    return Scenario(raw, path.parent)


def _build_field(scn: Scenario, op, box: BoxDomain):
    cfg = scn.field_cfg
    kind = cfg.get("kind")
    if kind == "builtin":
        return builtin_field(str(cfg["name"]), scn.n, cfg.get("params", [])), {}
    if kind == "polynomial_file":
        return load_polynomial_field(scn.base_dir / str(cfg["path"])), {}
    if kind == "grid_file":
        return load_grid_field(scn.base_dir / str(cfg["path"])), {}
    if kind == "solve":
        boundary = builtin_field(
            str(cfg["boundary_name"]), scn.n, cfg.get("boundary_params", [])
        )
        guess = builtin_field(str(cfg["guess_name"]), scn.n, cfg.get("guess_params", []))
        h = box.uniform_spacing()
        solve_box = BoxDomain(box.center, box.half_width + 2 * h, box.grid_per_axis + 4)
        prob = DiscreteProblem(op, solve_box, boundary, guess)
        result = newton_solve(
            prob,
            max_iter=int(cfg.get("max_iter", 30)),
            tol=float(cfg.get("tol", 1e-10)),
        )
        info = {
            "solver_residual": result.achieved_residual,
            "solver_iterations": result.iterations,
        }
        return result.field, info
    raise InputError(
        f"unknown field kind {kind!r}; known: builtin, polynomial_file, grid_file, solve"
    )


def _strided_indices(total: int, wanted: int) -> np.ndarray:
    wanted = min(max(1, wanted), total)
    return np.unique(np.linspace(0, total - 1, wanted).round().astype(int))


class _Runner:
    def __init__(self, scn: Scenario):
        self.scn = scn
        self.op = make_operator(str(scn.op_cfg["name"]), scn.op_cfg.get("params", []))
        self.box = scn.box()
        self.field, self.field_info = _build_field(scn, self.op, self.box)
        if self.field.n != scn.n:
            raise InputError("field dimension does not match the domain")
        self.pts = self.box.grid_points()
        jets = self.field.jets_batch(self.pts, order=2)
        self.u_vals, self.du, self.d2 = jets.u, jets.du, jets.d2
        sym = 0.5 * (self.d2 + np.swapaxes(self.d2, -1, -2))
        self.eigvals = np.linalg.eigvalsh(sym)
        self.tau_zero = scn.tau_zero or default_tau_zero(float(self.eigvals.max()))
        self.rank_samples = None
        self.rank_verdict = None
        self.rungs = []  # AuditResult per ladder rung
        self.checks: dict[str, dict] = {}
        self.failures: list[str] = []

    # -- individual checks ---------------------------------------------------

    def _state_at(self, i: int, mu: float) -> OperatorState:
        a = 0.5 * (self.d2[i] + self.d2[i].T) + mu * np.eye(self.scn.n)
        return OperatorState(a=a, p=self.du[i], u=float(self.u_vals[i]), x=self.pts[i])

    def check_convexity(self):
        scn = self.scn
        idx = _strided_indices(self.pts.shape[0], scn.cv_states)
        mu = max(10.0 * self.tau_zero, 1e-9)
        form_min = float("inf")
        direct_max = float("-inf")
        for rank_i, i in enumerate(idx):
            state = self._state_at(int(i), mu)
            fs = form_spectrum(operator_jet(self.op, state))
            form_min = min(form_min, fs.min_eigenvalue)
            sampler = neighborhood_sampler(state, rho=0.02)
            chk = direct_convexity_check(
                self.op, state.p, sampler, scn.cv_trials, seed=scn.seed * 1000003 + rank_i
            )
            direct_max = max(direct_max, chk.max_violation)
        passed = form_min >= -scn.form_tol and direct_max <= scn.form_tol
        data = {
            "passed": passed,
            "states": int(idx.size),
            "form_min_eigenvalue": form_min,
            "direct_violation_max": direct_max,
        }
        if not passed:
            self.failures.append(
                f"convexity: form min eigenvalue {form_min:.3g}, "
                f"direct violation {direct_max:.3g}"
            )
        return data

    def check_ellipticity(self):
        f, fab, _, _ = self.op.jet1_batch(
            0.5 * (self.d2 + np.swapaxes(self.d2, -1, -2)), self.du, self.u_vals, self.pts
        )
        fab = 0.5 * (fab + np.swapaxes(fab, -1, -2))
        min_eig = float(np.linalg.eigvalsh(fab)[..., 0].min())
        passed = min_eig > 0.0
        if not passed:
            self.failures.append(f"ellipticity: min Fab eigenvalue {min_eig:.3g} <= 0")
        return {"passed": passed, "fab_min_eigenvalue": min_eig}

    def check_rank(self):
        scn = self.scn
        samples, tau_used = rank_map(self.field, self.box, self.tau_zero)
        verdict = rank_verdict(samples, scn.theta_tol)
        self.rank_samples = samples
        self.rank_verdict = verdict
        passed = verdict.constant
        if not passed:
            self.failures.append(
                f"rank: not constant (min {verdict.min_rank}, max {verdict.max_rank})"
            )
        dirs = verdict.fixed_null_directions
        return {
            "passed": passed,
            "constant": verdict.constant,
            "min_rank": verdict.min_rank,
            "max_rank": verdict.max_rank,
            "max_principal_angle": verdict.max_principal_angle,
            "fixed_null_directions": dirs.T.tolist() if dirs.size else "none",
            "tau_zero": tau_used,
        }

    def check_fixed_directions(self):
        scn = self.scn
        idx = _strided_indices(self.pts.shape[0], scn.cert_points)
        mu = max(10.0 * self.tau_zero, 1e-9)
        res_a = res_b = res_c = 0.0
        eta_min, eta_max = float("inf"), float("-inf")
        for i in idx:
            cert = fixed_direction_certificate(
                self.op, self.field, self.pts[int(i)], self.tau_zero
            )
            res_a = max(res_a, cert.residual_null_block)
            res_b = max(res_b, cert.residual_cross_block)
            res_c = max(res_c, cert.residual_eigsum_identity)
            eta, _, _ = (
                form_spectrum(operator_jet(self.op, self._state_at(int(i), mu))).eta,
                None,
                None,
            )
            eta_min = min(eta_min, eta)
            eta_max = max(eta_max, eta)
        strict_holds = eta_min > scn.strict_threshold
        verdict = self.rank_verdict
        angle = verdict.max_principal_angle if verdict is not None else float("nan")
        has_dirs = verdict is not None and verdict.fixed_null_directions.size > 0
        passed = res_a <= scn.cert_tol and res_c <= scn.cert_tol
        if strict_holds:
            passed = passed and res_b <= scn.cert_tol
            if verdict is not None and verdict.min_rank < scn.n:
                passed = passed and has_dirs and angle <= scn.theta_tol
        data = {
            "passed": passed,
            "points": int(idx.size),
            "strict_condition": "holds" if strict_holds else "failed",
            "eta_min": eta_min,
            "eta_max": eta_max,
            "residual_a_max": res_a,
            "residual_b_max": res_b,
            "residual_c_max": res_c,
            "fixed_null_directions": (
                verdict.fixed_null_directions.T.tolist() if has_dirs else "none"
            ),
            "max_principal_angle": angle,
        }
        if not passed:
            self.failures.append(
                f"fixed_directions: residuals a={res_a:.3g} b={res_b:.3g} c={res_c:.3g}, "
                f"strict={'holds' if strict_holds else 'failed'}"
            )
        return data

    def check_inequality(self):
        scn = self.scn
        ladder_rows = []
        overshoots = []
        passed = True
        for degree, tau in zip(scn.fit_degrees, scn.taus):
            audit = differential_inequality_audit(
                self.op,
                self.field,
                self.box,
                level=scn.level,
                fit_degree=degree,
                tau=tau,
                tau_zero=scn.tau_zero,
                gap_threshold=scn.delta_gap,
                slack_tol=scn.slack_tol,
                solution_tol=scn.solution_tol,
                seed=scn.seed,
            )
            self.rungs.append(audit)
            overshoot = max(0.0, audit.slack_quantiles["q99"])
            overshoots.append(overshoot)
            ladder_rows.append(
                {
                    "degree": degree,
                    "tau": tau,
                    "fitted_C": audit.fitted_c,
                    "slack_q50": audit.slack_quantiles["q50"],
                    "slack_q90": audit.slack_quantiles["q90"],
                    "slack_q99": audit.slack_quantiles["q99"],
                    "slack_max": audit.slack_quantiles["max"],
                    "masked_fraction": audit.masked_fraction,
                    "form_bound_gap_min": audit.form_bound_gap_min,
                    "pair_bound_gap_min": audit.pair_bound_gap_min,
                    "equation_residual_max": audit.equation_residual_max,
                    "fit_deviation_d3": audit.fit_deviations[3],
                }
            )
            if audit.form_bound_gap_min < -scn.form_tol:
                passed = False
                self.failures.append(
                    f"inequality: form bound gap {audit.form_bound_gap_min:.3g} at tau={tau:g}"
                )
            if audit.pair_bound_gap_min < -scn.form_tol:
                passed = False
                self.failures.append(
                    f"inequality: pair bound gap {audit.pair_bound_gap_min:.3g} at tau={tau:g}"
                )
            if audit.masked_fraction > scn.max_masked:
                passed = False
                self.failures.append(
                    f"inequality: masked fraction {audit.masked_fraction:.3f} at tau={tau:g}"
                )
        final_q99 = overshoots[-1]
        if final_q99 > scn.q99_tol:
            passed = False
            self.failures.append(f"inequality: final q99 slack overshoot {final_q99:.3g}")
        monotone = all(
            overshoots[i + 1] <= overshoots[i] * 1.1 + 1e-12 for i in range(len(overshoots) - 1)
        )
        if not monotone:
            passed = False
            self.failures.append("inequality: slack overshoot not non-increasing along ladder")
        return {
            "passed": passed,
            "level": scn.level,
            "ladder": ladder_rows,
            "final_q99_overshoot": final_q99,
            "monotone": monotone,
        }

    def check_semiconcavity(self):
        scn = self.scn
        report = semiconcavity_audit(
            self.rungs[-1].perturbed, scn.level, self.box, pairs=scn.sc_pairs, seed=scn.seed
        )
        passed = report.max_violation <= scn.sc_tol
        if not passed:
            self.failures.append(f"semiconcavity: violation {report.max_violation:.3g}")
        return {
            "passed": passed,
            "max_violation": report.max_violation,
            "chord_constant": report.chord_constant,
            "pairs": report.pairs,
        }

    def check_gradient_bound(self):
        scn = self.scn
        rows = []
        c_fits = []
        for audit in self.rungs:
            rep = gradient_bound_audit(
                audit.perturbed, scn.level, self.box, alpha=scn.alpha,
                gap_threshold=scn.delta_gap,
            )
            rows.append(
                {
                    "tau": audit.tau,
                    "c_fit": rep.c_fit,
                    "sup_value": rep.sup_value,
                    "max_grad_power": rep.max_grad_power,
                }
            )
            c_fits.append(rep.c_fit)
        # constants below the resolution floor are indistinguishable from zero
        floor = 1e-9
        spread = max(c_fits) / max(min(c_fits), floor)
        passed = max(c_fits) <= 4.0 * max(min(c_fits), floor)
        if not passed:
            self.failures.append(f"gradient_bound: C_fit spread {spread:.3g} exceeds 4")
        return {"passed": passed, "ladder": rows, "spread": spread, "floor": floor}

    def check_harnack(self):
        scn = self.scn
        dims = (self.box.grid_per_axis,) * scn.n
        h = self.box.uniform_spacing()
        rows = []
        all_ratios = []
        for audit in self.rungs:
            values = np.array([s.value for s in audit.samples]).reshape(dims)
            source = np.array(
                [
                    0.0
                    if s.masked
                    else max(0.0, s.trace_term - audit.fitted_c * (s.grad_norm + s.value))
                    for s in audit.samples
                ]
            ).reshape(dims)
            rep = harnack_audit(
                values, source, h, q=scn.harnack_q, eps_cells=tuple(scn.eps_cells)
            )
            rows.append(
                {
                    "tau": audit.tau,
                    "ratios": {str(c): r for c, r in rep.ratios.items()},
                    "source_norm": rep.source_norm,
                }
            )
            all_ratios.extend(rep.ratios.values())
        spread = max(all_ratios) / max(min(all_ratios), 1e-12)
        passed = spread <= scn.harnack_spread and all(np.isfinite(all_ratios))
        if not passed:
            self.failures.append(f"harnack: ratio spread {spread:.3g}")
        return {"passed": passed, "q": scn.harnack_q, "ladder": rows, "spread": spread}

    def check_solution_identity(self):
        scn = self.scn
        idx = _strided_indices(self.pts.shape[0], scn.si_points)
        worst = 0.0
        for i in idx:
            res = equation_residual_vector(self.op, self.field, self.pts[int(i)])
            worst = max(worst, float(np.abs(res).max()))
        passed = worst <= scn.si_tol
        if not passed:
            self.failures.append(f"solution_identity: max residual {worst:.3g}")
        return {"passed": passed, "points": int(idx.size), "max_residual": worst}

    # -- orchestration ---------------------------------------------------------

    def run(self) -> dict:
        handlers = {
            "convexity": self.check_convexity,
            "ellipticity": self.check_ellipticity,
            "rank": self.check_rank,
            "fixed_directions": self.check_fixed_directions,
            "inequality": self.check_inequality,
            "semiconcavity": self.check_semiconcavity,
            "gradient_bound": self.check_gradient_bound,
            "harnack": self.check_harnack,
            "solution_identity": self.check_solution_identity,
        }
        for name in self.scn.checks:
            self.checks[name] = handlers[name]()
        summary = {
            "name": self.scn.name,
            "n": self.scn.n,
            "seed": self.scn.seed,
            "field": {k: v for k, v in self.scn.field_cfg.items()},
            "operator": {k: v for k, v in self.scn.op_cfg.items()},
            "tau_zero": self.tau_zero,
            "checks": self.checks,
            "verdict": "pass" if not self.failures else "fail",
            "first_failure": self.failures[0] if self.failures else None,
        }
        summary["field"].update(self.field_info)
        return summary


def run_scenario(config_path, out_dir=None) -> int:
    """Execute a scenario config; write artifacts; return the exit code."""
    started = time.time()
    try:
        scn = load_scenario(config_path)
        target = Path(out_dir) if out_dir is not None else scn.out_dir
        runner = _Runner(scn)
        summary = runner.run()
    except (InputError, PreconditionError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConsistencyError as exc:
        print(f"self-check failed: {exc}", file=sys.stderr)
        return 2

    target.mkdir(parents=True, exist_ok=True)
    reports.write_json(target / "summary.json", summary)
    if runner.rank_samples is not None:
        reports.write_rankmap_csv(target / "rankmap.csv", runner.rank_samples)
    if runner.rungs:
        reports.write_audit_jsonl(target / "audit.jsonl", runner.rungs[-1].samples)
    meta = {
        "config": str(config_path),
        "duration_seconds": time.time() - started,
        "numpy_version": np.__version__,
        "package_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    reports.write_json(target / "meta.json", meta)
    if summary["verdict"] == "pass":
        return 0
    print(f"FAIL {scn.name}: {summary['first_failure']}", file=sys.stderr)
    return 2


FORMATS_TEXT = """\
File formats
============

summary.json
  Deterministic JSON (sorted keys, floats with 17 significant digits,
  non-finite values as the strings "nan"/"inf"/"-inf").  Top-level keys:
  name, n, seed, field, operator, tau_zero, checks, verdict,
  first_failure.  Each entry of "checks" carries a boolean "passed" plus
  check-specific diagnostics (see README).

audit.jsonl
  One JSON object per box grid point (row-major), from the final ladder
  rung of the inequality check:
    x                   grid point
    eigsum              weighted sum of the smallest `level` Hessian
                        eigenvalues of the perturbed fit
    grad_norm           |gradient| of that sum (NaN when masked)
    trace_term          trace of Fab against the eigsum Hessian
    form_bound_gap      structural-form bound minus separated terms
    pair_bound_gap      ellipticity bound gap for mixed third derivatives
    equation_residuals  twice-differentiated equation residual per direction
    masked              true when the spectral gap is below the threshold

rankmap.csv
  Header x1..xn,lambda1..lambdan,rank; one row per grid point
  (row-major), eigenvalues ascending, floats with 17 significant digits.

meta.json
  Timestamps, durations, versions.  Everything time-dependent lives
  here so summary.json stays byte-reproducible.

Polynomial field file
  One term per line: n integer exponents then the coefficient, e.g.
      2 0 0  0.5
  means 0.5 * x1^2 in three variables.  Terms are sorted by total degree,
  then lexicographically.  Round-trips bit-exactly.

Grid field file
  Header line: n h dim1 ... dimn origin1 ... originn
  followed by one value per line in row-major order.  h is the uniform
  spacing and origin is the coordinate of the first lattice point.
  Round-trips bit-exactly.
"""


def run_suite(directory, out_root=None) -> int:
    directory = Path(directory)
    configs = sorted(directory.glob("*.toml"))
    if not configs:
        print(f"error: no .toml scenarios in {directory}", file=sys.stderr)
        return 3
    worst = 0
    for cfg in configs:
        out_dir = None
        if out_root is not None:
            out_dir = Path(out_root) / cfg.stem
        code = run_scenario(cfg, out_dir)
        status = {0: "PASS", 2: "FAIL", 3: "ERROR"}.get(code, str(code))
        print(f"{cfg.stem}: {status}")
        worst = max(worst, code)
    return worst


def bundled_scenario_dir() -> Path:
    return Path(__file__).resolve().parent / "scenarios"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ranklab",
        description="Constant-rank verification scenarios for convex PDE solutions",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario config")
    p_run.add_argument("config", help="path to a scenario .toml file")
    p_run.add_argument("--out", default=None, help="output directory (overrides config)")

    p_suite = sub.add_parser("suite", help="run every .toml scenario in a directory")
    p_suite.add_argument(
        "directory",
        nargs="?",
        default=None,
        help="scenario directory (default: the bundled suite)",
    )
    p_suite.add_argument("--out", default=None, help="root output directory")

    sub.add_parser("formats", help="describe the report and field file formats")

    args = parser.parse_args(argv)
    if args.command == "run":
        return run_scenario(args.config, args.out)
    if args.command == "suite":
        directory = args.directory or bundled_scenario_dir()
        return run_suite(directory, args.out)
    if args.command == "formats":
        print(FORMATS_TEXT, end="")
        return 0
    return 3


if __name__ == "__main__":
    sys.exit(main())
