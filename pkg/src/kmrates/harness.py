"""Experiment harness: config parsing, experiment runs, bound-vs-trace
validity reports, and the exponential-vs-quadratic comparison table.

Configs are TOML, one experiment per file; see the schema in the
package README.  Everything downstream of a parsed config is
deterministic in the seed, including the bytes of every file written.
"""

from __future__ import annotations

import csv
import io
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .geometry import GeodesicSpace, GeometryError, Sampler, AxiomReport
from .geometry import (check_w_axioms, check_cn_inequality,
                       check_segment_identities, check_metric_axioms,
                       check_midpoint_uniqueness)
from .convexity import (Modulus, modulus_from_name, monotonized,
                        check_uc_inequality, check_uc_lambda_inequality)
from .spaces import (EuclideanSpace, HyperboloidSpace, StarTreeSpace,
                     space_from_descriptor)
from .operators import (Operator, ConvexSet, BallSet, BoxSet, SubtreeSet,
                        WholeSpaceSet, make_identity, make_rotation,
                        make_hyperboloid_rotation, make_edge_swap,
                        make_scaling, make_metric_projection,
                        compose, check_nonexpansive)
from .iteration import (LambdaSchedule, constant_schedule, list_schedule,
                        alternating_schedule, IterationTrace, run_km,
                        check_residual_monotone, check_km_growth,
                        check_main_lemma_along, check_summed_descent_auto,
                        write_trace_csv)
from . import rates
from .rates import RateBound, ThetaFn

# axiom-suite default sample count; acceptance asks for at least 10^4
DEFAULT_SAMPLES = 10_000
# midpoint probing is 5x the work per sample, so it runs on fewer
MIDPOINT_SAMPLES = 2_000
# text rendering switches to the log form above this value
LOG_FORM_ABOVE = 10 ** 18


class ConfigError(Exception):
    """One or more schema problems; `errors` lists them all."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class _Collector:
    """Accumulates schema errors with best-effort line hints."""

    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.errors: list[str] = []

    def error(self, key: str, msg: str):
        hint = ""
        token = key.split(".")[-1]
        for i, line in enumerate(self.lines, start=1):
            stripped = line.split("#", 1)[0]
            if token in stripped:
                hint = f" (line {i})"
                break
        self.errors.append(f"{key}: {msg}{hint}")

    def raise_if_any(self):
        if self.errors:
            raise ConfigError(self.errors)


@dataclass
class ExperimentConfig:
    """A fully built experiment: spaces and operators are constructed,
    cross-validated, and ready to run."""

    name: str
    seed: int
    space: GeodesicSpace
    conv_set: ConvexSet
    operator: Operator
    schedule: LambdaSchedule
    start: Any
    steps: int
    target_residual: float
    eps_list: list
    samples: int
    sampler_radius: float
    tol: float
    modulus: Modulus
    modulus_name: str
    afp_radius_b: float | None
    d_c: float | None
    ishikawa_k: int | None
    reference_point: Any


def _get(table: dict, key: str, kinds, col: _Collector, path: str,
         required: bool = True, default=None):
    if key not in table:
        if required:
            col.error(f"{path}.{key}", "missing required key")
        return default
    val = table[key]
    if kinds is not None and not isinstance(val, kinds):
        col.error(f"{path}.{key}", f"expected {kinds}, got {type(val).__name__}")
        return default
    return val


def _build_space(table: dict, col: _Collector) -> GeodesicSpace | None:
    kind = _get(table, "kind", str, col, "space")
    if kind is None:
        return None
    params = {}
    if kind in ("euclidean", "hyperboloid"):
        dim = _get(table, "dim", int, col, "space")
        if dim is None:
            return None
        params["dim"] = dim
    elif kind == "star-tree":
        lengths = _get(table, "lengths", list, col, "space")
        if lengths is None:
            return None
        params["lengths"] = lengths
    else:
        col.error("space.kind", f"unknown space kind {kind!r}")
        return None
    try:
        return space_from_descriptor(kind, params)
    except (GeometryError, ValueError, TypeError) as exc:
        col.error("space", str(exc))
        return None


def _build_set(table: dict, space: GeodesicSpace, col: _Collector) -> ConvexSet | None:
    kind = _get(table, "kind", str, col, "set")
    if kind is None:
        return None
    try:
        if kind == "ball":
            radius = _get(table, "radius", (int, float), col, "set")
            if radius is None:
                return None
            if isinstance(space, HyperboloidSpace):
                spatial = table.get("center_spatial")
                center = (space.from_spatial(spatial) if spatial is not None
                          else space.base_point())
            elif isinstance(space, StarTreeSpace):
                col.error("set.kind", "ball sets are not supported on star trees")
                return None
            else:
                center = table.get("center", [0.0] * space.dim)
                center = space.point(center)
            out = BallSet(center, radius)
        elif kind == "box":
            low = _get(table, "low", list, col, "set")
            high = _get(table, "high", list, col, "set")
            if low is None or high is None:
                return None
            out = BoxSet(low, high)
        elif kind == "subtree":
            caps = _get(table, "caps", list, col, "set")
            if caps is None:
                return None
            out = SubtreeSet(caps)
        elif kind == "whole":
            out = WholeSpaceSet(table.get("diameter"))
        else:
            col.error("set.kind", f"unknown set kind {kind!r}")
            return None
        out.validate(space)
        return out
    except (GeometryError, ValueError, TypeError) as exc:
        col.error("set", str(exc))
        return None


def _build_operator(table: dict, space: GeodesicSpace, conv_set: ConvexSet,
                    col: _Collector) -> Operator | None:
    kind = _get(table, "kind", str, col, "operator")
    if kind is None:
        return None
    try:
        if kind == "identity":
            op = make_identity(space)
        elif kind == "rotation":
            angle = _get(table, "angle", (int, float), col, "operator")
            if angle is None:
                return None
            op = make_rotation(space, angle)
        elif kind == "hyperboloid-rotation":
            angle = _get(table, "angle", (int, float), col, "operator")
            if angle is None:
                return None
            op = make_hyperboloid_rotation(space, angle)
        elif kind == "edge-swap":
            op = make_edge_swap(space, table.get("shift", 1))
        elif kind == "scaling":
            factor = _get(table, "factor", (int, float), col, "operator")
            if factor is None:
                return None
            op = make_scaling(space, factor)
        elif kind == "projection":
            op = make_metric_projection(space, conv_set)
        else:
            col.error("operator.kind", f"unknown operator kind {kind!r}")
            return None
        if table.get("project_into_set", False) and kind != "projection":
            # keep the orbit inside the configured set
            op = compose(make_metric_projection(space, conv_set), op)
        return op
    except (GeometryError, ValueError, TypeError) as exc:
        col.error("operator", str(exc))
        return None


def _build_schedule(table: dict, col: _Collector) -> LambdaSchedule | None:
    kind = _get(table, "kind", str, col, "schedule")
    if kind is None:
        return None
    try:
        if kind == "constant":
            value = _get(table, "value", (int, float), col, "schedule")
            if value is None:
                return None
            return constant_schedule(value)
        if kind == "alternating":
            return alternating_schedule(table.get("base", 0.5),
                                        table.get("shift", 3))
        if kind == "list":
            values = _get(table, "values", list, col, "schedule")
            if values is None:
                return None
            return list_schedule(values, table.get("tail"))
        col.error("schedule.kind", f"unknown schedule kind {kind!r}")
        return None
    except (GeometryError, ValueError, TypeError) as exc:
        col.error("schedule", str(exc))
        return None


def _build_start(table: dict, space: GeodesicSpace, col: _Collector):
    try:
        if isinstance(space, HyperboloidSpace):
            spatial = table.get("start_spatial")
            if spatial is not None:
                return space.from_spatial(spatial)
            start = _get(table, "start", list, col, "iteration")
            return None if start is None else space.point(start)
        start = _get(table, "start", list, col, "iteration")
        if start is None:
            return None
        if isinstance(space, StarTreeSpace):
            if len(start) != 2:
                col.error("iteration.start", "expected [edge, offset]")
                return None
            return space.point(int(start[0]), float(start[1]))
        return space.point(start)
    except (GeometryError, ValueError, TypeError) as exc:
        col.error("iteration.start", str(exc))
        return None


def _build_reference(value, space: GeodesicSpace, col: _Collector):
    if value is None:
        return None
    try:
        if isinstance(space, StarTreeSpace):
            return space.point(int(value[0]), float(value[1]))
        return space.point(value)
    except (GeometryError, ValueError, TypeError, IndexError) as exc:
        col.error("bounds.reference_point", str(exc))
        return None


def parse_config(text: str, name: str = "experiment") -> ExperimentConfig:
    """Validate and build an experiment; raises ConfigError carrying
    every schema problem found, with line hints where possible."""
    col = _Collector(text)
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"TOML syntax: {exc}"]) from None

    name = raw.get("name", name)
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        col.error("seed", f"expected integer, got {type(seed).__name__}")
        seed = 0

    space_tab = raw.get("space")
    if not isinstance(space_tab, dict):
        col.error("space", "missing [space] table")
        col.raise_if_any()
    space = _build_space(space_tab, col)
    if space is None:
        col.raise_if_any()

    set_tab = raw.get("set", {"kind": "whole"})
    conv_set = _build_set(set_tab, space, col)

    op_tab = raw.get("operator")
    if not isinstance(op_tab, dict):
        col.error("operator", "missing [operator] table")
        operator = None
    else:
        operator = (None if conv_set is None
                    else _build_operator(op_tab, space, conv_set, col))

    sched_tab = raw.get("schedule")
    if not isinstance(sched_tab, dict):
        col.error("schedule", "missing [schedule] table")
        schedule = None
    else:
        schedule = _build_schedule(sched_tab, col)

    iter_tab = raw.get("iteration", {})
    steps = _get(iter_tab, "steps", int, col, "iteration", required=True, default=0)
    if steps is not None and steps < 0:
        col.error("iteration.steps", f"must be nonnegative, got {steps}")
    target_residual = float(iter_tab.get("target_residual", 0.0))
    start = _build_start(iter_tab, space, col) if space is not None else None

    check_tab = raw.get("check", {})
    eps_list = check_tab.get("eps", [])
    if not isinstance(eps_list, list) or not all(
            isinstance(e, (int, float)) and e > 0 for e in eps_list):
        col.error("check.eps", "expected a list of positive numbers")
        eps_list = []
    samples = check_tab.get("samples", DEFAULT_SAMPLES)
    if not isinstance(samples, int) or samples <= 0:
        col.error("check.samples", "expected a positive integer")
        samples = DEFAULT_SAMPLES
    sampler_radius = float(check_tab.get("radius", 2.0))
    tol = check_tab.get("tol")
    if tol is None:
        tol = space.tol if space is not None else 1e-9
    tol = float(tol)

    bounds_tab = raw.get("bounds", {})
    modulus_name = bounds_tab.get("modulus", "cat0")
    try:
        modulus = modulus_from_name(modulus_name, bounds_tab.get("modulus_value"))
    except ValueError as exc:
        col.error("bounds.modulus", str(exc))
        modulus = None
    afp_radius_b = bounds_tab.get("afp_radius_b")
    if afp_radius_b is not None and not (
            isinstance(afp_radius_b, (int, float)) and afp_radius_b > 0):
        col.error("bounds.afp_radius_b", "expected a positive number")
        afp_radius_b = None
    d_c = bounds_tab.get("d_C")
    if d_c is None and conv_set is not None:
        d_c = conv_set.diameter()
    elif d_c is not None and not (isinstance(d_c, (int, float)) and d_c > 0):
        col.error("bounds.d_C", "expected a positive number")
        d_c = None
    ishikawa_k = bounds_tab.get("ishikawa_K")
    if ishikawa_k is not None and not (isinstance(ishikawa_k, int) and ishikawa_k >= 2):
        col.error("bounds.ishikawa_K", "expected an integer >= 2")
        ishikawa_k = None
    reference_point = (_build_reference(bounds_tab.get("reference_point"),
                                        space, col)
                       if space is not None else None)

    if start is not None and conv_set is not None and space is not None:
        if not conv_set.contains(space, start):
            col.error("iteration.start", "start point lies outside the configured set")

    col.raise_if_any()
    return ExperimentConfig(
        name=name, seed=seed, space=space, conv_set=conv_set,
        operator=operator, schedule=schedule, start=start, steps=steps,
        target_residual=target_residual,
        eps_list=[float(e) for e in eps_list], samples=samples,
        sampler_radius=sampler_radius, tol=tol, modulus=modulus,
        modulus_name=modulus_name, afp_radius_b=afp_radius_b,
        d_c=None if d_c is None else float(d_c), ishikawa_k=ishikawa_k,
        reference_point=reference_point)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), name=path.stem)


@dataclass
class EpsRow:
    """One target accuracy with its crossing index and certificates."""

    eps: float
    n_star: int | None
    bounds: list[RateBound]
    valid: bool


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    trace: IterationTrace
    trace_path: Path | None
    rows: list[EpsRow] = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    @property
    def all_valid(self) -> bool:
        return all(r.valid for r in self.rows)

    @property
    def all_checks_pass(self) -> bool:
        return all(r.passed for r in self.checks.values())

    @property
    def passed(self) -> bool:
        return self.all_valid and self.all_checks_pass


def _theta_for(config: ExperimentConfig) -> ThetaFn:
    """Closed form for constant schedules (the form the constant-lambda
    corollaries use), minimal witness scan otherwise."""
    if config.schedule.constant is not None:
        return rates.theta_closed_form(config.schedule.constant)
    return rates.theta_from_schedule(config.schedule)


def applicable_bounds(config: ExperimentConfig, eps: float,
                      theta: ThetaFn | None = None) -> list[RateBound]:
    """Every certificate whose required parameters the config supplies.

    Missing parameters mean the bound is left out, never guessed at:
    the theorems have genuinely different hypotheses.
    """
    if theta is None:
        theta = _theta_for(config)
    m = config.modulus
    if not m.monotone_in_r:
        m = monotonized(m)
    out = []
    lam = config.schedule.constant
    cat0_family = config.modulus_name.startswith("cat0")
    if config.afp_radius_b is not None:
        out.append(rates.groetsch_bound(eps, config.afp_radius_b, theta, m))
        if m.has_eta_tilde:
            out.append(rates.groetsch_bound_tilde(eps, config.afp_radius_b, theta, m))
    if config.d_c is not None:
        if lam is not None:
            out.append(rates.constant_lambda_bound(eps, config.d_c, lam, m))
            if m.has_eta_tilde:
                out.append(rates.constant_lambda_bound_tilde(eps, config.d_c, lam, m))
        if cat0_family:
            out.append(rates.cat0_bound(eps, config.d_c, theta))
            if lam is not None:
                out.append(rates.cat0_constant_bound(eps, config.d_c, lam))
        if config.ishikawa_k is not None:
            out.append(rates.ishikawa_bound(eps, config.d_c, config.ishikawa_k))
    return out


def build_trace(config: ExperimentConfig) -> IterationTrace:
    return run_km(config.space, config.operator, config.start,
                  config.schedule, config.steps,
                  target_residual=config.target_residual)


def run_checks(config: ExperimentConfig,
               trace: IterationTrace | None = None) -> dict:
    """All property suites for one config: space axioms, uniform
    convexity, operator nonexpansiveness, and the trace inequalities."""
    space, tol = config.space, config.tol
    sampler = Sampler(seed=config.seed, count=config.samples,
                      radius=config.sampler_radius)
    mid_sampler = Sampler(seed=config.seed,
                          count=min(config.samples, MIDPOINT_SAMPLES),
                          radius=config.sampler_radius)
    reports = {}
    for r in check_metric_axioms(space, sampler, tol):
        reports[r.check] = r
    for r in check_w_axioms(space, sampler, tol):
        reports[r.check] = r
    reports["CN"] = check_cn_inequality(space, sampler, tol)
    reports["segment"] = check_segment_identities(space, sampler, tol)
    reports["midpoint-uniqueness"] = check_midpoint_uniqueness(space, mid_sampler, tol)
    reports["uc-midpoint"] = check_uc_inequality(space, config.modulus, sampler, tol)
    reports["uc-lambda"] = check_uc_lambda_inequality(space, config.modulus,
                                                      sampler, tol)
    reports["nonexpansive"] = check_nonexpansive(space, config.operator,
                                                 sampler, tol)

    if trace is None:
        trace = build_trace(config)
    reports["residual-monotone"] = check_residual_monotone(trace, tol)
    y = config.reference_point
    if y is None:
        y = config.operator.fixed_point
    if y is not None:
        m = config.modulus
        if not m.monotone_in_r:
            m = monotonized(m)
        reports["km-growth"] = check_km_growth(trace, y, tol)
        reports["descent-step"] = check_main_lemma_along(trace, m, tol, y=y)
        if m.has_eta_tilde:
            reports["descent-step-tilde"] = check_main_lemma_along(
                trace, m, tol, y=y, tilde=True)
        reports["descent-summed"] = check_summed_descent_auto(trace, m, tol, y=y)
    return reports


def run_experiment(config: ExperimentConfig,
                   out_dir: Path | str | None = None) -> ExperimentReport:
    """Run the iteration, write the trace CSV, evaluate every
    applicable bound at every configured eps, and run all checks."""
    trace = build_trace(config)
    trace_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        trace_path = out_dir / f"{config.name}.csv"
        reference = config.reference_point
        write_trace_csv(trace, trace_path, reference=reference)
    theta = _theta_for(config)
    rows = []
    for eps in config.eps_list:
        n_star = trace.first_crossing(eps)
        bounds = applicable_bounds(config, eps, theta)
        valid = n_star is not None and all(n_star <= b.value for b in bounds)
        rows.append(EpsRow(eps=eps, n_star=n_star, bounds=bounds, valid=valid))
    checks = run_checks(config, trace)
    return ExperimentReport(config=config, trace=trace, trace_path=trace_path,
                            rows=rows, checks=checks)


def format_value(bound: RateBound) -> str:
    """Exact integer, or the log form once digits stop being useful."""
    if bound.value > LOG_FORM_ABOVE and bound.log10 is not None:
        return f"~10^{bound.log10:.1f}"
    return str(bound.value)


def render_report_text(report: ExperimentReport) -> str:
    cfg = report.config
    out = io.StringIO()
    out.write(f"experiment {cfg.name} (seed {cfg.seed})\n")
    out.write(f"  space    {cfg.space.descriptor}\n")
    out.write(f"  operator {cfg.operator.descriptor}\n")
    out.write(f"  schedule {cfg.schedule.descriptor}\n")
    res0 = report.trace.residual(0)
    res_end = report.trace.residual(report.trace.last_index)
    out.write(f"  trace    {len(report.trace)} residuals, "
              f"res(0)={res0:.6g}, res(end)={res_end:.6g}\n")
    if report.trace_path is not None:
        out.write(f"  csv      {report.trace_path}\n")
    for row in report.rows:
        mark = "ok" if row.valid else "FAIL"
        n_star = "-" if row.n_star is None else str(row.n_star)
        parts = ", ".join(f"{b.theorem}={format_value(b)}" for b in row.bounds)
        out.write(f"  eps={row.eps:g}: n*={n_star} [{mark}] {parts}\n")
    for name, rep in report.checks.items():
        status = "PASS" if rep.passed else "FAIL"
        out.write(f"  {status} {name}: samples={rep.samples} "
                  f"violations={rep.violations} worst={rep.worst:.3g} "
                  f"skipped={rep.skipped} tol={rep.tol:g}\n")
    out.write("result: " + ("PASS" if report.passed else "FAIL") + "\n")
    return out.getvalue()


def render_report_csv(report: ExperimentReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["eps", "n_star", "theorem", "value", "valid"])
    for row in report.rows:
        n_star = "" if row.n_star is None else row.n_star
        for b in row.bounds:
            writer.writerow([f"{row.eps:g}", n_star, b.theorem,
                             format_value(b), "yes" if row.valid else "no"])
    return out.getvalue()


@dataclass
class TableRow:
    eps: float
    ishikawa: RateBound
    cat0: RateBound
    cat0_constant: RateBound


def comparison_table(eps_list, d, K, lam, theta: ThetaFn | None = None) -> list[TableRow]:
    """Exponential certificate next to the two quadratic ones, one row
    per eps, all on the same diameter d."""
    if theta is None:
        theta = rates.theta_closed_form(lam)
    rows = []
    for eps in eps_list:
        rows.append(TableRow(
            eps=float(eps),
            ishikawa=rates.ishikawa_bound(eps, d, K),
            cat0=rates.cat0_bound(eps, d, theta),
            cat0_constant=rates.cat0_constant_bound(eps, d, lam)))
    return rows


def render_table_text(rows: list[TableRow]) -> str:
    header = ["eps", "exponential", "quadratic(theta)", "quadratic(lambda)"]
    cells = [[f"{r.eps:g}", format_value(r.ishikawa), format_value(r.cat0),
              format_value(r.cat0_constant)] for r in rows]
    widths = [max(len(h), *(len(c[i]) for c in cells)) if cells else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for c in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(c, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_table_csv(rows: list[TableRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["eps", "exponential", "quadratic_theta", "quadratic_lambda"])
    for r in rows:
        writer.writerow([f"{r.eps:g}", format_value(r.ishikawa),
                         format_value(r.cat0), format_value(r.cat0_constant)])
    return out.getvalue()
