"""Krasnoselski-Mann iteration: schedules, orbits, and descent checks.

The iteration is x_{n+1} = (1-lam_n) x_n (+) lam_n T x_n with the
residual res(n) = rho(x_n, T x_n).  Alongside orbit generation this
module verifies, on actual traces, the inequalities that drive the rate
analysis: residual monotonicity, the Fejer-type growth bounds, the
per-step descent estimate and its summed consequences.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .geometry import GeodesicSpace, GeometryError, AxiomReport, _collect
from .convexity import Modulus
from .operators import Operator

# beyond this many steps only residuals are kept
POINT_CAP = 10 ** 5

# witness scans give up after this many terms: the weight series of a
# sane schedule diverges, so hitting the cutoff signals a bad config
WITNESS_CUTOFF = 10 ** 8


class IterationError(RuntimeError):
    """Blow-up, cutoff, or other failure while iterating."""


@dataclass(frozen=True)
class LambdaSchedule:
    """Step-size sequence (lam_k) with values in [0, 1].

    `constant` is set when every lam_k equals one value in (0, 1);
    `vector_fn`, when present, evaluates a whole index range at once.
    """

    descriptor: str
    fn: Callable
    constant: float | None = None
    vector_fn: Callable | None = None

    def value_at(self, k: int) -> float:
        lam = float(self.fn(int(k)))
        if not 0.0 <= lam <= 1.0:
            raise GeometryError(
                f"schedule {self.descriptor} gives lambda_{k} = {lam} outside [0, 1]")
        return lam

    def values(self, start: int, stop: int) -> np.ndarray:
        """lam_k for k in [start, stop)."""
        if self.vector_fn is not None:
            out = np.asarray(self.vector_fn(np.arange(start, stop)), dtype=float)
        else:
            out = np.array([float(self.fn(k)) for k in range(start, stop)], dtype=float)
        if out.size and (out.min() < 0.0 or out.max() > 1.0):
            bad = int(start + np.argmax((out < 0.0) | (out > 1.0)))
            raise GeometryError(
                f"schedule {self.descriptor} gives lambda_{bad} outside [0, 1]")
        return out

    def weights(self, start: int, stop: int) -> np.ndarray:
        """The descent weights lam_k (1 - lam_k) for k in [start, stop)."""
        lam = self.values(start, stop)
        return lam * (1.0 - lam)


def constant_schedule(lam: float) -> LambdaSchedule:
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise GeometryError(f"constant schedule needs lambda in (0, 1), got {lam}")
    return LambdaSchedule(descriptor=f"constant({lam:g})",
                          fn=lambda k: lam,
                          constant=lam,
                          vector_fn=lambda ks: np.full(len(ks), lam))


def list_schedule(values, tail: float | None = None) -> LambdaSchedule:
    """Explicit finite list; `tail` extends it, otherwise running past
    the end is an error."""
    vals = tuple(float(v) for v in values)
    if not vals:
        raise GeometryError("empty schedule list")
    for k, v in enumerate(vals):
        if not 0.0 <= v <= 1.0:
            raise GeometryError(f"lambda_{k} = {v} outside [0, 1]")
    if tail is not None and not 0.0 <= tail <= 1.0:
        raise GeometryError(f"tail value {tail} outside [0, 1]")

    def fn(k):
        if k < len(vals):
            return vals[k]
        if tail is None:
            raise IterationError(
                f"schedule list of length {len(vals)} exhausted at index {k}")
        return tail

    def vector_fn(ks):
        if tail is None and ks.size and ks[-1] >= len(vals):
            raise IterationError(
                f"schedule list of length {len(vals)} exhausted at index {int(ks[-1])}")
        arr = np.full(len(ks), tail if tail is not None else 0.0)
        inside = ks < len(vals)
        arr[inside] = np.asarray(vals, dtype=float)[ks[inside]]
        return arr

    desc = f"list(n={len(vals)}" + (f",tail={tail:g})" if tail is not None else ")")
    return LambdaSchedule(descriptor=desc, fn=fn, vector_fn=vector_fn)


def alternating_schedule(base: float = 0.5, shift: int = 3) -> LambdaSchedule:
    """The oscillating family lam_k = base + (-1)^k / (k + shift)."""
    base = float(base)
    shift = int(shift)
    if shift < 1:
        raise GeometryError(f"shift must be a positive integer, got {shift}")

    def fn(k):
        return base + (-1.0) ** k / (k + shift)

    def vector_fn(ks):
        sign = np.where(ks % 2 == 0, 1.0, -1.0)
        return base + sign / (ks + shift)

    sched = LambdaSchedule(descriptor=f"alternating({base:g},{shift})",
                           fn=fn, vector_fn=vector_fn)
    # fail fast on parameter choices that leave [0, 1] at the start
    sched.value_at(0)
    sched.value_at(1)
    return sched


def witness_theta(schedule: LambdaSchedule, n: float,
                  cutoff: int = WITNESS_CUTOFF) -> int:
    """Least N with sum_{k=0}^{N} lam_k (1 - lam_k) >= n, by summation."""
    if n < 0:
        raise GeometryError(f"witness target must be nonnegative, got {n}")
    if n == 0:
        return 0
    total = 0.0
    start = 0
    block = 1 << 16
    while start < cutoff:
        stop = min(start + block, cutoff)
        csum = total + np.cumsum(schedule.weights(start, stop))
        idx = int(np.searchsorted(csum, n, side="left"))
        if idx < csum.size:
            return start + idx
        total = float(csum[-1])
        start = stop
    raise IterationError(
        f"weight sum reached only {total:g} after {cutoff} terms of "
        f"{schedule.descriptor}; the series may converge")


@dataclass
class IterationTrace:
    """Orbit record: points up to the cap, residuals throughout.

    res(n) is computed at every index 0..N even when the points
    themselves are no longer stored.
    """

    space: GeodesicSpace
    operator: Operator
    schedule: LambdaSchedule
    start: Any
    points: list = field(default_factory=list)
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lambdas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stopped_early: bool = False

    def __len__(self) -> int:
        return len(self.residuals)

    @property
    def last_index(self) -> int:
        return len(self.residuals) - 1

    def residual(self, n: int) -> float:
        return float(self.residuals[n])

    def point(self, n: int):
        if n >= len(self.points):
            raise IterationError(
                f"point {n} not stored (cap {len(self.points)} reached)")
        return self.points[n]

    def first_crossing(self, eps: float) -> int | None:
        """Least n with res(n) <= eps, or None if never reached."""
        hits = np.nonzero(self.residuals <= eps)[0]
        return int(hits[0]) if hits.size else None

    def lambda_at(self, n: int) -> float:
        return float(self.lambdas[n])

    def weight_sum(self, upto: int) -> float:
        """sum_{k=0}^{upto} lam_k (1 - lam_k) along this trace."""
        lam = self.lambdas[: upto + 1]
        return float(np.sum(lam * (1.0 - lam)))


def km_step(space: GeodesicSpace, op: Operator, x, lam: float):
    """One update x -> (1-lam) x (+) lam T x."""
    return space.combine(x, op(x), lam)


def run_km(space: GeodesicSpace, op: Operator, x0, schedule: LambdaSchedule,
           max_steps: int, target_residual: float = 0.0,
           point_cap: int = POINT_CAP) -> IterationTrace:
    """Iterate for up to `max_steps` updates, recording every residual.

    Stops early once res(n) <= target_residual.  Non-finite residuals
    abort: they signal an operator or schedule outside its domain.
    """
    if max_steps < 0:
        raise GeometryError(f"max_steps must be nonnegative, got {max_steps}")
    space.validate_point(x0)
    x = x0
    points = [x0]
    residuals = []
    lambdas = []
    stopped = False
    for n in range(max_steps + 1):
        tx = op(x)
        res = space.distance(x, tx)
        if not math.isfinite(res):
            raise IterationError(f"non-finite residual at step {n}")
        residuals.append(res)
        if res <= target_residual:
            stopped = n < max_steps
            break
        if n == max_steps:
            break
        lam = schedule.value_at(n)
        x = space.combine(x, tx, lam)
        lambdas.append(lam)
        if len(points) <= point_cap:
            points.append(x)
    return IterationTrace(space=space, operator=op, schedule=schedule,
                          start=x0, points=points,
                          residuals=np.array(residuals),
                          lambdas=np.array(lambdas),
                          stopped_early=stopped)


def alpha(trace: IterationTrace, y, n: int) -> float:
    """rho(x_n, y) + rho(y, Ty), the combined displacement at step n."""
    space, op = trace.space, trace.operator
    return space.distance(trace.point(n), y) + space.distance(y, op(y))


def check_residual_monotone(trace: IterationTrace, tol: float) -> AxiomReport:
    """res(n+1) <= res(n) + tol at every step of the trace."""
    res = trace.residuals

    def deviations():
        for n in range(len(res) - 1):
            yield float(res[n + 1] - res[n]), n

    return _collect("residual-monotone", deviations(), tol)


def check_km_growth(trace: IterationTrace, y, tol: float) -> AxiomReport:
    """Fejer-type growth bounds along the trace, for a reference y:

        rho(x_{n+1}, y) <= rho(x_n, y) + lam_n rho(y, Ty)
        rho(x_n, y)     <= rho(x_0, y) + (sum_{i<n} lam_i) rho(y, Ty)
    """
    space, op = trace.space, trace.operator
    drift = space.distance(y, op(y))
    dists = [space.distance(p, y) for p in trace.points]
    lam = trace.lambdas

    def deviations():
        for n in range(len(dists) - 1):
            yield dists[n + 1] - dists[n] - lam[n] * drift, ("step", n)
        lam_partial = 0.0
        for n in range(len(dists)):
            yield dists[n] - dists[0] - lam_partial * drift, ("sum", n)
            if n < len(lam):
                lam_partial += lam[n]

    return _collect("km-growth", deviations(), tol)


@dataclass(frozen=True)
class DescentCheckParams:
    """Constants feeding the descent inequalities.

    Per-step form: a <= res(n), gamma <= alpha(n) <= beta, beta_tilde
    (or alpha(n) <= delta for the tilde variant).  Summed form:
    b >= rho(x_0,y), c >= rho(y,Ty), d >= (N+1)c, with a, gamma
    per-step lower bounds over the whole prefix.
    """

    y: Any
    a: float | None = None
    gamma: float | None = None
    beta: float | None = None
    beta_tilde: float | None = None
    delta: float | None = None
    b: float | None = None
    c: float | None = None
    d: float | None = None

    def __post_init__(self):
        for name in ("a", "gamma", "beta", "beta_tilde", "delta", "b", "c", "d"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise GeometryError(f"descent constant {name} must be positive, got {v}")


def _require(params: DescentCheckParams, *names):
    for name in names:
        if getattr(params, name) is None:
            raise GeometryError(f"descent check needs constant {name!r}")


def _step_report(check: str, deviation: float | None, tol: float,
                 witness=None) -> AxiomReport:
    """Single-step report; deviation None means the hypothesis failed."""
    if deviation is None:
        return AxiomReport(check=check, samples=1, violations=0, worst=0.0,
                           tol=tol, witness=witness, skipped=1)
    bad = deviation > tol
    return AxiomReport(check=check, samples=1, violations=int(bad),
                       worst=max(0.0, deviation), tol=tol,
                       witness=witness, skipped=0)


def check_main_lemma(trace: IterationTrace, params: DescentCheckParams,
                     modulus: Modulus, n: int, tol: float) -> AxiomReport:
    """Per-step descent estimate

        rho(x_{n+1}, y) <= rho(x_n, y) + rho(y, Ty)
                           - 2 gamma lam_n (1 - lam_n) eta(beta_tilde, a/beta)

    under the hypothesis gamma <= alpha(n) <= beta, beta_tilde and
    a <= res(n).  A failed hypothesis skips the step (the estimate is
    conditional, so nothing is concluded either way).
    """
    if not modulus.monotone_in_r:
        raise GeometryError(
            "descent estimate needs a modulus nonincreasing in r; wrap it first")
    _require(params, "a", "gamma", "beta", "beta_tilde")
    space, op, y = trace.space, trace.operator, params.y
    al = alpha(trace, y, n)
    hyp = (params.gamma <= al <= params.beta and al <= params.beta_tilde
           and params.a <= trace.residual(n))
    if not hyp:
        return _step_report("descent-step", None, tol, witness=n)
    lam = trace.lambda_at(n)
    shrink = 2.0 * params.gamma * lam * (1.0 - lam) * modulus.eval(
        params.beta_tilde, params.a / params.beta)
    lhs = space.distance(trace.point(n + 1), y)
    rhs = space.distance(trace.point(n), y) + space.distance(y, op(y)) - shrink
    return _step_report("descent-step", lhs - rhs, tol, witness=n)


def check_main_lemma_tilde(trace: IterationTrace, params: DescentCheckParams,
                           modulus: Modulus, n: int, tol: float) -> AxiomReport:
    """Variant of the per-step estimate using the factored modulus:

        rho(x_{n+1}, y) <= rho(x_n, y) + rho(y, Ty)
                           - 2 a lam_n (1 - lam_n) eta~(delta, a/delta)

    under alpha(n) <= delta and a <= res(n).
    """
    if not modulus.monotone_in_r:
        raise GeometryError(
            "descent estimate needs a modulus nonincreasing in r; wrap it first")
    if not modulus.has_eta_tilde:
        raise GeometryError("tilde variant needs the factored form of the modulus")
    _require(params, "a", "delta")
    space, op, y = trace.space, trace.operator, params.y
    hyp = alpha(trace, y, n) <= params.delta and params.a <= trace.residual(n)
    if not hyp:
        return _step_report("descent-step-tilde", None, tol, witness=n)
    lam = trace.lambda_at(n)
    shrink = 2.0 * params.a * lam * (1.0 - lam) * modulus.eta_tilde(
        params.delta, params.a / params.delta)
    lhs = space.distance(trace.point(n + 1), y)
    rhs = space.distance(trace.point(n), y) + space.distance(y, op(y)) - shrink
    return _step_report("descent-step-tilde", lhs - rhs, tol, witness=n)


def check_summed_descent(trace: IterationTrace, params: DescentCheckParams,
                         modulus: Modulus, N: int, tol: float) -> AxiomReport:
    """Accumulated descent over steps 0..N:

        rho(x_{N+1}, y) <= b + (N+1)c
                           - 2 gamma eta(b+d, a/(b+d)) sum lam_k(1-lam_k)

    plus, when the modulus factors, the same bound with the shrink term
    2 a eta~(b+d, a/(b+d)) sum.  Hypotheses (b >= rho(x_0,y),
    c >= rho(y,Ty), d >= (N+1)c, and a, gamma per-step lower bounds)
    are verified first; if any fails, the whole check is skipped.
    """
    if not modulus.monotone_in_r:
        raise GeometryError(
            "descent estimate needs a modulus nonincreasing in r; wrap it first")
    _require(params, "a", "gamma", "b", "c", "d")
    space, op, y = trace.space, trace.operator, params.y
    if N + 1 >= len(trace.points):
        raise GeometryError(f"summed check needs stored points through {N + 1}")

    hyp = (params.b >= space.distance(trace.point(0), y)
           and params.c >= space.distance(y, op(y))
           and params.d >= (N + 1) * params.c)
    if hyp:
        for n in range(N + 1):
            if not (params.gamma <= alpha(trace, y, n)
                    and params.a <= trace.residual(n)):
                hyp = False
                break
    if not hyp:
        return AxiomReport(check="descent-summed", samples=1, violations=0,
                           worst=0.0, tol=tol, witness=N, skipped=1)

    reach = params.b + params.d
    wsum = trace.weight_sum(N)
    base = params.b + (N + 1) * params.c
    lhs = space.distance(trace.point(N + 1), y)

    def deviations():
        shrink = 2.0 * params.gamma * modulus.eval(reach, params.a / reach) * wsum
        yield lhs - (base - shrink), ("eta", N)
        if modulus.has_eta_tilde:
            shrink_t = 2.0 * params.a * modulus.eta_tilde(reach, params.a / reach) * wsum
            yield lhs - (base - shrink_t), ("eta-tilde", N)

    return _collect("descent-summed", deviations(), tol)


def merge_reports(check: str, reports) -> AxiomReport:
    """Combine step reports into one summary (worst witness kept)."""
    samples = violations = skipped = 0
    worst = 0.0
    witness = None
    tol = 0.0
    for r in reports:
        samples += r.samples
        violations += r.violations
        skipped += r.skipped
        tol = r.tol
        if r.worst > worst:
            worst, witness = r.worst, r.witness
    return AxiomReport(check=check, samples=samples, violations=violations,
                       worst=worst, tol=tol, witness=witness, skipped=skipped)


def _auto_reference(trace: IterationTrace, y):
    if y is not None:
        return y
    if trace.operator.fixed_point is None:
        raise GeometryError(
            f"operator {trace.operator.descriptor} declares no fixed point; "
            "supply a reference y")
    return trace.operator.fixed_point


def check_main_lemma_along(trace: IterationTrace, modulus: Modulus,
                           tol: float, y=None, tilde: bool = False) -> AxiomReport:
    """Run the per-step estimate at every step, with the canonical
    parameter choice a := res(n), gamma := beta := beta_tilde := alpha(n)
    (delta := alpha(n) for the tilde variant).  Steps at an exact fixed
    point are skipped: no positive a exists there.
    """
    y = _auto_reference(trace, y)
    last = min(len(trace.points) - 2, trace.last_index - 1)
    reports = []
    name = "descent-step-tilde" if tilde else "descent-step"
    for n in range(last + 1):
        res = trace.residual(n)
        if res <= 0.0:
            reports.append(AxiomReport(check=name, samples=1, violations=0,
                                       worst=0.0, tol=tol, witness=n, skipped=1))
            continue
        al = alpha(trace, y, n)
        if tilde:
            params = DescentCheckParams(y=y, a=res, delta=al)
            reports.append(check_main_lemma_tilde(trace, params, modulus, n, tol))
        else:
            params = DescentCheckParams(y=y, a=res, gamma=al, beta=al, beta_tilde=al)
            reports.append(check_main_lemma(trace, params, modulus, n, tol))
    return merge_reports(name, reports)


def check_summed_descent_auto(trace: IterationTrace, modulus: Modulus,
                              tol: float, y=None, floor_c: float = 1e-12) -> AxiomReport:
    """Summed descent over the longest usable prefix, with constants
    read off the trace: a := res(N), gamma := min alpha, b and c padded
    to positive values, d := (N+1)c.
    """
    y = _auto_reference(trace, y)
    space, op = trace.space, trace.operator
    N = min(len(trace.points) - 2, trace.last_index - 1)
    while N >= 0 and trace.residual(N) <= 0.0:
        N -= 1
    if N < 0:
        return AxiomReport(check="descent-summed", samples=1, violations=0,
                           worst=0.0, tol=tol, witness=None, skipped=1)
    a = trace.residual(N)
    gamma = min(alpha(trace, y, n) for n in range(N + 1))
    b = max(space.distance(trace.point(0), y), floor_c)
    c = max(space.distance(y, op(y)), floor_c)
    d = (N + 1) * c
    params = DescentCheckParams(y=y, a=a, gamma=gamma, b=b, c=c, d=d)
    return check_summed_descent(trace, params, modulus, N, tol)


def write_trace_csv(trace: IterationTrace, path, reference=None) -> None:
    """Dump `n,residual,distance_to_reference` rows; the reference
    defaults to the operator's declared fixed point, and the distance
    column is omitted when there is none.  17 significant digits so the
    file round-trips the binary floats exactly.
    """
    if reference is None:
        reference = trace.operator.fixed_point
    space = trace.space
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if reference is None:
            writer.writerow(["n", "residual"])
            for n, res in enumerate(trace.residuals):
                writer.writerow([n, f"{res:.17g}"])
            return
        writer.writerow(["n", "residual", "distance_to_reference"])
        for n, res in enumerate(trace.residuals):
            if n < len(trace.points):
                dist = f"{space.distance(trace.points[n], reference):.17g}"
            else:
                dist = ""
            writer.writerow([n, f"{res:.17g}", dist])
