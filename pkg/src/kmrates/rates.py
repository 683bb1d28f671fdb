"""Iteration-count certificates: how many KM steps guarantee a small
residual.

Every bound returns an exact integer, however large.  Numeric inputs
are read at face value as decimals (0.1 means 1/10, not the nearest
binary float), so ceilings land where pencil-and-paper evaluation says
they should.  The exponential bound is evaluated in interval arithmetic
so its ceiling is exact, switching to directed upward rounding once the
exponent makes exactness pointless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import mpmath
from mpmath import libmp

from .geometry import GeometryError
from .convexity import Modulus
from .iteration import LambdaSchedule, witness_theta, WITNESS_CUTOFF

# beyond this exponent the exact interval ceiling is replaced by a
# rounded-up evaluation (the certificate stays valid, just not minimal)
_EXACT_EXP_LIMIT = 700


def as_fraction(x) -> Fraction:
    """Exact rational with decimal reading of floats: 0.1 -> 1/10."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(str(float(x)))


def _exact_ceil(q) -> int:
    """Ceiling of a Fraction exactly, of a float as evaluated."""
    return math.ceil(q)


def _log10_int(v: int) -> float | None:
    if v <= 0:
        return None
    with mpmath.workdps(30):
        return float(mpmath.log10(mpmath.mpf(v)))


@dataclass(frozen=True)
class RateBound:
    """An integer certificate plus the theorem tag that produced it."""

    value: int
    theorem: str
    inputs: dict
    log10: float | None

    def __str__(self) -> str:
        if self.log10 is not None and self.log10 > 18:
            shown = f"~10^{self.log10:.1f}"
        else:
            shown = str(self.value)
        return f"{self.theorem}: {shown}"


def _bound(value: int, theorem: str, inputs: dict) -> RateBound:
    value = int(value)
    if value < 0:
        raise GeometryError(f"negative bound from {theorem}: {value}")
    return RateBound(value=value, theorem=theorem, inputs=inputs,
                     log10=_log10_int(value))


@dataclass(frozen=True)
class ThetaFn:
    """Integer witness function n -> N with the partial weight sums
    through N reaching n.  Either a closed form or a schedule scan."""

    descriptor: str
    fn: Callable

    def __call__(self, n: int) -> int:
        out = int(self.fn(n))
        if out < 0:
            raise GeometryError(f"theta({n}) = {out} negative")
        return out


def theta_closed_form(lam) -> ThetaFn:
    """The constant-schedule closed form ceil(n / (lam (1-lam)))."""
    lam = as_fraction(lam)
    if not 0 < lam < 1:
        raise GeometryError(f"lambda must lie in (0, 1), got {lam}")
    weight = lam * (1 - lam)
    return ThetaFn(descriptor=f"closed-form(lambda={float(lam):g})",
                   fn=lambda n: math.ceil(Fraction(n) / weight))


def theta_from_schedule(schedule: LambdaSchedule,
                        cutoff: int = WITNESS_CUTOFF) -> ThetaFn:
    """Minimal witness by direct summation along the schedule."""
    # scans are linear in the answer; memoize per ThetaFn instance
    memo: dict = {}

    def fn(n):
        if n not in memo:
            memo[n] = witness_theta(schedule, n, cutoff)
        return memo[n]

    return ThetaFn(descriptor=f"witness({schedule.descriptor})", fn=fn)


def theta_from_callable(fn: Callable, descriptor: str) -> ThetaFn:
    return ThetaFn(descriptor=descriptor, fn=fn)


def _ceil_endpoints(coeff: Fraction, exponent: int, prec: int) -> tuple[int, int]:
    """Integer ceilings of both endpoints of an interval enclosure of
    coeff * e^exponent.  The ceilings are taken on the raw endpoint
    mantissas, so no precision is lost on the way to int."""
    saved = mpmath.iv.prec
    mpmath.iv.prec = prec
    try:
        val = (mpmath.iv.mpf(coeff.numerator) / coeff.denominator
               * mpmath.iv.exp(exponent))
        lo_raw, hi_raw = val._mpi_
    finally:
        mpmath.iv.prec = saved
    return (libmp.to_int(lo_raw, libmp.round_ceiling),
            libmp.to_int(hi_raw, libmp.round_ceiling))


def _ceil_scaled_exp(coeff: Fraction, exponent: int) -> int:
    """Smallest integer >= coeff * e^exponent, exactly for moderate
    exponents; an upper bound from rounded-up evaluation beyond that."""
    if exponent <= _EXACT_EXP_LIMIT:
        prec = 64
        while prec <= 1 << 20:
            lo, hi = _ceil_endpoints(coeff, exponent, prec)
            if lo == hi:
                return lo
            prec *= 2
        raise GeometryError("interval ceiling failed to converge")
    # directed rounding up: the upper endpoint stays a valid certificate
    return _ceil_endpoints(coeff, exponent, 200)[1]


def ishikawa_bound(eps, d, K) -> RateBound:
    """Exponential certificate K * M * ceil(2 d e^{K(M+1)}) with
    M = ceil((1 + 2d) / eps)."""
    eps_f, d_f = as_fraction(eps), as_fraction(d)
    if eps_f <= 0 or d_f <= 0:
        raise GeometryError(f"eps and d must be positive, got {eps}, {d}")
    K_int = int(K)
    if K_int != K or K_int < 2:
        raise GeometryError(f"K must be an integer >= 2, got {K}")
    M = _exact_ceil((1 + 2 * d_f) / eps_f)
    core = _ceil_scaled_exp(2 * d_f, K_int * (M + 1))
    value = K_int * M * core
    return _bound(value, "ishikawa",
                  {"eps": eps, "d": d, "K": K_int, "M": M})


def _eta_ceil(numerator: Fraction, r_arg: Fraction, eps_arg: Fraction,
              eval_fn, scale: Fraction) -> int:
    """ceil(numerator / (scale * eta(r_arg, eps_arg))), exact when the
    modulus evaluates rationally."""
    eta_val = eval_fn(r_arg, eps_arg)
    if isinstance(eta_val, Fraction):
        if eta_val <= 0:
            raise GeometryError(f"modulus returned {eta_val} <= 0")
        return _exact_ceil(numerator / (scale * eta_val))
    eta_val = float(eta_val)
    if eta_val <= 0:
        raise GeometryError(f"modulus returned {eta_val} <= 0")
    return _exact_ceil(float(numerator) / (float(scale) * eta_val))


def groetsch_bound(eps, b, theta: ThetaFn, m: Modulus) -> RateBound:
    """theta(ceil((b+1) / (eps eta(b+1, eps/(b+1))))), or 0 once eps
    covers the whole reachable residual range (eps >= 2b)."""
    if not m.monotone_in_r:
        raise GeometryError(
            "bound needs a modulus nonincreasing in r; wrap it first")
    eps_f, b_f = as_fraction(eps), as_fraction(b)
    if eps_f <= 0 or b_f <= 0:
        raise GeometryError(f"eps and b must be positive, got {eps}, {b}")
    inputs = {"eps": eps, "b": b, "theta": theta.descriptor, "modulus": m.name}
    if eps_f >= 2 * b_f:
        return _bound(0, "groetsch", inputs)
    inner = _eta_ceil(b_f + 1, b_f + 1, eps_f / (b_f + 1), m.eval, eps_f)
    return _bound(theta(inner), "groetsch", inputs | {"inner": inner})


def groetsch_bound_tilde(eps, b, theta: ThetaFn, m: Modulus) -> RateBound:
    """Sharper variant through the factored modulus:
    theta(ceil((b+1) / (2 eps eta~(b+1, eps/(b+1)))))."""
    if not m.monotone_in_r:
        raise GeometryError(
            "bound needs a modulus nonincreasing in r; wrap it first")
    if not m.has_eta_tilde:
        raise GeometryError(f"modulus {m.name} has no factored form")
    eps_f, b_f = as_fraction(eps), as_fraction(b)
    if eps_f <= 0 or b_f <= 0:
        raise GeometryError(f"eps and b must be positive, got {eps}, {b}")
    inputs = {"eps": eps, "b": b, "theta": theta.descriptor, "modulus": m.name}
    if eps_f >= 2 * b_f:
        return _bound(0, "groetsch-tilde", inputs)
    inner = _eta_ceil(b_f + 1, b_f + 1, eps_f / (b_f + 1),
                      m.eta_tilde, 2 * eps_f)
    return _bound(theta(inner), "groetsch-tilde", inputs | {"inner": inner})


def _outer_ceil(lam: Fraction, inner: int) -> int:
    """Apply the 1/(lam(1-lam)) factor after the inner ceiling, then
    round the product up: certificates are iteration counts."""
    return _exact_ceil(Fraction(inner) / (lam * (1 - lam)))


def constant_lambda_bound(eps, d_c, lam, m: Modulus) -> RateBound:
    """Constant-schedule certificate
    ceil( (1/(lam(1-lam))) ceil((d_C+1) / (eps eta(d_C+1, eps/(d_C+1)))) )."""
    if not m.monotone_in_r:
        raise GeometryError(
            "bound needs a modulus nonincreasing in r; wrap it first")
    eps_f, d_f, lam_f = as_fraction(eps), as_fraction(d_c), as_fraction(lam)
    if not 0 < lam_f < 1:
        raise GeometryError(f"lambda must lie in (0, 1), got {lam}")
    if eps_f <= 0 or d_f <= 0:
        raise GeometryError(f"eps and d_C must be positive, got {eps}, {d_c}")
    inputs = {"eps": eps, "d_C": d_c, "lambda": lam, "modulus": m.name}
    if eps_f >= 2 * d_f:
        return _bound(0, "constant-lambda", inputs)
    inner = _eta_ceil(d_f + 1, d_f + 1, eps_f / (d_f + 1), m.eval, eps_f)
    return _bound(_outer_ceil(lam_f, inner), "constant-lambda",
                  inputs | {"inner": inner})


def constant_lambda_bound_tilde(eps, d_c, lam, m: Modulus) -> RateBound:
    """Constant-schedule variant through the factored modulus (no extra
    factor 2 here, matching the printed corollary)."""
    if not m.monotone_in_r:
        raise GeometryError(
            "bound needs a modulus nonincreasing in r; wrap it first")
    if not m.has_eta_tilde:
        raise GeometryError(f"modulus {m.name} has no factored form")
    eps_f, d_f, lam_f = as_fraction(eps), as_fraction(d_c), as_fraction(lam)
    if not 0 < lam_f < 1:
        raise GeometryError(f"lambda must lie in (0, 1), got {lam}")
    if eps_f <= 0 or d_f <= 0:
        raise GeometryError(f"eps and d_C must be positive, got {eps}, {d_c}")
    inputs = {"eps": eps, "d_C": d_c, "lambda": lam, "modulus": m.name}
    if eps_f >= 2 * d_f:
        return _bound(0, "constant-lambda-tilde", inputs)
    inner = _eta_ceil(d_f + 1, d_f + 1, eps_f / (d_f + 1),
                      m.eta_tilde, eps_f)
    return _bound(_outer_ceil(lam_f, inner), "constant-lambda-tilde",
                  inputs | {"inner": inner})


def cat0_inner(eps, d_c, tight: bool = False) -> int:
    """The quadratic core ceil(8 (d_C+1)^2 / eps^2); with `tight` the
    constant drops to 4, the value the factored-modulus route actually
    yields (the printed corollary keeps 8, and so do we by default)."""
    eps_f, d_f = as_fraction(eps), as_fraction(d_c)
    const = 4 if tight else 8
    return _exact_ceil(const * (d_f + 1) ** 2 / eps_f ** 2)


def cat0_bound(eps, d_c, theta: ThetaFn, tight: bool = False) -> RateBound:
    """Quadratic certificate theta(ceil(8 (d_C+1)^2 / eps^2)) for
    CAT(0) geometry."""
    eps_f, d_f = as_fraction(eps), as_fraction(d_c)
    if eps_f <= 0 or d_f <= 0:
        raise GeometryError(f"eps and d_C must be positive, got {eps}, {d_c}")
    inputs = {"eps": eps, "d_C": d_c, "theta": theta.descriptor, "tight": tight}
    if eps_f >= 2 * d_f:
        return _bound(0, "cat0", inputs)
    inner = cat0_inner(eps, d_c, tight)
    return _bound(theta(inner), "cat0", inputs | {"inner": inner})


def cat0_constant_bound(eps, d_c, lam, tight: bool = False) -> RateBound:
    """Quadratic certificate for a constant schedule:
    ceil( (1/(lam(1-lam))) ceil(8 (d_C+1)^2 / eps^2) )."""
    eps_f, d_f, lam_f = as_fraction(eps), as_fraction(d_c), as_fraction(lam)
    if not 0 < lam_f < 1:
        raise GeometryError(f"lambda must lie in (0, 1), got {lam}")
    if eps_f <= 0 or d_f <= 0:
        raise GeometryError(f"eps and d_C must be positive, got {eps}, {d_c}")
    inputs = {"eps": eps, "d_C": d_c, "lambda": lam, "tight": tight}
    if eps_f >= 2 * d_f:
        return _bound(0, "cat0-constant", inputs)
    inner = cat0_inner(eps, d_c, tight)
    return _bound(_outer_ceil(lam_f, inner), "cat0-constant",
                  inputs | {"inner": inner})
