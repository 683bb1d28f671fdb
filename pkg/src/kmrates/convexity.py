"""Moduli of uniform convexity and the convexity-factor algebra.

A modulus is a map eta(r, eps) -> (0, 1] certifying that midpoints of
eps-separated points inside a radius-r ball pull in by a factor
(1 - eta).  Nonpositively curved spaces admit the radius-independent
quadratic modulus eps^2/8, which additionally factors as eps * (eps/8)
with the second factor nondecreasing in eps; both extra properties are
tracked as capability flags because the rate certificates require them.

For an arbitrary modulus, `monotonized` builds the nonincreasing-in-r
envelope inf{eta(s, eps) : s <= r}.  The infimum has no closed form in
general, so it is approximated on a geometric grid with golden-section
refinement and clamped by eta(r, eps); see `eta_monotone`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .geometry import GeodesicSpace, Sampler
from .geometry import AxiomReport


def _check_domain(r, eps) -> None:
    if not float(r) > 0:
        raise ValueError(f"modulus radius must be positive, got {r}")
    if not 0 < float(eps) <= 2:
        raise ValueError(f"modulus eps must lie in (0, 2], got {eps}")


@dataclass(frozen=True)
class Modulus:
    """Modulus of uniform convexity with capability flags.

    `monotone_in_r` asserts eval is nonincreasing in r at fixed eps.
    `eta_tilde`, when present, satisfies eval(r, eps) = eps * eta_tilde(r, eps)
    with eta_tilde nondecreasing in eps at fixed r.

    eval passes its arguments through unchanged, so exact numeric types
    (fractions.Fraction) propagate when the underlying formula is rational.
    """

    name: str
    eval_fn: Callable
    monotone_in_r: bool = False
    eta_tilde_fn: Callable | None = None

    def eval(self, r, eps):
        _check_domain(r, eps)
        return self.eval_fn(r, eps)

    @property
    def has_eta_tilde(self) -> bool:
        return self.eta_tilde_fn is not None

    def eta_tilde(self, r, eps):
        if self.eta_tilde_fn is None:
            raise ValueError(f"modulus {self.name!r} has no eta-tilde factorization")
        _check_domain(r, eps)
        return self.eta_tilde_fn(r, eps)


def eta_cat0() -> Modulus:
    """The quadratic modulus eps^2/8 of nonpositively curved spaces.

    Constant in r (hence nonincreasing), and factors as eps * (eps/8).
    """
    return Modulus(
        name="cat0",
        eval_fn=lambda r, eps: eps * eps / 8,
        monotone_in_r=True,
        eta_tilde_fn=lambda r, eps: eps / 8,
    )


def constant_modulus(value: float) -> Modulus:
    """A radius- and eps-independent modulus (mostly for tests/configs)."""
    value = float(value)
    if not 0 < value <= 1:
        raise ValueError(f"a modulus value must lie in (0, 1], got {value}")
    return Modulus(name="custom-constant",
                   eval_fn=lambda r, eps: value,
                   monotone_in_r=True)


_GRID_POINTS = 256
_GRID_SPAN = 20.0  # grid covers (r * 2^-span, r]
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def eta_monotone(m: Modulus, r, eps) -> float:
    """Approximate inf{m.eval(s, eps) : 0 < s <= r}.

    Minimizes over a geometric grid of 256 points in (r*2^-20, r],
    refines each strict local-minimum basin of the grid (up to the 8
    most promising) by golden-section search, and finally clamps with
    m.eval(r, eps).  The result can still overshoot the true infimum
    when a dip falls entirely between grid points, but the clamp keeps
    it a valid modulus value at radius r, so certificates built from it
    stay certificates.
    """
    _check_domain(r, eps)
    r = float(r)
    eps = float(eps)
    svals = [r * 2.0 ** (-_GRID_SPAN * (1.0 - i / (_GRID_POINTS - 1)))
             for i in range(_GRID_POINTS)]
    vals = [float(m.eval(s, eps)) for s in svals]
    best = min(vals)

    def refine(a, b):
        nonlocal best
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        fc = float(m.eval(c, eps))
        fd = float(m.eval(d, eps))
        best = min(best, fc, fd)
        for _ in range(60):
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - _INVPHI * (b - a)
                fc = float(m.eval(c, eps))
            else:
                a, c, fc = c, d, fd
                d = a + _INVPHI * (b - a)
                fd = float(m.eval(d, eps))
            best = min(best, fc, fd)

    last = _GRID_POINTS - 1
    basins = {vals.index(best)}
    for i in range(_GRID_POINTS):
        left = vals[i - 1] if i > 0 else math.inf
        right = vals[i + 1] if i < last else math.inf
        if vals[i] < left and vals[i] < right:
            basins.add(i)
    for i in sorted(basins, key=lambda k: vals[k])[:8]:
        refine(svals[max(i - 1, 0)], svals[min(i + 1, last)])

    return min(best, float(m.eval(r, eps)))


def monotonized(m: Modulus) -> Modulus:
    """Nonincreasing-in-r envelope of m, built from `eta_monotone`.

    The eps factorization survives the envelope: inf_s eps*et(s) equals
    eps * inf_s et(s), and an infimum of nondecreasing-in-eps functions
    is nondecreasing in eps.
    """
    if m.monotone_in_r:
        return m
    tilde = None
    if m.eta_tilde_fn is not None:
        tilde_inner = Modulus(name=m.name + "-tilde-part", eval_fn=m.eta_tilde_fn)
        tilde = lambda r, eps: eta_monotone(tilde_inner, r, eps)
    return Modulus(name=m.name + "-monotonized",
                   eval_fn=lambda r, eps: eta_monotone(m, r, eps),
                   monotone_in_r=True,
                   eta_tilde_fn=tilde)


def gamma_factor(r, eps, lam: float, m: Modulus):
    """Pull-in factor for a lam-combination instead of the midpoint.

    2*lam*eta for lam <= 1/2, mirrored for lam > 1/2; both branches agree
    at lam = 1/2 where the factor reduces to eta itself.
    """
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    scale = 2 * lam if lam <= 0.5 else 2 * (1 - lam)
    return scale * m.eval(r, eps)


def groetsch_coefficient(lam: float, m_value):
    """Symmetric per-step descent coefficient 2*lam*(1-lam)*eta.

    Never exceeds gamma_factor at the same modulus value, since both
    2*lam and 2*(1-lam) dominate 2*lam*(1-lam) on [0, 1].
    """
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return 2 * lam * (1 - lam) * m_value


# degenerate pairs with rho(x,y) below this multiple of r have no usable
# eps and are skipped (counted separately) by the uc checks
_DEGENERATE_REL = 1e-12


@dataclass
class UcReport(AxiomReport):
    """AxiomReport plus the sampled (r, eps) parameter ranges."""

    r_range: tuple = (math.nan, math.nan)
    eps_range: tuple = (math.nan, math.nan)


def _uc_scan(space: GeodesicSpace, m: Modulus, sampler: Sampler, tol: float,
             check: str, with_lambda: bool) -> UcReport:
    rng = sampler.rng()
    worst = 0.0
    witness = None
    violations = 0
    skipped = 0
    tested = 0
    r_lo, r_hi = math.inf, -math.inf
    e_lo, e_hi = math.inf, -math.inf
    for _ in range(sampler.count):
        a = space.sample_point(rng, sampler.radius)
        x = space.sample_point(rng, sampler.radius)
        y = space.sample_point(rng, sampler.radius)
        lam = rng.uniform(0.0, 1.0) if with_lambda else 0.5
        r = max(space.distance(x, a), space.distance(y, a))
        sep = space.distance(x, y)
        if r <= 0.0 or sep < _DEGENERATE_REL * r:
            skipped += 1
            continue
        eps = min(2.0, sep / r)
        tested += 1
        r_lo, r_hi = min(r_lo, r), max(r_hi, r)
        e_lo, e_hi = min(e_lo, eps), max(e_hi, eps)
        if with_lambda:
            shrink = gamma_factor(r, eps, lam, m)
        else:
            shrink = m.eval(r, eps)
        dev = space.distance(space.combine(x, y, lam), a) - (1.0 - shrink) * r
        if dev > tol:
            violations += 1
        if dev > worst:
            worst = dev
            witness = (a, x, y, lam)
    return UcReport(check=check, samples=tested, violations=violations,
                    worst=worst, tol=tol, witness=witness, skipped=skipped,
                    r_range=(r_lo, r_hi), eps_range=(e_lo, e_hi))


def check_uc_inequality(space: GeodesicSpace, m: Modulus, sampler: Sampler,
                        tol: float | None = None) -> UcReport:
    """Sampled check of the midpoint uniform-convexity inequality.

    For each sampled a, x, y the radius is r = max of the two distances
    to a and eps = rho(x,y)/r, so the hypothesis holds by construction;
    the report records how far rho(midpoint, a) exceeds (1 - eta) * r.
    """
    tol = space.tol if tol is None else tol
    return _uc_scan(space, m, sampler, tol, check="uc-midpoint", with_lambda=False)


def check_uc_lambda_inequality(space: GeodesicSpace, m: Modulus, sampler: Sampler,
                               tol: float | None = None) -> UcReport:
    """Same scan for general lam-combinations with the gamma factor."""
    tol = space.tol if tol is None else tol
    return _uc_scan(space, m, sampler, tol, check="uc-lambda", with_lambda=True)


_MODULUS_KINDS = {
    "cat0": eta_cat0,
    "cat0-monotonized": lambda: monotonized(
        Modulus(name="cat0-raw",
                eval_fn=lambda r, eps: eps * eps / 8,
                eta_tilde_fn=lambda r, eps: eps / 8)),
}


def modulus_from_name(name: str, value: float | None = None) -> Modulus:
    """Named modulus lookup for configuration files."""
    if name == "custom-constant":
        if value is None:
            raise ValueError("custom-constant modulus needs a value")
        return constant_modulus(value)
    try:
        return _MODULUS_KINDS[name]()
    except KeyError:
        raise ValueError(
            f"unknown modulus {name!r}; expected one of "
            f"{sorted(_MODULUS_KINDS) + ['custom-constant']}") from None
