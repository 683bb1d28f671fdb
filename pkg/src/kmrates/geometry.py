"""Geodesic-space abstraction and sampled axiom verification.

A space here is a metric rho together with a convex-combination operator
W(x, y, lam) writing points of the segment from x to y.  W is required to
satisfy four axioms:

    W1:  rho(z, W(x,y,lam)) <= (1-lam) rho(z,x) + lam rho(z,y)
    W2:  rho(W(x,y,lam), W(x,y,mu)) = |lam - mu| rho(x,y)
    W3:  W(x,y,lam) = W(y,x,1-lam)
    W4:  rho(W(x,z,lam), W(y,w,lam)) <= (1-lam) rho(x,y) + lam rho(z,w)

and the nonpositive-curvature (CN) midpoint inequality

    rho(z, m)^2 <= 1/2 rho(z,x)^2 + 1/2 rho(z,y)^2 - 1/4 rho(x,y)^2

with m the midpoint of x and y.  Concrete spaces live in `spaces`; this
module owns the abstract interface and the seeded sampling checks that
report worst-case violations instead of failing fast.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator

import numpy as np


class GeometryError(ValueError):
    """Invalid geometric input (bad point, bad parameter)."""


class InvalidPointError(GeometryError):
    """A point that does not belong to the space it was used with."""


class GeodesicSpace(ABC):
    """Metric space with a convex-combination operator.

    Points are opaque space-specific values; only the owning space can
    interpret them.  Instances are immutable and safe to share.
    """

    #: absolute tolerance at which this space's formulas are trusted
    tol: float = 1e-9

    @property
    @abstractmethod
    def descriptor(self) -> str:
        """Short human-readable kind + parameters."""

    @abstractmethod
    def distance(self, p, q) -> float:
        """Metric distance between two valid points."""

    @abstractmethod
    def combine(self, p, q, lam: float):
        """Point at parameter lam on the geodesic from p to q.

        Satisfies rho(p, combine(p,q,lam)) = lam * rho(p,q) and
        rho(q, combine(p,q,lam)) = (1-lam) * rho(p,q).
        """

    @abstractmethod
    def validate_point(self, p) -> None:
        """Raise InvalidPointError if p does not belong to this space."""

    @abstractmethod
    def sample_point(self, rng: np.random.Generator, radius: float):
        """Draw a point within `radius` of the space's base point."""

    @abstractmethod
    def perturb_point(self, p, scale: float, rng: np.random.Generator):
        """A nearby point at distance on the order of `scale` from p.

        Used by uniqueness probes; the perturbation directions include the
        ones along which a midpoint defect responds linearly.
        """

    def midpoint(self, p, q):
        return self.combine(p, q, 0.5)

    def points_equal(self, p, q, tol: float | None = None) -> bool:
        """Equality as distance below tolerance (representations are not
        canonical across models, so coordinate equality is not used)."""
        return self.distance(p, q) <= (self.tol if tol is None else tol)

    def _check_lambda(self, lam: float) -> float:
        lam = float(lam)
        if not 0.0 <= lam <= 1.0:
            raise GeometryError(f"lambda must lie in [0, 1], got {lam}")
        return lam


@dataclass(frozen=True)
class Sampler:
    """Deterministic point sampler: equal seeds give equal streams.

    `radius` bounds the sampled region around each space's base point.
    A Sampler is a value; clone freely across tasks.
    """

    seed: int
    count: int
    radius: float = 2.0

    def __post_init__(self):
        if self.count <= 0:
            raise GeometryError(f"sample count must be positive, got {self.count}")
        if self.radius < 0:
            raise GeometryError(f"sample radius must be nonnegative, got {self.radius}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def points(self, space: GeodesicSpace, per_sample: int = 1) -> Iterator[tuple]:
        """Yield `count` tuples of `per_sample` fresh points each."""
        rng = self.rng()
        for _ in range(self.count):
            yield tuple(space.sample_point(rng, self.radius) for _ in range(per_sample))


@dataclass
class AxiomReport:
    """Worst-violation summary of one sampled check.

    `worst` is the largest left-minus-right deviation seen, floored at 0;
    `witness` is the sample tuple that achieved it.  A check passes when
    no sample deviates by more than `tol`.
    """

    check: str
    samples: int
    violations: int
    worst: float
    tol: float
    witness: tuple | None = None
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (f"[{status}] {self.check}: {self.samples} samples, "
                f"{self.violations} violations, worst {self.worst:.3e} "
                f"(tol {self.tol:.1e}, skipped {self.skipped})")


def _collect(check: str, deviations, tol: float, skipped: int = 0) -> AxiomReport:
    """Fold (deviation, witness) pairs into an AxiomReport."""
    worst = 0.0
    worst_witness = None
    n = 0
    violations = 0
    for dev, witness in deviations:
        n += 1
        if dev > tol:
            violations += 1
        if dev > worst:
            worst = dev
            worst_witness = witness
    return AxiomReport(check=check, samples=n, violations=violations,
                       worst=worst, tol=tol, witness=worst_witness,
                       skipped=skipped)


def check_w_axioms(space: GeodesicSpace, sampler: Sampler,
                   tol: float | None = None) -> list[AxiomReport]:
    """Sampled verification of W1-W4, one report per axiom.

    W1/W4 record the signed slack of the inequality; W2/W3 record the
    absolute deviation of the corresponding identity.
    """
    tol = space.tol if tol is None else tol
    rng = sampler.rng()
    dev_w1, dev_w2, dev_w3, dev_w4 = [], [], [], []
    for _ in range(sampler.count):
        x = space.sample_point(rng, sampler.radius)
        y = space.sample_point(rng, sampler.radius)
        z = space.sample_point(rng, sampler.radius)
        w = space.sample_point(rng, sampler.radius)
        lam = rng.uniform(0.0, 1.0)
        mu = rng.uniform(0.0, 1.0)

        cxy = space.combine(x, y, lam)
        lhs = space.distance(z, cxy)
        rhs = (1 - lam) * space.distance(z, x) + lam * space.distance(z, y)
        dev_w1.append((lhs - rhs, (x, y, z, lam)))

        lhs = space.distance(cxy, space.combine(x, y, mu))
        rhs = abs(lam - mu) * space.distance(x, y)
        dev_w2.append((abs(lhs - rhs), (x, y, lam, mu)))

        dev_w3.append((space.distance(cxy, space.combine(y, x, 1.0 - lam)),
                       (x, y, lam)))

        lhs = space.distance(space.combine(x, z, lam), space.combine(y, w, lam))
        rhs = (1 - lam) * space.distance(x, y) + lam * space.distance(z, w)
        dev_w4.append((lhs - rhs, (x, y, z, w, lam)))

    return [_collect("W1", dev_w1, tol), _collect("W2", dev_w2, tol),
            _collect("W3", dev_w3, tol), _collect("W4", dev_w4, tol)]


def check_cn_inequality(space: GeodesicSpace, sampler: Sampler,
                        tol: float | None = None) -> AxiomReport:
    """Sampled check of the CN midpoint inequality (left minus right)."""
    tol = space.tol if tol is None else tol

    def deviations():
        rng = sampler.rng()
        for _ in range(sampler.count):
            x = space.sample_point(rng, sampler.radius)
            y = space.sample_point(rng, sampler.radius)
            z = space.sample_point(rng, sampler.radius)
            m = space.midpoint(x, y)
            lhs = space.distance(z, m) ** 2
            rhs = (0.5 * space.distance(z, x) ** 2
                   + 0.5 * space.distance(z, y) ** 2
                   - 0.25 * space.distance(x, y) ** 2)
            yield lhs - rhs, (x, y, z)

    return _collect("CN", deviations(), tol)


def check_segment_identities(space: GeodesicSpace, sampler: Sampler,
                             tol: float | None = None) -> AxiomReport:
    """Both endpoint-distance identities of combine, worst deviation."""
    tol = space.tol if tol is None else tol

    def deviations():
        rng = sampler.rng()
        for _ in range(sampler.count):
            p = space.sample_point(rng, sampler.radius)
            q = space.sample_point(rng, sampler.radius)
            lam = rng.uniform(0.0, 1.0)
            c = space.combine(p, q, lam)
            d = space.distance(p, q)
            dev = max(abs(space.distance(p, c) - lam * d),
                      abs(space.distance(q, c) - (1 - lam) * d))
            yield dev, (p, q, lam)

    return _collect("segment", deviations(), tol)


def check_metric_axioms(space: GeodesicSpace, sampler: Sampler,
                        tol: float | None = None) -> list[AxiomReport]:
    """Symmetry, identity and triangle inequality of the distance."""
    tol = space.tol if tol is None else tol
    rng = sampler.rng()
    dev_sym, dev_ident, dev_tri = [], [], []
    for _ in range(sampler.count):
        x = space.sample_point(rng, sampler.radius)
        y = space.sample_point(rng, sampler.radius)
        z = space.sample_point(rng, sampler.radius)
        dev_sym.append((abs(space.distance(x, y) - space.distance(y, x)), (x, y)))
        dev_ident.append((abs(space.distance(x, x)), (x,)))
        dev_tri.append((space.distance(x, z)
                        - space.distance(x, y) - space.distance(y, z),
                        (x, y, z)))
    return [_collect("metric-symmetry", dev_sym, tol),
            _collect("metric-identity", dev_ident, tol),
            _collect("metric-triangle", dev_tri, tol)]


def check_midpoint_uniqueness(space: GeodesicSpace, sampler: Sampler,
                              tol: float | None = None) -> AxiomReport:
    """Quantitative uniqueness of midpoints, derived from CN.

    For sampled p, q with midpoint m, probe nearby points z and measure
    how far z is from being a midpoint itself:

        e = max(0, rho(p,z) + rho(q,z) - d) + |rho(p,z) - rho(q,z)|

    with d = rho(p,q).  Then max(rho(p,z), rho(q,z)) <= (d + e) / 2, and
    the CN inequality pins z down:

        rho(z, m)^2 <= (d+e)^2/4 - d^2/4 = d e / 2 + e^2 / 4.

    The check verifies that bound (plus tol of slack) for every probe; a
    violation means two essentially distinct midpoints, i.e. a failure of
    unique geodesics at sampling resolution.  The bound is sharp for
    probes transverse to the segment, where e shrinks quadratically in
    the displacement.
    """
    tol = space.tol if tol is None else tol

    def deviations():
        rng = sampler.rng()
        scales = (0.5, 2.0, 10.0, 100.0, 1000.0)
        for _ in range(sampler.count):
            p = space.sample_point(rng, sampler.radius)
            q = space.sample_point(rng, sampler.radius)
            d = space.distance(p, q)
            if d < 100 * tol:
                yield 0.0, None
                continue
            m = space.midpoint(p, q)
            worst = 0.0
            witness = (p, q)
            for s in scales:
                z = space.perturb_point(m, s * tol, rng)
                dp = space.distance(p, z)
                dq = space.distance(q, z)
                e = max(0.0, dp + dq - d) + abs(dp - dq)
                allowed = math.sqrt(0.5 * d * e + 0.25 * e * e) + tol
                excess = space.distance(z, m) - allowed
                if excess > worst:
                    worst = excess
                    witness = (p, q, z)
            yield worst, witness

    return _collect("midpoint-uniqueness", deviations(), tol)
