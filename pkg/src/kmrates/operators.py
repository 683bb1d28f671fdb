"""Nonexpansive self-maps of convex subsets of the model spaces.

The catalogue: plane/hyperboloid rotations (isometries), metric
projections onto balls, boxes and subtrees, edge permutations of star
trees, averaged maps, compositions, and a deliberately expansive scaling
used as a negative control for the checkers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .geometry import GeodesicSpace, GeometryError, Sampler, AxiomReport, _collect
from .spaces import EuclideanSpace, HyperboloidSpace, StarTreeSpace, TreePoint


@dataclass(frozen=True)
class Operator:
    """A self-map of a space with an optional declared fixed point."""

    space: GeodesicSpace
    fn: Callable
    descriptor: str
    fixed_point: Any = None

    def __call__(self, p):
        return self.fn(p)


class ConvexSet:
    """Descriptor of a convex subset with a diameter (or an upper bound).

    Subclasses know their membership test and, where supported, the
    metric projection formula (see `make_metric_projection`).
    """

    kind: str = "abstract"

    @property
    def descriptor(self) -> str:
        raise NotImplementedError

    def diameter(self) -> float | None:
        """Exact diameter where computable, configured bound otherwise."""
        raise NotImplementedError

    def contains(self, space: GeodesicSpace, p, tol: float | None = None) -> bool:
        raise NotImplementedError

    def validate(self, space: GeodesicSpace) -> None:
        """Check the set is well-formed for this space."""


class BallSet(ConvexSet):
    """Closed metric ball; diameter is exactly twice the radius."""

    kind = "ball"

    def __init__(self, center, radius: float):
        if radius <= 0:
            raise GeometryError(f"ball radius must be positive, got {radius}")
        self.center = center
        self.radius = float(radius)

    @property
    def descriptor(self) -> str:
        return f"ball(r={self.radius:g})"

    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains(self, space, p, tol=None):
        tol = space.tol if tol is None else tol
        return space.distance(p, self.center) <= self.radius + tol

    def validate(self, space):
        space.validate_point(self.center)


class BoxSet(ConvexSet):
    """Axis-aligned box in a Euclidean space."""

    kind = "box"

    def __init__(self, low, high):
        self.low = np.asarray(low, dtype=float)
        self.high = np.asarray(high, dtype=float)
        if self.low.shape != self.high.shape or np.any(self.low > self.high):
            raise GeometryError("box needs low <= high componentwise")

    @property
    def descriptor(self) -> str:
        return f"box({self.low.tolist()}..{self.high.tolist()})"

    def diameter(self) -> float:
        return float(np.linalg.norm(self.high - self.low))

    def contains(self, space, p, tol=None):
        tol = space.tol if tol is None else tol
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.low - tol) and np.all(p <= self.high + tol))

    def validate(self, space):
        if not isinstance(space, EuclideanSpace):
            raise GeometryError("box sets are Euclidean only")
        if self.low.shape != (space.dim,):
            raise GeometryError(
                f"box bounds have shape {self.low.shape}, space dimension is {space.dim}")


class SubtreeSet(ConvexSet):
    """Edge-prefix subtree of a star tree: offsets up to a cap per edge.

    Always contains the center.  The diameter is the sum of the two
    largest caps (every pair of points joins through the center).
    """

    kind = "subtree"

    def __init__(self, caps):
        self.caps = tuple(float(c) for c in caps)
        if any(c < 0 for c in self.caps):
            raise GeometryError(f"subtree caps must be nonnegative: {self.caps}")

    @property
    def descriptor(self) -> str:
        return "subtree(" + ",".join(f"{c:g}" for c in self.caps) + ")"

    def diameter(self) -> float:
        top = sorted(self.caps, reverse=True)
        return top[0] + top[1] if len(top) >= 2 else top[0]

    def contains(self, space, p, tol=None):
        tol = space.tol if tol is None else tol
        return p.offset <= self.caps[p.edge] + tol

    def validate(self, space):
        if not isinstance(space, StarTreeSpace):
            raise GeometryError("subtree sets need a star-tree space")
        if len(self.caps) != space.num_edges:
            raise GeometryError(
                f"{len(self.caps)} caps for {space.num_edges} edges")
        for c, length in zip(self.caps, space.lengths):
            if c > length:
                raise GeometryError(f"cap {c} exceeds edge length {length}")


class WholeSpaceSet(ConvexSet):
    """The whole space; the diameter bound must be supplied if needed."""

    kind = "whole"

    def __init__(self, diameter_bound: float | None = None):
        if diameter_bound is not None and diameter_bound <= 0:
            raise GeometryError("diameter bound must be positive")
        self.diameter_bound = diameter_bound

    @property
    def descriptor(self) -> str:
        return "whole-space"

    def diameter(self) -> float | None:
        return self.diameter_bound

    def contains(self, space, p, tol=None):
        return True


def make_identity(space: GeodesicSpace) -> Operator:
    return Operator(space=space, fn=lambda p: p, descriptor="identity")


def make_rotation(space: GeodesicSpace, angle: float) -> Operator:
    """Rotation of the Euclidean plane about the origin (an isometry)."""
    if not (isinstance(space, EuclideanSpace) and space.dim == 2):
        raise GeometryError("rotation needs the Euclidean plane")
    c, s = math.cos(angle), math.sin(angle)
    mat = np.array([[c, -s], [s, c]])

    def fn(p):
        return mat @ np.asarray(p, dtype=float)

    return Operator(space=space, fn=fn, descriptor=f"rotation({angle:g})",
                    fixed_point=np.zeros(2))


def make_hyperboloid_rotation(space: GeodesicSpace, angle: float) -> Operator:
    """Rotation of hyperbolic 2-space about the base point's axis.

    Rotating the spatial coordinates preserves the Minkowski form, so
    this is an isometry of the sheet fixing (1, 0, 0).
    """
    if not (isinstance(space, HyperboloidSpace) and space.dim == 2):
        raise GeometryError("hyperboloid rotation needs dimension 2")
    c, s = math.cos(angle), math.sin(angle)
    mat = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])

    def fn(p):
        return mat @ np.asarray(p, dtype=float)

    return Operator(space=space, fn=fn,
                    descriptor=f"hyperboloid-rotation({angle:g})",
                    fixed_point=space.base_point())


def make_edge_swap(space: GeodesicSpace, shift: int = 1) -> Operator:
    """Cyclic edge permutation of a star tree, fixing the center.

    An isometry provided the permutation preserves edge lengths (offsets
    carry over unchanged), which is validated here.
    """
    if not isinstance(space, StarTreeSpace):
        raise GeometryError("edge swap needs a star-tree space")
    m = space.num_edges
    shift = int(shift) % m
    for e in range(m):
        if space.lengths[(e + shift) % m] != space.lengths[e]:
            raise GeometryError(
                "edge swap must map edges to edges of equal length")

    def fn(p):
        if p.offset == 0.0:
            return space.center
        return TreePoint((p.edge + shift) % m, p.offset)

    return Operator(space=space, fn=fn, descriptor=f"edge-swap({shift})",
                    fixed_point=space.center)


def make_scaling(space: GeodesicSpace, factor: float) -> Operator:
    """Scaling about the Euclidean origin; factor > 1 is the expansive
    negative control for the nonexpansiveness checker."""
    if not isinstance(space, EuclideanSpace):
        raise GeometryError("scaling needs a Euclidean space")
    factor = float(factor)

    def fn(p):
        return factor * np.asarray(p, dtype=float)

    return Operator(space=space, fn=fn, descriptor=f"scaling({factor:g})",
                    fixed_point=np.zeros(space.dim))


def make_metric_projection(space: GeodesicSpace, target: ConvexSet) -> Operator:
    """Nearest-point projection onto a supported convex set.

    Supported pairs: Euclidean ball/box, hyperboloid ball, star-tree
    subtree; the whole space projects by the identity.  Projections onto
    closed convex sets in these spaces are nonexpansive and idempotent.
    """
    target.validate(space)

    if isinstance(target, WholeSpaceSet):
        return Operator(space=space, fn=lambda p: p,
                        descriptor="projection(whole-space)")

    if isinstance(target, BallSet) and isinstance(space, (EuclideanSpace, HyperboloidSpace)):
        center, radius = target.center, target.radius

        def fn(p):
            d = space.distance(center, p)
            if d <= radius:
                return p
            # slide along the geodesic from the center towards p
            return space.combine(center, p, radius / d)

        return Operator(space=space, fn=fn,
                        descriptor=f"projection({target.descriptor})",
                        fixed_point=center)

    if isinstance(target, BoxSet) and isinstance(space, EuclideanSpace):
        low, high = target.low, target.high

        def fn(p):
            return np.clip(np.asarray(p, dtype=float), low, high)

        return Operator(space=space, fn=fn,
                        descriptor=f"projection({target.descriptor})",
                        fixed_point=(low + high) / 2.0)

    if isinstance(target, SubtreeSet) and isinstance(space, StarTreeSpace):
        caps = target.caps

        def fn(p):
            return space.point(p.edge, min(p.offset, caps[p.edge]))

        return Operator(space=space, fn=fn,
                        descriptor=f"projection({target.descriptor})",
                        fixed_point=space.center)

    raise GeometryError(
        f"no projection for {target.kind!r} sets on {space.descriptor}")


def averaged(op: Operator, lam: float) -> Operator:
    """The averaged map x -> (1-lam) x + lam T x (geodesically).

    Nonexpansive whenever T is, with the same fixed points; its Picard
    orbit is the constant-lam iteration of T.
    """
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise GeometryError(f"averaging parameter must lie in (0, 1), got {lam}")
    space = op.space

    def fn(p):
        return space.combine(p, op(p), lam)

    return Operator(space=space, fn=fn,
                    descriptor=f"averaged({op.descriptor}, {lam:g})",
                    fixed_point=op.fixed_point)


def compose(outer: Operator, inner: Operator) -> Operator:
    """outer after inner; composition of nonexpansive maps is nonexpansive."""
    if outer.space.descriptor != inner.space.descriptor:
        raise GeometryError(
            f"operator spaces differ: {outer.space.descriptor} vs "
            f"{inner.space.descriptor}")
    space = outer.space

    def fn(p):
        return outer(inner(p))

    fixed = None
    for cand in (inner.fixed_point, outer.fixed_point):
        if cand is not None and space.distance(fn(cand), cand) <= space.tol:
            fixed = cand
            break
    return Operator(space=space, fn=fn,
                    descriptor=f"compose({outer.descriptor}, {inner.descriptor})",
                    fixed_point=fixed)


def check_nonexpansive(space: GeodesicSpace, op: Operator, sampler: Sampler,
                       tol: float | None = None) -> AxiomReport:
    """Sampled worst violation of rho(Tx, Ty) <= rho(x, y)."""
    tol = space.tol if tol is None else tol

    def deviations():
        rng = sampler.rng()
        for _ in range(sampler.count):
            x = space.sample_point(rng, sampler.radius)
            y = space.sample_point(rng, sampler.radius)
            yield space.distance(op(x), op(y)) - space.distance(x, y), (x, y)

    return _collect("nonexpansive", deviations(), tol)
