"""Concrete nonpositively curved model spaces.

Three families, all satisfying the W axioms and the CN inequality:

* Euclidean R^d with straight-line segments (CN holds with equality);
* the hyperboloid model of hyperbolic d-space, points on the upper sheet
  of <x,x>_L = -1 in Minkowski space R^{d,1};
* finite star trees: m >= 2 edges of given lengths glued at one center,
  with the path metric.

Euclidean and hyperboloid points are numpy vectors, tree points are
(edge, offset) pairs.  Point values are treated as immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeodesicSpace, GeometryError, InvalidPointError


class EuclideanSpace(GeodesicSpace):
    """R^d with the Euclidean metric and linear interpolation."""

    tol = 1e-9

    def __init__(self, dim: int):
        if dim < 1:
            raise GeometryError(f"euclidean dimension must be >= 1, got {dim}")
        self.dim = int(dim)

    @property
    def descriptor(self) -> str:
        return f"euclidean:{self.dim}"

    def point(self, coords) -> np.ndarray:
        p = np.asarray(coords, dtype=float)
        self.validate_point(p)
        return p

    def validate_point(self, p) -> None:
        p = np.asarray(p)
        if p.shape != (self.dim,):
            raise InvalidPointError(
                f"expected a vector of length {self.dim}, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidPointError(f"non-finite coordinates: {p}")

    def distance(self, p, q) -> float:
        return float(np.linalg.norm(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)))

    def combine(self, p, q, lam):
        lam = self._check_lambda(lam)
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        return (1.0 - lam) * p + lam * q

    def sample_point(self, rng, radius):
        return rng.uniform(-radius, radius, size=self.dim)

    def perturb_point(self, p, scale, rng):
        v = rng.normal(size=self.dim)
        v *= scale / np.linalg.norm(v)
        return np.asarray(p, dtype=float) + v


class HyperboloidSpace(GeodesicSpace):
    """Upper sheet of the hyperboloid <x,x>_L = -1 in R^{d+1}.

    Minkowski form: <x,y>_L = -x_0 y_0 + sum_i x_i y_i.  Distance uses the
    difference form <p-q,p-q>_L = 4 sinh^2(d/2), which stays fully accurate
    near coincident points where arccosh(-<p,q>_L) would lose half the
    digits.  Geodesics are sinh-interpolated and re-normalized onto the
    sheet after every combine, which keeps long iterations from drifting
    off it.
    """

    # conservative: sinh interpolation round-off grows with radius
    tol = 1e-7

    #: slack allowed on the sheet constraint of input points
    _sheet_tol = 1e-6

    def __init__(self, dim: int):
        if dim < 1:
            raise GeometryError(f"hyperboloid dimension must be >= 1, got {dim}")
        self.dim = int(dim)

    @property
    def descriptor(self) -> str:
        return f"hyperboloid:{self.dim}"

    def minkowski(self, p, q) -> float:
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        return float(-p[0] * q[0] + np.dot(p[1:], q[1:]))

    def base_point(self) -> np.ndarray:
        e = np.zeros(self.dim + 1)
        e[0] = 1.0
        return e

    def point(self, coords) -> np.ndarray:
        """Validated point from ambient coordinates."""
        p = np.asarray(coords, dtype=float)
        self.validate_point(p)
        return self._renormalize(p)

    def from_spatial(self, spatial) -> np.ndarray:
        """Lift spatial coordinates onto the sheet."""
        spatial = np.asarray(spatial, dtype=float)
        if spatial.shape != (self.dim,):
            raise InvalidPointError(
                f"expected {self.dim} spatial coordinates, got shape {spatial.shape}")
        return np.concatenate(([math.sqrt(1.0 + float(np.dot(spatial, spatial)))], spatial))

    def validate_point(self, p) -> None:
        p = np.asarray(p)
        if p.shape != (self.dim + 1,):
            raise InvalidPointError(
                f"expected a vector of length {self.dim + 1}, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidPointError(f"non-finite coordinates: {p}")
        form = self.minkowski(p, p)
        if abs(form + 1.0) > self._sheet_tol or p[0] <= 0:
            raise InvalidPointError(
                f"point off the sheet: <x,x>_L = {form:.3e}, x0 = {p[0]:.3e}")

    def _renormalize(self, p: np.ndarray) -> np.ndarray:
        return p / math.sqrt(-self.minkowski(p, p))

    def distance(self, p, q) -> float:
        self.validate_point(p)
        self.validate_point(q)
        diff = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
        # on the sheet <p-q,p-q>_L = 4 sinh^2(d/2); the clamp guards the
        # slightly negative values round-off can produce at the diagonal
        form = max(0.0, self.minkowski(diff, diff))
        return 2.0 * math.asinh(0.5 * math.sqrt(form))

    def combine(self, p, q, lam):
        lam = self._check_lambda(lam)
        self.validate_point(p)
        self.validate_point(q)
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        ell = self.distance(p, q)
        if ell == 0.0:
            return p.copy()
        s = math.sinh(ell)
        out = (math.sinh((1.0 - lam) * ell) / s) * p + (math.sinh(lam * ell) / s) * q
        return self._renormalize(out)

    def sample_point(self, rng, radius):
        # exp map from the base point: uniform direction, uniform range
        u = rng.normal(size=self.dim)
        u /= np.linalg.norm(u)
        t = rng.uniform(0.0, radius)
        out = np.concatenate(([math.cosh(t)], math.sinh(t) * u))
        return self._renormalize(out)

    def perturb_point(self, p, scale, rng):
        spatial = np.asarray(p, dtype=float)[1:].copy()
        v = rng.normal(size=self.dim)
        v *= scale / np.linalg.norm(v)
        return self.from_spatial(spatial + v)


@dataclass(frozen=True)
class TreePoint:
    """Point of a star tree: offset along one edge, measured from the center.

    The center is canonically (edge 0, offset 0); construction through
    StarTreeSpace.point guarantees that form.
    """

    edge: int
    offset: float


class StarTreeSpace(GeodesicSpace):
    """Star tree: m edges of given positive lengths glued at one center.

    The metric is the path metric: |t - s| on a shared edge, t + s across
    edges (paths run through the center).  All arithmetic is plain float
    add/subtract of offsets, so the checks pass at tight tolerances.
    """

    tol = 1e-9

    def __init__(self, lengths):
        lengths = [float(x) for x in lengths]
        if len(lengths) < 2:
            raise GeometryError(f"a star tree needs >= 2 edges, got {len(lengths)}")
        if any(x <= 0 for x in lengths):
            raise GeometryError(f"edge lengths must be positive: {lengths}")
        self.lengths = tuple(lengths)
        self.num_edges = len(lengths)

    @property
    def descriptor(self) -> str:
        return "star-tree:" + ",".join(f"{x:g}" for x in self.lengths)

    @property
    def center(self) -> TreePoint:
        return TreePoint(0, 0.0)

    def point(self, edge: int, offset: float) -> TreePoint:
        p = TreePoint(int(edge), float(offset))
        self.validate_point(p)
        return self._canonical(p)

    def _canonical(self, p: TreePoint) -> TreePoint:
        return TreePoint(0, 0.0) if p.offset == 0.0 else p

    def validate_point(self, p) -> None:
        if not isinstance(p, TreePoint):
            raise InvalidPointError(f"expected a TreePoint, got {type(p).__name__}")
        if not 0 <= p.edge < self.num_edges:
            raise InvalidPointError(
                f"edge {p.edge} out of range for {self.num_edges} edges")
        if not math.isfinite(p.offset) or p.offset < 0 or p.offset > self.lengths[p.edge]:
            raise InvalidPointError(
                f"offset {p.offset} outside [0, {self.lengths[p.edge]}] on edge {p.edge}")

    def distance(self, p, q) -> float:
        self.validate_point(p)
        self.validate_point(q)
        if p.edge == q.edge:
            return abs(p.offset - q.offset)
        return p.offset + q.offset

    def combine(self, p, q, lam):
        lam = self._check_lambda(lam)
        self.validate_point(p)
        self.validate_point(q)
        if p.edge == q.edge:
            return self._canonical(
                TreePoint(p.edge, (1.0 - lam) * p.offset + lam * q.offset))
        # walk the through-center path: arc length lam*(p.offset+q.offset) from p
        a = lam * (p.offset + q.offset)
        if a <= p.offset:
            return self._canonical(TreePoint(p.edge, p.offset - a))
        return self._canonical(TreePoint(q.edge, a - p.offset))

    def sample_point(self, rng, radius):
        edge = int(rng.integers(self.num_edges))
        cap = min(self.lengths[edge], radius)
        return self._canonical(TreePoint(edge, float(rng.uniform(0.0, cap))))

    def perturb_point(self, p, scale, rng):
        # jitter along the edge; near the center also hop across it,
        # probing the branch ambiguity of would-be midpoints
        if p.offset <= scale and self.num_edges > 1:
            edge = int(rng.integers(self.num_edges))
            off = float(rng.uniform(0.0, min(scale, self.lengths[edge])))
            return self._canonical(TreePoint(edge, off))
        lo = max(0.0, p.offset - scale)
        hi = min(self.lengths[p.edge], p.offset + scale)
        return self._canonical(TreePoint(p.edge, float(rng.uniform(lo, hi))))


def make_euclidean(dim: int) -> EuclideanSpace:
    return EuclideanSpace(dim)


def make_hyperboloid(dim: int) -> HyperboloidSpace:
    return HyperboloidSpace(dim)


def make_star_tree(lengths) -> StarTreeSpace:
    return StarTreeSpace(lengths)


_SPACE_KINDS = {
    "euclidean": lambda params: EuclideanSpace(params["dim"]),
    "hyperboloid": lambda params: HyperboloidSpace(params["dim"]),
    "star-tree": lambda params: StarTreeSpace(params["lengths"]),
}


def space_from_descriptor(kind: str, params: dict) -> GeodesicSpace:
    """Build a space from a configuration descriptor."""
    try:
        factory = _SPACE_KINDS[kind]
    except KeyError:
        raise GeometryError(
            f"unknown space kind {kind!r}; expected one of {sorted(_SPACE_KINDS)}"
        ) from None
    return factory(params)
