"""Rate regions in (R1, R2, R3) space.

Regions are stored as intersections of *min constraints*
``base . r + min_j (coef_j . r + const_j) <= rhs``, which is the natural
form of the saturation terms. A min constraint is a union of half-spaces,
so a region is a finite union of polyhedra (its *pieces*). Plain half-spaces
are min constraints with a single zero alternative.

All regions live in the nonnegative orthant.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import UnboundedRegionError, UsageError

DIM = 3
FEAS_TOL = 1e-9
DEDUP_TOL = 1e-9
ZERO = np.zeros(DIM)
E = np.eye(DIM)


@dataclass(frozen=True, eq=False)
class MinConstraint:
    base: np.ndarray
    coefs: np.ndarray  # (m, 3)
    consts: np.ndarray  # (m,)
    rhs: float
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float).reshape(DIM))
        object.__setattr__(self, "coefs", np.asarray(self.coefs, dtype=float).reshape(-1, DIM))
        object.__setattr__(self, "consts", np.asarray(self.consts, dtype=float).reshape(-1))
        object.__setattr__(self, "rhs", float(self.rhs))
        if len(self.coefs) != len(self.consts) or len(self.consts) == 0:
            raise UsageError("a min constraint needs at least one (coef, const) alternative")

    @classmethod
    def halfspace(cls, normal, rhs, label=""):
        return cls(normal, [ZERO], [0.0], rhs, label)

    @classmethod
    def with_min(cls, base, alternatives, rhs, label=""):
        coefs = [c for c, _ in alternatives]
        consts = [d for _, d in alternatives]
        return cls(base, coefs, consts, rhs, label).pruned()

    def lhs(self, r):
        r = np.atleast_2d(r)
        return r @ self.base + np.min(r @ self.coefs.T + self.consts, axis=1)

    def satisfied(self, r, tol=FEAS_TOL):
        return self.lhs(r) <= self.rhs + tol

    def planes(self):
        """Boundary planes ``n . r = d`` of each alternative."""
        return self.base + self.coefs, self.rhs - self.consts

    def pruned(self):
        """Drop alternatives dominated coefficientwise on r >= 0."""
        keep = []
        m = len(self.consts)
        for i in range(m):
            dominated = False
            for j in range(m):
                if i == j:
                    continue
                le = np.all(self.coefs[j] <= self.coefs[i]) and self.consts[j] <= self.consts[i]
                eq = np.all(self.coefs[j] == self.coefs[i]) and self.consts[j] == self.consts[i]
                if le and (not eq or j < i):
                    dominated = True
                    break
            if not dominated:
                keep.append(i)
        if len(keep) == m:
            return self
        return MinConstraint(self.base, self.coefs[keep], self.consts[keep], self.rhs, self.label)

    @property
    def nonnegative(self):
        return bool(np.all(self.base + self.coefs >= 0))


@dataclass(frozen=True, eq=False)
class RegionPiece:
    """Convex polyhedron ``{r >= 0 : A r <= b}``."""

    A: np.ndarray
    b: np.ndarray

    def contains(self, r, tol=FEAS_TOL):
        r = np.atleast_2d(r)
        return np.all(r @ self.A.T <= self.b + tol, axis=1) & np.all(r >= -tol, axis=1)


def _pack(constraints):
    m = max(len(c.consts) for c in constraints)
    n = len(constraints)
    base = np.zeros((n, DIM))
    coefs = np.zeros((n, m, DIM))
    consts = np.full((n, m), np.inf)
    rhs = np.zeros(n)
    for i, c in enumerate(constraints):
        base[i] = c.base
        coefs[i, : len(c.consts)] = c.coefs
        consts[i, : len(c.consts)] = c.consts
        rhs[i] = c.rhs
    # every alternative as one plane: (base + coef) . r + const <= rhs
    flat = (base[:, None, :] + coefs).reshape(-1, DIM)
    return flat.T.copy(), (consts - rhs[:, None]).reshape(-1), (n, m)


_TRIPLES = {}


def _triple_inverses(normals, groups):
    """Plane triples from distinct constraints with independent normals, and their inverses."""
    key = (normals.shape, normals.tobytes(), groups.tobytes())
    hit = _TRIPLES.get(key)
    if hit is None:
        combos = np.array(list(itertools.combinations(range(len(normals)), 3)), dtype=np.int64)
        if len(combos) == 0:
            hit = (np.zeros((0, 3), dtype=np.int64), np.zeros((0, 3, 3)))
        else:
            g = groups[combos]
            combos = combos[(g[:, 0] != g[:, 1]) & (g[:, 0] != g[:, 2]) & (g[:, 1] != g[:, 2])]
            mats = normals[combos]
            ok = np.abs(np.linalg.det(mats)) > 1e-9
            hit = (combos[ok], np.linalg.inv(mats[ok]))
        if len(_TRIPLES) > 4096:
            _TRIPLES.clear()
        _TRIPLES[key] = hit
    return hit


def dedupe_points(points, tol=DEDUP_TOL):
    """Unique rows within ``tol`` (grid snapping), sorted lexicographically."""
    points = np.asarray(points, dtype=float).reshape(-1, DIM)
    if len(points) == 0:
        return points
    points = np.where(np.abs(points) < 1e-12, 0.0, points)
    snapped = np.round(points / tol).astype(np.int64)
    _, idx = np.unique(snapped, axis=0, return_index=True)
    return points[idx]  # np.unique sorts rows lexicographically


LOCAL_STEP = 1e-6
_PAIRS = {}


def _plane_pairs(k):
    hit = _PAIRS.get(k)
    if hit is None:
        hit = _PAIRS[k] = np.array(list(itertools.combinations(range(k), 2)), dtype=np.int64).reshape(-1, 2)
    return hit


def locally_extreme(contains, pts, normals, offsets, step=LOCAL_STEP):
    """Mask of points that are not the midpoint of any short segment inside the set.

    Near ``r`` the set is a union of polyhedral cones bounded by the planes
    tight at ``r``; if it holds a segment through ``r`` it holds one along an
    intersection line of two tight planes, so only those directions are tried.
    """
    if len(pts) == 0:
        return np.zeros(0, dtype=bool)
    unit = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    tight = np.abs(pts @ normals.T - offsets) <= 1e-9 * np.maximum(1.0, np.abs(offsets))
    counts = tight.sum(axis=1)
    kmax = int(counts.max())
    if kmax < 2:
        return np.ones(len(pts), dtype=bool)
    # tight plane indices per point, padded by repeating the first one
    order = np.argsort(~tight, axis=1, kind="stable")[:, :kmax]
    pad = np.arange(kmax)[None, :] >= counts[:, None]
    order = np.where(pad, order[:, :1], order)
    pairs = _plane_pairs(kmax)
    dirs = np.cross(unit[order[:, pairs[:, 0]]], unit[order[:, pairs[:, 1]]])  # (M, P, 3)
    norm = np.linalg.norm(dirs, axis=2)
    valid = norm > 1e-9
    dirs = np.where(valid[..., None], dirs / np.where(valid, norm, 1.0)[..., None], 0.0)
    fwd = contains((pts[:, None, :] + step * dirs).reshape(-1, DIM)).reshape(valid.shape)
    bwd = contains((pts[:, None, :] - step * dirs).reshape(-1, DIM)).reshape(valid.shape)
    return ~np.any(valid & fwd & bwd, axis=1)


@dataclass(frozen=True)
class WeightedSum:
    value: float
    argmax: np.ndarray | None
    unbounded: bool = False


@dataclass(frozen=True, eq=False)
class RateRegion:
    constraints: tuple
    label: str = ""
    vertices: np.ndarray | None = None  # known vertex set (hulls)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @cached_property
    def _packed(self):
        return _pack(self.constraints)

    def contains(self, r, tol=FEAS_TOL):
        """Membership of one point (returns bool) or of an (N, 3) array."""
        r = np.asarray(r, dtype=float)
        single = r.ndim == 1
        pts = np.atleast_2d(r)
        flat, shift, shape = self._packed
        vals = (pts @ flat + shift).reshape(len(pts), *shape)
        slack = vals[:, :, 0]
        for j in range(1, shape[1]):  # short axis: elementwise beats reduce
            slack = np.minimum(slack, vals[:, :, j])
        ok = np.all(slack <= tol, axis=1) & np.all(pts >= -tol, axis=1)
        return bool(ok[0]) if single else ok

    @property
    def downward_closed(self):
        """Provable from nonnegative coefficients in every alternative."""
        return all(c.nonnegative for c in self.constraints)

    def unbounded_coordinates(self):
        """Coordinates along which the region extends to infinity."""
        if self.vertices is not None:
            return ()
        if not self.downward_closed:
            raise UsageError("boundedness test needs nonnegative constraint coefficients")
        out = []
        for i in range(DIM):
            free = True
            for c in self.constraints:
                normals = c.base + c.coefs
                if not np.any((normals[:, i] == 0) & (c.consts <= c.rhs + FEAS_TOL)):
                    free = False
                    break
            if free and self.contains(ZERO):
                out.append(i)
        return tuple(out)

    @property
    def bounded(self):
        return not self.unbounded_coordinates()

    def planes(self):
        """Boundary planes of every alternative plus the coordinate planes.

        Returns ``(normals, offsets, groups)``; ``groups`` names the owning
        constraint (coordinate planes get their own groups).
        """
        normals, offsets, groups = [], [], []
        for i, c in enumerate(self.constraints):
            n, d = c.planes()
            normals.append(n)
            offsets.append(d)
            groups.append(np.full(len(d), i))
        normals.append(E)
        offsets.append(ZERO)
        groups.append(len(self.constraints) + np.arange(DIM))
        return np.vstack(normals), np.concatenate(offsets), np.concatenate(groups)

    def _enumerate_vertices(self):
        if "vertices" not in self._cache:
            if self.vertices is not None:
                v = self.vertices
            else:
                # a piece vertex is cut out by three tight planes of one piece,
                # hence from three distinct constraints
                normals, offsets, groups = self.planes()
                triples, inv = _triple_inverses(normals, groups)
                pts = np.einsum("tij,tj->ti", inv, offsets[triples])
                pts = pts[np.all(np.isfinite(pts), axis=1)]
                pts = pts[self.contains(pts)]
                pts[np.abs(pts) < 1e-12] = 0.0
                v = dedupe_points(pts)
                # keep only corners of the set itself, not of its representation
                if self.downward_closed and len(v):
                    # r + step*(1,1,1) inside means a whole box around r (r != 0) is inside
                    up = self.contains(v + LOCAL_STEP, 1e-12) & np.any(v > 0, axis=1)
                    v = v[~up]
                v = v[locally_extreme(lambda q: self.contains(q, 1e-12), v, normals, offsets)]
            self._cache["vertices"] = v
        return self._cache["vertices"]

    @cached_property
    def pieces(self):
        """Expansion of the min constraints into convex pieces."""
        choices = [range(len(c.consts)) for c in self.constraints]
        out = []
        seen = set()
        for pick in itertools.product(*choices):
            A = np.array([c.base + c.coefs[j] for c, j in zip(self.constraints, pick)])
            b = np.array([c.rhs - c.consts[j] for c, j in zip(self.constraints, pick)])
            if np.all(A >= 0) and np.any(b < -FEAS_TOL):
                continue  # origin infeasible, so the piece is empty
            key = (A.tobytes(), np.round(b, 12).tobytes())
            if key in seen:
                continue
            seen.add(key)
            out.append(RegionPiece(A, b))
        return tuple(out)


def corner_points(region):
    if not region.bounded:
        raise UnboundedRegionError(
            f"region {region.label!r} is unbounded along coordinates "
            f"{[i + 1 for i in region.unbounded_coordinates()]}; cap it first"
        )
    return region._enumerate_vertices()


def max_weighted_sum(region, w, tol=FEAS_TOL):
    w = np.asarray(w, dtype=float)
    unbounded = region.unbounded_coordinates()
    if any(w[i] > 0 for i in unbounded):
        return WeightedSum(float("inf"), None, True)
    v = region._enumerate_vertices()
    if len(v) == 0:
        return WeightedSum(float("-inf"), None)
    vals = v @ w
    best = vals.max()
    ties = v[vals >= best - tol]
    # vertices are already lexicographically sorted
    return WeightedSum(float(best), ties[0].copy())


def cap(region, upper):
    """Intersect with the box ``r <= upper`` (diagnostic plotting of unbounded regions)."""
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (DIM,))
    extra = [MinConstraint.halfspace(E[i], upper[i], f"cap R{i + 1}") for i in range(DIM)]
    return RateRegion(region.constraints + tuple(extra), region.label + " (capped)")


def intersect(*regions, label=""):
    cons = tuple(c for r in regions for c in r.constraints)
    return RateRegion(cons, label)


# -- convex hulls ---------------------------------------------------------------------


def _projections(points):
    """Every point with each subset of its coordinates zeroed."""
    out = [points]
    for mask in itertools.product((0.0, 1.0), repeat=DIM):
        if all(mask):
            continue
        out.append(points * np.array(mask))
    return np.vstack(out)


def downward_hull(points, label="hull"):
    """Convex hull of the downward closure of ``points`` as a single-piece region."""
    pts = np.asarray(points, dtype=float).reshape(-1, DIM)
    if len(pts) == 0:
        raise UsageError("hull of an empty point set")
    pts = np.clip(pts, 0.0, None)
    pts[pts < 1e-12] = 0.0
    active = [i for i in range(DIM) if pts[:, i].max() > FEAS_TOL]
    cons = [MinConstraint.halfspace(E[i], 0.0, f"R{i + 1}=0") for i in range(DIM) if i not in active]
    if len(active) == 0:
        return RateRegion(cons, label, vertices=np.zeros((1, DIM)))
    if len(active) == 1:
        i = active[0]
        top = pts[:, i].max()
        cons.append(MinConstraint.halfspace(E[i], top, f"R{i + 1}<=max"))
        v = np.zeros((2, DIM))
        v[1, i] = top
        return RateRegion(cons, label, vertices=v)
    sub = dedupe_points(_projections(pts))[:, active]
    try:
        hull = ConvexHull(sub)
    except QhullError:
        hull = ConvexHull(sub, qhull_options="QJ")
    eq = hull.equations
    normals = eq[:, :-1]
    offsets = -eq[:, -1]
    # qhull triangulates coplanar facets; merge duplicates
    facets = np.round(np.hstack([normals, offsets[:, None]]), 10)
    _, idx = np.unique(facets, axis=0, return_index=True)
    for j in np.sort(idx):
        n = np.zeros(DIM)
        n[active] = normals[j]
        if np.all(n <= 1e-12) and offsets[j] >= -1e-12:
            continue  # coordinate facet -r_i <= 0, implied by the orthant
        cons.append(MinConstraint.halfspace(n, offsets[j], "facet"))
    v = np.zeros((len(hull.vertices), DIM))
    v[:, active] = sub[hull.vertices]
    return RateRegion(cons, label, vertices=dedupe_points(v))


def hull_union(items, label="hull"):
    """Convex, downward-closed hull of regions and/or corner arrays."""
    items = list(items)
    if not items:
        raise UsageError("hull_union needs at least one region or corner set")
    pts = []
    for it in items:
        pts.append(corner_points(it) if isinstance(it, RateRegion) else np.asarray(it, dtype=float))
    return downward_hull(np.vstack(pts), label)


def box_region(upper, label="box"):
    upper = np.asarray(upper, dtype=float)
    cons = [MinConstraint.halfspace(E[i], upper[i], f"R{i + 1}<={upper[i]:.4g}") for i in range(DIM)]
    return RateRegion(cons, label)


# -- slices and inclusion ----------------------------------------------------------------


@dataclass(frozen=True)
class Slice2D:
    coords: np.ndarray  # member grid points in plane coordinates
    polygon: np.ndarray  # hull polygon (closed order) of the member points
    point: np.ndarray
    u: np.ndarray
    v: np.ndarray


R2_45_PLANE = (ZERO, np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0), np.array([0.0, 1.0, 0.0]))


def slice_region(region, point=None, u=None, v=None, resolution=200, extent=None, tol=FEAS_TOL):
    """Membership-sampled intersection of ``region`` with ``point + t u + s v``."""
    p0, u0, v0 = R2_45_PLANE
    point = p0 if point is None else np.asarray(point, dtype=float)
    u = u0 if u is None else np.asarray(u, dtype=float)
    v = v0 if v is None else np.asarray(v, dtype=float)
    if extent is None:
        corners = region._enumerate_vertices()
        extent = float(np.max(np.linalg.norm(corners - point, axis=1))) * 1.05 + 1e-9
        extent /= min(np.linalg.norm(u), np.linalg.norm(v))
    t = np.linspace(-extent, extent, 2 * resolution + 1)
    T, S = np.meshgrid(t, t, indexing="ij")
    ts = np.column_stack([T.ravel(), S.ravel()])
    pts = point + ts[:, :1] * u + ts[:, 1:] * v
    inside = region.contains(pts, tol)
    coords = ts[inside]
    polygon = np.zeros((0, 2))
    if len(coords) >= 3:
        try:
            hull = ConvexHull(coords)
            polygon = coords[hull.vertices]
        except QhullError:
            polygon = coords
    return Slice2D(coords, polygon, point, u, v)


@dataclass(frozen=True)
class InclusionResult:
    passed: bool
    witnesses: np.ndarray
    n_checked: int


def sample_region(region, n, rng):
    """Corners plus ``n`` random points of a bounded downward-closed region."""
    corners = region._enumerate_vertices()
    if len(corners) == 0:
        return corners
    convex = region.vertices is not None
    idx = rng.integers(len(corners), size=n)
    base = corners[idx]
    if convex and len(corners) > 1:
        other = corners[rng.integers(len(corners), size=n)]
        lam = rng.random((n, 1))
        base = lam * base + (1 - lam) * other
    scale = rng.random((n, DIM))
    # keep a share of samples exactly on the outer boundary
    scale[: n // 4] = 1.0
    pts = np.vstack([corners, base * scale])
    return pts[region.contains(pts)]


def inclusion_check(a, b, n=1000, seed=0, tol=FEAS_TOL, rng=None):
    """Sample points of ``a`` and report those outside ``b``."""
    rng = np.random.default_rng(seed) if rng is None else rng
    pts = sample_region(a, n, rng)
    outside = ~b.contains(pts, tol)
    return InclusionResult(not outside.any(), pts[outside], len(pts))
