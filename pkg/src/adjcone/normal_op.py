"""Normal cone operators, local cone bases, and the glued global base map.

For a step level function the strict normal cone at a point is the polar
of the translated strict sublevel polytope and the adjusted normal cone
is assembled from the active facet normals of the sublevel polytope plus
the enlargement ray toward the strict sublevel set.  The assembled
generators are verified against the set definition by sampling; on a
verification failure (a constraint-qualification breakdown, which only
corrupted instances trigger) the operation falls back to a direct polar
computation from sampled points of the adjusted set.

A local chart anchors a section hyperplane that cuts every normal cone
on its ball into a compact base inside the dual unit ball.  An atlas is
a finite covering by such charts together with piecewise-linear hat
bumps; normalizing the bumps yields a partition of unity and the global
base map is the weighted Minkowski combination of the per-chart bases.

The probes at the bottom of the module turn the continuity statements
into numbers: upper-Hausdorff deviation curves for upper semicontinuity,
accumulation-direction checks for closedness, and sign tests for
quasimonotonicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    DEFAULT_TOLERANCES,
    GeneratedCone,
    GeometryError,
    Polytope,
    normal_cone_at,
    polar_extreme_rays,
    polytope_distance,
    weighted_minkowski,
)
from .quasiconvex import ArgminError, DomainError, StepLevelFunction

__all__ = [
    "ChartError",
    "CoverageError",
    "ConeVerificationError",
    "BaseInvariantError",
    "LocalChart",
    "Atlas",
    "BaseResult",
    "ProbeReport",
    "ProbeVerdict",
    "strict_normal_cone",
    "adjusted_normal_cone",
    "polar_of_samples",
    "normalized_base",
    "build_chart",
    "chart_base",
    "build_atlas",
    "global_base",
    "usc_probe",
    "closedness_probe",
    "quasimonotonicity_probe",
    "stable_probe_points",
]

_VERIFY_SEED = 20240601


class ChartError(GeometryError):
    """No valid chart exists at the requested center."""


class CoverageError(GeometryError):
    """The atlas (or its construction) leaves part of the region uncovered."""


class ConeVerificationError(GeometryError):
    """Assembled generators failed verification and so did the fallback."""


class BaseInvariantError(GeometryError):
    """A computed base violates one of its defining invariants."""


def _require_regular_point(f, x):
    value = f.evaluate(x)
    if math.isinf(value):
        raise DomainError("point outside the domain")
    if f.in_argmin(x):
        raise ArgminError("operation undefined on the argmin set")
    return value


def strict_normal_cone(f: StepLevelFunction, x):
    """Polar of the translated strict sublevel polytope at x.

    The strict sublevel realization is full-dimensional on valid chart
    instances, so the polar cone is pointed and its extreme rays are
    enumerated from the translated vertices.
    """
    x = np.asarray(x, dtype=float).ravel()
    value = _require_regular_point(f, x)
    handle = f.strict_sublevel(value)
    if handle.is_empty:
        raise ArgminError("strict sublevel set empty; cone is the whole space")
    directions = handle.polytope.vertices() - x
    rays = polar_extreme_rays(directions, dim=f.dim)
    if rays.shape[0] == 0:
        raise GeometryError("strict normal cone enumeration found no rays")
    return GeneratedCone.from_rays(rays, dim=f.dim, tolerances=f.tolerances)


def _sample_adjusted_polyhedral(f, x, sublevel_poly, strict_poly, radius, rng, count):
    """Points of ``sublevel ∩ B(strict, radius)`` for generator verification."""
    cand = np.vstack([
        sublevel_poly.sample(rng, 3 * count),
        sublevel_poly.vertices(),
        x[None, :],
    ])
    blends = np.vstack([x + t * (cand - x) for t in (1.0, 0.6, 0.3)])
    _, dist = strict_poly.project_many(blends)
    keep = blends[dist <= radius + f.tolerances.feas]
    if len(keep) > count:
        keep = keep[rng.choice(len(keep), size=count, replace=False)]
    return keep


def adjusted_normal_cone(f: StepLevelFunction, x, verify_samples=1000):
    """Normal cone of the adjusted sublevel set at x.

    Argmin points return the normal cone of the bottom polytope (zero
    cone in its interior).  Elsewhere the generators are the active facet
    normals of the sublevel polytope plus the enlargement ray, verified
    by sampling; a direct polar of sampled adjusted-set points is the
    fallback when the generator sum rule fails.
    """
    x = np.asarray(x, dtype=float).ravel()
    value = f.evaluate(x)
    if math.isinf(value):
        raise DomainError("point outside the domain")
    if f.in_argmin(x):
        return normal_cone_at(f.polytopes[0], x, tolerances=f.tolerances)

    sub = f.sublevel(value).polytope
    strict = f.strict_sublevel(value).polytope
    anchor, radius = strict.project(x)
    if radius <= f.tolerances.feas:
        raise GeometryError("enlargement radius degenerate at x")
    ray = (x - anchor) / radius
    facets = normal_cone_at(sub, x, tolerances=f.tolerances)
    gens = np.vstack([facets.generators, ray[None, :]])
    cone = GeneratedCone.from_rays(gens, dim=f.dim, tolerances=f.tolerances)

    rng = np.random.default_rng(_VERIFY_SEED)
    points = _sample_adjusted_polyhedral(f, x, sub, strict, radius, rng,
                                         verify_samples)
    if len(points):
        slackmax = ((points - x) @ cone.generators.T).max()
        if slackmax > f.tolerances.cone:
            # Sum rule failed; fall back to the polar of the sampled set.
            cone = polar_of_samples(points, x, dim=f.dim,
                                    tolerances=f.tolerances)
            if not cone.is_zero:
                slackmax = ((points - x) @ cone.generators.T).max()
                if slackmax > 10 * f.tolerances.cone:
                    raise ConeVerificationError(
                        f"fallback polar still violates the definition "
                        f"(slack {slackmax:.2e})")
    return cone.minimal()


def polar_of_samples(points, x, dim, tolerances=None):
    """Polar cone of a sampled set anchored at x, as a generated cone.

    The direct-computation fallback behind the generator sum rule: rays
    making nonpositive products with every sampled offset.
    """
    tol = tolerances or DEFAULT_TOLERANCES
    directions = np.atleast_2d(np.asarray(points, dtype=float)) - x
    mask = np.linalg.norm(directions, axis=1) > 1e-12
    try:
        rays = polar_extreme_rays(directions[mask], dim=dim)
    except GeometryError:
        rays = np.zeros((0, dim))
    return GeneratedCone.from_rays(rays, dim=dim, tolerances=tol)


def normalized_base(f, x, verify_samples=1000):
    """Hull of the unit-normalized generators: a compact base in R^n."""
    cone = adjusted_normal_cone(f, x, verify_samples=verify_samples)
    if cone.is_zero:
        raise GeometryError("the zero cone has no base")
    norms = np.linalg.norm(cone.generators, axis=1)
    return Polytope.from_vertices(cone.generators / norms[:, None],
                                  tolerances=f.tolerances)


@dataclass(frozen=True)
class LocalChart:
    """One chart of the covering: a ball on which a fixed hyperplane cuts
    every normal cone into a compact base.

    ``center`` is the chart point, ``level`` the strictly smaller level
    used for the interior anchor, ``anchor`` an interior point of that
    strict sublevel set (a Chebyshev center), ``radius`` the ball radius.
    The section hyperplane is ``{v : v . normal = radius}`` with
    ``normal = center - anchor``.
    """

    center: np.ndarray
    level: float
    anchor: np.ndarray
    radius: float

    @property
    def normal(self) -> np.ndarray:
        return self.center - self.anchor

    def bump(self, x) -> float:
        """Piecewise-linear hat: positive strictly inside the ball."""
        return max(0.0, self.radius - float(np.linalg.norm(np.asarray(x, dtype=float).ravel() - self.center)))


def build_chart(f: StepLevelFunction, z, radius_cap=None) -> LocalChart:
    """Construct the chart at z: anchor at the Chebyshev center of the
    strict sublevel set, level at the midpoint of the adjacent level pair,
    radius small enough that the ball avoids the chosen sublevel set and
    the doubled ball around the anchor stays inside the strict set."""
    z = np.asarray(z, dtype=float).ravel()
    value = _require_regular_point(f, z)
    j = f.level_index(z)
    prev_level = f.levels[j - 1]
    level = 0.5 * (prev_level + value)
    strict = f.strict_sublevel(value).polytope
    anchor, cheb_radius = strict.chebyshev_center()
    if cheb_radius <= f.tolerances.feas:
        raise ChartError("strict sublevel set has empty interior at this level")
    sub_at_level = f.sublevel(level).polytope
    dist = sub_at_level.distance(z)
    if dist <= f.tolerances.feas:
        raise ChartError("chart center touches the sublevel set")
    radius = min(0.9 * dist, 0.5 * cheb_radius)
    if radius_cap is not None:
        radius = min(radius, float(radius_cap))
    if radius <= 0:
        raise ChartError("no positive chart radius available")
    return LocalChart(center=z, level=level, anchor=anchor, radius=radius)


def chart_base(chart: LocalChart, f: StepLevelFunction, x, verify_samples=1000):
    """Section of the adjusted normal cone by the chart hyperplane.

    The chart estimate guarantees the section lies in the dual unit
    ball; the vertex norms are re-checked after construction.
    """
    x = np.asarray(x, dtype=float).ravel()
    if np.linalg.norm(x - chart.center) > chart.radius + f.tolerances.feas:
        raise ValueError("point outside the chart ball")
    cone = adjusted_normal_cone(f, x, verify_samples=verify_samples)
    base = cone.section(chart.normal, chart.radius)
    norms = np.linalg.norm(base.vertices(), axis=1)
    if norms.max() > 1.0 + f.tolerances.feas:
        raise ChartError(
            f"section leaves the dual unit ball (max norm {norms.max():.12f})")
    return base


@dataclass
class Atlas:
    """Finite chart covering of a compact region with hat-bump weights."""

    charts: tuple
    region: Polytope
    cover_step: float
    tolerances: object = field(default_factory=lambda: DEFAULT_TOLERANCES)
    _grid: np.ndarray | None = field(default=None, repr=False)

    def bump_values(self, x):
        x = np.asarray(x, dtype=float).ravel()
        return np.array([c.bump(x) for c in self.charts])

    def weights(self, x):
        """Active chart indices and their partition-of-unity weights."""
        bumps = self.bump_values(x)
        total = bumps.sum()
        if total <= 0:
            raise CoverageError(f"no chart covers {np.asarray(x).tolist()}")
        active = np.nonzero(bumps > 0)[0]
        return active, bumps[active] / total

    def covers(self, x):
        return bool(self.bump_values(x).sum() > 0)

    def verification_grid(self):
        """Deterministic grid of mesh cover_step/4 inside the region."""
        if self._grid is None:
            self._grid = _region_grid(self.region, self.cover_step / 4.0)
        return self._grid


def _region_grid(region: Polytope, mesh: float):
    lo, hi = region.bounding_box()
    axes = []
    for k in range(region.dim):
        count = max(2, int(math.floor((hi[k] - lo[k]) / mesh + 1e-9)) + 1)
        axes.append(np.linspace(lo[k], hi[k], count))
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, region.dim)
    return pts[region.contains_many(pts)]


def build_atlas(f: StepLevelFunction, region: Polytope, cover_step,
                argmin_margin=None, radius_cap=None, max_rounds=8) -> Atlas:
    """Charts on a grid over the region, densified until the hat bumps
    cover a verification grid of mesh ``cover_step / 4``.

    The region must keep a declared margin from the argmin set (default:
    one cover step); the global base map is only defined away from the
    argmin anyway and charts shrink to nothing against it.
    """
    margin = cover_step if argmin_margin is None else float(argmin_margin)
    gap = polytope_distance(region, f.argmin_set)
    if gap < margin - f.tolerances.feas:
        raise CoverageError(
            f"region is {gap:.3g} from the argmin set, margin {margin:.3g} required")

    charts = []

    def try_add(z):
        if math.isinf(f.evaluate(z)) or f.in_argmin(z):
            return False
        try:
            charts.append(build_chart(f, z, radius_cap=radius_cap))
        except ChartError:
            return False
        return True

    for z in _region_grid(region, cover_step):
        try_add(z)

    atlas = Atlas(tuple(charts), region, float(cover_step), f.tolerances)
    grid = atlas.verification_grid()
    for _ in range(max_rounds):
        bumps = np.array([atlas.bump_values(p).sum() for p in grid])
        holes = grid[bumps <= 0]
        if len(holes) == 0:
            return atlas
        added = 0
        for z in holes:
            if try_add(z):
                added += 1
        if added == 0:
            break
        atlas = Atlas(tuple(charts), region, float(cover_step), f.tolerances)
    raise CoverageError("covering failed after densification "
                        f"({len(holes)} grid points uncovered)")


@dataclass
class BaseResult:
    """Output of the global base map at one point."""

    base: Polytope
    active_charts: tuple  # (chart index, weight)
    cone: GeneratedCone

    def to_dict(self):
        return {
            "vertices": self.base.vertices().tolist(),
            "active_charts": [[int(i), float(w)] for i, w in self.active_charts],
            "cone_generators": self.cone.generators.tolist(),
        }


def global_base(atlas: Atlas, f: StepLevelFunction, x, *, verify=True,
                verify_samples=400) -> BaseResult:
    """Partition-of-unity combination of the active chart bases.

    Post-verifies the base invariants: contained in the dual unit ball,
    min-norm point bounded away from the origin, and generating exactly
    the adjusted normal cone at x.
    """
    x = np.asarray(x, dtype=float).ravel()
    active, weights = atlas.weights(x)
    cone = adjusted_normal_cone(f, x, verify_samples=verify_samples)
    if cone.is_zero:
        raise GeometryError("zero cone admits no base; is x near the argmin?")
    sections = [cone.section(atlas.charts[i].normal, atlas.charts[i].radius)
                for i in active]
    for i, sec in zip(active, sections):
        norms = np.linalg.norm(sec.vertices(), axis=1)
        if norms.max() > 1.0 + f.tolerances.feas:
            raise ChartError(f"chart {int(i)} section leaves the dual ball")
    if len(sections) == 1:
        base = sections[0]
    else:
        base = weighted_minkowski(list(zip(weights, sections)),
                                  tolerances=f.tolerances)
    result = BaseResult(base=base,
                        active_charts=tuple((int(i), float(w))
                                            for i, w in zip(active, weights)),
                        cone=cone)
    if verify:
        verts = base.vertices()
        norms = np.linalg.norm(verts, axis=1)
        if norms.max() > 1.0 + f.tolerances.feas:
            raise BaseInvariantError("base leaves the dual unit ball")
        _, min_norm = base.project(np.zeros(f.dim))
        if min_norm < f.tolerances.zero:
            raise BaseInvariantError(
                f"base min-norm {min_norm:.3e} below the nonzero margin")
        regenerated = GeneratedCone.from_rays(verts, dim=f.dim,
                                              tolerances=f.tolerances)
        if not regenerated.equals(cone, f.tolerances.cone):
            raise BaseInvariantError("base does not generate the normal cone")
    return result


@dataclass
class ProbeReport:
    """Deviation curve of a set-valued map around a probe point."""

    point: np.ndarray
    radii: tuple
    deviations: tuple
    holes: int
    passed: bool

    def rows(self):
        return list(zip(self.radii, self.deviations))

    def to_dict(self):
        return {
            "point": np.asarray(self.point).tolist(),
            "radii": list(self.radii),
            "deviations": list(self.deviations),
            "holes": self.holes,
            "passed": self.passed,
        }


@dataclass
class ProbeVerdict:
    passed: bool
    violations: list
    checked: int
    kind: str

    def to_dict(self):
        return {
            "passed": self.passed,
            "checked": self.checked,
            "kind": self.kind,
            "violations": [
                {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                 for k, v in viol.items()}
                for viol in self.violations[:10]
            ],
            "violation_count": len(self.violations),
        }


def _as_polytope(value):
    if isinstance(value, BaseResult):
        return value.base
    if isinstance(value, Polytope):
        return value
    raise TypeError("map must produce Polytope or BaseResult values")


def usc_probe(map_fn, x, radii=(1e-1, 1e-2, 1e-3, 1e-4),
              samples_per_radius=20, seed=0, tol_probe=1e-6) -> ProbeReport:
    """Upper-Hausdorff deviation curve of a compact-valued map at x.

    Samples points in shrinking balls, pools them, and reports the
    cumulative deviation per radius, which is non-increasing down the
    ladder by construction.  Verdict: terminal deviation below the probe
    tolerance.  Points where the map is undefined count as coverage
    holes, not failures.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    reference = _as_polytope(map_fn(x))
    rng = np.random.default_rng(seed)
    radii = tuple(sorted(radii, reverse=True))
    samples = []
    holes = 0
    for r in radii:
        for _ in range(samples_per_radius):
            direction = rng.normal(size=n)
            direction /= np.linalg.norm(direction)
            scale = rng.uniform() ** (1.0 / n)
            point = x + r * scale * direction
            try:
                value = _as_polytope(map_fn(point))
            except (CoverageError, DomainError, ArgminError, GeometryError):
                holes += 1
                continue
            _, dists = reference.project_many(value.vertices())
            samples.append((float(np.linalg.norm(point - x)), float(dists.max())))
    deviations = []
    for r in radii:
        within = [d for dist, d in samples if dist <= r + 1e-15]
        deviations.append(max(within) if within else 0.0)
    passed = deviations[-1] <= tol_probe
    return ProbeReport(point=x, radii=radii, deviations=tuple(deviations),
                       holes=holes, passed=passed)


def closedness_probe(f: StepLevelFunction, x, approach_sequences=100,
                     scales=(1e-1, 1e-2, 1e-3, 1e-4), cluster_tol=1e-3,
                     seed=0, verify_samples=200) -> ProbeVerdict:
    """Graph-closedness test for the adjusted normal cone at x.

    Walks sequences ``x_k -> x`` along random directions, normalizes the
    cone generators along the way, and checks that every accumulation
    direction (a direction persisting across the two finest scales)
    belongs to the cone at x.  A direction still drifting between those
    scales is linearly extrapolated to its limit and tested with a slack
    matched to the drift; a genuine jump has no drift and is flagged at
    the plain cone tolerance.
    """
    x = np.asarray(x, dtype=float).ravel()
    value = _require_regular_point(f, x)
    cone_x = adjusted_normal_cone(f, x, verify_samples=verify_samples)
    rng = np.random.default_rng(seed)
    scales = sorted(scales, reverse=True)
    violations = []
    checked = 0
    for _ in range(approach_sequences):
        direction = rng.normal(size=f.dim)
        direction /= np.linalg.norm(direction)
        tail = []
        for t in scales:
            point = x + t * direction
            if math.isinf(f.evaluate(point)) or f.in_argmin(point):
                continue
            cone_k = adjusted_normal_cone(f, point, verify_samples=verify_samples)
            if not cone_k.is_zero:
                tail.append((t, cone_k.generators))
        if len(tail) < 2:
            continue
        (t_fin, finest), (t_sec, second) = tail[-1], tail[-2]
        for g in finest:
            drift_all = np.linalg.norm(second - g, axis=1)
            match = int(np.argmin(drift_all))
            drift = float(drift_all[match])
            if drift > cluster_tol:
                continue  # no persistence: not an accumulation direction
            checked += 1
            limit = g + (g - second[match]) * (t_fin / (t_sec - t_fin))
            nrm = np.linalg.norm(limit)
            if nrm > 1e-12:
                limit = limit / nrm
            slack = f.tolerances.cone + 0.5 * drift
            if not cone_x.contains(limit, slack):
                violations.append({"direction": direction.copy(),
                                   "limit": limit.copy(), "drift": drift})
    return ProbeVerdict(passed=not violations, violations=violations,
                        checked=checked, kind="closedness")


def _regular_point_pool(f: StepLevelFunction, rng, target):
    """Domain points outside the argmin set, mixing random interior points
    with every level polytope's vertices (where facet activity lives)."""
    pool = []
    per = max(8, target // max(1, len(f.polytopes)))
    for poly in f.polytopes:
        for p in np.vstack([poly.sample(rng, per), poly.vertices()]):
            if not math.isinf(f.evaluate(p)) and not f.in_argmin(p):
                pool.append(p)
    out = []
    for p in pool:
        if all(np.linalg.norm(p - q) > 1e-10 for q in out[-40:]):
            out.append(p)
    return out[: max(target, 1)]


def quasimonotonicity_probe(f: StepLevelFunction, pair_samples=1000, seed=0,
                            verify_samples=200, pool_size=160) -> ProbeVerdict:
    """Quasimonotonicity of the adjusted normal cone operator.

    For sampled ordered pairs (x, y): if some generator at x makes
    strictly positive product with ``y - x``, every generator at y must
    make a nonnegative one.  Valid quasiconvex instances must produce
    zero violations; corrupted families are expected to fail.
    """
    rng = np.random.default_rng(seed)
    points = _regular_point_pool(f, rng, pool_size)
    cones = []
    for p in points:
        try:
            cone = adjusted_normal_cone(f, p, verify_samples=verify_samples)
        except (GeometryError, DomainError, ArgminError):
            cone = None
        cones.append(cone)
    usable = [(p, c) for p, c in zip(points, cones)
              if c is not None and not c.is_zero]
    violations = []
    checked = 0
    tol = f.tolerances.cone
    for _ in range(pair_samples):
        i, j = rng.integers(0, len(usable), size=2)
        if i == j:
            continue
        (px, cx), (py, cy) = usable[i], usable[j]
        gap = py - px
        checked += 1
        if (cx.generators @ gap).max() > tol:
            products = cy.generators @ gap
            if products.min() < -tol:
                g = cx.generators[int(np.argmax(cx.generators @ gap))]
                h = cy.generators[int(np.argmin(products))]
                violations.append({"x": px.copy(), "y": py.copy(),
                                   "x_gen": g.copy(), "y_gen": h.copy(),
                                   "forward": float((g @ gap)),
                                   "backward": float((h @ gap))})
    return ProbeVerdict(passed=not violations, violations=violations,
                        checked=checked, kind="quasimonotonicity")


def stable_probe_points(atlas: Atlas, margin=1e-3, limit=None, mesh=None):
    """Grid points covered by exactly one chart with every chart boundary
    at least ``margin`` away; the base map is locally a single chart
    section there, the regime the deviation probe needs."""
    out = []
    grid = _region_grid(atlas.region, mesh if mesh else atlas.cover_step / 8.0)
    for p in grid:
        dists = np.array([np.linalg.norm(p - c.center) for c in atlas.charts])
        radii = np.array([c.radius for c in atlas.charts])
        inside = dists < radii
        if inside.sum() != 1:
            continue
        boundary_gap = np.abs(radii - dists).min()
        if boundary_gap >= margin:
            out.append(p)
            if limit and len(out) >= limit:
                break
    return np.array(out) if out else np.zeros((0, atlas.region.dim))
