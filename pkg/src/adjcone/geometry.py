"""Exact polyhedral geometry over R^n at desk scale (dim <= 4 for enumeration).

Everything here is built around two value types: :class:`Polytope`, a
bounded convex polyhedron carrying both an H-representation and, on
demand, a vertex list, and :class:`GeneratedCone`, a finitely generated
convex cone ``{sum t_k g_k : t_k >= 0}``.  All values are immutable after
construction and every operation is a pure function of its inputs, so
concurrent reads are safe.

Projections are solved as convex QPs by a primal active-set iteration
with a Dykstra fallback; linear subproblems go through the dense simplex
kernel in :mod:`adjcone.lp`.  Hull construction for point sets uses
scipy's convex hull after an affine-hull rank reduction, which keeps
lower-dimensional polytopes (segments, facets of cones) first class.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .lp import solve_lp

__all__ = [
    "ToleranceConfig",
    "DEFAULT_TOLERANCES",
    "GeometryError",
    "EmptyPolytopeError",
    "UnboundedPolytopeError",
    "ScaleBoundError",
    "ProjectionError",
    "ConeSectionError",
    "FaceDescriptor",
    "Polytope",
    "GeneratedCone",
    "weighted_minkowski",
    "in_class_D",
    "polar_extreme_rays",
    "normal_cone_at",
    "polytope_distance",
]

_ENUM_DIM_LIMIT = 4
_MINKOWSKI_LIMIT = 100_000
_MERGE_RADIUS = 1e-9


class GeometryError(RuntimeError):
    pass


class EmptyPolytopeError(GeometryError):
    """H-representation has no feasible point."""


class UnboundedPolytopeError(GeometryError):
    """H-representation is unbounded in some coordinate direction."""


class ScaleBoundError(GeometryError):
    """Operation exceeds the declared desk-scale enumeration bounds."""


class ProjectionError(GeometryError):
    """Projection iteration failed to converge."""


class ConeSectionError(GeometryError):
    """A generator does not point across the section hyperplane."""


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical slacks shared across the toolkit.

    feas: membership slack; gen: minimum generator norm; cone: cone
    equality slack; zero: nonzero-base margin.  Invariant: all positive
    and ``zero > cone``.
    """

    feas: float = 1e-9
    gen: float = 1e-9
    cone: float = 1e-6
    zero: float = 1e-3

    def __post_init__(self):
        for name in ("feas", "gen", "cone", "zero"):
            if getattr(self, name) <= 0:
                raise ValueError(f"tolerance {name} must be strictly positive")
        if self.zero <= self.cone:
            raise ValueError("zero margin must exceed the cone slack")


DEFAULT_TOLERANCES = ToleranceConfig()


def _as_point(x, dim):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != dim:
        raise ValueError(f"expected a point of dimension {dim}, got {x.size}")
    return x


def _dedupe_points(points, radius=_MERGE_RADIUS):
    kept = []
    for p in points:
        if all(np.linalg.norm(p - q) > radius for q in kept):
            kept.append(p)
    return np.array(kept) if kept else np.zeros((0, points.shape[1]))


@dataclass(frozen=True)
class FaceDescriptor:
    """A proper closed face, identified by its active halfspace indices."""

    active: tuple
    vertex_ids: tuple
    dim: int


class Polytope:
    """Nonempty bounded polyhedron ``{x : a_i . x <= b_i}``.

    Rows are normalized to unit normals on construction.  Construction
    checks feasibility by LP and boundedness in every +/- coordinate
    direction unless the caller vouches for them.
    """

    def __init__(self, a, b, vertices=None, *, tolerances=None,
                 check_feasible=True, check_bounded=True):
        tol = tolerances or DEFAULT_TOLERANCES
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if a.shape[0] != b.size:
            raise ValueError("halfspace matrix and offset vector disagree")
        if a.shape[0] == 0:
            raise ValueError("a polytope needs at least one halfspace")
        norms = np.linalg.norm(a, axis=1)
        keep = norms > 1e-14
        if not keep.all():
            if np.any(b[~keep] < -tol.feas):
                raise EmptyPolytopeError("zero row with negative offset")
            a, b, norms = a[keep], b[keep], norms[keep]
            if a.shape[0] == 0:
                raise UnboundedPolytopeError("no effective halfspaces")
        self._a = a / norms[:, None]
        self._b = b / norms
        self._a.setflags(write=False)
        self._b.setflags(write=False)
        self.dim = a.shape[1]
        self.tolerances = tol
        self._vertices = None
        self._cheb = None
        self._bbox = None
        self._reduced = None
        self._box_bounds = self._detect_box()

        if check_bounded:
            self._bbox = self._compute_bbox()  # raises if unbounded
        if check_feasible and self._box_bounds is None:
            probe = solve_lp(np.zeros(self.dim), a_ub=self._a, b_ub=self._b)
            if probe.status == "infeasible":
                raise EmptyPolytopeError("halfspace system is infeasible")
        if self._box_bounds is not None:
            lo, hi = self._box_bounds
            if np.any(hi < lo - tol.feas):
                raise EmptyPolytopeError("box bounds cross")

        if vertices is not None:
            verts = np.atleast_2d(np.asarray(vertices, dtype=float))
            if verts.shape[1] != self.dim:
                raise ValueError("cached vertices have the wrong dimension")
            slack = self._a @ verts.T - self._b[:, None]
            if slack.size and slack.max() > tol.feas:
                raise ValueError("a cached vertex violates the halfspaces")
            self._vertices = verts
            self._vertices.setflags(write=False)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_box(cls, lo, hi, tolerances=None):
        lo = np.asarray(lo, dtype=float).ravel()
        hi = np.asarray(hi, dtype=float).ravel()
        n = lo.size
        a = np.vstack([np.eye(n), -np.eye(n)])
        b = np.concatenate([hi, -lo])
        return cls(a, b, tolerances=tolerances)

    @classmethod
    def from_vertices(cls, points, tolerances=None):
        """Convex hull of a finite point set, degenerate sets included."""
        tol = tolerances or DEFAULT_TOLERANCES
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] == 0:
            raise EmptyPolytopeError("no points given")
        n = pts.shape[1]
        pts = _dedupe_points(pts)
        center = pts.mean(axis=0)
        spread = pts - center
        if pts.shape[0] == 1:
            rank = 0
            basis = np.zeros((0, n))
            complement = np.eye(n)
        else:
            _, sv, vt = np.linalg.svd(spread, full_matrices=True)
            cutoff = max(sv[0] * 1e-10, 1e-12) if sv.size else 1e-12
            rank = int(np.sum(sv > cutoff))
            basis = vt[:rank]
            complement = vt[rank:]

        rows = []
        offsets = []
        hull_pts = pts
        if rank == 1:
            coords = spread @ basis[0]
            rows += [basis[0], -basis[0]]
            offsets += [basis[0] @ center + coords.max(),
                        -(basis[0] @ center + coords.min())]
            hull_pts = np.array([center + coords.min() * basis[0],
                                 center + coords.max() * basis[0]])
        elif rank >= 2:
            local = spread @ basis.T
            try:
                hull = ConvexHull(local)
            except QhullError as exc:  # pragma: no cover - rank guard should prevent
                raise GeometryError(f"hull construction failed: {exc}") from exc
            for eq in hull.equations:
                normal = eq[:rank] @ basis
                rows.append(normal)
                offsets.append(-eq[rank] + normal @ center)
            hull_pts = pts[hull.vertices]
        for w in complement:
            rows += [w, -w]
            offsets += [w @ center, -(w @ center)]
        return cls(np.array(rows), np.array(offsets), vertices=hull_pts,
                   tolerances=tol, check_feasible=False, check_bounded=False)

    @classmethod
    def intersection(cls, first, second, *, tolerances=None, check_feasible=True):
        if first.dim != second.dim:
            raise ValueError("dimension mismatch in intersection")
        return cls(np.vstack([first._a, second._a]),
                   np.concatenate([first._b, second._b]),
                   tolerances=tolerances or first.tolerances,
                   check_feasible=check_feasible, check_bounded=False)

    def _detect_box(self):
        """Recognize pure axis-box systems; enables closed-form fast paths."""
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        for row, off in zip(self._a, self._b):
            nz = np.nonzero(np.abs(row) > 1e-12)[0]
            if nz.size != 1:
                return None
            j = nz[0]
            if abs(abs(row[j]) - 1.0) > 1e-12:
                return None
            if row[j] > 0:
                hi[j] = min(hi[j], off)
            else:
                lo[j] = max(lo[j], -off)
        if np.any(np.isinf(lo)) or np.any(np.isinf(hi)):
            raise UnboundedPolytopeError("box is unbounded in a coordinate")
        return lo, hi

    def _compute_bbox(self):
        if self._box_bounds is not None:
            return self._box_bounds
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        for j in range(self.dim):
            c = np.zeros(self.dim)
            c[j] = 1.0
            low = solve_lp(c, a_ub=self._a, b_ub=self._b)
            if low.status == "unbounded":
                raise UnboundedPolytopeError(f"unbounded below in coordinate {j}")
            if low.status == "infeasible":
                raise EmptyPolytopeError("halfspace system is infeasible")
            high = solve_lp(-c, a_ub=self._a, b_ub=self._b)
            if high.status == "unbounded":
                raise UnboundedPolytopeError(f"unbounded above in coordinate {j}")
            lo[j] = low.value
            hi[j] = -high.value
        return lo, hi

    # -- basic queries ---------------------------------------------------------

    @property
    def halfspaces(self):
        return self._a, self._b

    @property
    def num_halfspaces(self):
        return self._a.shape[0]

    def contains(self, x, tol=None):
        x = _as_point(x, self.dim)
        slack = tol if tol is not None else self.tolerances.feas
        return bool(np.all(self._a @ x <= self._b + slack))

    def contains_many(self, points, tol=None):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        slack = tol if tol is not None else self.tolerances.feas
        return np.all(pts @ self._a.T <= self._b + slack, axis=1)

    def bounding_box(self):
        if self._bbox is None:
            self._bbox = self._compute_bbox()
        lo, hi = self._bbox
        return lo.copy(), hi.copy()

    def diameter(self):
        verts = self.vertices()
        if len(verts) == 1:
            return 0.0
        diff = verts[:, None, :] - verts[None, :, :]
        return float(np.sqrt((diff ** 2).sum(-1)).max())

    def chebyshev_center(self):
        """Deepest point: maximizes the radius of an inscribed ball."""
        if self._cheb is None:
            a_ext = np.hstack([self._a, np.ones((self.num_halfspaces, 1))])
            c = np.zeros(self.dim + 1)
            c[-1] = -1.0
            bounds = [(None, None)] * self.dim + [(0.0, None)]
            sol = solve_lp(c, a_ub=a_ext, b_ub=self._b, bounds=bounds)
            if not sol.optimal:
                raise GeometryError("Chebyshev LP failed")
            self._cheb = (sol.x[:-1], float(sol.x[-1]))
        center, radius = self._cheb
        return center.copy(), radius

    def support(self, direction):
        """Max of ``direction . x`` over the polytope, with a maximizer."""
        d = _as_point(direction, self.dim)
        if self._box_bounds is not None:
            lo, hi = self._box_bounds
            point = np.where(d >= 0, hi, lo)
            return float(d @ point), point
        sol = solve_lp(-d, a_ub=self._a, b_ub=self._b)
        if not sol.optimal:
            raise GeometryError("support LP failed")
        return float(-sol.value), sol.x

    # -- projection ------------------------------------------------------------

    def project(self, x):
        """Euclidean projection; returns ``(point, distance)``."""
        x = _as_point(x, self.dim)
        if self._box_bounds is not None:
            lo, hi = self._box_bounds
            p = np.clip(x, lo, hi)
            return p, float(np.linalg.norm(x - p))
        if self.contains(x):
            return x.copy(), 0.0
        p = self._project_active_set(x)
        if p is None:
            p = self._project_dykstra(x)
        return p, float(np.linalg.norm(x - p))

    def project_many(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self._box_bounds is not None:
            lo, hi = self._box_bounds
            proj = np.clip(pts, lo, hi)
            return proj, np.linalg.norm(pts - proj, axis=1)
        proj = np.empty_like(pts)
        dist = np.empty(pts.shape[0])
        for i, x in enumerate(pts):
            proj[i], dist[i] = self.project(x)
        return proj, dist

    def distance(self, x):
        return self.project(x)[1]

    def enlarged_contains(self, radius, x):
        """Membership in the ``radius``-neighbourhood of the polytope."""
        if radius < 0:
            raise ValueError("enlargement radius must be nonnegative")
        return self.distance(x) <= radius + self.tolerances.feas

    def _project_active_set(self, x, max_pivots=None):
        a, b = self._a, self._b
        m = self.num_halfspaces
        cap = max_pivots or max(10 * m, 50)
        y, _ = self.chebyshev_center()
        working: list[int] = []
        lam = np.zeros(0)
        for _ in range(cap):
            if working:
                aw = a[working]
                gram = aw @ aw.T
                rhs = aw @ x - b[working]
                lam = np.linalg.lstsq(gram, rhs, rcond=None)[0]
                target = x - aw.T @ lam
            else:
                lam = np.zeros(0)
                target = x
            step = target - y
            if np.linalg.norm(step) <= 1e-12:
                if lam.size == 0 or np.all(lam >= -1e-10):
                    if self.contains(target, 10 * self.tolerances.feas):
                        return target
                    return None
                drop = min(working[k] for k in range(len(working))
                           if lam[k] < -1e-10)
                working.remove(drop)
                continue
            a_dot_y = a @ y
            a_dot_step = a @ step
            alpha = 1.0
            hit = -1
            for i in range(m):
                if i in working or a_dot_step[i] <= 1e-13:
                    continue
                t = (b[i] - a_dot_y[i]) / a_dot_step[i]
                if t < alpha - 1e-13 or (hit >= 0 and abs(t - alpha) <= 1e-13 and i < hit):
                    alpha = max(t, 0.0)
                    hit = i
            y = y + alpha * step
            if hit >= 0 and alpha < 1.0 - 1e-13:
                working.append(hit)
        return None

    def _project_dykstra(self, x, max_sweeps=5000):
        a, b = self._a, self._b
        m = self.num_halfspaces
        y = x.copy()
        corr = np.zeros((m, self.dim))
        for _ in range(max_sweeps):
            shift = 0.0
            for i in range(m):
                z = y + corr[i]
                viol = a[i] @ z - b[i]
                y_new = z - max(viol, 0.0) * a[i]
                corr[i] = z - y_new
                shift = max(shift, float(np.linalg.norm(y_new - y)))
                y = y_new
            if shift <= 1e-13 and self.contains(y, self.tolerances.feas):
                return y
        if self.contains(y, 10 * self.tolerances.feas):
            return y
        raise ProjectionError("projection did not converge (ill-conditioned input)")

    # -- enumeration -----------------------------------------------------------

    def vertices(self):
        """Irredundant vertex list via combinatorial basis enumeration."""
        if self._vertices is not None:
            return self._vertices
        if self.dim > _ENUM_DIM_LIMIT:
            raise ScaleBoundError(
                f"vertex enumeration limited to dim <= {_ENUM_DIM_LIMIT}")
        if self._box_bounds is not None:
            lo, hi = self._box_bounds
            corners = np.array(list(itertools.product(*zip(lo, hi))))
            verts = _dedupe_points(corners)
        else:
            a, b = self._a, self._b
            m = self.num_halfspaces
            tol = self.tolerances.feas
            found = []
            for idx in itertools.combinations(range(m), self.dim):
                sub = a[list(idx)]
                if abs(np.linalg.det(sub)) < 1e-10:
                    continue
                v = np.linalg.solve(sub, b[list(idx)])
                if np.all(a @ v <= b + tol):
                    found.append(v)
            if not found:
                raise GeometryError("vertex enumeration found nothing")
            verts = _dedupe_points(np.array(found))
        verts.setflags(write=False)
        self._vertices = verts
        return verts

    def sample(self, rng, count):
        """Random points as Dirichlet-weighted vertex mixtures."""
        verts = self.vertices()
        weights = rng.dirichlet(np.ones(len(verts)), size=count)
        return weights @ verts

    def reduced(self):
        """Irredundant facet rows plus implicit equality rows.

        Returns ``(facet_idx, equality_idx)`` as indices into the stored
        (normalized) halfspace rows.  Duplicated parallel rows keep only
        the tightest copy; a row that is active on the whole polytope is
        classified as an implicit equality (affine-hull pre-step for
        degenerate polytopes).
        """
        if self._reduced is not None:
            return self._reduced
        a, b = self._a, self._b
        m = self.num_halfspaces
        tol = self.tolerances.feas

        # Parallel duplicates: keep the smallest offset per direction.
        alive = []
        for i in range(m):
            dominated = False
            for j in range(m):
                if i == j:
                    continue
                if np.linalg.norm(a[i] - a[j]) <= 1e-9:
                    if b[j] < b[i] - 1e-12 or (abs(b[j] - b[i]) <= 1e-12 and j < i):
                        dominated = True
                        break
            if not dominated:
                alive.append(i)

        equalities = []
        candidates = []
        for i in alive:
            low = solve_lp(a[i], a_ub=a, b_ub=b)
            if low.optimal and low.value >= b[i] - max(tol, 1e-9):
                equalities.append(i)
            else:
                candidates.append(i)

        facets = list(candidates)
        for i in list(candidates):
            others = [j for j in facets if j != i] + equalities
            relax_a = np.vstack([a[others], a[i][None, :]])
            relax_b = np.concatenate([b[others], [b[i] + 1.0]])
            hi = solve_lp(-a[i], a_ub=relax_a, b_ub=relax_b)
            if hi.optimal and -hi.value <= b[i] + max(tol, 1e-9):
                facets.remove(i)
        self._reduced = (tuple(facets), tuple(equalities))
        return self._reduced

    def proper_faces(self):
        """All proper closed faces as active halfspace index sets.

        Faces are generated as the closure under intersection of the
        facet vertex sets, which yields facets, ridges, down to vertices;
        the improper face (the polytope itself) is excluded.
        """
        facet_idx, equality_idx = self.reduced()
        verts = self.vertices()
        a, b = self._a, self._b
        tol = max(self.tolerances.feas, 1e-9)
        all_ids = frozenset(range(len(verts)))

        facet_sets = []
        for i in facet_idx:
            on = frozenset(int(k) for k in
                           np.nonzero(a[i] @ verts.T >= b[i] - tol)[0])
            if on and on != all_ids:
                facet_sets.append(on)

        closure = set(facet_sets)
        frontier = set(facet_sets)
        while frontier:
            fresh = set()
            for face in frontier:
                for base in facet_sets:
                    meet = face & base
                    if meet and meet != all_ids and meet not in closure:
                        fresh.add(meet)
            closure |= fresh
            frontier = fresh

        faces = []
        for vset in closure:
            pts = verts[sorted(vset)]
            active = tuple(int(i) for i in range(self.num_halfspaces)
                           if np.all(a[i] @ pts.T >= b[i] - tol))
            rank = 0
            if len(pts) > 1:
                rank = int(np.linalg.matrix_rank(pts - pts[0], tol=1e-9))
            faces.append(FaceDescriptor(active=active,
                                        vertex_ids=tuple(sorted(vset)),
                                        dim=rank))
        faces.sort(key=lambda f: (-len(f.vertex_ids), f.vertex_ids))
        return faces

    def is_inside_point(self, x):
        """Membership in the relative interior (no proper face contains x)."""
        x = _as_point(x, self.dim)
        tol = self.tolerances.feas
        if not self.contains(x, tol):
            return False
        facet_idx, equality_idx = self.reduced()
        a, b = self._a, self._b
        for i in equality_idx:
            if abs(a[i] @ x - b[i]) > tol:
                return False
        for i in facet_idx:
            if a[i] @ x > b[i] - tol:
                return False
        return True

    def same_set(self, other, tol=1e-7):
        """Set equality via mutual vertex membership."""
        return (bool(other.contains_many(self.vertices(), tol).all())
                and bool(self.contains_many(other.vertices(), tol).all()))

    def __repr__(self):
        return f"Polytope(dim={self.dim}, halfspaces={self.num_halfspaces})"


class GeneratedCone:
    """Finitely generated closed convex cone ``{sum t_k g_k : t_k >= 0}``.

    Membership is decided with ``t >= 0``, i.e. the closed variant of the
    cone definition; an empty generator list is the zero cone.
    """

    def __init__(self, generators, dim=None, *, tolerances=None):
        tol = tolerances or DEFAULT_TOLERANCES
        gens = np.atleast_2d(np.asarray(generators, dtype=float))
        if gens.size == 0:
            if dim is None:
                raise ValueError("zero cone needs an explicit dimension")
            gens = np.zeros((0, dim))
        if dim is not None and gens.shape[1] != dim:
            raise ValueError("generator dimension mismatch")
        norms = np.linalg.norm(gens, axis=1)
        if gens.shape[0] and norms.min() < tol.gen:
            raise ValueError("generator below the minimum norm tolerance")
        self.generators = gens
        self.generators.setflags(write=False)
        self.dim = gens.shape[1]
        self.tolerances = tol

    @classmethod
    def from_rays(cls, rays, dim=None, tolerances=None):
        """Unit-normalize, drop near-zero rays, merge duplicates."""
        tol = tolerances or DEFAULT_TOLERANCES
        rays = np.atleast_2d(np.asarray(rays, dtype=float))
        if rays.size == 0:
            return cls(np.zeros((0, dim)), dim=dim, tolerances=tol)
        kept = []
        for g in rays:
            nrm = np.linalg.norm(g)
            if nrm < tol.gen:
                continue
            u = g / nrm
            if all(np.linalg.norm(u - h) > _MERGE_RADIUS for h in kept):
                kept.append(u)
        dim = dim if dim is not None else rays.shape[1]
        return cls(np.array(kept) if kept else np.zeros((0, dim)),
                   dim=dim, tolerances=tol)

    @property
    def is_zero(self):
        return self.generators.shape[0] == 0

    def contains(self, v, tol=None):
        """Nonnegative-combination membership, decided by a small LP."""
        v = _as_point(v, self.dim)
        slack = tol if tol is not None else self.tolerances.cone
        vnorm = np.linalg.norm(v)
        if vnorm <= slack:
            return True
        if self.is_zero:
            return False
        k = self.generators.shape[0]
        n = self.dim
        # variables: t (k), s (1); minimize s with |G^T t - v| <= s
        gt = self.generators.T
        a_ub = np.zeros((2 * n, k + 1))
        a_ub[:n, :k] = gt
        a_ub[n:, :k] = -gt
        a_ub[:, k] = -1.0
        b_ub = np.concatenate([v, -v])
        c = np.zeros(k + 1)
        c[k] = 1.0
        bounds = [(0.0, None)] * (k + 1)
        sol = solve_lp(c, a_ub=a_ub, b_ub=b_ub, bounds=bounds)
        if not sol.optimal:
            raise GeometryError("cone membership LP failed")
        return sol.value <= slack * max(1.0, vnorm)

    def section(self, direction, offset):
        """Slice by the hyperplane ``{v : v . direction = offset}``.

        Every generator must satisfy ``g . direction > 0``; the section is
        the polytope with vertices ``offset * g / (g . direction)``.
        """
        direction = _as_point(direction, self.dim)
        if offset <= 0:
            raise ValueError("section offset must be positive")
        if self.is_zero:
            raise ConeSectionError("the zero cone has no section")
        dots = self.generators @ direction
        if np.any(dots <= 1e-12):
            bad = int(np.argmin(dots))
            raise ConeSectionError(
                f"generator {bad} does not point across the hyperplane "
                f"(dot={dots[bad]:.3e})")
        pts = offset * self.generators / dots[:, None]
        return Polytope.from_vertices(pts, tolerances=self.tolerances)

    def minimal(self):
        """Prune generators expressible by the remaining ones."""
        if self.generators.shape[0] <= 1:
            return self
        kept = list(range(self.generators.shape[0]))
        i = 0
        while i < len(kept):
            others = [k for k in kept if k != kept[i]]
            if others:
                sub = GeneratedCone(self.generators[others], dim=self.dim,
                                    tolerances=self.tolerances)
                if sub.contains(self.generators[kept[i]], tol=1e-9):
                    kept.pop(i)
                    continue
            i += 1
        return GeneratedCone(self.generators[kept], dim=self.dim,
                             tolerances=self.tolerances)

    def equals(self, other, tol=None):
        """Mutual containment of generator sets."""
        slack = tol if tol is not None else self.tolerances.cone
        mine = all(other.contains(g, slack) for g in self.generators)
        theirs = all(self.contains(g, slack) for g in other.generators)
        return mine and theirs

    def __repr__(self):
        return f"GeneratedCone(dim={self.dim}, rays={self.generators.shape[0]})"


def weighted_minkowski(terms, tolerances=None):
    """Weighted Minkowski sum ``{sum w_i q_i : q_i in Q_i}``.

    Weights must be nonnegative and sum to one within 1e-12.  Computed as
    the hull of all sums of per-term vertex selections; the product of
    vertex counts is capped at the desk-scale bound.
    """
    terms = list(terms)
    if not terms:
        raise ValueError("empty Minkowski combination")
    weights = np.array([w for w, _ in terms], dtype=float)
    if np.any(weights < 0):
        raise ValueError("Minkowski weights must be nonnegative")
    if abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights sum to {weights.sum()!r}, expected 1")
    dims = {q.dim for _, q in terms}
    if len(dims) != 1:
        raise ValueError("Minkowski terms must share a dimension")
    total = 1
    for _, q in terms:
        total *= len(q.vertices())
        if total > _MINKOWSKI_LIMIT:
            raise ScaleBoundError("vertex-product bound exceeded")
    dim = dims.pop()
    sums = np.zeros((1, dim))
    for w, q in terms:
        verts = w * q.vertices()
        sums = (sums[:, None, :] + verts[None, :, :]).reshape(-1, dim)
    return Polytope.from_vertices(sums, tolerances=tolerances)


def in_class_D(polytope):
    """Whether the set belongs to the convexity class used by the existence
    theory.  Polytopes are closed and convex, hence always members; the
    operation exists so instance validation can record the hypothesis
    explicitly."""
    return isinstance(polytope, Polytope)


def polar_extreme_rays(directions, dim=None, tol=1e-9):
    """Unit extreme rays of the pointed cone ``{g : d_k . g <= 0 for all k}``.

    ``directions`` are the rows ``d_k``.  Extreme rays of a pointed
    polyhedral cone lie on ``dim - 1`` independent active constraints, so
    they are enumerated from the null spaces of row subsets.  Raises when
    the rows do not span (the cone then contains a line and has no ray
    description).
    """
    m_rows = np.atleast_2d(np.asarray(directions, dtype=float))
    n = dim if dim is not None else m_rows.shape[1]
    if m_rows.shape[0] == 0:
        raise GeometryError("no directions given; polar is the whole space")
    if np.linalg.matrix_rank(m_rows, tol=1e-9) < n:
        raise GeometryError(
            "directions do not span the space; the polar cone contains a line")
    rays = []

    def consider(d):
        nrm = np.linalg.norm(d)
        if nrm < 1e-12:
            return
        u = d / nrm
        if np.all(m_rows @ u <= tol):
            if all(np.linalg.norm(u - r) > _MERGE_RADIUS for r in rays):
                rays.append(u)

    if n == 1:
        consider(np.array([1.0]))
        consider(np.array([-1.0]))
    else:
        for idx in itertools.combinations(range(m_rows.shape[0]), n - 1):
            sub = m_rows[list(idx)]
            _, sv, vt = np.linalg.svd(sub)
            if np.sum(sv > max(sv[0] * 1e-10, 1e-12)) != n - 1:
                continue
            d = vt[-1]
            consider(d)
            consider(-d)
    return np.array(rays) if rays else np.zeros((0, n))


def normal_cone_at(polytope, x, tolerances=None):
    """Normal cone of a polytope at a boundary (or interior) point.

    Generators are the active irredundant facet normals; implicit
    equality rows contribute both signs.  Interior points give the zero
    cone.
    """
    tol = tolerances or polytope.tolerances
    x = _as_point(x, polytope.dim)
    a, b = polytope.halfspaces
    facet_idx, equality_idx = polytope.reduced()
    gens = []
    for i in facet_idx:
        if a[i] @ x >= b[i] - max(tol.feas, 1e-9):
            gens.append(a[i])
    for i in equality_idx:
        gens.append(a[i])
        gens.append(-a[i])
    return GeneratedCone.from_rays(np.array(gens) if gens else np.zeros((0, polytope.dim)),
                                   dim=polytope.dim, tolerances=tol)


def polytope_distance(first, second, max_rounds=2000):
    """Distance between two polytopes by alternating projections."""
    x = first.chebyshev_center()[0]
    prev = np.inf
    for _ in range(max_rounds):
        y, _ = second.project(x)
        x_new, _ = first.project(y)
        gap = float(np.linalg.norm(x_new - y))
        if abs(prev - gap) <= 1e-12:
            return gap
        prev = gap
        x = x_new
    return prev
