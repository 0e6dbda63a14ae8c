"""Quasioptimization via the normal-operator reduction.

A quasioptimization problem asks for a point minimizing ``f`` over its
own constraint set ``K(x)``.  The reduction builds the operator

    T(x) = dual unit box                     on the argmin set of f,
    T(x) = global base of the normal cone    elsewhere,

and solves the associated generalized quasivariational inequality.  Any
accepted point is post-verified against a dense grid of its own
constraint set; a brute-force enumerator over the fixed-point set is
provided as the independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DEFAULT_TOLERANCES, Polytope
from .gqvi import (
    GqviInstance,
    SolveReport,
    SolverConfig,
    _grid_points,
    fixed_point_set,
    solve as gqvi_solve,
)
from .normal_op import Atlas, global_base
from .quasiconvex import StepLevelFunction

__all__ = [
    "VerificationError",
    "TFromNormal",
    "build_T",
    "QuasioptInstance",
    "QuasioptReport",
    "solve_quasiopt",
    "brute_force_quasiopt",
]


class VerificationError(RuntimeError):
    """The candidate fails the independent grid verification."""


class TFromNormal:
    """Operator for the reduction: dual box on the argmin set, glued
    normal-cone base elsewhere.

    The dual unit box stands in for the dual ball; only its symmetry
    around the origin matters, since argmin points are accepted with
    residual zero regardless.  Off the argmin set, evaluation raises a
    coverage error wherever the atlas has a hole.
    """

    def __init__(self, f: StepLevelFunction, atlas: Atlas, verify_samples=200):
        self.f = f
        self.atlas = atlas
        self.dim = f.dim
        self.verify_samples = verify_samples
        self._dual_box = Polytope.from_box(-np.ones(f.dim), np.ones(f.dim))

    def value(self, x) -> Polytope:
        if self.f.in_argmin(x):
            return self._dual_box
        return global_base(self.atlas, self.f, x,
                           verify_samples=self.verify_samples).base


def build_T(f: StepLevelFunction, atlas: Atlas, verify_samples=200) -> TFromNormal:
    return TFromNormal(f, atlas, verify_samples=verify_samples)


@dataclass
class QuasioptInstance:
    f: StepLevelFunction
    constraint_map: object  # MovingPolytope
    atlas: Atlas
    config: SolverConfig = field(default_factory=SolverConfig)
    tol_opt: float = 1e-6
    tolerances: object = field(default_factory=lambda: DEFAULT_TOLERANCES)
    grid_divisions: int = 200

    def validate(self):
        fixed_point_set(self.constraint_map)  # raises when empty
        lo, hi = self.constraint_map.box.bounding_box()
        corners = Polytope.from_box(lo, hi).vertices()
        for c in corners:
            if math.isinf(self.f.evaluate(c)):
                raise ValueError("constraint box leaves the domain of f")


@dataclass
class QuasioptReport:
    x: np.ndarray | None
    f_value: float | None
    gqvi: SolveReport
    verified: bool
    grid_min: float | None
    in_argmin: bool
    message: str = ""

    def to_dict(self, include_timing=False):
        return {
            "x": None if self.x is None else np.asarray(self.x).tolist(),
            "f_value": self.f_value,
            "verified": self.verified,
            "grid_min": self.grid_min,
            "in_argmin": self.in_argmin,
            "message": self.message,
            "gqvi": self.gqvi.to_dict(include_timing=include_timing),
        }


def _constraint_grid(instance, x):
    feasible = instance.constraint_map.value(x)
    mesh = max(feasible.diameter() / instance.grid_divisions, 1e-9)
    return _grid_points(feasible, mesh)


def solve_quasiopt(instance: QuasioptInstance) -> QuasioptReport:
    """Solve the reduction and verify the result against a grid oracle.

    A ``residual_floor`` outcome is reported without any quasiopt claim.
    A ``solved`` point must beat the grid minimum of f over its own
    constraint set within ``tol_opt``; anything else raises, it is never
    silently accepted.
    """
    instance.validate()
    operator = build_T(instance.f, instance.atlas)
    gqvi_instance = GqviInstance(instance.constraint_map, operator,
                                 config=instance.config,
                                 tolerances=instance.tolerances)
    report = gqvi_solve(gqvi_instance)
    if report.status != "solved":
        return QuasioptReport(x=report.x, f_value=None, gqvi=report,
                              verified=False, grid_min=None, in_argmin=False,
                              message="solver returned no verified solution")
    x = report.x
    f_value = instance.f.evaluate(x)
    grid = _constraint_grid(instance, x)
    values = np.array([instance.f.evaluate(p) for p in grid])
    grid_min = float(values.min()) if len(values) else math.inf
    if f_value > grid_min + instance.tol_opt:
        raise VerificationError(
            f"f(x) = {f_value} exceeds the grid minimum {grid_min} "
            f"over K(x); the atlas or solver is inadequate")
    return QuasioptReport(x=x, f_value=float(f_value), gqvi=report,
                          verified=True, grid_min=grid_min,
                          in_argmin=instance.f.in_argmin(x))


def brute_force_quasiopt(instance: QuasioptInstance, mesh):
    """All grid points of fix K that minimize f over their own constraint
    set at grid resolution.  Independent of the solver path."""
    fix = fixed_point_set(instance.constraint_map)
    lo, hi = instance.constraint_map.box.bounding_box()
    box_grid = _grid_points(Polytope.from_box(lo, hi), mesh)
    f_on_grid = np.array([instance.f.evaluate(p) for p in box_grid])
    solutions = []
    for x in _grid_points(fix, mesh):
        if not instance.constraint_map.contains(x, x):
            continue
        fx = instance.f.evaluate(x)
        if math.isinf(fx):
            continue
        a, b, d = (instance.constraint_map.a, instance.constraint_map.b,
                   instance.constraint_map.d)
        mask = np.all(box_grid @ a.T <= b + d @ x + instance.tolerances.feas,
                      axis=1)
        if mask.any() and fx > f_on_grid[mask].min() + instance.tol_opt:
            continue
        solutions.append(x)
    return np.array(solutions) if solutions else np.zeros((0, instance.f.dim))
