"""Derivative-free minimization over the reduced feasible region.

Multistart Nelder-Mead with a quadratic penalty for infeasible trial
points. The surrogate objective is cheap, so a modest multistart budget
covers the small reduced space well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleRegion
from .manifold import FeasiblePolygon, ReducedSpace, sample_reduced

_DIAMETER_TOL = 1e-6
_SPREAD_TOL = 1e-10


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def distance_to_polygon(point, polygon: FeasiblePolygon) -> float:
    """Euclidean distance to the polygon; zero inside or on the boundary."""
    p = np.asarray(point, dtype=float).reshape(2)
    if polygon.contains(p):
        return 0.0
    v = polygon.vertices
    return min(
        _segment_distance(p, v[i], v[(i + 1) % len(v)]) for i in range(len(v))
    )


def _infeasibility_sq(space: ReducedSpace, x: np.ndarray) -> float:
    # Squared distance to the feasible set: box violation of the free
    # coordinates plus polygon violation of the constrained pair.
    box = space.bounding_box
    below = np.maximum(box[:, 0] - x, 0.0)
    above = np.maximum(x - box[:, 1], 0.0)
    total = float((below**2).sum() + (above**2).sum())
    if space.polygon is not None:
        pair = space.pair_point(x)
        total += distance_to_polygon(pair, space.polygon) ** 2
    return total


@dataclass(frozen=True)
class OptProblem:
    """Objective over reduced coordinates, constrained to the feasible region."""

    objective: callable
    space: ReducedSpace
    budget: int = 200
    starts: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError("need at least one start")
        if self.budget < self.space.dim + 2:
            raise ValueError("budget must allow at least one simplex per start")


@dataclass(frozen=True)
class OptResult:
    """Best feasible point found, with per-start evaluation traces."""

    best_mu: np.ndarray
    best_value: float
    evaluations: int
    traces: tuple


def _nelder_mead(f, x0: np.ndarray, steps: np.ndarray, budget: int):
    """Classic simplex descent; returns every evaluated (point, value)."""
    dim = x0.size
    trace: list[tuple[np.ndarray, float]] = []

    def call(x):
        value = f(x)
        trace.append((x.copy(), value))
        return value

    simplex = [x0.copy()]
    for i in range(dim):
        vertex = x0.copy()
        vertex[i] += steps[i]
        simplex.append(vertex)
    values = [call(x) for x in simplex]

    while len(trace) < budget:
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        best, worst = simplex[0], simplex[-1]
        diameter = max(float(np.linalg.norm(x - best)) for x in simplex[1:])
        if diameter < _DIAMETER_TOL or values[-1] - values[0] < _SPREAD_TOL:
            break
        centroid = np.mean(simplex[:-1], axis=0)
        reflected = centroid + (centroid - worst)
        fr = call(reflected)
        if fr < values[0]:
            expanded = centroid + 2.0 * (centroid - worst)
            fe = call(expanded)
            if fe < fr:
                simplex[-1], values[-1] = expanded, fe
            else:
                simplex[-1], values[-1] = reflected, fr
        elif fr < values[-2]:
            simplex[-1], values[-1] = reflected, fr
        else:
            if fr < values[-1]:
                contracted = centroid + 0.5 * (reflected - centroid)
            else:
                contracted = centroid - 0.5 * (centroid - worst)
            fc = call(contracted)
            if fc < min(fr, values[-1]):
                simplex[-1], values[-1] = contracted, fc
            else:  # shrink toward the best vertex
                for i in range(1, len(simplex)):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    values[i] = call(simplex[i])
                    if len(trace) >= budget:
                        break
    return trace


def minimize(problem: OptProblem) -> OptResult:
    """Run all starts and return the best feasible point seen anywhere.

    Start points are drawn from the feasible region with the problem
    seed, so results are reproducible. Trial points outside the region
    are evaluated with a quadratic penalty added (the objective must
    tolerate mild excursions; surrogates do). The reported best value is
    the raw objective, minimized over feasible evaluations only.
    """
    space = problem.space
    starts = sample_reduced(space, problem.starts, problem.seed)
    start_values = [float(problem.objective(x)) for x in starts]
    scale = max(max(abs(v) for v in start_values), 1e-8)
    weight = 1e3 * scale

    box = space.bounding_box
    widths = box[:, 1] - box[:, 0]
    steps = np.where(widths > 0.0, 0.05 * widths, 1e-3)

    best_mu: np.ndarray | None = None
    best_value = np.inf
    traces = []
    evaluations = len(start_values)
    for x, f0 in zip(starts, start_values):
        if f0 < best_value:
            best_mu, best_value = x.copy(), f0

    def penalized(x):
        value = float(problem.objective(x))
        return value, value + weight * _infeasibility_sq(space, x)

    for x0 in starts:
        raw_trace = []

        def wrapped(x):
            raw, pen = penalized(x)
            raw_trace.append((x.copy(), raw))
            return pen

        _nelder_mead(wrapped, np.asarray(x0, dtype=float), steps, problem.budget)
        evaluations += len(raw_trace)
        traces.append(tuple(raw_trace))
        for x, raw in raw_trace:
            if raw < best_value and space.contains(x):
                best_mu, best_value = x.copy(), raw

    if best_mu is None:
        raise InfeasibleRegion("no feasible point was evaluated")
    return OptResult(
        best_mu=best_mu,
        best_value=best_value,
        evaluations=evaluations,
        traces=tuple(traces),
    )
