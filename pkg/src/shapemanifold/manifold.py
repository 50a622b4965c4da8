"""Reduced geometric parameter space built from deformation snapshots.

Workflow: sample the design-parameter box, build the family of deformed
geometries, extract an orthonormal basis of the displacement fields, and
keep the modal coefficients as new shape parameters. Linear dependencies
between coefficients are detected and folded away; the remaining free
coefficients, restricted to a convex feasible polygon fitted around the
training cloud, form the reduced space that downstream sampling and
optimization operate on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import pod
from .errors import (
    CollinearPoints,
    DegenerateAbscissa,
    DegenerateTrainingSet,
    InfeasibleRegion,
    OutOfRegion,
)
from .ffd import FfdConfig, MeshMorpher, apply_params
from .mesh import TriMesh, flatten, unflatten


def sample_ffd_params(n: int, box, seed: int) -> np.ndarray:
    """Uniform independent draws from a box, reproducible from the seed.

    ``box`` is a (p, 2) array of per-component (low, high) bounds.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    rng = np.random.default_rng(seed)
    return rng.uniform(box[:, 0], box[:, 1], size=(n, box.shape[0]))


def build_geometry_pod(
    reference: TriMesh,
    config: FfdConfig,
    params: np.ndarray,
    rule: pod.TruncationRule | None = None,
):
    """Deformation family -> orthonormal displacement basis + coefficients.

    Every parameter row morphs the reference mesh; the flattened
    coordinates are centered on the reference (so zero coefficients mean
    the undeformed geometry) and decomposed. Returns the (optionally
    truncated) basis and the per-sample coefficient matrix, one row per
    training geometry.
    """
    params = np.asarray(params, dtype=float)
    if params.ndim != 2 or params.shape[0] < 2:
        raise ValueError("need a 2-D parameter matrix with at least 2 rows")
    ref_flat = flatten(reference)
    morpher = MeshMorpher(reference.vertices, config.origin, config.axes, config.dims)
    centered = np.empty((ref_flat.size, params.shape[0]))
    for i, mu in enumerate(params):
        lattice = apply_params(config, mu)
        centered[:, i] = morpher.displacement(lattice.displacements).reshape(-1)
    basis = pod.compute_pod(centered, center=ref_flat)
    if basis.rank == 0:
        raise DegenerateTrainingSet(
            "deformation family has no variation; check the parameter map"
        )
    if rule is not None:
        basis = pod.truncate(basis, rule)
    alpha = (basis.modes.T @ centered).T
    return basis, alpha


@dataclass(frozen=True)
class TrainingSet:
    """Sampled design parameters with their modal coefficients and basis."""

    mu_ffd: np.ndarray
    alpha: np.ndarray
    basis: pod.PodBasis

    def __post_init__(self):
        mu = np.asarray(self.mu_ffd, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        if mu.shape[0] != alpha.shape[0]:
            raise ValueError("parameter and coefficient row counts differ")
        if alpha.shape[1] < 1:
            raise ValueError("need at least one coefficient column")
        object.__setattr__(self, "mu_ffd", mu)
        object.__setattr__(self, "alpha", alpha)


def linear_fit(x, y):
    """Ordinary least squares line through (x, y): (slope, intercept, r2).

    A constant ordinate is a perfect fit by convention: slope 0, r2 = 1.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != y.size or x.size < 2:
        raise ValueError("need two sequences of equal length >= 2")
    xm = x.mean()
    ym = y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx <= 0.0:
        raise DegenerateAbscissa("abscissa has zero variance")
    ss_tot = float(((y - ym) ** 2).sum())
    if ss_tot <= 0.0:
        return 0.0, ym, 1.0
    slope = float(((x - xm) * (y - ym)).sum()) / sxx
    intercept = ym - slope * xm
    ss_res = float(((y - slope * x - intercept) ** 2).sum())
    return slope, intercept, 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class Dependency:
    """Affine relation of one coefficient to a free one."""

    source: int
    slope: float
    intercept: float
    r2: float


@dataclass(frozen=True)
class DependencyModel:
    """Per-coefficient status: free (None) or dependent on a free one."""

    status: tuple

    def __post_init__(self):
        status = tuple(self.status)
        free = {i for i, s in enumerate(status) if s is None}
        for i, s in enumerate(status):
            if s is not None and s.source not in free:
                raise ValueError(
                    f"coefficient {i} depends on {s.source}, which is not free"
                )
        object.__setattr__(self, "status", status)

    @property
    def free_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.status) if s is None)

    def expand(self, free_values) -> np.ndarray:
        """Full coefficient vector from the free coordinates."""
        free_values = np.asarray(free_values, dtype=float).reshape(-1)
        free = self.free_indices
        if free_values.size != len(free):
            raise ValueError(
                f"expected {len(free)} free values, got {free_values.size}"
            )
        full = np.zeros(len(self.status))
        pos = {idx: k for k, idx in enumerate(free)}
        for i, s in enumerate(self.status):
            if s is None:
                full[i] = free_values[pos[i]]
            else:
                full[i] = s.slope * free_values[pos[s.source]] + s.intercept
        return full


def detect_dependencies(alpha: np.ndarray, r2_threshold: float) -> DependencyModel:
    """Greedy scan for affine relations between coefficient columns.

    Columns are visited in mode order. A column becomes dependent on the
    already-free column that fits it best, provided that fit reaches the
    r2 threshold; ties prefer the smallest source index. With fewer than
    three samples the statistics are meaningless, so everything stays
    free (with a warning).
    """
    alpha = np.asarray(alpha, dtype=float)
    if not 0.0 < r2_threshold <= 1.0:
        raise ValueError("r2 threshold must be in (0, 1]")
    n_coeff = alpha.shape[1]
    if alpha.shape[0] < 3:
        warnings.warn(
            "fewer than 3 samples: dependency detection skipped", stacklevel=2
        )
        return DependencyModel((None,) * n_coeff)
    status: list = []
    free: list[int] = []
    for j in range(n_coeff):
        best = None
        for i in free:
            try:
                slope, intercept, r2 = linear_fit(alpha[:, i], alpha[:, j])
            except DegenerateAbscissa:
                continue
            if r2 >= r2_threshold and (best is None or r2 > best.r2):
                best = Dependency(i, slope, intercept, r2)
        status.append(best)
        if best is None:
            free.append(j)
    return DependencyModel(tuple(status))


# ---------------------------------------------------------------------------
# Convex feasible region in one coefficient plane.


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Strict convex hull, counter-clockwise (monotone chain)."""
    pts = np.unique(points, axis=0)  # sorts lexicographically
    if pts.shape[0] < 3:
        raise CollinearPoints("need at least 3 distinct points")

    def build(seq):
        chain = []
        for p in seq:
            while len(chain) >= 2 and _cross2(
                chain[-1] - chain[-2], p - chain[-2]
            ) <= 0.0:
                chain.pop()
            chain.append(p)
        return chain

    lower = build(pts)
    upper = build(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise CollinearPoints("points are collinear")
    return np.array(hull)


def point_in_polygon(point, vertices: np.ndarray, rtol: float = 1e-9) -> bool:
    """Boundary-inclusive test against a convex counter-clockwise polygon."""
    p = np.asarray(point, dtype=float).reshape(2)
    v = np.asarray(vertices, dtype=float)
    tol = rtol * max(1.0, float(np.abs(v).max()))
    nxt = np.roll(v, -1, axis=0)
    cross = (nxt[:, 0] - v[:, 0]) * (p[1] - v[:, 1]) - (nxt[:, 1] - v[:, 1]) * (
        p[0] - v[:, 0]
    )
    return bool(np.all(cross >= -tol))


@dataclass(frozen=True)
class FeasiblePolygon:
    """Convex admissible region in the plane of one coefficient pair."""

    axes: tuple[int, int]
    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("polygon needs at least 3 two-dimensional vertices")
        nxt = np.roll(v, -1, axis=0)
        nxt2 = np.roll(v, -2, axis=0)
        e1 = nxt - v
        e2 = nxt2 - nxt
        cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(cross <= 0.0):
            raise ValueError("polygon vertices must be strictly convex and CCW")
        object.__setattr__(self, "axes", tuple(int(a) for a in self.axes))
        object.__setattr__(self, "vertices", v)

    @property
    def area(self) -> float:
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]))

    def contains(self, point) -> bool:
        return point_in_polygon(point, self.vertices)


def _line_intersection(a, b, c, d):
    # Intersection of the lines through (a, b) and (c, d); None if parallel.
    r = b - a
    s = d - c
    denom = _cross2(r, s)
    if denom == 0.0:
        return None
    t = _cross2(c - a, s) / denom
    return a + t * r


def _collapse_to(hull: np.ndarray, max_vertices: int) -> np.ndarray:
    """Reduce vertex count by replacing one edge with the intersection of
    its neighbors' extensions, choosing the cheapest (least added area)
    collapse each round. The polygon only ever grows, so containment of
    the original hull (and of every training point) is preserved.
    """
    verts = [np.asarray(v, dtype=float) for v in hull]
    while len(verts) > max_vertices:
        k = len(verts)
        best = None  # (added_area, edge_index, new_point)
        for e in range(k):
            a, b = verts[(e - 1) % k], verts[e]
            c, d = verts[(e + 2) % k], verts[(e + 1) % k]
            p = _line_intersection(a, b, c, d)
            if p is None:
                continue
            # The intersection must lie beyond both edge endpoints,
            # otherwise the collapse would cut into the polygon.
            if np.dot(p - b, b - a) < 0.0 or np.dot(p - d, d - c) < 0.0:
                continue
            added = 0.5 * abs(_cross2(p - verts[e], verts[(e + 1) % k] - verts[e]))
            if best is None or added < best[0]:
                best = (added, e, p)
        if best is None:
            warnings.warn(
                f"cannot simplify polygon below {len(verts)} vertices", stacklevel=2
            )
            break
        _, e, p = best
        if e < (e + 1) % len(verts):
            verts[e] = p
            del verts[e + 1]
        else:  # edge wraps around the end of the list
            verts[e] = p
            del verts[0]
    return np.array(verts)


def fit_feasible_polygon(
    points: np.ndarray, max_vertices: int | None = None, axes=(0, 1)
) -> FeasiblePolygon:
    """Convex region containing a point cloud.

    The convex hull is computed first; if ``max_vertices`` is given the
    hull is simplified outward (see :func:`_collapse_to`) so that every
    input point stays inside the final polygon.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 3:
        raise CollinearPoints("need at least 3 points")
    hull = _convex_hull(pts)
    if max_vertices is not None:
        if max_vertices < 3:
            raise ValueError("max_vertices must be >= 3")
        hull = _collapse_to(hull, max_vertices)
    return FeasiblePolygon(axes=axes, vertices=hull)


# ---------------------------------------------------------------------------
# The reduced space.


@dataclass(frozen=True)
class ReducedSpace:
    """Free coefficient coordinates plus the constraints that bound them.

    ``bounding_box`` is (d, 2) over the free coordinates of the training
    set; the polygon (if any) constrains one coefficient pair, where a
    dependent member of the pair is evaluated through its regression.
    """

    basis: pod.PodBasis
    dependencies: DependencyModel
    polygon: FeasiblePolygon | None
    free_indices: tuple[int, ...]
    bounding_box: np.ndarray
    polygon_uses_regressed: bool = True

    def __post_init__(self):
        box = np.asarray(self.bounding_box, dtype=float).reshape(-1, 2)
        free = tuple(int(i) for i in self.free_indices)
        if free != self.dependencies.free_indices:
            raise ValueError("free indices disagree with the dependency model")
        if box.shape[0] != len(free):
            raise ValueError("bounding box rows must match the free coordinates")
        object.__setattr__(self, "free_indices", free)
        object.__setattr__(self, "bounding_box", box)

    @property
    def dim(self) -> int:
        return len(self.free_indices)

    def expand(self, mu_red) -> np.ndarray:
        """Full coefficient vector for reduced coordinates."""
        return self.dependencies.expand(mu_red)

    def encode(self, alpha) -> np.ndarray:
        """Reduced coordinates of a full coefficient vector."""
        alpha = np.asarray(alpha, dtype=float).reshape(-1)
        if alpha.size != len(self.dependencies.status):
            raise ValueError("coefficient vector length mismatch")
        return alpha[list(self.free_indices)]

    def pair_point(self, mu_red) -> np.ndarray | None:
        """Value of the polygon-constrained coefficient pair (None without
        a polygon); dependent members go through their regression."""
        if self.polygon is None:
            return None
        full = self.expand(mu_red)
        a, b = self.polygon.axes
        return np.array([full[a], full[b]])

    def contains(self, mu_red) -> bool:
        """Feasibility test: inside the bounding box and the polygon."""
        mu_red = np.asarray(mu_red, dtype=float).reshape(-1)
        if mu_red.size != self.dim:
            return False
        box = self.bounding_box
        tol = 1e-9 * np.maximum(1.0, np.abs(box).max(axis=1))
        if np.any(mu_red < box[:, 0] - tol) or np.any(mu_red > box[:, 1] + tol):
            return False
        pair = self.pair_point(mu_red)
        if pair is not None and not self.polygon.contains(pair):
            return False
        return True


def _default_pair(deps: DependencyModel, n_coeff: int) -> tuple[int, int] | None:
    # Mirror the usual reading of the training scatter: the first
    # regressed coefficient against the next free one; with no detected
    # dependencies, the second and third coefficients.
    for j, s in enumerate(deps.status):
        if s is not None:
            for f in deps.free_indices:
                if f > j:
                    return (j, f)
    if n_coeff >= 3:
        return (1, 2)
    if n_coeff == 2:
        return (0, 1)
    return None


def build_reduced_space(
    basis: pod.PodBasis,
    alpha: np.ndarray,
    r2_threshold: float = 0.99,
    max_vertices: int | None = 4,
    pair: tuple[int, int] | None = None,
    polygon_uses_regressed: bool = True,
) -> ReducedSpace:
    """Assemble the reduced space from training coefficients.

    ``pair`` selects the coefficient plane the feasible polygon lives in;
    by default the first dependent coefficient against the next free one.
    ``polygon_uses_regressed`` controls whether a dependent member of the
    pair contributes its regressed value (the default) or its raw
    training value when the polygon is fitted; decoding always evaluates
    dependent coefficients through the regression either way.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 2 or alpha.shape[0] < 1:
        raise ValueError("alpha must be an M x N coefficient matrix")
    if pair is not None and any(not 0 <= i < alpha.shape[1] for i in pair):
        raise ValueError(f"pair {pair} outside the {alpha.shape[1]} coefficients")
    deps = detect_dependencies(alpha, r2_threshold)
    free = deps.free_indices
    if pair is None:
        pair = _default_pair(deps, alpha.shape[1])
    polygon = None
    if pair is not None:
        cols = []
        for idx in pair:
            s = deps.status[idx]
            if s is not None and polygon_uses_regressed:
                cols.append(s.slope * alpha[:, s.source] + s.intercept)
            else:
                cols.append(alpha[:, idx])
        try:
            polygon = fit_feasible_polygon(
                np.column_stack(cols), max_vertices=max_vertices, axes=pair
            )
        except CollinearPoints:
            warnings.warn(
                "training pair is collinear; polygon constraint dropped",
                stacklevel=2,
            )
    box = np.column_stack(
        [alpha[:, list(free)].min(axis=0), alpha[:, list(free)].max(axis=0)]
    )
    return ReducedSpace(
        basis=basis,
        dependencies=deps,
        polygon=polygon,
        free_indices=free,
        bounding_box=box,
        polygon_uses_regressed=polygon_uses_regressed,
    )


def sample_reduced(space: ReducedSpace, n: int, seed: int) -> np.ndarray:
    """Rejection-sample the feasible region uniformly.

    Free coordinates are drawn uniformly inside the bounding box and kept
    when the constrained pair falls inside the polygon. Aborts if the
    acceptance rate over the first 10 n draws is below 1 percent.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    box = space.bounding_box
    accepted: list[np.ndarray] = []
    draws = 0
    checked = False
    while len(accepted) < n:
        batch = rng.uniform(box[:, 0], box[:, 1], size=(n, space.dim))
        draws += n
        for row in batch:
            if space.contains(row):
                accepted.append(row)
        if not checked and draws >= 10 * n:
            checked = True
            if len(accepted) < 0.01 * draws:
                raise InfeasibleRegion(
                    f"acceptance rate {len(accepted) / draws:.2%} after "
                    f"{draws} draws"
                )
    return np.array(accepted[:n])


def decode(space: ReducedSpace, mu_red, reference: TriMesh) -> TriMesh:
    """Geometry for one reduced coordinate vector.

    The coordinates must be feasible; out-of-region decoding is an error
    rather than a clamp so constraint violations cannot pass silently.
    """
    mu_red = np.asarray(mu_red, dtype=float).reshape(-1)
    if not space.contains(mu_red):
        raise OutOfRegion(f"reduced coordinates {mu_red.tolist()} are infeasible")
    vec = pod.reconstruct(space.basis, space.expand(mu_red))
    return unflatten(vec, reference)
