"""Lattice-based free form deformation.

A box lattice of control points is placed around (part of) the geometry.
Every point inside the box is mapped to local coordinates of the lattice
frame, blended against the displaced control points with a Bernstein
tensor product, and mapped back. Points outside the box never move, which
keeps the deformation local.

The blend is evaluated in displacement form: with undisplaced control
points the Bernstein tensor product reproduces the local coordinates
exactly (linear precision), so the deformation reduces to adding the
blended control-point displacements. This is algebraically identical to
blending the displaced control points and makes the zero-displacement
morph an exact identity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, SingularLattice
from .mesh import TriMesh

_ORTHO_RTOL = 1e-10


def bernstein_row(degree: int, t) -> np.ndarray:
    """All Bernstein basis values of one degree at ``t``.

    Uses the triangular recurrence (convex combinations only), which is
    numerically stable for t in [0, 1]. ``t`` may be a scalar or a 1-D
    array; the result has shape (..., degree + 1).
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (degree + 1,))
    out[..., 0] = 1.0
    s = 1.0 - t
    for d in range(1, degree + 1):
        out[..., d] = t * out[..., d - 1]
        for j in range(d - 1, 0, -1):
            out[..., j] = t * out[..., j - 1] + s * out[..., j]
        out[..., 0] *= s
    return out


def bernstein(degree: int, index: int, t: float) -> float:
    """Single Bernstein basis value B_index^degree(t)."""
    if degree < 0:
        raise IndexOutOfRange("degree must be >= 0")
    if not 0 <= index <= degree:
        raise IndexOutOfRange(f"index {index} outside 0..{degree}")
    return float(bernstein_row(degree, float(t))[index])


def _validate_frame(origin, axes):
    origin = np.asarray(origin, dtype=float).reshape(3)
    axes = np.asarray(axes, dtype=float).reshape(3, 3)
    lengths = np.linalg.norm(axes, axis=1)
    if np.any(lengths == 0.0):
        raise SingularLattice("lattice axis with zero length")
    for i in range(3):
        for j in range(i + 1, 3):
            dot = abs(float(axes[i] @ axes[j]))
            if dot > _ORTHO_RTOL * lengths[i] * lengths[j]:
                raise SingularLattice(
                    f"lattice axes {i} and {j} are not orthogonal "
                    f"(relative projection {dot / (lengths[i] * lengths[j]):.2e})"
                )
    return origin, axes


@dataclass(frozen=True)
class FfdLattice:
    """Control-point lattice with displacements in lattice coordinates.

    ``dims`` are the polynomial degrees (l, m, n) per axis; the grid has
    (l+1) x (m+1) x (n+1) control points. ``axes`` rows are the three edge
    vectors of the box, required to be pairwise orthogonal so the local
    frame is invertible.
    """

    origin: np.ndarray
    axes: np.ndarray
    dims: tuple[int, int, int]
    displacements: np.ndarray

    def __post_init__(self):
        origin, axes = _validate_frame(self.origin, self.axes)
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValueError("lattice degrees must be three integers >= 1")
        shape = (dims[0] + 1, dims[1] + 1, dims[2] + 1, 3)
        disp = np.asarray(self.displacements, dtype=float)
        if disp.shape != shape:
            raise ValueError(f"displacement array must have shape {shape}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "displacements", disp)


def to_reference(lattice: FfdLattice, x) -> np.ndarray:
    """Local (s, t, u) coordinates of a physical point; may leave [0, 1]."""
    x = np.asarray(x, dtype=float).reshape(3)
    mat = lattice.axes.T
    try:
        inv = np.linalg.inv(mat)
    except np.linalg.LinAlgError as exc:
        raise SingularLattice("lattice axes are not invertible") from exc
    return inv @ (x - lattice.origin)


class MeshMorpher:
    """Precomputed blend weights of a fixed point set against a lattice frame.

    Building the weights costs one Bernstein evaluation per point; after
    that, each new displacement array is a single small matrix product.
    Used to generate large families of deformations of one reference mesh.
    """

    def __init__(self, points: np.ndarray, origin, axes, dims):
        origin, axes = _validate_frame(origin, axes)
        self.origin = origin
        self.axes = axes
        self.dims = tuple(int(d) for d in dims)
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        inv = np.linalg.inv(axes.T)
        stu = (pts - origin) @ inv.T
        self.inside = np.all((stu >= 0.0) & (stu <= 1.0), axis=1)
        l, m, n = self.dims
        local = stu[self.inside]
        bx = bernstein_row(l, local[:, 0])
        by = bernstein_row(m, local[:, 1])
        bz = bernstein_row(n, local[:, 2])
        w = bx[:, :, None, None] * by[:, None, :, None] * bz[:, None, None, :]
        self.weights = w.reshape(local.shape[0], (l + 1) * (m + 1) * (n + 1))
        self.point_count = pts.shape[0]

    def displacement(self, displacements: np.ndarray) -> np.ndarray:
        """Physical displacement of every point for one displacement array."""
        out = np.zeros((self.point_count, 3))
        if self.weights.shape[0]:
            local = self.weights @ displacements.reshape(-1, 3)
            out[self.inside] = local @ self.axes
        return out


def deform_point(lattice: FfdLattice, x) -> np.ndarray:
    """Deformed position of one point; points outside the box are fixed."""
    x = np.asarray(x, dtype=float).reshape(3)
    morpher = MeshMorpher(x[None, :], lattice.origin, lattice.axes, lattice.dims)
    return x + morpher.displacement(lattice.displacements)[0]


def morph_mesh(mesh: TriMesh, lattice: FfdLattice) -> TriMesh:
    """Apply the deformation to every vertex.

    Connectivity, vertex count, and vertex order are unchanged, so flat
    coordinate vectors of the output align with those of the input.
    """
    morpher = MeshMorpher(mesh.vertices, lattice.origin, lattice.axes, lattice.dims)
    return TriMesh(
        mesh.vertices + morpher.displacement(lattice.displacements),
        mesh.facets,
        weld_tolerance=mesh.weld_tolerance,
    )


@dataclass(frozen=True)
class MapEntry:
    """One additive contribution of a design parameter to a control point."""

    param: int
    point: tuple[int, int, int]
    axis: int
    weight: float


@dataclass(frozen=True)
class ParamMap:
    """Linear map from design parameters to control-point displacements."""

    entries: tuple[MapEntry, ...]
    param_dim: int

    def __post_init__(self):
        entries = tuple(self.entries)
        if self.param_dim < 1:
            raise ValueError("param_dim must be >= 1")
        for e in entries:
            if not 0 <= e.param < self.param_dim:
                raise ValueError(f"parameter index {e.param} outside 0..{self.param_dim - 1}")
            if e.axis not in (0, 1, 2):
                raise ValueError(f"axis must be 0, 1 or 2, got {e.axis}")
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True)
class FfdConfig:
    """Lattice geometry, parameter map, and the design-parameter box."""

    origin: np.ndarray
    axes: np.ndarray
    dims: tuple[int, int, int]
    param_map: ParamMap
    bounds: np.ndarray = field(default=None)

    def __post_init__(self):
        origin, axes = _validate_frame(self.origin, self.axes)
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValueError("lattice degrees must be three integers >= 1")
        for e in self.param_map.entries:
            if any(not 0 <= e.point[a] <= dims[a] for a in range(3)):
                raise ValueError(f"control point {e.point} outside lattice {dims}")
        bounds = self.bounds
        if bounds is None:
            bounds = np.tile([-0.3, 0.3], (self.param_map.param_dim, 1))
        bounds = np.asarray(bounds, dtype=float).reshape(self.param_map.param_dim, 2)
        if np.any(bounds[:, 0] >= bounds[:, 1]):
            raise ValueError("parameter bounds must satisfy lower < upper")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "bounds", bounds)

    @property
    def param_dim(self) -> int:
        return self.param_map.param_dim


def apply_params(config: FfdConfig, mu) -> FfdLattice:
    """Turn a design-parameter vector into a displaced lattice.

    Entries referencing the same control point and axis add up.
    Parameters outside the configured box trigger a warning but still
    morph; the box is a sampling convention, not a hard constraint.
    """
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if mu.size != config.param_dim:
        raise DimensionMismatch(
            f"expected {config.param_dim} parameters, got {mu.size}"
        )
    if np.any(mu < config.bounds[:, 0] - 1e-12) or np.any(
        mu > config.bounds[:, 1] + 1e-12
    ):
        warnings.warn("parameter vector outside the configured bounds", stacklevel=2)
    l, m, n = config.dims
    disp = np.zeros((l + 1, m + 1, n + 1, 3))
    for e in config.param_map.entries:
        i, j, k = e.point
        disp[i, j, k, e.axis] += e.weight * mu[e.param]
    return FfdLattice(config.origin, config.axes, config.dims, disp)


def default_config(mesh: TriMesh, bounds=(-0.3, 0.3)) -> FfdConfig:
    """Out-of-the-box lattice: degree (2, 2, 2) spanning the mesh bounds.

    Five parameters drive the single fully interior control point
    (1, 1, 1): three along the axes with unit weight, plus two that reuse
    the x and y directions at half weight. The five inputs therefore
    excite only three independent displacement fields, and because only
    an interior point moves, the lattice box faces stay fixed.

    This is a stand-in parametrisation; real studies should ship their
    own lattice placement and parameter map.
    """
    box = mesh.bounding_box()
    extent = box[:, 1] - box[:, 0]
    # Guard flat geometries: a zero-thickness axis still needs a frame.
    extent = np.where(extent > 0.0, extent, max(extent.max(), 1.0))
    entries = (
        MapEntry(0, (1, 1, 1), 0, 1.0),
        MapEntry(1, (1, 1, 1), 1, 1.0),
        MapEntry(2, (1, 1, 1), 2, 1.0),
        MapEntry(3, (1, 1, 1), 0, 0.5),
        MapEntry(4, (1, 1, 1), 1, 0.5),
    )
    return FfdConfig(
        origin=box[:, 0],
        axes=np.diag(extent),
        dims=(2, 2, 2),
        param_map=ParamMap(entries, param_dim=5),
        bounds=np.tile(bounds, (5, 1)),
    )


def config_to_dict(config: FfdConfig) -> dict:
    """JSON-ready form of a lattice configuration (documented field names)."""
    return {
        "origin": config.origin.tolist(),
        "axes": config.axes.tolist(),
        "dims": list(config.dims),
        "parameters": {
            "dim": config.param_dim,
            "entries": [
                {
                    "param": e.param,
                    "point": list(e.point),
                    "axis": e.axis,
                    "weight": e.weight,
                }
                for e in config.param_map.entries
            ],
        },
        "bounds": {
            "lower": config.bounds[:, 0].tolist(),
            "upper": config.bounds[:, 1].tolist(),
        },
    }


def config_from_dict(data: dict) -> FfdConfig:
    """Inverse of :func:`config_to_dict`."""
    params = data["parameters"]
    entries = tuple(
        MapEntry(
            int(e["param"]),
            tuple(int(c) for c in e["point"]),
            int(e["axis"]),
            float(e["weight"]),
        )
        for e in params["entries"]
    )
    bounds = np.column_stack([data["bounds"]["lower"], data["bounds"]["upper"]])
    return FfdConfig(
        origin=np.asarray(data["origin"], dtype=float),
        axes=np.asarray(data["axes"], dtype=float),
        dims=tuple(int(d) for d in data["dims"]),
        param_map=ParamMap(entries, param_dim=int(params["dim"])),
        bounds=bounds,
    )
