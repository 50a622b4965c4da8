"""Deterministic synthetic solver.

Stands in for the expensive flow simulation the pipeline is usually
coupled with: it produces a per-vertex scalar field and a scalar
objective, both smooth in the vertex coordinates, so reduction and
optimization behavior can be exercised at desk scale.

Two modes are available. ``field-synthetic`` produces a trigonometric
field whose objective is its area-weighted mean, mimicking an integral
quantity such as drag. ``quadratic-centroid`` measures the squared
distance of a region's vertex centroid from a target point, giving the
optimizer tests an objective with a known analytic minimizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegion
from .mesh import TriMesh


@dataclass(frozen=True)
class StubConfig:
    """Synthetic solver settings; fields are interpreted per mode."""

    mode: str = "field-synthetic"
    frequency: tuple[float, float, float] = (3.0, 2.0, 1.5)
    amplitude: float = 1.0
    target: tuple[float, float, float] = (0.0, 0.0, 0.0)
    region: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("field-synthetic", "quadratic-centroid"):
            raise ValueError(f"unknown stub mode {self.mode!r}")
        freq = tuple(float(f) for f in self.frequency)
        if len(freq) != 3 or not all(np.isfinite(freq)):
            raise ValueError("frequency must be three finite numbers")
        object.__setattr__(self, "frequency", freq)
        object.__setattr__(self, "target", tuple(float(c) for c in self.target))
        if self.region is not None:
            region = np.asarray(self.region, dtype=float).reshape(3, 2)
            if np.any(region[:, 0] > region[:, 1]):
                raise ValueError("region box must satisfy low <= high")
            object.__setattr__(self, "region", region)


@dataclass(frozen=True)
class SolutionSnapshot:
    """One solver run: per-vertex field, scalar objective, parameter tag."""

    field: np.ndarray
    objective: float
    params: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.field, dtype=float).reshape(-1)
        params = np.asarray(self.params, dtype=float).reshape(-1)
        if not np.isfinite(values).all() or not np.isfinite(self.objective):
            raise ValueError("solver output must be finite")
        object.__setattr__(self, "field", values)
        object.__setattr__(self, "params", params)


def _facet_areas(mesh: TriMesh) -> np.ndarray:
    v = mesh.vertices
    f = mesh.facets
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    return 0.5 * np.linalg.norm(n, axis=1)


def evaluate(mesh: TriMesh, cfg: StubConfig, params=None) -> SolutionSnapshot:
    """Run the synthetic solver on one geometry.

    ``params`` tags the snapshot with the parameter vector that produced
    the geometry; it is carried along, never used in the computation.
    """
    tag = np.zeros(0) if params is None else np.asarray(params, dtype=float)
    v = mesh.vertices
    if cfg.mode == "field-synthetic":
        kx, ky, kz = cfg.frequency
        values = cfg.amplitude * np.sin(kx * v[:, 0]) * np.cos(ky * v[:, 1])
        values = values + kz * v[:, 2] ** 2
        areas = _facet_areas(mesh)
        total = areas.sum()
        if total > 0.0:
            facet_mean = values[mesh.facets].mean(axis=1)
            objective = float((areas * facet_mean).sum() / total)
        else:  # fully degenerate tessellation; fall back to the plain mean
            objective = float(values.mean())
        return SolutionSnapshot(values, objective, tag)

    # quadratic-centroid
    target = np.asarray(cfg.target, dtype=float)
    values = ((v - target) ** 2).sum(axis=1)
    if cfg.region is None:
        inside = np.ones(len(v), dtype=bool)
    else:
        inside = np.all(
            (v >= cfg.region[:, 0]) & (v <= cfg.region[:, 1]), axis=1
        )
    if not inside.any():
        raise EmptyRegion("no vertices inside the region box")
    centroid = v[inside].mean(axis=0)
    objective = float(((centroid - target) ** 2).sum())
    return SolutionSnapshot(values, objective, tag)


def stub_to_dict(cfg: StubConfig) -> dict:
    out = {"mode": cfg.mode}
    if cfg.mode == "field-synthetic":
        out["frequency"] = list(cfg.frequency)
        out["amplitude"] = cfg.amplitude
    else:
        out["target"] = list(cfg.target)
        if cfg.region is not None:
            out["region"] = {
                "lower": cfg.region[:, 0].tolist(),
                "upper": cfg.region[:, 1].tolist(),
            }
    return out


def stub_from_dict(data: dict) -> StubConfig:
    kwargs = {"mode": data.get("mode", "field-synthetic")}
    if "frequency" in data:
        kwargs["frequency"] = tuple(data["frequency"])
    if "amplitude" in data:
        kwargs["amplitude"] = float(data["amplitude"])
    if "target" in data:
        kwargs["target"] = tuple(data["target"])
    if data.get("region") is not None:
        region = data["region"]
        kwargs["region"] = np.column_stack([region["lower"], region["upper"]])
    return StubConfig(**kwargs)
