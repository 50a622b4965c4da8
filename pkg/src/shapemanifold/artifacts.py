"""Versioned on-disk artifact formats.

Binary artifacts carry an eight-byte magic string, a little-endian uint32
version, and little-endian 64-bit floats; anything plottable goes to CSV.
Readers reject unknown magic strings and versions instead of misreading.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ArtifactError, EmptyDatabase
from .manifold import (
    Dependency,
    DependencyModel,
    FeasiblePolygon,
    ReducedSpace,
)
from .pod import PodBasis
from .rom import Interpolator, RomModel, SolutionDatabase

_MAGIC_BASIS = b"SMPODBAS"
_MAGIC_VECTOR = b"SMVECTOR"
_VERSION = 1

JSON_FORMATS = {
    "space": "shapemanifold/reduced-space",
    "rom": "shapemanifold/rom-interpolators",
}


def _write_header(handle, magic: bytes):
    handle.write(magic + struct.pack("<I", _VERSION))


def _check_header(handle, magic: bytes, path):
    head = handle.read(len(magic) + 4)
    if len(head) < len(magic) + 4 or head[: len(magic)] != magic:
        raise ArtifactError(f"{path}: bad magic string, not a {magic.decode()} artifact")
    (version,) = struct.unpack("<I", head[len(magic):])
    if version != _VERSION:
        raise ArtifactError(f"{path}: unsupported version {version}")


def save_pod_basis(path, basis: PodBasis):
    """Binary layout: magic, version, N, r, modes (column-major), sigma, center."""
    path = Path(path)
    with open(path, "wb") as handle:
        _write_header(handle, _MAGIC_BASIS)
        handle.write(struct.pack("<QQ", basis.state_dim, basis.rank))
        handle.write(np.asarray(basis.modes, dtype="<f8").tobytes(order="F"))
        handle.write(np.asarray(basis.singular_values, dtype="<f8").tobytes())
        handle.write(np.asarray(basis.center, dtype="<f8").tobytes())


def load_pod_basis(path) -> PodBasis:
    path = Path(path)
    with open(path, "rb") as handle:
        _check_header(handle, _MAGIC_BASIS, path)
        raw = handle.read(16)
        if len(raw) < 16:
            raise ArtifactError(f"{path}: truncated header")
        n, r = struct.unpack("<QQ", raw)
        body = handle.read()
    expected = 8 * (n * r + r + n)
    if len(body) != expected:
        raise ArtifactError(
            f"{path}: payload is {len(body)} bytes, expected {expected}"
        )
    data = np.frombuffer(body, dtype="<f8")
    modes = data[: n * r].reshape((n, r), order="F")
    sigma = data[n * r : n * r + r]
    center = data[n * r + r :]
    try:
        return PodBasis(modes.copy(), sigma.copy(), center.copy())
    except ValueError as exc:
        raise ArtifactError(f"{path}: corrupt basis payload ({exc})") from exc


def save_vector(path, values: np.ndarray):
    """Binary layout: magic, version, length, float64 payload."""
    values = np.asarray(values, dtype=float).reshape(-1)
    with open(path, "wb") as handle:
        _write_header(handle, _MAGIC_VECTOR)
        handle.write(struct.pack("<Q", values.size))
        handle.write(values.astype("<f8").tobytes())


def load_vector(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as handle:
        _check_header(handle, _MAGIC_VECTOR, path)
        raw = handle.read(8)
        if len(raw) < 8:
            raise ArtifactError(f"{path}: truncated header")
        (size,) = struct.unpack("<Q", raw)
        body = handle.read()
    if len(body) != 8 * size:
        raise ArtifactError(f"{path}: payload is {len(body)} bytes, expected {8 * size}")
    return np.frombuffer(body, dtype="<f8").copy()


def _fmt(x: float) -> str:
    return repr(float(x))


def save_decay_csv(path, report: np.ndarray):
    """Decay table rows as emitted by the mode-decay report."""
    lines = ["index,sigma,ratio,cumulative_energy"]
    for row in np.atleast_2d(report):
        lines.append(
            f"{int(row[0])},{_fmt(row[1])},{_fmt(row[2])},{_fmt(row[3])}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def save_coefficients_csv(path, alpha: np.ndarray):
    """Training coefficient scatter, one row per sample."""
    alpha = np.atleast_2d(alpha)
    header = ",".join(f"alpha{i + 1}" for i in range(alpha.shape[1]))
    lines = [header]
    for row in alpha:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def save_trace_csv(path, traces):
    """Optimizer evaluations: start,iter,mu...,value."""
    dim = len(traces[0][0][0]) if traces and traces[0] else 0
    header = "start,iter," + ",".join(f"mu{i}" for i in range(dim)) + ",value"
    lines = [header]
    for start, trace in enumerate(traces):
        for it, (mu, value) in enumerate(trace):
            mu_cols = ",".join(_fmt(v) for v in mu)
            lines.append(f"{start},{it},{mu_cols},{_fmt(value)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _load_json(path, expected_format: str) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ArtifactError(f"{path}: not a JSON document ({exc})") from exc
    if not isinstance(data, dict) or data.get("format") != expected_format:
        raise ArtifactError(f"{path}: expected a {expected_format} document")
    if data.get("version") != _VERSION:
        raise ArtifactError(f"{path}: unsupported version {data.get('version')}")
    return data


def save_reduced_space(directory, space: ReducedSpace):
    """Directory artifact: space.json plus geometry_basis.bin."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_pod_basis(directory / "geometry_basis.bin", space.basis)
    deps = []
    for s in space.dependencies.status:
        if s is None:
            deps.append(None)
        else:
            deps.append(
                {
                    "source": s.source,
                    "slope": s.slope,
                    "intercept": s.intercept,
                    "r2": s.r2,
                }
            )
    doc = {
        "format": JSON_FORMATS["space"],
        "version": _VERSION,
        "free_indices": list(space.free_indices),
        "dependencies": deps,
        "polygon": None
        if space.polygon is None
        else {
            "axes": list(space.polygon.axes),
            "vertices": space.polygon.vertices.tolist(),
        },
        "bounding_box": space.bounding_box.tolist(),
        "polygon_uses_regressed": space.polygon_uses_regressed,
    }
    (directory / "space.json").write_text(json.dumps(doc, indent=1) + "\n")


def load_reduced_space(directory) -> ReducedSpace:
    directory = Path(directory)
    doc = _load_json(directory / "space.json", JSON_FORMATS["space"])
    basis = load_pod_basis(directory / "geometry_basis.bin")
    status = []
    for entry in doc["dependencies"]:
        if entry is None:
            status.append(None)
        else:
            status.append(
                Dependency(
                    int(entry["source"]),
                    float(entry["slope"]),
                    float(entry["intercept"]),
                    float(entry["r2"]),
                )
            )
    polygon = None
    if doc["polygon"] is not None:
        polygon = FeasiblePolygon(
            axes=tuple(doc["polygon"]["axes"]),
            vertices=np.asarray(doc["polygon"]["vertices"], dtype=float),
        )
    return ReducedSpace(
        basis=basis,
        dependencies=DependencyModel(tuple(status)),
        polygon=polygon,
        free_indices=tuple(doc["free_indices"]),
        bounding_box=np.asarray(doc["bounding_box"], dtype=float),
        polygon_uses_regressed=bool(doc["polygon_uses_regressed"]),
    )


def save_solution_database(directory, db: SolutionDatabase):
    """Directory artifact: index.csv plus one field vector per sample."""
    directory = Path(directory)
    fields_dir = directory / "fields"
    fields_dir.mkdir(parents=True, exist_ok=True)
    dim = db.params.shape[1]
    header = "sample_id," + ",".join(f"mu{i}" for i in range(dim)) + ",objective"
    lines = [header]
    for i in range(db.count):
        save_vector(fields_dir / f"sample_{i:05d}.bin", db.fields[i])
        mu_cols = ",".join(_fmt(v) for v in db.params[i])
        lines.append(f"{i},{mu_cols},{_fmt(db.objectives[i])}")
    (directory / "index.csv").write_text("\n".join(lines) + "\n")


def load_solution_database(directory) -> SolutionDatabase:
    directory = Path(directory)
    index = directory / "index.csv"
    if not index.exists():
        raise ArtifactError(f"{index}: missing database index")
    lines = index.read_text().strip().splitlines()
    if len(lines) < 2:
        raise EmptyDatabase(f"{index}: no samples recorded")
    header = lines[0].split(",")
    if header[0] != "sample_id" or header[-1] != "objective":
        raise ArtifactError(f"{index}: unexpected column layout")
    params, objectives, fields = [], [], []
    for line in lines[1:]:
        cols = line.split(",")
        sample_id = int(cols[0])
        params.append([float(c) for c in cols[1:-1]])
        objectives.append(float(cols[-1]))
        fields.append(load_vector(directory / "fields" / f"sample_{sample_id:05d}.bin"))
    return SolutionDatabase(
        np.asarray(params), np.asarray(fields), np.asarray(objectives)
    )


def _interp_to_dict(interp: Interpolator) -> dict:
    return {
        "kernel": interp.kernel,
        "epsilon": interp.epsilon,
        "weights": interp.weights.tolist(),
        "tail": None if interp.tail is None else interp.tail.tolist(),
    }


def _interp_from_dict(data: dict, nodes: np.ndarray) -> Interpolator:
    return Interpolator(
        kernel=data["kernel"],
        epsilon=float(data["epsilon"]),
        nodes=nodes,
        weights=np.asarray(data["weights"], dtype=float),
        tail=None if data["tail"] is None else np.asarray(data["tail"], dtype=float),
    )


def save_rom(directory, model: RomModel):
    """Directory artifact: solution_basis.bin plus interpolators.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_pod_basis(directory / "solution_basis.bin", model.basis)
    doc = {
        "format": JSON_FORMATS["rom"],
        "version": _VERSION,
        "nodes": model.coefficients.nodes.tolist(),
        "coefficients": _interp_to_dict(model.coefficients),
        "objective": _interp_to_dict(model.objective),
        "objective_mean": model.objective_mean,
        "metadata": model.metadata,
    }
    (directory / "interpolators.json").write_text(json.dumps(doc, indent=1) + "\n")


def load_rom(directory) -> RomModel:
    directory = Path(directory)
    doc = _load_json(directory / "interpolators.json", JSON_FORMATS["rom"])
    basis = load_pod_basis(directory / "solution_basis.bin")
    nodes = np.asarray(doc["nodes"], dtype=float)
    coeff = _interp_from_dict(doc["coefficients"], nodes)
    weights = np.asarray(doc["objective"]["weights"], dtype=float)
    if weights.ndim == 1:
        weights = weights[:, None]
    objective = Interpolator(
        kernel=doc["objective"]["kernel"],
        epsilon=float(doc["objective"]["epsilon"]),
        nodes=nodes,
        weights=weights,
        tail=None
        if doc["objective"]["tail"] is None
        else np.asarray(doc["objective"]["tail"], dtype=float),
    )
    return RomModel(
        basis=basis,
        coefficients=coeff,
        objective=objective,
        objective_mean=float(doc["objective_mean"]),
        metadata=dict(doc.get("metadata", {})),
    )
