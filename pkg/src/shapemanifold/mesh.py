"""STL input/output and the welded triangle mesh representation.

A raw STL file stores three loose corner points per facet with no
connectivity. :func:`weld` merges coincident corners into an indexed mesh
with a canonical vertex order, so that every deformation of the same
reference produces coordinate vectors with one shared layout. Welding is
done once, on the reference geometry; deformed geometries are obtained by
transforming the welded vertex list, never by re-welding.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyMesh, MalformedStl

# Binary STL facet record: normal, three vertices, attribute byte count.
_FACET_DTYPE = np.dtype([
    ("normal", "<f4", (3,)),
    ("v0", "<f4", (3,)),
    ("v1", "<f4", (3,)),
    ("v2", "<f4", (3,)),
    ("attr", "<u2"),
])
_BINARY_HEADER = b"shapemanifold"


@dataclass(frozen=True)
class FacetSoup:
    """Facets exactly as read from an STL file, before welding.

    ``corners`` has shape (F, 3, 3): facet, corner, coordinate. Attribute
    words are only meaningful for binary input and are zero otherwise.
    """

    normals: np.ndarray
    corners: np.ndarray
    attributes: np.ndarray

    def __post_init__(self):
        normals = np.ascontiguousarray(self.normals, dtype=float)
        corners = np.ascontiguousarray(self.corners, dtype=float)
        attrs = np.ascontiguousarray(self.attributes, dtype=np.uint16)
        if corners.ndim != 3 or corners.shape[1:] != (3, 3):
            raise MalformedStl("facet corners must have shape (F, 3, 3)")
        if corners.shape[0] == 0:
            raise EmptyMesh("STL data contains no facets")
        if normals.shape != (corners.shape[0], 3):
            raise MalformedStl("normal count does not match facet count")
        if attrs.shape != (corners.shape[0],):
            raise MalformedStl("attribute count does not match facet count")
        if not np.isfinite(corners).all():
            raise MalformedStl("non-finite vertex coordinate in STL data")
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "corners", corners)
        object.__setattr__(self, "attributes", attrs)

    def __len__(self) -> int:
        return self.corners.shape[0]


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh: welded vertices plus facet index triples."""

    vertices: np.ndarray
    facets: np.ndarray
    weld_tolerance: float = 0.0

    def __post_init__(self):
        vertices = np.ascontiguousarray(self.vertices, dtype=float)
        facets = np.ascontiguousarray(self.facets, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ValueError("vertices must have shape (V, 3)")
        if facets.ndim != 2 or facets.shape[1] != 3:
            raise ValueError("facets must have shape (F, 3)")
        if not np.isfinite(vertices).all():
            raise ValueError("non-finite vertex coordinate")
        if facets.size and (facets.min() < 0 or facets.max() >= len(vertices)):
            raise ValueError("facet index outside vertex range")
        if not self.weld_tolerance >= 0.0:
            raise ValueError("weld tolerance must be >= 0")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "facets", facets)

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    def bounding_box(self) -> np.ndarray:
        """Axis-aligned bounds as a (3, 2) array of (min, max) rows."""
        if self.vertices.size == 0:
            raise EmptyMesh("mesh has no vertices")
        return np.column_stack([self.vertices.min(axis=0), self.vertices.max(axis=0)])


def _looks_ascii(data: bytes) -> bool:
    # ASCII iff the stream starts with the "solid" token and the length
    # does not match the binary layout implied by the facet count word.
    # Industry files often start with "solid" yet are binary, so the
    # length test wins when both readings are possible. Keyword case is
    # not significant anywhere in the ASCII grammar.
    if not data.lstrip()[:5].lower().startswith(b"solid"):
        return False
    if len(data) < 84:
        return True
    count = struct.unpack_from("<I", data, 80)[0]
    return len(data) != 84 + 50 * count


def _read_binary(data: bytes) -> FacetSoup:
    if len(data) < 84:
        raise MalformedStl("binary STL shorter than header plus count")
    count = struct.unpack_from("<I", data, 80)[0]
    if count == 0:
        raise EmptyMesh("binary STL declares zero facets")
    expected = 84 + 50 * count
    if len(data) < expected:
        raise MalformedStl(
            f"binary STL truncated: {len(data)} bytes, {expected} required "
            f"for {count} facets"
        )
    records = np.frombuffer(data, dtype=_FACET_DTYPE, count=count, offset=84)
    corners = np.stack(
        [records["v0"], records["v1"], records["v2"]], axis=1
    ).astype(float)
    return FacetSoup(records["normal"].astype(float), corners, records["attr"].copy())


def _read_ascii(data: bytes) -> FacetSoup:
    try:
        tokens = data.decode("ascii", errors="strict").split()
    except UnicodeDecodeError as exc:
        raise MalformedStl(f"ASCII STL is not valid text: {exc}") from exc
    pos = 0

    def next_token() -> str:
        nonlocal pos
        if pos >= len(tokens):
            raise MalformedStl("ASCII STL ended unexpectedly")
        tok = tokens[pos]
        pos += 1
        return tok

    def expect(word: str):
        tok = next_token()
        if tok.lower() != word:
            raise MalformedStl(f"expected '{word}', found '{tok}'")

    def floats(n: int) -> list[float]:
        out = []
        for _ in range(n):
            tok = next_token()
            try:
                out.append(float(tok))
            except ValueError as exc:
                raise MalformedStl(f"expected a number, found '{tok}'") from exc
        return out

    normals, corners = [], []
    expect("solid")
    while pos < len(tokens):
        tok = next_token()
        low = tok.lower()
        if low == "facet":
            expect("normal")
            normals.append(floats(3))
            expect("outer")
            expect("loop")
            tri = []
            for _ in range(3):
                expect("vertex")
                tri.append(floats(3))
            if pos < len(tokens) and tokens[pos].lower() == "vertex":
                raise MalformedStl("facet loop has more than three vertices")
            expect("endloop")
            expect("endfacet")
            corners.append(tri)
        elif low == "endsolid":
            # Consume the optional solid name up to the next "solid" block.
            while pos < len(tokens) and tokens[pos].lower() != "solid":
                pos += 1
            if pos < len(tokens):
                pos += 1  # the next "solid"
        elif low == "vertex":
            raise MalformedStl("vertex outside a facet loop")
        else:
            # Part of the solid name; names may contain arbitrary words.
            continue
    if not corners:
        raise EmptyMesh("ASCII STL contains no facets")
    count = len(corners)
    return FacetSoup(
        np.array(normals, dtype=float),
        np.array(corners, dtype=float),
        np.zeros(count, dtype=np.uint16),
    )


def read_stl(data: bytes) -> FacetSoup:
    """Parse STL bytes, auto-detecting the ASCII and binary flavors.

    Parameters
    ----------
    data : bytes
        Full file content.

    Returns
    -------
    FacetSoup
        All facets in file order.

    Raises
    ------
    MalformedStl
        Truncated binary record or unparsable ASCII token.
    EmptyMesh
        The file declares zero facets.
    """
    if len(data) == 0:
        raise MalformedStl("empty byte stream")
    if _looks_ascii(data):
        return _read_ascii(data)
    return _read_binary(data)


def default_weld_tolerance(soup: FacetSoup) -> float:
    """Scale-relative default: 1e-8 times the bounding-box diagonal."""
    pts = soup.corners.reshape(-1, 3)
    diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    return 1e-8 * diag


def weld(soup: FacetSoup, tol: float) -> TriMesh:
    """Deduplicate facet corners into an indexed mesh.

    Corners within Chebyshev distance ``tol`` of an already-registered
    vertex reuse its index. Vertices are numbered in first-occurrence
    order (facet by facet, corner by corner), so two welds of the same
    soup with the same tolerance produce identical meshes.
    """
    if not tol >= 0.0:
        raise ValueError("weld tolerance must be >= 0")
    corners = soup.corners.reshape(-1, 3)
    vertices: list[np.ndarray] = []
    indices = np.empty(len(corners), dtype=np.int64)
    exact: dict[tuple, int] = {}

    if tol == 0.0:
        for n, p in enumerate(corners):
            key = (p[0], p[1], p[2])
            idx = exact.get(key)
            if idx is None:
                idx = len(vertices)
                exact[key] = idx
                vertices.append(p)
            indices[n] = idx
    else:
        # Spatial hash with cell width tol: any match lies in one of the
        # 27 neighboring cells. An exact-coordinate dictionary handles the
        # common case of bitwise-identical shared corners first.
        cells: dict[tuple, list[int]] = {}
        cell_ids = np.floor(corners / tol).astype(np.int64)
        offsets = [
            (di, dj, dk)
            for di in (-1, 0, 1)
            for dj in (-1, 0, 1)
            for dk in (-1, 0, 1)
        ]
        for n, p in enumerate(corners):
            key = (p[0], p[1], p[2])
            idx = exact.get(key)
            if idx is None:
                ci, cj, ck = cell_ids[n]
                for di, dj, dk in offsets:
                    for cand in cells.get((ci + di, cj + dj, ck + dk), ()):
                        if np.max(np.abs(vertices[cand] - p)) <= tol:
                            idx = cand
                            break
                    if idx is not None:
                        break
                if idx is None:
                    idx = len(vertices)
                    vertices.append(p)
                    cells.setdefault((ci, cj, ck), []).append(idx)
                exact[key] = idx
            indices[n] = idx

    return TriMesh(
        np.array(vertices, dtype=float),
        indices.reshape(-1, 3),
        weld_tolerance=tol,
    )


def _facet_normals(mesh: TriMesh) -> np.ndarray:
    # Recomputed from winding; degenerate facets get a zero normal.
    v = mesh.vertices
    f = mesh.facets
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    lengths = np.linalg.norm(n, axis=1)
    ok = lengths > 0.0
    n[ok] /= lengths[ok, None]
    n[~ok] = 0.0
    return n


def write_stl(mesh: TriMesh, fmt: str = "binary") -> bytes:
    """Serialize a mesh to STL bytes.

    Facet normals are recomputed from the vertex winding. Binary output
    uses 32-bit little-endian floats, zero attribute words, and a header
    starting with ``shapemanifold``.
    """
    normals = _facet_normals(mesh)
    tri = mesh.vertices[mesh.facets]
    if fmt == "binary":
        records = np.zeros(len(mesh.facets), dtype=_FACET_DTYPE)
        records["normal"] = normals
        records["v0"] = tri[:, 0]
        records["v1"] = tri[:, 1]
        records["v2"] = tri[:, 2]
        header = _BINARY_HEADER.ljust(80, b"\x00")
        return header + struct.pack("<I", len(records)) + records.tobytes()
    if fmt == "ascii":
        lines = ["solid shapemanifold"]
        for nrm, corners in zip(normals, tri):
            lines.append(
                "  facet normal {:.17g} {:.17g} {:.17g}".format(*nrm)
            )
            lines.append("    outer loop")
            for p in corners:
                lines.append("      vertex {:.17g} {:.17g} {:.17g}".format(*p))
            lines.append("    endloop")
            lines.append("  endfacet")
        lines.append("endsolid shapemanifold")
        return ("\n".join(lines) + "\n").encode("ascii")
    raise ValueError(f"unknown STL format {fmt!r}")


def flatten(mesh: TriMesh) -> np.ndarray:
    """Mesh coordinates as one flat vector (x1, y1, z1, x2, ...)."""
    if mesh.vertex_count == 0:
        raise EmptyMesh("cannot flatten a mesh without vertices")
    return mesh.vertices.reshape(-1).copy()


def unflatten(values: np.ndarray, reference: TriMesh) -> TriMesh:
    """Rebuild a mesh from a flat coordinate vector.

    Connectivity and weld tolerance are taken from ``reference``; only the
    vertex positions change, which is exactly the guarantee the morphing
    map provides.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size != 3 * reference.vertex_count:
        raise DimensionMismatch(
            f"vector length {values.size} does not match "
            f"3 x {reference.vertex_count} vertices"
        )
    return TriMesh(
        values.reshape(-1, 3),
        reference.facets,
        weld_tolerance=reference.weld_tolerance,
    )
