"""Shared test fixtures: synthetic meshes and independent oracles.

The oracles deliberately avoid the code paths they are used to check:
the SVD oracle is a one-sided Jacobi iteration, point-in-polygon is ray
casting, and the least-squares oracle uses the raw-sum formulas.
"""

from __future__ import annotations

import math

import numpy as np

from shapemanifold.mesh import TriMesh


# ---------------------------------------------------------------------------
# Synthetic geometry.


def make_sphere(rings: int, segments: int, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Welded UV sphere with (rings - 1) * segments + 2 vertices."""
    cx, cy, cz = center
    vertices = [(cx, cy, cz + radius)]
    for i in range(1, rings):
        phi = math.pi * i / rings
        for j in range(segments):
            theta = 2.0 * math.pi * j / segments
            vertices.append(
                (
                    cx + radius * math.sin(phi) * math.cos(theta),
                    cy + radius * math.sin(phi) * math.sin(theta),
                    cz + radius * math.cos(phi),
                )
            )
    vertices.append((cx, cy, cz - radius))
    top, bottom = 0, len(vertices) - 1

    def ring_vertex(i, j):
        return 1 + (i - 1) * segments + (j % segments)

    facets = []
    for j in range(segments):
        facets.append((top, ring_vertex(1, j), ring_vertex(1, j + 1)))
    for i in range(1, rings - 1):
        for j in range(segments):
            a = ring_vertex(i, j)
            b = ring_vertex(i, j + 1)
            c = ring_vertex(i + 1, j)
            d = ring_vertex(i + 1, j + 1)
            facets.append((a, c, b))
            facets.append((b, c, d))
    for j in range(segments):
        facets.append((bottom, ring_vertex(rings - 1, j + 1), ring_vertex(rings - 1, j)))
    return TriMesh(np.array(vertices), np.array(facets))


def make_tetra() -> TriMesh:
    vertices = np.array(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    )
    facets = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
    return TriMesh(vertices, facets)


def ascii_stl_one_facet() -> bytes:
    return (
        b"solid test\n"
        b"  facet normal 0 0 1\n"
        b"    outer loop\n"
        b"      vertex 0 0 0\n"
        b"      vertex 1 0 0\n"
        b"      vertex 0 1 0\n"
        b"    endloop\n"
        b"  endfacet\n"
        b"endsolid test\n"
    )


# ---------------------------------------------------------------------------
# Independent numerical oracles.


def jacobi_singular_values(a: np.ndarray, sweeps: int = 100, tol: float = 1e-15) -> np.ndarray:
    """Brute-force one-sided Jacobi SVD: rotate column pairs until all are
    mutually orthogonal, then read singular values off the column norms."""
    w = np.array(a, dtype=float, copy=True)
    m = w.shape[1]
    for _ in range(sweeps):
        off = 0.0
        for p in range(m - 1):
            for q in range(p + 1, m):
                app = float(w[:, p] @ w[:, p])
                aqq = float(w[:, q] @ w[:, q])
                apq = float(w[:, p] @ w[:, q])
                denom = math.sqrt(app * aqq)
                if denom == 0.0 or abs(apq) <= tol * denom:
                    continue
                off = max(off, abs(apq) / denom)
                tau = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                wp = w[:, p].copy()
                wq = w[:, q].copy()
                w[:, p] = c * wp - s * wq
                w[:, q] = s * wp + c * wq
        if off <= tol:
            break
    sigma = np.linalg.norm(w, axis=0)
    return np.sort(sigma)[::-1]


def ray_cast_inside(point, vertices: np.ndarray, tol: float = 1e-9) -> bool:
    """Point-in-polygon by horizontal ray casting, with an explicit
    on-boundary check so the test is boundary-inclusive."""
    px, py = float(point[0]), float(point[1])
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    scale = max(1.0, float(np.abs(v).max()))
    for i in range(n):
        if segment_distance_oracle((px, py), v[i], v[(i + 1) % n]) <= tol * scale:
            return True
    crossings = 0
    for i in range(n):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % n]
        if (y1 > py) != (y2 > py):
            x_at = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if x_at > px:
                crossings += 1
    return crossings % 2 == 1


def segment_distance_oracle(p, a, b) -> float:
    px, py = float(p[0]), float(p[1])
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    dx, dy = bx - ax, by - ay
    length_sq = dx * dx + dy * dy
    if length_sq == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / length_sq
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def ols_oracle(x, y):
    """Least squares through the raw-sum formulas (no centering)."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(x)
    sx = sum(x)
    sy = sum(y)
    sxy = sum(a * b for a, b in zip(x, y))
    sxx = sum(a * a for a in x)
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    intercept = (sy - slope * sx) / n
    ybar = sy / n
    ss_res = sum((b - slope * a - intercept) ** 2 for a, b in zip(x, y))
    ss_tot = sum((b - ybar) ** 2 for b in y)
    r2 = 1.0 - ss_res / ss_tot
    return slope, intercept, r2
