"""Snapshot matrices and SVD-based orthonormal bases.

Shared by the geometry pipeline (coordinates of deformed meshes) and the
solution pipeline (solver output fields). State dimension is written N,
snapshot count M; snapshots are matrix columns.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyBasis, EmptyDatabase

# Retained modes: drop singular values below this fraction of the largest.
RANK_CUTOFF = 1e-12
_ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class PodBasis:
    """Orthonormal modes, their singular values, and the centering vector.

    ``modes`` is N x r with orthonormal columns; ``center`` was subtracted
    from every snapshot before the decomposition (all zeros when no
    centering was requested).
    """

    modes: np.ndarray
    singular_values: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=float)
        sigma = np.asarray(self.singular_values, dtype=float).reshape(-1)
        center = np.asarray(self.center, dtype=float).reshape(-1)
        if modes.ndim != 2:
            raise ValueError("modes must be a 2-D array")
        if modes.shape[1] != sigma.size:
            raise ValueError("mode count does not match singular value count")
        if center.size != modes.shape[0]:
            raise DimensionMismatch("center length does not match state dimension")
        if sigma.size:
            if np.any(sigma < 0.0):
                raise ValueError("singular values must be non-negative")
            if np.any(np.diff(sigma) > 1e-12 * sigma[0]):
                raise ValueError("singular values must be non-increasing")
            defect = np.abs(modes.T @ modes - np.eye(sigma.size)).max()
            if defect > _ORTHO_TOL:
                raise ValueError(f"modes are not orthonormal (defect {defect:.2e})")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "singular_values", sigma)
        object.__setattr__(self, "center", center)

    @property
    def rank(self) -> int:
        return self.singular_values.size

    @property
    def state_dim(self) -> int:
        return self.modes.shape[0]


@dataclass(frozen=True)
class TruncationRule:
    """Keep a fixed number of modes, or enough for an energy fraction.

    Exactly one of ``fixed_count`` and ``energy_threshold`` must be set.
    Energy is cumulative squared singular values over their total.
    """

    fixed_count: int | None = None
    energy_threshold: float | None = None

    def __post_init__(self):
        has_fixed = self.fixed_count is not None
        has_energy = self.energy_threshold is not None
        if has_fixed == has_energy:
            raise ValueError("set exactly one of fixed_count and energy_threshold")
        if has_fixed and self.fixed_count < 1:
            raise ValueError("fixed_count must be >= 1")
        if has_energy and not 0.0 < self.energy_threshold <= 1.0:
            raise ValueError("energy_threshold must be in (0, 1]")

    @classmethod
    def fixed(cls, count: int) -> "TruncationRule":
        return cls(fixed_count=count)

    @classmethod
    def energy(cls, threshold: float) -> "TruncationRule":
        return cls(energy_threshold=threshold)

    def select(self, singular_values: np.ndarray) -> int:
        """Number of leading modes to keep for the given spectrum."""
        sigma = np.asarray(singular_values, dtype=float).reshape(-1)
        if sigma.size == 0:
            return 0
        if self.fixed_count is not None:
            if self.fixed_count > sigma.size:
                warnings.warn(
                    f"requested {self.fixed_count} modes but only "
                    f"{sigma.size} are available",
                    stacklevel=2,
                )
            return min(self.fixed_count, sigma.size)
        energy = np.cumsum(sigma**2)
        energy /= energy[-1]
        return int(np.searchsorted(energy, self.energy_threshold - 1e-15) + 1)


def assemble(snapshots, centering="none"):
    """Stack snapshot vectors into a centered N x M matrix.

    Parameters
    ----------
    snapshots : sequence of 1-D arrays
        All of one common length.
    centering : "none", "mean", or a 1-D array
        What to subtract from every column; an explicit array centers on a
        reference state.

    Returns
    -------
    (matrix, center)
        The centered columns and the vector that was subtracted.
    """
    cols = [np.asarray(s, dtype=float).reshape(-1) for s in snapshots]
    if not cols:
        raise EmptyDatabase("no snapshots to assemble")
    length = cols[0].size
    if any(c.size != length for c in cols):
        raise DimensionMismatch("snapshots have differing lengths")
    matrix = np.column_stack(cols)
    if isinstance(centering, str):
        if centering == "none":
            center = np.zeros(length)
        elif centering == "mean":
            center = matrix.mean(axis=1)
        else:
            raise ValueError(f"unknown centering mode {centering!r}")
    else:
        center = np.asarray(centering, dtype=float).reshape(-1)
        if center.size != length:
            raise DimensionMismatch("centering vector length does not match snapshots")
    return matrix - center[:, None], center


def _fix_signs(modes: np.ndarray) -> np.ndarray:
    # Each mode's entry of largest magnitude is made non-negative, so
    # repeated runs (and different LAPACK builds) agree on orientation.
    for j in range(modes.shape[1]):
        k = int(np.argmax(np.abs(modes[:, j])))
        if modes[k, j] < 0.0:
            modes[:, j] = -modes[:, j]
    return modes


def compute_pod(matrix: np.ndarray, center: np.ndarray | None = None) -> PodBasis:
    """Left singular vectors and singular values of a snapshot matrix.

    Tall matrices (N >= M) go through the M x M Gram matrix (method of
    snapshots): eigenvectors of the Gram matrix span the dominant
    subspace, which is then re-orthonormalized and finished with a small
    dense SVD so the returned triples are accurate to machine precision.
    The cost is O(N M^2) and no N x N operator is ever formed. Singular
    values below sqrt(machine eps) of the largest are numerically
    invisible through the Gram matrix and count as rank deficiency.

    Singular values below ``RANK_CUTOFF`` times the largest are dropped;
    a zero matrix yields an empty basis.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise ValueError("snapshot matrix must be 2-D")
    n, m = a.shape
    if center is None:
        center = np.zeros(n)

    if n >= m:
        gram = a.T @ a
        lam, phi = np.linalg.eigh(gram)
        lam = lam[::-1]
        phi = phi[:, ::-1]
        floor = max(lam[0], 0.0) * m * np.finfo(float).eps
        keep = lam > floor
        if not keep.any():
            return PodBasis(np.zeros((n, 0)), np.zeros(0), center)
        q, _ = np.linalg.qr(a @ phi[:, keep])
        small = q.T @ a
        u_small, sigma, _ = np.linalg.svd(small, full_matrices=False)
        modes = q @ u_small
    else:
        modes, sigma, _ = np.linalg.svd(a, full_matrices=False)

    if sigma.size == 0 or sigma[0] <= 0.0:
        return PodBasis(np.zeros((n, 0)), np.zeros(0), center)
    keep = sigma >= RANK_CUTOFF * sigma[0]
    modes = _fix_signs(np.ascontiguousarray(modes[:, keep]))
    return PodBasis(modes, sigma[keep], center)


def truncate(basis: PodBasis, rule: TruncationRule) -> PodBasis:
    """Leading-mode truncation; counts above the rank clamp with a warning."""
    count = rule.select(basis.singular_values)
    if count == basis.rank:
        return basis
    return PodBasis(
        basis.modes[:, :count], basis.singular_values[:count], basis.center
    )


def project(basis: PodBasis, v: np.ndarray) -> np.ndarray:
    """Modal coefficients of one snapshot: modes' inner products after centering."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != basis.state_dim:
        raise DimensionMismatch(
            f"snapshot length {v.size} does not match state dimension {basis.state_dim}"
        )
    return basis.modes.T @ (v - basis.center)


def reconstruct(basis: PodBasis, alpha: np.ndarray) -> np.ndarray:
    """Snapshot from modal coefficients: center plus the modal expansion."""
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.size != basis.rank:
        raise DimensionMismatch(
            f"coefficient length {alpha.size} does not match rank {basis.rank}"
        )
    return basis.center + basis.modes @ alpha


def decay_report(basis: PodBasis) -> np.ndarray:
    """Per-mode decay table: (index, sigma, sigma/sigma1, cumulative energy).

    Indices are 1-based; the cumulative energy of the last row is 1.
    """
    if basis.rank == 0:
        raise EmptyBasis("no modes to report")
    sigma = basis.singular_values
    energy = np.cumsum(sigma**2)
    energy /= energy[-1]
    return np.column_stack(
        [np.arange(1, sigma.size + 1), sigma, sigma / sigma[0], energy]
    )
