"""Non-intrusive surrogate of the solver output.

The solution fields are reduced with the same orthonormal decomposition
used for geometries, and the resulting modal coefficients (plus the
scalar objective) are interpolated over the parameter space with radial
basis functions. Querying the surrogate at a new parameter point costs
one small interpolation plus one reconstruction product, independent of
the solver.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import pod
from .errors import DuplicateParams, SingularSystem

_KERNELS = ("gaussian", "thin-plate", "linear-rbf")
_COND_LIMIT = 1e14
_RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True)
class SolutionDatabase:
    """Parameter rows, solution fields (one row per sample), objectives."""

    params: np.ndarray
    fields: np.ndarray
    objectives: np.ndarray

    def __post_init__(self):
        params = np.atleast_2d(np.asarray(self.params, dtype=float))
        fields = np.atleast_2d(np.asarray(self.fields, dtype=float))
        objectives = np.asarray(self.objectives, dtype=float).reshape(-1)
        m = params.shape[0]
        if fields.shape[0] != m or objectives.size != m:
            raise ValueError("database row counts disagree")
        if not (np.isfinite(params).all() and np.isfinite(fields).all()):
            raise ValueError("database entries must be finite")
        for i in range(m):
            for j in range(i + 1, m):
                if np.max(np.abs(params[i] - params[j])) < 1e-12:
                    raise DuplicateParams(
                        f"parameter rows {i} and {j} coincide within 1e-12"
                    )
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "objectives", objectives)

    @property
    def count(self) -> int:
        return self.params.shape[0]

    def without(self, index: int) -> "SolutionDatabase":
        keep = [i for i in range(self.count) if i != index]
        return SolutionDatabase(
            self.params[keep], self.fields[keep], self.objectives[keep]
        )


def _pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def _kernel_matrix(kernel: str, r: np.ndarray, epsilon: float) -> np.ndarray:
    if kernel == "gaussian":
        return np.exp(-((epsilon * r) ** 2))
    if kernel == "linear-rbf":
        return r
    if kernel == "thin-plate":
        out = np.zeros_like(r)
        mask = r > 0.0
        out[mask] = r[mask] ** 2 * np.log(r[mask])
        return out
    raise ValueError(f"unknown kernel {kernel!r}")


def default_epsilon(nodes: np.ndarray) -> float:
    """Shape parameter heuristic: inverse mean nearest-neighbor distance."""
    if nodes.shape[0] < 2:
        return 1.0
    dist = _pairwise_distances(nodes, nodes)
    np.fill_diagonal(dist, np.inf)
    mean_nn = float(dist.min(axis=1).mean())
    return 1.0 / mean_nn if mean_nn > 0.0 else 1.0


@dataclass(frozen=True)
class Interpolator:
    """Fitted RBF interpolant from d-dimensional nodes to q outputs.

    ``tail`` holds the affine polynomial coefficients used by the
    thin-plate kernel (None for the others).
    """

    kernel: str
    epsilon: float
    nodes: np.ndarray
    weights: np.ndarray
    tail: np.ndarray | None = None

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        phi = _kernel_matrix(
            self.kernel, _pairwise_distances(x, self.nodes), self.epsilon
        )
        out = phi @ self.weights
        if self.tail is not None:
            p = np.column_stack([np.ones(x.shape[0]), x])
            out = out + p @ self.tail
        return out

    @property
    def output_dim(self) -> int:
        return self.weights.shape[1]


def fit_interpolator(
    nodes: np.ndarray,
    values: np.ndarray,
    kernel: str = "gaussian",
    epsilon: float | None = None,
) -> Interpolator:
    """Solve the dense RBF system for scattered data.

    The thin-plate kernel is augmented with an affine tail and the usual
    orthogonality constraints. The symmetric system is solved directly; a
    condition estimate above 1e14 or a node-reproduction residual above
    1e-8 (relative) raises ``SingularSystem``, which usually means the
    shape parameter should change.
    """
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    m = nodes.shape[0]
    if m < 1 or values.shape[0] != m:
        raise ValueError("need one value row per node")
    if kernel not in _KERNELS:
        raise ValueError(f"kernel must be one of {_KERNELS}")
    dist = _pairwise_distances(nodes, nodes)
    off_diag = dist + np.diag(np.full(m, np.inf))
    if m > 1 and off_diag.min() == 0.0:
        raise ValueError("interpolation nodes must be distinct")
    if epsilon is None:
        epsilon = default_epsilon(nodes)
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")

    k = _kernel_matrix(kernel, dist, epsilon)
    if kernel == "thin-plate":
        p = np.column_stack([np.ones(m), nodes])
        n_tail = p.shape[1]
        system = np.zeros((m + n_tail, m + n_tail))
        system[:m, :m] = k
        system[:m, m:] = p
        system[m:, :m] = p.T
        rhs = np.vstack([values, np.zeros((n_tail, values.shape[1]))])
    else:
        system = k
        rhs = values

    if np.linalg.cond(system) > _COND_LIMIT:
        raise SingularSystem(
            "interpolation system condition number exceeds 1e14; "
            "adjust the kernel shape parameter"
        )
    try:
        solution = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"interpolation system is singular: {exc}") from exc

    if kernel == "thin-plate":
        interp = Interpolator(kernel, epsilon, nodes, solution[:m], solution[m:])
    else:
        interp = Interpolator(kernel, epsilon, nodes, solution)
    residual = np.abs(interp(nodes) - values)
    scale = 1.0 + np.abs(values).max(initial=0.0)
    if values.size and residual.max() > _RESIDUAL_RTOL * scale:
        raise SingularSystem(
            f"node reproduction residual {residual.max():.2e} exceeds "
            f"{_RESIDUAL_RTOL:.0e} relative; adjust the kernel shape parameter"
        )
    return interp


@dataclass(frozen=True)
class RomModel:
    """Reduced basis of the solution fields plus fitted interpolators.

    The objective is interpolated independently of the field, around its
    training mean so a constant database predicts that constant
    everywhere.
    """

    basis: pod.PodBasis
    coefficients: Interpolator
    objective: Interpolator
    objective_mean: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.coefficients.output_dim != self.basis.rank:
            raise ValueError("interpolator output does not match mode count")


def build_rom(
    db: SolutionDatabase,
    rule: pod.TruncationRule,
    kernel: str = "gaussian",
    epsilon: float | None = None,
    metadata: dict | None = None,
) -> RomModel:
    """Offline phase: reduce the fields and fit the coefficient maps."""
    if db.count < 2:
        raise ValueError("need at least two snapshots to build a model")
    matrix, center = pod.assemble(list(db.fields), centering="mean")
    basis = pod.truncate(pod.compute_pod(matrix, center=center), rule)
    coeffs = (basis.modes.T @ matrix).T  # training coefficients, one row per sample
    coeff_interp = fit_interpolator(db.params, coeffs, kernel, epsilon)
    obj_mean = float(db.objectives.mean())
    obj_interp = fit_interpolator(
        db.params, db.objectives - obj_mean, kernel, epsilon
    )
    meta = {
        "snapshot_count": db.count,
        "mode_count": basis.rank,
        "kernel": kernel,
        "epsilon": coeff_interp.epsilon,
    }
    if metadata:
        meta.update(metadata)
    return RomModel(basis, coeff_interp, obj_interp, obj_mean, meta)


def predict(model: RomModel, mu) -> tuple[np.ndarray, float]:
    """Online phase: field and objective at a new parameter point.

    Extrapolation outside the training bounding box warns but proceeds;
    surrogate accuracy degrades away from the data.
    """
    mu = np.asarray(mu, dtype=float).reshape(1, -1)
    nodes = model.coefficients.nodes
    if np.any(mu < nodes.min(axis=0)) or np.any(mu > nodes.max(axis=0)):
        warnings.warn(
            "parameter point outside the training range; extrapolating",
            stacklevel=2,
        )
    alpha = model.coefficients(mu)[0]
    value = model.basis.center + model.basis.modes @ alpha
    objective = model.objective_mean + float(model.objective(mu)[0, 0])
    return value, objective


def loo_error(
    db: SolutionDatabase,
    rule: pod.TruncationRule,
    kernel: str = "gaussian",
    epsilon: float | None = None,
):
    """Leave-one-out validation of the surrogate.

    For each sample the model is rebuilt without it and asked to predict
    it back; reported errors are relative L2 (absolute where the truth is
    zero). Returns the per-sample errors and a mean/max summary.
    """
    if db.count < 3:
        raise ValueError("leave-one-out needs at least three samples")
    errors = np.empty(db.count)
    with warnings.catch_warnings():
        # Removing an extreme sample makes its prediction an extrapolation
        # by construction; that is the point of the test, not a problem.
        warnings.simplefilter("ignore")
        for i in range(db.count):
            model = build_rom(db.without(i), rule, kernel, epsilon)
            predicted, _ = predict(model, db.params[i])
            truth = db.fields[i]
            denom = np.linalg.norm(truth)
            diff = np.linalg.norm(predicted - truth)
            errors[i] = diff / denom if denom > 0.0 else diff
    return errors, {"mean": float(errors.mean()), "max": float(errors.max())}
