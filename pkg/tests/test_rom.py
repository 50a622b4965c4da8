import math

import numpy as np
import pytest

from shapemanifold.errors import DuplicateParams, SingularSystem
from shapemanifold.pod import TruncationRule
from shapemanifold.rom import (
    SolutionDatabase,
    build_rom,
    fit_interpolator,
    loo_error,
    predict,
)


def linear_span_database(m=12, n=60, seed=0) -> SolutionDatabase:
    # Fields confined to a two-mode linear span over 2-D parameters.
    rng = np.random.default_rng(seed)
    params = rng.uniform(-1, 1, (m, 2))
    u = rng.standard_normal(n)
    v = rng.standard_normal(n)
    fields = np.array([3.0 + p[0] * u + p[1] * v for p in params])
    objectives = params[:, 0] ** 2 + params[:, 1]
    return SolutionDatabase(params, fields, objectives)


class TestSolutionDatabase:
    def test_duplicate_params_rejected(self):
        with pytest.raises(DuplicateParams):
            SolutionDatabase(
                np.array([[1.0, 2.0], [1.0, 2.0]]),
                np.ones((2, 4)),
                np.zeros(2),
            )

    def test_row_count_mismatch(self):
        with pytest.raises(ValueError):
            SolutionDatabase(np.ones((3, 2)), np.ones((2, 4)), np.zeros(3))


class TestFitInterpolator:
    def test_single_node_constant(self):
        interp = fit_interpolator(np.array([[0.5]]), np.array([3.0]), "gaussian")
        # The single gaussian weight is value / phi(0) = value.
        assert interp.weights[0, 0] == pytest.approx(3.0)
        assert interp([[0.5]])[0, 0] == pytest.approx(3.0)

    def test_two_node_hand_system(self):
        # Gaussian, nodes 0 and 1 in 1-D, values 0 and 1, epsilon 1:
        # [[1, e^-1], [e^-1, 1]] w = [0, 1], solved by hand.
        interp = fit_interpolator(
            np.array([[0.0], [1.0]]), np.array([0.0, 1.0]), "gaussian", epsilon=1.0
        )
        e1 = math.exp(-1.0)
        det = 1.0 - e1 * e1
        np.testing.assert_allclose(
            interp.weights[:, 0], [-e1 / det, 1.0 / det], rtol=1e-12
        )

    @pytest.mark.parametrize("kernel", ["gaussian", "thin-plate", "linear-rbf"])
    def test_node_reproduction(self, kernel):
        rng = np.random.default_rng(1)
        nodes = rng.uniform(-2, 2, (15, 2))
        values = rng.standard_normal((15, 3))
        interp = fit_interpolator(nodes, values, kernel)
        fitted = interp(nodes)
        scale = 1.0 + np.abs(values).max()
        assert np.abs(fitted - values).max() <= 1e-8 * scale

    def test_near_flat_gaussian_raises(self):
        nodes = np.arange(6.0)[:, None]
        values = np.arange(6.0)
        with pytest.raises(SingularSystem):
            fit_interpolator(nodes, values, "gaussian", epsilon=1e-8)

    def test_coincident_nodes_rejected(self):
        nodes = np.array([[0.0], [0.0]])
        with pytest.raises(ValueError):
            fit_interpolator(nodes, np.array([1.0, 2.0]), "gaussian")

    def test_linear_kernel_is_piecewise_linear_in_1d(self):
        nodes = np.array([[0.0], [1.0], [2.0]])
        values = np.array([0.0, 1.0, 0.5])
        interp = fit_interpolator(nodes, values, "linear-rbf")
        assert interp([[0.5]])[0, 0] == pytest.approx(0.5, abs=1e-12)
        assert interp([[1.5]])[0, 0] == pytest.approx(0.75, abs=1e-12)

    def test_thin_plate_reproduces_affine(self):
        rng = np.random.default_rng(2)
        nodes = rng.uniform(-1, 1, (12, 2))
        values = 2.0 * nodes[:, 0] - 0.5 * nodes[:, 1] + 1.0
        interp = fit_interpolator(nodes, values, "thin-plate")
        probes = rng.uniform(-0.8, 0.8, (20, 2))
        expected = 2.0 * probes[:, 0] - 0.5 * probes[:, 1] + 1.0
        np.testing.assert_allclose(interp(probes)[:, 0], expected, atol=1e-7)


class TestBuildRomPredict:
    def test_identical_fields_constant_model(self):
        params = np.linspace(0, 1, 4)[:, None]
        fields = np.tile([1.0, 2.0, 3.0], (4, 1))
        db = SolutionDatabase(params, fields, np.full(4, 7.0))
        model = build_rom(db, TruncationRule.energy(0.9999))
        assert model.basis.rank == 0
        field, objective = predict(model, [0.37])
        np.testing.assert_allclose(field, [1.0, 2.0, 3.0])
        assert objective == pytest.approx(7.0, abs=1e-12)

    def test_two_mode_span_recovered(self):
        db = linear_span_database()
        model = build_rom(db, TruncationRule.energy(1.0 - 1e-12))
        assert model.basis.rank == 2

    def test_prediction_at_training_node(self):
        db = linear_span_database()
        model = build_rom(db, TruncationRule.energy(1.0 - 1e-12))
        for i in range(db.count):
            field, objective = predict(model, db.params[i])
            truth = db.fields[i]
            assert np.linalg.norm(field - truth) <= 1e-8 * np.linalg.norm(truth)
            assert objective == pytest.approx(db.objectives[i], abs=1e-8)

    def test_truncation_residual_bound(self):
        # With truncation, the prediction at a node differs from the truth
        # by exactly that field's projection residual (plus solver noise).
        rng = np.random.default_rng(3)
        params = rng.uniform(-1, 1, (10, 2))
        fields = rng.standard_normal((10, 40))
        db = SolutionDatabase(params, fields, rng.standard_normal(10))
        model = build_rom(db, TruncationRule.fixed(3))
        modes = model.basis.modes
        center = model.basis.center
        for i in range(db.count):
            field, _ = predict(model, db.params[i])
            truth = db.fields[i]
            residual = truth - center - modes @ (modes.T @ (truth - center))
            gap = np.linalg.norm(field - truth) - np.linalg.norm(residual)
            assert abs(gap) <= 1e-8 * (1 + np.linalg.norm(truth))

    def test_extrapolation_warns(self):
        db = linear_span_database()
        model = build_rom(db, TruncationRule.energy(0.9999))
        with pytest.warns(UserWarning):
            predict(model, [5.0, 5.0])

    def test_midpoint_linear_kernel_1d(self):
        # In 1-D the linear kernel is piecewise linear, so the coefficients
        # at the midpoint of two nodes are the mean of the node coefficients.
        params = np.array([[0.0], [1.0]])
        fields = np.array([[1.0, 0.0, 2.0], [3.0, 4.0, 2.0]])
        db = SolutionDatabase(params, fields, np.array([0.0, 1.0]))
        model = build_rom(db, TruncationRule.energy(1.0), kernel="linear-rbf")
        field, objective = predict(model, [0.5])
        np.testing.assert_allclose(field, fields.mean(axis=0), atol=1e-10)
        assert objective == pytest.approx(0.5, abs=1e-10)


class TestLooError:
    def test_linear_fields_small_interior_error(self):
        # Fields exactly linear in a 1-D parameter: removing an interior
        # node changes nothing for the piecewise-linear kernel.
        params = np.linspace(0.0, 1.0, 9)[:, None]
        direction = np.array([1.0, -2.0, 0.5, 3.0])
        base = np.array([5.0, 1.0, 0.0, -1.0])
        fields = base + params * direction
        db = SolutionDatabase(params, fields, params[:, 0])
        errors, summary = loo_error(
            db, TruncationRule.energy(1.0 - 1e-12), kernel="linear-rbf"
        )
        interior = errors[1:-1]
        assert interior.max() < 1e-8
        assert summary["max"] == errors.max()

    def test_identical_fields_zero_error(self):
        params = np.linspace(0, 1, 3)[:, None]
        fields = np.tile([2.0, 2.0, 1.0], (3, 1))
        db = SolutionDatabase(params, fields, np.ones(3))
        errors, summary = loo_error(db, TruncationRule.energy(0.9999))
        assert np.all(errors == 0.0)
        assert summary["mean"] == 0.0

    def test_corner_error_dominates(self):
        rng = np.random.default_rng(4)
        params = np.linspace(0.0, 1.0, 8)[:, None]
        fields = np.sin(3.0 * params) + 0.5 * params**2 + rng.standard_normal(4) * 0.0
        fields = np.repeat(fields, 4, axis=1)
        db = SolutionDatabase(params, fields, params[:, 0])
        errors, _ = loo_error(db, TruncationRule.energy(1.0 - 1e-12), kernel="linear-rbf")
        # Endpoints extrapolate; reported, larger than the typical interior one.
        assert errors[0] > np.median(errors[1:-1])

    def test_needs_three_samples(self):
        db = SolutionDatabase(
            np.array([[0.0], [1.0]]), np.ones((2, 3)), np.zeros(2)
        )
        with pytest.raises(ValueError):
            loo_error(db, TruncationRule.energy(0.9999))
