import numpy as np
import pytest

from shapemanifold.errors import (
    CollinearPoints,
    DegenerateAbscissa,
    DegenerateTrainingSet,
    InfeasibleRegion,
    OutOfRegion,
)
from shapemanifold.ffd import FfdConfig, MapEntry, ParamMap, apply_params, default_config, morph_mesh
from shapemanifold.manifold import (
    DependencyModel,
    FeasiblePolygon,
    ReducedSpace,
    build_geometry_pod,
    build_reduced_space,
    decode,
    detect_dependencies,
    fit_feasible_polygon,
    linear_fit,
    point_in_polygon,
    sample_ffd_params,
    sample_reduced,
)
from shapemanifold.mesh import flatten
from shapemanifold.pod import TruncationRule

from helpers import make_sphere, ols_oracle, ray_cast_inside


class TestSampleFfdParams:
    def test_shape_and_range(self):
        box = np.tile([-0.3, 0.3], (5, 1))
        params = sample_ffd_params(1500, box, seed=42)
        assert params.shape == (1500, 5)
        assert params.min() >= -0.3 and params.max() <= 0.3

    def test_degenerate_box(self):
        box = np.zeros((5, 2))
        params = sample_ffd_params(10, box, seed=1)
        assert np.all(params == 0.0)

    def test_seed_determinism(self):
        box = np.tile([-1.0, 2.0], (3, 1))
        a = sample_ffd_params(50, box, seed=7)
        b = sample_ffd_params(50, box, seed=7)
        np.testing.assert_array_equal(a, b)


class TestBuildGeometryPod:
    def test_zero_params_degenerate(self):
        mesh = make_sphere(5, 6)
        cfg = default_config(mesh)
        with pytest.raises(DegenerateTrainingSet):
            build_geometry_pod(mesh, cfg, np.zeros((5, 5)))

    def test_single_entry_rank_one(self):
        # One parameter, one control point: the snapshot matrix is the
        # outer product of a fixed displacement field with the sampled
        # parameter values. Checked against that direct construction.
        mesh = make_sphere(6, 8)
        entries = (MapEntry(0, (1, 1, 1), 0, 1.0),)
        cfg = FfdConfig(
            origin=mesh.bounding_box()[:, 0],
            axes=np.diag(np.ptp(mesh.vertices, axis=0)),
            dims=(2, 2, 2),
            param_map=ParamMap(entries, param_dim=5),
        )
        params = np.zeros((20, 5))
        params[:, 0] = np.linspace(-0.3, 0.3, 20)
        basis, alpha = build_geometry_pod(mesh, cfg, params)
        assert basis.rank == 1
        with pytest.warns(UserWarning):  # unit parameter leaves the box
            unit_field = flatten(morph_mesh(mesh, apply_params(cfg, [1, 0, 0, 0, 0])))
        unit_field -= flatten(mesh)
        direct = np.outer(unit_field, params[:, 0])
        sigma_direct = np.linalg.norm(unit_field) * np.linalg.norm(params[:, 0])
        assert basis.singular_values[0] == pytest.approx(sigma_direct, rel=1e-10)
        rebuilt = basis.modes @ alpha.T
        np.testing.assert_allclose(rebuilt, direct, atol=1e-10 * sigma_direct)

    def test_default_config_three_modes(self):
        # The shipped five-parameter map spans exactly three displacement
        # directions; a large sample recovers that intrinsic dimension.
        mesh = make_sphere(8, 10)
        cfg = default_config(mesh)
        params = sample_ffd_params(1500, cfg.bounds, seed=3)
        basis, alpha = build_geometry_pod(
            mesh, cfg, params, TruncationRule.energy(0.9999)
        )
        assert basis.rank == 3
        assert alpha.shape == (1500, 3)

    def test_reduction_fidelity(self):
        # Frobenius-aggregate relative reconstruction error must equal the
        # tail-energy fraction of the spectrum.
        mesh = make_sphere(6, 8)
        cfg = default_config(mesh)
        params = sample_ffd_params(100, cfg.bounds, seed=4)
        basis, alpha = build_geometry_pod(mesh, cfg, params)
        sigma = basis.singular_values
        kept = 2
        ref = flatten(mesh)
        num = 0.0
        den = 0.0
        for i, mu in enumerate(params):
            snap = flatten(morph_mesh(mesh, apply_params(cfg, mu))) - ref
            approx = basis.modes[:, :kept] @ alpha[i, :kept]
            num += np.linalg.norm(snap - approx) ** 2
            den += np.linalg.norm(snap) ** 2
        measured = np.sqrt(num / den)
        expected = np.sqrt((sigma[kept:] ** 2).sum() / (sigma**2).sum())
        assert measured == pytest.approx(expected, abs=1e-8)


class TestLinearFit:
    def test_exact_line(self):
        slope, intercept, r2 = linear_fit([0, 1, 2], [1, 3, 5])
        assert slope == pytest.approx(2.0)
        assert intercept == pytest.approx(1.0)
        assert r2 == pytest.approx(1.0)

    def test_four_point_case_against_oracle(self):
        x = [0.0, 1.0, 2.0, 3.0]
        y = [0.0, 1.0, 2.0, 10.0]
        slope, intercept, r2 = linear_fit(x, y)
        o_slope, o_intercept, o_r2 = ols_oracle(x, y)
        # Frozen from the raw-sum oracle: 3.1, -1.4, 0.76574 (to 5 places).
        assert o_slope == pytest.approx(3.1, abs=1e-12)
        assert o_intercept == pytest.approx(-1.4, abs=1e-12)
        assert slope == pytest.approx(o_slope, abs=1e-12)
        assert intercept == pytest.approx(o_intercept, abs=1e-12)
        assert r2 == pytest.approx(o_r2, abs=1e-12)

    def test_constant_ordinate(self):
        slope, intercept, r2 = linear_fit([0, 1, 2], [4.0, 4.0, 4.0])
        assert (slope, intercept, r2) == (0.0, 4.0, 1.0)

    def test_degenerate_abscissa(self):
        with pytest.raises(DegenerateAbscissa):
            linear_fit([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])


class TestDetectDependencies:
    def test_exact_dependency(self):
        rng = np.random.default_rng(0)
        a0 = rng.uniform(-1, 1, 300)
        alpha = np.column_stack([a0, 2.0 * a0, rng.uniform(-1, 1, 300)])
        model = detect_dependencies(alpha, r2_threshold=0.99)
        assert model.status[0] is None
        dep = model.status[1]
        assert dep.source == 0
        assert dep.slope == pytest.approx(2.0, abs=1e-9)
        assert dep.intercept == pytest.approx(0.0, abs=1e-9)
        assert dep.r2 >= 1.0 - 1e-12
        assert model.status[2] is None
        assert model.free_indices == (0, 2)

    def test_independent_noise_all_free(self):
        rng = np.random.default_rng(1)
        alpha = rng.uniform(-1, 1, (500, 3))
        model = detect_dependencies(alpha, r2_threshold=0.99)
        assert model.free_indices == (0, 1, 2)

    def test_single_coefficient(self):
        model = detect_dependencies(np.ones((5, 1)), r2_threshold=0.99)
        assert model.free_indices == (0,)

    def test_expand(self):
        rng = np.random.default_rng(2)
        a0 = rng.uniform(-1, 1, 100)
        alpha = np.column_stack([a0, -0.5 * a0 + 0.25, rng.uniform(-1, 1, 100)])
        model = detect_dependencies(alpha, r2_threshold=0.99)
        full = model.expand([2.0, 7.0])
        np.testing.assert_allclose(full, [2.0, -0.75, 7.0], atol=1e-9)

    def test_few_samples_warns(self):
        with pytest.warns(UserWarning):
            model = detect_dependencies(np.ones((2, 3)), r2_threshold=0.99)
        assert model.free_indices == (0, 1, 2)


class TestFeasiblePolygon:
    def test_unit_square(self):
        corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        poly = fit_feasible_polygon(corners)
        assert len(poly.vertices) == 4
        assert poly.area == pytest.approx(1.0)

    def test_interior_points_ignored(self):
        rng = np.random.default_rng(3)
        corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        pts = np.vstack([corners, rng.uniform(0.1, 0.9, (50, 2))])
        poly = fit_feasible_polygon(pts)
        assert len(poly.vertices) == 4
        assert poly.area == pytest.approx(1.0)

    def test_hexagon_to_quadrilateral(self):
        angles = np.linspace(0, 2 * np.pi, 7)[:-1]
        hexagon = np.column_stack([np.cos(angles), np.sin(angles)])
        full = fit_feasible_polygon(hexagon)
        poly = fit_feasible_polygon(hexagon, max_vertices=4)
        assert len(poly.vertices) == 4
        assert poly.area >= full.area
        for p in hexagon:
            assert poly.contains(p)
            assert ray_cast_inside(p, poly.vertices)

    def test_collinear(self):
        pts = np.column_stack([np.arange(5.0), 2.0 * np.arange(5.0)])
        with pytest.raises(CollinearPoints):
            fit_feasible_polygon(pts)

    def test_containment_matches_ray_cast_oracle(self):
        rng = np.random.default_rng(4)
        cloud = rng.standard_normal((40, 2))
        poly = fit_feasible_polygon(cloud, max_vertices=5)
        probes = rng.uniform(-3, 3, (300, 2))
        for p in probes:
            assert point_in_polygon(p, poly.vertices) == ray_cast_inside(
                p, poly.vertices
            )


def paper_structured_alpha(m=800, seed=5):
    # First coefficient free, second affine in it, third independent:
    # the structure where two free parameters describe three coefficients.
    rng = np.random.default_rng(seed)
    a0 = rng.uniform(-2, 2, m)
    a2 = rng.uniform(-1, 1, m)
    return np.column_stack([a0, 2.0 * a0 + 0.1, a2])


def space_from_alpha(alpha, **kwargs):
    from shapemanifold.pod import PodBasis

    n_modes = alpha.shape[1]
    basis = PodBasis(
        np.eye(3 * n_modes)[:, :n_modes],
        np.linspace(n_modes, 1, n_modes),
        np.zeros(3 * n_modes),
    )
    return build_reduced_space(basis, alpha, **kwargs)


class TestBuildReducedSpace:
    def test_paper_structure(self):
        alpha = paper_structured_alpha()
        space = space_from_alpha(alpha)
        assert space.dim == 2
        assert space.free_indices == (0, 2)
        assert space.polygon is not None
        assert space.polygon.axes == (1, 2)

    def test_no_dependency_fallback(self):
        rng = np.random.default_rng(6)
        alpha = rng.uniform(-1, 1, (400, 3))
        space = space_from_alpha(alpha)
        assert space.dim == 3
        assert space.polygon.axes == (1, 2)

    def test_single_coefficient_no_polygon(self):
        alpha = np.linspace(-1, 1, 50)[:, None]
        space = space_from_alpha(alpha)
        assert space.dim == 1
        assert space.polygon is None

    def test_hull_contains_all_training_pairs(self):
        alpha = paper_structured_alpha()
        space = space_from_alpha(alpha)
        a, b = space.polygon.axes
        dep = space.dependencies.status[a]
        for row in alpha:
            first = dep.slope * row[dep.source] + dep.intercept
            assert space.polygon.contains([first, row[b]])

    def test_encode_decode_consistency(self):
        alpha = paper_structured_alpha()
        space = space_from_alpha(alpha)
        for row in alpha[:50]:
            mu = space.encode(row)
            full = space.expand(mu)
            np.testing.assert_allclose(space.encode(full), mu, atol=1e-9)


class TestSampleReduced:
    def test_box_polygon_full_acceptance(self):
        rng = np.random.default_rng(7)
        alpha = rng.uniform(-1, 1, (200, 2))
        space = space_from_alpha(alpha, max_vertices=None)
        samples = sample_reduced(space, 100, seed=0)
        assert samples.shape == (100, 2)
        for row in samples:
            assert space.contains(row)

    def test_eighty_samples_inside_polygon(self):
        space = space_from_alpha(paper_structured_alpha())
        samples = sample_reduced(space, 80, seed=1)
        assert samples.shape == (80, 2)
        for row in samples:
            pair = space.pair_point(row)
            assert space.polygon.contains(pair)

    def test_determinism(self):
        space = space_from_alpha(paper_structured_alpha())
        a = sample_reduced(space, 40, seed=9)
        b = sample_reduced(space, 40, seed=9)
        np.testing.assert_array_equal(a, b)

    def test_starved_acceptance(self):
        # A polygon far smaller than the bounding box: acceptance below
        # one percent must abort instead of spinning.
        from shapemanifold.pod import PodBasis

        basis = PodBasis(np.eye(6)[:, :2], np.array([2.0, 1.0]), np.zeros(6))
        tiny = FeasiblePolygon(
            axes=(0, 1),
            vertices=np.array([[0, 0], [1e-3, 0], [0, 1e-3]], dtype=float),
        )
        space = ReducedSpace(
            basis=basis,
            dependencies=DependencyModel((None, None)),
            polygon=tiny,
            free_indices=(0, 1),
            bounding_box=np.array([[-1.0, 1.0], [-1.0, 1.0]]),
        )
        with pytest.raises(InfeasibleRegion):
            sample_reduced(space, 50, seed=2)


class TestDecode:
    def build_pipeline_space(self):
        mesh = make_sphere(6, 8)
        cfg = default_config(mesh)
        params = sample_ffd_params(300, cfg.bounds, seed=11)
        basis, alpha = build_geometry_pod(
            mesh, cfg, params, TruncationRule.energy(0.9999)
        )
        return mesh, cfg, params, basis, alpha, build_reduced_space(basis, alpha)

    def test_zero_coordinates_give_reference(self):
        mesh, _, _, _, _, space = self.build_pipeline_space()
        decoded = decode(space, np.zeros(space.dim), mesh)
        assert np.abs(decoded.vertices - mesh.vertices).max() < 1e-10

    def test_training_round_trip(self):
        mesh, cfg, params, basis, alpha, space = self.build_pipeline_space()
        sigma = basis.singular_values
        # The basis keeps every direction here, so decoding a training
        # sample's coordinates reproduces its geometry to basis accuracy.
        for i in (0, 7, 42):
            decoded = decode(space, space.encode(alpha[i]), mesh)
            truth = morph_mesh(mesh, apply_params(cfg, params[i]))
            rel = np.linalg.norm(decoded.vertices - truth.vertices) / np.linalg.norm(
                truth.vertices
            )
            assert rel < 1e-10

    def test_out_of_region(self):
        mesh, _, _, _, _, space = self.build_pipeline_space()
        outside = space.bounding_box[:, 1] * 2.0 + 1.0
        with pytest.raises(OutOfRegion):
            decode(space, outside, mesh)
