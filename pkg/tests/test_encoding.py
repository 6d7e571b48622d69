import numpy as np
import pytest
from scipy.spatial.distance import pdist
from scipy.stats import spearmanr

from proxtrace import encoding as enc
from proxtrace.errors import (
    DegenerateDataError,
    DimensionMismatchError,
    FormatError,
    ValidationError,
)


class TestBuildBasis:
    def test_full_orthonormality_p_equals_d(self):
        b = enc.build_basis(4, 4, seed=42)
        gram = b.vectors @ b.vectors.T
        np.testing.assert_allclose(gram, np.eye(4), atol=1e-9)

    def test_single_vector_is_unit(self):
        b = enc.build_basis(4, 1, seed=0)
        assert abs(np.linalg.norm(b.vectors[0]) - 1.0) <= 1e-9

    def test_deterministic_bit_exact(self):
        a = enc.build_basis(4, 4, seed=123)
        b = enc.build_basis(4, 4, seed=123)
        assert np.array_equal(a.vectors, b.vectors)

    def test_different_seeds_differ(self):
        a = enc.build_basis(4, 4, seed=1)
        b = enc.build_basis(4, 4, seed=2)
        assert not np.array_equal(a.vectors, b.vectors)

    def test_rejects_nonpositive_p(self):
        with pytest.raises(ValidationError):
            enc.build_basis(4, 0, seed=0)

    def test_overcomplete_basis_blockwise_orthonormal(self):
        # p > d: consecutive blocks of d vectors are each orthonormal
        b = enc.build_basis(4, 16, seed=7)
        assert b.vectors.shape == (16, 4)
        for start in range(0, 16, 4):
            block = b.vectors[start:start + 4]
            np.testing.assert_allclose(block @ block.T, np.eye(4), atol=1e-9)


class TestProject:
    def test_identity_basis(self):
        basis = enc.ProjectionBasis(np.eye(4), seed=0)
        out = enc.project(np.array([1.0, 0, 0, 0]), basis)
        np.testing.assert_array_equal(out, [1, 0, 0, 0])

    def test_zero_vector(self):
        basis = enc.build_basis(4, 4, seed=5)
        assert np.all(enc.project(np.zeros(4), basis) == 0)

    def test_isometry_at_p_equals_d(self):
        basis = enc.build_basis(4, 4, seed=9)
        rng = np.random.default_rng(1)
        for _ in range(1000):
            u, v = rng.normal(size=(2, 4))
            raw = np.linalg.norm(u - v)
            proj = np.linalg.norm(enc.project(u, basis) - enc.project(v, basis))
            assert abs(proj - raw) <= 1e-6 * raw

    def test_dimension_mismatch(self):
        basis = enc.build_basis(4, 4, seed=0)
        with pytest.raises(DimensionMismatchError):
            enc.project(np.zeros(3), basis)

    def test_project_many_matches_project(self):
        basis = enc.build_basis(4, 8, seed=3)
        pts = np.random.default_rng(2).normal(size=(50, 4))
        many = enc.project_many(pts, basis)
        # batched and per-vector products may differ in the last ulp
        for i, w in enumerate(pts):
            np.testing.assert_allclose(many[i], enc.project(w, basis),
                                       rtol=1e-13, atol=1e-15)


class TestFitGrid:
    def test_exact_span(self):
        data = np.array([[0.0, 64.0], [128.0, 32.0]])
        grid = enc.fit_grid(data, 128)
        assert (grid.alpha, grid.beta, grid.delta) == (0.0, 128.0, 1.0)

    def test_symmetric_span(self):
        grid = enc.fit_grid(np.array([[-1.0, -1.0], [1.0, 1.0]]), 4)
        assert (grid.alpha, grid.beta, grid.delta) == (-1.0, 1.0, 0.5)

    def test_degenerate_dataset_rejected(self):
        with pytest.raises(DegenerateDataError):
            enc.fit_grid(np.full((5, 3), 2.5), 10)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValidationError):
            enc.fit_grid(np.empty((0, 4)), 10)

    def test_delta_times_m_spans_range(self):
        rng = np.random.default_rng(8)
        data = rng.normal(size=(100, 6))
        grid = enc.fit_grid(data, 37)
        span = grid.beta - grid.alpha
        assert abs(grid.delta * grid.m_intervals - span) <= 1e-9 * span


class TestQuantize:
    grid = enc.GridSpec(alpha=0.0, beta=4.0, m_intervals=4)  # delta = 1

    def test_interior_point(self):
        assert enc.quantize(np.array([0.5]), self.grid)[0] == 1

    def test_alpha_maps_to_cell_zero(self):
        assert enc.quantize(np.array([0.0]), self.grid)[0] == 0

    def test_beta_maps_to_cell_m(self):
        assert enc.quantize(np.array([4.0]), self.grid)[0] == 4

    def test_out_of_range_clamped(self):
        cells = enc.quantize(np.array([-10.0, 10.0]), self.grid)
        assert list(cells) == [0, 4]

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            enc.quantize(np.array([np.nan]), self.grid)

    def test_monotone_per_component(self):
        rng = np.random.default_rng(4)
        grid = enc.GridSpec(alpha=-3.0, beta=3.0, m_intervals=17)
        xs = np.sort(rng.uniform(-3, 3, 500))
        cells = enc.quantize(xs, grid)
        assert np.all(np.diff(cells) >= 0)

    def test_cells_within_range(self):
        rng = np.random.default_rng(6)
        grid = enc.GridSpec(alpha=-1.0, beta=1.0, m_intervals=8)
        cells = enc.quantize(rng.uniform(-1, 1, 1000), grid)
        assert cells.min() >= 0 and cells.max() <= 8


class TestQuantizedDistance:
    def test_same_cell(self):
        assert enc.quantized_distance([3, 3], [3, 3]) == 0.0

    def test_three_four_five(self):
        assert enc.quantized_distance([0, 0], [3, 4]) == 5.0

    def test_adjacent_cells(self):
        assert enc.quantized_distance([1], [2]) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            enc.quantized_distance([1, 2], [1, 2, 3])


class TestDistortionBound:
    def test_examples(self):
        assert enc.distortion_bound(4, 1.0, 0.5) == 4.0
        assert enc.distortion_bound(1, 0.7, 0.7) == 1.0
        assert enc.distortion_bound(16, 2.0, 1.0) == 8.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            enc.distortion_bound(4, 0.0, 1.0)
        with pytest.raises(ValidationError):
            enc.distortion_bound(4, 1.0, -1.0)


class TestEncode:
    def test_composition_equals_two_step(self):
        rng = np.random.default_rng(10)
        pts = rng.uniform(0, 100, (100, 4))
        model = enc.fit_encoding_model(pts, p=8, m_intervals=32, seed=1)
        for w in pts:
            manual = enc.quantize(enc.project(w, model.basis), model.grid)
            assert np.array_equal(enc.encode(w, model), manual)

    def test_pure(self):
        pts = np.random.default_rng(11).uniform(0, 10, (20, 4))
        model = enc.fit_encoding_model(pts, p=4, m_intervals=16, seed=2)
        a = enc.encode(pts[0], model)
        b = enc.encode(pts[0], model)
        assert np.array_equal(a, b)

    def test_encode_many_matches_encode(self):
        pts = np.random.default_rng(12).uniform(0, 10, (50, 4))
        model = enc.fit_encoding_model(pts, p=16, m_intervals=64, seed=3)
        many = enc.encode_many(pts, model)
        for i, w in enumerate(pts):
            assert np.array_equal(many[i], enc.encode(w, model))

    def test_rank_preservation(self):
        # Quantization must preserve the distance ranking the retrieval
        # pipeline relies on; oracle: scipy's Spearman correlation.
        rng = np.random.default_rng(13)
        pts = rng.uniform(0, 100, (400, 4))
        model = enc.fit_encoding_model(pts, p=16, m_intervals=128, seed=4)
        cells = enc.encode_many(pts, model).astype(np.float64)
        rho = spearmanr(pdist(pts), pdist(cells)).statistic
        assert rho >= 0.9

    def test_distortion_bound_never_exceeded(self):
        # Pairs spanning an epsilon-ball (separation 2*eps in projected
        # space): the quantized-vs-raw magnification factor stays within
        # sqrt(p) * delta / eps.
        rng = np.random.default_rng(14)
        pts = rng.uniform(0, 100, (500, 4))
        model = enc.fit_encoding_model(pts, p=16, m_intervals=128, seed=5)
        delta = model.grid.delta
        eps = delta / 4.0
        bound = enc.distortion_bound(model.p, delta, eps)
        proj = enc.project_many(pts, model.basis)
        for center in proj[:1000]:
            u = rng.normal(size=model.p)
            u *= eps / np.linalg.norm(u)
            a, b = center + u, center - u
            dq = enc.quantized_distance(enc.quantize(a, model.grid),
                                        enc.quantize(b, model.grid))
            raw = np.linalg.norm(a - b)
            assert dq * delta / raw <= bound + 1e-12


class TestModelIo:
    def test_round_trip_bit_exact(self, tmp_path):
        pts = np.random.default_rng(15).uniform(0, 10, (100, 4))
        model = enc.fit_encoding_model(pts, p=16, m_intervals=128, seed=6)
        path = tmp_path / "model.json"
        enc.save_model(model, path)
        back = enc.load_model(path)
        assert np.array_equal(back.basis.vectors, model.basis.vectors)
        assert back.basis.seed == model.basis.seed
        assert back.grid == model.grid
        w = pts[0]
        assert np.array_equal(enc.encode(w, back), enc.encode(w, model))

    def test_garbage_file_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("not json {")
        with pytest.raises(FormatError):
            enc.load_model(path)

    def test_wrong_format_tag_rejected(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text('{"format": "something-else", "version": 1}')
        with pytest.raises(FormatError):
            enc.load_model(path)

    def test_wrong_version_rejected(self, tmp_path):
        pts = np.random.default_rng(16).uniform(0, 10, (10, 4))
        model = enc.fit_encoding_model(pts, p=2, m_intervals=4, seed=0)
        path = tmp_path / "model.json"
        enc.save_model(model, path)
        import json
        payload = json.loads(path.read_text())
        payload["version"] = 99
        path.write_text(json.dumps(payload))
        with pytest.raises(FormatError):
            enc.load_model(path)
