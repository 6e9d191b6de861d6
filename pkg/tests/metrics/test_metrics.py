import json

import numpy as np
import numpy.testing as npt
import pytest

from modules.constants import ArtifactNames
from modules.enums import BackboneMode
from modules.errors import BackboneModeError, DimensionError, InsufficientSampleError, NotPsdError
from modules.gan import CaNet, Generator
from modules.metrics import (
    FeatureStats, RandomFeatureBackbone, ToyClassifier, build_backbone, class_index, clamp_eigenvalues,
    evaluate_run, fid, inception_score, jacobi_eigh, matrix_sqrt_trace, noise_baseline, prepare_backbone,
    psd_sqrt, score_from_probs, train_images, uniform_noise_images,
)
from modules.tensor import Rng


def _spd(np_rng, n: int) -> np.ndarray:
    a = np_rng.normal(size=(n, n))
    return a @ a.T + 0.1 * np.eye(n)


class TestLinalg:
    def test_jacobi_matches_numpy(self, np_rng):
        a = _spd(np_rng, 6) - 2.0 * np.eye(6)
        values, vectors = jacobi_eigh(a)
        npt.assert_allclose(values, np.linalg.eigvalsh(a), atol=1e-8)
        npt.assert_allclose(a @ vectors, vectors * values, atol=1e-8)
        npt.assert_allclose(vectors.T @ vectors, np.eye(6), atol=1e-10)

    def test_values_ascending(self, np_rng):
        values, _ = jacobi_eigh(_spd(np_rng, 4))
        assert np.all(np.diff(values) >= 0)

    def test_diagonal_input_is_untouched(self):
        values, vectors = jacobi_eigh(np.diag([3.0, 1.0, 2.0]))
        npt.assert_array_equal(values, [1.0, 2.0, 3.0])
        npt.assert_array_equal(np.abs(vectors).sum(axis=0), [1.0, 1.0, 1.0])

    def test_asymmetric_rejected(self):
        with pytest.raises(NotPsdError):
            jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            jacobi_eigh(np.ones((2, 3)))

    def test_psd_sqrt_squares_back(self, np_rng):
        a = _spd(np_rng, 5)
        root = psd_sqrt(a)
        npt.assert_allclose(root @ root, a, rtol=1e-7, atol=1e-8)
        npt.assert_allclose(root, root.T, atol=1e-12)

    def test_indefinite_rejected(self):
        with pytest.raises(NotPsdError):
            psd_sqrt(np.diag([1.0, -1.0]))

    def test_rounding_negatives_clamped(self):
        npt.assert_array_equal(clamp_eigenvalues(np.array([-1e-12, 1.0])), [0.0, 1.0])

    def test_sqrt_trace_of_commuting_diagonals(self):
        assert matrix_sqrt_trace(np.diag([1.0, 4.0]), np.diag([4.0, 9.0])) == pytest.approx(8.0)

    def test_sqrt_trace_shape_mismatch(self):
        with pytest.raises(DimensionError):
            matrix_sqrt_trace(np.eye(2), np.eye(3))


def _denman_beavers_sqrt(a: np.ndarray, iterations: int = 60) -> np.ndarray:
    y, z = a.copy(), np.eye(len(a))
    for _ in range(iterations):
        y, z = 0.5 * (y + np.linalg.inv(z)), 0.5 * (z + np.linalg.inv(y))
    return y


class TestSqrtTraceOracle:
    @pytest.mark.parametrize("dim", [1, 4, 16, 32])
    def test_matches_iterative_square_root(self, np_rng, dim):
        a, b = _spd(np_rng, dim) + np.eye(dim), _spd(np_rng, dim) + np.eye(dim)
        expected = np.trace(_denman_beavers_sqrt(a @ b))
        assert matrix_sqrt_trace(a, b) == pytest.approx(expected, rel=1e-5)

    def test_symmetry_over_random_pairs(self, np_rng):
        for _ in range(100):
            dim = int(np_rng.integers(1, 5))
            a = FeatureStats(np_rng.normal(size=dim), _spd(np_rng, dim), 10)
            b = FeatureStats(np_rng.normal(size=dim), _spd(np_rng, dim), 10)
            assert abs(fid(a, b) - fid(b, a)) <= 1e-9


class TestFid:
    def test_identical_stats_give_zero(self, np_rng):
        stats = FeatureStats.from_features(np_rng.normal(size=(50, 4)))
        assert fid(stats, stats) == pytest.approx(0.0, abs=1e-8)
        assert fid(stats, stats) >= 0.0

    def test_one_dimensional_closed_form(self):
        a = FeatureStats(np.array([0.0]), np.array([[1.0]]), 10)
        b = FeatureStats(np.array([1.0]), np.array([[2.0]]), 10)
        assert fid(a, b) == pytest.approx(1.0 + 1.0 + 2.0 - 2.0 * np.sqrt(2.0))

    def test_symmetric(self, np_rng):
        a = FeatureStats.from_features(np_rng.normal(size=(40, 3)))
        b = FeatureStats.from_features(np_rng.normal(1.0, 2.0, size=(40, 3)))
        assert fid(a, b) == fid(b, a)
        assert fid(a, b) > 0.0

    def test_mean_shift_only(self):
        cov = np.eye(3)
        a = FeatureStats(np.zeros(3), cov, 5)
        b = FeatureStats(np.array([1.0, 2.0, 2.0]), cov, 5)
        assert fid(a, b) == pytest.approx(9.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            fid(FeatureStats(np.zeros(2), np.eye(2), 3), FeatureStats(np.zeros(3), np.eye(3), 3))

    def test_unbiased_covariance(self, np_rng):
        x = np_rng.normal(size=(20, 3))
        stats = FeatureStats.from_features(x)
        npt.assert_allclose(stats.cov, np.cov(x, rowvar=False), atol=1e-12)
        npt.assert_allclose(stats.biased_cov(), np.cov(x, rowvar=False, bias=True), atol=1e-12)
        assert stats.count == 20

    def test_needs_two_vectors(self):
        with pytest.raises(InsufficientSampleError):
            FeatureStats.from_features(np.zeros((1, 4)))

    def test_features_must_be_matrix(self):
        with pytest.raises(DimensionError):
            FeatureStats.from_features(np.zeros(4))


class TestInceptionScore:
    def test_uniform_predictions_score_one(self):
        mean, std = score_from_probs(np.full((6, 3), 1.0 / 3.0), splits=2)
        assert mean == pytest.approx(1.0)
        assert std == pytest.approx(0.0)

    def test_two_confident_classes_score_two(self):
        probs = np.array([[1.0, 0.0], [0.0, 1.0]] * 2)
        mean, std = score_from_probs(probs, splits=2)
        assert mean == pytest.approx(2.0)
        assert std == pytest.approx(0.0)

    def test_score_bounded_by_class_count(self, np_rng):
        logits = np_rng.normal(size=(12, 4))
        probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        mean, _ = score_from_probs(probs, splits=3)
        assert 1.0 <= mean <= 4.0

    @pytest.mark.parametrize("n, splits", [(3, 4), (5, 0)])
    def test_insufficient_samples(self, n, splits):
        with pytest.raises(InsufficientSampleError):
            score_from_probs(np.full((n, 2), 0.5), splits)

    def test_probs_must_be_matrix(self):
        with pytest.raises(DimensionError):
            score_from_probs(np.full(4, 0.25), 1)


class TestBackbone:
    def test_random_features_shape(self, np_rng):
        backbone = RandomFeatureBackbone(8, Rng(0), batch_size=3)
        images = np_rng.uniform(-1, 1, (5, 3, 32, 32)).astype(np.float32)
        features = backbone.features(images)
        assert features.shape == (5, 8)
        assert features.dtype == np.float64

    def test_larger_images_pooled(self, np_rng):
        backbone = RandomFeatureBackbone(8, Rng(0))
        assert backbone.features(np_rng.uniform(-1, 1, (2, 3, 64, 64))).shape == (2, 8)

    def test_wrong_channels(self, np_rng):
        with pytest.raises(DimensionError):
            RandomFeatureBackbone(8, Rng(0)).features(np.zeros((2, 1, 32, 32), dtype=np.float32))

    def test_random_features_have_no_probabilities(self, np_rng):
        backbone = RandomFeatureBackbone(8, Rng(0))
        with pytest.raises(BackboneModeError):
            inception_score(backbone, np.zeros((4, 3, 32, 32), dtype=np.float32), 2)

    def test_classifier_probabilities_are_distributions(self, np_rng):
        backbone = ToyClassifier(8, 5, Rng(0))
        probs = backbone.probabilities(np_rng.uniform(-1, 1, (4, 3, 32, 32)).astype(np.float32))
        assert probs.shape == (4, 5)
        npt.assert_allclose(probs.sum(axis=1), 1.0, rtol=1e-5)

    def test_fit_freezes_and_records_history(self, np_rng):
        backbone = ToyClassifier(8, 2, Rng(0), batch_size=4)
        images = np_rng.uniform(-1, 1, (8, 3, 32, 32)).astype(np.float32)
        labels = np.array([0, 1] * 4)
        history = backbone.fit(images, labels, epochs=2, rng=Rng(1))
        assert len(history) == 2
        assert all(np.isfinite(history))
        assert not any(p.requires_grad for _, p in backbone.net.named_parameters())

    def test_save_load_preserves_digest(self, tmp_path):
        source = ToyClassifier(8, 3, Rng(0))
        target = ToyClassifier(8, 3, Rng(5))
        assert source.digest() != target.digest()
        target.load(source.save(tmp_path / "b.fgt"))
        assert target.digest() == source.digest()

    def test_digest_depends_on_mode(self):
        assert RandomFeatureBackbone(8, Rng(0)).digest() != ToyClassifier(8, 3, Rng(0)).digest()

    def test_classifier_needs_training_data(self, config):
        with pytest.raises(BackboneModeError):
            build_backbone(config.metrics, Rng(0))

    def test_class_index_is_dense(self):
        assert class_index([7, 3, 7, 11]) == {3: 0, 7: 1, 11: 2}


@pytest.fixture
def random_config(make_config):
    return make_config(metrics__backbone=BackboneMode.random_features.value)


class TestEvaluate:
    def test_train_images_and_labels(self, toy_dataset):
        images, labels = train_images(toy_dataset)
        assert images.shape == (54, 3, 32, 32)
        assert labels.min() == 0 and labels.max() == 17

    def test_noise_images_in_range(self):
        noise = uniform_noise_images(3, 16, Rng(0))
        assert noise.shape == (3, 3, 16, 16)
        assert noise.min() >= -1.0 and noise.max() <= 1.0

    def test_random_features_report(self, random_config, toy_dataset):
        backbone = prepare_backbone(random_config, toy_dataset)
        generator = Generator(random_config.gan, Rng(random_config.seed), random_config.tensor)
        report = evaluate_run(generator, toy_dataset, backbone, random_config)
        assert report.is_mean is None and report.is_std is None
        assert report.fid >= 0.0
        assert report.n_samples == 8
        assert report.backbone == 'fixed-random-features'
        assert report.config_digest == random_config.digest()
        assert report.caption_match is None

    def test_evaluation_is_reproducible(self, random_config, toy_dataset):
        backbone = prepare_backbone(random_config, toy_dataset)
        generator = Generator(random_config.gan, Rng(random_config.seed), random_config.tensor)
        first = evaluate_run(generator, toy_dataset, backbone, random_config)
        second = evaluate_run(generator, toy_dataset, backbone, random_config)
        assert first.to_dict() == second.to_dict()

    def test_conditional_report_has_caption_match(self, random_config, toy_dataset, toy_embeddings):
        backbone = prepare_backbone(random_config, toy_dataset)
        generator = Generator(random_config.gan, Rng(random_config.seed), random_config.tensor)
        ca_net = CaNet(toy_embeddings.dim, random_config.gan.c_dim, Rng(3))
        report = evaluate_run(generator, toy_dataset, backbone, random_config, ca_net, toy_embeddings)
        assert 0.0 <= report.caption_match <= 1.0

    def test_noise_baseline(self, random_config, toy_dataset):
        backbone = prepare_backbone(random_config, toy_dataset)
        report = noise_baseline(toy_dataset, backbone, random_config, n_samples=6)
        assert report.n_samples == 6
        assert report.fid > 0.0

    def test_report_written_as_json(self, random_config, toy_dataset, tmp_path):
        backbone = prepare_backbone(random_config, toy_dataset)
        report = noise_baseline(toy_dataset, backbone, random_config)
        data = json.loads(report.write(tmp_path / ArtifactNames.METRIC_REPORT).read_text(encoding='utf-8'))
        assert data['fid'] == pytest.approx(report.fid)
        assert data['is_mean'] is None
        assert data['backbone_digest'] == backbone.digest()

    def test_classifier_backbone_cached(self, config, toy_dataset, tmp_path):
        first = prepare_backbone(config, toy_dataset, tmp_path)
        assert (tmp_path / ArtifactNames.BACKBONE_BLOCKS).exists()
        second = prepare_backbone(config, toy_dataset, tmp_path)
        assert second.digest() == first.digest()

        report = noise_baseline(toy_dataset, second, config)
        assert report.backbone == 'toy-classifier'
        assert report.is_mean >= 1.0 - 1e-9
        assert report.is_splits == config.metrics.is_splits
