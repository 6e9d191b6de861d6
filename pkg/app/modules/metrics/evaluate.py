"""
Оценка обученного генератора: IS и FID против обучающей выборки.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from modules.constants import ArtifactNames, Messages
from modules.data.embedding_cache import EmbeddingCache
from modules.data.loader import CaptionDataset
from modules.data.oracle import caption_match_rate
from modules.enums import BackboneMode, Split
from modules.gan.conditioning import CaNet
from modules.gan.generator import Generator
from modules.gan.sampling import synthesize
from modules.images import to_uint8
from modules.json_utils import write_json_file
from modules.logs import Logger
from modules.metrics.backbone import Backbone, RandomFeatureBackbone, ToyClassifier, build_backbone, class_index
from modules.metrics.inception import inception_score
from modules.metrics.stats import FeatureStats, feature_stats, fid
from modules.settings import RunConfig
from modules.tensor import Rng

logger = Logger.get_logger("metrics")

METRICS_STREAM = 30
_BACKBONE, _SAMPLES, _NOISE = 0, 1, 2


@dataclass
class MetricReport:
    is_mean: Optional[float]
    is_std: Optional[float]
    fid: float
    n_samples: int
    is_splits: int
    backbone: str
    backbone_digest: str
    config_digest: str = ''
    caption_match: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path: str | Path) -> Path:
        return write_json_file(Path(path), self.to_dict())


def train_images(dataset: CaptionDataset) -> tuple[np.ndarray, np.ndarray]:
    """Изображения train-части и плотные метки классов"""
    records = dataset.split(Split.train) or list(dataset.records)
    index = class_index(r.class_id for r in dataset.records)
    labels = np.array([index[r.class_id] for r in records], dtype=np.int64)
    return dataset.images(records), labels


def prepare_backbone(config: RunConfig, dataset: CaptionDataset, cache_dir: Optional[str | Path] = None,
                     progress: bool = False) -> Backbone:
    """
    Бэкбон для оценки; обученный классификатор кешируется в ``backbone.fgt``.
    """
    rng = Rng(config.seed, (METRICS_STREAM, _BACKBONE))
    images, labels = train_images(dataset)
    n_classes = len(dataset.class_ids)
    cached = Path(cache_dir) / ArtifactNames.BACKBONE_BLOCKS if cache_dir is not None else None

    if cached is not None and cached.exists():
        settings = config.metrics
        if settings.backbone == BackboneMode.random_features:
            backbone = RandomFeatureBackbone(settings.feature_dim, rng, settings.batch_size).load(cached)
        else:
            backbone = ToyClassifier(settings.feature_dim, n_classes, rng.child(0), settings.batch_size).load(cached)
        logger.info(f"Loaded backbone {cached}")
        return backbone

    backbone = build_backbone(config.metrics, rng, images, labels, n_classes, progress)
    if cached is not None:
        backbone.save(cached)
        logger.info(Messages.WROTE.format(path=cached))
    return backbone


def uniform_noise_images(count: int, size: int, rng: Rng) -> np.ndarray:
    """Базовая линия: равномерный шум в [-1, 1]"""
    return rng.uniform(-1.0, 1.0, (count, 3, size, size))


def score_images(images: np.ndarray, reference: FeatureStats, backbone: Backbone, splits: int,
                 config_digest: str = '') -> MetricReport:
    is_mean = is_std = None
    if backbone.mode == BackboneMode.toy_classifier:
        is_mean, is_std = inception_score(backbone, images, splits)
    value = fid(feature_stats(backbone, images), reference)
    return MetricReport(is_mean, is_std, value, len(images), splits, backbone.mode.value,
                        backbone.digest(), config_digest)


def evaluate_run(generator: Generator, dataset: CaptionDataset, backbone: Backbone, config: RunConfig,
                 ca_net: Optional[CaNet] = None, embeddings: Optional[EmbeddingCache] = None,
                 n_samples: Optional[int] = None) -> MetricReport:
    """
    Сгенерировать ``n_samples`` изображений и посчитать IS и FID против train.

    С CA-сетью и эмбеддингами изображения генерируются по случайным
    подписям обучающей выборки, иначе только по шуму.
    """
    n = n_samples or config.metrics.n_samples
    rng = Rng(config.seed, (METRICS_STREAM, _SAMPLES))
    vectors = texts = None
    if ca_net is not None and embeddings is not None:
        captions = dataset.captions(Split.train) or dataset.captions()
        idx = rng.child(0).choice(len(captions), size=n, replace=len(captions) < n)
        vectors = embeddings.matrix(captions[i].caption_id for i in idx)
        texts = [captions[i].text for i in idx]
    fake = synthesize(generator, n, rng.child(1), ca_net, vectors, c_dim=config.gan.c_dim,
                      batch_size=config.metrics.batch_size)

    real, _ = train_images(dataset)
    report = score_images(fake, feature_stats(backbone, real), backbone, config.metrics.is_splits, config.digest())
    if texts is not None:
        # доля изображений, чей доминирующий цвет совпадает с подписью
        report.caption_match = caption_match_rate([to_uint8(img) for img in fake], texts)
    logger.info(f"IS {report.is_mean} ± {report.is_std}, FID {report.fid:.4f} on {n} samples")
    return report


def noise_baseline(dataset: CaptionDataset, backbone: Backbone, config: RunConfig,
                   n_samples: Optional[int] = None) -> MetricReport:
    n = n_samples or config.metrics.n_samples
    noise = uniform_noise_images(n, dataset.image_size, Rng(config.seed, (METRICS_STREAM, _NOISE)))
    real, _ = train_images(dataset)
    return score_images(noise, feature_stats(backbone, real), backbone, config.metrics.is_splits, config.digest())
