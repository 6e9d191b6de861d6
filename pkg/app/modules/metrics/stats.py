"""
Статистики признаков и расстояние Фреше между гауссианами.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from modules.errors import DimensionError, InsufficientSampleError
from modules.metrics.linalg import matrix_sqrt_trace


@dataclass
class FeatureStats:
    mean: np.ndarray   # d
    cov: np.ndarray    # d×d, несмещённая оценка
    count: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def from_features(cls, features: np.ndarray) -> 'FeatureStats':
        """
        Raises:
            InsufficientSampleError: меньше двух векторов
        """
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise DimensionError(f"Признаки должны быть N×d, форма {features.shape}")
        if features.shape[0] < 2:
            raise InsufficientSampleError(f"Для ковариации нужно ≥2 векторов, есть {features.shape[0]}")
        mean = features.mean(axis=0)
        centered = features - mean
        cov = centered.T @ centered / (features.shape[0] - 1)
        return cls(mean, (cov + cov.T) / 2, features.shape[0])

    def biased_cov(self) -> np.ndarray:
        return self.cov * (self.count - 1) / self.count


def feature_stats(backbone, images: np.ndarray) -> FeatureStats:
    """Среднее и несмещённая ковариация признаков бэкбона"""
    if len(images) < 2:
        raise InsufficientSampleError(f"Для статистик нужно ≥2 изображений, есть {len(images)}")
    return FeatureStats.from_features(backbone.features(images))


def fid(s1: FeatureStats, s2: FeatureStats) -> float:
    """
    ‖μ1 − μ2‖² + Tr(Σ1 + Σ2 − 2(Σ1Σ2)^{1/2}), не меньше нуля.

    Raises:
        DimensionError: разная размерность признаков
    """
    if s1.dim != s2.dim:
        raise DimensionError(f"FID: размерности признаков {s1.dim} и {s2.dim}")
    diff = s1.mean - s2.mean
    # обе стороны, чтобы fid(a, b) == fid(b, a) побитно
    cross = 0.5 * (matrix_sqrt_trace(s1.cov, s2.cov) + matrix_sqrt_trace(s2.cov, s1.cov))
    value = float(diff @ diff) + float(np.trace(s1.cov) + np.trace(s2.cov)) - 2.0 * cross
    return max(value, 0.0)
