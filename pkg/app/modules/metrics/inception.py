"""
Inception Score по предсказаниям классификатора-бэкбона.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import entropy

from modules.errors import DimensionError, InsufficientSampleError


def score_from_probs(probs: np.ndarray, splits: int) -> tuple[float, float]:
    """
    exp(E_x KL(p(y|x) ‖ p(y))) по каждой части; среднее и std по частям.

    Args:
        probs: Предсказания N×K (строки — распределения)
        splits: Число частей

    Raises:
        InsufficientSampleError: изображений меньше, чем частей
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise DimensionError(f"Предсказания должны быть N×K, форма {probs.shape}")
    n = probs.shape[0]
    if splits < 1 or n < splits:
        raise InsufficientSampleError(f"{n} изображений на {splits} частей")

    part_size = n // splits
    split_scores = []
    for k in range(splits):
        part = probs[k * part_size:(k + 1) * part_size]
        py = part.mean(axis=0)
        scores = [entropy(p_yx, py) for p_yx in part]
        split_scores.append(np.exp(np.mean(scores)))
    return float(np.mean(split_scores)), float(np.std(split_scores))


def inception_score(backbone, images: np.ndarray, splits: int) -> tuple[float, float]:
    """
    Raises:
        BackboneModeError: бэкбон без классификатора
    """
    return score_from_probs(backbone.probabilities(images), splits)
