"""
Пары подписей для сиамского обучения и метрика Пирсона.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from modules.data.loader import CaptionRecord
from modules.errors import PairingError, UndefinedCorrelationError
from modules.tensor import Rng

POSITIVE_RANGE = (0.8, 1.0)  # [0.8, 1)
NEGATIVE_RANGE = (0.4, 0.6)  # [0.4, 0.6]


@dataclass(frozen=True)
class SentencePair:
    """Пара подписей и целевая косинусная близость"""
    a: int
    b: int
    label: float
    same_class: bool

    def __post_init__(self):
        if self.same_class:
            low, high = POSITIVE_RANGE
            valid = low <= self.label < high
        else:
            low, high = NEGATIVE_RANGE
            valid = low <= self.label <= high
        if not valid:
            kind = 'одного класса' if self.same_class else 'разных классов'
            raise PairingError(f"Метка {self.label} вне диапазона [{low}, {high}] для пары {kind} ({self.a}, {self.b})")


def group_by_class(captions: Sequence[CaptionRecord]) -> dict[int, list[CaptionRecord]]:
    groups: dict[int, list[CaptionRecord]] = defaultdict(list)
    for caption in captions:
        groups[caption.class_id].append(caption)
    return dict(groups)


def make_pairs(captions: Sequence[CaptionRecord], rng: Rng) -> list[SentencePair]:
    """
    Для каждой подписи одна положительная пара (тот же класс) и одна
    отрицательная (класс выбирается равновероятно среди остальных).

    Raises:
        PairingError: меньше двух классов
    """
    groups = group_by_class(captions)
    if len(groups) < 2:
        raise PairingError(f"Для пар нужно ≥ 2 классов, найдено {len(groups)}")
    classes = sorted(groups)

    pairs = []
    for caption in captions:
        same = [c for c in groups[caption.class_id] if c.caption_id != caption.caption_id] or [caption]
        partner = same[rng.integers(0, len(same))]
        pairs.append(SentencePair(caption.caption_id, partner.caption_id, rng.uniform(*POSITIVE_RANGE), True))

        others = [k for k in classes if k != caption.class_id]
        group = groups[others[rng.integers(0, len(others))]]
        partner = group[rng.integers(0, len(group))]
        pairs.append(SentencePair(caption.caption_id, partner.caption_id, rng.uniform(*NEGATIVE_RANGE), False))
    return pairs


def pearson(predictions: Sequence[float], labels: Sequence[float]) -> float:
    """
    Корреляция Пирсона, ∈ [-1, 1].

    Raises:
        UndefinedCorrelationError: меньше двух точек или нулевая дисперсия
    """
    x = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.size < 2 or x.size != y.size:
        raise UndefinedCorrelationError(f"Нужно ≥ 2 согласованных точек, получено {x.size} и {y.size}")
    if np.ptp(y) == 0:
        raise UndefinedCorrelationError("Дисперсия меток равна нулю")
    if np.ptp(x) == 0:
        raise UndefinedCorrelationError("Дисперсия предсказаний равна нулю")
    return float(np.clip(stats.pearsonr(x, y).statistic, -1.0, 1.0))


def pair_cosines(embeddings: Mapping[int, np.ndarray], pairs: Sequence[SentencePair]) -> np.ndarray:
    """Косинусы пар по готовым эмбеддингам"""
    a = np.stack([embeddings[p.a] for p in pairs]).astype(np.float64)
    b = np.stack([embeddings[p.b] for p in pairs]).astype(np.float64)
    return (a * b).sum(axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
