"""
Оракул атрибутов игрушечного датасета: по изображению определяет
цвет и форму фигуры (ближайший цвет палитры + заполненность bounding box).
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from modules.data.toy import BACKGROUNDS, COLORS
from modules.errors import DimensionError

# Пороги заполненности рамки: квадрат ≈ 1.0, круг ≈ π/4, треугольник ≈ 0.5
SQUARE_FILL = 0.9
CIRCLE_FILL = 0.64


def _palette() -> tuple[list[str], np.ndarray, int]:
    names = list(COLORS) + list(BACKGROUNDS)
    values = np.array(list(COLORS.values()) + list(BACKGROUNDS.values()), dtype=np.float64)
    return names, values, len(COLORS)


def classify_pixels(image: np.ndarray) -> np.ndarray:
    """Индекс ближайшего цвета палитры для каждого пикселя uint8 H×W×3"""
    _, values, _ = _palette()
    pixels = image.reshape(-1, 3).astype(np.float64)
    distances = ((pixels[:, None, :] - values[None, :, :]) ** 2).sum(axis=2)
    return distances.argmin(axis=1).reshape(image.shape[:2])


def dominant_color(image: np.ndarray) -> Optional[str]:
    """
    Цвет фигуры: самый частый цвет переднего плана.

    Returns:
        Optional[str]: название цвета или None, если пикселей фигуры нет
    """
    names, _, n_fg = _palette()
    labels = classify_pixels(image)
    counts = np.bincount(labels.reshape(-1), minlength=len(names))[:n_fg]
    if counts.max() == 0:
        return None
    return names[int(counts.argmax())]


def dominant_shape(image: np.ndarray) -> Optional[str]:
    """Форма по заполненности рамки пикселями доминирующего цвета"""
    color = dominant_color(image)
    if color is None:
        return None
    names, _, _ = _palette()
    mask = classify_pixels(image) == names.index(color)
    rows, cols = np.nonzero(mask)
    area = (rows.max() - rows.min() + 1) * (cols.max() - cols.min() + 1)
    fill = mask.sum() / area
    if fill >= SQUARE_FILL:
        return 'persegi'
    if fill >= CIRCLE_FILL:
        return 'lingkaran'
    return 'segitiga'


def caption_color(text: str) -> Optional[str]:
    """Цвет, названный в подписи (первое совпадение)"""
    for token in text.lower().split():
        if token in COLORS:
            return token
    return None


def caption_match_rate(images: Sequence[np.ndarray], captions: Sequence[str]) -> float:
    """Доля изображений, чей доминирующий цвет совпадает с цветом из подписи"""
    if len(images) != len(captions):
        raise DimensionError(f"{len(images)} изображений и {len(captions)} подписей")
    if not len(images):
        return 0.0
    hits = sum(dominant_color(img) == caption_color(text) for img, text in zip(images, captions))
    return hits / len(images)
