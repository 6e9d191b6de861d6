"""
Дифференцируемые аугментации: яркость, насыщенность, контраст, сдвиг.

Параметры выбираются независимо для каждого изображения; вырожденный
диапазон (ноль или (1, 1)) пропускает операцию, так что нулевые
диапазоны дают тождественное преобразование.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from modules.errors import ConfigError
from modules.settings import AugmentSettings
from modules.tensor import Rng, Tensor
from modules.tensor import functional as F
from modules.tensor import tensor as T


@dataclass
class AugmentParams:
    brightness: np.ndarray   # N
    saturation: np.ndarray   # N
    contrast: np.ndarray     # N
    shifts: np.ndarray       # N×2 (dy, dx)


def _check_ranges(ranges: AugmentSettings):
    if not 0 <= ranges.brightness <= 1:
        raise ConfigError(f"brightness={ranges.brightness} вне [0, 1]")
    for name in ('saturation', 'contrast'):
        low, high = getattr(ranges, name)
        if not 0 <= low <= high:
            raise ConfigError(f"{name}={getattr(ranges, name)} не удовлетворяет 0 ≤ low ≤ high")
    if not 0 <= ranges.translation < 0.5:
        raise ConfigError(f"translation={ranges.translation} вне [0, 0.5)")


def sample_params(n: int, size: int, rng: Rng, ranges: AugmentSettings) -> AugmentParams:
    """Все параметры выбираются всегда, чтобы поток rng не зависел от диапазонов"""
    max_shift = int(ranges.translation * size)
    return AugmentParams(
        brightness=rng.uniform(-ranges.brightness, ranges.brightness, (n,)),
        saturation=rng.uniform(*ranges.saturation, (n,)),
        contrast=rng.uniform(*ranges.contrast, (n,)),
        shifts=rng.integers(-max_shift, max_shift + 1, (n, 2)),
    )


def apply_augment(images: Tensor, params: AugmentParams, ranges: AugmentSettings) -> Tensor:
    x = images
    shape = (-1, 1, 1, 1)
    if ranges.brightness > 0:
        x = x + params.brightness.reshape(shape)
    if ranges.saturation != (1.0, 1.0):
        gray = x.mean(axes=1, keepdims=True)
        x = (x - gray) * params.saturation.reshape(shape) + gray
    if ranges.contrast != (1.0, 1.0):
        mean = x.mean(axes=(1, 2, 3), keepdims=True)
        x = (x - mean) * params.contrast.reshape(shape) + mean
    if int(ranges.translation * images.shape[2]) > 0:
        x = F.translate(x, params.shifts)
    if x is images:
        return x
    return T.clamp(x, -1.0, 1.0)


def augment_batch(images, rng: Rng, ranges: AugmentSettings) -> Tensor:
    """
    Аугментировать батч N×3×H×W в [-1, 1]; результат обрезается до [-1, 1].

    Raises:
        ConfigError: диапазоны вне допустимых
    """
    _check_ranges(ranges)
    images = images if isinstance(images, Tensor) else Tensor(np.asarray(images, dtype=np.float32))
    params = sample_params(images.shape[0], images.shape[2], rng, ranges)
    return apply_augment(images, params, ranges)
