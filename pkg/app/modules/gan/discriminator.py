"""
Дискриминатор-автоэнкодер.

Кодер: свёртки 4×4 со страйдом 2 и leaky-ReLU до карты 8×8, затем
голова в один логит (в условном режиме перед головой к карте
приклеивается μ). Декодер восстанавливает настоящее изображение
и вызывается только для настоящих батчей.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from modules.enums import ImageOrigin
from modules.errors import ContractError, DimensionError, ParameterError
from modules.settings import GanSettings, TensorSettings
from modules.tensor import BatchNorm2d, Conv2d, Module, Rng, Tensor, concat
from modules.tensor import functional as F
from modules.tensor import tensor as T

FEATURE_SIZE = 8
DECODER_BLOCKS = 4
MAX_DECODER_SIZE = 128

_ENCODER, _HEAD, _DECODER = 0, 1, 2


@dataclass(frozen=True)
class CropSpec:
    top: int
    left: int
    height: int
    width: int


def decoder_size(image_size: int) -> int:
    return min(MAX_DECODER_SIZE, image_size)


class DecoderBlock(Module):
    """2× nearest → conv 3×3 → BN → GLU"""

    def __init__(self, in_channels: int, out_channels: int, rng: Rng, bn: TensorSettings):
        super().__init__()
        self.conv = Conv2d(in_channels, 2 * out_channels, 3, rng, pad=1)
        self.norm = BatchNorm2d(2 * out_channels, eps=bn.bn_eps, momentum=bn.bn_momentum)

    def forward(self, x: Tensor) -> Tensor:
        return F.glu(self.norm(self.conv(F.nearest_upsample(x, 2))))


class Discriminator(Module):
    """
    Args:
        settings: Секция ``gan``
        conditional: Приклеивать ли μ к признакам перед головой
        rng: Поток инициализации
    """

    def __init__(self, settings: GanSettings, conditional: bool, rng: Rng, bn: TensorSettings = TensorSettings()):
        super().__init__()
        self.image_size = settings.image_size
        self.conditional = conditional
        self.mu_dim = settings.c_dim
        self.target_size = decoder_size(settings.image_size)
        self.condition_calls = 0
        self.decode_calls = 0

        self.down = []
        channels, res, step = 3, settings.image_size, 0
        while res > FEATURE_SIZE:
            out = min(settings.disc_channel_cap, settings.disc_channels * 2 ** step)
            self.down.append(Conv2d(channels, out, 4, rng.child(_ENCODER, step), stride=2, pad=1))
            channels, res, step = out, res // 2, step + 1
        self.feature_channels = channels

        head_in = channels + (self.mu_dim if conditional else 0)
        self.head_conv = Conv2d(head_in, channels, 3, rng.child(_HEAD, 0), pad=1)
        self.head_out = Conv2d(channels, 1, FEATURE_SIZE, rng.child(_HEAD, 1))

        self.decoder = []
        dec_channels = channels
        for block in range(DECODER_BLOCKS):
            out = max(settings.decoder_channel_floor, dec_channels // 2)
            self.decoder.append(DecoderBlock(dec_channels, out, rng.child(_DECODER, block), bn))
            dec_channels = out
        self.to_rgb = Conv2d(dec_channels, 3, 3, rng.child(_DECODER, DECODER_BLOCKS), pad=1)

    # ---------------------------------------------------------------
    # Кодер и голова
    # ---------------------------------------------------------------

    def features(self, images: Tensor) -> Tensor:
        if images.ndim != 4 or images.shape[1] != 3 or images.shape[2:] != (self.image_size, self.image_size):
            raise DimensionError(f"Дискриминатор ожидает N×3×{self.image_size}×{self.image_size}, форма {images.shape}")
        x = images
        for conv in self.down:
            x = T.leaky_relu(conv(x))
        return x

    def condition(self, features: Tensor, mu: Tensor) -> Tensor:
        """μ размножается до 8×8 и приклеивается по каналам"""
        self.condition_calls += 1
        mu = mu if isinstance(mu, Tensor) else Tensor(np.asarray(mu, dtype=np.float32))
        if mu.ndim == 1:
            mu = mu.reshape(1, -1)
        if mu.shape[1] != self.mu_dim:
            raise DimensionError(f"μ длины {mu.shape[1]}, ожидалось {self.mu_dim}")
        n = features.shape[0]
        if mu.shape[0] not in (1, n):
            raise DimensionError(f"μ для {mu.shape[0]} примеров, признаки для {n}")
        planes = mu.reshape(mu.shape[0], self.mu_dim, 1, 1) * np.ones(
            (n, 1, features.shape[2], features.shape[3]), dtype=np.float32)
        return concat([features, planes], axis=1)

    def logits(self, features: Tensor, mu: Optional[Tensor] = None) -> Tensor:
        if self.conditional:
            if mu is None:
                raise ContractError("Условный дискриминатор требует μ")
            features = self.condition(features, mu)
        elif mu is not None:
            raise ContractError("Безусловный дискриминатор не принимает μ")
        x = self.head_out(T.leaky_relu(self.head_conv(features)))
        return x.reshape(x.shape[0], 1)

    def encode(self, images: Tensor, mu: Optional[Tensor] = None) -> tuple[Tensor, Tensor]:
        """(признаки N×C×8×8, логиты N×1)"""
        features = self.features(images)
        return features, self.logits(features, mu)

    # ---------------------------------------------------------------
    # Декодер
    # ---------------------------------------------------------------

    def decode(self, features: Tensor, origin: ImageOrigin = ImageOrigin.real) -> Tensor:
        """
        Реконструкция размера min(128, S) из признаков 8×8.

        Raises:
            ContractError: признаки не от настоящих изображений
        """
        if ImageOrigin(origin) != ImageOrigin.real:
            raise ContractError(f"Декодер вызывается только для настоящих изображений, получено {origin}")
        self.decode_calls += 1
        start = self.target_size // 2 ** DECODER_BLOCKS
        x = F.adaptive_avg_pool(features, start) if features.shape[2] != start else features
        for block in self.decoder:
            x = block(x)
        return T.tanh(self.to_rgb(x))

    def forward(self, images: Tensor, mu: Optional[Tensor] = None) -> Tensor:
        return self.encode(images, mu)[1]


def d_encode(disc: Discriminator, images: Tensor, mu: Optional[Tensor] = None) -> tuple[Tensor, Tensor]:
    return disc.encode(images, mu)


def d_condition(disc: Discriminator, features: Tensor, mu: Tensor) -> Tensor:
    return disc.condition(features, mu)


def d_decode(disc: Discriminator, features: Tensor, origin: ImageOrigin = ImageOrigin.real) -> Tensor:
    return disc.decode(features, origin)


def crop_spec(height: int, width: int, rng: Rng) -> CropSpec:
    """
    Случайное окно ⌈H/8⌉×⌈W/8⌉ внутри изображения.

    Raises:
        ParameterError: изображение меньше 8 пикселей
    """
    if height < 8 or width < 8:
        raise ParameterError(f"Изображение {height}×{width} слишком мало для кропа 1/8")
    ch, cw = math.ceil(height / 8), math.ceil(width / 8)
    return CropSpec(rng.integers(0, height - ch + 1), rng.integers(0, width - cw + 1), ch, cw)


def apply_crop(x: Tensor, spec: CropSpec) -> Tensor:
    return x[..., spec.top:spec.top + spec.height, spec.left:spec.left + spec.width]


def random_crop_pair(a: Tensor, b: Tensor, rng: Rng) -> tuple[Tensor, Tensor, CropSpec]:
    """Одно и то же случайное окно из двух изображений одного размера"""
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = b if isinstance(b, Tensor) else Tensor(b)
    if a.shape[-2:] != b.shape[-2:]:
        raise DimensionError(f"Кроп пары разных размеров {a.shape} и {b.shape}")
    spec = crop_spec(a.shape[-2], a.shape[-1], rng)
    return apply_crop(a, spec), apply_crop(b, spec), spec
