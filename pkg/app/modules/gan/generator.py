"""
Генератор со skip-layer excitation.

Латент → linear → 4×4 → повторяющиеся up-блоки (2× nearest, conv 3×3,
BN, GLU) до разрешения S; SLE-ворота из карты 4×4 (или 8, 16, 32)
домножают карту в 16 раз большего разрешения; в конце conv 3×3 → tanh.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from modules.errors import DimensionError
from modules.settings import GanSettings, TensorSettings
from modules.tensor import BatchNorm2d, Conv2d, Linear, Module, Parameter, Rng, Tensor
from modules.tensor import functional as F
from modules.tensor import tensor as T

# Ключи подпотоков инициализации
_INPUT, _UP, _SLE, _OUT = 0, 1, 2, 3


def resolution_chain(image_size: int) -> list[int]:
    """4, 8, …, S"""
    chain, res = [], 4
    while res <= image_size:
        chain.append(res)
        res *= 2
    return chain


def channel_schedule(settings: GanSettings) -> dict[int, int]:
    """Число каналов на разрешение: половина на каждое удвоение, не ниже channel_floor"""
    schedule = {}
    for step, res in enumerate(resolution_chain(settings.image_size)):
        schedule[res] = min(settings.base_channels, max(settings.channel_floor, settings.base_channels >> step))
    return schedule


class SleBlock(Module):
    """Ворота по каналам x_high из x_low: pool 4×4 → conv 4×4 → leaky → conv 1×1 → sigmoid"""

    def __init__(self, low_channels: int, high_channels: int, rng: Rng):
        super().__init__()
        self.high_channels = high_channels
        self.squeeze = Conv2d(low_channels, high_channels, 4, rng.child(0))
        self.excite = Conv2d(high_channels, high_channels, 1, rng.child(1))

    def gate(self, x_low: Tensor) -> Tensor:
        """N×C_high×1×1, значения в (0, 1)"""
        pooled = F.adaptive_avg_pool(x_low, 4)
        return T.sigmoid(self.excite(T.leaky_relu(self.squeeze(pooled))))

    def forward(self, x_low: Tensor, x_high: Tensor) -> Tensor:
        return skip_excitation(self, x_low, x_high)


def skip_excitation(block: SleBlock, x_low: Tensor, x_high: Tensor) -> Tensor:
    """
    y = F(x_low) · x_high по каналам; пространственные размеры могут различаться.

    Raises:
        DimensionError: разные батчи или число ворот ≠ каналам x_high
    """
    if x_low.shape[0] != x_high.shape[0]:
        raise DimensionError(f"SLE: батч x_low {x_low.shape[0]} ≠ x_high {x_high.shape[0]}")
    gate = block.gate(x_low)
    if gate.shape[1] != x_high.shape[1]:
        raise DimensionError(f"SLE: {gate.shape[1]} ворот для {x_high.shape[1]} каналов")
    return x_high * gate


class UpBlock(Module):
    """2× nearest → conv 3×3 (2·C_out) → BN → GLU [→ + w·шум]"""

    def __init__(self, in_channels: int, out_channels: int, rng: Rng, bn: TensorSettings, noise: bool = False):
        super().__init__()
        self.conv = Conv2d(in_channels, 2 * out_channels, 3, rng, pad=1)
        self.norm = BatchNorm2d(2 * out_channels, eps=bn.bn_eps, momentum=bn.bn_momentum)
        self.noise_weight = Parameter(np.zeros(1, dtype=np.float32)) if noise else None

    def forward(self, x: Tensor, noise_rng: Optional[Rng] = None) -> Tensor:
        x = F.glu(self.norm(self.conv(F.nearest_upsample(x, 2))))
        if self.noise_weight is not None and noise_rng is not None:
            noise = noise_rng.normal((x.shape[0], 1, x.shape[2], x.shape[3]))
            x = T.noise_add(x, noise, self.noise_weight)
        return x


class Generator(Module):
    """
    Args:
        settings: Секция ``gan``
        rng: Поток инициализации
        bn: Параметры батч-нормализации
    """

    def __init__(self, settings: GanSettings, rng: Rng, bn: TensorSettings = TensorSettings()):
        super().__init__()
        self.image_size = settings.image_size
        self.latent_dim = settings.c_dim + settings.z_dim
        self.channels = channel_schedule(settings)
        base = self.channels[4]

        self.input = Linear(self.latent_dim, 2 * base * 16, rng.child(_INPUT))
        self.input_norm = BatchNorm2d(2 * base, eps=bn.bn_eps, momentum=bn.bn_momentum)
        self.up = {
            str(res): UpBlock(self.channels[res // 2], self.channels[res], rng.child(_UP, res), bn,
                              noise=settings.noise_injection)
            for res in resolution_chain(settings.image_size)[1:]
        }
        self.sle = {
            f"{low}_{high}": SleBlock(self.channels[low], self.channels[high], rng.child(_SLE, low, high))
            for low, high in settings.sle_pairs
        }
        self.sle_targets = {high: low for low, high in settings.sle_pairs}
        self.to_rgb = Conv2d(self.channels[settings.image_size], 3, 3, rng.child(_OUT), pad=1)

    def forward(self, latent, noise_rng: Optional[Rng] = None) -> Tensor:
        """Латент N×(c_dim+z_dim) → изображения N×3×S×S в [-1, 1]"""
        latent = getattr(latent, 'vector', latent)
        if latent.ndim != 2 or latent.shape[1] != self.latent_dim:
            raise DimensionError(f"Латент формы {latent.shape}, генератор ожидает N×{self.latent_dim}")

        n = latent.shape[0]
        x = self.input(latent).reshape(n, 2 * self.channels[4], 4, 4)
        x = F.glu(self.input_norm(x))
        features = {4: x}
        for res in resolution_chain(self.image_size)[1:]:
            x = self.up[str(res)](x, noise_rng.child(res) if noise_rng is not None else None)
            low = self.sle_targets.get(res)
            if low is not None:
                x = self.sle[f"{low}_{res}"](features[low], x)
            features[res] = x
        return T.tanh(self.to_rgb(x))


def g_forward(generator: Generator, latent, noise_rng: Optional[Rng] = None) -> Tensor:
    return generator(latent, noise_rng)
