"""
Функции потерь: hinge для дискриминатора (real / wrong / fake),
реконструкционная (перцептивная) для декодера и −E[D(G(z))] для генератора.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from modules.enums import PerceptualMode
from modules.errors import ContractError, DimensionError
from modules.tensor import Conv2d, Module, Rng, Tensor
from modules.tensor import tensor as T

_NORM_EPS = 1e-10


@dataclass
class LossBundle:
    """Скалярные значения слагаемых; ``total`` — тензор L_D для backward"""
    l_percept: float
    l_d_adv_real: float
    l_d_adv_wrong: Optional[float]
    l_d_adv_fake: float
    l_d_total: float
    l_g: Optional[float] = None
    total: Optional[Tensor] = field(default=None, repr=False, compare=False)

    def row(self, iteration: int) -> dict:
        return {
            'iteration': iteration,
            'l_d_total': self.l_d_total,
            'l_g': self.l_g,
            'l_percept': self.l_percept,
            'l_d_adv_real': self.l_d_adv_real,
            'l_d_adv_wrong': self.l_d_adv_wrong,
            'l_d_adv_fake': self.l_d_adv_fake,
        }


# -------------------------------------------------------------
# Перцептивная метрика
# -------------------------------------------------------------

class RandomFeatureStack(Module):
    """Замороженный стек из трёх свёрток со случайными весами"""

    def __init__(self, rng: Rng, widths: tuple[int, ...] = (16, 32, 32)):
        super().__init__()
        self.layers = []
        channels = 3
        for i, width in enumerate(widths):
            stride = 1 if i == 0 else 2
            self.layers.append(Conv2d(channels, width, 3, rng.child(i), stride=stride, pad=1,
                                      std=1.0 / np.sqrt(9 * channels)))
            channels = width
        self.requires_grad_(False)

    def forward(self, x: Tensor) -> list[Tensor]:
        outputs = []
        for conv in self.layers:
            x = T.leaky_relu(conv(x))
            outputs.append(x)
        return outputs


def _unit_normalize(x: Tensor) -> Tensor:
    return x / T.sqrt((x * x).sum(axes=1, keepdims=True) + _NORM_EPS)


class PerceptualMetric:
    """
    d(x, y) ≥ 0, d(x, x) = 0, d(x, y) = d(y, x).

    pixel-l1: среднее |x − y|; fixed-random-features: сумма по слоям
    среднего квадрата разности нормированных по каналам признаков.
    """

    def __init__(self, mode: PerceptualMode = PerceptualMode.pixel_l1, rng: Optional[Rng] = None):
        self.mode = PerceptualMode(mode)
        self.features = None
        if self.mode == PerceptualMode.random_features:
            self.features = RandomFeatureStack(rng if rng is not None else Rng(0))

    def __call__(self, x: Tensor, y: Tensor) -> Tensor:
        if x.shape != y.shape:
            raise DimensionError(f"Перцептивная метрика: формы {x.shape} и {y.shape}")
        if self.mode == PerceptualMode.pixel_l1:
            return T.absolute(x - y).mean()
        total = None
        for fx, fy in zip(self.features(x), self.features(y)):
            diff = _unit_normalize(fx) - _unit_normalize(fy)
            term = (diff * diff).sum(axes=1).mean()
            total = term if total is None else total + term
        return total


def perceptual_loss(metric: PerceptualMetric, decoded: Tensor, target: Tensor,
                    decoded_crop: Tensor, target_crop: Tensor) -> Tensor:
    """metric(decoded, target) + metric(decoded_crop, target_crop)"""
    if decoded.shape != target.shape or decoded_crop.shape != target_crop.shape:
        raise DimensionError(f"Реконструкция {decoded.shape} / {decoded_crop.shape} и цель "
                             f"{target.shape} / {target_crop.shape} не совпадают")
    return metric(decoded, target) + metric(decoded_crop, target_crop)


# -------------------------------------------------------------
# Hinge
# -------------------------------------------------------------

def hinge_real(logits: Tensor) -> Tensor:
    """−E[min(0, −1 + s)] = E[relu(1 − s)]"""
    return T.relu(1.0 - logits).mean()


def hinge_fake(logits: Tensor) -> Tensor:
    """−E[min(0, −1 − s)] = E[relu(1 + s)]"""
    return T.relu(1.0 + logits).mean()


def d_hinge_loss(logits_real: Tensor, logits_wrong: Optional[Tensor], logits_fake: Tensor,
                 l_percept: Tensor, conditional: bool = False) -> LossBundle:
    """
    L_D = real + [wrong] + fake + L_percept.

    Raises:
        ContractError: в условном режиме нет (или пустой) wrong-батч,
            в безусловном — он передан
    """
    if conditional and (logits_wrong is None or logits_wrong.size == 0):
        raise ContractError("Условный L_D требует логиты wrong-изображений")
    if not conditional and logits_wrong is not None:
        raise ContractError("Безусловный L_D не использует wrong-изображения")

    real = hinge_real(logits_real)
    fake = hinge_fake(logits_fake)
    percept = l_percept if isinstance(l_percept, Tensor) else Tensor(np.float32(l_percept))
    if conditional:
        wrong = hinge_fake(logits_wrong)
        total = ((real + wrong) + fake) + percept
        wrong_value = wrong.item()
        total_value = ((real.item() + wrong_value) + fake.item()) + percept.item()
    else:
        total = (real + fake) + percept
        wrong_value = None
        total_value = (real.item() + fake.item()) + percept.item()

    return LossBundle(
        l_percept=percept.item(), l_d_adv_real=real.item(), l_d_adv_wrong=wrong_value,
        l_d_adv_fake=fake.item(), l_d_total=total_value, total=total,
    )


def g_loss(logits_fake: Tensor) -> Tensor:
    """L_G = −E[D(G(z, ĉ), μ)]"""
    return -logits_fake.mean()
