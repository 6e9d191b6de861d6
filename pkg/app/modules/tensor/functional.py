"""
Слои, нужные генератору, дискриминатору и энкодеру:
свёртка, nearest-апсемплинг, пулинг, батч-нормализация, GLU, линейный слой,
таблица эмбеддингов и сдвиг изображений для аугментации.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from modules.enums import BnMode
from modules.errors import DegenerateBatchError, DimensionError, ParameterError
from modules.tensor.tensor import Function, Tensor

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    """floor((size + 2·pad − kernel) / stride) + 1"""
    return (size + 2 * pad - kernel) // stride + 1


class Conv2d(Function):
    def forward(self, x, w, b, stride: int, pad: int):
        if x.ndim != 4 or w.ndim != 4:
            raise DimensionError(f"conv2d ожидает NCHW и OIkk, получены {x.shape} и {w.shape}")
        if x.shape[1] != w.shape[1]:
            raise DimensionError(f"Каналы входа {x.shape[1]} не совпадают с весом {w.shape}")
        if b.shape != (w.shape[0],):
            raise DimensionError(f"Смещение формы {b.shape} не подходит к {w.shape[0]} выходным каналам")

        n, _, h, wd = x.shape
        kh, kw = w.shape[2:]
        ho, wo = conv_output_size(h, kh, stride, pad), conv_output_size(wd, kw, stride, pad)
        if ho < 1 or wo < 1:
            raise DimensionError(f"Ядро {kh}x{kw} больше входа {h}x{wd} с pad={pad}")

        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
        windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
        self.windows, self.w = windows, w
        self.stride, self.pad, self.padded_shape = stride, pad, xp.shape
        out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))
        return out.transpose(0, 3, 1, 2) + b[None, :, None, None]

    def backward(self, grad):
        kh, kw = self.w.shape[2:]
        ho, wo = grad.shape[2:]
        s = self.stride

        grad_b = grad.sum(axis=(0, 2, 3))
        grad_w = np.tensordot(grad, self.windows, axes=([0, 2, 3], [0, 2, 3]))

        cols = np.tensordot(grad, self.w, axes=([1], [0]))  # N, Ho, Wo, C, kh, kw
        grad_xp = np.zeros(self.padded_shape, dtype=grad.dtype)
        for i in range(kh):
            for j in range(kw):
                grad_xp[:, :, i:i + s * ho:s, j:j + s * wo:s] += cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        p = self.pad
        grad_x = grad_xp[:, :, p:self.padded_shape[2] - p, p:self.padded_shape[3] - p] if p else grad_xp
        return grad_x, grad_w, grad_b


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """
    Двумерная свёртка NCHW.

    Args:
        x: Вход N×C×H×W
        weight: Ядро O×C×k×k
        bias: Смещение O
        stride: Шаг (≥ 1)
        pad: Нулевое дополнение (≥ 0)
    """
    if stride < 1 or pad < 0:
        raise ParameterError(f"conv2d: stride={stride}, pad={pad} недопустимы")
    return Conv2d.apply(x, weight, bias, stride=int(stride), pad=int(pad))


class NearestUpsample(Function):
    def forward(self, x, factor: int):
        self.factor = factor
        return x.repeat(factor, axis=2).repeat(factor, axis=3)

    def backward(self, grad):
        n, c, h, w = grad.shape
        f = self.factor
        return (grad.reshape(n, c, h // f, f, w // f, f).sum(axis=(3, 5)),)


def nearest_upsample(x: Tensor, factor: int = 2) -> Tensor:
    if factor < 2:
        raise ParameterError(f"Множитель апсемплинга {factor} < 2")
    if x.ndim != 4:
        raise DimensionError(f"Апсемплинг ожидает NCHW, форма {x.shape}")
    return NearestUpsample.apply(x, factor=int(factor))


class AvgPool(Function):
    def forward(self, x, factor: int):
        n, c, h, w = x.shape
        self.factor = factor
        return x.reshape(n, c, h // factor, factor, w // factor, factor).mean(axis=(3, 5))

    def backward(self, grad):
        f = self.factor
        return (grad.repeat(f, axis=2).repeat(f, axis=3) / (f * f),)


def avg_pool(x: Tensor, factor: int) -> Tensor:
    """Усреднение по непересекающимся блокам factor×factor (area-даунсемплинг)"""
    if x.ndim != 4:
        raise DimensionError(f"Пулинг ожидает NCHW, форма {x.shape}")
    if factor < 1 or x.shape[2] % factor or x.shape[3] % factor:
        raise ParameterError(f"Размер {x.shape[2:]} не делится на {factor}")
    if factor == 1:
        return x
    return AvgPool.apply(x, factor=int(factor))


def adaptive_avg_pool(x: Tensor, size: int) -> Tensor:
    """Пулинг до size×size; сторона входа должна делиться на size"""
    if x.ndim != 4 or x.shape[2] != x.shape[3]:
        raise DimensionError(f"Ожидается квадратная карта NCHW, форма {x.shape}")
    if x.shape[2] < size or x.shape[2] % size:
        raise ParameterError(f"Сторона {x.shape[2]} не сводится к {size}")
    return avg_pool(x, x.shape[2] // size)


@dataclass
class RunningStats:
    """Скользящие статистики батч-нормализации"""
    mean: np.ndarray
    var: np.ndarray

    @classmethod
    def fresh(cls, channels: int) -> 'RunningStats':
        return cls(mean=np.zeros(channels, dtype=np.float32), var=np.ones(channels, dtype=np.float32))


class BatchNorm(Function):
    def forward(self, x, gamma, beta, mode: BnMode, stats: RunningStats, eps: float, momentum: float):
        axes = (0, 2, 3)
        shape = (1, -1, 1, 1)
        if mode == BnMode.train:
            count = x.shape[0] * x.shape[2] * x.shape[3]
            if count < 2:
                raise DegenerateBatchError(f"Батч-нормализация по {count} элементу на канал")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            stats.mean = ((1 - momentum) * stats.mean + momentum * mean).astype(stats.mean.dtype)
            unbiased = var * (count / (count - 1))
            stats.var = ((1 - momentum) * stats.var + momentum * unbiased).astype(stats.var.dtype)
        else:
            count = 0
            mean, var = stats.mean.astype(x.dtype), stats.var.astype(x.dtype)

        inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
        xhat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
        self.mode, self.count = mode, count
        self.xhat, self.inv_std, self.gamma = xhat, inv_std, gamma
        return gamma.reshape(shape) * xhat + beta.reshape(shape)

    def backward(self, grad):
        shape = (1, -1, 1, 1)
        axes = (0, 2, 3)
        grad_gamma = (grad * self.xhat).sum(axis=axes)
        grad_beta = grad.sum(axis=axes)
        dxhat = grad * self.gamma.reshape(shape)
        if self.mode == BnMode.train:
            m = self.count
            grad_x = (self.inv_std.reshape(shape) / m) * (
                m * dxhat
                - dxhat.sum(axis=axes, keepdims=True)
                - self.xhat * (dxhat * self.xhat).sum(axis=axes, keepdims=True)
            )
        else:
            grad_x = dxhat * self.inv_std.reshape(shape)
        return grad_x, grad_gamma, grad_beta


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, mode: BnMode, stats: RunningStats,
               eps: float = BN_EPS, momentum: float = BN_MOMENTUM) -> Tensor:
    """
    Батч-нормализация по каналам NCHW.

    В режиме train нормирует по статистикам батча и обновляет ``stats``
    с инерцией ``momentum``; в режиме eval использует ``stats``.
    """
    if x.ndim != 4 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise DimensionError(f"batch_norm: вход {x.shape}, gamma {gamma.shape}, beta {beta.shape}")
    return BatchNorm.apply(x, gamma, beta, mode=BnMode(mode), stats=stats, eps=eps, momentum=momentum)


class Glu(Function):
    def forward(self, x, axis: int):
        half = x.shape[axis] // 2
        a, b = np.split(x, [half], axis=axis)
        self.a, self.gate, self.axis = a, expit(b), axis
        return a * self.gate

    def backward(self, grad):
        grad_a = grad * self.gate
        grad_b = grad * self.a * self.gate * (1 - self.gate)
        return (np.concatenate([grad_a, grad_b], axis=self.axis),)


def glu(x: Tensor, axis: int = 1) -> Tensor:
    """a ⊙ sigmoid(b), где (a, b) — две половины каналов"""
    if x.shape[axis] % 2:
        raise DimensionError(f"GLU требует чётного числа каналов, получено {x.shape[axis]}")
    return Glu.apply(x, axis=axis % x.ndim)


class LinearOp(Function):
    def forward(self, x, w, b):
        if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0] or b.shape != (w.shape[1],):
            raise DimensionError(f"linear: вход {x.shape}, вес {w.shape}, смещение {b.shape}")
        self.x, self.w = x, w
        return x @ w + b

    def backward(self, grad):
        return grad @ self.w.T, self.x.T @ grad, grad.sum(axis=0)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Аффинное отображение N×F → N×G"""
    return LinearOp.apply(x, weight, bias)


class EmbeddingLookup(Function):
    def forward(self, table, ids: np.ndarray):
        self.ids, self.shape = ids, table.shape
        return table[ids]

    def backward(self, grad):
        out = np.zeros(self.shape, dtype=grad.dtype)
        np.add.at(out, self.ids, grad)
        return (out,)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise DimensionError(f"Идентификаторы токенов вне таблицы размера {table.shape[0]}")
    return EmbeddingLookup.apply(table, ids=ids)


class Translate(Function):
    def forward(self, x, shifts: np.ndarray):
        n, _, h, w = x.shape
        rows = [np.clip(np.arange(h) - dy, 0, h - 1) for dy, _ in shifts]
        cols = [np.clip(np.arange(w) - dx, 0, w - 1) for _, dx in shifts]
        self.index = list(zip(rows, cols))
        self.shape = x.shape
        return np.stack([x[i][:, r[:, None], c[None, :]] for i, (r, c) in enumerate(self.index)])

    def backward(self, grad):
        out = np.zeros(self.shape, dtype=grad.dtype)
        for i, (r, c) in enumerate(self.index):
            np.add.at(out[i], (slice(None), r[:, None], c[None, :]), grad[i])
        return (out,)


def translate(x: Tensor, shifts: np.ndarray) -> Tensor:
    """
    Сдвиг каждого изображения на целые (dy, dx) с повтором краевых пикселей.

    Args:
        x: Батч N×C×H×W
        shifts: Целочисленный массив N×2 со сдвигами (dy, dx)
    """
    shifts = np.asarray(shifts, dtype=np.int64)
    if shifts.shape != (x.shape[0], 2):
        raise DimensionError(f"Сдвиги формы {shifts.shape} не подходят к батчу {x.shape[0]}")
    return Translate.apply(x, shifts=shifts)
