"""
Модули с параметрами: базовый ``Module`` и слои, из которых собраны сети.
"""
from __future__ import annotations

import hashlib
from typing import Iterator, Mapping, Optional

import numpy as np

from modules.enums import BnMode
from modules.errors import IncompatibleCheckpointError
from modules.tensor import functional as F
from modules.tensor.rng import Rng
from modules.tensor.tensor import Tensor

GAN_INIT_STD = 0.02


class Parameter(Tensor):
    """Обучаемый тензор (лист графа с ``requires_grad``)"""

    def __init__(self, data, name: Optional[str] = None):
        super().__init__(np.asarray(data, dtype=np.float32), requires_grad=True, name=name)


class Module:
    """
    Базовый класс сетей.

    Параметры и подмодули находятся обходом атрибутов в порядке
    присваивания; списки и словари подмодулей тоже обходятся.
    """
    __buffers__: tuple[str, ...] = ()

    def __init__(self):
        self.training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    # ---------------------------------------------------------------
    # Обход
    # ---------------------------------------------------------------

    def named_children(self) -> Iterator[tuple[str, 'Module']]:
        for key, value in vars(self).items():
            if isinstance(value, Module):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{key}.{i}", item
            elif isinstance(value, dict):
                for sub_key, item in value.items():
                    if isinstance(item, Module):
                        yield f"{key}.{sub_key}", item

    def named_parameters(self, prefix: str = '') -> Iterator[tuple[str, Parameter]]:
        for key, value in vars(self).items():
            if isinstance(value, Parameter):
                yield f"{prefix}{key}", value
        for name, child in self.named_children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = '') -> Iterator[tuple[str, np.ndarray]]:
        for key in self.__buffers__:
            yield f"{prefix}{key}", getattr(self, key)
        for name, child in self.named_children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    # ---------------------------------------------------------------
    # Режимы и градиенты
    # ---------------------------------------------------------------

    def train(self, mode: bool = True) -> 'Module':
        self.training = mode
        for _, child in self.named_children():
            child.train(mode)
        return self

    def eval(self) -> 'Module':
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def requires_grad_(self, flag: bool) -> 'Module':
        for p in self.parameters():
            p.requires_grad = flag
        return self

    # ---------------------------------------------------------------
    # Состояние
    # ---------------------------------------------------------------

    def state_dict(self, prefix: str = '') -> dict[str, np.ndarray]:
        state = {name: p.data for name, p in self.named_parameters(prefix)}
        state.update({name: buf for name, buf in self.named_buffers(prefix)})
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray], prefix: str = ''):
        """
        Загрузить параметры и буферы.

        Raises:
            IncompatibleCheckpointError: при отсутствующих ключах или другой форме
        """
        expected = self.state_dict(prefix)
        missing = [k for k in expected if k not in state]
        if missing:
            raise IncompatibleCheckpointError(f"В чекпоинте нет тензоров: {missing[:5]}")
        for name, current in expected.items():
            if tuple(state[name].shape) != tuple(current.shape):
                raise IncompatibleCheckpointError(
                    f"Тензор {name}: в чекпоинте {tuple(state[name].shape)}, в модели {tuple(current.shape)}"
                )
        for name, p in self.named_parameters(prefix):
            p.data = np.array(state[name], dtype=np.float32)
        self._load_buffers(state, prefix)

    def _load_buffers(self, state: Mapping[str, np.ndarray], prefix: str):
        for key in self.__buffers__:
            setattr(self, key, np.array(state[f"{prefix}{key}"], dtype=np.float32))
        for name, child in self.named_children():
            child._load_buffers(state, f"{prefix}{name}.")

    def digest(self) -> str:
        """sha256 по всем параметрам и буферам"""
        h = hashlib.sha256()
        for name, arr in sorted(self.state_dict().items()):
            h.update(name.encode('utf-8'))
            h.update(np.ascontiguousarray(arr, dtype='<f4').tobytes())
        return h.hexdigest()


class Linear(Module):
    """Полносвязный слой N×F → N×G"""

    def __init__(self, in_features: int, out_features: int, rng: Rng, std: Optional[float] = None):
        super().__init__()
        std = std if std is not None else 1.0 / np.sqrt(in_features)
        self.weight = Parameter(rng.normal((in_features, out_features), std=std))
        self.bias = Parameter(np.zeros(out_features, dtype=np.float32))

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class Conv2d(Module):
    """Свёртка с инициализацией N(0, 0.02)"""

    def __init__(self, in_channels: int, out_channels: int, kernel: int, rng: Rng,
                 stride: int = 1, pad: int = 0, std: float = GAN_INIT_STD):
        super().__init__()
        self.stride, self.pad = stride, pad
        self.weight = Parameter(rng.normal((out_channels, in_channels, kernel, kernel), std=std))
        self.bias = Parameter(np.zeros(out_channels, dtype=np.float32))

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, stride=self.stride, pad=self.pad)


class BatchNorm2d(Module):
    """Батч-нормализация с единичным gamma и нулевым beta при создании"""
    __buffers__ = ('running_mean', 'running_var')

    def __init__(self, channels: int, eps: float = F.BN_EPS, momentum: float = F.BN_MOMENTUM):
        super().__init__()
        self.eps, self.momentum = eps, momentum
        self.gamma = Parameter(np.ones(channels, dtype=np.float32))
        self.beta = Parameter(np.zeros(channels, dtype=np.float32))
        stats = F.RunningStats.fresh(channels)
        self.running_mean, self.running_var = stats.mean, stats.var

    def forward(self, x: Tensor) -> Tensor:
        stats = F.RunningStats(self.running_mean, self.running_var)
        mode = BnMode.train if self.training else BnMode.eval
        out = F.batch_norm(x, self.gamma, self.beta, mode, stats, eps=self.eps, momentum=self.momentum)
        self.running_mean, self.running_var = stats.mean, stats.var
        return out


class Embedding(Module):
    """Таблица векторов токенов"""

    def __init__(self, num_tokens: int, dim: int, rng: Rng, std: float = 1.0):
        super().__init__()
        self.weight = Parameter(rng.normal((num_tokens, dim), std=std))

    def forward(self, ids: np.ndarray) -> Tensor:
        return F.embedding(self.weight, ids)
