"""
Оптимизаторы: SGD с моментом (энкодер) и Adam (GAN).

Состояние хранится по именам параметров, чтобы сохраняться
в блоки тензоров и восстанавливаться бит-в-бит.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Iterable, Mapping

import numpy as np

from modules.errors import IncompatibleCheckpointError
from modules.tensor.nn import Parameter


class Optimizer(ABC):
    """Базовый класс оптимизатора"""

    def __init__(self, named_params: Iterable[tuple[str, Parameter]], lr: float):
        self.params: dict[str, Parameter] = dict(named_params)
        self.lr = lr
        self.step_count = 0

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        """Один шаг по накопленным градиентам; параметры без градиента пропускаются"""
        self.step_count += 1
        for name, p in self.params.items():
            if p.grad is not None:
                p.data = self._update(name, p.data, p.grad.astype(p.data.dtype, copy=False))

    @abstractmethod
    def _update(self, name: str, value: np.ndarray, grad: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def _slots(self) -> dict[str, dict[str, np.ndarray]]:
        pass

    def state_dict(self, prefix: str) -> dict[str, np.ndarray]:
        state = {f"{prefix}/step": np.array(self.step_count, dtype=np.float32)}
        for slot, values in self._slots().items():
            # порядок параметров, а не порядок первых обновлений
            for name in self.params:
                if name in values:
                    state[f"{prefix}/{slot}/{name}"] = values[name]
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray], prefix: str):
        key = f"{prefix}/step"
        if key not in state:
            raise IncompatibleCheckpointError(f"В чекпоинте нет состояния оптимизатора {prefix}")
        self.step_count = int(state[key])
        for slot, values in self._slots().items():
            values.clear()
            for name, p in self.params.items():
                slot_key = f"{prefix}/{slot}/{name}"
                if slot_key in state:
                    if state[slot_key].shape != p.shape:
                        raise IncompatibleCheckpointError(
                            f"{slot_key}: форма {state[slot_key].shape} вместо {p.shape}")
                    values[name] = np.array(state[slot_key], dtype=np.float32)


class Sgd(Optimizer):
    """Градиентный спуск с моментом"""

    def __init__(self, named_params, lr: float = 1e-2, momentum: float = 0.9):
        super().__init__(named_params, lr)
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def _update(self, name, value, grad):
        v = self.velocity.get(name)
        v = grad if v is None else self.momentum * v + grad
        self.velocity[name] = v
        return value - self.lr * v

    def _slots(self):
        return {'velocity': self.velocity}


class Adam(Optimizer):
    """Adam, по умолчанию lr 2e-4 и betas (0.5, 0.999)"""

    def __init__(self, named_params, lr: float = 2e-4, betas: tuple[float, float] = (0.5, 0.999), eps: float = 1e-8):
        super().__init__(named_params, lr)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def _update(self, name, value, grad):
        m = self.m.get(name, np.zeros_like(value))
        v = self.v.get(name, np.zeros_like(value))
        m = self.beta1 * m + (1 - self.beta1) * grad
        v = self.beta2 * v + (1 - self.beta2) * grad * grad
        self.m[name], self.v[name] = m, v

        t = self.step_count
        m_hat = m / np.float32(1 - self.beta1 ** t)
        v_hat = v / np.float32(1 - self.beta2 ** t)
        return value - np.float32(self.lr) * m_hat / (np.sqrt(v_hat) + np.float32(self.eps))

    def _slots(self):
        return {'m': self.m, 'v': self.v}
