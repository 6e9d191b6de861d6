"""
Детерминированный генератор случайных чисел на счётчике (Philox).

Один и тот же ``seed`` и ключ потока дают один и тот же поток значений
независимо от числа потоков и порядка создания соседних потоков.
"""
from __future__ import annotations

from typing import Any

import numpy as np


class Rng:
    """
    Поток случайных чисел.

    Args:
        seed: 64-битное зерно запуска
        stream: Ключ подпотока (например, номер итерации и назначение)
    """

    def __init__(self, seed: int, stream: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.stream = tuple(int(s) for s in stream)
        sequence = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, *self.stream])
        self._gen = np.random.Generator(np.random.Philox(sequence))

    def __repr__(self) -> str:
        return f"<Rng seed={self.seed} stream={self.stream}>"

    def child(self, *keys: int) -> 'Rng':
        """Независимый подпоток, определяемый только (seed, stream + keys)"""
        return Rng(self.seed, self.stream + tuple(keys))

    # ---------------------------------------------------------------
    # Выборки
    # ---------------------------------------------------------------

    def normal(self, shape, std: float = 1.0, dtype=np.float32) -> np.ndarray:
        sample = self._gen.standard_normal(size=shape, dtype=np.float32 if dtype == np.float32 else np.float64)
        return (sample * std).astype(dtype, copy=False) if std != 1.0 else sample.astype(dtype, copy=False)

    def uniform(self, low: float, high: float, shape=None, dtype=np.float32):
        sample = self._gen.uniform(low, high, size=shape)
        return sample.astype(dtype) if shape is not None else float(sample)

    def integers(self, low: int, high: int, shape=None):
        """Целые из [low, high)"""
        sample = self._gen.integers(low, high, size=shape)
        return sample if shape is not None else int(sample)

    def choice(self, n: int, size=None, replace: bool = True):
        return self._gen.choice(n, size=size, replace=replace)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    # ---------------------------------------------------------------
    # Состояние
    # ---------------------------------------------------------------

    def get_state(self) -> dict:
        """JSON-совместимое состояние генератора"""
        return {
            'seed': self.seed,
            'stream': list(self.stream),
            'bit_generator': _to_json(self._gen.bit_generator.state),
        }

    def set_state(self, state: dict):
        self.seed = int(state['seed'])
        self.stream = tuple(state['stream'])
        self._gen.bit_generator.state = _from_json(state['bit_generator'])

    @classmethod
    def from_state(cls, state: dict) -> 'Rng':
        rng = cls(state['seed'], tuple(state['stream']))
        rng.set_state(state)
        return rng


def _to_json(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return {'__ndarray__': [int(v) for v in value.reshape(-1)], 'dtype': str(value.dtype)}
    if isinstance(value, dict):
        return {k: _to_json(v) for k, v in value.items()}
    if isinstance(value, np.integer):
        return int(value)
    return value


def _from_json(value: Any) -> Any:
    if isinstance(value, dict) and '__ndarray__' in value:
        return np.array(value['__ndarray__'], dtype=value['dtype'])
    if isinstance(value, dict):
        return {k: _from_json(v) for k, v in value.items()}
    return value
