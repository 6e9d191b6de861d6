"""
Проверка градиентов центральными конечными разностями.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from modules.errors import ContractError
from modules.tensor.tensor import Tensor, no_grad


@dataclass
class GradCheckReport:
    """Итог проверки: максимальная относительная ошибка по всем входам"""
    name: str
    max_rel_error: float
    tolerance: float
    passed: bool
    usable: bool = True
    per_input: list[float] = field(default_factory=list)

    def __str__(self) -> str:
        status = 'ok' if self.passed else ('unusable' if not self.usable else 'FAIL')
        return f"{self.name:<28} max rel. err = {self.max_rel_error:.3e}  [{status}]"


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max|a − n| / max(max|a|, max|n|), с полом 1e-8 в знаменателе"""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def grad_check(f: Callable[..., Tensor], inputs: Sequence, step: float = 1e-2, tolerance: float = 1e-3,
               dtype=np.float32, name: str = '') -> GradCheckReport:
    """
    Сравнить аналитический градиент скалярной функции с численным.

    Численный градиент: (f(x+h) − f(x−h)) / 2h по каждой координате каждого входа.

    Args:
        f: Скалярная детерминированная функция тензоров
        inputs: Точка (массивы или тензоры)
        step: Шаг h
        tolerance: Допустимая относительная ошибка
        dtype: Точность вычисления (float32 или float64)
        name: Имя проверки для отчёта
    """
    points = [np.array(x.data if isinstance(x, Tensor) else x, dtype=dtype) for x in inputs]

    def evaluate(arrays) -> float:
        with no_grad():
            out = f(*[Tensor(a) for a in arrays])
        if out.size != 1:
            raise ContractError(f"grad_check ожидает скалярную функцию, форма {out.shape}")
        return float(out.data.reshape(-1)[0])

    first, second = evaluate(points), evaluate(points)
    if first != second:
        return GradCheckReport(name, float('inf'), tolerance, passed=False, usable=False)

    leaves = [Tensor(p.copy(), requires_grad=True) for p in points]
    f(*leaves).backward()
    analytic = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves]

    errors = []
    for index, point in enumerate(points):
        numeric = np.zeros(point.shape, dtype=np.float64)
        for coord in np.ndindex(point.shape):
            shifted = [p.copy() for p in points]
            original = point[coord]
            shifted[index][coord] = original + step
            plus = evaluate(shifted)
            shifted[index][coord] = original - step
            minus = evaluate(shifted)
            numeric[coord] = (plus - minus) / (2 * step)
        errors.append(relative_error(analytic[index], numeric))

    worst = max(errors) if errors else 0.0
    return GradCheckReport(name, worst, tolerance, passed=worst <= tolerance, per_input=errors)
