"""
Плотный тензор с обратным автоматическим дифференцированием.

Каждая операция — подкласс ``Function``: ``forward`` работает с numpy-массивами
и сохраняет нужные активации, ``backward`` возвращает градиенты по входам.
Градиенты листьев накапливаются (``+=``) до явного обнуления.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from modules.errors import ContractError, DimensionError, NumericError, ParameterError

DEFAULT_DTYPE = np.float32
LEAKY_SLOPE = 0.2

_grad_state = {'enabled': True}


@contextmanager
def no_grad():
    """Отключить построение графа внутри блока"""
    previous = _grad_state['enabled']
    _grad_state['enabled'] = False
    try:
        yield
    finally:
        _grad_state['enabled'] = previous


def is_grad_enabled() -> bool:
    return _grad_state['enabled']


ArrayLike = Union['Tensor', np.ndarray, float, int, Sequence]


class Tensor:
    """
    n-мерный массив, участвующий в графе вычислений.

    Attributes:
        data: Значения (float32 по умолчанию, row-major)
        requires_grad: Нужен ли градиент по этому тензору
        grad: Накопленный градиент той же формы или None
    """
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: Optional[str] = None):
        arr = np.asarray(data, dtype=dtype) if dtype is not None else np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._ctx: Optional[Function] = None

    def __repr__(self) -> str:
        return f"<Tensor shape={self.shape} dtype={self.data.dtype} requires_grad={self.requires_grad}>"

    # ---------------------------------------------------------------
    # Свойства
    # ---------------------------------------------------------------

    @property
    def shape(self) -> tuple:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._ctx is None

    def item(self) -> float:
        if self.size != 1:
            raise DimensionError(f"item() ожидает один элемент, форма {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> 'Tensor':
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self) -> 'Graph':
        return backward(self)

    # ---------------------------------------------------------------
    # Арифметика
    # ---------------------------------------------------------------

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __truediv__(self, other): return div(self, other)
    def __rtruediv__(self, other): return div(other, self)
    def __neg__(self): return neg(self)
    def __pow__(self, exponent: float): return power(self, exponent)
    def __matmul__(self, other): return matmul(self, other)
    def __getitem__(self, index): return getitem(self, index)

    def sum(self, axes=None, keepdims: bool = False): return reduce_sum(self, axes, keepdims)
    def mean(self, axes=None, keepdims: bool = False): return reduce_mean(self, axes, keepdims)
    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)
    def tanh(self): return tanh(self)
    def sigmoid(self): return sigmoid(self)
    def exp(self): return exp(self)


def as_tensor(value: ArrayLike, like: Optional[Tensor] = None) -> Tensor:
    """Обернуть число или массив в тензор с dtype соседнего операнда"""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else DEFAULT_DTYPE
    return Tensor(np.asarray(value, dtype=dtype))


# -------------------------------------------------------------------
# Граф
# -------------------------------------------------------------------

class Function:
    """Узел графа: входы, сохранённые активации и правило обратного прохода"""

    def __init__(self, *parents: Tensor):
        self.parents = parents

    @classmethod
    def apply(cls, *inputs: Tensor, **params) -> Tensor:
        ctx = cls(*inputs)
        out = ctx.forward(*[t.data for t in inputs], **params)
        if not np.all(np.isfinite(out)):
            raise NumericError(f"Операция {cls.__name__} дала NaN/Inf (форма {np.shape(out)})")
        requires = is_grad_enabled() and any(t.requires_grad for t in inputs)
        result = Tensor(out, requires_grad=requires)
        if requires:
            result._ctx = ctx
        return result

    def forward(self, *args, **params) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> tuple:
        raise NotImplementedError


@dataclass
class Graph:
    """Итог обратного прохода: узлы в топологическом порядке и листья с градиентом"""
    nodes: list[str] = field(default_factory=list)
    leaves: list[Tensor] = field(default_factory=list)


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._ctx.parents:
            if parent._ctx is not None and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> Graph:
    """
    Обратный проход от скалярной функции потерь.

    Градиенты листьев с ``requires_grad`` накапливаются, повторный вызов
    без обнуления прибавит их ещё раз.

    Raises:
        ContractError: если ``loss`` не скаляр или не связан с графом
    """
    if loss.size != 1:
        raise ContractError(f"backward ожидает скаляр, получена форма {loss.shape}")

    graph = Graph()
    if loss._ctx is None:
        if loss.requires_grad:
            loss.grad = np.ones_like(loss.data) if loss.grad is None else loss.grad + 1
            graph.leaves.append(loss)
        return graph

    order = _topological_order(loss)
    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    seen_leaves: dict[int, Tensor] = {}

    for node in reversed(order):
        grad = pending.pop(id(node), None)
        if grad is None:
            continue
        ctx = node._ctx
        graph.nodes.append(type(ctx).__name__)
        parent_grads = ctx.backward(grad)
        for parent, pgrad in zip(ctx.parents, parent_grads):
            if pgrad is None or not parent.requires_grad:
                continue
            if parent._ctx is None:
                pgrad = np.asarray(pgrad, dtype=parent.dtype).reshape(parent.shape)
                parent.grad = pgrad.copy() if parent.grad is None else parent.grad + pgrad
                seen_leaves[id(parent)] = parent
            elif id(parent) in pending:
                pending[id(parent)] = pending[id(parent)] + pgrad
            else:
                pending[id(parent)] = pgrad

    graph.leaves = list(seen_leaves.values())
    return graph


# -------------------------------------------------------------------
# Поэлементные операции
# -------------------------------------------------------------------

def _broadcast_shape(a: np.ndarray, b: np.ndarray) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise DimensionError(f"Несовместимые формы {a.shape} и {b.shape}") from e


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Свернуть градиент обратно к форме операнда после broadcasting"""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Add(Function):
    def forward(self, a, b):
        _broadcast_shape(a, b)
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return unbroadcast(grad, self.shapes[0]), unbroadcast(grad, self.shapes[1])


class Sub(Function):
    def forward(self, a, b):
        _broadcast_shape(a, b)
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return unbroadcast(grad, self.shapes[0]), unbroadcast(-grad, self.shapes[1])


class Mul(Function):
    def forward(self, a, b):
        _broadcast_shape(a, b)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return unbroadcast(grad * self.b, self.a.shape), unbroadcast(grad * self.a, self.b.shape)


class Div(Function):
    def forward(self, a, b):
        _broadcast_shape(a, b)
        self.a, self.b = a, b
        return a / b

    def backward(self, grad):
        ga = grad / self.b
        gb = -grad * self.a / (self.b * self.b)
        return unbroadcast(ga, self.a.shape), unbroadcast(gb, self.b.shape)


class Neg(Function):
    def forward(self, x):
        return -x

    def backward(self, grad):
        return (-grad,)


class Power(Function):
    def forward(self, x, exponent: float):
        self.x, self.exponent = x, exponent
        return np.power(x, exponent).astype(x.dtype, copy=False)

    def backward(self, grad):
        p = self.exponent
        return (grad * p * np.power(self.x, p - 1).astype(self.x.dtype, copy=False),)


class Exp(Function):
    def forward(self, x):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Sqrt(Function):
    def forward(self, x):
        self.out = np.sqrt(x)
        return self.out

    def backward(self, grad):
        return (grad * 0.5 / self.out,)


class Abs(Function):
    def forward(self, x):
        self.sign = np.sign(x)
        return np.abs(x)

    def backward(self, grad):
        return (grad * self.sign,)


class Tanh(Function):
    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return (grad * (1 - self.out * self.out),)


class Sigmoid(Function):
    def forward(self, x):
        self.out = expit(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1 - self.out),)


class LeakyRelu(Function):
    def forward(self, x, slope: float):
        self.scale = np.where(x > 0, 1, slope).astype(x.dtype)
        return x * self.scale

    def backward(self, grad):
        return (grad * self.scale,)


class Relu(Function):
    def forward(self, x):
        self.mask = (x > 0).astype(x.dtype)
        return x * self.mask

    def backward(self, grad):
        return (grad * self.mask,)


class Clamp(Function):
    def forward(self, x, low: float, high: float):
        self.mask = ((x >= low) & (x <= high)).astype(x.dtype)
        return np.clip(x, low, high)

    def backward(self, grad):
        return (grad * self.mask,)


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return Add.apply(a, b)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return Sub.apply(a, b)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return Mul.apply(a, b)


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return Div.apply(a, b)


def neg(x: Tensor) -> Tensor:
    return Neg.apply(x)


def power(x: Tensor, exponent: float) -> Tensor:
    return Power.apply(x, exponent=float(exponent))


def exp(x: Tensor) -> Tensor:
    return Exp.apply(x)


def sqrt(x: Tensor) -> Tensor:
    return Sqrt.apply(x)


def absolute(x: Tensor) -> Tensor:
    return Abs.apply(x)


def tanh(x: Tensor) -> Tensor:
    return Tanh.apply(x)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    return LeakyRelu.apply(x, slope=slope)


def relu(x: Tensor) -> Tensor:
    return Relu.apply(x)


def clamp(x: Tensor, low: float = -1.0, high: float = 1.0) -> Tensor:
    return Clamp.apply(x, low=low, high=high)


def noise_add(x: Tensor, noise: np.ndarray, weight: Tensor) -> Tensor:
    """``x + weight * noise``: шум — константа, вес обучаемый"""
    noise = np.asarray(noise, dtype=x.dtype)
    if noise.shape != x.shape:
        try:
            np.broadcast_shapes(noise.shape, x.shape)
        except ValueError as e:
            raise DimensionError(f"Шум формы {noise.shape} не совместим с {x.shape}") from e
    return add(x, mul(weight, Tensor(noise)))


def _pair(a: ArrayLike, b: ArrayLike) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


# -------------------------------------------------------------------
# Редукции
# -------------------------------------------------------------------

def normalize_axes(axes, ndim: int) -> tuple:
    """Привести ``axes`` к кортежу неотрицательных осей"""
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    result = []
    for axis in axes:
        if not isinstance(axis, (int, np.integer)) or not -ndim <= axis < ndim:
            raise ParameterError(f"Недопустимая ось {axis} для тензора ранга {ndim}")
        result.append(int(axis) % ndim)
    if len(set(result)) != len(result):
        raise ParameterError(f"Повторяющиеся оси {tuple(axes)}")
    return tuple(sorted(result))


class Sum(Function):
    def forward(self, x, axes: tuple, keepdims: bool):
        self.shape, self.axes, self.keepdims = x.shape, axes, keepdims
        return np.sum(x, axis=axes, keepdims=keepdims, dtype=x.dtype)

    def backward(self, grad):
        if not self.keepdims and self.axes:
            grad = np.expand_dims(grad, self.axes)
        return (np.broadcast_to(grad, self.shape),)


class Max(Function):
    def forward(self, x, axis: int):
        self.shape, self.axis = x.shape, axis
        self.index = np.expand_dims(np.argmax(x, axis=axis), axis)
        return np.take_along_axis(x, self.index, axis=axis).squeeze(axis)

    def backward(self, grad):
        out = np.zeros(self.shape, dtype=grad.dtype)
        np.put_along_axis(out, self.index, np.expand_dims(grad, self.axis), axis=self.axis)
        return (out,)


def reduce_sum(x: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    """Сумма по осям; пустой список осей — тождество"""
    return Sum.apply(x, axes=normalize_axes(axes, x.ndim), keepdims=keepdims)


def reduce_mean(x: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    axes = normalize_axes(axes, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return mul(reduce_sum(x, axes, keepdims), 1.0 / count)


def reduce_max(x: Tensor, axis: int) -> Tensor:
    (axis,) = normalize_axes(axis, x.ndim)
    return Max.apply(x, axis=axis)


# -------------------------------------------------------------------
# Форма и индексация
# -------------------------------------------------------------------

class Reshape(Function):
    def forward(self, x, shape: tuple):
        self.shape = x.shape
        try:
            return x.reshape(shape)
        except ValueError as e:
            raise DimensionError(f"Нельзя привести форму {x.shape} к {shape}") from e

    def backward(self, grad):
        return (grad.reshape(self.shape),)


class GetItem(Function):
    def forward(self, x, index):
        self.shape, self.index = x.shape, index
        try:
            return np.array(x[index])
        except IndexError as e:
            raise DimensionError(f"Индекс {index} вне тензора формы {x.shape}") from e

    def backward(self, grad):
        out = np.zeros(self.shape, dtype=grad.dtype)
        np.add.at(out, self.index, grad)
        return (out,)


class Concat(Function):
    def forward(self, *arrays, axis: int):
        ref = arrays[0].shape
        for arr in arrays[1:]:
            if arr.ndim != len(ref) or any(a != b for i, (a, b) in enumerate(zip(arr.shape, ref)) if i != axis):
                raise DimensionError(f"Конкатенация по оси {axis}: формы {ref} и {arr.shape} несовместимы")
        self.axis = axis
        self.splits = np.cumsum([arr.shape[axis] for arr in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


class MatMul(Function):
    def forward(self, a, b):
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise DimensionError(f"Матричное произведение {a.shape} @ {b.shape} невозможно")
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad):
        return grad @ self.b.T, self.a.T @ grad


class LogSoftmax(Function):
    def forward(self, x, axis: int):
        shifted = x - x.max(axis=axis, keepdims=True)
        self.out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        self.axis = axis
        return self.out

    def backward(self, grad):
        soft = np.exp(self.out)
        return (grad - soft * grad.sum(axis=self.axis, keepdims=True),)


def reshape(x: Tensor, shape) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def getitem(x: Tensor, index) -> Tensor:
    return GetItem.apply(x, index=index)


def concat(tensors: Iterable[Tensor], axis: int = 1) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ParameterError("Конкатенация пустого списка")
    (axis,) = normalize_axes(axis, tensors[0].ndim)
    return Concat.apply(*tensors, axis=axis)


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return MatMul.apply(a, b)


def log_softmax(x: Tensor, axis: int = 1) -> Tensor:
    (axis,) = normalize_axes(axis, x.ndim)
    return LogSoftmax.apply(x, axis=axis)
