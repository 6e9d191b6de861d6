"""
Синтез изображений обученным генератором: сетки во время обучения,
команды ``generate`` и ``evaluate``.
"""
from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import numpy as np

from modules.errors import ContractError, DimensionError
from modules.gan.conditioning import CaNet, build_latent, ca_forward
from modules.gan.generator import Generator
from modules.images import make_grid, save_png
from modules.tensor import Module, Rng, Tensor, no_grad


@contextmanager
def eval_mode(*modules: Optional[Module]):
    """Временно перевести модули в режим eval (running-статистики BN)"""
    previous = [(m, m.training) for m in modules if m is not None]
    for module, _ in previous:
        module.eval()
    try:
        yield
    finally:
        for module, mode in previous:
            module.train(mode)


def synthesize(generator: Generator, count: int, rng: Rng, ca_net: Optional[CaNet] = None,
               embeddings: Optional[np.ndarray] = None, c_dim: Optional[int] = None,
               batch_size: int = 32) -> np.ndarray:
    """
    Сгенерировать ``count`` изображений N×3×S×S в [-1, 1].

    ĉ = μ (ω = 0) при наличии эмбеддингов, иначе нулевой вектор.

    Args:
        generator: Генератор
        count: Число изображений
        rng: Поток для z
        ca_net: CA-сеть (нужна вместе с ``embeddings``)
        embeddings: Эмбеддинги подписей count×embed_dim
        c_dim: Размер ĉ (обязателен без CA-сети)
        batch_size: Размер пакета генерации

    Raises:
        DimensionError: число эмбеддингов не равно ``count`` или c_dim не сходится с CA-сетью
        ContractError: эмбеддинги без CA-сети или нет ни CA-сети, ни ``c_dim``
    """
    if embeddings is not None and ca_net is None:
        raise ContractError("Эмбеддинги подписей переданы без CA-сети")
    if embeddings is not None and len(embeddings) != count:
        raise DimensionError(f"Эмбеддингов {len(embeddings)}, изображений {count}")
    if c_dim is None:
        if ca_net is None:
            raise ContractError("Без CA-сети размер ĉ задаётся явно (c_dim)")
        c_dim = ca_net.c_dim
    elif ca_net is not None and ca_net.c_dim != c_dim:
        raise DimensionError(f"c_dim={c_dim}, CA-сеть выдаёт {ca_net.c_dim}")
    if not 0 < c_dim < generator.latent_dim:
        raise DimensionError(f"c_dim={c_dim} вне латента генератора длины {generator.latent_dim}")
    z_dim = generator.latent_dim - c_dim

    outputs = []
    with no_grad(), eval_mode(generator, ca_net):
        for start in range(0, count, batch_size):
            n = min(batch_size, count - start)
            if ca_net is not None and embeddings is not None:
                phi = Tensor(np.asarray(embeddings[start:start + n], dtype=np.float32))
                c_hat = ca_forward(ca_net, phi, omega=np.zeros((n, c_dim), dtype=np.float32)).c_hat
            else:
                c_hat = Tensor(np.zeros((n, c_dim), dtype=np.float32))
            latent = build_latent(c_hat, rng.child(start), z_dim)
            outputs.append(generator(latent).data)
    return np.concatenate(outputs).astype(np.float32)


def write_grid(images: np.ndarray, path: str | Path, columns: int = 4) -> Path:
    return save_png(Path(path), make_grid(list(images), columns))
