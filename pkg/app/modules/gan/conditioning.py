"""
Conditioning Augmentation: из эмбеддинга подписи φ_t получаем μ, σ
и стохастический вектор ĉ = μ + σ ⊙ ω, затем латент [ĉ | z].
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from modules.errors import ContractError, DimensionError
from modules.tensor import Linear, Module, Rng, Tensor, concat
from modules.tensor import tensor as T


@dataclass
class CaOutput:
    c_hat: Tensor
    mu: Tensor
    sigma: Tensor


@dataclass
class LatentCode:
    c_hat: Tensor
    z: Tensor
    vector: Tensor  # [ĉ | z], N×(c_dim + z_dim)

    @property
    def dim(self) -> int:
        return self.vector.shape[1]


class CaNet(Module):
    """Проекция embed_dim → 2·c_dim: первая половина — μ, вторая — log σ²"""

    def __init__(self, embed_dim: int, c_dim: int, rng: Rng):
        super().__init__()
        self.embed_dim, self.c_dim = embed_dim, c_dim
        self.projection = Linear(embed_dim, 2 * c_dim, rng)

    def forward(self, phi: Tensor, rng: Optional[Rng] = None, omega: Optional[np.ndarray] = None) -> CaOutput:
        return ca_forward(self, phi, rng, omega)


def ca_forward(net: CaNet, phi, rng: Optional[Rng] = None, omega: Optional[np.ndarray] = None) -> CaOutput:
    """
    ĉ = μ + σ ⊙ ω, ω ∼ N(0, 1) независимо по координатам.

    Args:
        net: Параметры CA
        phi: Эмбеддинги N×embed_dim (или один вектор)
        rng: Поток для ω
        omega: Готовый шум той же формы, что μ (нули дают ĉ = μ)

    Raises:
        DimensionError: длина φ_t ≠ embed_dim
    """
    phi = phi if isinstance(phi, Tensor) else Tensor(np.asarray(phi, dtype=np.float32))
    if phi.ndim == 1:
        phi = phi.reshape(1, -1)
    if phi.shape[1] != net.embed_dim:
        raise DimensionError(f"Эмбеддинг длины {phi.shape[1]}, CA ожидает {net.embed_dim}")

    raw = net.projection(phi)
    mu = raw[:, :net.c_dim]
    sigma = T.exp(raw[:, net.c_dim:] * 0.5)

    if omega is None:
        if rng is None:
            raise ContractError("ca_forward: нужен rng или готовый omega")
        omega = rng.normal(mu.shape)
    omega = np.asarray(omega, dtype=np.float32)
    if omega.shape != mu.shape:
        raise DimensionError(f"Шум ω формы {omega.shape}, ожидалась {mu.shape}")
    return CaOutput(c_hat=mu + sigma * omega, mu=mu, sigma=sigma)


def build_latent(c_hat, rng: Rng, z_dim: int) -> LatentCode:
    """[ĉ | z], z ∼ N(0, 1)"""
    c_hat = c_hat if isinstance(c_hat, Tensor) else Tensor(np.asarray(c_hat, dtype=np.float32))
    if c_hat.ndim == 1:
        c_hat = c_hat.reshape(1, -1)
    z = Tensor(rng.normal((c_hat.shape[0], z_dim)))
    return LatentCode(c_hat=c_hat, z=z, vector=concat([c_hat, z], axis=1))
