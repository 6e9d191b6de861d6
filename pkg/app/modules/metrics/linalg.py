"""
Симметричная линейная алгебра для FID: циклический метод Якоби
и след квадратного корня произведения PSD-матриц.
"""
from __future__ import annotations

import numpy as np

from modules.errors import DimensionError, NotPsdError

JACOBI_TOLERANCE = 1e-10
JACOBI_MAX_SWEEPS = 100
# отрицательные собственные значения выше этой доли максимума считаются округлением
PSD_TOLERANCE = 1e-8
SYMMETRY_TOLERANCE = 1e-6


def _check_symmetric(a: np.ndarray, name: str = 'A') -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name}: ожидается квадратная матрица, форма {a.shape}")
    scale = max(float(np.abs(a).max(initial=0.0)), 1.0)
    if np.abs(a - a.T).max(initial=0.0) > SYMMETRY_TOLERANCE * scale:
        raise NotPsdError(f"{name}: матрица не симметрична")
    return (a + a.T) / 2


def jacobi_eigh(a: np.ndarray, tolerance: float = JACOBI_TOLERANCE,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """
    Собственные значения (по возрастанию) и векторы (столбцы)
    симметричной матрицы вращениями Якоби.

    Останов, когда норма внедиагональной части ≤ tolerance·‖A‖_F.
    """
    a = _check_symmetric(a)
    n = a.shape[0]
    v = np.eye(n)
    norm = np.linalg.norm(a)

    for _ in range(max_sweeps):
        if np.sqrt(np.sum(np.tril(a, -1) ** 2)) <= tolerance * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * col_p - s * col_q, s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * row_p - s * row_q, s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq

    values = np.diag(a).copy()
    order = np.argsort(values, kind='stable')
    return values[order], v[:, order]


def clamp_eigenvalues(values: np.ndarray, name: str = 'A') -> np.ndarray:
    """
    Обнулить отрицательные значения уровня округления.

    Raises:
        NotPsdError: значение меньше −1e-8·max|λ|
    """
    scale = float(np.abs(values).max(initial=0.0))
    if values.size and values.min() < -PSD_TOLERANCE * scale:
        raise NotPsdError(f"{name}: собственное значение {values.min():.3e} при масштабе {scale:.3e}")
    return np.clip(values, 0.0, None)


def psd_sqrt(a: np.ndarray, name: str = 'A') -> np.ndarray:
    values, vectors = jacobi_eigh(a)
    values = clamp_eigenvalues(values, name)
    return (vectors * np.sqrt(values)) @ vectors.T


def matrix_sqrt_trace(a: np.ndarray, b: np.ndarray) -> float:
    """
    Tr((A·B)^{1/2}) = Tr((A^{1/2}·B·A^{1/2})^{1/2}).

    Raises:
        DimensionError: формы не совпадают
        NotPsdError: матрица заметно не положительно полуопределена
    """
    a, b = _check_symmetric(a, 'A'), _check_symmetric(b, 'B')
    if a.shape != b.shape:
        raise DimensionError(f"Матрицы разных форм {a.shape} и {b.shape}")
    sqrt_a = psd_sqrt(a, 'A')
    clamp_eigenvalues(jacobi_eigh(b)[0], 'B')
    middle = sqrt_a @ b @ sqrt_a
    values, _ = jacobi_eigh((middle + middle.T) / 2)
    return float(np.sum(np.sqrt(clamp_eigenvalues(values, 'A½BA½'))))
