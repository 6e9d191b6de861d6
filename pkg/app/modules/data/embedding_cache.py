"""
Кэш эмбеддингов подписей.

Формат: магия ``EMBC``, версия u16, размерность u32, число записей u64,
затем для каждой записи — caption id u64 и ``dim`` float32 (little-endian).
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from modules.errors import CacheMissError, FormatError

CACHE_MAGIC = b'EMBC'
CACHE_VERSION = 1
_HEADER = struct.Struct('<4sHIQ')


class EmbeddingCache:
    """Отображение caption id → вектор фиксированной длины"""

    def __init__(self, dim: int):
        if dim < 1:
            raise FormatError(f"Размерность кэша должна быть ≥ 1, получено {dim}")
        self.dim = dim
        self._entries: dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, caption_id: int) -> bool:
        return int(caption_id) in self._entries

    def __iter__(self) -> Iterator[tuple[int, np.ndarray]]:
        return iter(self._entries.items())

    def ids(self) -> list[int]:
        return list(self._entries)

    def add(self, caption_id: int, vector) -> None:
        vector = np.asarray(vector, dtype=np.float32).reshape(-1)
        if vector.shape != (self.dim,):
            raise FormatError(f"Вектор подписи {caption_id} длины {vector.size}, кэш размерности {self.dim}")
        if caption_id in self:
            raise FormatError(f"Повторный caption id {caption_id}")
        self._entries[int(caption_id)] = vector.copy()

    def get(self, caption_id: int) -> np.ndarray:
        try:
            return self._entries[int(caption_id)]
        except KeyError:
            raise CacheMissError(f"Нет эмбеддинга для подписи {caption_id}") from None

    def matrix(self, caption_ids: Iterable[int]) -> np.ndarray:
        """Матрица N×dim для списка подписей"""
        rows = [self.get(i) for i in caption_ids]
        return np.stack(rows) if rows else np.zeros((0, self.dim), dtype=np.float32)

    # ---------------------------------------------------------------
    # Сериализация
    # ---------------------------------------------------------------

    def to_bytes(self) -> bytes:
        parts = [_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, self.dim, len(self))]
        for caption_id, vector in self._entries.items():
            parts.append(struct.pack('<Q', caption_id))
            parts.append(vector.astype('<f4').tobytes())
        return b''.join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> 'EmbeddingCache':
        """
        Raises:
            FormatError: чужая магия, версия, длина или повтор id
        """
        if len(data) < _HEADER.size:
            raise FormatError(f"Файл кэша короче заголовка ({len(data)} байт)")
        magic, version, dim, count = _HEADER.unpack_from(data)
        if magic != CACHE_MAGIC:
            raise FormatError(f"Неверная магия кэша эмбеддингов: {magic!r}")
        if version != CACHE_VERSION:
            raise FormatError(f"Неподдерживаемая версия кэша: {version}")
        entry_size = 8 + 4 * dim
        expected = _HEADER.size + count * entry_size
        if dim < 1 or len(data) != expected:
            raise FormatError(f"Размер кэша {len(data)} байт не соответствует заголовку "
                              f"(dim={dim}, count={count}, ожидалось {expected})")

        cache = cls(dim)
        offset = _HEADER.size
        for _ in range(count):
            (caption_id,) = struct.unpack_from('<Q', data, offset)
            vector = np.frombuffer(data, dtype='<f4', count=dim, offset=offset + 8).astype(np.float32)
            cache.add(caption_id, vector)
            offset += entry_size
        return cache

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(self.to_bytes())
        except OSError as e:
            raise FormatError(f"Не удалось записать кэш {path}: {e}") from e
        return path

    @classmethod
    def read(cls, path: str | Path) -> 'EmbeddingCache':
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as e:
            raise FormatError(f"Не удалось прочитать кэш {path}: {e}") from e
        return cls.from_bytes(data)
