"""
Бинарный формат именованных тензоров.

Структура: магия ``FGT1``, затем для каждого тензора —
длина имени (u32) + имя UTF-8, ранг (u32), размеры (u64 каждый),
данные float32; всё little-endian. Блоки идут до конца потока.
"""
from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import BinaryIO, Mapping

import numpy as np

from modules.errors import FormatError

TENSOR_MAGIC = b'FGT1'


def write_tensor_blocks(stream: BinaryIO, tensors: Mapping[str, np.ndarray]):
    """Записать магию и блоки в поток"""
    stream.write(TENSOR_MAGIC)
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        encoded = name.encode('utf-8')
        stream.write(struct.pack('<I', len(encoded)))
        stream.write(encoded)
        stream.write(struct.pack('<I', arr.ndim))
        stream.write(struct.pack(f'<{arr.ndim}Q', *arr.shape))
        stream.write(np.ascontiguousarray(arr, dtype='<f4').tobytes())


def _read_exact(stream: BinaryIO, size: int, what: str) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise FormatError(f"Файл обрезан: ожидалось {size} байт ({what}), прочитано {len(data)}")
    return data


def read_tensor_blocks(stream: BinaryIO) -> dict[str, np.ndarray]:
    """
    Прочитать блоки до конца потока.

    Raises:
        FormatError: чужая магия или обрезанный блок
    """
    magic = stream.read(len(TENSOR_MAGIC))
    if magic != TENSOR_MAGIC:
        raise FormatError(f"Неверная магия блоков тензоров: {magic!r}")

    tensors: dict[str, np.ndarray] = {}
    while True:
        head = stream.read(4)
        if not head:
            return tensors
        if len(head) != 4:
            raise FormatError("Файл обрезан на длине имени тензора")
        (name_len,) = struct.unpack('<I', head)
        try:
            name = _read_exact(stream, name_len, 'имя').decode('utf-8')
        except UnicodeDecodeError as e:
            raise FormatError("Имя тензора не в UTF-8") from e
        (rank,) = struct.unpack('<I', _read_exact(stream, 4, 'ранг'))
        shape = struct.unpack(f'<{rank}Q', _read_exact(stream, 8 * rank, 'размеры'))
        count = int(np.prod(shape, dtype=np.int64)) if rank else 1
        raw = _read_exact(stream, 4 * count, f'данные {name}')
        tensors[name] = np.frombuffer(raw, dtype='<f4').astype(np.float32).reshape(shape)


def tensor_blocks_bytes(tensors: Mapping[str, np.ndarray]) -> bytes:
    buffer = io.BytesIO()
    write_tensor_blocks(buffer, tensors)
    return buffer.getvalue()


def save_tensor_blocks(path: Path, tensors: Mapping[str, np.ndarray]):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(tensor_blocks_bytes(tensors))
    except OSError as e:
        raise FormatError(f"Не удалось записать {path}: {e}") from e


def load_tensor_blocks(path: Path) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        with open(path, 'rb') as f:
            return read_tensor_blocks(f)
    except OSError as e:
        raise FormatError(f"Не удалось прочитать {path}: {e}") from e
