"""
Модуль для работы с изображениями: чтение и запись PNG, перевод
между uint8 HWC и float CHW в [-1, 1], area-ресемплинг, сетки превью.
"""
import io
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from modules.errors import DatasetFormatError, DimensionError

IMAGE_EXTENSIONS = ['.png', '.jpg', '.jpeg']


def to_unit_range(image: np.ndarray) -> np.ndarray:
    """uint8 H×W×3 → float32 3×H×W в [-1, 1]"""
    return (image.astype(np.float32).transpose(2, 0, 1) / 127.5) - 1.0


def to_uint8(image: np.ndarray) -> np.ndarray:
    """float 3×H×W в [-1, 1] → uint8 H×W×3"""
    if image.ndim != 3 or image.shape[0] != 3:
        raise DimensionError(f"Ожидается изображение 3×H×W, форма {image.shape}")
    scaled = np.rint((np.clip(image, -1.0, 1.0) + 1.0) * 127.5)
    return scaled.astype(np.uint8).transpose(1, 2, 0)


def png_bytes(image: np.ndarray) -> bytes:
    """
    Кодирует uint8 H×W×3 в PNG.

    Returns:
        bytes: PNG данные (одинаковые для одинаковых массивов)
    """
    output = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(image)).save(output, format='PNG')
    return output.getvalue()


def save_png(path: Path, image: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(png_bytes(image))
    return path


def load_image(path: Path, size: Optional[int] = None) -> np.ndarray:
    """
    Читает изображение как uint8 H×W×3, при необходимости приводит
    к квадрату ``size`` усреднением по площади (BOX).
    """
    try:
        with Image.open(path) as img:
            img = img.convert('RGB')
            if size is not None and img.size != (size, size):
                img = img.resize((size, size), resample=Image.Resampling.BOX)
            return np.asarray(img, dtype=np.uint8).copy()
    except (OSError, UnidentifiedImageError) as e:
        raise DatasetFormatError(f"Не удалось прочитать изображение {path}: {e}") from e


def find_image_file(directory: Path, image_id: str) -> Optional[Path]:
    """Ищет файл изображения с одним из поддерживаемых расширений."""
    for ext in IMAGE_EXTENSIONS:
        candidate = directory / f"{image_id}{ext}"
        if candidate.exists():
            return candidate
    return None


def resize_area(images: np.ndarray, size: int) -> np.ndarray:
    """Area-даунсемплинг батча N×C×H×W с целым коэффициентом"""
    n, c, h, w = images.shape
    if h % size or w % size:
        raise DimensionError(f"Размер {h}×{w} не делится на {size}")
    fh, fw = h // size, w // size
    return images.reshape(n, c, size, fh, size, fw).mean(axis=(3, 5))


def make_grid(images: Sequence[np.ndarray], columns: int, padding: int = 2) -> np.ndarray:
    """
    Собирает сетку из float-изображений 3×H×W.

    Returns:
        np.ndarray: uint8 сетка H×W×3
    """
    if not len(images):
        raise DimensionError("Пустой список изображений для сетки")
    tiles = [to_uint8(np.asarray(img)) for img in images]
    h, w = tiles[0].shape[:2]
    rows = (len(tiles) + columns - 1) // columns
    grid = np.full((rows * (h + padding) + padding, columns * (w + padding) + padding, 3), 255, dtype=np.uint8)
    for i, tile in enumerate(tiles):
        r, c = divmod(i, columns)
        top, left = padding + r * (h + padding), padding + c * (w + padding)
        grid[top:top + h, left:left + w] = tile
    return grid
