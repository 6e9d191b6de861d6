"""
Генератор игрушечного датасета: фигуры (круг, квадрат, треугольник)
шести цветов на одном из трёх фонов с индонезийскими подписями.

Растеризация целочисленная (суперсэмплинг 4×4), поэтому одинаковый
``seed`` даёт одинаковые PNG на любой платформе.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from modules.enums import Split
from modules.errors import DatasetFormatError
from modules.images import save_png
from modules.logs import Logger
from modules.tensor.rng import Rng

logger = Logger.get_logger("data")

SUPERSAMPLE = 4

SHAPES = ('lingkaran', 'persegi', 'segitiga')

COLORS: dict[str, tuple[int, int, int]] = {
    'merah': (220, 40, 40),
    'kuning': (235, 205, 40),
    'biru': (40, 80, 220),
    'hijau': (40, 170, 60),
    'hitam': (20, 20, 20),
    'putih': (245, 245, 245),
}

BACKGROUNDS: dict[str, tuple[int, int, int]] = {
    'abu-abu': (128, 128, 128),
    'ungu': (120, 60, 150),
    'cokelat': (140, 95, 50),
}

TEMPLATES = (
    "sebuah {shape} {color} di atas latar {bg}",
    "{shape} berwarna {color} dengan latar belakang {bg}",
    "gambar {shape} {color} pada latar {bg}",
)

# Ключи подпотоков Rng
_RENDER_STREAM = 0
_SPLIT_STREAM = 1


@dataclass
class ToySpec:
    """Параметры игрушечного датасета"""
    seed: int = 0
    image_side: int = 64
    samples_per_class: int = 40
    val_fraction: float = 0.25
    shapes: tuple[str, ...] = SHAPES
    colors: dict[str, tuple[int, int, int]] = field(default_factory=lambda: dict(COLORS))
    backgrounds: dict[str, tuple[int, int, int]] = field(default_factory=lambda: dict(BACKGROUNDS))
    templates: tuple[str, ...] = TEMPLATES

    @classmethod
    def from_settings(cls, settings, seed: int) -> 'ToySpec':
        return cls(seed=seed, image_side=settings.image_side,
                   samples_per_class=settings.samples_per_class, val_fraction=settings.val_fraction)

    @property
    def color_names(self) -> list[str]:
        return list(self.colors)

    @property
    def n_classes(self) -> int:
        return len(self.shapes) * len(self.colors)

    def class_id(self, shape: str, color: str) -> int:
        return self.shapes.index(shape) * len(self.colors) + self.color_names.index(color)

    def class_name(self, class_id: int) -> str:
        shape, color = self.class_attributes(class_id)
        return f"{shape}_{color}"

    def class_attributes(self, class_id: int) -> tuple[str, str]:
        """class id → (фигура, цвет)"""
        shape_index, color_index = divmod(class_id, len(self.colors))
        return self.shapes[shape_index], self.color_names[color_index]


@dataclass
class ToySample:
    image_id: str
    class_id: int
    shape: str
    color: str
    background: str
    image: np.ndarray  # uint8 H×W×3
    captions: list[str]


@dataclass
class ToyDatasetSummary:
    root: Path
    n_images: int
    n_captions: int
    n_classes: int


# -------------------------------------------------------------
# Растеризация
# -------------------------------------------------------------

def _shape_mask(shape: str, side: int, cx: int, cy: int, r: int) -> np.ndarray:
    """
    Маска суперсэмплированного холста ``side·4 × side·4``.

    Координаты удвоены: центр субпикселя u лежит в 2u+1, поэтому
    все проверки выполняются в целых числах.
    """
    n = side * SUPERSAMPLE
    coords = 2 * np.arange(n, dtype=np.int64) + 1
    v, u = np.meshgrid(coords, coords, indexing='ij')
    cx, cy, r = 2 * cx, 2 * cy, 2 * r

    if shape == 'lingkaran':
        return (u - cx) ** 2 + (v - cy) ** 2 <= r * r
    if shape == 'persegi':
        return (np.abs(u - cx) <= r) & (np.abs(v - cy) <= r)
    if shape == 'segitiga':
        vertices = [(cx, cy - r), (cx + r, cy + r), (cx - r, cy + r)]
        signs = []
        for (px, py), (qx, qy) in zip(vertices, vertices[1:] + vertices[:1]):
            signs.append((qx - px) * (v - py) - (qy - py) * (u - px))
        return ((signs[0] >= 0) & (signs[1] >= 0) & (signs[2] >= 0)) | \
               ((signs[0] <= 0) & (signs[1] <= 0) & (signs[2] <= 0))
    raise DatasetFormatError(f"Неизвестная фигура: {shape}")


def rasterize(shape: str, side: int, cx: int, cy: int, r: int,
              color: tuple[int, int, int], background: tuple[int, int, int]) -> np.ndarray:
    """
    Отрисовать фигуру со сглаживанием.

    Args:
        cx, cy, r: Центр и полуразмер в субпикселях (1/4 пикселя)

    Returns:
        np.ndarray: uint8 side×side×3
    """
    mask = _shape_mask(shape, side, cx, cy, r)
    area = SUPERSAMPLE * SUPERSAMPLE
    coverage = mask.reshape(side, SUPERSAMPLE, side, SUPERSAMPLE).sum(axis=(1, 3)).astype(np.int64)
    fg = np.asarray(color, dtype=np.int64)
    bg = np.asarray(background, dtype=np.int64)
    pixels = (bg * (area - coverage[..., None]) + fg * coverage[..., None] + area // 2) // area
    return pixels.astype(np.uint8)


def render_sample(spec: ToySpec, class_id: int, index: int) -> ToySample:
    """Детерминированный пример ``index`` класса ``class_id``"""
    shape, color = spec.class_attributes(class_id)
    rng = Rng(spec.seed, (_RENDER_STREAM, class_id, index))

    background = list(spec.backgrounds)[rng.integers(0, len(spec.backgrounds))]
    n = spec.image_side * SUPERSAMPLE
    r = rng.integers(int(n * 0.18), int(n * 0.30) + 1)
    margin = SUPERSAMPLE * 2
    cx = rng.integers(r + margin, n - r - margin + 1)
    cy = rng.integers(r + margin, n - r - margin + 1)

    image = rasterize(shape, spec.image_side, cx, cy, r, spec.colors[color], spec.backgrounds[background])
    captions = [t.format(shape=shape, color=color, bg=background) for t in spec.templates]
    return ToySample(
        image_id=f"{class_id:02d}_{index:04d}", class_id=class_id, shape=shape, color=color,
        background=background, image=image, captions=captions,
    )


def split_assignment(spec: ToySpec, class_id: int) -> dict[int, Split]:
    """Разбиение примеров класса на train/val (по изображениям внутри класса)"""
    n = spec.samples_per_class
    n_val = int(round(n * spec.val_fraction))
    order = Rng(spec.seed, (_SPLIT_STREAM, class_id)).permutation(n)
    val = set(int(i) for i in order[:n_val])
    return {i: Split.val if i in val else Split.train for i in range(n)}


# -------------------------------------------------------------
# Запись на диск
# -------------------------------------------------------------

def make_toy_dataset(spec: ToySpec, out_dir: str | Path) -> ToyDatasetSummary:
    """
    Записать датасет в формате images/, captions/, classes.tsv, split.tsv.

    Raises:
        DatasetFormatError: ошибка записи (с путём)
    """
    root = Path(out_dir)
    images_dir, captions_dir = root / 'images', root / 'captions'
    class_rows, split_rows = [], []
    n_captions = 0

    try:
        images_dir.mkdir(parents=True, exist_ok=True)
        captions_dir.mkdir(parents=True, exist_ok=True)
        for class_id in range(spec.n_classes):
            splits = split_assignment(spec, class_id)
            for index in range(spec.samples_per_class):
                sample = render_sample(spec, class_id, index)
                save_png(images_dir / f"{sample.image_id}.png", sample.image)
                (captions_dir / f"{sample.image_id}.txt").write_text(
                    '\n'.join(sample.captions) + '\n', encoding='utf-8')
                n_captions += len(sample.captions)
                class_rows.append(f"{sample.image_id}\t{class_id}\t{spec.class_name(class_id)}")
                split_rows.append(f"{sample.image_id}\t{splits[index].value}")

        (root / 'classes.tsv').write_text(
            'image_id\tclass_id\tclass_name\n' + '\n'.join(class_rows) + '\n', encoding='utf-8')
        (root / 'split.tsv').write_text(
            'image_id\tsplit\n' + '\n'.join(split_rows) + '\n', encoding='utf-8')
    except OSError as e:
        raise DatasetFormatError(f"Не удалось записать датасет в {root}: {e}") from e

    summary = ToyDatasetSummary(root, len(class_rows), n_captions, spec.n_classes)
    logger.info(f"Toy dataset: {summary.n_images} images, {summary.n_captions} captions, "
                f"{summary.n_classes} classes → {root}")
    return summary
