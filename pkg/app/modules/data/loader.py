"""
Загрузка датасета подписей и изображений.

Ожидаемая структура::

    {root}/images/{id}.png        (для CUB допускается .jpg)
    {root}/captions/{id}.txt      одна подпись на строку, UTF-8
    {root}/classes.tsv            image_id, class_id[, class_name]
    {root}/split.tsv              image_id, train|val
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from modules.enums import DatasetProfile, Split
from modules.errors import DataIntegrityError, DatasetFormatError, EncodingError
from modules.images import find_image_file, load_image, to_unit_range
from modules.logs import Logger

logger = Logger.get_logger("data")

CUB_CAPTIONS_PER_IMAGE = 10
# caption id = порядковый номер изображения · CAPTION_STRIDE + номер строки
CAPTION_STRIDE = 100


@dataclass(frozen=True)
class CaptionRecord:
    caption_id: int
    image_id: str
    class_id: int
    text: str


@dataclass
class ImageRecord:
    image_id: str
    ordinal: int
    class_id: int
    class_name: str
    split: Split
    path: Path
    captions: list[CaptionRecord] = field(default_factory=list)


def _read_text(path: Path) -> str:
    try:
        return path.read_bytes().decode('utf-8')
    except UnicodeDecodeError as e:
        raise EncodingError(f"Файл {path} не в UTF-8: позиция {e.start}") from e
    except OSError as e:
        raise DatasetFormatError(f"Не удалось прочитать {path}: {e}") from e


def _read_tsv(path: Path) -> list[list[str]]:
    if not path.exists():
        raise DatasetFormatError(f"Нет файла {path}")
    rows = [line.split('\t') for line in _read_text(path).splitlines() if line.strip()]
    if rows and rows[0][0] == 'image_id':
        rows = rows[1:]
    return rows


class CaptionDataset:
    """
    Датасет: записи изображений с подписями и ленивая загрузка пикселей.

    Изображения возвращаются как float32 3×S×S в [-1, 1]; размер
    приводится к ``image_size`` усреднением по площади.
    """

    def __init__(self, root: Path, profile: DatasetProfile, records: list[ImageRecord], image_size: int):
        self.root = root
        self.profile = profile
        self.records = records
        self.image_size = image_size
        self._cache: dict[str, np.ndarray] = {}
        self._captions = {c.caption_id: c for r in records for c in r.captions}

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[tuple[np.ndarray, list[CaptionRecord], int]]:
        for record in self.records:
            yield self.image(record), record.captions, record.class_id

    @property
    def class_ids(self) -> list[int]:
        return sorted({r.class_id for r in self.records})

    def split(self, split: Split) -> list[ImageRecord]:
        return [r for r in self.records if r.split == Split(split)]

    def captions(self, split: Optional[Split] = None) -> list[CaptionRecord]:
        records = self.records if split is None else self.split(split)
        return [c for r in records for c in r.captions]

    def caption(self, caption_id: int) -> CaptionRecord:
        return self._captions[caption_id]

    def image(self, record: ImageRecord) -> np.ndarray:
        cached = self._cache.get(record.image_id)
        if cached is None:
            cached = to_unit_range(load_image(record.path, self.image_size))
            self._cache[record.image_id] = cached
        return cached

    def images(self, records: list[ImageRecord]) -> np.ndarray:
        """Батч N×3×S×S"""
        return np.stack([self.image(r) for r in records]).astype(np.float32)

    def digest(self) -> str:
        """sha256 по подписям и байтам файлов изображений"""
        h = hashlib.sha256()
        for record in self.records:
            h.update(record.image_id.encode('utf-8'))
            h.update(record.path.read_bytes())
            for caption in record.captions:
                h.update(caption.text.encode('utf-8'))
        return h.hexdigest()


def load_dataset(root: str | Path, profile: DatasetProfile | str = DatasetProfile.toy,
                 image_size: int = 64) -> CaptionDataset:
    """
    Прочитать датасет и проверить его целостность.

    Raises:
        DatasetFormatError: нет обязательных файлов или неверные строки
        EncodingError: файл не в UTF-8
        DataIntegrityError: изображения без подписей/файлов или (CUB) не 10 подписей
    """
    root = Path(root)
    profile = DatasetProfile(profile)
    images_dir, captions_dir = root / 'images', root / 'captions'
    for directory in (images_dir, captions_dir):
        if not directory.is_dir():
            raise DatasetFormatError(f"Нет каталога {directory}")

    classes = _read_tsv(root / 'classes.tsv')
    splits = {}
    for row in _read_tsv(root / 'split.tsv'):
        if len(row) < 2:
            raise DatasetFormatError(f"Неверная строка split.tsv: {row}")
        try:
            splits[row[0]] = Split(row[1].strip())
        except ValueError as e:
            raise DatasetFormatError(f"Неизвестное разбиение {row[1]!r} для {row[0]}") from e

    records: list[ImageRecord] = []
    no_captions, no_split, no_image, wrong_count = [], [], [], []
    for ordinal, row in enumerate(sorted(classes, key=lambda r: r[0])):
        if len(row) < 2:
            raise DatasetFormatError(f"Неверная строка classes.tsv: {row}")
        image_id = row[0]
        try:
            class_id = int(row[1])
        except ValueError as e:
            raise DatasetFormatError(f"class_id {row[1]!r} для {image_id} не целое") from e
        class_name = row[2].strip() if len(row) > 2 else str(class_id)

        path = find_image_file(images_dir, image_id)
        if path is None:
            no_image.append(image_id)
            continue
        if image_id not in splits:
            no_split.append(image_id)
            continue

        caption_path = captions_dir / f"{image_id}.txt"
        lines = [ln.strip() for ln in _read_text(caption_path).splitlines()] if caption_path.exists() else []
        lines = [ln for ln in lines if ln]
        if not lines:
            no_captions.append(image_id)
            continue
        if profile == DatasetProfile.cub and len(lines) != CUB_CAPTIONS_PER_IMAGE:
            wrong_count.append(image_id)
            continue

        record = ImageRecord(image_id, ordinal, class_id, class_name, splits[image_id], path)
        record.captions = [
            CaptionRecord(ordinal * CAPTION_STRIDE + i, image_id, class_id, text)
            for i, text in enumerate(lines[:CAPTION_STRIDE])
        ]
        records.append(record)

    for ids, what in ((no_image, "нет файла изображения"), (no_split, "нет записи в split.tsv"),
                      (no_captions, "нет подписей"),
                      (wrong_count, f"число подписей ≠ {CUB_CAPTIONS_PER_IMAGE}")):
        if ids:
            raise DataIntegrityError(f"{len(ids)} изображений: {what}: {', '.join(ids[:20])}", ids)

    if not records:
        raise DatasetFormatError(f"Датасет {root} пуст")

    dataset = CaptionDataset(root, profile, records, image_size)
    logger.info(f"Loaded {profile.value} dataset from {root}: {len(records)} images, "
                f"{len(dataset.captions())} captions, {len(dataset.class_ids)} classes")
    return dataset
