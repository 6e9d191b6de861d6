"""
Обучение энкодера на парах подписей, оценка и экспорт эмбеддингов.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from tqdm import tqdm

from modules.constants import ArtifactNames
from modules.data.embedding_cache import EmbeddingCache
from modules.data.loader import CaptionDataset, CaptionRecord
from modules.enums import Split
from modules.errors import FormatError
from modules.logs import Logger
from modules.settings import EncoderSettings
from modules.tensor import Rng, Sgd, load_tensor_blocks, save_tensor_blocks
from modules.text.encoder import EncoderModel, encode_texts, siamese_pair_loss
from modules.text.pairs import SentencePair, make_pairs, pair_cosines, pearson
from modules.text.vocabulary import Vocabulary, pad_batch, tokenize

logger = Logger.get_logger("encoder")

ENCODER_STREAM = 10
_INIT, _EPOCH, _VALIDATION = 0, 1, 2


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    val_pearson: float


@dataclass
class EncoderTrainResult:
    model: EncoderModel
    vocab: Vocabulary
    metrics: list[EpochMetrics] = field(default_factory=list)
    initial_pearson: Optional[float] = None
    best_epoch: int = 0
    best_pearson: Optional[float] = None


def eval_pearson(model: EncoderModel, vocab: Vocabulary, pairs: Sequence[SentencePair],
                 texts: dict[int, str], batch_size: int = 64) -> float:
    """Корреляция Пирсона между косинусами пар и их метками"""
    ids = sorted({p.a for p in pairs} | {p.b for p in pairs})
    vectors = encode_texts(model, vocab, [texts[i] for i in ids], batch_size)
    embeddings = dict(zip(ids, vectors))
    return pearson(pair_cosines(embeddings, pairs), [p.label for p in pairs])


def _validation_captions(dataset: CaptionDataset) -> list[CaptionRecord]:
    val = dataset.captions(Split.val)
    if len({c.class_id for c in val}) >= 2:
        return val
    logger.warning("Validation split has fewer than 2 classes, using train captions for validation")
    return dataset.captions(Split.train)


def validation_pairs(dataset: CaptionDataset, seed: int) -> list[SentencePair]:
    """Фиксированные валидационные пары (те же, что при обучении с этим seed)"""
    return make_pairs(_validation_captions(dataset), Rng(seed, (ENCODER_STREAM, _VALIDATION)))


def train_encoder(dataset: CaptionDataset, settings: EncoderSettings, seed: int,
                  progress: bool = False) -> EncoderTrainResult:
    """
    Сиамское обучение: MSE между косинусом пары и её меткой.

    Метки пар перевыбираются каждую эпоху; сохраняется лучшая по Пирсону
    на валидации модель (эпоха 0 — исходная модель).

    Raises:
        PairingError: меньше двух классов
    """
    root = Rng(seed, (ENCODER_STREAM,))
    train = dataset.captions(Split.train)
    texts = {c.caption_id: c.text for c in dataset.captions()}
    vocab = Vocabulary.build(c.text for c in train)
    model = EncoderModel(len(vocab), settings, root.child(_INIT))
    tokens = {cid: tokenize(text, vocab, settings.max_tokens) for cid, text in texts.items()}

    val_pairs = validation_pairs(dataset, seed)
    result = EncoderTrainResult(model, vocab)
    if settings.epochs == 0:
        return result

    result.initial_pearson = result.best_pearson = eval_pearson(model, vocab, val_pairs, texts, settings.batch_size)
    best_state = {k: v.copy() for k, v in model.state_dict().items()}
    logger.info(f"Encoder: {model.parameter_count()} parameters, vocab {len(vocab)}, "
                f"epoch 0 val pearson {result.initial_pearson:.4f}")

    optimizer = Sgd(model.named_parameters(), lr=settings.lr, momentum=settings.momentum)
    for epoch in range(1, settings.epochs + 1):
        rng = root.child(_EPOCH, epoch)
        pairs = make_pairs(train, rng)
        order = rng.permutation(len(pairs))

        total, seen = 0.0, 0
        batches = range(0, len(order), settings.batch_size)
        for start in tqdm(batches, desc=f"encoder epoch {epoch}", disable=not progress, leave=False):
            batch = [pairs[i] for i in order[start:start + settings.batch_size]]
            ids_a = pad_batch([tokens[p.a] for p in batch], settings.max_tokens)
            ids_b = pad_batch([tokens[p.b] for p in batch], settings.max_tokens)
            optimizer.zero_grad()
            loss = siamese_pair_loss(model, ids_a, ids_b, [p.label for p in batch])
            loss.backward()
            optimizer.step()
            total += loss.item() * len(batch)
            seen += len(batch)

        val = eval_pearson(model, vocab, val_pairs, texts, settings.batch_size)
        result.metrics.append(EpochMetrics(epoch, total / seen, val))
        logger.info(f"Encoder epoch {epoch}: train loss {total / seen:.5f}, val pearson {val:.4f}")
        if val > result.best_pearson:
            result.best_pearson, result.best_epoch = val, epoch
            best_state = {k: v.copy() for k, v in model.state_dict().items()}

    model.load_state_dict(best_state)
    logger.info(f"Best encoder: epoch {result.best_epoch}, val pearson {result.best_pearson:.4f}")
    return result


# -------------------------------------------------------------
# Артефакты
# -------------------------------------------------------------

def write_encoder_metrics(metrics: Sequence[EpochMetrics], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['epoch', 'train_loss', 'val_pearson'])
        for row in metrics:
            writer.writerow([row.epoch, f"{row.train_loss:.8f}", f"{row.val_pearson:.8f}"])
    return path


def save_encoder(model: EncoderModel, vocab: Vocabulary, out_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    blocks = out_dir / ArtifactNames.ENCODER_BLOCKS
    save_tensor_blocks(blocks, model.state_dict('encoder/'))
    return blocks, vocab.save(out_dir / ArtifactNames.VOCABULARY)


def load_encoder(directory: str | Path, settings: EncoderSettings) -> tuple[EncoderModel, Vocabulary]:
    """
    Raises:
        FormatError: нет файлов энкодера
        IncompatibleCheckpointError: веса не подходят к настройкам
    """
    directory = Path(directory)
    vocab_path = directory / ArtifactNames.VOCABULARY
    if not vocab_path.exists():
        raise FormatError(f"Нет словаря {vocab_path}")
    vocab = Vocabulary.load(vocab_path)
    model = EncoderModel(len(vocab), settings, Rng(0))
    model.load_state_dict(load_tensor_blocks(directory / ArtifactNames.ENCODER_BLOCKS), 'encoder/')
    model.eval()
    return model, vocab


def export_embeddings(model: EncoderModel, vocab: Vocabulary, captions: Sequence[CaptionRecord],
                      path: str | Path, batch_size: int = 64) -> EmbeddingCache:
    """Закодировать подписи и записать кэш эмбеддингов"""
    vectors = encode_texts(model, vocab, [c.text for c in captions], batch_size)
    cache = EmbeddingCache(model.embed_dim)
    for caption, vector in zip(captions, vectors):
        cache.add(caption.caption_id, vector)
    cache.write(path)
    logger.info(f"Exported {len(cache)} embeddings (dim {cache.dim}) → {path}")
    return cache
