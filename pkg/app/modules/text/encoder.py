"""
Сиамский энкодер предложений: эмбеддинг токенов → остаточные слои
смешивания → пулинг по непустым токенам → проекция в embed_dim.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from modules.enums import PoolingMode
from modules.errors import DimensionError, EmptyCaptionError, UndefinedSimilarityError
from modules.settings import EncoderSettings
from modules.tensor import Embedding, Linear, Module, Rng, Tensor, no_grad
from modules.tensor import tensor as T
from modules.text.vocabulary import PAD_ID, Vocabulary, pad_batch, tokenize

# Сдвиг логитов для заполнителей при max-пулинге
_MASK_FILL = -1e4


@dataclass
class TextEmbedding:
    vector: np.ndarray
    caption_id: Optional[int] = None
    class_id: Optional[int] = None


class EncoderModel(Module):
    """
    Args:
        vocab_size: Размер словаря (включая служебные id)
        settings: Секция ``encoder`` конфигурации
        rng: Поток для инициализации весов
    """

    def __init__(self, vocab_size: int, settings: EncoderSettings, rng: Rng):
        super().__init__()
        self.d_model = settings.d_model
        self.embed_dim = settings.embed_dim
        self.max_tokens = settings.max_tokens
        self.pooling = PoolingMode(settings.pooling)
        self.embedding = Embedding(vocab_size, settings.d_model, rng.child(0))
        self.mixing = [Linear(settings.d_model, settings.d_model, rng.child(1, i))
                       for i in range(settings.mixing_layers)]
        self.projection = Linear(settings.d_model, settings.embed_dim, rng.child(2))

    def forward(self, ids: np.ndarray) -> Tensor:
        """ids N×T (0 — заполнитель) → N×embed_dim"""
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim == 1:
            ids = ids[None, :]
        mask = ids != PAD_ID
        counts = mask.sum(axis=1)
        if np.any(counts == 0):
            raise EmptyCaptionError(f"Строки {np.nonzero(counts == 0)[0].tolist()} состоят только из заполнителей")

        n, t = ids.shape
        h = self.embedding(ids.reshape(-1))
        for layer in self.mixing:
            h = h + T.tanh(layer(h))
        h = h.reshape(n, t, self.d_model)
        return self.projection(self._pool(h, mask, counts))

    def _pool(self, h: Tensor, mask: np.ndarray, counts: np.ndarray) -> Tensor:
        if self.pooling == PoolingMode.mean:
            weights = (mask / counts[:, None]).astype(np.float32)[:, :, None]
            return (h * weights).sum(axes=1)
        if self.pooling == PoolingMode.max:
            fill = np.where(mask, 0.0, _MASK_FILL).astype(np.float32)[:, :, None]
            return T.reduce_max(h + fill, axis=1)
        first = mask.argmax(axis=1)
        return h[np.arange(h.shape[0]), first]


# -------------------------------------------------------------
# Кодирование
# -------------------------------------------------------------

def encode_sentence(model: EncoderModel, tokens: Sequence[int], caption_id: Optional[int] = None,
                    class_id: Optional[int] = None) -> TextEmbedding:
    with no_grad():
        vector = model(np.asarray([list(tokens)], dtype=np.int64)).data[0]
    return TextEmbedding(vector.copy(), caption_id, class_id)


def encode_texts(model: EncoderModel, vocab: Vocabulary, texts: Sequence[str], batch_size: int = 64) -> np.ndarray:
    """Эмбеддинги подписей матрицей N×embed_dim"""
    rows = []
    with no_grad():
        for start in range(0, len(texts), batch_size):
            chunk = [tokenize(t, vocab, model.max_tokens) for t in texts[start:start + batch_size]]
            rows.append(model(pad_batch(chunk, model.max_tokens)).data)
    if not rows:
        return np.zeros((0, model.embed_dim), dtype=np.float32)
    return np.concatenate(rows).astype(np.float32)


# -------------------------------------------------------------
# Близость и функция потерь
# -------------------------------------------------------------

def cosine_similarity(u, v) -> float:
    """
    Косинус угла между векторами, ∈ [-1, 1].

    Raises:
        UndefinedSimilarityError: один из векторов нулевой
    """
    u = np.asarray(getattr(u, 'vector', u), dtype=np.float64).reshape(-1)
    v = np.asarray(getattr(v, 'vector', v), dtype=np.float64).reshape(-1)
    if u.shape != v.shape:
        raise DimensionError(f"Векторы длины {u.size} и {v.size}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise UndefinedSimilarityError("Косинусная близость с нулевым вектором не определена")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def cosine_rows(u: Tensor, v: Tensor) -> Tensor:
    """Построчный косинус двух матриц N×D (дифференцируемый)"""
    if u.shape != v.shape:
        raise DimensionError(f"Формы {u.shape} и {v.shape} не совпадают")
    if np.any(np.linalg.norm(u.data, axis=1) == 0) or np.any(np.linalg.norm(v.data, axis=1) == 0):
        raise UndefinedSimilarityError("Косинусная близость с нулевым вектором не определена")
    dot = (u * v).sum(axes=1)
    norms = T.sqrt((u * u).sum(axes=1) * (v * v).sum(axes=1))
    return dot / norms


def siamese_pair_loss(model: EncoderModel, ids_a: np.ndarray, ids_b: np.ndarray, labels) -> Tensor:
    """
    Среднее (cos(enc(a), enc(b)) − label)² по парам; обе ветви — одна модель.
    """
    labels = np.asarray(labels, dtype=np.float32).reshape(-1)
    cos = cosine_rows(model(ids_a), model(ids_b))
    if cos.shape != labels.shape:
        raise DimensionError(f"{cos.shape[0]} пар и {labels.size} меток")
    diff = cos - labels
    return (diff * diff).mean()
