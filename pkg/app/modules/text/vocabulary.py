"""
Словарь и токенизация подписей.

id 0 — заполнитель (pad), id 1 — неизвестный токен; строка i файла
словаря соответствует id = i + 2.
"""
from __future__ import annotations

import re
from collections import Counter
from pathlib import Path
from typing import Iterable

import numpy as np

from modules.errors import EmptyCaptionError, EncodingError, FormatError

PAD_ID = 0
UNK_ID = 1
SPECIAL_TOKENS = ('<pad>', '<unk>')

# Слова и индонезийские редупликации через дефис ("burung-burung")
TOKEN_PATTERN = re.compile(r"\w+(?:-\w+)*", re.UNICODE)


def split_words(text: str) -> list[str]:
    return TOKEN_PATTERN.findall(text.lower())


class Vocabulary:
    """Биекция токен ↔ id для неслужебных токенов"""

    def __init__(self, tokens: Iterable[str] = ()):
        self.id_to_token: list[str] = list(SPECIAL_TOKENS)
        self.token_to_id: dict[str, int] = {}
        for token in tokens:
            if token in self.token_to_id or token in SPECIAL_TOKENS:
                raise FormatError(f"Повторный токен в словаре: {token!r}")
            self.token_to_id[token] = len(self.id_to_token)
            self.id_to_token.append(token)

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def token(self, token_id: int) -> str:
        return self.id_to_token[token_id]

    @classmethod
    def build(cls, texts: Iterable[str]) -> 'Vocabulary':
        """Словарь по частоте (при равенстве — по алфавиту)"""
        counts = Counter(word for text in texts for word in split_words(text))
        ordered = sorted(counts, key=lambda w: (-counts[w], w))
        return cls(ordered)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(''.join(f"{t}\n" for t in self.id_to_token[len(SPECIAL_TOKENS):]), encoding='utf-8')
        return path

    @classmethod
    def load(cls, path: str | Path) -> 'Vocabulary':
        path = Path(path)
        try:
            text = path.read_bytes().decode('utf-8')
        except UnicodeDecodeError as e:
            raise EncodingError(f"Словарь {path} не в UTF-8") from e
        except OSError as e:
            raise FormatError(f"Не удалось прочитать словарь {path}: {e}") from e
        return cls(line for line in text.split('\n') if line)


def tokenize(text: str, vocab: Vocabulary, max_tokens: int) -> list[int]:
    """
    Подпись → список id (нижний регистр, разбиение по пробелам и пунктуации,
    обрезка до ``max_tokens``).

    Raises:
        EmptyCaptionError: в подписи нет ни одного слова
    """
    words = split_words(text)
    if not words:
        raise EmptyCaptionError(f"Пустая подпись: {text!r}")
    return [vocab.id(w) for w in words[:max_tokens]]


def pad_batch(sequences: list[list[int]], max_tokens: int) -> np.ndarray:
    """Матрица id N×T, дополненная нулями до самой длинной последовательности"""
    if not sequences:
        raise EmptyCaptionError("Пустой батч подписей")
    width = min(max(len(s) for s in sequences), max_tokens)
    ids = np.full((len(sequences), max(width, 1)), PAD_ID, dtype=np.int64)
    for row, seq in enumerate(sequences):
        seq = seq[:max_tokens]
        ids[row, :len(seq)] = seq
    return ids
