"""
Общий модуль для работы с JSON-файлами конфигурации и отчётов.
"""

import json
from pathlib import Path
from typing import Any, Dict

from modules.errors import ConfigError

BASE_PATH = Path(__file__).resolve().parents[2] / 'json'


# -------------------------------------------------------------
# Чтение и запись JSON файлов
# -------------------------------------------------------------

def open_json_file(filepath: str | Path) -> dict:
    """Загружает JSON-файл; относительный путь ищется в директории ``json/``.

    Raises:
        ConfigError: файл не найден или содержит неверный JSON
    """
    path = Path(filepath)
    if not path.is_absolute() and not path.exists():
        path = BASE_PATH / path
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"Файл не найден: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Неверный JSON в {path}: {e}") from e


def write_json_file(filepath: str | Path, data: Dict[str, Any]) -> Path:
    """Записывает словарь в UTF-8 JSON с отсортированными ключами."""
    path = Path(filepath)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path


def canonical_json(data: Any) -> str:
    """Компактная каноническая запись для дайджестов."""
    return json.dumps(data, ensure_ascii=False, sort_keys=True, separators=(',', ':'))


# -------------------------------------------------------------
# Слияние профилей
# -------------------------------------------------------------

def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Рекурсивно накладывает ``override`` на копию ``base``.

    Пример:
        >>> deep_merge({'gan': {'c_dim': 32, 'z_dim': 32}}, {'gan': {'c_dim': 128}})
        {'gan': {'c_dim': 128, 'z_dim': 32}}
    """
    result = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(result.get(key), dict):
            result[key] = deep_merge(result[key], val)
        else:
            result[key] = val
    return result


def parse_flat_value(raw: str | None) -> Any:
    """Значение из файла ``key = value``: JSON, если разбирается, иначе строка."""
    if raw is None:
        return None
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def unflatten(flat: Dict[str, Any]) -> Dict[str, Any]:
    """``{'train.iterations': 10}`` → ``{'train': {'iterations': 10}}``"""
    nested: Dict[str, Any] = {}
    for key, val in flat.items():
        node = nested
        *path, leaf = key.split('.')
        for part in path:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"Ключ {key} конфликтует с уже заданным значением")
        node[leaf] = val
    return nested
