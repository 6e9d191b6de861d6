"""
Иерархия исключений проекта.

Все доменные ошибки наследуются от ``FastGanError``: CLI превращает их
в код выхода 1, остальные исключения считаются ошибками программы.
"""


class FastGanError(Exception):
    """Базовая доменная ошибка"""


# ---------------------------------------------------------------
# Тензоры и вычисления
# ---------------------------------------------------------------

class DimensionError(FastGanError, ValueError):
    """Несовпадение форм или размерностей"""


class ParameterError(FastGanError, ValueError):
    """Недопустимый параметр операции"""


class NumericError(FastGanError, ArithmeticError):
    """Нечисловое значение (NaN/Inf) в результате операции"""


class DegenerateBatchError(NumericError):
    """Батч-нормализация по одному элементу на канал"""


class ContractError(FastGanError, RuntimeError):
    """Нарушение протокола вызова"""


# ---------------------------------------------------------------
# Текст
# ---------------------------------------------------------------

class EmptyCaptionError(FastGanError, ValueError):
    """Пустая подпись"""


class UndefinedSimilarityError(FastGanError, ArithmeticError):
    """Косинусная близость с нулевым вектором"""


class UndefinedCorrelationError(FastGanError, ArithmeticError):
    """Корреляция при нулевой дисперсии"""


class PairingError(FastGanError, ValueError):
    """Невозможно составить пары (слишком мало классов)"""


# ---------------------------------------------------------------
# Данные и форматы
# ---------------------------------------------------------------

class DataIntegrityError(FastGanError, ValueError):
    """Нарушена целостность датасета"""

    def __init__(self, message: str, ids: list | None = None):
        self.ids = list(ids or [])
        super().__init__(message)


class EncodingError(FastGanError, ValueError):
    """Файл не является корректным UTF-8"""


class DatasetFormatError(FastGanError, ValueError):
    """Неверная структура каталога датасета"""


class CacheMissError(FastGanError, KeyError):
    """Нет эмбеддинга для подписи"""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ''


class FormatError(FastGanError, ValueError):
    """Повреждённый или чужой бинарный файл"""


class IncompatibleCheckpointError(FormatError):
    """Чекпоинт не подходит к текущей конфигурации"""


# ---------------------------------------------------------------
# Конфигурация, метрики, обучение
# ---------------------------------------------------------------

class ConfigError(FastGanError, ValueError):
    """Ошибка конфигурации"""


class InsufficientSampleError(FastGanError, ValueError):
    """Слишком мало примеров для статистики"""


class NotPsdError(FastGanError, ArithmeticError):
    """Матрица не является положительно полуопределённой"""


class BackboneModeError(FastGanError, ValueError):
    """Операция недоступна для данного режима бэкбона"""


class TrainingAbortedError(FastGanError, RuntimeError):
    """Обучение остановлено из-за нечисловой функции потерь"""

    def __init__(self, message: str, dump_path: str | None = None):
        self.dump_path = dump_path
        super().__init__(message)
