import importlib

from modules.errors import ConfigError


def str_to_func(func_path: str):
    """Получает объект по строке вида 'модуль.имя'."""
    module_name, _, attr = func_path.rpartition('.')
    if not module_name:
        raise ConfigError(f"Путь {func_path!r} должен иметь вид 'модуль.имя'")
    try:
        module = importlib.import_module(module_name)
    except ImportError as e:
        raise ConfigError(f"Модуль {module_name} не найден") from e
    try:
        return getattr(module, attr)
    except AttributeError as e:
        raise ConfigError(f"В модуле {module_name} нет {attr}") from e
