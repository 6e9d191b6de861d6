from abc import ABC, abstractmethod
from argparse import ArgumentParser, Namespace
from typing import Any

from modules.settings import RunConfig


class BaseCommand(ABC):
    """Базовый класс подкоманды CLI"""

    def __init__(self, command_name: str = "base", help: str = ""):
        self.command_name = command_name
        self.help = help

    @abstractmethod
    def add_arguments(self, parser: ArgumentParser):
        """Добавить собственные флаги подкоманды"""
        pass

    @abstractmethod
    def run(self, args: Namespace, config: RunConfig) -> int:
        """Выполнить подкоманду, вернуть код выхода"""
        pass

    def overrides(self, args: Namespace) -> dict[str, Any]:
        """Плоские переопределения конфигурации из флагов подкоманды"""
        return {}

    def get_name(self) -> str:
        """Получить имя подкоманды"""
        return self.command_name

    def get_help(self) -> str:
        return self.help
