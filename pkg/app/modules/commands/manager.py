from typing import Dict, List, Optional

from modules.commands.base import BaseCommand
from modules.constants import COMMANDS
from modules.errors import ConfigError
from modules.function_way import str_to_func
from modules.logs import logger


class CommandManager:
    """Менеджер подкоманд CLI"""

    def __init__(self):
        self.commands: Dict[str, BaseCommand] = {}

    def register(self, command: BaseCommand):
        """Зарегистрировать подкоманду"""
        if command.get_name() in self.commands:
            raise ConfigError(f"Подкоманда {command.get_name()} зарегистрирована дважды")
        self.commands[command.get_name()] = command

    def get(self, command_name: str) -> Optional[BaseCommand]:
        """Получить подкоманду"""
        return self.commands.get(command_name)

    def get_available(self) -> List[str]:
        """Получить список доступных подкоманд"""
        return list(self.commands.keys())


manager = CommandManager()


def commands_start(registry: Optional[dict] = None) -> CommandManager:
    """
    Зарегистрировать подкоманды из ``json/commands.json``.

    Raises:
        ConfigError: класс не найден или не является подкомандой
    """
    registry = COMMANDS if registry is None else registry
    for name, data in registry.items():
        if name in manager.commands:
            continue
        base_class = str_to_func(data['base_class'])
        if not (isinstance(base_class, type) and issubclass(base_class, BaseCommand)):
            raise ConfigError(f"{data['base_class']} не является подкомандой")
        manager.register(base_class(command_name=name, help=data.get('help', '')))

    logger.debug(f"Registered commands: {manager.get_available()}")
    return manager
