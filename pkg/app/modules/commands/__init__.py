from .base import BaseCommand
from .manager import CommandManager, manager, commands_start

__all__ = ["BaseCommand", "CommandManager", "manager", "commands_start"]
