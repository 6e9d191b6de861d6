import logging
import os
import sys
from datetime import datetime
from logging.handlers import RotatingFileHandler
from typing import Optional


class Logger:
    """
    Статический класс-синглтон для централизованного логирования.
    Каждая подсистема получает свой именованный логгер, консоль общая,
    файлы пишутся в отдельную папку на каждый логгер.
    """
    _instance = None
    _initialized = False
    _handlers = []
    _loggers = {}

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(Logger, cls).__new__(cls)
        return cls._instance

    def __init__(self):
        if not self._initialized:
            self._setup_handlers()
            Logger._initialized = True

    def _setup_handlers(self):
        """Настройка общих обработчиков логирования"""
        self.log_level = "INFO"
        self.log_dir: Optional[str] = None
        self.max_bytes = 50 * 1024 * 1024
        self.backup_count = 10
        self.log_format = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

        self.formatter = logging.Formatter(self.log_format)

        stream_handler = logging.StreamHandler(sys.stdout)
        stream_handler.setLevel(self.log_level)
        stream_handler.setFormatter(self.formatter)
        self._handlers.append(stream_handler)

        # Дата без секунд для имен файлов
        self.date_str = datetime.now().strftime("%Y.%m.%d_%H-%M")

    @classmethod
    def configure(cls, log_dir: Optional[str] = None, level: str = "INFO"):
        """
        Задать папку для файловых логов и уровень.

        Уже созданные логгеры получают файловый обработчик и новый уровень.

        Args:
            log_dir: Папка для логов (None — только консоль)
            level: Уровень логирования
        """
        inst = cls()
        inst.log_level = level
        inst.log_dir = log_dir
        for handler in inst._handlers:
            handler.setLevel(level)

        for name, logger in inst._loggers.items():
            logger.setLevel(level)
            if log_dir and not any(isinstance(h, RotatingFileHandler) for h in logger.handlers):
                logger.addHandler(inst._file_handler(name))

    def _file_handler(self, name: str) -> RotatingFileHandler:
        # Создаем папку для логгера
        logger_dir = os.path.join(self.log_dir, name)
        os.makedirs(logger_dir, exist_ok=True)

        # Формируем имя файла: дата_имя_логгера.log
        file_name = os.path.join(logger_dir, f"{self.date_str}_{name}.log")

        file_handler = RotatingFileHandler(
            file_name,
            maxBytes=self.max_bytes,
            backupCount=self.backup_count,
            encoding="utf-8"
        )
        file_handler.setLevel(self.log_level)
        file_handler.setFormatter(self.formatter)
        return file_handler

    @classmethod
    def get_logger(cls, name="fastgan"):
        """
        Получить именованный логгер подсистемы

        Args:
            name (str): Имя подсистемы

        Returns:
            logging.Logger: Настроенный логгер
        """
        if cls._instance is None:
            cls._instance = cls()

        if name not in cls._instance._loggers:
            logger = logging.getLogger(name)
            logger.setLevel(cls._instance.log_level)
            logger.propagate = False

            for handler in cls._instance._handlers:
                logger.addHandler(handler)

            if cls._instance.log_dir:
                logger.addHandler(cls._instance._file_handler(name))

            cls._instance._loggers[name] = logger

        return cls._instance._loggers[name]


logger = Logger.get_logger("fastgan")
