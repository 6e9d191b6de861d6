"""
Состояние обучения и его бинарный чекпоинт.

Формат: магия ``FGANCKPT``, версия u16, sha256 конфигурации (32 байта),
длина u32 + канонический JSON метаданных (итерация, состояние Rng,
история потерь), затем блоки тензоров FGT1 (gen/, disc/, ca/, opt_g/, opt_d/).
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from modules.errors import FormatError, IncompatibleCheckpointError
from modules.gan.conditioning import CaNet
from modules.gan.discriminator import Discriminator
from modules.gan.generator import Generator
from modules.json_utils import canonical_json
from modules.logs import Logger
from modules.tensor import Adam, Module, Rng, read_tensor_blocks, write_tensor_blocks

logger = Logger.get_logger("trainer")

CHECKPOINT_MAGIC = b'FGANCKPT'
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct('<8sH32sI')


@dataclass
class TrainState:
    iteration: int
    generator: Generator
    discriminator: Discriminator
    ca_net: Optional[CaNet]
    opt_g: Adam
    opt_d: Adam
    rng: Rng
    loss_history: list[dict] = field(default_factory=list)

    def modules(self) -> dict[str, Module]:
        modules = {'gen': self.generator, 'disc': self.discriminator}
        if self.ca_net is not None:
            modules['ca'] = self.ca_net
        return modules

    def tensors(self) -> dict[str, np.ndarray]:
        tensors = {}
        for prefix, module in self.modules().items():
            tensors.update(module.state_dict(f"{prefix}/"))
        tensors.update(self.opt_g.state_dict('opt_g'))
        tensors.update(self.opt_d.state_dict('opt_d'))
        return tensors

    def meta(self) -> dict:
        return {
            'iteration': self.iteration,
            'rng': self.rng.get_state(),
            'has_ca': self.ca_net is not None,
            'conditional': self.discriminator.conditional,
            'loss_history': self.loss_history,
        }


@dataclass
class CheckpointData:
    version: int
    config_digest: str
    meta: dict
    tensors: dict[str, np.ndarray]


def checkpoint_bytes(state: TrainState, config_digest: str) -> bytes:
    meta = canonical_json(state.meta()).encode('utf-8')
    buffer = io.BytesIO()
    buffer.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, bytes.fromhex(config_digest), len(meta)))
    buffer.write(meta)
    write_tensor_blocks(buffer, state.tensors())
    return buffer.getvalue()


def save_checkpoint(state: TrainState, path: str | Path, config_digest: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(checkpoint_bytes(state, config_digest))
    except OSError as e:
        raise FormatError(f"Не удалось записать чекпоинт {path}: {e}") from e
    return path


def read_checkpoint(path: str | Path) -> CheckpointData:
    """
    Прочитать чекпоинт целиком, не трогая модели.

    Raises:
        IncompatibleCheckpointError: чужая магия или версия
        FormatError: обрезанный или повреждённый файл
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FormatError(f"Не удалось прочитать чекпоинт {path}: {e}") from e
    if len(data) < _HEADER.size:
        raise FormatError(f"Чекпоинт {path} обрезан ({len(data)} байт)")
    magic, version, digest, meta_len = _HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise IncompatibleCheckpointError(f"{path}: неверная магия {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise IncompatibleCheckpointError(f"{path}: версия {version}, поддерживается {CHECKPOINT_VERSION}")

    start = _HEADER.size
    raw_meta = data[start:start + meta_len]
    if len(raw_meta) != meta_len:
        raise FormatError(f"Чекпоинт {path} обрезан в метаданных")
    try:
        meta = json.loads(raw_meta.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"Повреждённые метаданные чекпоинта {path}") from e
    tensors = read_tensor_blocks(io.BytesIO(data[start + meta_len:]))
    return CheckpointData(version, digest.hex(), meta, tensors)


def _restore(state: TrainState, ckpt: CheckpointData):
    if ckpt.meta.get('conditional') != state.discriminator.conditional:
        raise IncompatibleCheckpointError("Режим чекпоинта (условный/безусловный) не совпадает с конфигурацией")
    if bool(ckpt.meta.get('has_ca')) != (state.ca_net is not None):
        raise IncompatibleCheckpointError("Наличие CA-сети в чекпоинте не совпадает с запуском")
    for prefix, module in state.modules().items():
        module.load_state_dict(ckpt.tensors, f"{prefix}/")
    state.opt_g.load_state_dict(ckpt.tensors, 'opt_g')
    state.opt_d.load_state_dict(ckpt.tensors, 'opt_d')
    state.iteration = int(ckpt.meta['iteration'])
    state.rng = Rng.from_state(ckpt.meta['rng'])
    state.loss_history = list(ckpt.meta.get('loss_history', []))


def load_checkpoint(state: TrainState, path: str | Path, config_digest: Optional[str] = None) -> CheckpointData:
    """
    Загрузить чекпоинт в состояние; при любой ошибке состояние не меняется.

    Raises:
        IncompatibleCheckpointError: формы или режим не совпадают
    """
    ckpt = read_checkpoint(path)
    if config_digest is not None and ckpt.config_digest != config_digest:
        logger.warning(f"Checkpoint {path} was written with config {ckpt.config_digest[:12]}, "
                       f"current config is {config_digest[:12]}")

    backup = CheckpointData(CHECKPOINT_VERSION, '', state.meta(), {k: np.array(v) for k, v in state.tensors().items()})
    try:
        _restore(state, ckpt)
    except Exception:
        _restore_backup(state, backup)
        raise
    return ckpt


def _restore_backup(state: TrainState, backup: CheckpointData):
    for prefix, module in state.modules().items():
        module.load_state_dict(backup.tensors, f"{prefix}/")
    state.opt_g.load_state_dict(backup.tensors, 'opt_g')
    state.opt_d.load_state_dict(backup.tensors, 'opt_d')
    state.iteration = backup.meta['iteration']
    state.rng = Rng.from_state(backup.meta['rng'])
    state.loss_history = backup.meta['loss_history']


def load_generator(path: str | Path, config) -> tuple[Generator, Optional[CaNet], CheckpointData]:
    """
    Генератор (и CA-сеть, если она есть в чекпоинте) для синтеза.

    Raises:
        IncompatibleCheckpointError: формы не совпадают с конфигурацией
    """
    ckpt = read_checkpoint(path)
    if ckpt.config_digest != config.digest():
        logger.warning(f"Checkpoint {path} was written with another config ({ckpt.config_digest[:12]})")
    generator = Generator(config.gan, Rng(config.seed), config.tensor)
    generator.load_state_dict(ckpt.tensors, 'gen/')
    generator.eval()
    ca_net = None
    if ckpt.meta.get('has_ca'):
        ca_net = CaNet(config.encoder.embed_dim, config.gan.c_dim, Rng(config.seed))
        ca_net.load_state_dict(ckpt.tensors, 'ca/')
        ca_net.eval()
    return generator, ca_net, ckpt
