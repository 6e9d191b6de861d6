"""
Типизированная конфигурация запуска.

Порядок наложения: профиль ``desk`` → профиль ``paper`` (если выбран) →
файл ``section.key = value`` → параметры командной строки.
"""
from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from modules.enums import BackboneMode, DatasetProfile, PerceptualMode, PoolingMode, Profile, TrainMode
from modules.errors import ConfigError
from modules.json_utils import canonical_json, deep_merge, parse_flat_value, unflatten


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid', use_enum_values=False)


class TensorSettings(_Section):
    strict_determinism: bool = False
    bn_eps: float = Field(1e-5, gt=0)
    bn_momentum: float = Field(0.1, gt=0, le=1)


class ToySettings(_Section):
    samples_per_class: int = Field(40, ge=2)
    image_side: int = Field(64, ge=16)
    val_fraction: float = Field(0.25, gt=0, lt=1)


class DataSettings(_Section):
    profile: DatasetProfile = DatasetProfile.toy
    image_size: int = Field(64, ge=8)
    toy: ToySettings = ToySettings()


class EncoderSettings(_Section):
    d_model: int = Field(64, ge=1)
    embed_dim: int = Field(128, ge=1)
    max_tokens: int = Field(32, ge=1)
    mixing_layers: int = Field(2, ge=0)
    pooling: PoolingMode = PoolingMode.mean
    epochs: int = Field(10, ge=0)
    lr: float = Field(1e-2, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    batch_size: int = Field(32, ge=1)


class GanSettings(_Section):
    image_size: int = 64
    c_dim: int = Field(32, ge=1)
    z_dim: int = Field(32, ge=1)
    base_channels: int = Field(256, ge=2)
    channel_floor: int = Field(32, ge=1)
    sle_pairs: list[tuple[int, int]] = [(4, 64)]
    noise_injection: bool = False
    disc_channels: int = Field(32, ge=2)
    disc_channel_cap: int = Field(256, ge=2)
    decoder_channel_floor: int = Field(16, ge=1)
    perceptual: PerceptualMode = PerceptualMode.pixel_l1

    @field_validator('image_size')
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value < 32 or value & (value - 1):
            raise ValueError(f"разрешение {value} должно быть степенью двойки ≥ 32")
        return value

    @model_validator(mode='after')
    def _sle_pairs_in_chain(self) -> 'GanSettings':
        for low, high in self.sle_pairs:
            if low < 4 or low & (low - 1) or high != 16 * low or high > self.image_size:
                raise ValueError(f"пара SLE ({low}, {high}) должна иметь high = 16·low и лежать в цепочке 4…{self.image_size}")
        return self


class AugmentSettings(_Section):
    brightness: float = Field(0.2, ge=0, le=1)
    saturation: tuple[float, float] = (0.7, 1.3)
    contrast: tuple[float, float] = (0.8, 1.2)
    translation: float = Field(0.125, ge=0, lt=0.5)

    @field_validator('saturation', 'contrast')
    @classmethod
    def _ordered_positive(cls, value: tuple[float, float]) -> tuple[float, float]:
        low, high = value
        if not 0 <= low <= high:
            raise ValueError(f"диапазон {value} должен удовлетворять 0 ≤ low ≤ high")
        return value

    @classmethod
    def identity(cls) -> 'AugmentSettings':
        return cls(brightness=0.0, saturation=(1.0, 1.0), contrast=(1.0, 1.0), translation=0.0)


class TrainSettings(_Section):
    mode: TrainMode = TrainMode.unconditional
    iterations: int = Field(2000, gt=0)
    batch_size: int = Field(8, ge=2)
    lr_g: float = Field(2e-4, gt=0)
    lr_d: float = Field(2e-4, gt=0)
    betas: tuple[float, float] = (0.5, 0.999)
    augment: AugmentSettings = AugmentSettings()
    ca_sigma: bool = True
    checkpoint_every: int = Field(500, ge=0)
    log_every: int = Field(50, ge=1)
    grid_size: int = Field(16, ge=1)
    prefetch_workers: int = Field(1, ge=0)


class MetricsSettings(_Section):
    backbone: BackboneMode = BackboneMode.toy_classifier
    feature_dim: int = Field(64, ge=2)
    is_splits: int = Field(2, ge=1)
    n_samples: int = Field(256, ge=2)
    classifier_epochs: int = Field(3, ge=0)
    batch_size: int = Field(32, ge=1)


class RunConfig(_Section):
    """Полная конфигурация одного запуска"""
    profile: Profile = Profile.desk
    seed: int = Field(0, ge=0, lt=2 ** 64)
    tensor: TensorSettings = TensorSettings()
    data: DataSettings = DataSettings()
    encoder: EncoderSettings = EncoderSettings()
    gan: GanSettings = GanSettings()
    train: TrainSettings = TrainSettings()
    metrics: MetricsSettings = MetricsSettings()

    @model_validator(mode='after')
    def _consistent(self) -> 'RunConfig':
        if self.data.image_size != self.gan.image_size:
            raise ValueError(
                f"data.image_size={self.data.image_size} не совпадает с gan.image_size={self.gan.image_size}")
        return self

    def digest(self) -> str:
        """sha256 канонического JSON конфигурации"""
        return hashlib.sha256(canonical_json(self.model_dump(mode='json')).encode('utf-8')).hexdigest()


# -------------------------------------------------------------
# Загрузка
# -------------------------------------------------------------

def load_flat_file(path: str | Path) -> dict[str, Any]:
    """Прочитать файл ``section.key = value`` в вложенный словарь"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Файл конфигурации не найден: {path}")
    try:
        raw = dotenv_values(path, encoding='utf-8')
    except UnicodeDecodeError as e:
        raise ConfigError(f"Файл конфигурации {path} не в UTF-8") from e
    return unflatten({key: parse_flat_value(val) for key, val in raw.items()})


def resolve_config(profile: Profile | str = Profile.desk, config_path: Optional[str | Path] = None,
                   overrides: Optional[dict[str, Any]] = None,
                   profiles: Optional[dict[str, Any]] = None) -> RunConfig:
    """
    Собрать конфигурацию запуска.

    Args:
        profile: desk или paper (paper наследует desk)
        config_path: Файл ``section.key = value``
        overrides: Плоские переопределения (``{'train.mode': 'conditional'}``)
        profiles: Словарь профилей (по умолчанию ``json/profiles.json``)

    Raises:
        ConfigError: с перечислением ошибочных полей
    """
    if profiles is None:
        from modules.constants import PROFILES
        profiles = PROFILES

    profile = Profile(profile)
    data = deep_merge({}, profiles.get(Profile.desk.value, {}))
    if profile == Profile.paper:
        data = deep_merge(data, profiles.get(Profile.paper.value, {}))
    data['profile'] = profile.value

    if config_path:
        data = deep_merge(data, load_flat_file(config_path))
    if overrides:
        data = deep_merge(data, unflatten({k: v for k, v in overrides.items() if v is not None}))

    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        fields = '; '.join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"Ошибка конфигурации: {fields}") from e
