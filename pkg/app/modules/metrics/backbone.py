"""
Бэкбоны для IS/FID: классификатор, обученный на классах игрушечного
датасета, или замороженные случайные признаки (только FID).
"""
from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from tqdm import tqdm

from modules.enums import BackboneMode
from modules.errors import BackboneModeError, DimensionError
from modules.logs import Logger
from modules.settings import MetricsSettings
from modules.tensor import Adam, Conv2d, Linear, Module, Rng, Tensor, no_grad
from modules.tensor import functional as F
from modules.tensor import tensor as T
from modules.tensor import load_tensor_blocks, save_tensor_blocks

logger = Logger.get_logger("metrics")

INPUT_SIZE = 32
_CONV_WIDTHS = (16, 32, 64)


class FeatureNet(Module):
    """Три свёртки 32→8, глобальное среднее и проекция в feature_dim"""

    def __init__(self, feature_dim: int, rng: Rng):
        super().__init__()
        self.convs = []
        channels = 3
        for i, width in enumerate(_CONV_WIDTHS):
            kernel, stride = (3, 1) if i == 0 else (4, 2)
            self.convs.append(Conv2d(channels, width, kernel, rng.child(i), stride=stride, pad=1,
                                     std=np.sqrt(2.0 / (kernel * kernel * channels))))
            channels = width
        self.projection = Linear(channels, feature_dim, rng.child(len(_CONV_WIDTHS)))

    def forward(self, images: Tensor) -> Tensor:
        if images.ndim != 4 or images.shape[1] != 3:
            raise DimensionError(f"Бэкбон ожидает N×3×H×W, форма {images.shape}")
        x = images
        if x.shape[2] != INPUT_SIZE:
            x = F.adaptive_avg_pool(x, INPUT_SIZE)
        for conv in self.convs:
            x = T.leaky_relu(conv(x))
        pooled = x.mean(axes=(2, 3))
        return T.leaky_relu(self.projection(pooled))


class Backbone(ABC):
    """Общий интерфейс бэкбона: признаки, (опционально) вероятности классов, дайджест"""

    mode: BackboneMode

    def __init__(self, net: FeatureNet, batch_size: int = 32):
        self.net = net
        self.batch_size = batch_size

    @property
    def feature_dim(self) -> int:
        return self.net.projection.weight.shape[1]

    def _batched(self, images: np.ndarray, fn) -> np.ndarray:
        outputs = []
        with no_grad():
            for start in range(0, len(images), self.batch_size):
                chunk = Tensor(np.asarray(images[start:start + self.batch_size], dtype=np.float32))
                outputs.append(fn(chunk).data)
        return np.concatenate(outputs).astype(np.float64)

    def features(self, images: np.ndarray) -> np.ndarray:
        """N×d признаков (float64)"""
        return self._batched(images, self.net)

    @abstractmethod
    def probabilities(self, images: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def modules(self) -> dict[str, Module]:
        pass

    def digest(self) -> str:
        h = hashlib.sha256(self.mode.value.encode('utf-8'))
        for prefix, module in self.modules().items():
            h.update(prefix.encode('utf-8'))
            h.update(module.digest().encode('ascii'))
        return h.hexdigest()

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        tensors = {}
        for prefix, module in self.modules().items():
            tensors.update(module.state_dict(f"{prefix}/"))
        save_tensor_blocks(path, tensors)
        return path

    def load(self, path: str | Path) -> 'Backbone':
        tensors = load_tensor_blocks(Path(path))
        for prefix, module in self.modules().items():
            module.load_state_dict(tensors, f"{prefix}/")
        return self


class RandomFeatureBackbone(Backbone):
    """Замороженная сеть со случайными весами; IS недоступен"""

    mode = BackboneMode.random_features

    def __init__(self, feature_dim: int, rng: Rng, batch_size: int = 32):
        super().__init__(FeatureNet(feature_dim, rng), batch_size)
        self.net.requires_grad_(False)

    def probabilities(self, images: np.ndarray) -> np.ndarray:
        raise BackboneModeError("Inception Score требует бэкбон-классификатор (toy-classifier)")

    def modules(self) -> dict[str, Module]:
        return {'features': self.net}


class ToyClassifier(Backbone):
    """
    Классификатор классов датасета: признаки FeatureNet + линейная голова.

    Args:
        feature_dim: Размерность признаков для FID
        n_classes: Число классов K
        rng: Поток инициализации
    """

    mode = BackboneMode.toy_classifier

    def __init__(self, feature_dim: int, n_classes: int, rng: Rng, batch_size: int = 32):
        super().__init__(FeatureNet(feature_dim, rng.child(0)), batch_size)
        self.n_classes = n_classes
        self.head = Linear(feature_dim, n_classes, rng.child(1))

    def modules(self) -> dict[str, Module]:
        return {'features': self.net, 'head': self.head}

    def log_probs(self, images: Tensor) -> Tensor:
        return T.log_softmax(self.head(self.net(images)), axis=1)

    def probabilities(self, images: np.ndarray) -> np.ndarray:
        return self._batched(images, lambda x: T.exp(self.log_probs(x)))

    def loss(self, images: Tensor, labels: np.ndarray) -> Tensor:
        """Кросс-энтропия с one-hot метками"""
        one_hot = np.eye(self.n_classes, dtype=np.float32)[labels]
        return -(self.log_probs(images) * one_hot).sum(axes=1).mean()

    def accuracy(self, images: np.ndarray, labels: np.ndarray) -> float:
        return float(np.mean(self.probabilities(images).argmax(axis=1) == labels))

    def fit(self, images: np.ndarray, labels: np.ndarray, epochs: int, rng: Rng,
            lr: float = 1e-3, progress: bool = False) -> list[float]:
        """Обучение Adam; возвращает средний loss по эпохам"""
        params = [(f"features/{n}", p) for n, p in self.net.named_parameters()]
        params += [(f"head/{n}", p) for n, p in self.head.named_parameters()]
        optimizer = Adam(params, lr=lr, betas=(0.9, 0.999))
        history = []
        for epoch in range(1, epochs + 1):
            order = rng.child(epoch).permutation(len(images))
            total = 0.0
            batches = range(0, len(order), self.batch_size)
            for start in tqdm(batches, desc=f"backbone epoch {epoch}", disable=not progress, leave=False):
                idx = order[start:start + self.batch_size]
                optimizer.zero_grad()
                loss = self.loss(Tensor(images[idx]), labels[idx])
                loss.backward()
                optimizer.step()
                total += loss.item() * len(idx)
            history.append(total / len(images))
            logger.info(f"Backbone epoch {epoch}: loss {history[-1]:.4f}")
        self.net.requires_grad_(False)
        self.head.requires_grad_(False)
        return history


def class_index(class_ids: Sequence[int]) -> dict[int, int]:
    """Плотная нумерация классов 0…K−1"""
    return {cls: i for i, cls in enumerate(sorted(set(class_ids)))}


def build_backbone(settings: MetricsSettings, rng: Rng, images: Optional[np.ndarray] = None,
                   labels: Optional[np.ndarray] = None, n_classes: Optional[int] = None,
                   progress: bool = False) -> Backbone:
    """
    Создать бэкбон выбранного режима; классификатор обучается на (images, labels).

    Raises:
        BackboneModeError: для классификатора не переданы данные
    """
    if settings.backbone == BackboneMode.random_features:
        return RandomFeatureBackbone(settings.feature_dim, rng, settings.batch_size)
    if images is None or labels is None or n_classes is None:
        raise BackboneModeError("toy-classifier требует обучающие изображения и метки классов")
    backbone = ToyClassifier(settings.feature_dim, n_classes, rng.child(0), settings.batch_size)
    backbone.fit(images, labels, settings.classifier_epochs, rng.child(1), progress=progress)
    logger.info(f"Backbone train accuracy {backbone.accuracy(images, labels):.3f}")
    return backbone
