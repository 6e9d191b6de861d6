"""
Обучение GAN: безусловный и условный режимы.

Каждая итерация: один шаг дискриминатора (real / [wrong] / fake, декодер
только по настоящим изображениям), затем один шаг генератора. Все
случайные выборки итерации берутся из подпотоков ``(seed, 20, 1, it, ...)``,
поэтому продолжение с чекпоинта повторяет непрерывный запуск.
"""
from __future__ import annotations

import csv
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np
from tqdm import tqdm

from modules.constants import ArtifactNames, Messages
from modules.data.embedding_cache import EmbeddingCache
from modules.data.loader import CaptionDataset, CaptionRecord, ImageRecord
from modules.enums import ImageOrigin, Split, TrainMode
from modules.errors import (
    ConfigError, ContractError, DataIntegrityError, FormatError, NumericError, PairingError, TrainingAbortedError,
)
from modules.gan.augment import augment_batch
from modules.gan.checkpoint import TrainState, load_checkpoint, save_checkpoint
from modules.gan.conditioning import CaNet, build_latent, ca_forward
from modules.gan.discriminator import Discriminator, random_crop_pair
from modules.gan.generator import Generator
from modules.gan.objectives import LossBundle, PerceptualMetric, d_hinge_loss, g_loss, perceptual_loss
from modules.gan.sampling import synthesize, write_grid
from modules.json_utils import write_json_file
from modules.logs import Logger
from modules.settings import RunConfig
from modules.tensor import Adam, Rng, Tensor, no_grad
from modules.tensor import functional as F

logger = Logger.get_logger("trainer")

GAN_STREAM = 20
_INIT, _ITERATION, _EVAL, _PERCEPT = 0, 1, 2, 3
(_BATCH, _D_CA, _D_Z, _D_AUG_REAL, _D_AUG_FAKE, _D_AUG_WRONG, _CROP, _D_NOISE,
 _G_CA, _G_Z, _G_AUG, _G_NOISE) = range(12)

LOSS_COLUMNS = ['iteration', 'l_d_total', 'l_g', 'l_percept']


@dataclass
class Batch:
    records: list[ImageRecord]
    captions: list[CaptionRecord]
    images: np.ndarray                          # N×3×S×S
    embeddings: Optional[np.ndarray] = None     # N×embed_dim
    wrong: Optional[list[ImageRecord]] = None
    wrong_images: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class TrainResult:
    state: TrainState
    artifacts: list[Path] = field(default_factory=list)


# -------------------------------------------------------------
# Выборка подписей и wrong-изображений
# -------------------------------------------------------------

def sample_caption(record: ImageRecord, rng: Rng) -> CaptionRecord:
    """
    Равновероятный выбор одной из подписей изображения.

    Raises:
        DataIntegrityError: у изображения нет подписей
    """
    if not record.captions:
        raise DataIntegrityError(f"У изображения {record.image_id} нет подписей", [record.image_id])
    return record.captions[rng.integers(0, len(record.captions))]


def sample_wrong(captions: Sequence[CaptionRecord], records: Sequence[ImageRecord], rng: Rng) -> list[ImageRecord]:
    """
    Для каждой подписи настоящее изображение другого класса.

    Raises:
        PairingError: в датасете меньше двух классов
    """
    by_class: dict[int, list[ImageRecord]] = {}
    for record in records:
        by_class.setdefault(record.class_id, []).append(record)
    if len(by_class) < 2:
        raise PairingError(f"Для wrong-изображений нужно ≥2 классов, есть {len(by_class)}")

    wrong = []
    for caption in captions:
        pool = [r for cls, group in by_class.items() if cls != caption.class_id for r in group]
        wrong.append(pool[rng.integers(0, len(pool))])
    return wrong


def write_loss_csv(history: Sequence[dict], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(LOSS_COLUMNS)
        for row in history:
            writer.writerow([row['iteration']] + [
                '' if row.get(col) is None else f"{row[col]:.8f}" for col in LOSS_COLUMNS[1:]
            ])
    return path


# -------------------------------------------------------------
# Тренер
# -------------------------------------------------------------

class GanTrainer:
    """
    Args:
        config: Конфигурация запуска
        dataset: Загруженный датасет (обучение по train-части)
        embeddings: Кэш эмбеддингов подписей (обязателен в условном режиме)
        out_dir: Папка для чекпоинтов, сеток и CSV
        progress: Показывать tqdm
    """

    def __init__(self, config: RunConfig, dataset: CaptionDataset, embeddings: Optional[EmbeddingCache] = None,
                 out_dir: Optional[str | Path] = None, progress: bool = False):
        self.config = config
        self.dataset = dataset
        self.embeddings = embeddings
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.progress = progress
        self.conditional = config.train.mode == TrainMode.conditional
        self.digest = config.digest()

        if self.conditional and embeddings is None:
            raise ConfigError("Условный режим требует кэш эмбеддингов (--embeddings)")
        if embeddings is not None and embeddings.dim != config.encoder.embed_dim:
            raise ConfigError(f"Эмбеддинги размерности {embeddings.dim}, encoder.embed_dim={config.encoder.embed_dim}")

        self.records = dataset.split(Split.train) or list(dataset.records)
        if self.conditional and len({r.class_id for r in self.records}) < 2:
            raise PairingError("Условное обучение требует ≥2 классов в обучающей части")

        root = Rng(config.seed, (GAN_STREAM,))
        init = root.child(_INIT)
        generator = Generator(config.gan, init.child(0), config.tensor)
        discriminator = Discriminator(config.gan, self.conditional, init.child(1), config.tensor)
        ca_net = CaNet(embeddings.dim, config.gan.c_dim, init.child(2)) if embeddings is not None else None

        g_params = list(generator.named_parameters('gen/'))
        if ca_net is not None:
            g_params += list(ca_net.named_parameters('ca/'))
        train = config.train
        opt_g = Adam(g_params, lr=train.lr_g, betas=train.betas)
        opt_d = Adam(discriminator.named_parameters('disc/'), lr=train.lr_d, betas=train.betas)

        self.state = TrainState(0, generator, discriminator, ca_net, opt_g, opt_d, root)
        self.metric = PerceptualMetric(config.gan.perceptual, root.child(_PERCEPT))
        self.eval_rng = root.child(_EVAL)
        self.eval_embeddings = self._eval_embeddings()

        logger.info(f"GAN ({train.mode.value}): G {generator.parameter_count()} params, "
                    f"D {discriminator.parameter_count()} params, {len(self.records)} train images")

    @property
    def generator(self) -> Generator:
        return self.state.generator

    @property
    def discriminator(self) -> Discriminator:
        return self.state.discriminator

    @property
    def ca_net(self) -> Optional[CaNet]:
        return self.state.ca_net

    def iteration_rng(self, iteration: int) -> Rng:
        return Rng(self.config.seed, (GAN_STREAM, _ITERATION, iteration))

    def _eval_embeddings(self) -> Optional[np.ndarray]:
        """Фиксированные подписи для сеток: одни и те же на всех итерациях"""
        if self.embeddings is None:
            return None
        captions = [c for r in self.records for c in r.captions]
        idx = self.eval_rng.child(0).choice(len(captions), size=self.config.train.grid_size,
                                             replace=len(captions) < self.config.train.grid_size)
        return self.embeddings.matrix([captions[i].caption_id for i in idx])

    # ---------------------------------------------------------------
    # Батчи
    # ---------------------------------------------------------------

    def sample_batch(self, iteration: int) -> Batch:
        rng = self.iteration_rng(iteration).child(_BATCH)
        n = self.config.train.batch_size
        idx = rng.choice(len(self.records), size=n, replace=len(self.records) < n)
        records = [self.records[i] for i in idx]
        captions = [sample_caption(r, rng) for r in records]
        batch = Batch(records, captions, self.dataset.images(records))
        if self.embeddings is not None:
            batch.embeddings = self.embeddings.matrix(c.caption_id for c in captions)
        if self.conditional:
            batch.wrong = sample_wrong(captions, self.records, rng)
            batch.wrong_images = self.dataset.images(batch.wrong)
        return batch

    def _batches(self, start: int, end: int) -> Iterator[tuple[int, Batch]]:
        """Батчи итераций start…end; загрузка идёт с опережением в потоках"""
        workers = 0 if self.config.tensor.strict_determinism else self.config.train.prefetch_workers
        if workers == 0:
            for it in range(start, end + 1):
                yield it, self.sample_batch(it)
            return

        with ThreadPoolExecutor(max_workers=workers) as executor:
            pending = deque()
            next_it = start
            while next_it <= end and len(pending) <= workers:
                pending.append(executor.submit(self.sample_batch, next_it))
                next_it += 1
            for it in range(start, end + 1):
                batch = pending.popleft().result()
                if next_it <= end:
                    pending.append(executor.submit(self.sample_batch, next_it))
                    next_it += 1
                yield it, batch

    # ---------------------------------------------------------------
    # Шаги
    # ---------------------------------------------------------------

    def _condition(self, batch: Batch, rng: Rng) -> tuple[Tensor, Tensor]:
        """(ĉ, μ); без CA-сети оба нулевые"""
        n, c_dim = len(batch), self.config.gan.c_dim
        if self.ca_net is None:
            zeros = Tensor(np.zeros((n, c_dim), dtype=np.float32))
            return zeros, zeros
        omega = rng.normal((n, c_dim)) if self.config.train.ca_sigma else np.zeros((n, c_dim), dtype=np.float32)
        out = ca_forward(self.ca_net, Tensor(batch.embeddings), omega=omega)
        return out.c_hat, out.mu

    def _noise_rng(self, rng: Rng, key: int) -> Optional[Rng]:
        return rng.child(key) if self.config.gan.noise_injection else None

    def _generate(self, batch: Batch, rng: Rng, ca_key: int, z_key: int, noise_key: int) -> tuple[Tensor, Tensor]:
        c_hat, mu = self._condition(batch, rng.child(ca_key))
        latent = build_latent(c_hat, rng.child(z_key), self.config.gan.z_dim)
        return self.generator(latent, self._noise_rng(rng, noise_key)), mu

    def discriminator_step(self, batch: Batch, rng: Rng) -> LossBundle:
        D, augment = self.discriminator, self.config.train.augment
        with no_grad():
            fake, mu = self._generate(batch, rng, _D_CA, _D_Z, _D_NOISE)
        mu_d = mu.detach() if self.conditional else None

        real_aug = augment_batch(Tensor(batch.images), rng.child(_D_AUG_REAL), augment)
        fake_aug = augment_batch(fake.detach(), rng.child(_D_AUG_FAKE), augment)

        features, logits_real = D.encode(real_aug, mu_d)
        decoded = D.decode(features, ImageOrigin.real)
        target = F.avg_pool(real_aug, self.config.gan.image_size // D.target_size)
        decoded_crop, target_crop, _ = random_crop_pair(decoded, target, rng.child(_CROP))
        l_percept = perceptual_loss(self.metric, decoded, target, decoded_crop, target_crop)

        _, logits_fake = D.encode(fake_aug, mu_d)
        logits_wrong = None
        if self.conditional:
            wrong_aug = augment_batch(Tensor(batch.wrong_images), rng.child(_D_AUG_WRONG), augment)
            _, logits_wrong = D.encode(wrong_aug, mu_d)

        bundle = d_hinge_loss(logits_real, logits_wrong, logits_fake, l_percept, self.conditional)
        _check_finite(bundle.l_d_total, 'l_d_total')
        self.state.opt_d.zero_grad()
        bundle.total.backward()
        self.state.opt_d.step()
        return bundle

    def generator_step(self, batch: Batch, rng: Rng) -> float:
        D = self.discriminator
        D.requires_grad_(False)
        try:
            fake, mu = self._generate(batch, rng, _G_CA, _G_Z, _G_NOISE)
            fake_aug = augment_batch(fake, rng.child(_G_AUG), self.config.train.augment)
            _, logits = D.encode(fake_aug, mu.detach() if self.conditional else None)
            loss = g_loss(logits)
            value = loss.item()
            _check_finite(value, 'l_g')
            self.state.opt_g.zero_grad()
            loss.backward()
            self.state.opt_g.step()
        finally:
            D.requires_grad_(True)
        return value

    def train_step(self, batch: Batch, iteration: int) -> LossBundle:
        """Один шаг D, затем один шаг G; итерация записывается в историю потерь"""
        rng = self.iteration_rng(iteration)
        bundle = self.discriminator_step(batch, rng)
        bundle.l_g = self.generator_step(batch, rng)
        self.state.iteration = iteration
        self.state.loss_history.append(bundle.row(iteration))
        return bundle

    # ---------------------------------------------------------------
    # Цикл и артефакты
    # ---------------------------------------------------------------

    def sample_images(self) -> np.ndarray:
        return synthesize(self.generator, self.config.train.grid_size, self.eval_rng.child(1), self.ca_net,
                          self.eval_embeddings, c_dim=self.config.gan.c_dim)

    def _require_out_dir(self) -> Path:
        if self.out_dir is None:
            raise ContractError("Для артефактов обучения нужна папка out_dir")
        return self.out_dir

    def save(self, name: str) -> Path:
        return save_checkpoint(self.state, self._require_out_dir() / name, self.digest)

    def write_grid(self, name: str) -> Path:
        return write_grid(self.sample_images(), self._require_out_dir() / name)

    def write_losses(self) -> Path:
        return write_loss_csv(self.state.loss_history, self._require_out_dir() / ArtifactNames.LOSS_CSV)

    def resume(self, path: str | Path):
        load_checkpoint(self.state, path, self.digest)
        logger.info(f"Resumed from {path} at iteration {self.state.iteration}")

    def _dump_diagnostic(self, iteration: int, error: Exception) -> Optional[Path]:
        if self.out_dir is None:
            return None
        summary = {
            'iteration': iteration,
            'error': str(error),
            'config_digest': self.digest,
            'last_losses': self.state.loss_history[-10:],
        }
        dump = write_json_file(self.out_dir / ArtifactNames.DIAGNOSTIC_DUMP, summary)
        try:
            self.save(ArtifactNames.DIAGNOSTIC_CHECKPOINT)
        except FormatError:
            logger.warning("Diagnostic checkpoint could not be written", exc_info=True)
        return dump

    def run(self) -> TrainResult:
        """
        Обучить до ``train.iterations``; чекпоинт и сетка каждые
        ``checkpoint_every`` итераций, в конце ``final.fgan``.

        Raises:
            TrainingAbortedError: нечисловая функция потерь или значение
        """
        out_dir = self._require_out_dir()
        train = self.config.train
        result = TrainResult(self.state)
        start, end = self.state.iteration + 1, train.iterations
        iteration = start

        bar = tqdm(total=end, initial=start - 1, desc='train-gan', disable=not self.progress)
        try:
            for iteration, batch in self._batches(start, end):
                bundle = self.train_step(batch, iteration)
                bar.update(1)
                if iteration % train.log_every == 0:
                    logger.info(f"iter {iteration}: l_d_total {bundle.l_d_total:.4f}, "
                                f"l_g {bundle.l_g:.4f}, l_percept {bundle.l_percept:.4f}")
                if train.checkpoint_every and iteration % train.checkpoint_every == 0:
                    result.artifacts += [
                        self.save(ArtifactNames.checkpoint(iteration)),
                        self.write_grid(ArtifactNames.sample_grid(iteration)),
                        self.write_losses(),
                    ]
        except NumericError as e:
            dump = self._dump_diagnostic(iteration, e)
            logger.error(f"Training aborted at iteration {iteration}: {e}", exc_info=True)
            raise TrainingAbortedError(f"Обучение остановлено на итерации {iteration}: {e}",
                                       str(dump) if dump else None) from e
        finally:
            bar.close()

        result.artifacts += [
            self.save(ArtifactNames.FINAL_CHECKPOINT),
            self.write_grid(ArtifactNames.sample_grid(self.state.iteration)),
            self.write_losses(),
        ]
        # один и тот же файл мог попасть несколько раз
        result.artifacts = list(dict.fromkeys(result.artifacts))
        for path in result.artifacts:
            logger.info(Messages.WROTE.format(path=path))
        return result


def _check_finite(value: float, name: str):
    if not np.isfinite(value):
        raise NumericError(f"{name} = {value}")


def train_step_unconditional(trainer: GanTrainer, batch: Batch, iteration: int) -> LossBundle:
    if trainer.conditional:
        raise ContractError("train_step_unconditional вызван для условного тренера")
    return trainer.train_step(batch, iteration)


def train_step_conditional(trainer: GanTrainer, batch: Batch, iteration: int) -> LossBundle:
    if not trainer.conditional:
        raise ContractError("train_step_conditional вызван для безусловного тренера")
    return trainer.train_step(batch, iteration)


def train_loop(config: RunConfig, dataset: CaptionDataset, embeddings: Optional[EmbeddingCache],
               out_dir: str | Path, resume: Optional[str | Path] = None, progress: bool = False) -> TrainResult:
    trainer = GanTrainer(config, dataset, embeddings, out_dir, progress)
    if resume is not None:
        trainer.resume(resume)
    return trainer.run()
