"""
Подкоманды CLI: каждая читает свои флаги, вызывает модули домена и
логирует пути всех записанных файлов.
"""
from __future__ import annotations

from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import Any, Optional

import numpy as np

from modules.commands.base import BaseCommand
from modules.constants import ArtifactNames, Messages
from modules.data import EmbeddingCache, ToySpec, load_dataset, make_toy_dataset
from modules.data.loader import CaptionDataset
from modules.enums import TrainMode
from modules.errors import ConfigError
from modules.gan import load_generator, synthesize, train_loop, write_grid
from modules.logs import Logger
from modules.metrics import evaluate_run, noise_baseline, prepare_backbone
from modules.settings import RunConfig
from modules.tensor import Rng
from modules.tensor.suite import case_names, run_suite
from modules.text import (
    encode_texts, eval_pearson, export_embeddings, load_encoder, save_encoder, train_encoder, validation_pairs,
    write_encoder_metrics,
)

logger = Logger.get_logger("fastgan")

GENERATE_STREAM = 50
SAMPLES_PER_CAPTION = 4


def _wrote(path: Path) -> Path:
    logger.info(Messages.WROTE.format(path=path))
    return path


def _load(args: Namespace, config: RunConfig) -> CaptionDataset:
    if args.data is None:
        raise ConfigError("Не указан датасет (--data)")
    return load_dataset(args.data, config.data.profile, config.data.image_size)


def _embeddings_path(args: Namespace) -> Optional[Path]:
    """Явный --embeddings или кэш по умолчанию в --out, если он существует"""
    if args.embeddings is not None:
        return Path(args.embeddings)
    default = Path(args.out) / ArtifactNames.EMBEDDINGS
    return default if default.exists() else None


def _add_data(parser: ArgumentParser):
    parser.add_argument('--data', metavar='DIR', help='Корень датасета')


def _add_encoder(parser: ArgumentParser):
    parser.add_argument('--encoder', metavar='DIR', help='Папка с encoder.fgt и vocab.txt (по умолчанию --out)')


def _add_embeddings(parser: ArgumentParser):
    parser.add_argument('--embeddings', metavar='PATH', help='Кэш эмбеддингов (по умолчанию --out/embeddings.embc)')


class MakeToyDataCommand(BaseCommand):

    def add_arguments(self, parser: ArgumentParser):
        parser.add_argument('--samples-per-class', type=int, dest='samples_per_class')

    def overrides(self, args: Namespace) -> dict[str, Any]:
        return {'data.toy.samples_per_class': args.samples_per_class}

    def run(self, args: Namespace, config: RunConfig) -> int:
        spec = ToySpec.from_settings(config.data.toy, config.seed)
        summary = make_toy_dataset(spec, args.out)
        logger.info(f"Toy dataset: {summary.n_images} images, {summary.n_captions} captions, "
                    f"{summary.n_classes} classes")
        _wrote(summary.root)
        return 0


class TrainEncoderCommand(BaseCommand):

    def add_arguments(self, parser: ArgumentParser):
        _add_data(parser)
        parser.add_argument('--epochs', type=int)

    def overrides(self, args: Namespace) -> dict[str, Any]:
        return {'encoder.epochs': args.epochs}

    def run(self, args: Namespace, config: RunConfig) -> int:
        dataset = _load(args, config)
        result = train_encoder(dataset, config.encoder, config.seed, progress=args.progress)
        out = Path(args.out)
        for path in save_encoder(result.model, result.vocab, out):
            _wrote(path)
        _wrote(write_encoder_metrics(result.metrics, out / ArtifactNames.ENCODER_METRICS_CSV))
        logger.info(f"Best epoch {result.best_epoch}: pearson {result.best_pearson}")
        return 0


class EvalEncoderCommand(BaseCommand):

    def add_arguments(self, parser: ArgumentParser):
        _add_data(parser)
        _add_encoder(parser)

    def run(self, args: Namespace, config: RunConfig) -> int:
        dataset = _load(args, config)
        model, vocab = load_encoder(args.encoder or args.out, config.encoder)
        pairs = validation_pairs(dataset, config.seed)
        texts = {c.caption_id: c.text for c in dataset.captions()}
        value = eval_pearson(model, vocab, pairs, texts, config.encoder.batch_size)
        print(f"pearson {value:.4f} on {len(pairs)} pairs")
        return 0


class EncodeCommand(BaseCommand):

    def add_arguments(self, parser: ArgumentParser):
        _add_data(parser)
        _add_encoder(parser)

    def run(self, args: Namespace, config: RunConfig) -> int:
        dataset = _load(args, config)
        model, vocab = load_encoder(args.encoder or args.out, config.encoder)
        path = Path(args.out) / ArtifactNames.EMBEDDINGS
        export_embeddings(model, vocab, dataset.captions(), path, config.encoder.batch_size)
        _wrote(path)
        return 0


class TrainGanCommand(BaseCommand):

    def add_arguments(self, parser: ArgumentParser):
        _add_data(parser)
        _add_embeddings(parser)
        parser.add_argument('--iterations', type=int)
        parser.add_argument('--resume', metavar='CKPT', help='Продолжить с чекпоинта')
        parser.add_argument('--no-eval', action='store_true', dest='no_eval', help='Не считать IS/FID в конце')

    def overrides(self, args: Namespace) -> dict[str, Any]:
        return {'train.iterations': args.iterations}

    def run(self, args: Namespace, config: RunConfig) -> int:
        dataset = _load(args, config)
        embeddings_path = _embeddings_path(args)
        if config.train.mode == TrainMode.conditional and embeddings_path is None:
            raise ConfigError("Условный режим требует кэш эмбеддингов (команда encode или --embeddings)")
        embeddings = EmbeddingCache.read(embeddings_path) if embeddings_path is not None else None

        result = train_loop(config, dataset, embeddings, args.out, resume=args.resume, progress=args.progress)

        if not args.no_eval:
            state = result.state
            backbone = prepare_backbone(config, dataset, args.out, progress=args.progress)
            report = evaluate_run(state.generator, dataset, backbone, config, state.ca_net, embeddings)
            _wrote(report.write(Path(args.out) / ArtifactNames.METRIC_REPORT))
        return 0


class GenerateCommand(BaseCommand):
    """По SAMPLES_PER_CAPTION изображений на подпись, строка сетки на подпись"""

    def add_arguments(self, parser: ArgumentParser):
        parser.add_argument('--checkpoint', required=True, metavar='CKPT')
        _add_encoder(parser)
        parser.add_argument('--caption', action='append', default=[], help='Подпись на индонезийском (повторяемый)')
        parser.add_argument('--count', type=int, default=16, help='Число изображений без подписей')

    def run(self, args: Namespace, config: RunConfig) -> int:
        generator, ca_net, _ = load_generator(args.checkpoint, config)
        rng = Rng(config.seed, (GENERATE_STREAM,))

        if args.caption:
            if ca_net is None:
                raise ConfigError(f"Чекпоинт {args.checkpoint} обучен без условия, подписи не поддерживаются")
            model, vocab = load_encoder(args.encoder or args.out, config.encoder)
            vectors = encode_texts(model, vocab, args.caption, config.encoder.batch_size)
            embeddings = np.repeat(vectors, SAMPLES_PER_CAPTION, axis=0)
            images = synthesize(generator, len(embeddings), rng, ca_net, embeddings, c_dim=config.gan.c_dim)
            columns = SAMPLES_PER_CAPTION
        else:
            images = synthesize(generator, args.count, rng, c_dim=config.gan.c_dim)
            columns = min(SAMPLES_PER_CAPTION, args.count)

        _wrote(write_grid(images, Path(args.out) / ArtifactNames.GENERATED_GRID, columns))
        return 0


class EvaluateCommand(BaseCommand):

    def add_arguments(self, parser: ArgumentParser):
        parser.add_argument('--checkpoint', required=True, metavar='CKPT')
        _add_data(parser)
        _add_embeddings(parser)
        parser.add_argument('--n-samples', type=int, dest='n_samples')
        parser.add_argument('--baseline', action='store_true', help='Также оценить равномерный шум')

    def overrides(self, args: Namespace) -> dict[str, Any]:
        return {'metrics.n_samples': args.n_samples}

    def run(self, args: Namespace, config: RunConfig) -> int:
        dataset = _load(args, config)
        generator, ca_net, _ = load_generator(args.checkpoint, config)
        embeddings = None
        if ca_net is not None:
            embeddings_path = _embeddings_path(args)
            embeddings = EmbeddingCache.read(embeddings_path) if embeddings_path is not None else None

        out = Path(args.out)
        backbone = prepare_backbone(config, dataset, out, progress=args.progress)
        report = evaluate_run(generator, dataset, backbone, config, ca_net, embeddings)
        _wrote(report.write(out / ArtifactNames.METRIC_REPORT))
        if args.baseline:
            baseline = noise_baseline(dataset, backbone, config)
            logger.info(f"Noise baseline FID {baseline.fid:.4f}")
            _wrote(baseline.write(out / ArtifactNames.NOISE_REPORT))
        return 0


class GradcheckCommand(BaseCommand):

    def add_arguments(self, parser: ArgumentParser):
        group = parser.add_mutually_exclusive_group(required=True)
        group.add_argument('--all', action='store_true', help='Все операции и функции потерь')
        group.add_argument('--op', action='append', choices=case_names(), help='Отдельная операция (повторяемый)')
        parser.add_argument('--instances', type=int, default=3)

    def run(self, args: Namespace, config: RunConfig) -> int:
        reports = run_suite(None if args.all else args.op, config.seed, args.instances)
        for report in reports:
            print(report)
        failed = [r.name for r in reports if not r.passed]
        if failed:
            logger.error(f"Gradient check failed: {failed}")
            return 1
        logger.info(f"Gradient check passed for {len(reports)} cases")
        return 0
