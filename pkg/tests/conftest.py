"""
Общие фикстуры: seeded numpy, крошечный игрушечный датасет и
крошечная конфигурация GAN (32×32, несколько каналов).
"""
import json

import numpy as np
import pytest

from modules.data import EmbeddingCache, ToySpec, load_dataset, make_toy_dataset
from modules.settings import resolve_config
from modules.tensor import Rng

TINY_SIDE = 32
TINY_EMBED = 8

TINY_OVERRIDES = {
    'data.image_size': TINY_SIDE,
    'data.toy.image_side': TINY_SIDE,
    'data.toy.samples_per_class': 4,
    'encoder.d_model': 8,
    'encoder.embed_dim': TINY_EMBED,
    'encoder.epochs': 1,
    'encoder.batch_size': 16,
    'gan.image_size': TINY_SIDE,
    'gan.c_dim': 4,
    'gan.z_dim': 4,
    'gan.base_channels': 16,
    'gan.channel_floor': 4,
    'gan.sle_pairs': [],
    'gan.disc_channels': 4,
    'gan.disc_channel_cap': 8,
    'gan.decoder_channel_floor': 4,
    'train.iterations': 3,
    'train.batch_size': 4,
    'train.checkpoint_every': 2,
    'train.log_every': 1,
    'train.grid_size': 4,
    'train.prefetch_workers': 0,
    'metrics.feature_dim': 8,
    'metrics.n_samples': 8,
    'metrics.classifier_epochs': 1,
    'metrics.batch_size': 8,
}


def tiny_config(**overrides):
    """Крошечная конфигурация; ключи вида ``train__mode`` → ``train.mode``"""
    flat = dict(TINY_OVERRIDES)
    flat.update({key.replace('__', '.'): value for key, value in overrides.items()})
    return resolve_config('desk', overrides=flat)


@pytest.fixture
def np_rng():
    return np.random.default_rng(42)


@pytest.fixture
def rng():
    return Rng(0, (99,))


@pytest.fixture
def config():
    return tiny_config()


@pytest.fixture
def make_config():
    return tiny_config


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    make_toy_dataset(ToySpec(seed=0, image_side=TINY_SIDE, samples_per_class=4), root)
    return root


@pytest.fixture(scope="session")
def toy_dataset(toy_root):
    return load_dataset(toy_root, 'toy', TINY_SIDE)


@pytest.fixture(scope="session")
def toy_embeddings(toy_dataset):
    """Случайные, но фиксированные эмбеддинги всех подписей"""
    cache = EmbeddingCache(TINY_EMBED)
    stream = Rng(1, (7,))
    for caption in toy_dataset.captions():
        cache.add(caption.caption_id, stream.normal((TINY_EMBED,)))
    return cache


@pytest.fixture
def tiny_config_file(tmp_path):
    """Крошечная конфигурация в формате ``section.key = value`` для CLI"""
    path = tmp_path / "tiny.conf"
    lines = [f"{key} = {json.dumps(value)}" for key, value in TINY_OVERRIDES.items()]
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path
