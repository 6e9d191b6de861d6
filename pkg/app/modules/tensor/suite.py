"""
Набор проверок конечными разностями для каждой дифференцируемой
операции и составных функций потерь.

Каждый случай — скалярная функция ``sum(op(x) · w)`` со случайными
фиксированными весами ``w``; входы гладких участков отодвинуты от
изломов (relu, |x|, clamp, max) больше чем на шаг h. Все случаи
считаются в float32 с шагом h = 1e-2; в составных сетях веса
подобраны так, что входы leaky-ReLU не меняют знак в окрестности h.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from modules.enums import BnMode
from modules.tensor import functional as F
from modules.tensor import tensor as T
from modules.tensor.gradcheck import GradCheckReport, grad_check
from modules.tensor.rng import Rng
from modules.tensor.tensor import Tensor, no_grad

SUITE_STREAM = 40
DEFAULT_INSTANCES = 3
_PATCH = 4


@dataclass
class GradCase:
    name: str
    # rng → (функция, входы)
    build: Callable[[Rng], tuple[Callable[..., Tensor], list[np.ndarray]]]


def _away_from_zero(rng: Rng, shape, margin: float = 0.1) -> np.ndarray:
    u = rng.normal(shape)
    return (np.sign(u) * (margin + np.abs(u))).astype(np.float32)


def _project(out: Tensor, rng: Rng) -> Tensor:
    w = rng.normal(out.shape)
    return (out * w).sum()


def _unary(op: Callable[[Tensor], Tensor], sampler: Callable[[Rng], np.ndarray]):
    def build(rng: Rng):
        x = sampler(rng.child(0))
        w = rng.child(1)
        return (lambda a: _project(op(a), Rng(w.seed, w.stream))), [x]
    return build


def _binary(op: Callable[[Tensor, Tensor], Tensor], shape_a, shape_b, positive_b: bool = False):
    def build(rng: Rng):
        a = rng.child(0).normal(shape_a)
        b = rng.child(1).normal(shape_b)
        if positive_b:
            b = (0.5 + np.abs(b)).astype(np.float32)
        w = rng.child(2)
        return (lambda x, y: _project(op(x, y), Rng(w.seed, w.stream))), [a, b]
    return build


def _build_conv(rng: Rng):
    x = rng.child(0).normal((2, 2, 5, 5))
    weight = rng.child(1).normal((3, 2, 3, 3), std=0.5)
    bias = rng.child(2).normal((3,))
    w = rng.child(3)
    return (lambda a, k, b: _project(F.conv2d(a, k, b, stride=2, pad=1), Rng(w.seed, w.stream))), [x, weight, bias]


def _build_batch_norm(rng: Rng):
    x = rng.child(0).normal((4, 2, 3, 3))
    gamma = (1.0 + 0.1 * rng.child(1).normal((2,))).astype(np.float32)
    beta = rng.child(2).normal((2,))
    w = rng.child(3)

    def f(a, g, b):
        return _project(F.batch_norm(a, g, b, BnMode.train, F.RunningStats.fresh(2)), Rng(w.seed, w.stream))
    return f, [x, gamma, beta]


def _build_linear(rng: Rng):
    x = rng.child(0).normal((3, 4))
    weight = rng.child(1).normal((4, 5))
    bias = rng.child(2).normal((5,))
    w = rng.child(3)
    return (lambda a, k, b: _project(F.linear(a, k, b), Rng(w.seed, w.stream))), [x, weight, bias]


def _build_embedding(rng: Rng):
    table = rng.child(0).normal((6, 3))
    ids = rng.child(1).integers(0, 6, (2, 4))
    w = rng.child(2)
    return (lambda t: _project(F.embedding(t, ids), Rng(w.seed, w.stream))), [table]


def _build_translate(rng: Rng):
    x = rng.child(0).normal((2, 3, 6, 6))
    shifts = rng.child(1).integers(-2, 3, (2, 2))
    w = rng.child(2)
    return (lambda a: _project(F.translate(a, shifts), Rng(w.seed, w.stream))), [x]


def _build_noise_add(rng: Rng):
    x = rng.child(0).normal((2, 2, 3, 3))
    noise = rng.child(1).normal((2, 1, 3, 3))
    weight = rng.child(2).normal((1,))
    w = rng.child(3)
    return (lambda a, s: _project(T.noise_add(a, noise, s), Rng(w.seed, w.stream))), [x, weight]


def _build_reduce_max(rng: Rng):
    # значения различаются больше чем на 2h
    x = (rng.child(0).permutation(12).reshape(3, 4) * 0.1).astype(np.float32)
    w = rng.child(1)
    return (lambda a: _project(T.reduce_max(a, 1), Rng(w.seed, w.stream))), [x]


def _build_concat(rng: Rng):
    a = rng.child(0).normal((2, 3))
    b = rng.child(1).normal((2, 2))
    w = rng.child(2)
    return (lambda x, y: _project(T.concat([x, y], axis=1), Rng(w.seed, w.stream))), [a, b]


def _build_hinge(conditional: bool):
    def build(rng: Rng):
        from modules.gan.objectives import d_hinge_loss
        real = rng.child(0).uniform(-0.5, 0.5, (4, 1))
        wrong = rng.child(1).uniform(-0.5, 0.5, (4, 1))
        fake = rng.child(2).uniform(-0.5, 0.5, (4, 1))
        percept = np.array(0.3, dtype=np.float32)

        def f(r, wr, fk, p):
            return d_hinge_loss(r, wr if conditional else None, fk, p, conditional).total
        return f, [real, wrong, fake, percept]
    return build


def _build_g_loss(rng: Rng):
    from modules.gan.objectives import g_loss
    return (lambda s: g_loss(s)), [rng.normal((5, 1))]

def _build_pixel_l1(rng: Rng):
    from modules.gan.objectives import PerceptualMetric
    metric = PerceptualMetric()
    x = rng.child(0).uniform(-1, 1, (2, 3, 4, 4))
    y = (x + _away_from_zero(rng.child(1), x.shape)).astype(np.float32)
    return (lambda a, b: metric(a, b)), [x, y]


def _bind(module, names: Sequence[str]) -> Callable[..., None]:
    """Подставить тензоры вместо именованных параметров модуля"""
    def bind(*tensors: Tensor):
        for name, tensor in zip(names, tensors):
            *path, attr = name.split('.')
            owner = module
            for key in path:
                if isinstance(owner, list):
                    owner = owner[int(key)]
                elif isinstance(owner, dict):
                    owner = owner[key]
                else:
                    owner = getattr(owner, key)
            setattr(owner, attr, tensor)
    return bind


def _parameter_point(module, names: Sequence[str]) -> list[np.ndarray]:
    params = dict(module.named_parameters())
    return [params[name].data.copy() for name in names]


def _rescale_convs(module, rng: Rng):
    """Свёрточные веса N(0, 1/fan_in) вместо N(0, 0.02)"""
    for i, (_, param) in enumerate(module.named_parameters()):
        if param.data.ndim == 4:
            fan_in = int(np.prod(param.shape[1:]))
            param.data = rng.child(i).normal(param.shape, std=1.0 / np.sqrt(fan_in))


def _clear_kink(conv, pre_activation: np.ndarray, margin: float = 0.1):
    """Сдвиг смещения: чётные каналы ≥ margin, нечётные ≤ −margin"""
    shifts = np.zeros(conv.bias.shape, dtype=np.float32)
    for c in range(shifts.size):
        values = pre_activation[:, c]
        shifts[c] = max(0.0, margin - values.min()) if c % 2 == 0 else min(0.0, -margin - values.max())
    conv.bias.data = conv.bias.data + shifts


def _sign_consistent(conv, in_signs: np.ndarray, rng: Rng) -> np.ndarray:
    """
    Веса со знаком s_out·s_in и нулевое смещение.

    При входах знака s_in каждое слагаемое свёртки имеет знак s_out,
    поэтому вход leaky-ReLU не меняет знак при малом сдвиге входа.
    Возвращает знаки выходных каналов (чередуются).
    """
    out_channels, in_channels, kh, kw = conv.weight.shape
    out_signs = np.where(np.arange(out_channels) % 2 == 0, 1.0, -1.0)
    magnitude = np.abs(rng.normal(conv.weight.shape)) * (2.0 / (in_channels * kh * kw))
    conv.weight.data = (magnitude * np.outer(out_signs, in_signs)[:, :, None, None]).astype(np.float32)
    conv.bias.data = np.zeros(conv.bias.shape, dtype=np.float32)
    return out_signs


def _tiny_discriminator(image_size: int, conditional: bool, rng: Rng):
    from modules.gan.discriminator import Discriminator
    from modules.settings import GanSettings
    settings = GanSettings(image_size=image_size, c_dim=2, z_dim=2, base_channels=4, channel_floor=2, sle_pairs=[],
                           disc_channels=2, disc_channel_cap=4, decoder_channel_floor=1)
    return Discriminator(settings, conditional, rng)


def _place(patch: Tensor, top: int, left: int, size: int) -> Tensor:
    """Патч на нулевом фоне size×size"""
    n, c, h, w = patch.shape

    def zeros(rows: int, cols: int) -> Tensor:
        return Tensor(np.zeros((n, c, rows, cols), dtype=patch.data.dtype))

    band = T.concat([zeros(h, left), patch, zeros(h, size - left - w)], axis=3)
    return T.concat([zeros(top, size), band, zeros(size - top - h, size)], axis=2)


def _build_d_encode(rng: Rng):
    # Логит условного дискриминатора по патчу 4×4 на нулевом фоне. Входы
    # положительны и больше h, веса согласованы по знаку: leaky-ReLU
    # работает на одной ветви, функция линейна по патчу.
    from modules.gan.discriminator import d_encode
    disc = _tiny_discriminator(32, True, rng.child(0))
    _rescale_convs(disc, rng.child(6))
    signs = np.ones(3)
    for i, conv in enumerate(disc.down):
        signs = _sign_consistent(conv, signs, rng.child(1, i))
    _sign_consistent(disc.head_conv, np.concatenate([signs, np.ones(disc.mu_dim)]), rng.child(1, len(disc.down)))
    disc.requires_grad_(False)

    size = disc.image_size
    top, left = (int(v) for v in rng.child(2).integers(1, size - _PATCH, (2,)))
    patch = rng.child(3).uniform(0.05, 0.15, (1, 3, _PATCH, _PATCH))
    mu = Tensor(rng.child(4).uniform(0.02, 0.05, (1, disc.mu_dim)))
    w = rng.child(5)
    return (lambda p: _project(d_encode(disc, _place(p, top, left, size), mu)[1], Rng(w.seed, w.stream))), [patch]


def _build_d_decode(rng: Rng):
    # Полный декодер 8×8 → 128×128 (четыре блока), проекция кропа 1/8;
    # батч-нормализация по бегущим статистикам
    from modules.gan.discriminator import apply_crop, crop_spec, d_decode
    disc = _tiny_discriminator(128, False, rng.child(0))
    _rescale_convs(disc, rng.child(1))
    disc.requires_grad_(False)
    disc.eval()
    features = rng.child(2).normal((1, disc.feature_channels, 8, 8))
    spec = crop_spec(disc.target_size, disc.target_size, rng.child(3))
    w = rng.child(4)
    return (lambda f: _project(apply_crop(d_decode(disc, f), spec), Rng(w.seed, w.stream))), [features]


def _build_perceptual(rng: Rng):
    # признаки линейны по входу на одной ветви leaky-ReLU;
    # нормировка по каналам масштабно-инвариантна, поэтому входы малы
    from modules.enums import PerceptualMode
    from modules.gan.objectives import PerceptualMetric
    metric = PerceptualMetric(PerceptualMode.random_features, rng.child(0))
    signs = np.ones(3)
    for i, conv in enumerate(metric.features.layers):
        signs = _sign_consistent(conv, signs, rng.child(1, i))
    x = rng.child(2).uniform(0.05, 0.15, (1, 3, 4, 4))
    y = rng.child(3).uniform(0.05, 0.15, (1, 3, 4, 4))
    return (lambda a, b: metric(a, b)), [x, y]


def _build_sle(rng: Rng):
    from modules.gan.generator import SleBlock
    block = SleBlock(3, 2, rng.child(0))
    block.squeeze.weight.data = rng.child(1).normal(block.squeeze.weight.shape, std=1.5)
    block.excite.weight.data = rng.child(2).normal(block.excite.weight.shape, std=0.7)
    block.requires_grad_(False)
    low = rng.child(3).normal((2, 3, 4, 4), std=0.1)
    high = rng.child(4).normal((2, 2, 4, 4))
    with no_grad():
        _clear_kink(block.squeeze, block.squeeze(F.adaptive_avg_pool(Tensor(low), 4)).data)
    w = rng.child(5)
    return (lambda a, b: _project(block(a, b), Rng(w.seed, w.stream))), [low, high]


def _build_ca(rng: Rng):
    # ω заморожен; проверяются φ и веса проекции
    from modules.gan.conditioning import CaNet, ca_forward
    net = CaNet(4, 3, rng.child(0))
    names = ['projection.weight', 'projection.bias']
    bind = _bind(net, names)
    weight, bias = _parameter_point(net, names)
    bias = bias + rng.child(1).normal(bias.shape, std=0.3)
    phi = rng.child(2).normal((2, 4))
    omega = rng.child(3).normal((2, 3))
    w = rng.child(4)

    def f(p, k, b):
        bind(k, b)
        return _project(ca_forward(net, p, omega=omega).c_hat, Rng(w.seed, w.stream))
    return f, [phi, weight, bias]


def _build_cosine(rng: Rng):
    from modules.text.encoder import cosine_rows
    u = rng.child(0).normal((3, 4))
    v = rng.child(1).normal((3, 4))
    labels = rng.child(2).uniform(0.4, 1.0, (3,))
    return (lambda a, b: ((cosine_rows(a, b) - labels) ** 2).mean()), [u, v]


def _build_pair_loss(rng: Rng):
    # полная сиамская функция потерь по всем весам кодировщика
    from modules.enums import PoolingMode
    from modules.settings.run_config import EncoderSettings
    from modules.text.encoder import EncoderModel, siamese_pair_loss
    from modules.text.vocabulary import PAD_ID
    settings = EncoderSettings(d_model=4, embed_dim=3, mixing_layers=1, max_tokens=6, pooling=PoolingMode.mean)
    model = EncoderModel(8, settings, rng.child(0))
    names = ['embedding.weight', 'mixing.0.weight', 'projection.weight']
    bind = _bind(model, names)
    ids_a = rng.child(1).integers(2, 8, (3, 5))
    ids_a[0, -2:] = PAD_ID
    ids_b = rng.child(2).integers(2, 8, (3, 5))
    labels = rng.child(3).uniform(0.4, 1.0, (3,))

    def f(table, mixing, projection):
        bind(table, mixing, projection)
        return siamese_pair_loss(model, ids_a, ids_b, labels)
    return f, _parameter_point(model, names)


CASES: list[GradCase] = [
    GradCase('add', _binary(T.add, (3, 4), (4,))),
    GradCase('sub', _binary(T.sub, (3, 4), (3, 1))),
    GradCase('mul', _binary(T.mul, (3, 4), (3, 4))),
    GradCase('div', _binary(T.div, (3, 4), (3, 4), positive_b=True)),
    GradCase('neg', _unary(T.neg, lambda r: r.normal((3, 4)))),
    GradCase('power', _unary(lambda x: T.power(x, 3.0), lambda r: r.normal((3, 4)))),
    GradCase('exp', _unary(T.exp, lambda r: r.normal((3, 4)))),
    GradCase('sqrt', _unary(T.sqrt, lambda r: (0.5 + np.abs(r.normal((3, 4)))).astype(np.float32))),
    GradCase('absolute', _unary(T.absolute, lambda r: _away_from_zero(r, (3, 4)))),
    GradCase('tanh', _unary(T.tanh, lambda r: r.normal((3, 4)))),
    GradCase('sigmoid', _unary(T.sigmoid, lambda r: r.normal((3, 4)))),
    GradCase('leaky_relu', _unary(T.leaky_relu, lambda r: _away_from_zero(r, (3, 4)))),
    GradCase('relu', _unary(T.relu, lambda r: _away_from_zero(r, (3, 4)))),
    GradCase('clamp', _unary(lambda x: T.clamp(x, -1.0, 1.0),
                             lambda r: (r.permutation(12).reshape(3, 4) * 0.25 - 1.4).astype(np.float32))),
    GradCase('reduce_sum', _unary(lambda x: T.reduce_sum(x, axes=1, keepdims=True), lambda r: r.normal((3, 4)))),
    GradCase('reduce_mean', _unary(lambda x: T.reduce_mean(x, axes=(0, 2)), lambda r: r.normal((2, 3, 4)))),
    GradCase('reduce_max', _build_reduce_max),
    GradCase('reshape', _unary(lambda x: T.reshape(x, (4, 3)), lambda r: r.normal((3, 4)))),
    GradCase('getitem', _unary(lambda x: x[:, 1:3], lambda r: r.normal((3, 4)))),
    GradCase('concat', _build_concat),
    GradCase('matmul', _binary(T.matmul, (3, 4), (4, 2))),
    GradCase('log_softmax', _unary(lambda x: T.log_softmax(x, axis=1), lambda r: r.normal((3, 4)))),
    GradCase('noise_add', _build_noise_add),
    GradCase('conv2d', _build_conv),
    GradCase('nearest_upsample', _unary(lambda x: F.nearest_upsample(x, 2), lambda r: r.normal((1, 2, 3, 3)))),
    GradCase('avg_pool', _unary(lambda x: F.avg_pool(x, 2), lambda r: r.normal((1, 2, 4, 4)))),
    GradCase('batch_norm', _build_batch_norm),
    GradCase('glu', _unary(lambda x: F.glu(x, axis=1), lambda r: r.normal((2, 4, 2, 2)))),
    GradCase('linear', _build_linear),
    GradCase('embedding', _build_embedding),
    GradCase('translate', _build_translate),
    GradCase('skip_excitation', _build_sle),
    GradCase('ca_reparameterization', _build_ca),
    GradCase('cosine_pair_loss', _build_cosine),
    GradCase('siamese_pair_loss', _build_pair_loss),
    GradCase('d_loss_unconditional', _build_hinge(False)),
    GradCase('d_loss_conditional', _build_hinge(True)),
    GradCase('g_loss', _build_g_loss),
    GradCase('perceptual_pixel_l1', _build_pixel_l1),
    GradCase('perceptual_random_features', _build_perceptual),
    GradCase('d_encode', _build_d_encode),
    GradCase('d_decode', _build_d_decode),
]


def case_names() -> list[str]:
    return [case.name for case in CASES]


def run_case(case: GradCase, seed: int = 0, instances: int = DEFAULT_INSTANCES,
             step: float = 1e-2, tolerance: float = 1e-3) -> GradCheckReport:
    """Худший отчёт по ``instances`` случайным точкам"""
    worst: Optional[GradCheckReport] = None
    for instance in range(instances):
        f, inputs = case.build(Rng(seed, (SUITE_STREAM, instance)))
        report = grad_check(f, inputs, step=step, tolerance=tolerance, name=case.name)
        if worst is None or not report.usable or report.max_rel_error > worst.max_rel_error:
            worst = report
        if not report.usable:
            break
    return worst


def run_suite(names: Optional[Sequence[str]] = None, seed: int = 0,
              instances: int = DEFAULT_INSTANCES) -> list[GradCheckReport]:
    selected = [c for c in CASES if names is None or c.name in names]
    return [run_case(case, seed, instances) for case in selected]
