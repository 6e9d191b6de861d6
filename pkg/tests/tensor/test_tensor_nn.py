import numpy as np
import numpy.testing as npt
import pytest

from modules.errors import IncompatibleCheckpointError
from modules.tensor import Adam, BatchNorm2d, Conv2d, Linear, Module, Parameter, Rng, Sgd, Tensor


class TwoLayer(Module):
    def __init__(self, rng: Rng):
        super().__init__()
        self.scale = Parameter(np.ones(1))
        self.layers = [Linear(3, 4, rng.child(0)), Linear(4, 2, rng.child(1))]
        self.heads = {'norm': BatchNorm2d(2)}

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x * self.scale


@pytest.fixture
def model(rng):
    return TwoLayer(rng)


class TestModule:
    def test_parameter_names_follow_assignment(self, model):
        names = [name for name, _ in model.named_parameters()]
        assert names == [
            'scale', 'layers.0.weight', 'layers.0.bias', 'layers.1.weight', 'layers.1.bias',
            'heads.norm.gamma', 'heads.norm.beta',
        ]

    def test_parameters_are_float32(self):
        assert Parameter(np.ones(2, dtype=np.float64)).dtype == np.float32

    def test_buffers_in_state(self, model):
        state = model.state_dict()
        assert 'heads.norm.running_mean' in state
        assert 'heads.norm.running_var' in state

    def test_train_eval_propagates(self, model):
        model.eval()
        assert not model.layers[0].training and not model.heads['norm'].training
        model.train()
        assert model.heads['norm'].training

    def test_requires_grad_toggle(self, model):
        model.requires_grad_(False)
        assert not any(p.requires_grad for p in model.parameters())

    def test_load_state_restores_values(self, model, rng):
        other = TwoLayer(rng.child(5))
        assert other.digest() != model.digest()
        other.load_state_dict({k: v.copy() for k, v in model.state_dict().items()})
        assert other.digest() == model.digest()

    def test_missing_tensor_rejected(self, model):
        state = model.state_dict()
        del state['scale']
        with pytest.raises(IncompatibleCheckpointError):
            model.load_state_dict(state)

    def test_shape_mismatch_rejected(self, model):
        state = dict(model.state_dict())
        state['layers.0.weight'] = np.zeros((5, 5), dtype=np.float32)
        with pytest.raises(IncompatibleCheckpointError):
            model.load_state_dict(state)

    def test_digest_tracks_parameters(self, model):
        before = model.digest()
        model.scale.data = model.scale.data + 1
        assert model.digest() != before

    def test_parameter_count(self, model):
        assert model.parameter_count() == 1 + (12 + 4) + (8 + 2) + 4


class TestLayers:
    def test_conv_init_std(self, rng):
        conv = Conv2d(16, 16, 3, rng)
        assert conv.weight.shape == (16, 16, 3, 3)
        assert abs(float(conv.weight.data.std()) - 0.02) < 0.003
        assert np.all(conv.bias.data == 0)

    def test_batch_norm_updates_only_in_train(self, np_rng):
        bn = BatchNorm2d(2)
        x = Tensor(np_rng.normal(2.0, 1.0, size=(4, 2, 3, 3)))
        bn(x)
        updated = bn.running_mean.copy()
        assert np.all(updated != 0)
        bn.eval()
        bn(x)
        npt.assert_array_equal(bn.running_mean, updated)


def _param(value):
    return Parameter(np.array([value]))


class TestOptimizers:
    def test_sgd_momentum(self):
        p = _param(1.0)
        opt = Sgd([('p', p)], lr=0.1, momentum=0.9)
        for _ in range(2):
            p.grad = np.ones(1, dtype=np.float32)
            opt.step()
        npt.assert_allclose(p.data, [0.71], rtol=1e-5)

    def test_adam_first_step_is_lr_sized(self):
        p = _param(1.0)
        opt = Adam([('p', p)], lr=0.1)
        p.grad = np.array([2.0], dtype=np.float32)
        opt.step()
        npt.assert_allclose(p.data, [0.9], rtol=1e-5)

    def test_parameters_without_grad_untouched(self):
        p, q = _param(1.0), _param(1.0)
        opt = Adam([('p', p), ('q', q)], lr=0.1)
        p.grad = np.ones(1, dtype=np.float32)
        opt.step()
        npt.assert_array_equal(q.data, [1.0])

    def test_state_round_trip_continues_identically(self):
        p = _param(1.0)
        opt = Adam([('p', p)], lr=0.1)
        for g in (1.0, -0.5):
            p.grad = np.array([g], dtype=np.float32)
            opt.step()
        state = {k: np.array(v) for k, v in opt.state_dict('adam').items()}
        assert set(state) == {'adam/step', 'adam/m/p', 'adam/v/p'}

        twin = _param(float(p.data[0]))
        restored = Adam([('p', twin)], lr=0.1)
        restored.load_state_dict(state, 'adam')
        for param, optimizer in ((p, opt), (twin, restored)):
            param.grad = np.array([0.3], dtype=np.float32)
            optimizer.step()
        npt.assert_array_equal(p.data, twin.data)

    def test_missing_state_rejected(self):
        with pytest.raises(IncompatibleCheckpointError):
            Sgd([('p', _param(1.0))]).load_state_dict({}, 'sgd')
