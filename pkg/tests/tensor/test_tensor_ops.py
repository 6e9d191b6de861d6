import numpy as np
import numpy.testing as npt
import pytest

from modules import tensor as T
from modules.enums import BnMode
from modules.errors import ContractError, DegenerateBatchError, DimensionError, NumericError, ParameterError
from modules.tensor import RunningStats, Tensor, no_grad


def _conv_reference(x, w, b, stride, pad):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    out = np.zeros((n, o, ho, wo))
    for ni in range(n):
        for oi in range(o):
            for i in range(ho):
                for j in range(wo):
                    patch = xp[ni, :, i * stride:i * stride + k, j * stride:j * stride + k]
                    out[ni, oi, i, j] = np.sum(patch * w[oi]) + b[oi]
    return out


class TestTensor:
    def test_integer_data_becomes_float32(self):
        assert Tensor([1, 2, 3]).dtype == np.float32

    def test_float64_is_kept(self):
        assert Tensor(np.zeros(3, dtype=np.float64)).dtype == np.float64

    def test_item_needs_single_element(self):
        assert Tensor([2.5]).item() == 2.5
        with pytest.raises(DimensionError):
            Tensor([1.0, 2.0]).item()


class TestBackward:
    def test_gradients_accumulate(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        (x * x).sum().backward()
        (x * x).sum().backward()
        npt.assert_allclose(x.grad, [4.0, 8.0])

    def test_zero_grad_clears(self):
        x = Tensor([1.0], requires_grad=True)
        (x * 3.0).sum().backward()
        x.zero_grad()
        assert x.grad is None or np.all(x.grad == 0)

    def test_non_scalar_loss_rejected(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ContractError):
            (x * 2.0).backward()

    def test_shared_node_visited_once(self):
        x = Tensor([1.0, -1.0], requires_grad=True)
        y = x * 2.0
        graph = (y + y).sum().backward()
        npt.assert_allclose(x.grad, [4.0, 4.0])
        assert graph.nodes == ['Sum', 'Add', 'Mul']
        assert graph.leaves == [x]

    def test_no_grad_builds_no_graph(self):
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            y = x * 2.0
        assert not y.requires_grad

    def test_constants_get_no_gradient(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        c = Tensor([3.0, 4.0])
        (x * c).sum().backward()
        assert c.grad is None
        npt.assert_allclose(x.grad, [3.0, 4.0])

    def test_non_finite_result_raises(self):
        with pytest.raises(NumericError):
            T.exp(Tensor([1000.0]))
        with pytest.raises(NumericError):
            T.div(Tensor([1.0]), Tensor([0.0]))


class TestElementwise:
    def test_broadcast_gradient_is_reduced(self):
        a = Tensor(np.ones((3, 4)), requires_grad=True)
        b = Tensor(np.arange(4.0), requires_grad=True)
        (a + b).sum().backward()
        assert b.grad.shape == (4,)
        npt.assert_allclose(b.grad, np.full(4, 3.0))

    def test_incompatible_shapes(self):
        with pytest.raises(DimensionError):
            Tensor(np.ones((2, 3))) + Tensor(np.ones((4,)))

    def test_leaky_relu_slope(self):
        x = Tensor([-1.0, 2.0], requires_grad=True)
        out = T.leaky_relu(x)
        npt.assert_allclose(out.data, [-T.LEAKY_SLOPE, 2.0])
        out.sum().backward()
        npt.assert_allclose(x.grad, [T.LEAKY_SLOPE, 1.0])

    def test_clamp_passes_gradient_only_inside(self):
        x = Tensor([-2.0, 0.5, 3.0], requires_grad=True)
        out = T.clamp(x, -1.0, 1.0)
        npt.assert_allclose(out.data, [-1.0, 0.5, 1.0])
        out.sum().backward()
        npt.assert_allclose(x.grad, [0.0, 1.0, 0.0])

    def test_noise_add_weight_gradient(self):
        x = Tensor(np.zeros((2, 3)), requires_grad=True)
        weight = Tensor([0.5], requires_grad=True)
        noise = np.arange(6.0).reshape(2, 3)
        out = T.noise_add(x, noise, weight)
        npt.assert_allclose(out.data, 0.5 * noise)
        out.sum().backward()
        npt.assert_allclose(weight.grad, [noise.sum()])

    def test_noise_add_shape_mismatch(self):
        with pytest.raises(DimensionError):
            T.noise_add(Tensor(np.zeros((2, 3))), np.zeros((4,)), Tensor([1.0]))


class TestReductions:
    def test_mean_over_axes(self):
        x = Tensor(np.arange(24.0).reshape(2, 3, 4), requires_grad=True)
        out = T.reduce_mean(x, (0, 2))
        npt.assert_allclose(out.data, np.arange(24.0).reshape(2, 3, 4).mean(axis=(0, 2)))
        out.sum().backward()
        npt.assert_allclose(x.grad, np.full((2, 3, 4), 1 / 8))

    def test_duplicate_axes_rejected(self):
        with pytest.raises(ParameterError):
            T.reduce_sum(Tensor(np.ones((2, 2))), (1, -1))

    def test_axis_out_of_range(self):
        with pytest.raises(ParameterError):
            T.reduce_sum(Tensor(np.ones((2, 2))), 2)

    def test_max_routes_gradient_to_argmax(self):
        x = Tensor([[1.0, 5.0, 2.0], [7.0, 0.0, 3.0]], requires_grad=True)
        out = T.reduce_max(x, 1)
        npt.assert_allclose(out.data, [5.0, 7.0])
        out.sum().backward()
        npt.assert_allclose(x.grad, [[0, 1, 0], [1, 0, 0]])


class TestShapes:
    def test_reshape_size_mismatch(self):
        with pytest.raises(DimensionError):
            Tensor(np.ones(6)).reshape(4, 2)

    def test_concat_mismatch(self):
        with pytest.raises(DimensionError):
            T.concat([Tensor(np.ones((1, 2, 3))), Tensor(np.ones((1, 2, 4)))], axis=1)

    def test_concat_empty(self):
        with pytest.raises(ParameterError):
            T.concat([], axis=1)

    def test_concat_splits_gradient(self):
        a = Tensor(np.ones((1, 2)), requires_grad=True)
        b = Tensor(np.ones((1, 3)), requires_grad=True)
        out = T.concat([a, b], axis=1)
        (out * Tensor(np.arange(5.0).reshape(1, 5))).sum().backward()
        npt.assert_allclose(a.grad, [[0, 1]])
        npt.assert_allclose(b.grad, [[2, 3, 4]])

    def test_matmul_mismatch(self):
        with pytest.raises(DimensionError):
            Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))

    def test_log_softmax_is_stable(self):
        out = T.log_softmax(Tensor([[1000.0, 1000.0], [0.0, -1000.0]]), axis=1)
        npt.assert_allclose(np.exp(out.data).sum(axis=1), [1.0, 1.0], rtol=1e-6)
        npt.assert_allclose(out.data[0], [np.log(0.5)] * 2, rtol=1e-6)


class TestConv2d:
    @pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 1), (2, 0)])
    def test_matches_direct_loop(self, np_rng, stride, pad):
        x = np_rng.normal(size=(2, 3, 6, 6))
        w = np_rng.normal(size=(4, 3, 3, 3))
        b = np_rng.normal(size=4)
        out = T.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, pad=pad)
        npt.assert_allclose(out.data, _conv_reference(x, w, b, stride, pad), rtol=1e-10, atol=1e-10)

    def test_output_size(self):
        assert T.conv_output_size(64, 4, 2, 1) == 32
        assert T.conv_output_size(5, 3, 1, 1) == 5

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError):
            T.conv2d(Tensor(np.ones((1, 2, 4, 4))), Tensor(np.ones((1, 3, 3, 3))), Tensor(np.zeros(1)))

    def test_invalid_stride(self):
        with pytest.raises(ParameterError):
            T.conv2d(Tensor(np.ones((1, 1, 4, 4))), Tensor(np.ones((1, 1, 3, 3))), Tensor(np.zeros(1)), stride=0)


class TestResampling:
    def test_upsample_repeats_pixels(self):
        x = Tensor(np.arange(4.0).reshape(1, 1, 2, 2))
        out = T.nearest_upsample(x, 2)
        npt.assert_allclose(out.data[0, 0], [[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 3, 3], [2, 2, 3, 3]])

    def test_pool_undoes_upsample(self, np_rng):
        x = np_rng.normal(size=(2, 3, 4, 4))
        npt.assert_allclose(T.avg_pool(T.nearest_upsample(Tensor(x), 2), 2).data, x)

    def test_upsample_factor_one_rejected(self):
        with pytest.raises(ParameterError):
            T.nearest_upsample(Tensor(np.ones((1, 1, 2, 2))), 1)

    def test_pool_needs_divisible_side(self):
        with pytest.raises(ParameterError):
            T.avg_pool(Tensor(np.ones((1, 1, 6, 6))), 4)

    def test_adaptive_pool_to_target(self):
        out = T.adaptive_avg_pool(Tensor(np.ones((1, 2, 8, 8))), 4)
        assert out.shape == (1, 2, 4, 4)


class TestBatchNorm:
    def _params(self, channels):
        return Tensor(np.ones(channels), requires_grad=True), Tensor(np.zeros(channels), requires_grad=True)

    def test_train_mode_normalizes(self, np_rng):
        x = np_rng.normal(3.0, 2.0, size=(4, 2, 5, 5))
        gamma, beta = self._params(2)
        out = T.batch_norm(Tensor(x), gamma, beta, BnMode.train, RunningStats.fresh(2))
        npt.assert_allclose(out.data.mean(axis=(0, 2, 3)), [0, 0], atol=1e-6)
        npt.assert_allclose(out.data.var(axis=(0, 2, 3)), [1, 1], rtol=1e-3)

    def test_running_stats_update(self, np_rng):
        x = np_rng.normal(3.0, 2.0, size=(4, 2, 5, 5))
        stats = RunningStats.fresh(2)
        gamma, beta = self._params(2)
        T.batch_norm(Tensor(x), gamma, beta, BnMode.train, stats)
        npt.assert_allclose(stats.mean, 0.1 * x.mean(axis=(0, 2, 3)), rtol=1e-5)

    def test_eval_mode_uses_running_stats(self):
        stats = RunningStats(mean=np.array([1.0], dtype=np.float32), var=np.array([4.0], dtype=np.float32))
        gamma, beta = self._params(1)
        out = T.batch_norm(Tensor(np.full((1, 1, 1, 1), 3.0)), gamma, beta, BnMode.eval, stats, eps=0.0)
        npt.assert_allclose(out.data.ravel(), [1.0])
        npt.assert_allclose(stats.mean, [1.0])

    def test_single_element_batch_is_degenerate(self):
        gamma, beta = self._params(2)
        with pytest.raises(DegenerateBatchError):
            T.batch_norm(Tensor(np.ones((1, 2, 1, 1))), gamma, beta, BnMode.train, RunningStats.fresh(2))


class TestGlu:
    def test_gates_first_half(self):
        x = Tensor(np.array([2.0, 0.0]).reshape(1, 2, 1, 1))
        npt.assert_allclose(T.glu(x).data.ravel(), [1.0])

    def test_odd_channels(self):
        with pytest.raises(DimensionError):
            T.glu(Tensor(np.ones((1, 3, 2, 2))))


class TestEmbedding:
    def test_repeated_ids_accumulate(self):
        table = Tensor(np.zeros((4, 2)), requires_grad=True)
        T.embedding(table, np.array([1, 1, 3])).sum().backward()
        npt.assert_allclose(table.grad[:, 0], [0, 2, 0, 1])

    def test_id_out_of_range(self):
        with pytest.raises(DimensionError):
            T.embedding(Tensor(np.zeros((4, 2))), np.array([4]))


class TestTranslate:
    def test_shift_replicates_edge(self):
        x = Tensor(np.arange(16.0).reshape(1, 1, 4, 4))
        out = T.translate(x, np.array([[1, 0]]))
        rows = out.data[0, 0]
        npt.assert_allclose(rows[0], x.data[0, 0, 0])
        npt.assert_allclose(rows[1], x.data[0, 0, 0])
        npt.assert_allclose(rows[3], x.data[0, 0, 2])

    def test_zero_shift_is_identity(self, np_rng):
        x = np_rng.normal(size=(2, 3, 4, 4))
        npt.assert_allclose(T.translate(Tensor(x), np.zeros((2, 2))).data, x)

    def test_shift_shape_must_match_batch(self):
        with pytest.raises(DimensionError):
            T.translate(Tensor(np.ones((2, 1, 4, 4))), np.zeros((3, 2)))
