import numpy as np
import numpy.testing as npt
import pytest

from modules.enums import PerceptualMode
from modules.errors import ContractError, DimensionError
from modules.gan import LossBundle, PerceptualMetric, d_hinge_loss, g_loss, hinge_fake, hinge_real, perceptual_loss
from modules.tensor import Rng, Tensor

LOGITS = np.array([[2.0], [0.5], [-1.0]])


class TestHinge:
    def test_real_term(self):
        assert hinge_real(Tensor(LOGITS)).item() == pytest.approx((0 + 0.5 + 2) / 3)

    def test_fake_term(self):
        assert hinge_fake(Tensor(LOGITS)).item() == pytest.approx((3 + 1.5 + 0) / 3)

    def test_confident_discriminator_has_zero_loss(self):
        assert hinge_real(Tensor(np.full((4, 1), 1.5))).item() == 0.0
        assert hinge_fake(Tensor(np.full((4, 1), -1.5))).item() == 0.0

    def test_generator_loss_is_negative_mean(self):
        assert g_loss(Tensor(LOGITS)).item() == pytest.approx(-0.5)


class TestDiscriminatorLoss:
    def test_unconditional_total(self):
        bundle = d_hinge_loss(Tensor(LOGITS), None, Tensor(-LOGITS), Tensor(np.float32(0.25)))
        assert bundle.l_d_adv_wrong is None
        assert bundle.l_d_total == pytest.approx(bundle.l_d_adv_real + bundle.l_d_adv_fake + 0.25)
        assert bundle.total.item() == pytest.approx(bundle.l_d_total, rel=1e-6)

    def test_conditional_adds_wrong_term(self):
        wrong = Tensor(np.array([[0.0], [0.0]]))
        bundle = d_hinge_loss(Tensor(LOGITS), wrong, Tensor(LOGITS), 0.0, conditional=True)
        assert bundle.l_d_adv_wrong == pytest.approx(1.0)
        assert bundle.l_d_total == pytest.approx(bundle.l_d_adv_real + 1.0 + bundle.l_d_adv_fake)

    def test_conditional_needs_wrong_batch(self):
        with pytest.raises(ContractError):
            d_hinge_loss(Tensor(LOGITS), None, Tensor(LOGITS), 0.0, conditional=True)
        with pytest.raises(ContractError):
            d_hinge_loss(Tensor(LOGITS), Tensor(np.zeros((0, 1))), Tensor(LOGITS), 0.0, conditional=True)

    def test_unconditional_rejects_wrong_batch(self):
        with pytest.raises(ContractError):
            d_hinge_loss(Tensor(LOGITS), Tensor(LOGITS), Tensor(LOGITS), 0.0)

    def test_gradient_flows_to_logits(self):
        real = Tensor(LOGITS, requires_grad=True)
        d_hinge_loss(real, None, Tensor(LOGITS), 0.0).total.backward()
        npt.assert_allclose(real.grad.ravel(), [0, -1 / 3, -1 / 3])

    def test_csv_row(self):
        bundle = LossBundle(0.1, 0.2, None, 0.3, 0.6, l_g=-0.4)
        assert bundle.row(7) == {
            'iteration': 7, 'l_d_total': 0.6, 'l_g': -0.4, 'l_percept': 0.1,
            'l_d_adv_real': 0.2, 'l_d_adv_wrong': None, 'l_d_adv_fake': 0.3,
        }


@pytest.mark.parametrize("mode", list(PerceptualMode))
class TestPerceptualMetric:
    @pytest.fixture
    def pair(self):
        rng = Rng(8)
        return Tensor(rng.uniform(-1, 1, (2, 3, 16, 16))), Tensor(rng.uniform(-1, 1, (2, 3, 16, 16)))

    def test_zero_on_identical(self, mode, pair):
        metric = PerceptualMetric(mode, Rng(0))
        assert metric(pair[0], pair[0]).item() == pytest.approx(0.0, abs=1e-7)

    def test_symmetric_and_positive(self, mode, pair):
        metric = PerceptualMetric(mode, Rng(0))
        forward, backward = metric(*pair).item(), metric(pair[1], pair[0]).item()
        assert forward > 0
        assert forward == pytest.approx(backward, rel=1e-5)

    def test_gradient_reaches_images_only(self, mode, pair):
        metric = PerceptualMetric(mode, Rng(0))
        x = Tensor(pair[0].data, requires_grad=True)
        metric(x, pair[1]).backward()
        assert np.any(x.grad != 0)
        if metric.features is not None:
            assert all(p.grad is None for p in metric.features.parameters())

    def test_shape_mismatch(self, mode, pair):
        with pytest.raises(DimensionError):
            PerceptualMetric(mode, Rng(0))(pair[0], pair[0][:, :, :8, :8])

    def test_loss_sums_full_and_crop(self, mode, pair):
        metric = PerceptualMetric(mode, Rng(0))
        a, b = pair
        crop_a, crop_b = a[:, :, :8, :8], b[:, :, :8, :8]
        expected = metric(a, b).item() + metric(crop_a, crop_b).item()
        assert perceptual_loss(metric, a, b, crop_a, crop_b).item() == pytest.approx(expected, rel=1e-5)
