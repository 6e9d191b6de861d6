import csv
import json

import numpy as np
import numpy.testing as npt
import pytest

from modules.constants import ArtifactNames
from modules.errors import (
    ConfigError, ContractError, DataIntegrityError, FormatError, IncompatibleCheckpointError, NumericError,
    PairingError, TrainingAbortedError,
)
from modules.gan import (
    GanTrainer, load_generator, read_checkpoint, sample_caption, sample_wrong, train_loop, train_step_conditional,
    write_loss_csv,
)
from modules.gan.checkpoint import CHECKPOINT_MAGIC
from modules.tensor import Rng


@pytest.fixture
def trainer(config, toy_dataset, tmp_path):
    return GanTrainer(config, toy_dataset, out_dir=tmp_path)


@pytest.fixture
def conditional(make_config, toy_dataset, toy_embeddings, tmp_path):
    return GanTrainer(make_config(train__mode='conditional'), toy_dataset, toy_embeddings, out_dir=tmp_path)


class TestSampling:
    def test_caption_from_own_image(self, toy_dataset):
        record = toy_dataset.records[0]
        assert sample_caption(record, Rng(0)) in record.captions

    def test_image_without_captions(self, toy_dataset):
        record = toy_dataset.records[0]
        empty = type(record)(record.image_id, record.ordinal, record.class_id, record.class_name, record.split,
                             record.path)
        with pytest.raises(DataIntegrityError):
            sample_caption(empty, Rng(0))

    def test_wrong_images_from_other_classes(self, toy_dataset):
        captions = toy_dataset.captions()[:20]
        wrong = sample_wrong(captions, toy_dataset.records, Rng(1))
        assert all(w.class_id != c.class_id for w, c in zip(wrong, captions))

    def test_wrong_needs_two_classes(self, toy_dataset):
        records = [r for r in toy_dataset.records if r.class_id == 0]
        with pytest.raises(PairingError):
            sample_wrong(records[0].captions, records, Rng(1))

    def test_batch_is_reproducible(self, config, toy_dataset):
        a = GanTrainer(config, toy_dataset).sample_batch(7)
        b = GanTrainer(config, toy_dataset).sample_batch(7)
        assert [c.caption_id for c in a.captions] == [c.caption_id for c in b.captions]
        npt.assert_array_equal(a.images, b.images)
        assert a.embeddings is None and a.wrong is None


class TestTrainerSetup:
    def test_conditional_needs_embeddings(self, make_config, toy_dataset):
        with pytest.raises(ConfigError):
            GanTrainer(make_config(train__mode='conditional'), toy_dataset)

    def test_embedding_width_checked(self, make_config, toy_dataset, toy_embeddings):
        with pytest.raises(ConfigError):
            GanTrainer(make_config(encoder__embed_dim=16), toy_dataset, toy_embeddings)

    def test_artifacts_need_out_dir(self, config, toy_dataset):
        with pytest.raises(ContractError):
            GanTrainer(config, toy_dataset).run()


class TestTrainStep:
    def test_unconditional_step(self, trainer):
        bundle = trainer.train_step(trainer.sample_batch(1), 1)
        assert bundle.l_d_adv_wrong is None
        assert np.isfinite(bundle.l_d_total) and np.isfinite(bundle.l_g)
        assert trainer.discriminator.condition_calls == 0
        assert trainer.discriminator.decode_calls == 1
        assert trainer.state.iteration == 1 and len(trainer.state.loss_history) == 1

    def test_conditional_step(self, conditional):
        batch = conditional.sample_batch(1)
        assert batch.embeddings.shape == (4, 8)
        assert all(w.class_id != c.class_id for w, c in zip(batch.wrong, batch.captions))

        bundle = train_step_conditional(conditional, batch, 1)
        assert bundle.l_d_adv_wrong is not None
        # real, fake and wrong in the D step, fake again in the G step
        assert conditional.discriminator.condition_calls == 4
        assert conditional.discriminator.decode_calls == 1

    def test_step_kind_checked(self, trainer):
        with pytest.raises(ContractError):
            train_step_conditional(trainer, trainer.sample_batch(1), 1)

    def test_parameters_move(self, trainer):
        g_before, d_before = trainer.generator.digest(), trainer.discriminator.digest()
        trainer.train_step(trainer.sample_batch(1), 1)
        assert trainer.generator.digest() != g_before
        assert trainer.discriminator.digest() != d_before


class TestRun:
    def test_artifacts(self, trainer, tmp_path):
        result = trainer.run()
        names = {p.name for p in result.artifacts}
        assert {'ckpt_2.fgan', 'iter_2.png', 'iter_3.png', ArtifactNames.LOSS_CSV,
                ArtifactNames.FINAL_CHECKPOINT} <= names
        with open(tmp_path / ArtifactNames.LOSS_CSV, encoding='utf-8') as f:
            rows = list(csv.reader(f))
        assert rows[0] == ['iteration', 'l_d_total', 'l_g', 'l_percept']
        assert [r[0] for r in rows[1:]] == ['1', '2', '3']

    def test_same_seed_same_checkpoint(self, config, toy_dataset, tmp_path):
        train_loop(config, toy_dataset, None, tmp_path / 'a')
        train_loop(config, toy_dataset, None, tmp_path / 'b')
        final = ArtifactNames.FINAL_CHECKPOINT
        assert (tmp_path / 'a' / final).read_bytes() == (tmp_path / 'b' / final).read_bytes()

    def test_resume_matches_uninterrupted_run(self, config, toy_dataset, tmp_path):
        train_loop(config, toy_dataset, None, tmp_path / 'full')
        train_loop(config, toy_dataset, None, tmp_path / 'resumed', resume=tmp_path / 'full' / 'ckpt_2.fgan')
        final = ArtifactNames.FINAL_CHECKPOINT
        assert (tmp_path / 'full' / final).read_bytes() == (tmp_path / 'resumed' / final).read_bytes()

    def test_conditional_resume_matches(self, make_config, toy_dataset, toy_embeddings, tmp_path):
        config = make_config(train__mode='conditional')
        train_loop(config, toy_dataset, toy_embeddings, tmp_path / 'full')
        train_loop(config, toy_dataset, toy_embeddings, tmp_path / 'resumed',
                   resume=tmp_path / 'full' / 'ckpt_2.fgan')
        final = ArtifactNames.FINAL_CHECKPOINT
        assert (tmp_path / 'full' / final).read_bytes() == (tmp_path / 'resumed' / final).read_bytes()

    def test_numeric_failure_writes_diagnostics(self, trainer, tmp_path, monkeypatch):
        def explode(batch, rng):
            raise NumericError("l_d_total = nan")

        monkeypatch.setattr(trainer, 'discriminator_step', explode)
        with pytest.raises(TrainingAbortedError) as info:
            trainer.run()
        dump = json.loads((tmp_path / ArtifactNames.DIAGNOSTIC_DUMP).read_text(encoding='utf-8'))
        assert dump['iteration'] == 1
        assert info.value.dump_path == str(tmp_path / ArtifactNames.DIAGNOSTIC_DUMP)
        assert (tmp_path / ArtifactNames.DIAGNOSTIC_CHECKPOINT).exists()


class TestCheckpoint:
    def test_header_and_meta(self, trainer, config):
        trainer.train_step(trainer.sample_batch(1), 1)
        ckpt = read_checkpoint(trainer.save('one.fgan'))
        assert ckpt.config_digest == config.digest()
        assert ckpt.meta['iteration'] == 1 and ckpt.meta['has_ca'] is False
        assert 'opt_g/step' in ckpt.tensors and 'gen/to_rgb.weight' in ckpt.tensors

    def test_bad_magic(self, trainer, tmp_path):
        path = trainer.save('x.fgan')
        data = bytearray(path.read_bytes())
        data[:len(CHECKPOINT_MAGIC)] = b'NOTACKPT'
        path.write_bytes(bytes(data))
        with pytest.raises(IncompatibleCheckpointError):
            read_checkpoint(path)

    def test_truncated(self, trainer):
        path = trainer.save('x.fgan')
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(FormatError):
            read_checkpoint(path)

    def test_mode_mismatch_leaves_state_untouched(self, trainer, conditional):
        path = conditional.save('cond.fgan')
        before = trainer.generator.digest()
        with pytest.raises(IncompatibleCheckpointError):
            trainer.resume(path)
        assert trainer.generator.digest() == before
        assert trainer.state.iteration == 0

    def test_load_generator(self, trainer, config):
        trainer.train_step(trainer.sample_batch(1), 1)
        generator, ca_net, _ = load_generator(trainer.save('g.fgan'), config)
        assert ca_net is None
        assert generator.digest() == trainer.generator.digest()
        assert not generator.training

    def test_load_generator_with_ca(self, conditional, make_config):
        _, ca_net, _ = load_generator(conditional.save('c.fgan'), make_config(train__mode='conditional'))
        assert ca_net is not None and ca_net.digest() == conditional.ca_net.digest()


def test_loss_csv_blank_for_missing_values(tmp_path):
    path = write_loss_csv([{'iteration': 1, 'l_d_total': 1.0, 'l_g': None, 'l_percept': 0.5}], tmp_path / 'l.csv')
    assert path.read_text(encoding='utf-8').splitlines()[1] == '1,1.00000000,,0.50000000'
