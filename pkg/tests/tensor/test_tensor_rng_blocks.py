import io
import json

import numpy as np
import numpy.testing as npt
import pytest

from modules.errors import FormatError
from modules.tensor import Rng, TENSOR_MAGIC, load_tensor_blocks, read_tensor_blocks, save_tensor_blocks, \
    write_tensor_blocks


class TestRng:
    def test_same_key_same_stream(self):
        npt.assert_array_equal(Rng(7, (1, 2)).normal((5,)), Rng(7, (1, 2)).normal((5,)))

    def test_streams_differ(self):
        assert not np.array_equal(Rng(7, (1, 2)).normal((5,)), Rng(7, (1, 3)).normal((5,)))
        assert not np.array_equal(Rng(7).normal((5,)), Rng(8).normal((5,)))

    def test_child_ignores_sibling_consumption(self):
        root = Rng(3, (20,))
        expected = root.child(4).normal((3,))
        root.normal((100,))
        root.child(5).normal((10,))
        npt.assert_array_equal(root.child(4).normal((3,)), expected)

    def test_state_resumes_stream(self):
        rng = Rng(11, (2,))
        rng.normal((17,))
        state = json.loads(json.dumps(rng.get_state()))
        expected = rng.uniform(0, 1, (4,))
        npt.assert_array_equal(Rng.from_state(state).uniform(0, 1, (4,)), expected)

    def test_normal_dtype(self):
        assert Rng(0).normal((2,)).dtype == np.float32
        assert Rng(0).normal((2,), dtype=np.float64).dtype == np.float64


class TestTensorBlocks:
    def test_round_trip(self, tmp_path):
        tensors = {'w': np.arange(6, dtype=np.float32).reshape(2, 3), 'step': np.array(5.0, dtype=np.float32)}
        save_tensor_blocks(tmp_path / 'a.fgt', tensors)
        loaded = load_tensor_blocks(tmp_path / 'a.fgt')
        assert list(loaded) == ['w', 'step']
        npt.assert_array_equal(loaded['w'], tensors['w'])
        assert loaded['step'].shape == ()

    def test_layout(self):
        buffer = io.BytesIO()
        write_tensor_blocks(buffer, {'ab': np.zeros((2,), dtype=np.float32)})
        raw = buffer.getvalue()
        assert raw[:4] == TENSOR_MAGIC
        # magic + name length + name + rank + one dim + two floats
        assert len(raw) == 4 + 4 + 2 + 4 + 8 + 8

    def test_wrong_magic(self):
        with pytest.raises(FormatError):
            read_tensor_blocks(io.BytesIO(b'NOPE'))

    def test_truncated(self):
        buffer = io.BytesIO()
        write_tensor_blocks(buffer, {'w': np.ones((4,), dtype=np.float32)})
        with pytest.raises(FormatError):
            read_tensor_blocks(io.BytesIO(buffer.getvalue()[:-3]))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError):
            load_tensor_blocks(tmp_path / 'absent.fgt')
