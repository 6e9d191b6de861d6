import shutil

import numpy as np
import numpy.testing as npt
import pytest

from modules.data import (
    EmbeddingCache, ToySpec, caption_color, caption_match_rate, dominant_color, dominant_shape, load_dataset,
    make_toy_dataset, render_sample,
)
from modules.data.loader import CAPTION_STRIDE
from modules.data.toy import COLORS, split_assignment
from modules.enums import Split
from modules.errors import (
    CacheMissError, DataIntegrityError, DatasetFormatError, DimensionError, EncodingError, FormatError,
)


@pytest.fixture
def broken_root(toy_root, tmp_path):
    """Копия игрушечного датасета, которую тесты могут портить"""
    return shutil.copytree(toy_root, tmp_path / 'copy')


class TestToyGenerator:
    def test_same_seed_same_files(self, tmp_path):
        spec = ToySpec(seed=3, image_side=16, samples_per_class=2)
        make_toy_dataset(spec, tmp_path / 'a')
        make_toy_dataset(spec, tmp_path / 'b')
        for path in sorted((tmp_path / 'a' / 'images').iterdir()):
            assert path.read_bytes() == (tmp_path / 'b' / 'images' / path.name).read_bytes()
        assert (tmp_path / 'a' / 'split.tsv').read_text() == (tmp_path / 'b' / 'split.tsv').read_text()

    def test_summary_counts(self, tmp_path):
        summary = make_toy_dataset(ToySpec(seed=0, image_side=16, samples_per_class=2), tmp_path)
        assert summary.n_classes == 18
        assert summary.n_images == 36
        assert summary.n_captions == 3 * 36

    def test_captions_name_attributes(self):
        sample = render_sample(ToySpec(seed=1, image_side=16), class_id=4, index=0)
        assert len(sample.captions) == 3
        for caption in sample.captions:
            assert sample.shape in caption and sample.color in caption and sample.background in caption

    def test_class_ids_cover_shape_and_color(self):
        spec = ToySpec()
        assert spec.class_attributes(spec.class_id('segitiga', 'biru')) == ('segitiga', 'biru')
        assert spec.class_name(0) == 'lingkaran_merah'

    def test_split_is_per_class(self):
        splits = split_assignment(ToySpec(seed=0, samples_per_class=8), class_id=5)
        assert sum(s == Split.val for s in splits.values()) == 2
        assert len(splits) == 8

    @pytest.mark.parametrize("class_id", range(0, 18, 5))
    def test_oracle_reads_rendered_color(self, class_id):
        sample = render_sample(ToySpec(seed=2, image_side=32), class_id, index=1)
        assert dominant_color(sample.image) == sample.color

    @pytest.mark.parametrize("shape_index", range(3))
    def test_oracle_reads_rendered_shape(self, shape_index):
        spec = ToySpec(seed=2, image_side=64)
        sample = render_sample(spec, shape_index * len(COLORS), index=0)
        assert dominant_shape(sample.image) == sample.shape


class TestLoader:
    def test_records_and_captions(self, toy_dataset):
        assert len(toy_dataset) == 72
        assert len(toy_dataset.captions()) == 216
        assert len(toy_dataset.class_ids) == 18
        assert len(toy_dataset.split(Split.val)) == 18
        assert len(toy_dataset.split(Split.train)) == 54

    def test_caption_ids(self, toy_dataset):
        record = toy_dataset.records[5]
        assert [c.caption_id for c in record.captions] == [5 * CAPTION_STRIDE + i for i in range(3)]
        assert toy_dataset.caption(5 * CAPTION_STRIDE + 1).image_id == record.image_id

    def test_images_in_unit_range(self, toy_dataset):
        batch = toy_dataset.images(toy_dataset.records[:3])
        assert batch.shape == (3, 3, 32, 32)
        assert batch.dtype == np.float32
        assert batch.min() >= -1.0 and batch.max() <= 1.0

    def test_resized_on_load(self, toy_root):
        dataset = load_dataset(toy_root, 'toy', 16)
        assert dataset.images(dataset.records[:1]).shape == (1, 3, 16, 16)

    def test_digest_is_stable(self, toy_root, toy_dataset):
        assert load_dataset(toy_root, 'toy', 32).digest() == toy_dataset.digest()

    def test_missing_captions_reported_with_ids(self, broken_root):
        (broken_root / 'captions' / '00_0001.txt').unlink()
        with pytest.raises(DataIntegrityError) as info:
            load_dataset(broken_root, 'toy', 32)
        assert info.value.ids == ['00_0001']

    def test_missing_image_reported(self, broken_root):
        next((broken_root / 'images').glob('03_0000.*')).unlink()
        with pytest.raises(DataIntegrityError) as info:
            load_dataset(broken_root, 'toy', 32)
        assert '03_0000' in info.value.ids

    def test_cub_needs_ten_captions(self, toy_root):
        with pytest.raises(DataIntegrityError):
            load_dataset(toy_root, 'cub', 32)

    def test_unknown_split(self, broken_root):
        path = broken_root / 'split.tsv'
        path.write_text(path.read_text().replace('\ttrain', '\tholdout', 1))
        with pytest.raises(DatasetFormatError):
            load_dataset(broken_root, 'toy', 32)

    def test_non_utf8_caption(self, broken_root):
        (broken_root / 'captions' / '00_0000.txt').write_bytes(b'sebuah \xff\xfe lingkaran\n')
        with pytest.raises(EncodingError):
            load_dataset(broken_root, 'toy', 32)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DatasetFormatError):
            load_dataset(tmp_path, 'toy', 32)


class TestEmbeddingCache:
    def _cache(self, n=3, dim=4):
        cache = EmbeddingCache(dim)
        for i in range(n):
            cache.add(i * CAPTION_STRIDE, np.full(dim, i, dtype=np.float32))
        return cache

    def test_file_size(self, tmp_path):
        path = self._cache().write(tmp_path / 'e.embc')
        assert path.stat().st_size == 18 + 3 * (8 + 4 * 4)

    def test_read_back(self, tmp_path):
        cache = self._cache()
        loaded = EmbeddingCache.read(cache.write(tmp_path / 'e.embc'))
        assert loaded.ids() == cache.ids()
        npt.assert_array_equal(loaded.matrix([200, 0]), [[2] * 4, [0] * 4])

    def test_empty_cache(self):
        loaded = EmbeddingCache.from_bytes(EmbeddingCache(5).to_bytes())
        assert len(loaded) == 0 and loaded.dim == 5

    def test_miss(self):
        with pytest.raises(CacheMissError):
            self._cache().get(7)

    def test_duplicate_id(self):
        cache = self._cache()
        with pytest.raises(FormatError):
            cache.add(0, np.zeros(4))

    def test_wrong_length_vector(self):
        with pytest.raises(FormatError):
            self._cache().add(99, np.zeros(3))

    def test_bad_magic(self):
        data = bytearray(self._cache().to_bytes())
        data[:4] = b'XXXX'
        with pytest.raises(FormatError):
            EmbeddingCache.from_bytes(bytes(data))

    def test_truncated(self):
        with pytest.raises(FormatError):
            EmbeddingCache.from_bytes(self._cache().to_bytes()[:-1])


class TestOracle:
    def test_caption_color(self):
        assert caption_color("sebuah persegi Biru di atas latar ungu") == 'biru'
        assert caption_color("latar ungu saja") is None

    def test_match_rate(self):
        red = np.zeros((8, 8, 3), dtype=np.uint8)
        red[...] = COLORS['merah']
        assert caption_match_rate([red, red], ["lingkaran merah", "persegi hijau"]) == 0.5

    def test_match_rate_needs_equal_lengths(self):
        with pytest.raises(DimensionError):
            caption_match_rate([np.zeros((2, 2, 3), dtype=np.uint8)], [])

    def test_background_only_has_no_color(self):
        gray = np.full((4, 4, 3), 128, dtype=np.uint8)
        assert dominant_color(gray) is None
