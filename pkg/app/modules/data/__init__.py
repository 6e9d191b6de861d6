from .toy import ToySpec, ToySample, make_toy_dataset, render_sample, rasterize
from .loader import CaptionDataset, CaptionRecord, ImageRecord, load_dataset
from .embedding_cache import EmbeddingCache
from .oracle import dominant_color, dominant_shape, caption_color, caption_match_rate

__all__ = [
    "ToySpec", "ToySample", "make_toy_dataset", "render_sample", "rasterize",
    "CaptionDataset", "CaptionRecord", "ImageRecord", "load_dataset",
    "EmbeddingCache",
    "dominant_color", "dominant_shape", "caption_color", "caption_match_rate",
]
