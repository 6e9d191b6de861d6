from .vocabulary import Vocabulary, tokenize, pad_batch, PAD_ID, UNK_ID
from .encoder import (
    EncoderModel, TextEmbedding, encode_sentence, encode_texts, cosine_similarity, cosine_rows, siamese_pair_loss,
)
from .pairs import SentencePair, make_pairs, pearson, POSITIVE_RANGE, NEGATIVE_RANGE
from .training import (
    EncoderTrainResult, EpochMetrics, train_encoder, eval_pearson, save_encoder, load_encoder,
    export_embeddings, write_encoder_metrics, validation_pairs,
)

__all__ = [
    "Vocabulary", "tokenize", "pad_batch", "PAD_ID", "UNK_ID",
    "EncoderModel", "TextEmbedding", "encode_sentence", "encode_texts", "cosine_similarity", "cosine_rows",
    "siamese_pair_loss", "SentencePair", "make_pairs", "pearson", "POSITIVE_RANGE", "NEGATIVE_RANGE",
    "EncoderTrainResult", "EpochMetrics", "train_encoder", "eval_pearson", "save_encoder", "load_encoder",
    "export_embeddings", "write_encoder_metrics", "validation_pairs",
]
