from .conditioning import CaNet, CaOutput, LatentCode, ca_forward, build_latent
from .generator import Generator, SleBlock, UpBlock, g_forward, skip_excitation, resolution_chain, channel_schedule
from .discriminator import (
    Discriminator, CropSpec, d_encode, d_condition, d_decode, crop_spec, apply_crop, random_crop_pair, decoder_size,
)
from .objectives import (
    LossBundle, PerceptualMetric, perceptual_loss, hinge_real, hinge_fake, d_hinge_loss, g_loss,
)
from .augment import AugmentParams, augment_batch, sample_params, apply_augment
from .checkpoint import (
    TrainState, CheckpointData, save_checkpoint, read_checkpoint, load_checkpoint, checkpoint_bytes, load_generator,
)
from .sampling import synthesize, write_grid, eval_mode
from .trainer import (
    GanTrainer, Batch, TrainResult, sample_caption, sample_wrong, train_step_unconditional,
    train_step_conditional, train_loop, write_loss_csv, GAN_STREAM,
)

__all__ = [
    "CaNet", "CaOutput", "LatentCode", "ca_forward", "build_latent",
    "Generator", "SleBlock", "UpBlock", "g_forward", "skip_excitation", "resolution_chain", "channel_schedule",
    "Discriminator", "CropSpec", "d_encode", "d_condition", "d_decode", "crop_spec", "apply_crop",
    "random_crop_pair", "decoder_size",
    "LossBundle", "PerceptualMetric", "perceptual_loss", "hinge_real", "hinge_fake", "d_hinge_loss", "g_loss",
    "AugmentParams", "augment_batch", "sample_params", "apply_augment",
    "TrainState", "CheckpointData", "save_checkpoint", "read_checkpoint", "load_checkpoint", "checkpoint_bytes",
    "load_generator",
    "synthesize", "write_grid", "eval_mode",
    "GanTrainer", "Batch", "TrainResult", "sample_caption", "sample_wrong", "train_step_unconditional",
    "train_step_conditional", "train_loop", "write_loss_csv", "GAN_STREAM",
]
