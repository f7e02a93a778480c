"""Adversarial augmentation models: a convolutional GAN for parallel data and a
spectral-basis GAN with a speaker-classification head for non-parallel data."""
from .dcgan import dcgan_generate, discriminator_accuracy, train_dcgan
from .models import (
    DcganModel,
    SbgModel,
    dcgan_discriminator_specs,
    dcgan_flat_dim,
    dcgan_generator_specs,
    identity_dcgan,
    identity_sbg,
)
from .pipeline import SBG_SG_TAG, sbg_plus_sg
from .report import GanTrainReport
from .sbg import generator_delta, perturb_bases, sbg_generate, speaker_accuracy, train_sbg

__all__ = [
    "DcganModel", "GanTrainReport", "SBG_SG_TAG", "SbgModel", "dcgan_discriminator_specs",
    "dcgan_flat_dim", "dcgan_generate", "dcgan_generator_specs", "discriminator_accuracy",
    "generator_delta", "identity_dcgan", "identity_sbg", "perturb_bases", "sbg_generate",
    "sbg_plus_sg", "speaker_accuracy", "train_dcgan", "train_sbg",
]
