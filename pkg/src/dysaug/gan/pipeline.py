"""Chained augmentation: speaker-level speed perturbation, then the spectral-basis
GAN, then the speed-trained convolutional GAN."""
from __future__ import annotations

from ..corpus import SpeakerStats, normalize_with
from ..signal import MelConfig, Waveform, mel_fbank, speed_perturb
from .dcgan import dcgan_generate
from .models import DcganModel, SbgModel
from .sbg import sbg_generate

SBG_SG_TAG = "SBG+SG"


def sbg_plus_sg(wave: Waveform, sbg_model: SbgModel, dcgan_model: DcganModel, sd_factor: float,
                target_speaker=None, mel_cfg: MelConfig | None = None,
                stats: SpeakerStats | None = None):
    """Return ``(spectrogram, provenance)`` for the SBG+SG chain.

    ``stats``, when given, normalises the spectral-basis output before it enters
    the convolutional generator (which is trained on normalised features).
    """
    speaker = target_speaker if target_speaker is not None else dcgan_model.target_speaker
    perturbed = speed_perturb(wave, sd_factor)
    spec = mel_fbank(perturbed, mel_cfg)
    spec = sbg_generate(sbg_model, spec, speaker)
    if stats is not None:
        spec = normalize_with(spec, stats)
    spec = dcgan_generate(dcgan_model, spec)
    provenance = [
        {"stage": "speed_perturb", "alpha": float(sd_factor)},
        {"stage": "sbg", "lambda": float(sbg_model.lam), "speaker": speaker},
        {"stage": "dcgan", "speaker": speaker},
    ]
    return spec, provenance
