"""Speaker-dependent data augmentation for atypical speech.

Signal-level tempo and speed perturbation, spectral-basis decomposition of
log-Mel features, corpus bookkeeping and binary feature archives, a small
autodiff engine, and two GAN-based feature transforms.
"""
from .errors import DysaugError
from .signal import (
    SI_FACTORS,
    MelConfig,
    Spectrogram,
    Waveform,
    WsolaConfig,
    mel_fbank,
    read_wav,
    speed_perturb,
    tempo_perturb,
    write_wav,
)
from .subspace import apply_perturbation, recompose, svd_decompose

__version__ = "0.1.0"

__all__ = [
    "DysaugError", "MelConfig", "SI_FACTORS", "Spectrogram", "Waveform", "WsolaConfig",
    "apply_perturbation", "mel_fbank", "read_wav", "recompose", "speed_perturb",
    "svd_decompose", "tempo_perturb", "write_wav", "__version__",
]
