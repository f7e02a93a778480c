"""Synthetic tasks with known answers, used for convergence smoke tests and demos."""
from __future__ import annotations

import numpy as np


def smooth_spectrogram(rng, n_mels=40, n_frames=64, tilt=3.0, wobble=0.05):
    """A smooth log-spectrum-like matrix: a linear spectral tilt plus slow 2-D ripple.

    The ripple stays below half the level step between neighbouring channels, so
    a channel's level (and hence its position) can be read off locally.
    """
    c = np.linspace(tilt, -tilt, n_mels)[:, None]
    t = np.arange(n_frames)[None, :]
    ch = np.arange(n_mels)[:, None]
    ripple = np.zeros((n_mels, n_frames))
    for _ in range(3):
        ft, fc = rng.uniform(0.02, 0.08), rng.uniform(0.02, 0.08)
        ripple += np.sin(2 * np.pi * (ft * t + fc * ch) + rng.uniform(0, 2 * np.pi))
    return c + wobble * ripple / 3.0


def band_pattern(n_mels=40, lo=0, hi=20, height=1.0, profile="ramp"):
    """Additive offset over channels [lo, hi), as a C x 1 column.

    ``profile="flat"`` raises the band by ``height``. ``profile="ramp"`` tapers
    linearly from ``height`` at channel ``lo`` to zero at ``hi``; on a tilted
    spectrum that is a piecewise-linear function of the level, which a
    ReLU convolutional generator can represent exactly.
    """
    if profile not in ("flat", "ramp"):
        raise ValueError(f"profile must be 'flat' or 'ramp', got {profile!r}")
    band = np.zeros((n_mels, 1))
    if profile == "flat":
        band[lo:hi] = height
    else:
        band[lo:hi, 0] = height * (hi - np.arange(lo, hi)) / (hi - lo)
    return band


def dcgan_toy_pairs(n_pairs, rng, n_mels=40, n_frames=48, band=None):
    """(control, target) pairs where target = control + a fixed band pattern.

    The default band is a ramp over the high-energy half of the channels, which
    a shift-invariant convolutional generator can locate from the level alone.
    """
    band = band_pattern(n_mels) if band is None else band
    pairs = []
    for _ in range(n_pairs):
        c = smooth_spectrogram(rng, n_mels, n_frames)
        pairs.append((c.astype(np.float32), (c + band).astype(np.float32)))
    return pairs


def random_orthonormal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))[None, :]


def sbg_toy_task(rng, n_mels=40, n_speakers=3, n_control=120, n_per_speaker=60,
                 offset_scale=0.8, lam=0.2, noise=0.02):
    """Control bases scattered around a shared matrix; speaker j's bases add a fixed
    offset whose entries are at most ``offset_scale * lam`` in magnitude.

    Returns (base, control list, {speaker: list}, {speaker: offset}).
    """
    base = random_orthonormal(rng, n_mels)
    offsets = {}
    for j in range(n_speakers):
        pattern = rng.choice([-1.0, 1.0], size=(n_mels, n_mels)) * rng.uniform(0.5, 1.0, (n_mels, n_mels))
        offsets[f"spk{j}"] = offset_scale * lam * pattern
    control = [base + noise * rng.standard_normal((n_mels, n_mels)) for _ in range(n_control)]
    targets = {spk: [base + off + noise * rng.standard_normal((n_mels, n_mels))
                     for _ in range(n_per_speaker)]
               for spk, off in offsets.items()}
    return base, control, targets, offsets
