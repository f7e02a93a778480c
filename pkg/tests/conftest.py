import json
import math
import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from dysaug.signal import Waveform, write_wav

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tone(freq, seconds, sr=16000, amp=0.3, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return Waveform(amp * np.sin(2 * np.pi * freq * t + phase), sr)


def voiced(rng, seconds, sr=16000, f0=140.0):
    """A crude voiced-speech stand-in: harmonics of f0 with a decaying envelope plus noise."""
    n = int(round(seconds * sr))
    t = np.arange(n) / sr
    x = sum(np.sin(2 * np.pi * k * f0 * t + rng.uniform(0, 6.28)) / k for k in range(1, 12))
    x = x * (0.6 + 0.4 * np.sin(2 * np.pi * 3.0 * t)) + 0.01 * rng.standard_normal(n)
    return Waveform(0.2 * x / np.max(np.abs(x)), sr)


def build_corpus(root: Path, rng, n_control=3, speakers=("F01", "M02"), n_target=2,
                 words=("w1", "w2", "w3"), slowdown=None):
    """Write a tiny WAV corpus, its manifest and phone alignments under ``root``.

    Control utterances last 0.30 s; target speaker ``j`` is slower by
    ``slowdown[j]`` (default 1.5 and 2.0), in audio and in the alignments.
    """
    root.mkdir(parents=True, exist_ok=True)
    slowdown = slowdown or {s: 1.5 + 0.5 * i for i, s in enumerate(speakers)}
    manifest, ali = [], []

    def add(uid, spk, group, seconds, word):
        wave = voiced(rng, seconds, f0=120.0 + 10 * len(manifest))
        write_wav(root / f"{uid}.wav", wave)
        manifest.append({"id": uid, "speaker": spk, "group": group, "path": f"{uid}.wav",
                         "duration": len(wave) / wave.sample_rate, "word": word})
        # sil, three phones, sil; phones scale with the speaking rate
        phone = 0.06 * seconds / 0.30
        t = 0.02
        ali.append(f"{uid} sil 0.0 {t:.6f}")
        for p in ("a", "b", "c"):
            ali.append(f"{uid} {p} {t:.6f} {t + phone:.6f}")
            t += phone
        ali.append(f"{uid} sil {t:.6f} {t + 0.01:.6f}")

    for i in range(n_control):
        add(f"C{i:02d}", f"CS{i % 2}", "control", 0.30, words[i % len(words)])
    for spk in speakers:
        for i in range(n_target):
            add(f"{spk}_{i:02d}", spk, "target", 0.30 * slowdown[spk], words[i % len(words)])
    (root / "manifest.jsonl").write_text("".join(json.dumps(r) + "\n" for r in manifest))
    (root / "align.txt").write_text("\n".join(ali) + "\n")
    return root / "manifest.jsonl", root / "align.txt", slowdown


# scalar-loop loss oracles, independent of the batched tensor code
def lsig(z):
    """log(sigmoid(z)) for one float."""
    return -math.log1p(math.exp(-z)) if z >= 0 else z - math.log1p(math.exp(z))


def loop_dcgan_value(real, fake):
    a = sum(lsig(z) for z in np.ravel(real)) / np.size(real)
    b = sum(lsig(-z) for z in np.ravel(fake)) / np.size(fake)
    return a + b


def loop_speaker_ll(logits, onehot):
    total = 0.0
    for row, y in zip(logits, onehot):
        total += sum(yk * lsig(z) + (1 - yk) * lsig(-z) for z, yk in zip(row, y))
    return total / len(logits)


def loop_sbg_losses(real_c, fake_c, real_s, fake_s, onehot, non_saturating=False):
    """(discriminator loss, generator loss) by explicit loops."""
    l_sid = loop_speaker_ll(real_s, onehot) + loop_speaker_ll(fake_s, onehot)
    d = -(l_sid + loop_dcgan_value(real_c, fake_c))
    B = len(fake_c)
    if non_saturating:
        g = -loop_speaker_ll(fake_s, onehot) - sum(lsig(z) for z in np.ravel(fake_c)) / B
    else:
        g = -loop_speaker_ll(fake_s, onehot) + sum(lsig(-z) for z in np.ravel(fake_c)) / B
    return d, g
