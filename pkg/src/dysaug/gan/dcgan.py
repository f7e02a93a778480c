"""Training and generation for the parallel-data convolutional GAN."""
from __future__ import annotations

import numpy as np

from ..errors import EmptyTrainingSet, ShapeMismatch, UnalignedPair
from ..nn import Optimizer, Tensor, TrainSchedule
from ..signal import Spectrogram
from .losses import dcgan_discriminator_loss, dcgan_generator_loss
from .models import DEFAULT_WINDOW, DcganModel
from .report import GanTrainReport


def _as_matrix(x):
    return np.asarray(x.values if isinstance(x, Spectrogram) else x, dtype=np.float32)


def _fit_window(mat, window):
    # replicate the last frame when an utterance is shorter than the window
    T = mat.shape[1]
    if T >= window:
        return mat
    return np.pad(mat, ((0, 0), (0, window - T)), mode="edge")


def crop_batch(pairs, idx, window, rng):
    """Stack jointly cropped (control, target) windows of ``window`` frames, NCHW."""
    xs, ys = [], []
    for i in idx:
        c, t = pairs[i]
        T = c.shape[1]
        start = int(rng.integers(0, T - window + 1))
        xs.append(c[None, :, start:start + window])
        ys.append(t[None, :, start:start + window])
    return np.stack(xs), np.stack(ys)


def _prepare_pairs(pairs, window):
    pairs = [(_as_matrix(c), _as_matrix(t)) for c, t in pairs]
    if not pairs:
        raise EmptyTrainingSet("no training pairs")
    n_mels = pairs[0][0].shape[0]
    out = []
    for k, (c, t) in enumerate(pairs):
        if c.shape != t.shape:
            raise UnalignedPair(f"pair {k}: control {c.shape} vs target {t.shape}")
        if c.shape[0] != n_mels:
            raise ShapeMismatch(f"pair {k}: {c.shape[0]} channels, expected {n_mels}")
        out.append((_fit_window(c, window), _fit_window(t, window)))
    return out, n_mels


def train_dcgan(pairs, schedule: TrainSchedule | None = None, window=DEFAULT_WINDOW,
                target_speaker="", non_saturating=True, model: DcganModel | None = None,
                generator_init="normal", ema_decay=0.0):
    """Train one speaker's GAN on frame-aligned (control, target) feature pairs.

    Each iteration draws ``schedule.batch_size`` pairs, crops the same random
    ``window``-frame span from both sides, takes one discriminator step on
    targets vs. generated controls, then one generator step. ``generator_init``
    is passed to :meth:`DcganModel.init` when no ``model`` is given.

    With ``ema_decay > 0`` the returned generator holds an exponential moving
    average of the generator weights (updated after every step) rather than the
    last iterate, which damps the oscillation of adversarial training.
    """
    if not 0.0 <= ema_decay < 1.0:
        raise ValueError("ema_decay must lie in [0, 1)")
    schedule = schedule or TrainSchedule()
    pairs, n_mels = _prepare_pairs(pairs, window)
    if model is None:
        model = DcganModel.init(n_mels, window, target_speaker, seed=schedule.seed,
                               generator_init=generator_init)
    G, D = model.generator, model.discriminator
    g_opt = Optimizer(G.parameters(), schedule)
    d_opt = Optimizer(D.parameters(), schedule)
    rng = np.random.default_rng([schedule.seed, 1])
    report = GanTrainReport()
    B = min(schedule.batch_size, len(pairs))
    shadow = [p.data.copy() for p in G.parameters()] if ema_decay else None

    for it in range(schedule.max_iters):
        idx = rng.choice(len(pairs), size=B, replace=len(pairs) < B)
        xc, xt = crop_batch(pairs, idx, window, rng)

        fake = G(Tensor(xc)).detach()
        real_logits = D.logits(Tensor(xt))
        fake_logits = D.logits(fake)
        d_loss = dcgan_discriminator_loss(real_logits, fake_logits)
        D.zero_grad()
        d_loss.backward()
        lr = d_opt.step(it)
        d_acc = 0.5 * (np.mean(real_logits.data > 0) + np.mean(fake_logits.data < 0))

        G.zero_grad()
        g_loss = dcgan_generator_loss(D.logits(G(Tensor(xc))), non_saturating)
        g_loss.backward()
        g_opt.step(it)
        D.zero_grad()
        if shadow is not None:
            for avg, p in zip(shadow, G.parameters()):
                avg *= ema_decay
                avg += (1.0 - ema_decay) * p.data

        report.record(lr, d_loss.item(), g_loss.item(), d_acc)
    if shadow is not None:
        for avg, p in zip(shadow, G.parameters()):
            p.data[...] = avg
        model.meta["generator_ema"] = float(ema_decay)
    model.target_speaker = target_speaker or model.target_speaker
    return model, report


def discriminator_accuracy(model: DcganModel, pairs, seed=0) -> float:
    """Accuracy of D on one window per pair: targets as real, generated controls as fake."""
    pairs, _ = _prepare_pairs(pairs, model.window)
    rng = np.random.default_rng(seed)
    xc, xt = crop_batch(pairs, range(len(pairs)), model.window, rng)
    real = model.discriminator.logits(Tensor(xt)).data
    fake = model.discriminator.logits(model.generator(Tensor(xc))).data
    return float(0.5 * (np.mean(real > 0) + np.mean(fake < 0)))


def dcgan_generate(model: DcganModel, spec) -> Spectrogram:
    """Run the generator over a whole utterance; the output keeps the input's C x T shape."""
    mat = _as_matrix(spec)
    if mat.ndim != 2 or mat.shape[0] != model.n_mels:
        raise ShapeMismatch(f"model expects {model.n_mels} channels, got {mat.shape}")
    out = model.generator(Tensor(mat[None, None])).data[0, 0].astype(np.float64)
    if isinstance(spec, Spectrogram):
        return spec.with_values(out)
    return Spectrogram(out)
