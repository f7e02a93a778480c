"""Training and generation for the spectral-basis GAN (non-parallel data)."""
from __future__ import annotations

import numpy as np

from ..corpus import MEAN_BASES, PairManifest
from ..errors import EmptyTrainingSet, ShapeMismatch, UnknownSpeakerInPairing
from ..nn import Optimizer, Tensor, TrainSchedule
from ..nn.tensor import add, mul
from ..signal import Spectrogram
from ..subspace import apply_perturbation, mean_bases, recompose, svd_decompose
from .losses import sbg_discriminator_loss, sbg_generator_loss
from .models import SbgModel
from .report import GanTrainReport


def _resolve_pairs(control_bases, target_bases_by_speaker, pairings, speakers):
    if isinstance(pairings, PairManifest):
        pairings = [pairings]
    means = {}
    rows = []  # (control matrix, target matrix, speaker index)
    for manifest in pairings:
        if manifest.strategy not in ("rand", "avg", "exhaustive"):
            raise ValueError(f"pairing strategy {manifest.strategy!r} is not for non-parallel data")
        for src, ref in manifest.pairs:
            if src not in control_bases:
                raise UnknownSpeakerInPairing(f"control utterance {src!r} has no bases")
            spk = manifest.target_speaker
            if spk is None:
                owners = [s for s, utts in target_bases_by_speaker.items() if ref in utts]
                if len(owners) != 1:
                    raise UnknownSpeakerInPairing(f"cannot attribute {ref!r} to one target speaker")
                spk = owners[0]
            if spk not in target_bases_by_speaker:
                raise UnknownSpeakerInPairing(f"unknown target speaker {spk!r}")
            if ref == MEAN_BASES:
                if spk not in means:
                    means[spk] = mean_bases(list(target_bases_by_speaker[spk].values()))
                target = means[spk]
            elif ref in target_bases_by_speaker[spk]:
                target = target_bases_by_speaker[spk][ref]
            else:
                raise UnknownSpeakerInPairing(f"{ref!r} is not an utterance of speaker {spk!r}")
            rows.append((control_bases[src], target, speakers.index(spk)))
    if not rows:
        raise EmptyTrainingSet("pairing produced no training pairs")
    return rows


def train_sbg(control_bases, target_bases_by_speaker, pairings, lam=0.2,
              schedule: TrainSchedule | None = None, non_saturating=False):
    """Train a spectral-basis GAN covering every speaker in ``target_bases_by_speaker``.

    ``control_bases`` maps utterance id -> C x C spectral bases of control speech,
    ``target_bases_by_speaker`` maps speaker -> {utterance id -> bases}, and
    ``pairings`` is one :class:`PairManifest` (or a list, one per speaker). The
    synthesised bases are ``U_C + lam * G([U_C, onehot(speaker)])``.
    """
    schedule = schedule or TrainSchedule()
    speakers = sorted(target_bases_by_speaker)
    rows = _resolve_pairs(control_bases, target_bases_by_speaker, pairings, speakers)
    C = rows[0][0].shape[0]
    for uc, ut, _ in rows:
        if uc.shape != (C, C) or ut.shape != (C, C):
            raise ShapeMismatch(f"bases must all be {C}x{C}, got {uc.shape} and {ut.shape}")
    xc_all = np.stack([r[0].reshape(-1) for r in rows]).astype(np.float32)
    xt_all = np.stack([r[1].reshape(-1) for r in rows]).astype(np.float32)
    spk_all = np.array([r[2] for r in rows])

    model = SbgModel.init(C, speakers, lam, seed=schedule.seed)
    g_opt = Optimizer(model.generator.parameters(), schedule)
    d_opt = Optimizer(model.discriminator_parameters(), schedule)
    rng = np.random.default_rng([schedule.seed, 2])
    report = GanTrainReport()
    B = min(schedule.batch_size, len(rows))
    lam32 = np.float32(lam)

    for it in range(schedule.max_iters):
        idx = rng.choice(len(rows), size=B, replace=len(rows) < B)
        xc, xt = xc_all[idx], xt_all[idx]
        onehot = model.onehot(spk_all[idx])
        g_in = np.concatenate([xc, onehot], axis=1)

        fake = Tensor(xc + lam32 * model.generator(Tensor(g_in)).data)
        h_real, h_fake = model.trunk(Tensor(xt)), model.trunk(fake)
        real_cond, fake_cond = model.cond_head.logits(h_real), model.cond_head.logits(h_fake)
        real_sid, fake_sid = model.sid_head.logits(h_real), model.sid_head.logits(h_fake)
        d_loss = sbg_discriminator_loss(real_cond, fake_cond, real_sid, fake_sid, onehot, onehot)
        model.zero_discriminator_grads()
        d_loss.backward()
        lr = d_opt.step(it)
        d_acc = 0.5 * (np.mean(real_cond.data > 0) + np.mean(fake_cond.data < 0))
        sid_acc = np.mean(np.argmax(real_sid.data, axis=1) == spk_all[idx])

        model.generator.zero_grad()
        delta = model.generator(Tensor(g_in))
        fake = add(Tensor(xc), mul(delta, lam32))
        h_fake = model.trunk(fake)
        g_loss = sbg_generator_loss(model.cond_head.logits(h_fake), model.sid_head.logits(h_fake),
                                    onehot, non_saturating)
        g_loss.backward()
        g_opt.step(it)
        model.zero_discriminator_grads()

        report.record(lr, d_loss.item(), g_loss.item(), d_acc, sid_acc)
    return model, report


def generator_delta(model: SbgModel, U, speaker) -> np.ndarray:
    """Raw generator output in [-1, 1] for one C x C basis matrix, as float64."""
    U = np.asarray(U)
    C = model.n_mels
    if U.shape != (C, C):
        raise ShapeMismatch(f"model expects {C}x{C} bases, got {U.shape}")
    onehot = model.onehot([model.speaker_index(speaker)])
    g_in = np.concatenate([U.reshape(1, -1).astype(np.float32), onehot], axis=1)
    out = model.generator(Tensor(g_in)).data.reshape(C, C).astype(np.float64)
    return np.clip(out, -1.0, 1.0)


def speaker_accuracy(model: SbgModel, bases, labels) -> float:
    """Fraction of basis matrices whose speaker-head argmax matches the label."""
    x = np.stack([np.asarray(b).reshape(-1) for b in bases]).astype(np.float32)
    logits = model.sid_head.logits(model.trunk(Tensor(x))).data
    want = np.array([model.speaker_index(s) for s in labels])
    return float(np.mean(np.argmax(logits, axis=1) == want))


def perturb_bases(model: SbgModel, U, speaker, lam=None) -> np.ndarray:
    lam = model.lam if lam is None else lam
    return apply_perturbation(U, generator_delta(model, U, speaker), lam)


def sbg_generate(model: SbgModel, spec, target_speaker, lam=None) -> Spectrogram:
    """Decompose, perturb the spectral bases towards ``target_speaker``, recompose.

    Singular values and temporal bases are reused untouched, so duration is kept.
    """
    values = spec.values if isinstance(spec, Spectrogram) else spec
    triple = svd_decompose(values)
    if triple.shape[0] != model.n_mels:
        raise ShapeMismatch(f"model expects {model.n_mels} channels, got {triple.shape[0]}")
    U_new = perturb_bases(model, triple.U, target_speaker, lam)
    out = recompose(U_new, triple.sigma, triple.Vt, triple.shape)
    if isinstance(spec, Spectrogram):
        return spec.with_values(out.values)
    return out
