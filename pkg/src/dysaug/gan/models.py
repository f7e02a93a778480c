"""Architectures of the convolutional (parallel-data) GAN and the spectral-basis GAN."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch, UnknownSpeakerInPairing
from ..nn import (
    Sequential,
    act_spec,
    conv_spec,
    fc_spec,
    load_checkpoint,
    pad_spec,
    save_checkpoint,
)

LEAKY_SLOPE = 0.2
DEFAULT_WINDOW = 96
GENERATOR_INITS = ("normal", "identity")
SBG_HIDDEN = (512, 512)
SBG_TRUNK = (256, 512, 256)


def dcgan_generator_specs():
    """Four 3x3/stride-1 convs (8, 8, 8, 1 kernels), ReLU after the first three,
    replicate padding so every layer keeps the input's height and width."""
    specs = []
    chans = [1, 8, 8, 8, 1]
    for i in range(4):
        specs.append(pad_spec(1, 1, 1, 1))
        specs.append(conv_spec(chans[i], chans[i + 1], (3, 3), (1, 1)))
        if i < 3:
            specs.append(act_spec("relu"))
    return specs


def dcgan_flat_dim(n_mels: int, window: int) -> int:
    h, w = n_mels, window
    for _ in range(4):
        h, w = (h - 2) // 2 + 1, (w - 2) // 2 + 1
    if h < 1 or w < 1:
        raise ShapeMismatch(f"a {n_mels}x{window} input does not survive four 2x2/stride-2 convs")
    return 64 * h * w


def dcgan_discriminator_specs(n_mels: int, window: int):
    """Four 2x2/stride-2 convs (8, 16, 32, 64 kernels), flatten, one fc unit, sigmoid."""
    specs = []
    chans = [1, 8, 16, 32, 64]
    for i in range(4):
        specs.append(conv_spec(chans[i], chans[i + 1], (2, 2), (2, 2)))
        specs.append(act_spec("leaky_relu", LEAKY_SLOPE))
    specs += [act_spec("flatten"), fc_spec(dcgan_flat_dim(n_mels, window), 1), act_spec("sigmoid")]
    return specs


@dataclass
class DcganModel:
    generator: Sequential
    discriminator: Sequential
    target_speaker: str = ""
    n_mels: int = 40
    window: int = DEFAULT_WINDOW
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(cls, n_mels=40, window=DEFAULT_WINDOW, target_speaker="", seed=0,
             generator_init="normal"):
        """Fresh model. ``generator_init="identity"`` overlays an exact pass-through
        path on the random weights so training starts from G(x) ~= x."""
        if generator_init not in GENERATOR_INITS:
            raise ValueError(f"generator_init must be one of {GENERATOR_INITS}")
        rng = np.random.default_rng(seed)
        g = Sequential.build(dcgan_generator_specs(), rng)
        d = Sequential.build(dcgan_discriminator_specs(n_mels, window), rng)
        if generator_init == "identity":
            _overlay_identity(g, clear=False)
        return cls(g, d, target_speaker, n_mels, window)

    def save(self, path):
        meta = dict(self.meta, model="dcgan", target_speaker=self.target_speaker,
                    n_mels=self.n_mels, window=self.window)
        save_checkpoint(path, {"generator": self.generator, "discriminator": self.discriminator},
                        meta)

    @classmethod
    def load(cls, path):
        groups, meta = load_checkpoint(path)
        if meta.get("model") != "dcgan":
            raise ValueError(f"{path} is not a dcgan checkpoint (model={meta.get('model')!r})")
        extra = {k: v for k, v in meta.items()
                 if k not in ("model", "target_speaker", "n_mels", "window", "groups")}
        return cls(groups["generator"], groups["discriminator"], meta["target_speaker"],
                   meta["n_mels"], meta["window"], extra)


def identity_dcgan(n_mels=40, window=DEFAULT_WINDOW, target_speaker="", seed=0) -> DcganModel:
    """A DCGAN whose generator passes its input through unchanged.

    Channel 0 carries relu(x), channel 1 carries relu(-x), and the last conv
    returns their difference. Useful as a pipeline fixture.
    """
    model = DcganModel.init(n_mels, window, target_speaker, seed)
    _overlay_identity(model.generator, clear=True)
    return model


def _overlay_identity(generator, clear):
    convs = [layer for layer in generator.layers if layer.spec.kind == "conv2d"]
    for i, layer in enumerate(convs):
        w, b = layer.params
        if clear:
            w.data[...] = 0.0
            b.data[...] = 0.0
        # keep the two pass-through channels free of cross-talk from the others
        if i < 3:
            w.data[:2] = 0.0
            b.data[:2] = 0.0
        if i > 0:
            w.data[:, :2] = 0.0
        if i == 0:
            w.data[0, 0, 1, 1] = 1.0
            w.data[1, 0, 1, 1] = -1.0
        elif i < 3:
            w.data[0, 0, 1, 1] = 1.0
            w.data[1, 1, 1, 1] = 1.0
        else:
            w.data[0, 0, 1, 1] = 1.0
            w.data[0, 1, 1, 1] = -1.0


def sbg_generator_specs(n_mels: int, n_speakers: int):
    """fc 512 -> 512 -> C*C; LeakyReLU(0.2) after the first two, tanh on the output.
    Input is the flattened C x C bases followed by the speaker one-hot."""
    d_in = n_mels * n_mels + n_speakers
    h1, h2 = SBG_HIDDEN
    return [fc_spec(d_in, h1), act_spec("leaky_relu", LEAKY_SLOPE),
            fc_spec(h1, h2), act_spec("leaky_relu", LEAKY_SLOPE),
            fc_spec(h2, n_mels * n_mels), act_spec("tanh")]


def sbg_trunk_specs(n_mels: int):
    specs, d = [], n_mels * n_mels
    for width in SBG_TRUNK:
        specs += [fc_spec(d, width), act_spec("leaky_relu", LEAKY_SLOPE)]
        d = width
    return specs


def sbg_head_specs(n_out: int):
    return [fc_spec(SBG_TRUNK[-1], n_out), act_spec("sigmoid")]


@dataclass
class SbgModel:
    generator: Sequential
    trunk: Sequential
    cond_head: Sequential   # P(condition = impaired/elderly)
    sid_head: Sequential    # per-speaker sigmoid
    speakers: list
    n_mels: int = 40
    lam: float = 0.2
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(cls, n_mels, speakers, lam=0.2, seed=0):
        speakers = list(speakers)
        rng = np.random.default_rng(seed)
        return cls(Sequential.build(sbg_generator_specs(n_mels, len(speakers)), rng),
                   Sequential.build(sbg_trunk_specs(n_mels), rng),
                   Sequential.build(sbg_head_specs(1), rng),
                   Sequential.build(sbg_head_specs(len(speakers)), rng),
                   speakers, n_mels, lam)

    def discriminator_parameters(self):
        return (self.trunk.parameters() + self.cond_head.parameters()
                + self.sid_head.parameters())

    def zero_discriminator_grads(self):
        for net in (self.trunk, self.cond_head, self.sid_head):
            net.zero_grad()

    def speaker_index(self, speaker: str) -> int:
        try:
            return self.speakers.index(speaker)
        except ValueError:
            raise UnknownSpeakerInPairing(
                f"speaker {speaker!r} not in the model's vocabulary {self.speakers}") from None

    def onehot(self, indices) -> np.ndarray:
        out = np.zeros((len(indices), len(self.speakers)), dtype=np.float32)
        out[np.arange(len(indices)), indices] = 1.0
        return out

    def save(self, path):
        meta = dict(self.meta, model="sbg", speakers=self.speakers, n_mels=self.n_mels,
                    lam=self.lam)
        save_checkpoint(path, {"generator": self.generator, "trunk": self.trunk,
                               "cond_head": self.cond_head, "sid_head": self.sid_head}, meta)

    @classmethod
    def load(cls, path):
        groups, meta = load_checkpoint(path)
        if meta.get("model") != "sbg":
            raise ValueError(f"{path} is not an sbg checkpoint (model={meta.get('model')!r})")
        extra = {k: v for k, v in meta.items()
                 if k not in ("model", "speakers", "n_mels", "lam", "groups")}
        return cls(groups["generator"], groups["trunk"], groups["cond_head"], groups["sid_head"],
                   list(meta["speakers"]), meta["n_mels"], meta["lam"], extra)


def identity_sbg(n_mels=40, speakers=("spk",), seed=0) -> SbgModel:
    """A spectral-basis GAN with zero perturbation scale."""
    return SbgModel.init(n_mels, speakers, lam=0.0, seed=seed)


__all__ = ["DcganModel", "SbgModel", "dcgan_discriminator_specs", "dcgan_flat_dim",
           "dcgan_generator_specs", "identity_dcgan", "identity_sbg", "sbg_generator_specs",
           "sbg_head_specs", "sbg_trunk_specs"]
