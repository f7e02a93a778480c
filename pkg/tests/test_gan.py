import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import loop_dcgan_value, loop_sbg_losses, lsig, voiced
from dysaug.corpus import MEAN_BASES, PairManifest
from dysaug.errors import EmptyTrainingSet, ShapeMismatch, UnalignedPair, UnknownSpeakerInPairing
from dysaug.gan import (
    SBG_SG_TAG,
    DcganModel,
    GanTrainReport,
    SbgModel,
    dcgan_flat_dim,
    dcgan_generate,
    discriminator_accuracy,
    generator_delta,
    identity_dcgan,
    identity_sbg,
    perturb_bases,
    sbg_generate,
    sbg_plus_sg,
    speaker_accuracy,
    train_dcgan,
    train_sbg,
)
from dysaug.gan import losses as L
from dysaug.nn import Tensor, TrainSchedule
from dysaug.signal import Spectrogram, mel_fbank
from dysaug.subspace import svd_decompose


def tiny(iters=3, **kw):
    return TrainSchedule(max_iters=iters, batch_size=4, **kw)


# ---------------------------------------------------------------- architecture

def test_dcgan_shapes(rng):
    m = DcganModel.init(40, 96, "F01", seed=3)
    x = Tensor(rng.standard_normal((2, 1, 40, 96)).astype(np.float32))
    assert m.generator(x).shape == (2, 1, 40, 96)
    d = m.discriminator(x).data
    assert d.shape == (2, 1) and np.all((d > 0) & (d < 1))
    assert dcgan_flat_dim(40, 96) == 64 * 2 * 6
    with pytest.raises(ShapeMismatch):
        dcgan_flat_dim(8, 96)
    with pytest.raises(ValueError):
        DcganModel.init(generator_init="xavier")


def test_identity_generators(rng):
    spec = rng.standard_normal((40, 57))
    out = dcgan_generate(identity_dcgan(40, 32), spec).values
    np.testing.assert_allclose(out, spec, atol=1e-5)
    # identity init keeps the random channels, which only add a small residual to the pass-through
    m = DcganModel.init(40, 32, seed=5, generator_init="identity")
    out = dcgan_generate(m, spec).values
    assert np.linalg.norm(out - spec) / np.linalg.norm(spec) < 1e-3
    assert np.any(m.generator.layers[1].params[0].data[2:] != 0)


def test_dcgan_generate_checks_channels(rng):
    with pytest.raises(ShapeMismatch):
        dcgan_generate(identity_dcgan(40, 32), rng.standard_normal((30, 50)))


# ---------------------------------------------------------------- losses vs scalar loops

@given(st.integers(0, 10_000))
def test_loss_oracles(seed):
    r = np.random.default_rng(seed)
    B, K = int(r.integers(1, 9)), int(r.integers(1, 5))
    real, fake = r.normal(0, 2, (B, 1)), r.normal(0, 2, (B, 1))
    v = loop_dcgan_value(real, fake)
    assert L.dcgan_discriminator_loss(Tensor(real), Tensor(fake)).item() == pytest.approx(-v, abs=1e-9)
    ns = -sum(lsig(z) for z in fake.ravel()) / B
    assert L.dcgan_generator_loss(Tensor(fake)).item() == pytest.approx(ns, abs=1e-9)
    lit = sum(lsig(-z) for z in fake.ravel()) / B
    assert L.dcgan_generator_loss(Tensor(fake), False).item() == pytest.approx(lit, abs=1e-9)

    rs, fs = r.normal(0, 2, (B, K)), r.normal(0, 2, (B, K))
    oh = np.eye(K)[r.integers(0, K, B)]
    d, g = loop_sbg_losses(real, fake, rs, fs, oh)
    got = L.sbg_discriminator_loss(Tensor(real), Tensor(fake), Tensor(rs), Tensor(fs), oh, oh).item()
    assert got == pytest.approx(d, abs=1e-9)
    assert L.sbg_generator_loss(Tensor(fake), Tensor(fs), oh).item() == pytest.approx(g, abs=1e-9)
    _, g_ns = loop_sbg_losses(real, fake, rs, fs, oh, non_saturating=True)
    assert L.sbg_generator_loss(Tensor(fake), Tensor(fs), oh, True).item() == pytest.approx(g_ns, abs=1e-9)


# ---------------------------------------------------------------- dcgan training

def _pairs(rng, n=6, C=40, T=40):
    out = []
    for _ in range(n):
        c = rng.standard_normal((C, T))
        out.append((c, c + 0.5))
    return out


def test_train_dcgan_deterministic(tmp_path, rng):
    pairs = _pairs(rng)
    a, rep_a = train_dcgan(pairs, tiny(seed=7), window=32, target_speaker="F01")
    b, rep_b = train_dcgan(pairs, tiny(seed=7), window=32, target_speaker="F01")
    a.save(tmp_path / "a.dgpt")
    b.save(tmp_path / "b.dgpt")
    assert (tmp_path / "a.dgpt").read_bytes() == (tmp_path / "b.dgpt").read_bytes()
    assert rep_a.d_loss == rep_b.d_loss and len(rep_a) == 3 and rep_a.is_finite()
    c, _ = train_dcgan(pairs, tiny(seed=8), window=32)
    assert not np.array_equal(c.generator.parameters()[0].data, a.generator.parameters()[0].data)
    back = DcganModel.load(tmp_path / "a.dgpt")
    assert back.target_speaker == "F01" and back.window == 32
    assert 0.0 <= discriminator_accuracy(back, pairs) <= 1.0


def test_generator_weight_averaging(rng):
    pairs = _pairs(rng)
    start = DcganModel.init(40, 32, seed=0).generator.copy()
    raw, _ = train_dcgan(pairs, tiny(iters=1), window=32)
    avg, _ = train_dcgan(pairs, tiny(iters=1), window=32, ema_decay=0.9)
    for p0, p1, pa in zip(start.parameters(), raw.generator.parameters(), avg.generator.parameters()):
        np.testing.assert_allclose(pa.data, 0.9 * p0.data + 0.1 * p1.data, rtol=1e-5, atol=1e-8)
    assert avg.meta["generator_ema"] == 0.9
    # the discriminator is never averaged
    for a, b in zip(raw.discriminator.parameters(), avg.discriminator.parameters()):
        assert np.array_equal(a.data, b.data)
    with pytest.raises(ValueError):
        train_dcgan(pairs, tiny(), window=32, ema_decay=1.0)


def test_train_dcgan_errors(rng):
    with pytest.raises(EmptyTrainingSet):
        train_dcgan([], tiny())
    with pytest.raises(UnalignedPair):
        train_dcgan([(np.zeros((40, 40)), np.zeros((40, 41)))], tiny(), window=32)
    with pytest.raises(ShapeMismatch):
        train_dcgan([(np.zeros((40, 40)),) * 2, (np.zeros((30, 40)),) * 2], tiny(), window=32)


def test_short_utterances_are_edge_padded(rng):
    model, rep = train_dcgan(_pairs(rng, T=10), tiny(), window=32)
    assert len(rep) == 3


def test_report_round_trip(tmp_path):
    rep = GanTrainReport()
    rep.record(2e-4, 1.3, 0.7, 0.5)
    rep.record(1e-4, 1.2, 0.8, 0.75, 0.9)
    rep.save(tmp_path / "r.tsv")
    back = GanTrainReport.load(tmp_path / "r.tsv")
    assert back.lr == rep.lr and back.d_acc == rep.d_acc
    assert math.isnan(back.sid_acc[0]) and back.sid_acc[1] == 0.9
    assert rep.tail_mean("d_acc", 1) == 0.75


# ---------------------------------------------------------------- sbg

@pytest.fixture
def sbg_data(rng):
    C = 6
    control = {f"c{i}": svd_decompose(rng.standard_normal((C, 20))).U for i in range(5)}
    targets = {s: {f"{s}_{i}": svd_decompose(rng.standard_normal((C, 20))).U for i in range(3)}
               for s in ("A", "B")}
    pm = [PairManifest("rand", [(f"c{i}", f"{s}_{i % 3}") for i in range(5)], 0, s) for s in ("A", "B")]
    return control, targets, pm


def test_train_sbg_and_generate(sbg_data, tmp_path, rng):
    control, targets, pm = sbg_data
    model, rep = train_sbg(control, targets, pm, lam=0.2, schedule=tiny(seed=1))
    assert model.speakers == ["A", "B"] and len(rep) == 3 and rep.is_finite()
    U = control["c0"]
    delta = generator_delta(model, U, "B")
    assert delta.shape == (6, 6) and np.all(np.abs(delta) <= 1)
    assert np.max(np.abs(perturb_bases(model, U, "B") - U)) <= 0.2
    acc = speaker_accuracy(model, [targets["A"]["A_0"]], ["A"])
    assert acc in (0.0, 1.0)
    model.save(tmp_path / "s.dgpt")
    back = SbgModel.load(tmp_path / "s.dgpt")
    assert back.lam == 0.2 and back.speakers == ["A", "B"]
    np.testing.assert_array_equal(generator_delta(back, U, "A"), generator_delta(model, U, "A"))
    with pytest.raises(ValueError):
        DcganModel.load(tmp_path / "s.dgpt")


def test_sbg_generate_keeps_temporal_bases(sbg_data, rng):
    control, targets, pm = sbg_data
    model, _ = train_sbg(control, targets, pm, lam=0.5, schedule=tiny())
    S = rng.standard_normal((6, 25))
    out = sbg_generate(model, Spectrogram(S), "A")
    assert out.values.shape == S.shape
    before, after = svd_decompose(S), svd_decompose(out.values)
    # the output equals U' diag(sigma) Vt with Vt and sigma from the input
    U_new = perturb_bases(model, before.U, "A")
    np.testing.assert_allclose(out.values, U_new @ before.sigma_matrix() @ before.Vt, atol=1e-10)
    assert after.shape == before.shape


def test_sbg_zero_lambda_is_identity(rng):
    S = rng.standard_normal((8, 30))
    out = sbg_generate(identity_sbg(8, ["x"]), Spectrogram(S), "x")
    assert np.max(np.abs(out.values - S)) < 1e-10


def test_sbg_pairing_errors(sbg_data):
    control, targets, pm = sbg_data
    with pytest.raises(UnknownSpeakerInPairing):
        train_sbg(control, targets, [PairManifest("rand", [("c0", "A_0")], 0, "Z")], schedule=tiny())
    with pytest.raises(UnknownSpeakerInPairing):
        train_sbg(control, targets, [PairManifest("rand", [("nope", "A_0")], 0, "A")], schedule=tiny())
    with pytest.raises(UnknownSpeakerInPairing):
        train_sbg(control, targets, [PairManifest("rand", [("c0", "B_0")], 0, "A")], schedule=tiny())
    with pytest.raises(EmptyTrainingSet):
        train_sbg(control, targets, [PairManifest("rand", [], 0, "A")], schedule=tiny())
    with pytest.raises(ValueError):
        train_sbg(control, targets, [PairManifest("parallel", [("c0", "A_0")], 0, "A")], schedule=tiny())
    model, _ = train_sbg(control, targets, [PairManifest("avg", [("c0", MEAN_BASES)], 0, "A")],
                         schedule=tiny())
    with pytest.raises(UnknownSpeakerInPairing):
        generator_delta(model, control["c0"], "Z")


# ---------------------------------------------------------------- chained pipeline

def test_sbg_plus_sg_chain(rng):
    wave = voiced(rng, 0.4)
    spec, prov = sbg_plus_sg(wave, identity_sbg(40, ["F01"]), identity_dcgan(40, 32, "F01"), 0.5)
    ref = mel_fbank(wave)
    # alpha 0.5 doubles the duration, so roughly twice the frames
    assert abs(spec.n_frames - 2 * ref.n_frames) <= 2
    assert [p["stage"] for p in prov] == ["speed_perturb", "sbg", "dcgan"]
    assert prov[0]["alpha"] == 0.5 and SBG_SG_TAG == "SBG+SG"
    # with both models at identity the chain equals the speed-perturbed features
    from dysaug.signal import speed_perturb
    np.testing.assert_allclose(spec.values, mel_fbank(speed_perturb(wave, 0.5)).values, atol=1e-4)
