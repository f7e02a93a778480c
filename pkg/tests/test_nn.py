import numpy as np
import pytest
from hypothesis import given, strategies as st

from dysaug.errors import CorruptArchive, DetachedGraph, MissingGrads, NotScalar, ShapeMismatch
from dysaug.nn import (
    LayerSpec,
    Optimizer,
    Sequential,
    Tensor,
    TrainSchedule,
    act_spec,
    bce_with_logits,
    checkpoint_bytes,
    conv_spec,
    fc_spec,
    grad_check,
    load_checkpoint,
    log_sigmoid,
    pad_spec,
    parse_checkpoint,
    save_checkpoint,
)
from dysaug.nn import tensor as T


def away_from_zero(rng, shape):
    # keeps piecewise-linear activations off their kink during finite differences
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(0.1, 1.0, size=shape)


CASES = {
    "conv2d": lambda r: (conv_spec(2, 3, (3, 2), (2, 1)), (2, 2, 7, 6)),
    "fc": lambda r: (fc_spec(5, 4), (3, 5)),
    "relu": lambda r: (act_spec("relu"), (2, 3, 4)),
    "leaky_relu": lambda r: (act_spec("leaky_relu", 0.2), (2, 5)),
    "tanh": lambda r: (act_spec("tanh"), (4, 3)),
    "sigmoid": lambda r: (act_spec("sigmoid"), (4, 3)),
    "flatten": lambda r: (LayerSpec("flatten"), (2, 3, 2, 2)),
    "replicate_pad": lambda r: (pad_spec(1, 2, 0, 1), (2, 1, 3, 4)),
}


@pytest.mark.parametrize("kind", sorted(CASES))
def test_grad_check_each_layer(kind, rng):
    spec, shape = CASES[kind](rng)
    model = Sequential.build([spec], rng=rng, dtype=np.float64)
    for p in model.parameters():
        p.data[...] = rng.standard_normal(p.shape)
    rep = grad_check(model, away_from_zero(rng, shape), tolerance=1e-6, n_samples=40)
    assert rep.passed, rep.failures
    assert rep.n_checked > 0


def test_grad_check_catches_a_wrong_gradient(rng, monkeypatch):
    # a deliberately broken tanh backward must be flagged
    def bad_tanh(x):
        y = np.tanh(x.data)
        return T._node(y, (x,), lambda g: (g * (1 - y),))

    monkeypatch.setattr(T, "tanh", bad_tanh)
    model = Sequential.build([act_spec("tanh")], dtype=np.float64)
    assert not grad_check(model, rng.standard_normal((3, 4))).passed


def test_stacked_network_gradients(rng):
    specs = [pad_spec(1, 1, 1, 1), conv_spec(1, 2, (3, 3)), act_spec("leaky_relu", 0.2),
             conv_spec(2, 2, (2, 2), (2, 2)), act_spec("tanh"), LayerSpec("flatten"),
             fc_spec(8, 1), act_spec("sigmoid")]
    model = Sequential.build(specs, rng=rng, dtype=np.float64)
    for p in model.parameters():
        p.data[...] = 0.5 * rng.standard_normal(p.shape)
    rep = grad_check(model, rng.standard_normal((2, 1, 4, 4)), n_samples=30)
    assert rep.passed, rep.failures


def test_forward_matches_naive_conv(rng):
    x = rng.standard_normal((2, 3, 6, 5))
    w = rng.standard_normal((4, 3, 3, 2))
    b = rng.standard_normal(4)
    out = T.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=(2, 1)).data
    Ho, Wo = (6 - 3) // 2 + 1, 5 - 2 + 1
    want = np.zeros((2, 4, Ho, Wo))
    for n in range(2):
        for o in range(4):
            for i in range(Ho):
                for j in range(Wo):
                    want[n, o, i, j] = np.sum(x[n, :, 2 * i:2 * i + 3, j:j + 2] * w[o]) + b[o]
    np.testing.assert_allclose(out, want, rtol=1e-12)


def test_replicate_pad_values():
    x = Tensor(np.arange(6.0).reshape(1, 1, 2, 3))
    out = T.replicate_pad(x, (1, 0, 2, 1)).data[0, 0]
    assert out.shape == (3, 6)
    np.testing.assert_array_equal(out[0], [0, 0, 0, 1, 2, 2])
    np.testing.assert_array_equal(out[2], [3, 3, 3, 4, 5, 5])


def test_shape_errors(rng):
    with pytest.raises(ShapeMismatch):
        T.linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))), Tensor(np.zeros(4)))
    with pytest.raises(ShapeMismatch):
        T.conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 2, 2))), Tensor(np.zeros(1)))
    with pytest.raises(ShapeMismatch):
        T.conv2d(Tensor(np.zeros((1, 1, 1, 4))), Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros(1)))
    with pytest.raises(ValueError):
        act_spec("leaky_relu", 1.5)
    with pytest.raises(ValueError):
        LayerSpec("dropout")


# ---------------------------------------------------------------- losses

def _scalar_bce(z, t):
    total = 0.0
    for zi, ti in zip(z.ravel(), np.broadcast_to(t, z.shape).ravel()):
        p = 1.0 / (1.0 + np.exp(-zi))
        total += -(ti * np.log(p) + (1 - ti) * np.log(1 - p))
    return total / z.size


@given(st.integers(0, 10_000))
def test_bce_matches_scalar_oracle(seed):
    r = np.random.default_rng(seed)
    z = r.normal(0, 3, (r.integers(1, 9), 1))
    t = r.uniform(0, 1, z.shape)
    assert bce_with_logits(Tensor(z), t).item() == pytest.approx(_scalar_bce(z, t), rel=1e-10)


def test_log_sigmoid_is_stable():
    out = log_sigmoid(Tensor(np.array([-800.0, 0.0, 800.0]))).data
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [-800.0, -np.log(2), 0.0], atol=1e-12)


def test_bce_gradient_is_sigmoid_minus_target(rng):
    z = Tensor(rng.standard_normal((6, 1)), requires_grad=True)
    t = rng.uniform(0, 1, (6, 1))
    bce_with_logits(z, t).backward()
    np.testing.assert_allclose(z.grad, (1 / (1 + np.exp(-z.data)) - t) / 6, rtol=1e-10)


# ---------------------------------------------------------------- autodiff errors

def test_backward_errors():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(NotScalar):
        (x * 2.0).backward()
    with pytest.raises(DetachedGraph):
        T.tsum(Tensor(np.ones(3))).backward()
    with pytest.raises(NotScalar):
        x.item()


def test_gradients_accumulate_through_shared_use():
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    T.tsum(T.mul(x, x)).backward()
    np.testing.assert_allclose(x.grad, 2 * x.data)


# ---------------------------------------------------------------- schedule and optimiser

@given(st.integers(0, 20_000))
def test_lr_law(it):
    s = TrainSchedule()
    assert s.lr_at(it) == 2e-4 * 0.5 ** (it // 2500)


def test_schedule_validation():
    for bad in ({"base_lr": 0.0}, {"halve_every": 0}, {"optimizer": "rmsprop"}):
        with pytest.raises(ValueError):
            TrainSchedule(**bad)


def test_adam_matches_manual_update(rng):
    p = Tensor(rng.standard_normal(5), requires_grad=True)
    start = p.data.copy()
    s = TrainSchedule(base_lr=0.01, halve_every=2)
    opt = Optimizer([p], s)
    grads = [rng.standard_normal(5) for _ in range(4)]
    m = v = np.zeros(5)
    want = start.copy()
    for it, g in enumerate(grads):
        p.grad = g.copy()
        assert opt.step(it) == s.lr_at(it)
        m = 0.5 * m + 0.5 * g
        v = 0.999 * v + 0.001 * g * g
        t = it + 1
        want = want - s.lr_at(it) * (m / (1 - 0.5 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        assert p.grad is None
    np.testing.assert_allclose(p.data, want, rtol=1e-12)


def test_sgd_and_missing_grads(rng):
    p = Tensor(np.ones(3), requires_grad=True)
    opt = Optimizer([p], TrainSchedule(base_lr=0.1, optimizer="sgd"))
    with pytest.raises(MissingGrads):
        opt.step(0)
    p.grad = np.array([1.0, 2.0, 3.0])
    opt.step(0)
    np.testing.assert_allclose(p.data, [0.9, 0.8, 0.7])


# ---------------------------------------------------------------- checkpoints

def _two_nets(rng):
    g = Sequential.build([pad_spec(1, 1, 1, 1), conv_spec(1, 2, (3, 3)), act_spec("tanh")], rng=rng)
    d = Sequential.build([conv_spec(1, 2, (2, 2), (2, 2)), act_spec("leaky_relu", 0.2),
                          LayerSpec("flatten"), fc_spec(8, 1), act_spec("sigmoid")], rng=rng)
    return {"generator": g, "discriminator": d}


def test_checkpoint_round_trip(tmp_path, rng):
    nets = _two_nets(rng)
    save_checkpoint(tmp_path / "m.dgpt", nets, {"speaker": "F01"})
    groups, meta = load_checkpoint(tmp_path / "m.dgpt")
    assert meta["speaker"] == "F01" and list(groups) == ["generator", "discriminator"]
    for name, net in nets.items():
        assert groups[name].specs == net.specs
        for a, b in zip(groups[name].parameters(), net.parameters()):
            assert np.array_equal(a.data, b.data)
    # re-serialising gives the same bytes
    assert checkpoint_bytes(groups, {"speaker": "F01"}) == (tmp_path / "m.dgpt").read_bytes()
    x = Tensor(rng.standard_normal((1, 1, 4, 4)).astype(np.float32))
    assert np.array_equal(groups["discriminator"](x).data, nets["discriminator"](x).data)


def test_checkpoint_corruption_is_detected(rng):
    data = checkpoint_bytes(_two_nets(rng))
    for cut in (0, 3, 10, len(data) // 2, len(data) - 1):
        with pytest.raises(CorruptArchive):
            parse_checkpoint(data[:cut])
    flipped = bytearray(data)
    flipped[len(data) // 2] ^= 0xFF
    with pytest.raises(CorruptArchive):
        parse_checkpoint(bytes(flipped))
    with pytest.raises(CorruptArchive):
        parse_checkpoint(b"XXXX" + data[4:])
    with pytest.raises(CorruptArchive):
        parse_checkpoint(data + b"\0")
