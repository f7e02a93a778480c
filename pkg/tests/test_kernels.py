"""Both kernel backends must agree with each other and with scalar oracles."""
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from dysaug import _kernels

BACKENDS = _kernels.available_backends()


@pytest.fixture(params=sorted(BACKENDS))
def kern(request):
    return BACKENDS[request.param]


def test_python_backend_always_available():
    assert "python" in BACKENDS
    assert _kernels.BACKEND in BACKENDS


def test_pure_python_switch():
    code = "from dysaug import _kernels; print(_kernels.BACKEND)"
    env = dict(os.environ, DYSAUG_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_wsola_offset_planted_copy(kern, rng):
    xp = rng.standard_normal(3000)
    xp[1240:1440] = xp[500:700]
    assert kern.wsola_best_offset(xp, 500, 1200, 200, 100) == 40
    assert kern.wsola_best_offset(xp, 500, 1300, 200, 100) == -60


def test_wsola_ties(kern):
    # a constant signal scores every shift equally, so zero wins
    assert kern.wsola_best_offset(np.ones(400), 0, 150, 50, 40) == 0
    # period-20 signal: shifts -20, 0 and +20 are exact; with 0 excluded by a phase offset
    # the candidates -10 and +10 tie and the negative one wins
    xp = np.tile(np.r_[np.ones(10), -np.ones(10)], 20)
    assert kern.wsola_best_offset(xp, 0, 150, 50, 15) == -10


def test_wsola_backends_agree(rng):
    if "cython" not in BACKENDS:
        pytest.skip("compiled backend not built")
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    for _ in range(30):
        xp = rng.standard_normal(1500)
        ref, cand = rng.integers(0, 500, 2)
        cand += 300
        assert py.wsola_best_offset(xp, ref, cand, 256, 120) == cy.wsola_best_offset(xp, ref, cand, 256, 120)


def _scalar_resample(x, alpha, n_out, half_width, cutoff, beta):
    out = []
    for n in range(n_out):
        t = n * alpha
        acc = 0.0
        for k in range(math.floor(t) - half_width + 1, math.floor(t) + half_width + 1):
            if 0 <= k < len(x):
                tau = t - k
                u = min(1.0, abs(tau) / half_width)
                win = np.i0(beta * math.sqrt(1 - u * u)) / np.i0(beta)
                arg = cutoff * tau
                s = 1.0 if arg == 0 else math.sin(math.pi * arg) / (math.pi * arg)
                acc += x[k] * cutoff * s * win
        out.append(acc)
    return np.array(out)


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.3])
def test_sinc_resample_matches_scalar_loop(kern, alpha, rng):
    x = rng.standard_normal(90)
    cutoff = min(1.0, 1.0 / alpha)
    hw = int(math.ceil(8 / cutoff))
    n_out = round(90 / alpha)
    got = kern.sinc_resample(x, alpha, n_out, hw, cutoff, 8.0)
    np.testing.assert_allclose(got, _scalar_resample(x, alpha, n_out, hw, cutoff, 8.0), atol=1e-10)


def _naive_conv(x, w, b, sh, sw):
    B, C, H, W = x.shape
    O, _, kh, kw = w.shape
    Ho, Wo = (H - kh) // sh + 1, (W - kw) // sw + 1
    out = np.zeros((B, O, Ho, Wo))
    for n in range(B):
        for o in range(O):
            for i in range(Ho):
                for j in range(Wo):
                    out[n, o, i, j] = np.sum(x[n, :, i * sh:i * sh + kh, j * sw:j * sw + kw] * w[o]) + b[o]
    return out


@pytest.mark.parametrize("shape,wshape,stride", [
    ((2, 1, 8, 9), (3, 1, 3, 3), (1, 1)),
    ((3, 4, 10, 12), (2, 4, 2, 2), (2, 2)),
    ((1, 2, 7, 5), (5, 2, 3, 1), (2, 1)),
])
def test_conv_forward_and_backward(kern, rng, shape, wshape, stride):
    x = rng.standard_normal(shape)
    w = rng.standard_normal(wshape)
    b = rng.standard_normal(wshape[0])
    out = kern.conv2d_forward(x, w, b, *stride)
    np.testing.assert_allclose(out, _naive_conv(x, w, b, *stride), rtol=1e-10, atol=1e-12)
    g = rng.standard_normal(out.shape)
    gx, gw, gb = kern.conv2d_backward(x, w, g, *stride)
    # the convolution is linear, so <g, conv(x)> has gradient given by these adjoint identities
    eps = rng.standard_normal(shape)
    np.testing.assert_allclose(np.sum(gx * eps), np.sum(g * _naive_conv(eps, w, 0 * b, *stride)), rtol=1e-9)
    dw = rng.standard_normal(wshape)
    np.testing.assert_allclose(np.sum(gw * dw), np.sum(g * _naive_conv(x, dw, 0 * b, *stride)), rtol=1e-9)
    np.testing.assert_allclose(gb, g.sum(axis=(0, 2, 3)), rtol=1e-10)


def test_conv_float32_preserved(kern, rng):
    x = rng.standard_normal((1, 1, 5, 5)).astype(np.float32)
    w = rng.standard_normal((1, 1, 2, 2)).astype(np.float32)
    out = kern.conv2d_forward(x, w, np.zeros(1, np.float32), 1, 1)
    assert out.dtype == np.float32
