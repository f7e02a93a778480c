"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` call-for-call and are used when the compiled
extension is unavailable or ``DYSAUG_PURE_PYTHON`` is set.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# relative margin a candidate must beat the incumbent by to win a tie
TIE_RTOL = 1e-12


def wsola_best_offset(xp, ref_start, cand_start, frame_len, delta_max):
    """Return the shift in [-delta_max, delta_max] whose segment best matches the reference.

    Score is the cross-correlation normalised by the candidate's energy, so an exact
    copy of the reference always scores highest. Ties go to the smallest |shift|,
    negative first.
    """
    ref = xp[ref_start:ref_start + frame_len]
    region = xp[cand_start - delta_max:cand_start + delta_max + frame_len]
    windows = sliding_window_view(region, frame_len)
    corr = windows @ ref
    energy = np.einsum("ij,ij->i", windows, windows)
    score = np.zeros_like(corr)
    nz = energy > 0.0
    score[nz] = corr[nz] / np.sqrt(energy[nz])

    best_delta = 0
    best = score[delta_max]
    for mag in range(1, delta_max + 1):
        for delta in (-mag, mag):
            s = score[delta + delta_max]
            if s > best + TIE_RTOL * abs(best):
                best = s
                best_delta = delta
    return best_delta


def _kaiser(u, beta):
    u = np.clip(u, -1.0, 1.0)
    return np.i0(beta * np.sqrt(1.0 - u * u)) / np.i0(beta)


def sinc_resample(x, alpha, n_out, half_width, cutoff, beta, chunk=8192):
    """Evaluate ``x`` at times ``n * alpha`` with a Kaiser-windowed sinc interpolator.

    ``cutoff`` is relative to Nyquist; ``half_width`` is in input samples. Samples
    outside ``x`` are treated as zero.
    """
    x = np.asarray(x, dtype=np.float64)
    n_in = x.shape[0]
    out = np.empty(n_out, dtype=np.float64)
    taps = np.arange(-half_width + 1, half_width + 1)
    for lo in range(0, n_out, chunk):
        hi = min(lo + chunk, n_out)
        t = np.arange(lo, hi, dtype=np.float64) * alpha
        base = np.floor(t).astype(np.int64)
        k = base[:, None] + taps[None, :]
        tau = t[:, None] - k
        h = cutoff * np.sinc(cutoff * tau) * _kaiser(tau / half_width, beta)
        valid = (k >= 0) & (k < n_in)
        vals = np.where(valid, x[np.clip(k, 0, n_in - 1)], 0.0)
        out[lo:hi] = np.sum(vals * h, axis=1)
    return out


def conv2d_forward(x, w, b, sh, sw):
    """Valid (unpadded) strided 2-D convolution, NCHW layout."""
    kh, kw = w.shape[2], w.shape[3]
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # B, Ho, Wo, Co
    out = out.transpose(0, 3, 1, 2) + b[None, :, None, None]
    return np.ascontiguousarray(out, dtype=x.dtype)


def conv2d_backward(x, w, gout, sh, sw):
    """Gradients of ``conv2d_forward`` w.r.t. input, weight and bias."""
    kh, kw = w.shape[2], w.shape[3]
    ho, wo = gout.shape[2], gout.shape[3]
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    gw = np.tensordot(gout, win, axes=([0, 2, 3], [0, 2, 3])).astype(x.dtype)
    gb = gout.sum(axis=(0, 2, 3)).astype(x.dtype)
    gx = np.zeros_like(x)
    for i in range(kh):
        for j in range(kw):
            # (B, Co, Ho, Wo) x (Co, Ci) -> (B, Ho, Wo, Ci)
            contrib = np.tensordot(gout, w[:, :, i, j], axes=([1], [0]))
            gx[:, :, i:i + sh * ho:sh, j:j + sw * wo:sw] += contrib.transpose(0, 3, 1, 2)
    return gx, gw, gb
