# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from cython cimport floating
from libc.math cimport sqrt, sin, floor, fabs, M_PI

cnp.import_array()

cdef double TIE_RTOL = 1e-12


def wsola_best_offset(const double[::1] xp, Py_ssize_t ref_start, Py_ssize_t cand_start,
                      Py_ssize_t frame_len, Py_ssize_t delta_max):
    cdef Py_ssize_t i, mag, sgn, delta, c0
    cdef double corr, energy, v, s
    cdef double best = 0.0
    cdef Py_ssize_t best_delta = 0
    cdef bint first = True
    for mag in range(delta_max + 1):
        for sgn in range(2):
            if mag == 0 and sgn == 1:
                continue
            delta = -mag if sgn == 0 else mag
            c0 = cand_start + delta
            corr = 0.0
            energy = 0.0
            for i in range(frame_len):
                v = xp[c0 + i]
                corr += v * xp[ref_start + i]
                energy += v * v
            s = corr / sqrt(energy) if energy > 0.0 else 0.0
            if first:
                best = s
                first = False
            elif s > best + TIE_RTOL * fabs(best):
                best = s
                best_delta = delta
    return best_delta


cdef double _bessel_i0(double x) nogil:
    cdef double term = 1.0, total = 1.0, q = 0.25 * x * x
    cdef int k = 1
    while term > 1e-17 * total:
        term *= q / (<double>k * <double>k)
        total += term
        k += 1
    return total


def sinc_resample(const double[::1] x, double alpha, Py_ssize_t n_out, Py_ssize_t half_width,
                  double cutoff, double beta):
    cdef Py_ssize_t n_in = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.empty(n_out, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t n, j, k, base
    cdef double t, tau, u, arg, h, acc
    cdef double inv_i0 = 1.0 / _bessel_i0(beta)
    with nogil:
        for n in range(n_out):
            t = n * alpha
            base = <Py_ssize_t>floor(t)
            acc = 0.0
            for j in range(-half_width + 1, half_width + 1):
                k = base + j
                if k < 0 or k >= n_in:
                    continue
                tau = t - k
                arg = cutoff * tau
                if arg == 0.0:
                    h = cutoff
                else:
                    h = cutoff * sin(M_PI * arg) / (M_PI * arg)
                u = tau / half_width
                if u > 1.0 or u < -1.0:
                    continue
                h *= _bessel_i0(beta * sqrt(1.0 - u * u)) * inv_i0
                acc += x[k] * h
            out[n] = acc
    return out_arr


cdef void _im2col(floating* xp, floating* cp, Py_ssize_t B, Py_ssize_t Ci, Py_ssize_t H,
                  Py_ssize_t W, Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t sh, Py_ssize_t sw,
                  Py_ssize_t Ho, Py_ssize_t Wo) noexcept nogil:
    # rows: (c, i, j); columns: (n, r, q), so the inner copy runs along an image row
    cdef Py_ssize_t n, r, q, c, i, j, N = B * Ho * Wo
    cdef floating* dst
    cdef floating* src
    for c in range(Ci):
        for i in range(kh):
            for j in range(kw):
                dst = cp + ((c * kh + i) * kw + j) * N
                for n in range(B):
                    for r in range(Ho):
                        src = xp + ((n * Ci + c) * H + r * sh + i) * W + j
                        if sw == 1:
                            for q in range(Wo):
                                dst[q] = src[q]
                        else:
                            for q in range(Wo):
                                dst[q] = src[q * sw]
                        dst += Wo


cdef void _col2im(floating* cp, floating* gxp, Py_ssize_t B, Py_ssize_t Ci, Py_ssize_t H,
                  Py_ssize_t W, Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t sh, Py_ssize_t sw,
                  Py_ssize_t Ho, Py_ssize_t Wo) noexcept nogil:
    cdef Py_ssize_t n, r, q, c, i, j, N = B * Ho * Wo
    cdef floating* src
    cdef floating* dst
    for c in range(Ci):
        for i in range(kh):
            for j in range(kw):
                src = cp + ((c * kh + i) * kw + j) * N
                for n in range(B):
                    for r in range(Ho):
                        dst = gxp + ((n * Ci + c) * H + r * sh + i) * W + j
                        if sw == 1:
                            for q in range(Wo):
                                dst[q] += src[q]
                        else:
                            for q in range(Wo):
                                dst[q * sw] += src[q]
                        src += Wo


def im2col(floating[:, :, :, ::1] x, Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t sh, Py_ssize_t sw):
    """Unfold NCHW input into a (Ci*kh*kw, B*Ho*Wo) patch matrix."""
    cdef Py_ssize_t B = x.shape[0], Ci = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t Ho = (H - kh) // sh + 1, Wo = (W - kw) // sw + 1
    dtype = np.float64 if floating is double else np.float32
    cols_arr = np.empty((Ci * kh * kw, B * Ho * Wo), dtype=dtype)
    cdef floating[:, ::1] cols = cols_arr
    with nogil:
        _im2col(&x[0, 0, 0, 0], &cols[0, 0], B, Ci, H, W, kh, kw, sh, sw, Ho, Wo)
    return cols_arr


def conv2d_forward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w, floating[::1] b,
                   Py_ssize_t sh, Py_ssize_t sw):
    cdef Py_ssize_t B = x.shape[0], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t Co = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t Ho = (H - kh) // sh + 1, Wo = (W - kw) // sw + 1
    cols = im2col(x, kh, kw, sh, sw)
    out = np.asarray(w).reshape(Co, -1) @ cols
    out += np.asarray(b)[:, None]
    return np.ascontiguousarray(out.reshape(Co, B, Ho, Wo).transpose(1, 0, 2, 3))


def conv2d_backward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w,
                    floating[:, :, :, ::1] gout, Py_ssize_t sh, Py_ssize_t sw):
    cdef Py_ssize_t B = x.shape[0], Ci = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t Co = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t Ho = gout.shape[2], Wo = gout.shape[3]
    dtype = np.float64 if floating is double else np.float32
    cols = im2col(x, kh, kw, sh, sw)
    gmat = np.ascontiguousarray(np.asarray(gout).transpose(1, 0, 2, 3)).reshape(Co, -1)
    wmat = np.asarray(w).reshape(Co, -1)
    gw_arr = (gmat @ cols.T).reshape(Co, Ci, kh, kw)
    gb_arr = gmat.sum(axis=1)
    gcols_arr = np.ascontiguousarray(wmat.T @ gmat)
    gx_arr = np.zeros((B, Ci, H, W), dtype=dtype)
    cdef floating[:, ::1] gcols = gcols_arr
    cdef floating[:, :, :, ::1] gx = gx_arr
    with nogil:
        _col2im(&gcols[0, 0], &gx[0, 0, 0, 0], B, Ci, H, W, kh, kw, sh, sw, Ho, Wo)
    return gx_arr, gw_arr, gb_arr
