"""SVD split of spectrograms into spectral bases (U) and temporal bases (Vt).

The spectral bases carry time-invariant, speaker-like structure; perturbing them
and recombining with the untouched singular values and temporal bases changes
the voice characteristics but not the timing of an utterance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteInput, ShapeMismatch
from .signal import Spectrogram


@dataclass(frozen=True)
class SvdTriple:
    U: np.ndarray       # C x C, columns are spectral bases
    sigma: np.ndarray   # min(C, T), descending
    Vt: np.ndarray      # T x T, rows are temporal bases
    shape: tuple

    def sigma_matrix(self) -> np.ndarray:
        """Singular values as a C x T rectangular diagonal matrix."""
        out = np.zeros(self.shape)
        k = self.sigma.shape[0]
        out[np.arange(k), np.arange(k)] = self.sigma
        return out


def _canonical_signs(vectors):
    # sign making the largest-magnitude entry of each column positive
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def svd_decompose(spec) -> SvdTriple:
    """Full SVD ``S = U diag(sigma) Vt`` with deterministic singular-vector signs.

    Paired vectors (index < min(C, T)) are flipped together so that each column of
    U has a positive largest entry; the remaining null-space vectors of U and Vt
    are canonicalised independently.
    """
    S = np.asarray(spec.values if isinstance(spec, Spectrogram) else spec, dtype=np.float64)
    if S.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise NonFiniteInput("spectrogram contains NaN or inf")
    U, sigma, Vt = np.linalg.svd(S, full_matrices=True)
    k = sigma.shape[0]

    u_signs = _canonical_signs(U)
    U = U * u_signs[None, :]
    v_signs = _canonical_signs(Vt.T)
    v_signs[:k] = u_signs[:k]
    Vt = Vt * v_signs[:, None]
    return SvdTriple(U, sigma, Vt, S.shape)


def recompose(U, sigma, Vt, shape=None, frame_hop=None, sample_rate=None) -> Spectrogram:
    """Rebuild the C x T spectrogram ``U Sigma Vt``."""
    U = np.asarray(U, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    Vt = np.asarray(Vt, dtype=np.float64)
    C, T = U.shape[0], Vt.shape[0]
    k = sigma.shape[0]
    if U.shape != (C, C) or Vt.shape != (T, T) or k != min(C, T):
        raise ShapeMismatch(
            f"inconsistent factors: U {U.shape}, sigma {sigma.shape}, Vt {Vt.shape}")
    if shape is not None and tuple(shape) != (C, T):
        raise ShapeMismatch(f"factors give {(C, T)}, expected {tuple(shape)}")
    values = (U[:, :k] * sigma[None, :]) @ Vt[:k]
    return Spectrogram(values, frame_hop, sample_rate)


def recompose_triple(triple: SvdTriple, U=None) -> Spectrogram:
    return recompose(triple.U if U is None else U, triple.sigma, triple.Vt, triple.shape)


def apply_perturbation(U, delta_raw, lam: float) -> np.ndarray:
    """Return ``U + lam * delta_raw`` for a generator output bounded in [-1, 1].

    The perturbed bases are not re-orthogonalised. Entries whose rounded
    difference from ``U`` would exceed ``|lam|`` are nudged back by one ulp so the
    bound holds in floating point, not just in exact arithmetic.
    """
    U = np.asarray(U, dtype=np.float64)
    delta = np.asarray(delta_raw, dtype=np.float64)
    if U.shape != delta.shape or U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ShapeMismatch(f"U {U.shape} and perturbation {delta.shape} must be equal square")
    if np.any(np.abs(delta) > 1.0) or not np.all(np.isfinite(delta)):
        raise ValueError("perturbation entries must lie in [-1, 1]")
    bound = abs(float(lam))
    out = U + float(lam) * delta
    over = np.abs(out - U) > bound
    while np.any(over):
        out[over] = np.nextafter(out[over], U[over])
        over = np.abs(out - U) > bound
    return out


def mean_bases(bases) -> np.ndarray:
    """Elementwise mean of sign-canonical spectral basis matrices."""
    stack = np.stack([np.asarray(b, dtype=np.float64) for b in bases])
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ShapeMismatch(f"expected a stack of square matrices, got {stack.shape}")
    return stack.mean(axis=0)


def projection(U, rank: int) -> np.ndarray:
    """Orthogonal projector onto the span of the first ``rank`` spectral bases."""
    Uk = np.asarray(U)[:, :rank]
    return Uk @ Uk.T
