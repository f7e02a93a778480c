"""Adversarial objectives, written on logits for numerical stability.

For the convolutional GAN the value function is
``V = E[log D(target)] + E[log(1 - D(G(control)))]``; the discriminator
maximises it. For the spectral-basis GAN the discriminator has a condition head
(probability the bases come from an impaired/elderly speaker) and a per-speaker
sigmoid head. With ``L_c`` the condition log-likelihood and ``L_sid`` the
speaker log-likelihood, the discriminator maximises ``L_sid + L_c`` and the
generator maximises ``L_sid - L_c``.
"""
from __future__ import annotations

import numpy as np

from ..nn.tensor import Tensor, add, log_sigmoid, mul, neg, tmean, tsum


def _mean_rows(t: Tensor) -> Tensor:
    # sum over features, mean over batch
    return mul(tsum(t), 1.0 / t.shape[0])


def dcgan_value(real_logits: Tensor, fake_logits: Tensor) -> Tensor:
    """``mean log D(real) + mean log(1 - D(fake))``."""
    return add(tmean(log_sigmoid(real_logits)), tmean(log_sigmoid(neg(fake_logits))))


def dcgan_discriminator_loss(real_logits, fake_logits) -> Tensor:
    return neg(dcgan_value(real_logits, fake_logits))


def dcgan_generator_loss(fake_logits, non_saturating=True) -> Tensor:
    """Non-saturating ``-mean log D(G(x))`` or, literally, ``mean log(1 - D(G(x)))``."""
    if non_saturating:
        return neg(tmean(log_sigmoid(fake_logits)))
    return tmean(log_sigmoid(neg(fake_logits)))


def condition_ll(real_cond_logits, fake_cond_logits) -> Tensor:
    """``L_c = mean log P(impaired | real) + mean log P(control | fake)``."""
    return add(tmean(log_sigmoid(real_cond_logits)), tmean(log_sigmoid(neg(fake_cond_logits))))


def speaker_ll(sid_logits, onehot) -> Tensor:
    """Mean over the batch of the one-hot Bernoulli log-likelihood summed over speakers."""
    y = np.asarray(onehot, dtype=sid_logits.dtype)
    ll = add(mul(log_sigmoid(sid_logits), y), mul(log_sigmoid(neg(sid_logits)), 1.0 - y))
    return _mean_rows(ll)


def sbg_discriminator_loss(real_cond, fake_cond, real_sid, fake_sid, real_onehot,
                           fake_onehot) -> Tensor:
    """``-(L_sid + L_c)``."""
    l_sid = add(speaker_ll(real_sid, real_onehot), speaker_ll(fake_sid, fake_onehot))
    return neg(add(l_sid, condition_ll(real_cond, fake_cond)))


def sbg_generator_loss(fake_cond, fake_sid, fake_onehot, non_saturating=False) -> Tensor:
    """Generator side of ``L_sid - L_c`` (terms without the generator are dropped).

    Literal form: minimise ``-L_sid(fake) + mean log P(control | fake)``. The
    non-saturating form swaps the second term for ``-mean log P(impaired | fake)``.
    """
    sid = speaker_ll(fake_sid, fake_onehot)
    if non_saturating:
        return neg(add(sid, tmean(log_sigmoid(fake_cond))))
    return add(neg(sid), tmean(log_sigmoid(neg(fake_cond))))
