"""Optimisers with a step-halving learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MissingGrads

OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class TrainSchedule:
    base_lr: float = 2e-4
    halve_every: int = 2500
    max_iters: int = 1000
    batch_size: int = 16
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.base_lr > 0:
            raise ValueError("base_lr must be positive")
        if self.halve_every < 1:
            raise ValueError("halve_every must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")

    def lr_at(self, iteration: int) -> float:
        """``base_lr * 0.5 ** floor(iteration / halve_every)``."""
        return self.base_lr * 0.5 ** (int(iteration) // self.halve_every)


class Optimizer:
    """SGD or Adam over a fixed parameter list, driven by a :class:`TrainSchedule`."""

    def __init__(self, params, schedule: TrainSchedule):
        self.params = list(params)
        self.schedule = schedule
        self.t = 0
        if schedule.optimizer == "adam":
            self.m = [np.zeros_like(p.data) for p in self.params]
            self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, iteration: int) -> float:
        """Apply one update at the scheduled rate, zero the grads and return the rate used."""
        missing = [i for i, p in enumerate(self.params) if p.grad is None]
        if missing:
            raise MissingGrads(f"{len(missing)} parameters have no gradient (first index {missing[0]})")
        lr = self.schedule.lr_at(iteration)
        s = self.schedule
        if s.optimizer == "sgd":
            for p in self.params:
                p.data -= (lr * p.grad).astype(p.dtype)
        else:
            self.t += 1
            c1 = 1.0 - s.beta1 ** self.t
            c2 = 1.0 - s.beta2 ** self.t
            for p, m, v in zip(self.params, self.m, self.v):
                g = p.grad
                m *= s.beta1
                m += (1.0 - s.beta1) * g
                v *= s.beta2
                v += (1.0 - s.beta2) * g * g
                update = lr * (m / c1) / (np.sqrt(v / c2) + s.eps)
                p.data -= update.astype(p.dtype)
        self.zero_grad()
        return lr


def step(optimizer: Optimizer, iteration: int) -> float:
    return optimizer.step(iteration)
