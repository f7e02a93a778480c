"""Finite-difference verification of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, mul, tsum

# denominators below this are treated as this, so near-zero grads compare absolutely
REL_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    n_checked: int
    failures: list = field(default_factory=list)  # (where, index, analytic, numeric, rel)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def _rel(a, n):
    return abs(a - n) / max(abs(a), abs(n), REL_FLOOR)


def grad_check(model, x, tolerance=1e-4, eps=1e-5, n_samples=16, seed=0,
               check_input=True) -> GradCheckReport:
    """Compare analytic gradients of ``sum(model(x) * P)`` with central differences.

    ``P`` is a fixed random projection so every output element matters. The model
    is copied to float64 first; up to ``n_samples`` entries of each parameter (and
    of the input when ``check_input``) are perturbed.
    """
    rng = np.random.default_rng(seed)
    model = model.astype(np.float64)
    x = Tensor(np.array(x, dtype=np.float64), requires_grad=check_input)
    proj = rng.standard_normal(model(x.detach()).shape)

    def loss_value():
        return float(np.sum(model(x.detach()).data * proj))

    model.zero_grad()
    loss = tsum(mul(model(x), proj))
    loss.backward()

    targets = [(f"param{i}", p) for i, p in enumerate(model.parameters())]
    if check_input:
        targets.append(("input", x))

    worst, checked, failures = 0.0, 0, []
    for name, t in targets:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat = t.data.reshape(-1)
        picks = rng.choice(flat.size, size=min(n_samples, flat.size), replace=False)
        for idx in picks:
            orig = flat[idx]
            flat[idx] = orig + eps
            up = loss_value()
            flat[idx] = orig - eps
            down = loss_value()
            flat[idx] = orig
            numeric = (up - down) / (2 * eps)
            a = float(analytic.reshape(-1)[idx])
            rel = _rel(a, numeric)
            checked += 1
            worst = max(worst, rel)
            if rel >= tolerance:
                failures.append((name, int(idx), a, numeric, rel))
    return GradCheckReport(worst, tolerance, checked, failures)
