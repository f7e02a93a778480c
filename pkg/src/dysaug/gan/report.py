from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

COLUMNS = ("iter", "lr", "d_loss", "g_loss", "d_acc", "sid_acc")


@dataclass
class GanTrainReport:
    """Per-iteration training trace. ``sid_acc`` is NaN for models without a speaker head."""

    lr: list = field(default_factory=list)
    d_loss: list = field(default_factory=list)
    g_loss: list = field(default_factory=list)
    d_acc: list = field(default_factory=list)
    sid_acc: list = field(default_factory=list)
    checkpoint: str | None = None

    def record(self, lr, d_loss, g_loss, d_acc, sid_acc=float("nan")):
        self.lr.append(float(lr))
        self.d_loss.append(float(d_loss))
        self.g_loss.append(float(g_loss))
        self.d_acc.append(float(d_acc))
        self.sid_acc.append(float(sid_acc))

    def __len__(self):
        return len(self.lr)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(s)) for s in (self.lr, self.d_loss, self.g_loss, self.d_acc))

    def tail_mean(self, name: str, n: int = 100) -> float:
        return float(np.mean(getattr(self, name)[-n:]))

    def lines(self):
        yield "# " + " ".join(COLUMNS)
        for i in range(len(self)):
            yield " ".join([str(i)] + [repr(getattr(self, c)[i]) for c in COLUMNS[1:]])

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.lines():
                fh.write(line + "\n")

    @classmethod
    def load(cls, path) -> "GanTrainReport":
        rep = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#") or not line.strip():
                    continue
                _, lr, d, g, acc, sid = line.split()
                rep.record(float(lr), float(d), float(g), float(acc), float(sid))
        return rep
