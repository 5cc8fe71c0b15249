"""Forest hyperparameters."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

VARIANTS = ("dmrf", "brieman", "mrf-se", "mrf-b", "brf-se", "brf-b", "denil14-se", "denil14-b")


@dataclass(frozen=True)
class HyperParams:
    """Every forest knob, with defaults matching the reference settings.

    ``lam`` is the Poisson rate of Denil14 (``lambda`` is reserved in Python).
    """

    M: int = 100
    p: float = 0.5
    q_n: float = 1.0 - 1.0 / math.e
    k_n: int = 5
    B1: float = 5.0
    B2: float = 5.0
    seed: int = 0
    variant: str = "dmrf"
    ratio: float = 0.5
    m: int = 100
    lam: float = 0.5
    p1: float = 0.05
    p2: float = 0.05
    weighted_mse_reduction: bool = True

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if not 0.0 < self.q_n <= 1.0:
            raise ValueError("q_n must lie in (0, 1]")
        if self.k_n < 1:
            raise ValueError("k_n must be a positive integer")
        if self.B1 < 0 or self.B2 < 0:
            raise ValueError("B1 and B2 must be non-negative")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("ratio must lie in (0, 1)")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if not (0.0 <= self.p1 <= 1.0 and 0.0 <= self.p2 <= 1.0):
            raise ValueError("p1 and p2 must lie in [0, 1]")

    def replace(self, **changes) -> "HyperParams":
        d = asdict(self)
        d.update(changes)
        return HyperParams(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})
