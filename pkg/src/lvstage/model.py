"""Model parameters shared by the classifier, eigensolver and simulator."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .grid import Grid
from .profiles import Profile, as_profile, sample


@dataclass(frozen=True)
class ModelParams:
    d1: float
    d2: float
    tau1: float = 0.0
    tau2: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    b: float = 1.0
    c: float = 1.0
    m1: Profile = field(default="1")
    m2: Profile = field(default="1")
    #: accept growth profiles that vanish somewhere (min >= 0 instead of > 0)
    relaxed: bool = False

    def __post_init__(self):
        for name in ("d1", "d2", "b", "c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be positive, got {v}")
        for name in ("tau1", "tau2", "gamma1", "gamma2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be nonnegative, got {v}")
        object.__setattr__(self, "m1", as_profile(self.m1))
        object.__setattr__(self, "m2", as_profile(self.m2))

    @property
    def delta1(self) -> float:
        return math.exp(-self.gamma1 * self.tau1)

    @property
    def delta2(self) -> float:
        return math.exp(-self.gamma2 * self.tau2)

    @property
    def bc(self) -> float:
        return self.b * self.c

    def growth(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        mode = "relaxed" if self.relaxed else "strict"
        return sample(self.m1, grid, mode), sample(self.m2, grid, mode)

    def replace(self, **changes) -> ModelParams:
        return dataclasses.replace(self, **changes)

    def swapped(self) -> ModelParams:
        """Relabel the species (U <-> V)."""
        return ModelParams(
            d1=self.d2, d2=self.d1, tau1=self.tau2, tau2=self.tau1,
            gamma1=self.gamma2, gamma2=self.gamma1, b=self.c, c=self.b,
            m1=self.m2, m2=self.m1, relaxed=self.relaxed,
        )

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        out["m1"], out["m2"] = str(self.m1), str(self.m2)
        return out
