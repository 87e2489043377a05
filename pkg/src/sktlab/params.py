"""Model parameters for the two-species cross-diffusion dynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ModelParams:
    """Diffusion/interaction rates plus the discretisation scales.

    The motion rate of a species-1 individual is affine in the local
    density of species 2 (and symmetrically): mu1(x) = d1 + a12 x,
    mu2(x) = d2 + a21 x.
    """

    d1: float
    d2: float
    a12: float
    a21: float
    M: int = 0
    N: int = 0
    T: float = 0.0

    def __post_init__(self):
        for name in ("d1", "d2", "a12", "a21"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def mu1(self, x):
        return self.d1 + self.a12 * x

    def mu2(self, x):
        return self.d2 + self.a21 * x

    @property
    def smallness_bound(self) -> float:
        """d1 d2 / (a12 a21); targets below it admit the stability estimate."""
        prod = self.a12 * self.a21
        if prod == 0.0:
            return math.inf
        return self.d1 * self.d2 / prod

    def smallness_margin(self, sup_u: float, sup_v: float) -> float:
        """smallness_bound minus the sup-norm product of the target pair."""
        return self.smallness_bound - sup_u * sup_v
