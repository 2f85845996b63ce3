"""Smooth compactly supported test functions ψ(t, x)."""

import math
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.integrate import quad

from ..config import PSI_QUADRATURE_RTOL


def bump(r):
    """exp(1 - 1/(1 - r²)) on |r| < 1, zero elsewhere; equals 1 at r = 0."""
    r = np.asarray(r, dtype=float)
    inside = np.abs(r) < 1.0
    r2 = np.where(inside, r * r, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - r2)), 0.0)


@lru_cache(maxsize=1)
def bump_integral() -> float:
    """∫_{-1}^{1} bump(r) dr."""
    value, _ = quad(lambda r: float(bump(r)), -1.0, 1.0, epsrel=PSI_QUADRATURE_RTOL)
    return value


class BumpProduct(BaseModel):
    """ψ(t, x) = amplitude · bump((t - t_c)/t_w) · Π_k bump((x_k - x_c,k)/x_w,k)."""

    model_config = ConfigDict(frozen=True)

    t_center: float = 0.5
    t_width: float = 0.25
    x_center: List[float] = Field(default_factory=lambda: [0.0])
    x_width: List[float] = Field(default_factory=lambda: [1.0])
    amplitude: float = 1.0

    @field_validator("t_width")
    @classmethod
    def _positive_width(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("width must be positive")
        return v

    @model_validator(mode="after")
    def _check_dims(self) -> "BumpProduct":
        if len(self.x_center) != len(self.x_width) or not self.x_center:
            raise ValueError("x_center and x_width must have the same non-zero length")
        if any(w <= 0 for w in self.x_width):
            raise ValueError("x_width entries must be positive")
        return self

    @classmethod
    def centered(cls, d: int, t_width: float = 0.25, x_width: float = 1.0, amplitude: float = 1.0) -> "BumpProduct":
        return cls(t_center=0.5, t_width=t_width, x_center=[0.0] * d, x_width=[x_width] * d, amplitude=amplitude)

    @property
    def d(self) -> int:
        return len(self.x_center)

    @property
    def is_zero(self) -> bool:
        return self.amplitude == 0.0

    def __call__(self, t, x) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float).reshape(t.shape + (self.d,))
        out = self.amplitude * bump((t - self.t_center) / self.t_width)
        for k in range(self.d):
            out = out * bump((x[..., k] - self.x_center[k]) / self.x_width[k])
        return out

    def support(self) -> Tuple[Tuple[float, float], Tuple[np.ndarray, np.ndarray]]:
        c, w = np.asarray(self.x_center), np.asarray(self.x_width)
        return (self.t_center - self.t_width, self.t_center + self.t_width), (c - w, c + w)

    def integral(self) -> float:
        """∫ψ dt dx as a product of one-dimensional integrals."""
        return self.amplitude * self.t_width * math.prod(self.x_width) * bump_integral() ** (self.d + 1)

    def describe(self) -> str:
        return f"bump(t={self.t_center:g}±{self.t_width:g}, x={self.x_center}±{self.x_width}, amp={self.amplitude:g})"
