"""Buoyancy source functions F = (F1, F2) with closed-form derivatives."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

__all__ = ["ScalarMap", "PolynomialMap", "SineMap", "XCosMap", "SourceFunction", "MAX_ORDER"]

MAX_ORDER = 5


class ScalarMap:
    """Smooth map R -> R with derivatives up to :data:`MAX_ORDER`."""

    def __call__(self, x, order: int = 0):
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"derivative order {order} outside [0, {MAX_ORDER}]")
        return self._eval(np.asarray(x, dtype=float), order)

    def _eval(self, x, order):  # pragma: no cover - abstract
        raise NotImplementedError

    def describe(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class PolynomialMap(ScalarMap):
    """sum_j coeffs[j] x^j."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs) or (0.0,))

    def _eval(self, x, order):
        poly = Polynomial(self.coeffs)
        if order:
            poly = poly.deriv(order)
        return poly(x)

    def describe(self):
        return {"kind": "polynomial", "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class SineMap(ScalarMap):
    """sin(x)."""

    def _eval(self, x, order):
        return np.sin(x + order * math.pi / 2)

    def describe(self):
        return {"kind": "sin"}


@dataclass(frozen=True)
class XCosMap(ScalarMap):
    """x cos(x); the m-th derivative is x cos(x + m pi/2) + m cos(x + (m-1) pi/2)."""

    def _eval(self, x, order):
        out = x * np.cos(x + order * math.pi / 2)
        if order:
            out = out + order * np.cos(x + (order - 1) * math.pi / 2)
        return out

    def describe(self):
        return {"kind": "xcos"}


@dataclass(frozen=True)
class SourceFunction:
    """Vector source F(theta) = (F1(theta), F2(theta)) with F(0) = 0."""

    F1: ScalarMap
    F2: ScalarMap
    name: str = "custom"

    def __post_init__(self):
        for label, comp in (("F1", self.F1), ("F2", self.F2)):
            v = float(comp(0.0))
            if v != 0.0:
                raise ValueError(f"{label}(0) = {v}; sources must vanish at zero")

    @classmethod
    def linear(cls) -> "SourceFunction":
        """The classical buoyancy F = (0, theta)."""
        return cls(PolynomialMap((0.0,)), PolynomialMap((0.0, 1.0)), "linear")

    @classmethod
    def cubic(cls) -> "SourceFunction":
        """F = (theta^3 / 6, theta)."""
        return cls(PolynomialMap((0.0, 0.0, 0.0, 1.0 / 6.0)), PolynomialMap((0.0, 1.0)), "cubic")

    @classmethod
    def sine(cls) -> "SourceFunction":
        """F = (sin theta, theta cos theta)."""
        return cls(SineMap(), XCosMap(), "sine")

    @classmethod
    def polynomial(cls, c1: Sequence[float], c2: Sequence[float]) -> "SourceFunction":
        return cls(PolynomialMap(tuple(c1)), PolynomialMap(tuple(c2)), "polynomial")

    @classmethod
    def from_name(cls, name: str, coeffs1=None, coeffs2=None) -> "SourceFunction":
        if name == "polynomial":
            return cls.polynomial(coeffs1 or (0.0,), coeffs2 or (0.0,))
        presets = {"linear": cls.linear, "cubic": cls.cubic, "sine": cls.sine}
        if name not in presets:
            raise ValueError(f"unknown source {name!r}; choose from {sorted(presets) + ['polynomial']}")
        return presets[name]()

    def evaluate(self, theta: np.ndarray, order: int = 0) -> tuple[np.ndarray, np.ndarray]:
        return self.F1(theta, order), self.F2(theta, order)

    def sup_derivative(self, order: int, radius: float, samples: int = 2001) -> float:
        """max over |x| <= radius of max(|F1^(order)|, |F2^(order)|), by dense sampling."""
        x = np.linspace(-radius, radius, samples)
        return float(max(np.max(np.abs(self.F1(x, order))), np.max(np.abs(self.F2(x, order)))))

    def lipschitz(self, radius: float) -> float:
        return self.sup_derivative(1, radius)

    def describe(self) -> dict:
        return {"name": self.name, "F1": self.F1.describe(), "F2": self.F2.describe()}
