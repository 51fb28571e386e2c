"""Problem parameters, characteristic roots and regime classification."""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from enum import Enum


class ParameterError(ValueError):
    """Raised when model parameters are outside their admissible range."""


@dataclass(frozen=True)
class ModelParams:
    """Diffusion surplus model with mean-variance risk aversion.

    Attributes:
        a: Surplus drift.
        b: Surplus volatility.
        rho: Discount rate.
        gamma: Risk aversion on the variance of discounted dividends.
    """

    a: float
    b: float
    rho: float
    gamma: float = 0.0

    def __post_init__(self) -> None:
        for name in ("a", "b", "rho", "gamma"):
            value = getattr(self, name)
            real = isinstance(value, numbers.Real) and not isinstance(value, bool)
            if not real or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.a <= 0:
            raise ParameterError(f"a must be > 0, got {self.a}")
        if self.b <= 0:
            raise ParameterError(f"b must be > 0, got {self.b}")
        if self.rho <= 0:
            raise ParameterError(f"rho must be > 0, got {self.rho}")
        if self.gamma < 0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")

    @property
    def pay_all_threshold(self) -> float:
        """Risk aversion 2a/b^2 above which paying everything is an equilibrium."""
        return 2.0 * self.a / self.b**2

    def with_(self, **changes: float) -> "ModelParams":
        values = {"a": self.a, "b": self.b, "rho": self.rho, "gamma": self.gamma}
        values.update(changes)
        return ModelParams(**values)

    def as_dict(self) -> dict[str, float]:
        return {"a": self.a, "b": self.b, "rho": self.rho, "gamma": self.gamma}


@dataclass(frozen=True)
class CharacteristicRoots:
    """Exponents of the homogeneous ODEs for the first and second moments.

    ``r1, r2`` solve ``b^2 r^2 / 2 + a r - rho = 0`` and ``r3, r4`` solve
    ``b^2 r^2 / 2 + a r - 2 rho = 0``; the first of each pair is positive.
    """

    r1: float
    r2: float
    r3: float
    r4: float


class RegimeTag(str, Enum):
    PAY_ALL = "PayAll"
    BARRIER_CANDIDATE = "BarrierCandidate"


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    threshold: float


def characteristic_roots(params: ModelParams) -> CharacteristicRoots:
    a, b2, rho = params.a, params.b**2, params.rho
    s12 = math.sqrt(a * a + 2.0 * rho * b2)
    s34 = math.sqrt(a * a + 4.0 * rho * b2)
    # (-a + s)/b^2 rewritten as 2*rho/(a + s) to avoid cancellation when a^2 >> rho*b^2
    return CharacteristicRoots(
        r1=2.0 * rho / (a + s12),
        r2=-(a + s12) / b2,
        r3=4.0 * rho / (a + s34),
        r4=-(a + s34) / b2,
    )


def classify_regime(params: ModelParams) -> Regime:
    threshold = params.pay_all_threshold
    tag = RegimeTag.PAY_ALL if params.gamma >= threshold else RegimeTag.BARRIER_CANDIDATE
    return Regime(tag=tag, threshold=threshold)


class RegimeMismatch(ValueError):
    """Operation requested outside the risk-aversion regime it applies to."""
