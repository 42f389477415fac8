"""Social-signal families f and their derivatives.

Two families are supported:

* :class:`Power` -- ``f(x) = x**r``.  This is the family the dynamics and
  equilibrium results are about.
* :class:`Affine` -- ``f_i(x) = beta * x + alpha * a_i``, the appeal-blended
  signal of the original MusicLab generative model.  With ``beta = 0`` it
  is the "no social signal" market.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, InvalidSignalError

__all__ = [
    "Power",
    "Affine",
    "SignalSpec",
    "SignalEval",
    "eval_signal",
    "signal_values",
]


@dataclass(frozen=True)
class Power:
    r: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.r) and self.r > 0):
            raise InvalidSignalError("signal exponent must be positive")


@dataclass(frozen=True)
class Affine:
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise InvalidSignalError("affine signal parameters must be finite")
        if self.alpha < 0 or self.beta < 0:
            raise InvalidSignalError("affine signal parameters must be nonnegative")
        if self.alpha == 0 and self.beta == 0:
            raise InvalidSignalError("affine signal needs alpha > 0 or beta > 0")


SignalSpec = Union[Power, Affine]


@dataclass(frozen=True)
class SignalEval:
    """Value and derivative of f at one point.

    ``singular`` is set when the derivative does not exist as a finite number
    (``x = 0`` with ``r < 1``); ``derivative`` is then ``nan``.
    """

    value: float
    derivative: float
    singular: bool = False


def eval_signal(sig: SignalSpec, appeal_i: float, x: float) -> SignalEval:
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"share {x!r} outside [0, 1]")
    if isinstance(sig, Power):
        r = sig.r
        if x == 0.0:
            if r < 1:
                return SignalEval(0.0, math.nan, singular=True)
            return SignalEval(0.0, 1.0 if r == 1 else 0.0)
        return SignalEval(x**r, r * x ** (r - 1.0))
    if isinstance(sig, Affine):
        return SignalEval(sig.beta * x + sig.alpha * appeal_i, sig.beta)
    raise InvalidSignalError(f"unknown signal variant {type(sig).__name__}")


def signal_values(sig: SignalSpec, appeal: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Vectorised f over all items.  ``0**r`` is 0 for every ``r > 0``."""
    x = np.asarray(x, dtype=float)
    if isinstance(sig, Power):
        # numpy already gives 0.0**r == 0.0 for r > 0
        return np.power(x, sig.r)
    if isinstance(sig, Affine):
        return sig.beta * x + sig.alpha * np.asarray(appeal, dtype=float)
    raise InvalidSignalError(f"unknown signal variant {type(sig).__name__}")
