"""Mean-field dynamics ``dphi/dt = p(phi) - phi`` on the simplex.

Besides a fixed-step RK4 integrator this module exposes the exact decay
law of power-law markets: for every pair of items,

    H_ij(t) = phi_i**(1-r) / qbar_i - phi_j**(1-r) / qbar_j

satisfies ``H_ij(t) = exp((r - 1) t) * H_ij(0)``, which makes a convenient
oracle for checking the integrator.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, SingularityError, StepSizeError
from .model import MarketSpec, Ranking, effective_quality, purchase_probabilities
from .signals import Power, SignalSpec

__all__ = ["OdeTrajectory", "vector_field", "integrate", "decay_residual"]

# Clamp used for r < 1 so the state never touches the singular boundary.
INTERIOR_FLOOR = 1e-14
LEAK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class OdeTrajectory:
    times: np.ndarray
    states: np.ndarray
    h: float
    max_mass_error: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        n = self.states.shape[1]
        writer.writerow(["t"] + [f"phi_{i + 1}" for i in range(n)])
        for t, row in zip(self.times.tolist(), self.states.tolist()):
            writer.writerow([repr(t)] + [repr(x) for x in row])
        return buf.getvalue()


def vector_field(
    spec: MarketSpec, rank: Ranking | None, sig: SignalSpec, shares: np.ndarray
) -> np.ndarray:
    shares = np.asarray(shares, dtype=float)
    return purchase_probabilities(spec, rank, sig, shares) - shares


def integrate(
    spec: MarketSpec,
    rank: Ranking | None,
    sig: SignalSpec,
    phi0: np.ndarray,
    t_end: float,
    h: float,
) -> OdeTrajectory:
    """Classical RK4 with renormalisation onto the simplex after each step.

    The field is tangent to the simplex, so renormalising only removes
    O(h^5) drift.  The largest pre-renormalisation mass error is kept on
    the trajectory.
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    phi = np.asarray(phi0, dtype=float).copy()
    if phi.shape != (spec.n,) or np.any(phi <= 0) or abs(phi.sum() - 1.0) > 1e-9:
        raise PreconditionError("phi0 must be a strictly interior point of the simplex")
    phi /= phi.sum()

    qbar = effective_quality(spec, rank)
    if isinstance(sig, Power):
        r = sig.r

        def field(x: np.ndarray) -> np.ndarray:
            w = qbar * np.power(x, r)
            return w / w.sum() - x

        floor = INTERIOR_FLOOR if r < 1 else 0.0
    else:

        def field(x: np.ndarray) -> np.ndarray:
            return vector_field(spec, rank, sig, x)

        floor = 0.0

    steps = int(round(t_end / h))
    times = np.arange(steps + 1) * h
    states = np.empty((steps + 1, spec.n))
    states[0] = phi
    max_mass_error = 0.0
    for k in range(steps):
        k1 = field(phi)
        k2 = field(phi + 0.5 * h * k1)
        k3 = field(phi + 0.5 * h * k2)
        k4 = field(phi + h * k3)
        nxt = phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.any(nxt < -LEAK_TOL) or np.any(nxt > 1.0 + LEAK_TOL) or not np.all(np.isfinite(nxt)):
            raise StepSizeError(f"state left [0, 1] at t={times[k + 1]:.6g}; reduce h")
        total = nxt.sum()
        max_mass_error = max(max_mass_error, abs(total - 1.0))
        nxt = np.maximum(nxt, floor)
        phi = nxt / nxt.sum()
        states[k + 1] = phi
    return OdeTrajectory(times, states, float(h), max_mass_error)


def decay_residual(
    trajectory: OdeTrajectory,
    spec: MarketSpec,
    rank: Ranking | None,
    r: float,
    i: int,
    j: int,
) -> float:
    """Largest deviation of ``H_ij(t)`` from ``exp((r-1)t) H_ij(0)``."""
    phi_i = trajectory.states[:, i]
    phi_j = trajectory.states[:, j]
    if np.any(phi_i <= 0) or np.any(phi_j <= 0):
        raise SingularityError("trajectory touches the boundary; H_ij is undefined")
    qbar = effective_quality(spec, rank)
    H = phi_i ** (1.0 - r) / qbar[i] - phi_j ** (1.0 - r) / qbar[j]
    predicted = np.exp((r - 1.0) * trajectory.times) * H[0]
    return float(np.max(np.abs(H - predicted)))
