"""Discrete Markov chain for a 1D walk derived from the Gaussian propagator.

One step of duration dt moves a Brownian particle (variance 2*D*dt) and the
landing point is binned into the current cell or one of its neighbours.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf


class RightBoundary(enum.Enum):
    ABSORBING = "absorbing"
    REFLECTING = "reflecting"


def transition_probabilities(dx: float, dt: float, d: float = 1.0) -> tuple[float, float]:
    """(ps, pg): mass of N(0, 2*d*dt) inside (-dx/2, dx/2) and below -dx/2."""
    if not (dx > 0 and dt > 0 and d > 0):
        raise ValueError("dx, dt and d must be positive")
    ps = erf(dx / (2.0 * math.sqrt(4.0 * d * dt)))
    return ps, 0.5 * (1.0 - ps)


@dataclass(frozen=True)
class MarkovChain1D:
    """Positions X_i = i*dx for i = 0..n-1.

    Position 0 stays with ps and moves right with 2*pg. The last position is
    either absorbing or the mirror image of position 0.
    """

    n: int
    dx: float
    dt: float
    ps: float
    pg: float
    right_boundary: RightBoundary = RightBoundary.ABSORBING
    d: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("chain needs at least one position")
        if not (0 < self.ps < 1 and 0 < self.pg < 1):
            raise ValueError("ps and pg must lie in (0, 1)")
        if abs(self.ps + 2 * self.pg - 1) > 1e-12:
            raise ValueError("ps + 2*pg must equal 1")

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @property
    def absorbing(self) -> int | None:
        return self.n - 1 if self.right_boundary is RightBoundary.ABSORBING else None

    def probability_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-position (left, stay, right) probabilities."""
        pl = np.full(self.n, self.pg)
        pr = np.full(self.n, self.pg)
        ps = np.full(self.n, self.ps)
        pl[0], pr[0] = 0.0, 2 * self.pg
        last = self.n - 1
        if self.right_boundary is RightBoundary.ABSORBING:
            pl[last], ps[last], pr[last] = 0.0, 1.0, 0.0
        elif last > 0:
            pl[last], pr[last] = 2 * self.pg, 0.0
        else:
            ps[0], pr[0] = 1.0, 0.0
        return pl, ps, pr

    def transition_matrix(self) -> np.ndarray:
        return table_to_matrix(*self.probability_table())

    def summary(self) -> dict:
        return {
            "n": self.n,
            "dx": self.dx,
            "dt": self.dt,
            "d": self.d,
            "ps": self.ps,
            "pg": self.pg,
            "left_boundary": "reflect_double",
            "right_boundary": self.right_boundary.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


def table_to_matrix(pl, ps, pr) -> np.ndarray:
    n = len(ps)
    P = np.diag(np.asarray(ps, dtype=float))
    idx = np.arange(n)
    P[idx[1:], idx[1:] - 1] = pl[1:]
    P[idx[:-1], idx[:-1] + 1] = pr[:-1]
    return P


def build_chain(l: float, n: int, dt: float, right_boundary=RightBoundary.ABSORBING, d: float = 1.0) -> MarkovChain1D:
    if n < 2 or not l > 0 or not dt > 0:
        raise ValueError("build_chain needs n >= 2, l > 0, dt > 0")
    dx = l / n
    ps, pg = transition_probabilities(dx, dt, d)
    return MarkovChain1D(n, dx, dt, ps, pg, RightBoundary(right_boundary), d)


def step_moments(chain: MarkovChain1D) -> tuple[float, float]:
    """Mean and variance of one interior step, in length units."""
    return 0.0, 2 * chain.pg * chain.dx**2
