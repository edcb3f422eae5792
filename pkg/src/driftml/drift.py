"""Fast Hoeffding drift detection over a boolean correctness stream.

The detector keeps a FIFO window of the last ``n`` prediction-correctness
flags plus the maximum windowed correct-rate observed since the last reset.
Drift is signaled once the current windowed rate falls at least
``epsilon = sqrt(ln(1/delta) / (2 n))`` below that maximum. No signal can
occur before the window has filled.

The step function is pure: state is an immutable value, each step returns a
new state plus a signal, so detector histories can be replayed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

DEFAULT_WINDOW = 25
DEFAULT_DELTA = 1e-7


def hoeffding_epsilon(n: int, delta: float) -> float:
    """Drop threshold for window size ``n`` and confidence ``delta``."""
    return math.sqrt(math.log(1.0 / delta) / (2.0 * n))


@dataclass(frozen=True)
class DriftSignal:
    drift: bool
    at_instance: Optional[int] = None


@dataclass(frozen=True)
class FhddmState:
    n: int = DEFAULT_WINDOW
    delta: float = DEFAULT_DELTA
    window: tuple[bool, ...] = ()
    mu_max: float = 0.0
    seen: int = 0  # observations consumed since last reset

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("window capacity must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if len(self.window) > self.n:
            raise ValueError("window longer than capacity")

    @property
    def epsilon(self) -> float:
        return hoeffding_epsilon(self.n, self.delta)


def fhddm_step(state: FhddmState, correct: bool) -> tuple[FhddmState, DriftSignal]:
    """Push one correctness flag; report drift when the windowed rate drops.

    The window must be full before any comparison happens, so the first
    ``n`` observations after a reset can never trigger.
    """
    window = (state.window + (bool(correct),))[-state.n :]
    seen = state.seen + 1
    if len(window) < state.n:
        new = FhddmState(state.n, state.delta, window, state.mu_max, seen)
        return new, DriftSignal(False)
    mu = sum(window) / state.n
    mu_max = mu if mu > state.mu_max else state.mu_max
    drift = (mu_max - mu) >= state.epsilon
    new = FhddmState(state.n, state.delta, window, mu_max, seen)
    return new, DriftSignal(drift, seen if drift else None)


def fhddm_reset(state: FhddmState) -> FhddmState:
    """Fresh state with the same (n, delta): empty window, mu_max back to 0."""
    return FhddmState(state.n, state.delta)
