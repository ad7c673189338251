"""The associated random walk and its hitting time below a moving threshold.

The walk sums the model's log-scale increments.  For an initial couple
count ``N`` and moment parameter ``beta > 1`` the hitting threshold is

    threshold = ln^gamma(N) - ln(N),    gamma = 2 / (1 + beta) < 1,

with ``ln^gamma(N)`` computed as ``exp(gamma * ln ln N)`` (so ``N >= 3``
is required to keep ``ln ln N`` well defined).  The hitting step is the
least ``n >= 1`` with the walk at or below the threshold; runs that do
not hit within ``max_steps`` are censored, which is a reported value
rather than an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Union

import numpy as np

from .errors import ConfigurationError
from .model import EnvironmentModel, MatingRule, OffspringModel, walk_increments

__all__ = [
    "WalkState",
    "walk_step",
    "HittingSpec",
    "HittingResult",
    "hitting_time",
    "model_increment_source",
    "ThetaDistribution",
    "theta_distribution",
]


@dataclass(frozen=True)
class WalkState:
    """Value object for the running walk; history records (n, increment, sum)."""

    n: int = 0
    S: float = 0.0
    history: Optional[tuple] = None

    @classmethod
    def start(cls, record_history: bool = False) -> "WalkState":
        return cls(n=0, S=0.0, history=() if record_history else None)


def walk_step(state: WalkState, xi_value: float) -> WalkState:
    """Advance the walk by one increment, returning a new state."""
    n = state.n + 1
    s = state.S + xi_value
    history = None if state.history is None else state.history + ((n, xi_value, s),)
    return WalkState(n=n, S=s, history=history)


@dataclass(frozen=True)
class HittingSpec:
    """Threshold geometry for the hitting time of the walk.

    ``max_steps`` defaults to ``ceil(50 * ln^2 N)``; note the limit law
    itself is heavy tailed, so for sigma near 0.5 roughly a fifth of the
    limit mass lies beyond any affordable cap and censoring must be
    accounted for downstream rather than assumed negligible.
    """

    n0: int
    beta: float = 3.0
    max_steps: Optional[int] = None

    def __post_init__(self):
        if self.n0 < 3:
            raise ConfigurationError(f"hitting threshold needs n0 >= 3, got {self.n0}")
        if not self.beta > 1.0:
            raise ConfigurationError(f"beta must exceed 1, got {self.beta}")
        if self.max_steps is None:
            object.__setattr__(self, "max_steps", int(math.ceil(50.0 * math.log(self.n0) ** 2)))
        if self.max_steps < 1:
            raise ConfigurationError(f"max_steps must be >= 1, got {self.max_steps}")

    @property
    def gamma(self) -> float:
        return 2.0 / (1.0 + self.beta)

    @property
    def log_n0(self) -> float:
        return math.log(self.n0)

    @property
    def log2_n0(self) -> float:
        return math.log(self.n0) ** 2

    @property
    def threshold(self) -> float:
        ln = math.log(self.n0)
        return math.exp(self.gamma * math.log(ln)) - ln


@dataclass(frozen=True)
class HittingResult:
    """Hitting step (None when censored), the walk value and final increment there."""

    theta: Optional[int]
    S_theta: float
    xi_theta: float
    steps_run: int

    @property
    def censored(self) -> bool:
        return self.theta is None


IncrementSource = Union[Iterable[float], Callable[[int], np.ndarray]]


def hitting_time(spec: HittingSpec, increments: IncrementSource, block: int = 1024) -> HittingResult:
    """First step at or below the threshold, scanning increments in blocks.

    ``increments`` is either an iterable of floats or a callable
    ``draw(k) -> ndarray`` producing the next ``k`` increments.
    """
    if callable(increments):
        draw = increments
    else:
        it = iter(increments)

        def draw(k: int) -> np.ndarray:
            return np.fromiter(it, dtype=float, count=k)

    thr = spec.threshold
    s = 0.0
    done = 0
    while done < spec.max_steps:
        k = min(block, spec.max_steps - done)
        xs = np.asarray(draw(k), dtype=float)
        if xs.size != k:
            raise ValueError("increment source exhausted before max_steps")
        cums = s + np.cumsum(xs)
        hit = cums <= thr
        if hit.any():
            j = int(hit.argmax())
            return HittingResult(
                theta=done + j + 1,
                S_theta=float(cums[j]),
                xi_theta=float(xs[j]),
                steps_run=done + j + 1,
            )
        s = float(cums[-1])
        done += k
    return HittingResult(theta=None, S_theta=s, xi_theta=math.nan, steps_run=spec.max_steps)


def model_increment_source(
    rule: MatingRule,
    env_model: EnvironmentModel,
    offspring_model: OffspringModel,
    stream: np.random.Generator,
) -> Callable[[int], np.ndarray]:
    """Block source of walk increments driven by fresh environment draws."""

    def draw(k: int) -> np.ndarray:
        eta = np.asarray(env_model.sample(stream, size=k), dtype=float)
        return walk_increments(rule, offspring_model, eta)

    return draw


@dataclass(frozen=True)
class ThetaDistribution:
    """Scaled hitting-time sample; censored replicates counted separately."""

    n0: int
    replicates: int
    samples_scaled: np.ndarray = field(repr=False)
    censored: int = 0

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.replicates


def theta_distribution(
    spec: HittingSpec,
    env_model: EnvironmentModel,
    offspring_model: OffspringModel,
    rule: MatingRule,
    replicates: int,
    stream: np.random.Generator,
) -> ThetaDistribution:
    """I.i.d. hitting times scaled by ln^2 N over independent walks.

    Each replicate runs on its own child stream, so the sample set does
    not depend on evaluation order.
    """
    if replicates < 1:
        raise ConfigurationError(f"replicates must be >= 1, got {replicates}")
    scale = spec.log2_n0
    out = []
    censored = 0
    for child in stream.spawn(replicates):
        res = hitting_time(spec, model_increment_source(rule, env_model, offspring_model, child))
        if res.censored:
            censored += 1
        else:
            out.append(res.theta / scale)
    return ThetaDistribution(
        n0=spec.n0,
        replicates=replicates,
        samples_scaled=np.asarray(sorted(out), dtype=float),
        censored=censored,
    )
