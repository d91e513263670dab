import logging
import math
from enum import Enum
from typing import Dict, Protocol

from pydantic import BaseModel, ConfigDict, Field, field_validator

from fedcluster.util.seeding import stream

logger = logging.getLogger(__name__)

RATIO_GUARD = 1e-12


class ControllerMode(str, Enum):
    TCP = "TCP"
    SA = "SA"
    EXP = "EXP"


class ControllerConfig(BaseModel):
    """
    Parameters:
        n: Total number of clients, the upper bound of p.
        w: Loss-reduction threshold; a round improves when its ratio exceeds w.
        hold_rounds: Rounds p stays frozen after an increase.
        mode: TCP, SA (annealed keep probability) or EXP (experience-based keep probability).
        sa_temperature: Temperature T of the SA keep probability exp(-stall / T).
        seed: Seed of the controller's random stream.
    """

    model_config = ConfigDict(extra="forbid")

    n: int = Field(..., ge=2)
    w: float = Field(default=0.01, ge=0)
    hold_rounds: int = Field(default=5, ge=0)
    mode: ControllerMode = ControllerMode.TCP
    sa_temperature: float = Field(default=10.0, gt=0)
    seed: int = 0


class Experience(BaseModel):
    good: int = Field(default=0, ge=0)
    bad: int = Field(default=0, ge=0)

    @property
    def keep_probability(self) -> float:
        # Laplace smoothing keeps this strictly inside (0, 1)
        return (self.good + 1) / (self.good + self.bad + 2)


class ControllerState(BaseModel):
    p: int = Field(..., ge=1)
    d: int = Field(default=1, ge=1)
    hold_remaining: int = Field(default=0, ge=0)
    stall: int = Field(default=0, ge=0)
    experience: Dict[int, Experience] = Field(default_factory=dict)

    @classmethod
    def initial(cls, cfg: ControllerConfig) -> "ControllerState":
        return cls(p=cfg.n, d=1)


class LossSignal(BaseModel):
    L_prev: float
    L_cur: float

    @field_validator("L_prev", "L_cur")
    @classmethod
    def validate_finite(cls, value):
        if not math.isfinite(value):
            raise ValueError(f"Loss must be finite, got {value}")
        return value


class RandomSource(Protocol):
    def random(self) -> float: ...


def reduction_ratio(sig: LossSignal) -> float:
    """(L_prev - L_cur) / |L_prev|, or 0 when L_prev is (numerically) zero."""
    if abs(sig.L_prev) < RATIO_GUARD:
        return 0.0
    return (sig.L_prev - sig.L_cur) / abs(sig.L_prev)


def step(
    state: ControllerState, cfg: ControllerConfig, r: float, rng: RandomSource
) -> tuple[ControllerState, int]:
    """
    Advances the cluster-count controller by one round.

    An improving round (r > w) lowers p by d and doubles d. A non-improving round resets
    d and, in TCP mode, doubles p (capped at n) and starts a hold period. SA and EXP first
    draw against a keep probability and leave p unchanged on success. During a hold
    period p, d and stall are frozen but experience is still recorded.

    Returns:
        tuple: The new state and the cluster count for the next round.
    """
    if not math.isfinite(r):
        raise ValueError(f"Reduction ratio must be finite, got {r}")

    s = state.model_copy(deep=True)
    improving = r > cfg.w
    bucket = s.experience.setdefault(s.p, Experience())

    if s.hold_remaining > 0:
        s.hold_remaining -= 1
        if improving:
            bucket.good += 1
        else:
            bucket.bad += 1
        return s, s.p

    if improving:
        bucket.good += 1
        new_p = max(1, s.p - s.d)
        s.d = min(2 * s.d, cfg.n)
        s.stall = 0
    else:
        keep_probability = None
        if cfg.mode == ControllerMode.EXP:
            keep_probability = bucket.keep_probability
        bucket.bad += 1
        s.stall += 1
        if cfg.mode == ControllerMode.SA:
            keep_probability = math.exp(-s.stall / cfg.sa_temperature)

        s.d = 1
        if keep_probability is not None and rng.random() < keep_probability:
            new_p = s.p
        else:
            new_p = min(2 * s.p, cfg.n)
            s.hold_remaining = cfg.hold_rounds

    if new_p != s.p:
        s.stall = 0
    s.p = new_p
    return s, new_p


class AdaptiveController:
    """Owns a controller state and its random stream; the engine calls `update` once per round."""

    def __init__(self, cfg: ControllerConfig):
        self.cfg = cfg
        self.state = ControllerState.initial(cfg)
        self.rng = stream(cfg.seed, "controller")

    @property
    def p(self) -> int:
        return self.state.p

    def update(self, r: float) -> int:
        previous = self.state.p
        self.state, p = step(self.state, self.cfg, r, self.rng)
        if p != previous:
            logger.debug(f"p {previous} -> {p} (r={r:.4f}, d={self.state.d})")
        return p
