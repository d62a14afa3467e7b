"""Single-arm model: parameters, belief maps and expected rewards.

An arm has two hidden states (0 is the "bad" state under the usual reward
ordering) and a binary availability flag ``y``. Beliefs are the posterior
probability that the arm sits in state 0.

All update functions accept scalars or numpy arrays of beliefs.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DegenerateObservation

ArrayLike = Union[float, np.ndarray]

CLAMP_EPS = 1e-12


class Kind(str, enum.Enum):
    RESTED = "rested"
    RESTLESS = "restless"


def _theta_tuple(theta) -> tuple[tuple[float, float], tuple[float, float]]:
    rows = tuple(tuple(float(v) for v in row) for row in theta)
    if len(rows) != 2 or any(len(r) != 2 for r in rows):
        raise ValueError("theta must be a 2x2 table indexed [action][availability]")
    return rows  # type: ignore[return-value]


@dataclass(frozen=True)
class ArmParams:
    """Parameters of one arm.

    ``theta[a][y]`` is the probability that the arm is available in the next
    slot after action ``a`` (1 = play) taken while availability was ``y``.
    """

    mu0: float
    mu1: float
    r0: float
    r1: float
    eta0: float
    eta1: float
    theta: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 1.0), (1.0, 1.0))
    kind: Kind = Kind.RESTED

    def __post_init__(self):
        object.__setattr__(self, "theta", _theta_tuple(self.theta))
        object.__setattr__(self, "kind", Kind(self.kind))
        for name in ("mu0", "mu1", "r0", "r1", "eta0", "eta1"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def with_availability(cls, *, play_avail: float, play_unavail: float,
                          rest_avail: float, rest_unavail: float = 0.0, **kw) -> "ArmParams":
        """Build from the four availability probabilities by name."""
        theta = ((rest_unavail, rest_avail), (play_unavail, play_avail))
        return cls(theta=theta, **kw)

    def avail_prob(self, a: int, y: int) -> float:
        return self.theta[a][y]

    @property
    def max_reward(self) -> float:
        return max(self.r0, self.r1, self.eta0, self.eta1)

    @property
    def min_reward(self) -> float:
        return min(self.r0, self.r1, self.eta0, self.eta1)

    def to_dict(self) -> dict:
        return {
            "mu0": self.mu0, "mu1": self.mu1, "r0": self.r0, "r1": self.r1,
            "eta0": self.eta0, "eta1": self.eta1,
            "theta": [list(self.theta[0]), list(self.theta[1])],
            "kind": self.kind.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArmParams":
        return cls(**{k: d[k] for k in ("mu0", "mu1", "r0", "r1", "eta0", "eta1")},
                   theta=d.get("theta", ((0.0, 1.0), (1.0, 1.0))),
                   kind=d.get("kind", Kind.RESTED))


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


def validate(params: ArmParams, strict_ordering: bool = False) -> list[Violation]:
    """Return every violated bound; an empty list means the arm is valid."""
    out: list[Violation] = []
    for name in ("mu0", "mu1", "r0", "r1", "eta0", "eta1"):
        v = getattr(params, name)
        if not (0.0 <= v <= 1.0) or np.isnan(v):
            out.append(Violation(name, f"{v!r} not in [0, 1]"))
    for a in (0, 1):
        for y in (0, 1):
            v = params.theta[a][y]
            if not (0.0 <= v <= 1.0) or np.isnan(v):
                out.append(Violation(f"theta[{a}][{y}]", f"{v!r} not in [0, 1]"))
    if strict_ordering:
        chain = [("eta0", params.eta0), ("r0", params.r0), ("eta1", params.eta1), ("r1", params.r1)]
        for (lo_name, lo), (hi_name, hi) in zip(chain, chain[1:]):
            if not lo < hi:
                out.append(Violation(f"{lo_name},{hi_name}",
                                     f"{lo_name} < {hi_name} fails ({lo!r} >= {hi!r})"))
    return out


def _clamp(x: ArrayLike) -> ArrayLike:
    if np.ndim(x) == 0:
        x = float(x)
        if -CLAMP_EPS <= x < 0.0:
            return 0.0
        if 1.0 < x <= 1.0 + CLAMP_EPS:
            return 1.0
        return x
    x = np.asarray(x, dtype=float)
    return np.where((x < 0.0) & (x >= -CLAMP_EPS), 0.0,
                    np.where((x > 1.0) & (x <= 1.0 + CLAMP_EPS), 1.0, x))


def success_prob(params: ArmParams, pi: ArrayLike) -> ArrayLike:
    """P(z = 1 | belief pi); the same for either availability."""
    return pi * params.r0 + (1.0 - pi) * params.r1


def predict(params: ArmParams, pi: ArrayLike) -> ArrayLike:
    """One-step predicted belief pi*mu0 + (1-pi)*mu1."""
    return _clamp(pi * params.mu0 + (1.0 - pi) * params.mu1)


def bayes_transition(params: ArmParams, pi: ArrayLike, z: int) -> tuple[ArrayLike, ArrayLike]:
    """Return ``(numerator, denominator)`` of the played-and-available update."""
    if z == 1:
        q0, q1 = params.r0, params.r1
    else:
        q0, q1 = 1.0 - params.r0, 1.0 - params.r1
    num = pi * q0 * params.mu0 + (1.0 - pi) * q1 * params.mu1
    den = pi * q0 + (1.0 - pi) * q1
    return num, den


def gamma_update(params: ArmParams, pi: ArrayLike, z: int, y: int) -> ArrayLike:
    """Belief after playing the arm with availability ``y`` and observing ``z``.

    Raises DegenerateObservation if the observation has probability zero
    under ``pi``.
    """
    if y == 0 and params.kind is Kind.RESTED:
        return _clamp(pi)
    num, den = bayes_transition(params, pi, z)
    if np.any(np.asarray(den) <= 0.0):
        raise DegenerateObservation(f"P(z={z} | pi) is zero; posterior undefined")
    return _clamp(num / den)


def big_gamma_update(params: ArmParams, pi: ArrayLike, y: int) -> ArrayLike:
    """Belief after not playing the arm with availability ``y``."""
    if y == 0 or params.kind is Kind.RESTED:
        return _clamp(pi)
    return predict(params, pi)


def expected_play_reward(params: ArmParams, pi: ArrayLike, y: int) -> ArrayLike:
    """Immediate expected reward of playing; also the myopic score."""
    if y == 1:
        return pi * params.r0 + (1.0 - pi) * params.r1
    return pi * params.eta0 + (1.0 - pi) * params.eta1


def state_reward(params: ArmParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Realised play reward for hidden state ``x`` and availability ``y``."""
    avail = np.where(x == 0, params.r0, params.r1)
    unavail = np.where(x == 0, params.eta0, params.eta1)
    return np.where(y == 1, avail, unavail)


def rested_assumptions_hold(params: ArmParams) -> bool:
    """Rested dynamics with an unavailable resting arm staying unavailable."""
    return params.kind is Kind.RESTED and params.theta[0][0] == 0.0
