"""Monte-Carlo simulation of N arms under index, myopic and random play.

Random numbers follow a fixed layout so that every policy sees the same
randomness (common random numbers) and so that a chunked, multi-process run
reproduces a serial one bit for bit:

* episode ``e`` owns the stream ``default_rng([seed, e])``;
* the stream starts with N uniforms for the initial hidden states, followed
  by one block of ``3N + 1`` uniforms per slot: observation draws, hidden
  transition draws, availability draws, and one draw for the random policy.
"""
from __future__ import annotations

import enum
import functools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import model
from .errors import EmptyExperiment
from .index import IndexTable, index_table
from .model import ArmParams, Kind
from .solver import SolverConfig

log = logging.getLogger(__name__)

TAIL_TOLERANCE = 1e-3
CHUNK_EPISODES = 500
Z95 = 1.959963984540054


class Policy(str, enum.Enum):
    INDEX = "index"
    MYOPIC = "myopic"
    RANDOM = "random"


@dataclass(frozen=True)
class SimConfig:
    arms: tuple[ArmParams, ...]
    beta: float
    initial_pi: tuple[float, ...]
    initial_y: tuple[int, ...]
    horizon: Optional[int] = None  # None = automatic
    episodes: int = 10_000
    seed: int = 0
    policies: tuple[Policy, ...] = (Policy.INDEX, Policy.MYOPIC)
    index_points: int = 101
    index_w_tolerance: float = 1e-3
    grid_points: int = 1001
    tolerance: float = 1e-9
    max_iterations: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        object.__setattr__(self, "initial_pi", tuple(float(p) for p in self.initial_pi))
        object.__setattr__(self, "initial_y", tuple(int(y) for y in self.initial_y))
        object.__setattr__(self, "policies", tuple(Policy(p) for p in self.policies))
        n = len(self.arms)
        if n == 0:
            raise ValueError("at least one arm is required")
        if len(self.initial_pi) != n or len(self.initial_y) != n:
            raise ValueError("initial_pi and initial_y must have one entry per arm")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.episodes < 0:
            raise ValueError("episodes must be non-negative")

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(beta=self.beta, grid_points=self.grid_points,
                            tolerance=self.tolerance, max_iterations=self.max_iterations)

    def resolved_horizon(self) -> int:
        if self.horizon is not None:
            return self.horizon
        return auto_horizon(self.beta, max(a.max_reward for a in self.arms))


def auto_horizon(beta: float, r_max: float, tail: float = TAIL_TOLERANCE) -> int:
    """Smallest T with beta^T * r_max / (1 - beta) < tail."""
    if r_max <= 0.0:
        return 1
    t = max(1, math.ceil(math.log(tail * (1.0 - beta) / r_max) / math.log(beta)))
    while beta ** t * r_max / (1.0 - beta) >= tail:
        t += 1
    while t > 1 and beta ** (t - 1) * r_max / (1.0 - beta) < tail:
        t -= 1
    return t


@dataclass(frozen=True)
class _Arms:
    """Per-arm parameters as (N,) arrays, broadcast against (E, N) state."""

    mu0: np.ndarray
    mu1: np.ndarray
    r0: np.ndarray
    r1: np.ndarray
    eta0: np.ndarray
    eta1: np.ndarray
    theta: np.ndarray  # (2, 2, N), [a][y]
    restless: np.ndarray

    @classmethod
    def of(cls, arms: Sequence[ArmParams]) -> "_Arms":
        col = lambda name: np.array([getattr(a, name) for a in arms])  # noqa: E731
        theta = np.array([[[a.theta[act][y] for a in arms] for y in (0, 1)] for act in (0, 1)])
        return cls(col("mu0"), col("mu1"), col("r0"), col("r1"), col("eta0"), col("eta1"),
                   theta, np.array([a.kind is Kind.RESTLESS for a in arms]))


# --- policies ---------------------------------------------------------------

class MyopicRule:
    policy = Policy.MYOPIC

    def scores(self, arms: _Arms, pi, y):
        return np.where(y == 1, pi * arms.r0 + (1.0 - pi) * arms.r1,
                        pi * arms.eta0 + (1.0 - pi) * arms.eta1)

    def choose(self, arms: _Arms, pi, y, u):
        return np.argmax(self.scores(arms, pi, y), axis=1)


@dataclass
class IndexRule:
    tables: Sequence[IndexTable]
    policy = Policy.INDEX

    def scores(self, arms: _Arms, pi, y):
        return np.stack([t.lookup(pi[:, n], y[:, n]) for n, t in enumerate(self.tables)], axis=1)

    def choose(self, arms: _Arms, pi, y, u):
        return np.argmax(self.scores(arms, pi, y), axis=1)


class RandomRule:
    policy = Policy.RANDOM

    def choose(self, arms: _Arms, pi, y, u):
        n = pi.shape[1]
        return np.minimum((u * n).astype(np.int64), n - 1)


# --- dynamics ---------------------------------------------------------------

@dataclass
class SimState:
    """Joint state of E episodes; arrays are (E, N) except ``acc``."""

    pi: np.ndarray
    x: np.ndarray
    y: np.ndarray
    acc: np.ndarray
    t: int = 1  # slot about to be played

    @classmethod
    def initial(cls, config: SimConfig, u0: np.ndarray) -> "SimState":
        pi = np.broadcast_to(np.asarray(config.initial_pi), u0.shape).astype(float)
        x = np.where(u0 < pi, 0, 1).astype(np.int8)
        y = np.broadcast_to(np.asarray(config.initial_y, dtype=np.int8), u0.shape).copy()
        return cls(pi, x, y, np.zeros(u0.shape[0]))


@dataclass
class SlotRecord:
    t: int
    arm: int
    x: list[int]
    y: list[int]
    pi: list[float]
    z: int
    reward: float
    acc: float


def _posterior(arms: _Arms, pi, z):
    q0 = np.where(z == 1, arms.r0, 1.0 - arms.r0)
    q1 = np.where(z == 1, arms.r1, 1.0 - arms.r1)
    num = pi * q0 * arms.mu0 + (1.0 - pi) * q1 * arms.mu1
    den = pi * q0 + (1.0 - pi) * q1
    return model._clamp(num / np.where(den > 0.0, den, 1.0))


def _advance(arms: _Arms, state: SimState, choice: np.ndarray, u: np.ndarray, beta: float):
    """Play ``choice`` (E,) using per-slot uniforms ``u`` (E, 3N+1)."""
    n = state.pi.shape[1]
    u_obs, u_move, u_avail = u[:, :n], u[:, n:2 * n], u[:, 2 * n:3 * n]
    played = np.arange(n)[None, :] == choice[:, None]
    x, y, pi = state.x, state.y, state.pi

    r_now = np.where(x == 0, arms.r0, arms.r1)
    reward_all = np.where(y == 1, r_now, np.where(x == 0, arms.eta0, arms.eta1))
    rows = np.arange(len(choice))
    reward = reward_all[rows, choice]
    z_all = (u_obs < r_now).astype(np.int8)
    z = z_all[rows, choice]

    moves = arms.restless | (played & (y == 1))
    stay0 = np.where(x == 0, arms.mu0, arms.mu1)
    x_next = np.where(moves, np.where(u_move < stay0, 0, 1), x).astype(np.int8)

    th = np.where(played, np.where(y == 1, arms.theta[1, 1], arms.theta[1, 0]),
                  np.where(y == 1, arms.theta[0, 1], arms.theta[0, 0]))
    y_next = (u_avail < th).astype(np.int8)

    frozen = (y == 0) | ~arms.restless
    post = _posterior(arms, pi, z_all)
    pred = model._clamp(pi * arms.mu0 + (1.0 - pi) * arms.mu1)
    played_pi = np.where(~arms.restless & (y == 0), pi, post)
    rest_pi = np.where(frozen, pi, pred)
    pi_next = np.where(played, played_pi, rest_pi)

    disc = beta ** (state.t - 1)
    acc = state.acc + disc * reward
    return SimState(pi_next, x_next, y_next, acc, state.t + 1), z, reward


def _slot_width(n: int) -> int:
    return 3 * n + 1


def step(state: SimState, rule, rng: np.random.Generator, arms: Sequence[ArmParams],
         beta: float) -> tuple[SimState, SlotRecord]:
    """Advance a single-episode state by one slot, drawing one uniform block."""
    a = _Arms.of(arms)
    n = len(arms)
    u = rng.random(_slot_width(n))[None, :]
    choice = rule.choose(a, state.pi, state.y, u[:, 3 * n])
    nxt, z, reward = _advance(a, state, choice, u, beta)
    rec = SlotRecord(state.t, int(choice[0]), state.x[0].tolist(), state.y[0].tolist(),
                     state.pi[0].tolist(), int(z[0]), float(reward[0]), float(nxt.acc[0]))
    return nxt, rec


# --- experiments ------------------------------------------------------------

@dataclass
class EpisodeTrace:
    episode: int
    policy: Policy
    beta: float
    slots: list[SlotRecord] = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.slots[-1].acc if self.slots else 0.0

    def to_jsonl(self) -> str:
        head = {"episode": self.episode, "policy": self.policy.value, "beta": self.beta}
        return "\n".join(json.dumps({**head, **asdict(s)}) for s in self.slots) + "\n"


def _episode_uniforms(seed: int, episodes: range, n: int, horizon: int) -> np.ndarray:
    width = n + horizon * _slot_width(n)
    out = np.empty((len(episodes), width))
    for i, e in enumerate(episodes):
        out[i] = np.random.default_rng([seed, e]).random(width)
    return out


def _make_rule(policy: Policy, tables: Optional[Sequence[IndexTable]]):
    if policy is Policy.INDEX:
        if tables is None:
            raise ValueError("index policy requires index tables")
        return IndexRule(tables)
    return MyopicRule() if policy is Policy.MYOPIC else RandomRule()


def _run_chunk(config: SimConfig, policy: Policy, tables, start: int, stop: int) -> np.ndarray:
    n = len(config.arms)
    horizon = config.resolved_horizon()
    arms = _Arms.of(config.arms)
    rule = _make_rule(policy, tables)
    u = _episode_uniforms(config.seed, range(start, stop), n, horizon)
    state = SimState.initial(config, u[:, :n])
    w = _slot_width(n)
    for t in range(horizon):
        block = u[:, n + t * w: n + (t + 1) * w]
        choice = rule.choose(arms, state.pi, state.y, block[:, 3 * n])
        state, _, _ = _advance(arms, state, choice, block, config.beta)
    return state.acc


@functools.lru_cache(maxsize=64)
def _cached_table(arm: ArmParams, solver: SolverConfig, points: int, w_tol: float) -> IndexTable:
    return index_table(arm, solver, points=points, w_tolerance=w_tol, widen=True)


def index_tables(config: SimConfig) -> list[IndexTable]:
    """Per-arm index lookup tables; identical arms share one table."""
    return [_cached_table(a, config.solver, config.index_points, config.index_w_tolerance)
            for a in config.arms]


def episode_rewards(config: SimConfig, policy: Policy, workers: int = 1,
                    tables: Optional[Sequence[IndexTable]] = None) -> np.ndarray:
    """Discounted reward of every episode, in episode order."""
    policy = Policy(policy)
    if config.episodes == 0:
        raise EmptyExperiment("experiment has zero episodes")
    if policy is Policy.INDEX and tables is None:
        tables = index_tables(config)
    bounds = [(s, min(s + CHUNK_EPISODES, config.episodes))
              for s in range(0, config.episodes, CHUNK_EPISODES)]
    if workers <= 1 or len(bounds) == 1:
        parts = [_run_chunk(config, policy, tables, s, e) for s, e in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_run_chunk, config, policy, tables, s, e) for s, e in bounds]
            parts = [f.result() for f in futs]
    return np.concatenate(parts)


def simulate_episode(config: SimConfig, policy: Policy, episode: int,
                     tables: Optional[Sequence[IndexTable]] = None) -> EpisodeTrace:
    """Full per-slot trace of one episode, driven through ``step``."""
    policy = Policy(policy)
    if policy is Policy.INDEX and tables is None:
        tables = index_tables(config)
    rule = _make_rule(policy, tables)
    n = len(config.arms)
    rng = np.random.default_rng([config.seed, episode])
    state = SimState.initial(config, rng.random(n)[None, :])
    trace = EpisodeTrace(episode, policy, config.beta)
    for _ in range(config.resolved_horizon()):
        state, rec = step(state, rule, rng, config.arms, config.beta)
        trace.slots.append(rec)
    return trace


@dataclass
class PolicyStats:
    policy: Policy
    mean_reward: float
    stderr: float
    episodes: int

    @classmethod
    def of(cls, policy: Policy, rewards: np.ndarray) -> "PolicyStats":
        m = len(rewards)
        se = float(np.std(rewards, ddof=1) / math.sqrt(m)) if m > 1 else float("nan")
        return cls(policy, float(np.mean(rewards)), se, m)


@dataclass
class Gain:
    """Index over myopic, from paired (same-seed) episode rewards."""

    pct: float
    diff_mean: float
    diff_stderr: float

    @property
    def ci95(self) -> tuple[float, float]:
        h = Z95 * self.diff_stderr
        return self.diff_mean - h, self.diff_mean + h

    @property
    def significant(self) -> bool:
        lo, hi = self.ci95
        return lo > 0.0 or hi < 0.0


@dataclass
class SimReport:
    beta: float
    horizon: int
    stats: dict[Policy, PolicyStats]
    gain: Optional[Gain] = None

    def rows(self) -> list[dict]:
        out = []
        for p, s in self.stats.items():
            g = self.gain.pct if (self.gain is not None and p is Policy.INDEX) else None
            out.append({"beta": self.beta, "policy": p.value, "mean_reward": s.mean_reward,
                        "stderr": s.stderr, "episodes": s.episodes, "gain_pct": g})
        return out

    def to_dict(self) -> dict:
        d = {"beta": self.beta, "horizon": self.horizon, "policies": self.rows()}
        if self.gain is not None:
            lo, hi = self.gain.ci95
            d["gain"] = {"pct": self.gain.pct, "diff_mean": self.gain.diff_mean,
                         "diff_stderr": self.gain.diff_stderr, "ci95": [lo, hi],
                         "significant": self.gain.significant}
        return d


def run_experiment(config: SimConfig, workers: int = 1) -> SimReport:
    """Run every configured policy on the same episode streams."""
    if config.episodes == 0:
        raise EmptyExperiment("experiment has zero episodes")
    tables = index_tables(config) if Policy.INDEX in config.policies else None
    per = {p: episode_rewards(config, p, workers, tables) for p in dict.fromkeys(config.policies)}
    stats = {p: PolicyStats.of(p, r) for p, r in per.items()}
    gain = None
    if Policy.INDEX in per and Policy.MYOPIC in per:
        d = per[Policy.INDEX] - per[Policy.MYOPIC]
        myo = stats[Policy.MYOPIC].mean_reward
        pct = 100.0 * (stats[Policy.INDEX].mean_reward - myo) / myo if myo != 0 else float("nan")
        se = float(np.std(d, ddof=1) / math.sqrt(len(d))) if len(d) > 1 else float("nan")
        gain = Gain(pct, float(np.mean(d)), se)
    return SimReport(config.beta, config.resolved_horizon(), stats, gain)


def compare_policies(config: SimConfig, betas: Optional[Sequence[float]] = None,
                     workers: int = 1) -> list[SimReport]:
    """One report per discount factor, index and myopic on common seeds."""
    betas = [config.beta] if not betas else list(betas)
    pols = tuple(dict.fromkeys((Policy.INDEX, Policy.MYOPIC) + config.policies))
    return [run_experiment(replace(config, beta=float(b), policies=pols), workers) for b in betas]
