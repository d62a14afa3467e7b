"""Value iteration for the single-arm subsidy problem on a belief grid.

The belief axis is a uniform grid on [0, 1]. Successor beliefs that fall
between grid points are evaluated by linear interpolation, which turns the
problem into a finite MDP on ``2 * grid_points`` states. The successor
structure depends only on the arm and the grid, so it is built once per arm
and reused for every subsidy.
"""
from __future__ import annotations

import enum
import functools
import logging
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from . import model
from .errors import NotConverged
from .model import ArmParams, Kind

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    beta: float
    subsidy_w: float = 0.0
    grid_points: int = 1001
    tolerance: float = 1e-9
    max_iterations: int = 100_000

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def with_w(self, w: float) -> "SolverConfig":
        return replace(self, subsidy_w=float(w))


@dataclass
class ValueTables:
    grid: np.ndarray
    v_s: np.ndarray
    v_ns: np.ndarray
    v_tilde_s: np.ndarray
    v_tilde_ns: np.ndarray
    v: np.ndarray
    v_tilde: np.ndarray
    w: float = 0.0
    beta: float = 0.0
    converged: bool = False
    iterations: int = 0
    residual: float = float("inf")

    @classmethod
    def zeros(cls, n: int, w: float = 0.0, beta: float = 0.0) -> "ValueTables":
        z = np.zeros(n)
        return cls.from_arrays(make_grid(n), z, z, z, z, w=w, beta=beta)

    @classmethod
    def from_arrays(cls, grid, v_s, v_ns, v_tilde_s, v_tilde_ns, **kw) -> "ValueTables":
        v_s, v_ns, v_tilde_s, v_tilde_ns = (np.array(a, dtype=float)
                                           for a in (v_s, v_ns, v_tilde_s, v_tilde_ns))
        return cls(np.asarray(grid, dtype=float), v_s, v_ns, v_tilde_s, v_tilde_ns,
                   np.maximum(v_s, v_ns), np.maximum(v_tilde_s, v_tilde_ns), **kw)

    def play_minus_rest(self, y: int) -> np.ndarray:
        if y == 1:
            return self.v_s - self.v_ns
        return self.v_tilde_s - self.v_tilde_ns

    def diff_at(self, pi: float, y: int) -> float:
        """Interpolated play-minus-rest difference at an arbitrary belief."""
        return float(np.interp(pi, self.grid, self.play_minus_rest(y)))

    def value_at(self, pi: float, y: int) -> float:
        return float(np.interp(pi, self.grid, self.v if y == 1 else self.v_tilde))

    def arrays(self) -> dict[str, np.ndarray]:
        return {"v_s": self.v_s, "v_ns": self.v_ns, "v_tilde_s": self.v_tilde_s,
                "v_tilde_ns": self.v_tilde_ns, "v": self.v, "v_tilde": self.v_tilde}

    def value_range(self) -> float:
        stacked = np.concatenate([self.v_s, self.v_ns, self.v_tilde_s, self.v_tilde_ns])
        return float(np.ptp(stacked))

    def shifted(self, c: float) -> "ValueTables":
        return ValueTables.from_arrays(self.grid, self.v_s + c, self.v_ns + c,
                                       self.v_tilde_s + c, self.v_tilde_ns + c,
                                       w=self.w, beta=self.beta, converged=self.converged,
                                       iterations=self.iterations, residual=self.residual)

    def require_converged(self) -> "ValueTables":
        if not self.converged:
            raise NotConverged(
                f"value iteration stopped after {self.iterations} iterations "
                f"with residual {self.residual:.3g}", tables=self)
        return self

    def to_dict(self) -> dict:
        d = {"w": self.w, "beta": self.beta, "converged": self.converged,
             "iterations": self.iterations, "residual": self.residual,
             "grid": self.grid.tolist()}
        d.update({k: v.tolist() for k, v in self.arrays().items()})
        return d


class Action(enum.IntEnum):
    NOT_PLAY = 0
    PLAY = 1


@dataclass
class PolicyTable:
    grid: np.ndarray
    # actions[y] is an int8 array aligned with grid, 1 = play
    actions: dict[int, np.ndarray] = field(default_factory=dict)
    # play-minus-rest value differences, used to refine switch points
    diffs: dict[int, np.ndarray] = field(default_factory=dict)

    def action(self, i: int, y: int) -> Action:
        return Action(int(self.actions[y][i]))


def make_grid(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


@dataclass(frozen=True)
class _Operator:
    """Successor structure of the four value equations on a fixed grid.

    Equation order is [play y=1, rest y=1, play y=0, rest y=0]. Each has up
    to two successor beliefs per grid point (one per observation outcome);
    ``lo``/``frac`` place a successor between grid points ``lo`` and
    ``lo + 1`` and ``weight`` is its probability (0 marks an unused slot).
    ``theta`` is the next-slot availability probability of each equation.
    """

    rewards: np.ndarray  # (2, n): expected play reward for y=1, y=0
    lo: np.ndarray       # (4, 2, n) int64
    frac: np.ndarray     # (4, 2, n)
    weight: np.ndarray   # (4, 2, n)
    theta: np.ndarray    # (4,)


def _interp_weights(s: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.clip(s, 0.0, 1.0) * (n - 1)
    lo = np.minimum(np.floor(x).astype(np.int64), n - 2)
    return lo, x - lo


@functools.lru_cache(maxsize=256)
def _operator(params: ArmParams, n: int) -> _Operator:
    grid = make_grid(n)
    rho = model.success_prob(params, grid)
    xi = model.expected_play_reward(params, grid, 0)

    # zero-probability observation branches are parked on pi with weight 0
    num1, den1 = model.bayes_transition(params, grid, 1)
    num0, den0 = model.bayes_transition(params, grid, 0)
    g1 = model._clamp(np.where(den1 > 0, num1 / np.where(den1 > 0, den1, 1.0), grid))
    g0 = model._clamp(np.where(den0 > 0, num0 / np.where(den0 > 0, den0, 1.0), grid))
    rest1 = model.big_gamma_update(params, grid, 1)
    ones, zeros = np.ones(n), np.zeros(n)

    if params.kind is Kind.RESTED:
        play0 = [(grid, ones), (grid, zeros)]
    else:
        play0 = [(g1, rho), (g0, 1.0 - rho)]
    succ = [
        [(g1, rho), (g0, 1.0 - rho)],
        [(rest1, ones), (grid, zeros)],
        play0,
        [(grid, ones), (grid, zeros)],
    ]
    lo = np.zeros((4, 2, n), dtype=np.int64)
    frac = np.zeros((4, 2, n))
    weight = np.zeros((4, 2, n))
    for e, pair in enumerate(succ):
        for k, (s, wt) in enumerate(pair):
            lo[e, k], frac[e, k] = _interp_weights(s, n)
            weight[e, k] = wt
    th = params.theta
    theta = np.array([th[1][1], th[0][1], th[1][0], th[0][0]])
    return _Operator(rewards=np.vstack((rho, xi)), lo=lo, frac=frac, weight=weight, theta=theta)


@numba.njit(cache=True)
def _iterate(rewards, lo, frac, weight, theta, beta, w, vals, tol, max_iter, residuals):
    """Synchronous value iteration in place on ``vals`` (rows v_s, v_ns,
    v_tilde_s, v_tilde_ns). Returns (sweeps, last residual)."""
    n = vals.shape[1]
    mix = np.empty((4, n))
    new = np.empty((4, n))
    residual = np.inf
    it = 0
    while it < max_iter:
        for i in range(n):
            v = max(vals[0, i], vals[1, i])
            vt = max(vals[2, i], vals[3, i])
            for e in range(4):
                mix[e, i] = theta[e] * v + (1.0 - theta[e]) * vt
        residual = 0.0
        for e in range(4):
            for i in range(n):
                acc = 0.0
                for k in range(2):
                    wt = weight[e, k, i]
                    if wt == 0.0:
                        continue
                    j = lo[e, k, i]
                    f = frac[e, k, i]
                    if f == 0.0:
                        acc += wt * mix[e, j]
                    else:
                        acc += wt * ((1.0 - f) * mix[e, j] + f * mix[e, j + 1])
                if e == 0:
                    base = rewards[0, i]
                elif e == 2:
                    base = rewards[1, i]
                else:
                    base = w
                val = base + beta * acc
                d = abs(val - vals[e, i])
                if d > residual:
                    residual = d
                new[e, i] = val
        for e in range(4):
            for i in range(n):
                vals[e, i] = new[e, i]
        if it < residuals.shape[0]:
            residuals[it] = residual
        it += 1
        if residual < tol:
            break
    return it, residual


def _run(params: ArmParams, config: SolverConfig, vals: np.ndarray, max_iter: int,
         residuals: np.ndarray) -> tuple[int, float]:
    op = _operator(params, config.grid_points)
    return _iterate(op.rewards, op.lo, op.frac, op.weight, op.theta, float(config.beta),
                    float(config.subsidy_w), vals, float(config.tolerance), int(max_iter),
                    residuals)


def _stack(t: ValueTables) -> np.ndarray:
    return np.vstack((t.v_s, t.v_ns, t.v_tilde_s, t.v_tilde_ns)).astype(float)


def _unstack(vals: np.ndarray, config: SolverConfig, **kw) -> ValueTables:
    return ValueTables.from_arrays(make_grid(config.grid_points), vals[0], vals[1], vals[2],
                                   vals[3], w=config.subsidy_w, beta=config.beta, **kw)


def bellman_backup(params: ArmParams, config: SolverConfig, current: ValueTables) -> ValueTables:
    """One synchronous backup of all four value equations."""
    if current.grid.shape != (config.grid_points,):
        raise ValueError("tables are not aligned with the configured grid")
    vals = _stack(current)
    res = np.empty(1)
    _, residual = _run(params, config, vals, 1, res)
    return _unstack(vals, config, iterations=current.iterations + 1, residual=residual,
                    converged=residual < config.tolerance)


def solve(params: ArmParams, config: SolverConfig, *, record_residuals: bool = False,
          initial: ValueTables | None = None):
    """Iterate the backup from zero tables until the sup-norm change drops
    below ``config.tolerance`` or the iteration cap is hit.

    Non-convergence is reported through ``converged=False`` rather than an
    exception; call ``require_converged`` to turn it into ``NotConverged``.
    With ``record_residuals`` a list of per-sweep residuals is returned too.
    """
    n = config.grid_points
    vals = np.zeros((4, n)) if initial is None else _stack(initial)
    res = np.empty(config.max_iterations if record_residuals else 0)
    it, residual = _run(params, config, vals, config.max_iterations, res)
    converged = residual < config.tolerance
    if not converged:
        log.warning("value iteration hit max_iterations=%d (residual %.3g)",
                    config.max_iterations, residual)
    tables = _unstack(vals, config, converged=converged, iterations=it, residual=residual)
    if record_residuals:
        return tables, res[:it].tolist()
    return tables


def error_bound(config: SolverConfig, tables: ValueTables) -> float:
    """Distance to the fixed point implied by the last residual."""
    return tables.residual * config.beta / (1.0 - config.beta)


def extract_policy(tables: ValueTables) -> PolicyTable:
    """Play exactly where the play value strictly exceeds the rest value."""
    pol = PolicyTable(grid=tables.grid)
    for y in (0, 1):
        d = tables.play_minus_rest(y)
        pol.diffs[y] = d
        pol.actions[y] = (d > 0).astype(np.int8)
    return pol
